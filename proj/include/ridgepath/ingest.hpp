#ifndef RIDGEPATH_INGEST_HPP
#define RIDGEPATH_INGEST_HPP

#include <cmath>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ridgepath/comparison.hpp"
#include "ridgepath/core_spectral.hpp"
#include "ridgepath/error.hpp"
#include "ridgepath/estimators.hpp"
#include "ridgepath/experiments.hpp"
#include "ridgepath/rng.hpp"

namespace ridgepath {

struct LabelledDataset {
    Dataset data;
    std::vector<std::string> feature_names;
    std::string response_name;
};

namespace detail {

inline std::string unquote(std::string s) {
    s = trim(std::move(s));
    if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
    return s;
}

inline std::optional<double> try_number(const std::string& s) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace detail

/// Per-column centring and scaling by the sample standard deviation.
/// Constant columns are only centred.
inline void standardise_columns(Matrix& M) {
    const Index n = M.rows();
    if (n < 2) return;
    for (Index j = 0; j < M.cols(); ++j) {
        const double mean = M.col(j).mean();
        M.col(j).array() -= mean;
        const double sd = std::sqrt(M.col(j).squaredNorm() / static_cast<double>(n - 1));
        if (sd > 0.0) M.col(j) /= sd;
    }
}

/// Reads a comma-separated file with a header row. The response column is
/// selected by name; every other column whose entries all parse as numbers
/// becomes a feature, the rest are skipped.
inline LabelledDataset read_csv_dataset(std::istream& in, const std::string& response_column,
                                        bool standardise, const std::string& source = "<stream>") {
    std::string line;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        for (auto& h : detail::split(line, ',')) header.push_back(detail::unquote(h));
        break;
    }
    if (header.empty()) throw InputError("'" + source + "': missing header row");
    std::vector<std::vector<std::string>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (detail::trim(line).empty()) continue;
        auto fields = detail::split(line, ',');
        if (fields.size() != header.size())
            throw InputError("'" + source + "': row " + std::to_string(rows.size() + 2) + " has " +
                             std::to_string(fields.size()) + " fields, header has " +
                             std::to_string(header.size()));
        for (auto& f : fields) f = detail::unquote(f);
        rows.push_back(std::move(fields));
    }
    if (rows.empty()) throw InputError("'" + source + "': no observations");

    const auto it = std::find(header.begin(), header.end(), response_column);
    if (it == header.end())
        throw InputError("'" + source + "': response column '" + response_column + "' not found");
    const auto resp = static_cast<std::size_t>(it - header.begin());

    std::vector<std::size_t> numeric;
    for (std::size_t c = 0; c < header.size(); ++c) {
        bool ok = true;
        for (const auto& r : rows)
            if (!detail::try_number(r[c])) {
                ok = false;
                break;
            }
        if (c == resp && !ok)
            throw InputError("'" + source + "': response column '" + response_column + "' is not numeric");
        if (ok && c != resp) numeric.push_back(c);
    }
    if (numeric.empty()) throw InputError("'" + source + "': no numeric feature columns");

    const auto n = static_cast<Index>(rows.size());
    LabelledDataset out;
    out.response_name = response_column;
    out.data.X.resize(n, static_cast<Index>(numeric.size()));
    out.data.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        out.data.y(i) = *detail::try_number(r[resp]);
        for (std::size_t j = 0; j < numeric.size(); ++j)
            out.data.X(i, static_cast<Index>(j)) = *detail::try_number(r[numeric[j]]);
    }
    for (auto c : numeric) out.feature_names.push_back(header[c]);
    if (standardise) {
        standardise_columns(out.data.X);
        Matrix ycol = out.data.y;
        standardise_columns(ycol);
        out.data.y = ycol.col(0);
    }
    validate(out.data);
    return out;
}

inline LabelledDataset load_csv_dataset(const std::string& path, const std::string& response_column,
                                        bool standardise) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return read_csv_dataset(in, response_column, standardise, path);
}

/// Real-data workflow: optional random feature subset of size 2n, repeated
/// random train/test splits, out-of-sample ridge criterion along each path.
struct IngestConfig {
    double lambda = 0.1;
    int splits = 1000;
    /// 0 selects round(0.7 n).
    Index train_size = 0;
    /// Keep a random subset of 2n features when p exceeds 2n.
    bool subset = true;
    std::uint64_t seed = 1;
    /// Noise variance for the stochastic-risk columns; absent means criterion only.
    std::optional<double> sigma2;
    double eta = 0.0;
    Index cg_max = 30;
    int cg_subdivisions = 8;
    long gd_max = 1000;
    int gd_points = 64;
};

struct IngestRecord {
    Method method = Method::CG;
    double param = 0.0;
    double criterion_mean = 0.0;
    double criterion_se = 0.0;
    /// Mean (σ²/n) tr((I-R)² Σ̂_λ^{-1} Σ̂) for linear filters; for CG the
    /// expected stochastic bound term (σ²/n) Σ min(ρ_t, 1/μ_i) s_i.
    std::optional<double> stochastic_mean;
    /// GF rows: mean C_{t,λ} at time ηk, where defined.
    std::optional<double> c_t_lambda;
};

struct IngestResult {
    std::vector<Index> feature_subset;
    std::vector<IngestRecord> records;
    Index n_train = 0;
    Index n_test = 0;
};

/// (1/(2m))‖y - Xβ‖² + (λ/2)‖β‖² on held-out data.
inline double ridge_criterion(const Matrix& X, const Vector& y, const Vector& beta, double lambda) {
    const double m = static_cast<double>(X.rows());
    return (y - X * beta).squaredNorm() / (2.0 * m) + 0.5 * lambda * beta.squaredNorm();
}

/// Seeded partial Fisher-Yates: the first k entries of a permutation of [0, n).
inline std::vector<Index> random_subset(Index n, Index k, RandomStream& rng) {
    std::vector<Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Index{0});
    for (Index i = 0; i < k; ++i) {
        const auto span = static_cast<std::uint64_t>(n - i);
        const auto j = i + static_cast<Index>(rng.uniform() * static_cast<double>(span));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(std::min(j, n - 1))]);
    }
    idx.resize(static_cast<std::size_t>(k));
    return idx;
}

inline IngestResult run_ingest(const Dataset& full, const IngestConfig& cfg,
                               unsigned workers = worker_count()) {
    validate(full);
    detail::require(cfg.splits >= 1, "ingest: splits must be at least 1");
    detail::require(cfg.lambda >= 0.0, "ingest: lambda must be non-negative");
    if (cfg.sigma2) detail::require(*cfg.sigma2 >= 0.0, "ingest: sigma2 must be non-negative");
    const Index n = full.n();
    const Index n_train = cfg.train_size > 0 ? cfg.train_size
                                             : static_cast<Index>(std::lround(0.7 * static_cast<double>(n)));
    detail::require(n_train >= 1 && n_train < n, "ingest: train size must lie in [1, n)");

    IngestResult out;
    out.n_train = n_train;
    out.n_test = n - n_train;
    if (cfg.subset && full.p() > 2 * n) {
        RandomStream rng(cfg.seed, 0, "subset");
        out.feature_subset = random_subset(full.p(), 2 * n, rng);
        std::sort(out.feature_subset.begin(), out.feature_subset.end());
    } else {
        out.feature_subset.resize(static_cast<std::size_t>(full.p()));
        std::iota(out.feature_subset.begin(), out.feature_subset.end(), Index{0});
    }
    const auto p = static_cast<Index>(out.feature_subset.size());
    Matrix Xs(n, p);
    for (Index j = 0; j < p; ++j) Xs.col(j) = full.X.col(out.feature_subset[static_cast<std::size_t>(j)]);

    const std::vector<double> cgg = cg_grid(cfg.cg_max, cfg.cg_subdivisions);
    const std::vector<long> gdg = gd_grid(cfg.gd_max, cfg.gd_points);
    for (double t : cgg) out.records.push_back({Method::CG, t});
    for (Method m : {Method::GD, Method::GF, Method::RR})
        for (long k : gdg) out.records.push_back({m, static_cast<double>(k)});
    const std::size_t slots = out.records.size();

    struct SplitResult {
        std::vector<double> crit, stoch, cval;
    };
    std::vector<SplitResult> results(static_cast<std::size_t>(cfg.splits));
    parallel_for(cfg.splits, workers, [&](int sidx) {
        auto& res = results[static_cast<std::size_t>(sidx)];
        res.crit.assign(slots, 0.0);
        res.stoch.assign(slots, std::numeric_limits<double>::quiet_NaN());
        res.cval.assign(slots, std::numeric_limits<double>::quiet_NaN());
        RandomStream rng(cfg.seed, static_cast<std::uint32_t>(sidx), "split");
        const std::vector<Index> perm = random_subset(n, n, rng);
        Dataset train{Matrix(n_train, p), Vector(n_train)};
        Matrix Xt(n - n_train, p);
        Vector yt(n - n_train);
        for (Index i = 0; i < n; ++i) {
            const Index r = perm[static_cast<std::size_t>(i)];
            if (i < n_train) {
                train.X.row(i) = Xs.row(r);
                train.y(i) = full.y(r);
            } else {
                Xt.row(i - n_train) = Xs.row(r);
                yt(i - n_train) = full.y(r);
            }
        }
        const PenalisedSpectrum spec = decompose(train, cfg.lambda, std::nullopt);
        const CGTrace trace = cg_solve(spec);
        const double eta = cfg.eta > 0.0 ? cfg.eta : default_step(spec);
        const double lambda = spec.lambda();
        const double scale = cfg.sigma2 ? *cfg.sigma2 / static_cast<double>(spec.n()) : 0.0;
        auto crit = [&](const Vector& coords) {
            return ridge_criterion(Xt, yt, spec.to_original(coords), lambda);
        };
        auto stoch_linear = [&](const Vector& R) {
            double tr = 0.0;
            for (Index i = 0; i < p; ++i)
                if (spec.s()(i) > 0.0) tr += (1.0 - R(i)) * (1.0 - R(i)) * spec.s()(i) / spec.mu(i);
            return scale * tr;
        };
        std::size_t slot = 0;
        for (double t_grid : cgg) {
            const double t = std::min(t_grid, static_cast<double>(trace.stop_index));
            res.crit[slot] = crit(cg_interpolated(trace, t));
            if (cfg.sigma2) {
                const double rho = residual_polynomial(trace, t).rho_t;
                double tr = 0.0;
                for (Index i = 0; i < p; ++i)
                    if (spec.s()(i) > 0.0) tr += std::min(rho, 1.0 / spec.mu(i)) * spec.s()(i);
                res.stoch[slot] = scale * tr;
            }
            ++slot;
        }
        for (Method m : {Method::GD, Method::GF, Method::RR}) {
            for (long k : gdg) {
                FilterSpec f;
                if (m == Method::GD)
                    f = GradientDescent{eta, k};
                else if (m == Method::GF)
                    f = GradientFlow{eta * static_cast<double>(k)};
                else
                    f = Ridge{k == 0 ? std::numeric_limits<double>::infinity()
                                     : lambda + 1.0 / (eta * static_cast<double>(k))};
                const Vector R = residual_filter(spec, f);
                res.crit[slot] = crit(estimator_from_filter(spec, R));
                if (cfg.sigma2) res.stoch[slot] = stoch_linear(R);
                if (m == Method::GF && k > 0) {
                    const double t = eta * static_cast<double>(k);
                    if (t >= 0.5 / spec.norm()) res.cval[slot] = c_constant(spec.s(), lambda, t).C;
                }
                ++slot;
            }
        }
    });

    for (std::size_t s = 0; s < slots; ++s) {
        std::vector<double> c, st, cv;
        for (const auto& r : results) {
            c.push_back(r.crit[s]);
            if (!std::isnan(r.stoch[s])) st.push_back(r.stoch[s]);
            if (!std::isnan(r.cval[s])) cv.push_back(r.cval[s]);
        }
        const MeanSe m = mean_se(c);
        out.records[s].criterion_mean = m.mean;
        out.records[s].criterion_se = m.se;
        if (!st.empty()) out.records[s].stochastic_mean = mean_se(st).mean;
        if (!cv.empty()) out.records[s].c_t_lambda = mean_se(cv).mean;
    }
    return out;
}

inline void write_ingest_csv(std::ostream& out, const IngestResult& res, bool with_risk,
                             const std::vector<std::string>& metadata = {}) {
    using detail::format_double;
    for (const auto& m : metadata) out << "# " << m << "\n";
    out << "method,param,criterion_mean,criterion_se,C_t_lambda";
    if (with_risk) out << ",stochastic_risk";
    out << "\n";
    for (const auto& r : res.records) {
        out << method_name(r.method) << ',' << format_double(r.param) << ','
            << format_double(r.criterion_mean) << ',' << format_double(r.criterion_se) << ','
            << (r.c_t_lambda ? format_double(*r.c_t_lambda) : std::string());
        if (with_risk)
            out << ',' << (r.stochastic_mean ? format_double(*r.stochastic_mean) : std::string());
        out << "\n";
    }
}

} // namespace ridgepath

#endif
