#ifndef RIDGEPATH_EXPERIMENTS_HPP
#define RIDGEPATH_EXPERIMENTS_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "ridgepath/comparison.hpp"
#include "ridgepath/core_spectral.hpp"
#include "ridgepath/error.hpp"
#include "ridgepath/estimators.hpp"
#include "ridgepath/risk_analysis.hpp"
#include "ridgepath/rng.hpp"

namespace ridgepath {

// ---------------------------------------------------------------------------
// Simulation configuration

/// r eigenvalues at `high`, the remaining p - r at `low`.
struct SpikedSpectrum {
    Index r = 5;
    double high = 100.0;
    double low = 1.0;
};
/// s_i = i^{-alpha}.
struct PolyDecaySpectrum {
    double alpha = 2.0;
};
/// s_i = (1 - i/(p+1))^beta.
struct BetaProfileSpectrum {
    double beta = 2.0;
};
struct ExplicitSpectrum {
    std::vector<double> values;
};
using SpectrumGen =
    std::variant<SpikedSpectrum, PolyDecaySpectrum, BetaProfileSpectrum, ExplicitSpectrum>;

/// β₀ ~ N(0, tau²/p I_p), drawn once per experiment.
struct GaussianIsotropicBeta {
    double tau = 1.0;
};
struct FixedBeta {
    std::vector<double> values;
};
using BetaLaw = std::variant<GaussianIsotropicBeta, FixedBeta>;

struct SimConfig {
    Index n = 100;
    Index p = 125;
    SpectrumGen spectrum = SpikedSpectrum{};
    double sigma2 = 6.0;
    double lambda = 3.0;
    BetaLaw beta0 = GaussianIsotropicBeta{};
    int replicates = 100;
    std::uint64_t seed = 1;
    /// Random orthogonal eigenbasis for Σ instead of the coordinate axes.
    bool rotate = false;
    /// All replicates share the design of replicate 0 (fresh noise only).
    bool fixed_design = false;
    /// GD step; 0 selects 1/(2λ + ‖Σ̂‖) per replicate.
    double eta = 0.0;
    Index cg_max = 30;
    int cg_subdivisions = 8;
    long gd_max = 1000;
    int gd_points = 64;
};

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(trim(cur));
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e)
        throw InputError("config key '" + key + "': cannot parse number '" + v + "'");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const char* b = v.data();
    const char* e = v.data() + v.size();
    auto [ptr, ec] = std::from_chars(b, e, out);
    if (ec != std::errc() || ptr != e)
        throw InputError("config key '" + key + "': cannot parse integer '" + v + "'");
    return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "no") return false;
    throw InputError("config key '" + key + "': expected a boolean, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& item : split(v, ',')) out.push_back(parse_double(key, item));
    return out;
}

/// Shortest decimal representation that round-trips.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

inline std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ',';
        s += format_double(v[i]);
    }
    return s;
}

} // namespace detail

/// Applies one `key = value` setting; unknown keys are rejected.
inline void apply_setting(SimConfig& cfg, const std::string& key_in, const std::string& value_in) {
    using namespace detail;
    const std::string key = trim(key_in);
    const std::string v = trim(value_in);
    if (key == "n") {
        cfg.n = parse_int(key, v);
    } else if (key == "p") {
        cfg.p = parse_int(key, v);
    } else if (key == "sigma2") {
        cfg.sigma2 = parse_double(key, v);
    } else if (key == "lambda") {
        cfg.lambda = parse_double(key, v);
    } else if (key == "replicates") {
        cfg.replicates = static_cast<int>(parse_int(key, v));
    } else if (key == "seed") {
        cfg.seed = static_cast<std::uint64_t>(parse_int(key, v));
    } else if (key == "rotate") {
        cfg.rotate = parse_bool(key, v);
    } else if (key == "fixed_design") {
        cfg.fixed_design = parse_bool(key, v);
    } else if (key == "eta") {
        cfg.eta = parse_double(key, v);
    } else if (key == "cg_max") {
        cfg.cg_max = parse_int(key, v);
    } else if (key == "cg_subdivisions") {
        cfg.cg_subdivisions = static_cast<int>(parse_int(key, v));
    } else if (key == "gd_max") {
        cfg.gd_max = static_cast<long>(parse_int(key, v));
    } else if (key == "gd_points") {
        cfg.gd_points = static_cast<int>(parse_int(key, v));
    } else if (key == "spectrum") {
        const auto colon = v.find(':');
        const std::string kind = trim(v.substr(0, colon));
        const std::string args = colon == std::string::npos ? "" : v.substr(colon + 1);
        const auto list = args.empty() ? std::vector<double>{} : parse_list(key, args);
        if (kind == "spiked" && list.size() == 3)
            cfg.spectrum = SpikedSpectrum{static_cast<Index>(list[0]), list[1], list[2]};
        else if (kind == "poly" && list.size() == 1)
            cfg.spectrum = PolyDecaySpectrum{list[0]};
        else if (kind == "beta" && list.size() == 1)
            cfg.spectrum = BetaProfileSpectrum{list[0]};
        else if (kind == "explicit" && !list.empty())
            cfg.spectrum = ExplicitSpectrum{list};
        else
            throw InputError("config key 'spectrum': expected spiked:r,high,low | poly:alpha | "
                             "beta:beta | explicit:v1,..., got '" + v + "'");
    } else if (key == "beta0") {
        const auto colon = v.find(':');
        const std::string kind = trim(v.substr(0, colon));
        const std::string args = colon == std::string::npos ? "" : v.substr(colon + 1);
        if (kind == "gaussian")
            cfg.beta0 = GaussianIsotropicBeta{args.empty() ? 1.0 : parse_double(key, trim(args))};
        else if (kind == "fixed" && !args.empty())
            cfg.beta0 = FixedBeta{parse_list(key, args)};
        else
            throw InputError("config key 'beta0': expected gaussian[:tau] | fixed:v1,..., got '" + v + "'");
    } else {
        throw InputError("unknown config key '" + key + "'");
    }
}

inline void validate(const SimConfig& cfg) {
    detail::require(cfg.n >= 1 && cfg.p >= 1, "config: n and p must be positive");
    detail::require(cfg.replicates >= 1, "config: replicates must be at least 1");
    detail::require(cfg.sigma2 >= 0.0, "config: sigma2 must be non-negative");
    detail::require(cfg.lambda >= 0.0, "config: lambda must be non-negative");
    detail::require(cfg.eta >= 0.0, "config: eta must be non-negative");
    detail::require(cfg.cg_max >= 0 && cfg.cg_subdivisions >= 1, "config: invalid CG grid");
    detail::require(cfg.gd_max >= 0 && cfg.gd_points >= 1, "config: invalid GD grid");
    if (const auto* sp = std::get_if<SpikedSpectrum>(&cfg.spectrum))
        detail::require(sp->r >= 0 && sp->r <= cfg.p && sp->high >= 0.0 && sp->low >= 0.0,
                        "config: invalid spiked spectrum");
    if (const auto* ex = std::get_if<ExplicitSpectrum>(&cfg.spectrum)) {
        detail::require(static_cast<Index>(ex->values.size()) == cfg.p,
                        "config: explicit spectrum must have p values");
        for (double v : ex->values) detail::require(v >= 0.0, "config: spectrum values must be non-negative");
    }
    if (const auto* fb = std::get_if<FixedBeta>(&cfg.beta0))
        detail::require(static_cast<Index>(fb->values.size()) == cfg.p,
                        "config: fixed beta0 must have p values");
}

/// Parses flat `key = value` text; '#' starts a comment.
inline SimConfig parse_config(const std::string& text, SimConfig cfg = {}) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InputError("config line " + std::to_string(lineno) + ": expected key = value");
        apply_setting(cfg, line.substr(0, eq), line.substr(eq + 1));
    }
    return cfg;
}

inline SimConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open config file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

inline std::string config_to_text(const SimConfig& cfg) {
    using detail::format_double;
    std::ostringstream out;
    out << "n = " << cfg.n << "\n" << "p = " << cfg.p << "\n";
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            out << "spectrum = ";
            if constexpr (std::is_same_v<T, SpikedSpectrum>)
                out << "spiked:" << g.r << "," << format_double(g.high) << "," << format_double(g.low);
            else if constexpr (std::is_same_v<T, PolyDecaySpectrum>)
                out << "poly:" << format_double(g.alpha);
            else if constexpr (std::is_same_v<T, BetaProfileSpectrum>)
                out << "beta:" << format_double(g.beta);
            else
                out << "explicit:" << detail::join(g.values);
            out << "\n";
        },
        cfg.spectrum);
    out << "sigma2 = " << format_double(cfg.sigma2) << "\n";
    out << "lambda = " << format_double(cfg.lambda) << "\n";
    if (const auto* g = std::get_if<GaussianIsotropicBeta>(&cfg.beta0))
        out << "beta0 = gaussian:" << format_double(g->tau) << "\n";
    else
        out << "beta0 = fixed:" << detail::join(std::get<FixedBeta>(cfg.beta0).values) << "\n";
    out << "replicates = " << cfg.replicates << "\n";
    out << "seed = " << cfg.seed << "\n";
    out << "rotate = " << (cfg.rotate ? "true" : "false") << "\n";
    out << "fixed_design = " << (cfg.fixed_design ? "true" : "false") << "\n";
    out << "eta = " << format_double(cfg.eta) << "\n";
    out << "cg_max = " << cfg.cg_max << "\n";
    out << "cg_subdivisions = " << cfg.cg_subdivisions << "\n";
    out << "gd_max = " << cfg.gd_max << "\n";
    out << "gd_points = " << cfg.gd_points << "\n";
    return out.str();
}

/// Population eigenvalues of Σ, length p.
inline Vector population_spectrum(const SimConfig& cfg) {
    Vector s(cfg.p);
    const auto pd = static_cast<double>(cfg.p);
    std::visit(
        [&](const auto& g) {
            using T = std::decay_t<decltype(g)>;
            for (Index i = 0; i < cfg.p; ++i) {
                const double idx = static_cast<double>(i + 1);
                if constexpr (std::is_same_v<T, SpikedSpectrum>)
                    s(i) = i < g.r ? g.high : g.low;
                else if constexpr (std::is_same_v<T, PolyDecaySpectrum>)
                    s(i) = std::pow(idx, -g.alpha);
                else if constexpr (std::is_same_v<T, BetaProfileSpectrum>)
                    s(i) = std::pow(1.0 - idx / (pd + 1.0), g.beta);
                else
                    s(i) = g.values[static_cast<std::size_t>(i)];
            }
        },
        cfg.spectrum);
    return s;
}

/// Uniformly random orthogonal matrix (Haar) from QR of a Gaussian matrix.
inline Matrix random_orthogonal(Index p, RandomStream& rng) {
    Matrix G(p, p);
    for (Index i = 0; i < p; ++i)
        for (Index j = 0; j < p; ++j) G(i, j) = rng.normal();
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ() * Matrix::Identity(p, p);
    const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Index j = 0; j < p; ++j)
        if (R(j, j) < 0.0) Q.col(j) *= -1.0;
    return Q;
}

struct Sample {
    Dataset data;
    ModelTruth truth;
};

/// Draws replicate r. Streams: β₀ from (seed, 0, "beta0"), eigenbasis from
/// (seed, 0, "rotation"), design rows from (seed, r', "design") with r' = 0
/// under fixed_design, noise from (seed, r, "noise"). Gaussian matrices are
/// filled row by row.
inline Sample generate(const SimConfig& cfg, int replicate) {
    validate(cfg);
    const Index n = cfg.n, p = cfg.p;
    const Vector pop = population_spectrum(cfg);

    Vector beta0(p);
    if (const auto* g = std::get_if<GaussianIsotropicBeta>(&cfg.beta0)) {
        RandomStream rng(cfg.seed, 0, "beta0");
        const double sd = g->tau / std::sqrt(static_cast<double>(p));
        for (Index j = 0; j < p; ++j) beta0(j) = sd * rng.normal();
    } else {
        const auto& v = std::get<FixedBeta>(cfg.beta0).values;
        beta0 = Eigen::Map<const Vector>(v.data(), p);
    }

    Matrix basis = Matrix::Identity(p, p);
    if (cfg.rotate) {
        RandomStream rng(cfg.seed, 0, "rotation");
        basis = random_orthogonal(p, rng);
    }

    RandomStream design(cfg.seed, static_cast<std::uint32_t>(cfg.fixed_design ? 0 : replicate), "design");
    Matrix Z(n, p);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < p; ++j) Z(i, j) = design.normal();
    Matrix X = Z * pop.cwiseSqrt().asDiagonal();
    if (cfg.rotate) X = X * basis.transpose();

    Vector y = X * beta0;
    if (cfg.sigma2 > 0.0) {
        RandomStream noise(cfg.seed, static_cast<std::uint32_t>(replicate), "noise");
        const double sd = std::sqrt(cfg.sigma2);
        for (Index i = 0; i < n; ++i) y(i) += sd * noise.normal();
    }

    Sample out;
    out.data = Dataset{std::move(X), std::move(y)};
    out.truth.beta0 = beta0;
    out.truth.sigma2 = cfg.sigma2;
    out.truth.Sigma = basis * pop.asDiagonal() * basis.transpose();
    return out;
}

// ---------------------------------------------------------------------------
// Path runs

enum class Method { CG, GD, GF, RR };

inline std::string method_name(Method m) {
    switch (m) {
    case Method::CG: return "CG";
    case Method::GD: return "GD";
    case Method::GF: return "GF";
    case Method::RR: return "RR";
    }
    return "?";
}

inline Method parse_method(const std::string& s) {
    if (s == "CG") return Method::CG;
    if (s == "GD") return Method::GD;
    if (s == "GF") return Method::GF;
    if (s == "RR") return Method::RR;
    throw InputError("unknown method '" + s + "'");
}

/// One grid point of one path. For CG `param` is the interpolated iteration
/// t; for GD, GF and RR it is the GD iteration k, with GF evaluated at time
/// ηk and RR at penalty λ + 1/(ηk).
struct PathRecord {
    Method method = Method::CG;
    double param = 0.0;
    std::string gamma;
    double A = std::numeric_limits<double>::quiet_NaN();
    double S = std::numeric_limits<double>::quiet_NaN();
    double C = std::numeric_limits<double>::quiet_NaN();
    double total_mean = 0.0;
    double total_se = 0.0;
    std::optional<double> bound_rhs;
    std::optional<bool> satisfied;
    /// Per-replicate losses and cross terms (not exported).
    std::vector<double> totals;
    std::vector<double> cross;
    /// GF rows: mean of τ at time ηk.
    double tau_mean = std::numeric_limits<double>::quiet_NaN();
};

/// Pairwise (cascade) sum in index order.
inline double pairwise_sum(const double* v, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(v, h) + pairwise_sum(v + h, n - h);
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error sample_sd/√m (0 for a single replicate).
inline MeanSe mean_se(const std::vector<double>& v) {
    MeanSe out;
    const std::size_t m = v.size();
    if (m == 0) return out;
    out.mean = pairwise_sum(v.data(), m) / static_cast<double>(m);
    if (m > 1) {
        std::vector<double> dev(m);
        for (std::size_t i = 0; i < m; ++i) dev[i] = (v[i] - out.mean) * (v[i] - out.mean);
        const double var = pairwise_sum(dev.data(), m) / static_cast<double>(m - 1);
        out.se = std::sqrt(var / static_cast<double>(m));
    }
    return out;
}

/// Quadratically spaced, de-duplicated iteration counts in [0, gd_max].
inline std::vector<long> gd_grid(long gd_max, int points) {
    std::vector<long> g;
    for (int j = 0; j < points; ++j) {
        const double u = points == 1 ? 1.0 : static_cast<double>(j) / (points - 1);
        g.push_back(std::lround(static_cast<double>(gd_max) * u * u));
    }
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
}

/// Worker count from RIDGEPATH_THREADS, else the hardware concurrency.
inline unsigned worker_count() {
    if (const char* env = std::getenv("RIDGEPATH_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(i) for i in [0, count) on up to `workers` threads. Results must
/// be written to per-index slots; the first exception is rethrown.
inline void parallel_for(int count, unsigned workers, const std::function<void(int)>& body) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max(count, 1))));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = next++; i < count; i = next++) body(i);
            } catch (...) {
                errors[w] = std::current_exception();
                next = count;
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

/// A failed identity or inequality check found during a run.
struct Violation {
    std::string module;
    std::string operation;
    int replicate = 0;
    double param = 0.0;
    std::string detail;

    std::string message() const {
        return module + "::" + operation + " violated at replicate " + std::to_string(replicate) +
               ", param " + detail::format_double(param) + ": " + detail;
    }
};

struct PathRun {
    SimConfig config;
    std::vector<double> cg_grid_points;
    std::vector<long> gd_grid_points;
    std::vector<PathRecord> records;
    std::vector<Violation> violations;
    /// Largest relative gap of the additive error identities.
    double max_identity_gap = 0.0;
    /// Largest ‖β̂_CG(stop) - β̂_λ‖ / ‖β̂_λ‖ over replicates.
    double max_terminal_gap = 0.0;
    std::vector<Index> stop_indices;
};

namespace detail {

struct SlotValue {
    double A = 0, S = 0, C = 0, total = 0;
    double bound = std::numeric_limits<double>::quiet_NaN();
    int satisfied = -1;
    double tau = std::numeric_limits<double>::quiet_NaN();
};

inline double relative_gap(double total, const ErrorBreakdown& e) {
    const double scale = std::max({std::abs(total), std::abs(e.A), std::abs(e.S),
                                   std::abs(2.0 * e.C), 1e-300});
    return std::abs(total - (e.A + e.S - 2.0 * e.C)) / scale;
}

struct ReplicateResult {
    std::vector<SlotValue> slots;
    std::vector<Violation> violations;
    double identity_gap = 0.0;
    double terminal_gap = 0.0;
    Index stop_index = 0;
};

} // namespace detail

inline constexpr double kIdentityTolerance = 1e-9;
inline constexpr double kCgIdentityTolerance = 1e-8;

/// Monte Carlo regularisation paths for CG, GD, GF and RR with targets β₀ and
/// β_λ. Identity and bound checks are recorded as violations.
inline PathRun run_paths(const SimConfig& cfg, unsigned workers = worker_count()) {
    validate(cfg);
    PathRun run;
    run.config = cfg;
    run.cg_grid_points = cg_grid(cfg.cg_max, cfg.cg_subdivisions);
    run.gd_grid_points = gd_grid(cfg.gd_max, cfg.gd_points);
    const auto& cgg = run.cg_grid_points;
    const auto& gdg = run.gd_grid_points;
    const std::array<TargetSpec, 2> targets{TargetBeta0{}, TargetBetaLambda{}};

    for (const auto& target : targets) {
        const std::string g = target_name(target);
        for (double t : cgg) run.records.push_back({Method::CG, t, g});
        for (Method m : {Method::GD, Method::GF, Method::RR})
            for (long k : gdg) run.records.push_back({m, static_cast<double>(k), g});
    }

    std::vector<detail::ReplicateResult> results(static_cast<std::size_t>(cfg.replicates));
    parallel_for(cfg.replicates, workers, [&](int r) {
        auto& res = results[static_cast<std::size_t>(r)];
        res.slots.resize(run.records.size());
        const Sample sample = generate(cfg, r);
        const PenalisedSpectrum spec = decompose(sample.data, cfg.lambda, sample.truth);
        const CGTrace trace = cg_solve(spec);
        res.stop_index = trace.stop_index;
        const double eta = cfg.eta > 0.0 ? cfg.eta : default_step(spec);
        const double lambda = spec.lambda();
        const double t_admissible = 0.5 / spec.norm();

        auto flag = [&](const char* module, const char* op, double param, std::string what) {
            res.violations.push_back({module, op, r, param, std::move(what)});
        };

        const Vector rr = ridge(spec, lambda);
        const double rr_norm = rr.norm();
        res.terminal_gap = (trace.iterates.back() - rr).norm() / std::max(rr_norm, 1e-300);

        std::size_t slot = 0;
        for (const auto& target : targets) {
            const bool intrinsic = std::holds_alternative<TargetBetaLambda>(target);
            const Vector gamma = resolve_target(spec, target);
            for (double t_grid : cgg) {
                const double t = std::min(t_grid, static_cast<double>(trace.stop_index));
                auto& v = res.slots[slot++];
                ErrorBreakdown e;
                double tol = kCgIdentityTolerance;
                if (intrinsic) {
                    e = decompose_cg(spec, trace, t);
                } else {
                    e = decompose_filter(spec, cg_filter_values(spec, trace, t), gamma);
                    e.total = loss_in(spec, cg_interpolated(trace, t), gamma);
                }
                const double gap = detail::relative_gap(e.total, e);
                res.identity_gap = std::max(res.identity_gap, gap);
                if (gap > tol)
                    flag("risk_analysis", intrinsic ? "decompose_cg" : "decompose_filter", t_grid,
                         "relative identity gap " + detail::format_double(gap));
                const CGBound b = cg_bound(spec, trace, t, target);
                v = {e.A, e.S, e.C, e.total, b.bound_total, e.total <= b.bound_total * (1 + 1e-9) ? 1 : 0};
                if (!v.satisfied)
                    flag("risk_analysis", "cg_bound", t_grid,
                         "loss " + detail::format_double(e.total) + " > bound " +
                             detail::format_double(b.bound_total));
            }
            for (long k : gdg) {
                auto& v = res.slots[slot++];
                const ErrorBreakdown e = decompose_linear(spec, GradientDescent{eta, k}, target);
                v = {e.A, e.S, e.C, e.total};
                const double gap = detail::relative_gap(e.total, e);
                res.identity_gap = std::max(res.identity_gap, gap);
                if (gap > kIdentityTolerance)
                    flag("risk_analysis", "decompose_linear(GD)", static_cast<double>(k),
                         "relative identity gap " + detail::format_double(gap));
            }
            for (long k : gdg) {
                auto& v = res.slots[slot++];
                const double t = eta * static_cast<double>(k);
                const ErrorBreakdown e = decompose_linear(spec, GradientFlow{t}, target);
                v = {e.A, e.S, e.C, e.total};
                v.tau = tau(trace, t);
                const double gap = detail::relative_gap(e.total, e);
                res.identity_gap = std::max(res.identity_gap, gap);
                if (gap > kIdentityTolerance)
                    flag("risk_analysis", "decompose_linear(GF)", static_cast<double>(k),
                         "relative identity gap " + detail::format_double(gap));
                if (t >= t_admissible) {
                    const ComparisonRecord c = check_main_bound(spec, trace, target, t, RiskMode::Analytic);
                    v.bound = c.rhs;
                    v.satisfied = c.satisfied ? 1 : 0;
                    if (!c.satisfied)
                        flag("comparison", "check_main_bound", static_cast<double>(k),
                             "lhs " + detail::format_double(c.lhs) + " > rhs " + detail::format_double(c.rhs));
                }
            }
            for (long k : gdg) {
                auto& v = res.slots[slot++];
                const double lp = k == 0 ? std::numeric_limits<double>::infinity()
                                         : lambda + 1.0 / (eta * static_cast<double>(k));
                const ErrorBreakdown e = decompose_linear(spec, Ridge{lp}, target);
                v = {e.A, e.S, e.C, e.total};
                const double gap = detail::relative_gap(e.total, e);
                res.identity_gap = std::max(res.identity_gap, gap);
                if (gap > kIdentityTolerance)
                    flag("risk_analysis", "decompose_linear(RR)", static_cast<double>(k),
                         "relative identity gap " + detail::format_double(gap));
                const double rr_risk = risk_linear(spec, Ridge{lp}, target);
                const double gf_risk = risk_linear(spec, GradientFlow{eta * static_cast<double>(k)}, target);
                v.bound = kGfRidgeFactor * kGfRidgeFactor * rr_risk;
                v.satisfied = gf_risk <= v.bound * (1 + 1e-9) ? 1 : 0;
                if (!v.satisfied)
                    flag("risk_analysis", "risk_linear(GF vs RR)", static_cast<double>(k),
                         "GF risk " + detail::format_double(gf_risk) + " > " + detail::format_double(v.bound));
            }
        }
    });

    // ordered reduction
    for (std::size_t s = 0; s < run.records.size(); ++s) {
        auto& rec = run.records[s];
        std::vector<double> A, S, C, T, B, tau;
        bool has_bound = false, all_ok = true;
        for (const auto& res : results) {
            const auto& v = res.slots[s];
            A.push_back(v.A);
            S.push_back(v.S);
            C.push_back(v.C);
            T.push_back(v.total);
            if (v.satisfied >= 0) {
                has_bound = true;
                B.push_back(v.bound);
                all_ok = all_ok && v.satisfied == 1;
            }
            if (!std::isnan(v.tau)) tau.push_back(v.tau);
        }
        rec.A = mean_se(A).mean;
        rec.S = mean_se(S).mean;
        rec.C = mean_se(C).mean;
        const MeanSe tot = mean_se(T);
        rec.total_mean = tot.mean;
        rec.total_se = tot.se;
        rec.totals = T;
        rec.cross = C;
        if (has_bound) {
            rec.bound_rhs = mean_se(B).mean;
            rec.satisfied = all_ok;
        }
        if (!tau.empty()) rec.tau_mean = mean_se(tau).mean;
    }
    for (const auto& res : results) {
        run.violations.insert(run.violations.end(), res.violations.begin(), res.violations.end());
        run.max_identity_gap = std::max(run.max_identity_gap, res.identity_gap);
        run.max_terminal_gap = std::max(run.max_terminal_gap, res.terminal_gap);
        run.stop_indices.push_back(res.stop_index);
    }
    return run;
}

// ---------------------------------------------------------------------------
// Serialisation

inline constexpr const char* kCsvHeader =
    "method,param,gamma,A,S,C,total_mean,total_se,bound_rhs,satisfied";

inline std::vector<std::string> run_metadata(const SimConfig& cfg) {
    std::vector<std::string> meta;
    meta.push_back("generator: philox4x32-10, streams keyed by (seed, replicate, purpose), box-muller normals");
    meta.push_back("seed: " + std::to_string(cfg.seed));
    meta.push_back("replicates: " + std::to_string(cfg.replicates) +
                   (cfg.replicates < 1000 ? " (desk scale)" : ""));
    std::istringstream in(config_to_text(cfg));
    std::string line;
    while (std::getline(in, line)) meta.push_back("config: " + line);
    return meta;
}

inline void write_csv(std::ostream& out, const std::vector<PathRecord>& records,
                      const std::vector<std::string>& metadata = {}) {
    using detail::format_double;
    for (const auto& m : metadata) out << "# " << m << "\n";
    out << kCsvHeader << "\n";
    auto opt = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
    for (const auto& r : records) {
        out << method_name(r.method) << ',' << format_double(r.param) << ',' << r.gamma << ','
            << opt(r.A) << ',' << opt(r.S) << ',' << opt(r.C) << ',' << format_double(r.total_mean)
            << ',' << format_double(r.total_se) << ','
            << (r.bound_rhs ? format_double(*r.bound_rhs) : std::string()) << ','
            << (r.satisfied ? (*r.satisfied ? "1" : "0") : "") << "\n";
    }
}

/// Writes the CSV; an unwritable destination raises InputError naming the path.
inline void export_csv(const std::vector<PathRecord>& records, const std::string& path,
                       const std::vector<std::string>& metadata = {}) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    write_csv(out, records, metadata);
    if (!out) throw InputError("write to '" + path + "' failed");
}

/// Plot data: x position on a quadratic axis is √param.
inline void export_plot_data(const std::vector<PathRecord>& records, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot open '" + path + "' for writing");
    out << "method,gamma,param,x_quadratic,total_mean,total_se\n";
    for (const auto& r : records)
        out << method_name(r.method) << ',' << r.gamma << ',' << detail::format_double(r.param) << ','
            << detail::format_double(std::sqrt(r.param)) << ',' << detail::format_double(r.total_mean)
            << ',' << detail::format_double(r.total_se) << "\n";
    if (!out) throw InputError("write to '" + path + "' failed");
}

inline std::vector<PathRecord> read_csv(std::istream& in) {
    std::vector<PathRecord> out;
    std::string line;
    bool header = false;
    auto num = [](const std::string& s) {
        if (s.empty()) return std::numeric_limits<double>::quiet_NaN();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return detail::parse_double("csv", s);
    };
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != kCsvHeader) throw InputError("unexpected CSV header '" + line + "'");
            header = true;
            continue;
        }
        const auto f = detail::split(line, ',');
        if (f.size() != 10) throw InputError("malformed CSV row '" + line + "'");
        PathRecord r;
        r.method = parse_method(f[0]);
        r.param = num(f[1]);
        r.gamma = f[2];
        r.A = num(f[3]);
        r.S = num(f[4]);
        r.C = num(f[5]);
        r.total_mean = num(f[6]);
        r.total_se = num(f[7]);
        if (!f[8].empty()) r.bound_rhs = num(f[8]);
        if (!f[9].empty()) r.satisfied = f[9] == "1";
        out.push_back(std::move(r));
    }
    if (!header) throw InputError("CSV has no header row");
    return out;
}

inline std::vector<PathRecord> import_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return read_csv(in);
}

} // namespace ridgepath

#endif
