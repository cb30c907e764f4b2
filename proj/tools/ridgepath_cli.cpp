// ridgepath command-line front end.
//
// Exit codes: 0 success, 1 verification failure, 2 input or config error.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ridgepath/ridgepath.hpp"

namespace rp = ridgepath;

namespace {

struct Common {
    std::string config_path;
    std::vector<std::string> overrides;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::optional<int> replicates;
    std::optional<double> sigma2;
    std::optional<double> lambda;
};

void add_common(CLI::App* sub, Common& c, bool needs_config = true) {
    auto* opt = sub->add_option("--config", c.config_path, "flat key = value config file");
    if (needs_config) opt->required();
    sub->add_option("--set", c.overrides, "override key=value (repeatable)");
    sub->add_option("--out", c.out, "output file (default: stdout)");
    sub->add_option("--seed", c.seed, "seed override");
    sub->add_option("--replicates", c.replicates, "replicate count override");
    sub->add_option("--sigma2", c.sigma2, "noise variance");
    sub->add_option("--lambda", c.lambda, "ridge penalty");
}

rp::SimConfig resolve_config(const Common& c) {
    rp::SimConfig cfg = rp::load_config(c.config_path);
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw rp::InputError("--set expects key=value, got '" + kv + "'");
        rp::apply_setting(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (c.seed) cfg.seed = *c.seed;
    if (c.replicates) cfg.replicates = *c.replicates;
    if (c.sigma2) cfg.sigma2 = *c.sigma2;
    if (c.lambda) cfg.lambda = *c.lambda;
    rp::validate(cfg);
    return cfg;
}

/// Runs `write` against the --out file or stdout.
template <class F>
void with_output(const std::string& path, F&& write) {
    if (path.empty()) {
        write(std::cout);
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw rp::InputError("cannot open '" + path + "' for writing");
    write(out);
    if (!out) throw rp::InputError("write to '" + path + "' failed");
}

int report_violations(const std::vector<rp::Violation>& v) {
    for (const auto& x : v) std::cerr << "violation: " << x.message() << "\n";
    return v.empty() ? 0 : 1;
}

int cmd_paths(const Common& c, const std::string& plot, bool single) {
    rp::SimConfig cfg = resolve_config(c);
    if (single) cfg.replicates = 1;
    const rp::PathRun run = rp::run_paths(cfg);
    with_output(c.out, [&](std::ostream& os) { rp::write_csv(os, run.records, rp::run_metadata(cfg)); });
    if (!plot.empty()) rp::export_plot_data(run.records, plot);
    return report_violations(run.violations);
}

int cmd_compare(const Common& c, const std::string& mode_name) {
    rp::SimConfig cfg = resolve_config(c);
    rp::RiskMode mode;
    if (mode_name == "analytic")
        mode = rp::RiskMode::Analytic;
    else if (mode_name == "mc")
        mode = rp::RiskMode::MonteCarlo;
    else
        throw rp::InputError("--mode must be analytic or mc");
    if (mode == rp::RiskMode::Analytic) cfg.replicates = 1;
    cfg.fixed_design = true;

    std::vector<rp::PenalisedSpectrum> specs;
    std::vector<rp::CGTrace> traces;
    for (int r = 0; r < cfg.replicates; ++r) {
        const rp::Sample s = rp::generate(cfg, r);
        if (r == 0)
            specs.push_back(rp::decompose(s.data, cfg.lambda, s.truth));
        else
            specs.push_back(specs.front().with_response(s.data.y, s.truth));
        traces.push_back(rp::cg_solve(specs.back()));
    }
    const auto& spec = specs.front();
    const double eta = cfg.eta > 0.0 ? cfg.eta : rp::default_step(spec);
    const double t_min = 0.5 / spec.norm();

    std::vector<rp::Violation> violations;
    with_output(c.out, [&](std::ostream& os) {
        using rp::detail::format_double;
        for (const auto& m : rp::run_metadata(cfg)) os << "# " << m << "\n";
        os << "gamma,t,i_t,C_t_lambda,lhs,lhs_se,rhs,tau_mean,mode,satisfied\n";
        for (const auto& target : {rp::TargetSpec{rp::TargetBeta0{}}, rp::TargetSpec{rp::TargetBetaLambda{}}}) {
            for (long k : rp::gd_grid(cfg.gd_max, cfg.gd_points)) {
                const double t = eta * static_cast<double>(k);
                if (t < t_min) continue;
                const rp::ComparisonRecord rec = rp::check_main_bound(specs, traces, target, t, mode);
                os << rp::target_name(target) << ',' << format_double(t) << ',' << rec.i_t << ','
                   << format_double(rec.C_t_lambda) << ',' << format_double(rec.lhs) << ','
                   << format_double(rec.lhs_se) << ',' << format_double(rec.rhs) << ','
                   << format_double(rec.tau_mean) << ',' << mode_name << ',' << (rec.satisfied ? 1 : 0)
                   << "\n";
                if (!rec.satisfied)
                    violations.push_back({"comparison", "check_main_bound", 0, t,
                                          "lhs " + format_double(rec.lhs) + " > rhs " + format_double(rec.rhs)});
            }
        }
    });
    return report_violations(violations);
}

int cmd_oracle(const Common& c) {
    rp::SimConfig cfg = resolve_config(c);
    cfg.fixed_design = true;
    std::vector<rp::PenalisedSpectrum> specs;
    std::vector<rp::CGTrace> traces;
    for (int r = 0; r < cfg.replicates; ++r) {
        const rp::Sample s = rp::generate(cfg, r);
        if (r == 0)
            specs.push_back(rp::decompose(s.data, cfg.lambda, s.truth));
        else
            specs.push_back(specs.front().with_response(s.data.y, s.truth));
        traces.push_back(rp::cg_solve(specs.back()));
    }
    std::vector<rp::Violation> violations;
    with_output(c.out, [&](std::ostream& os) {
        using rp::detail::format_double;
        for (const auto& m : rp::run_metadata(cfg)) os << "# " << m << "\n";
        os << "gamma,cg_oracle,cg_oracle_t,gf_oracle,gf_oracle_t,rr_oracle,rr_oracle_lambda,c_bar,"
              "gf_factor,rr_factor,gf_bound_holds,rr_bound_holds\n";
        for (const auto& target : {rp::TargetSpec{rp::TargetBeta0{}}, rp::TargetSpec{rp::TargetBetaLambda{}}}) {
            const rp::OracleComparison o = rp::oracle_comparison(specs, traces, target);
            os << rp::target_name(target) << ',' << format_double(o.cg_oracle) << ','
               << format_double(o.cg_oracle_t) << ',' << format_double(o.gf_oracle) << ','
               << format_double(o.gf_oracle_t) << ',' << format_double(o.rr_oracle) << ','
               << format_double(o.rr_oracle_lambda) << ',' << format_double(o.c_bar) << ','
               << format_double(o.gf_factor) << ',' << format_double(o.rr_factor) << ','
               << o.gf_bound_holds << ',' << o.rr_bound_holds << "\n";
            if (!o.gf_bound_holds || !o.rr_bound_holds)
                violations.push_back({"comparison", "oracle_comparison", 0, o.cg_oracle_t,
                                      "oracle factor exceeded for " + rp::target_name(target)});
        }
    });
    return report_violations(violations);
}

int cmd_verify(const Common& c) {
    const rp::SimConfig cfg = resolve_config(c);
    const rp::VerifyReport rep = rp::verify_config(cfg);
    with_output(c.out, [&](std::ostream& os) {
        for (const auto& s : rep.summary) os << s << "\n";
        for (const auto& v : rep.violations) os << "FAIL " << v.message() << "\n";
        os << (rep.ok() ? "verify: all checks passed" : "verify: " + std::to_string(rep.violations.size()) +
                                                             " violation(s)")
           << "\n";
    });
    return rep.ok() ? 0 : 1;
}

struct IngestArgs {
    std::string data;
    std::string response;
    bool standardise = false;
    int splits = 1000;
    long train_size = 0;
    bool no_subset = false;
};

int cmd_ingest(const Common& c, const IngestArgs& a) {
    rp::IngestConfig cfg;
    if (!c.config_path.empty())
        throw rp::InputError("ingest takes --data, not --config");
    if (c.lambda) cfg.lambda = *c.lambda;
    if (c.seed) cfg.seed = *c.seed;
    cfg.sigma2 = c.sigma2;
    cfg.splits = a.splits;
    cfg.train_size = a.train_size;
    cfg.subset = !a.no_subset;
    for (const auto& kv : c.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw rp::InputError("--set expects key=value, got '" + kv + "'");
        const std::string key = rp::detail::trim(kv.substr(0, eq));
        const std::string val = rp::detail::trim(kv.substr(eq + 1));
        if (key == "eta") cfg.eta = rp::detail::parse_double(key, val);
        else if (key == "cg_max") cfg.cg_max = rp::detail::parse_int(key, val);
        else if (key == "cg_subdivisions") cfg.cg_subdivisions = static_cast<int>(rp::detail::parse_int(key, val));
        else if (key == "gd_max") cfg.gd_max = static_cast<long>(rp::detail::parse_int(key, val));
        else if (key == "gd_points") cfg.gd_points = static_cast<int>(rp::detail::parse_int(key, val));
        else throw rp::InputError("unknown ingest key '" + key + "'");
    }
    const rp::LabelledDataset ds = rp::load_csv_dataset(a.data, a.response, a.standardise);
    const rp::IngestResult res = rp::run_ingest(ds.data, cfg);
    with_output(c.out, [&](std::ostream& os) {
        std::vector<std::string> meta{
            "dataset: " + a.data,
            "response: " + a.response + (a.standardise ? " (standardised)" : ""),
            "features: " + std::to_string(res.feature_subset.size()) + " of " + std::to_string(ds.data.p()),
            "train/test: " + std::to_string(res.n_train) + "/" + std::to_string(res.n_test) + ", " +
                std::to_string(cfg.splits) + " splits",
            "lambda: " + rp::detail::format_double(cfg.lambda),
            "seed: " + std::to_string(cfg.seed),
            "generator: philox4x32-10"};
        if (cfg.sigma2) meta.push_back("sigma2: " + rp::detail::format_double(*cfg.sigma2));
        rp::write_ingest_csv(os, res, cfg.sigma2.has_value(), meta);
    });
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regularisation paths of ridge, gradient flow/descent and conjugate gradients"};
    app.require_subcommand(1);

    Common c;
    std::string plot, mode = "analytic";
    IngestArgs ia;

    auto* simulate = app.add_subcommand("simulate", "Monte Carlo paths over replicates, exported as CSV");
    add_common(simulate, c);
    simulate->add_option("--plot", plot, "plot-data file (quadratic x positions)");

    auto* path = app.add_subcommand("path", "paths of a single simulated dataset");
    add_common(path, c);
    path->add_option("--plot", plot, "plot-data file (quadratic x positions)");

    auto* compare = app.add_subcommand("compare", "CG risk against gradient flow along the GD grid");
    add_common(compare, c);
    compare->add_option("--mode", mode, "analytic | mc");

    auto* oracle = app.add_subcommand("oracle", "oracle risks of CG, GF and RR");
    add_common(oracle, c);

    auto* verify = app.add_subcommand("verify", "identity and inequality suite; exit 1 on violation");
    add_common(verify, c);

    auto* ingest = app.add_subcommand("ingest", "out-of-sample ridge criterion on a CSV dataset");
    add_common(ingest, c, false);
    ingest->add_option("--data", ia.data, "CSV file with a header row")->required();
    ingest->add_option("--response-column", ia.response, "name of the response column")->required();
    ingest->add_flag("--standardise", ia.standardise, "centre and scale every column");
    ingest->add_option("--splits", ia.splits, "number of random train/test splits");
    ingest->add_option("--train-size", ia.train_size, "training observations per split (default 70%)");
    ingest->add_flag("--all-features", ia.no_subset, "skip the random 2n feature subset");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (simulate->parsed()) return cmd_paths(c, plot, false);
        if (path->parsed()) return cmd_paths(c, plot, true);
        if (compare->parsed()) return cmd_compare(c, mode);
        if (oracle->parsed()) return cmd_oracle(c);
        if (verify->parsed()) return cmd_verify(c);
        if (ingest->parsed()) return cmd_ingest(c, ia);
    } catch (const rp::InputError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const rp::ConditionViolated& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
