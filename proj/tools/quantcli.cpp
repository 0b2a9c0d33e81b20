// Command-line front end: quantizer design, SNR-vs-rate sweeps, bivariate
// error-correlation experiments and whiteness diagnostics, all driven by a
// TOML config with flag overrides. Exit codes: 0 success, 2 config error,
// 3 when results were written but some design did not converge.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "quant/harness.hpp"
#include "quant/toml.hpp"

namespace {

using namespace quant;

struct CommonArgs {
    std::string config_path;
    std::string out_path;
    std::optional<std::uint64_t> seed;
};

SourceModel load_source(const toml::Table& cfg) {
    if (cfg.has("source.csv")) return load_source_csv(cfg.str("source.csv"));
    const double variance = cfg.number_or("source.variance", 1.0);
    const double half_width = cfg.number_or("source.half_width", 3.0);
    const int n_points = static_cast<int>(cfg.number_or("source.n_points", 2001));
    return make_truncated_gaussian(variance, half_width, n_points);
}

DesignConfig load_design_config(const toml::Table& cfg) {
    DesignConfig d;
    d.step_size = cfg.number_or("design.step_size", d.step_size);
    d.max_iters = static_cast<int>(cfg.number_or("design.max_iters", d.max_iters));
    d.cost_tol = cfg.number_or("design.cost_tol", d.cost_tol);
    d.tol_window = static_cast<int>(cfg.number_or("design.tol_window", d.tol_window));
    d.quad_nodes_n = static_cast<int>(cfg.number_or("design.quad_nodes_n", d.quad_nodes_n));
    if (cfg.has("design.schedule")) d.schedule = cfg.numbers("design.schedule");
    d.seed = static_cast<std::uint64_t>(cfg.number_or("design.seed", 1.0));
    d.design_points = static_cast<int>(cfg.number_or("design.design_points", d.design_points));
    d.gauss_per_segment =
        static_cast<int>(cfg.number_or("design.gauss_per_segment", d.gauss_per_segment));
    d.init_noise = cfg.number_or("design.init_noise", d.init_noise);
    d.fd_epsilon = cfg.number_or("design.fd_epsilon", d.fd_epsilon);
    return d;
}

RateMode parse_mode(const std::string& m) {
    if (m == "fixed") return RateMode::Fixed;
    if (m == "variable") return RateMode::Variable;
    throw std::invalid_argument("mode must be 'fixed' or 'variable', got '" + m + "'");
}

std::vector<Family> parse_families(const std::vector<std::string>& names) {
    if (names.empty())
        return {Family::ConventionalDither, Family::Randomized,
                Family::ConstrainedRandomized, Family::ConstrainedDeterministic,
                Family::OptimalDeterministic};
    std::vector<Family> out;
    for (const std::string& n : names) out.push_back(family_from_name(n));
    return out;
}

// "0:0.1:0.9" start:step:stop ranges, or plain comma lists handled by CLI11
std::vector<double> expand_range(const std::vector<std::string>& toks) {
    std::vector<double> out;
    for (const std::string& t : toks) {
        const size_t c1 = t.find(':');
        if (c1 == std::string::npos) {
            out.push_back(std::stod(t));
            continue;
        }
        const size_t c2 = t.find(':', c1 + 1);
        if (c2 == std::string::npos)
            throw std::invalid_argument("range must be start:step:stop, got '" + t + "'");
        const double start = std::stod(t.substr(0, c1));
        const double step = std::stod(t.substr(c1 + 1, c2 - c1 - 1));
        const double stop = std::stod(t.substr(c2 + 1));
        if (!(step > 0.0)) throw std::invalid_argument("range step must be > 0");
        for (double v = start; v <= stop + 1e-12; v += step) out.push_back(v);
    }
    return out;
}

std::string fmt9(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

int run_design_cmd(const toml::Table& cfg, const CommonArgs& common,
                   const std::string& mode_flag, double rate_flag) {
    const SourceModel src = load_source(cfg);
    DesignConfig dc = load_design_config(cfg);
    if (common.seed) dc.seed = *common.seed;

    const std::string mode_s =
        !mode_flag.empty() ? mode_flag : cfg.str_or("design.mode", "variable");
    const RateMode mode = parse_mode(mode_s);
    const double rate = rate_flag > 0.0 ? rate_flag : cfg.number_or("design.rate", 2.0);

    RandomizedDesign d;
    if (mode == RateMode::Fixed) {
        const int t = std::max(1, static_cast<int>(std::lround((std::exp2(rate) - 1.0) / 2.0)));
        d = design_unconstrained(src, CompanderMode::fixed(t), dc);
    } else {
        d = design_randomized_at_rate(src, rate, dc);
    }
    const std::string out = !common.out_path.empty()
                                ? common.out_path
                                : cfg.str_or("output", "design.csv");
    save_design(d, out);
    std::cout << "design: rate=" << fmt9(d.rate_bits) << " bits distortion="
              << fmt9(d.distortion) << " converged=" << (d.converged ? 1 : 0)
              << " -> " << out << "\n";
    return d.converged ? 0 : 3;
}

int run_sweep_cmd(const toml::Table& cfg, const CommonArgs& common,
                  const std::string& mode_flag, const std::vector<double>& rates_flag,
                  const std::vector<std::string>& families_flag) {
    const SourceModel src = load_source(cfg);
    SweepSpec spec;
    spec.config = load_design_config(cfg);
    spec.seed = common.seed ? *common.seed
                            : static_cast<std::uint64_t>(cfg.number_or("sweep.seed", 1.0));
    spec.config.seed = spec.seed;
    const std::string mode_s =
        !mode_flag.empty() ? mode_flag : cfg.str_or("sweep.rate_mode", "variable");
    spec.rate_mode = parse_mode(mode_s);
    spec.rate_points = !rates_flag.empty()
                           ? rates_flag
                           : (cfg.has("sweep.rate_points") ? cfg.numbers("sweep.rate_points")
                                                           : std::vector<double>{1.0, 2.0, 3.0});
    spec.families = parse_families(
        !families_flag.empty()
            ? families_flag
            : (cfg.has("sweep.families") ? cfg.strings("sweep.families")
                                         : std::vector<std::string>{}));

    const auto rows = snr_sweep(spec, src);
    const std::string out =
        !common.out_path.empty() ? common.out_path : cfg.str_or("output", "sweep.csv");
    write_results_csv(rows, out);
    bool all_ok = true;
    for (const auto& r : rows) all_ok = all_ok && r.converged;
    std::cout << "sweep: " << rows.size() << " rows -> " << out << "\n";
    return all_ok ? 0 : 3;
}

int run_correlate_cmd(const toml::Table& cfg, const CommonArgs& common,
                      const std::string& mode_flag,
                      const std::vector<std::string>& rho_flag, double rate_flag,
                      const std::vector<std::string>& families_flag) {
    DesignConfig dc = load_design_config(cfg);
    const std::uint64_t seed =
        common.seed ? *common.seed
                    : static_cast<std::uint64_t>(cfg.number_or("correlate.seed", 1.0));
    dc.seed = seed;
    const std::string mode_s =
        !mode_flag.empty() ? mode_flag : cfg.str_or("correlate.mode", "variable");
    const RateMode mode = parse_mode(mode_s);
    const double rate = rate_flag > 0.0 ? rate_flag : cfg.number_or("correlate.rate", 1.4);
    const int n = static_cast<int>(cfg.number_or("correlate.samples", 1e6));
    std::vector<double> rhos = !rho_flag.empty()
                                   ? expand_range(rho_flag)
                                   : (cfg.has("correlate.rho")
                                          ? cfg.numbers("correlate.rho")
                                          : std::vector<double>{0.3, 0.6, 0.9});
    const auto families = parse_families(
        !families_flag.empty()
            ? families_flag
            : (cfg.has("correlate.families") ? cfg.strings("correlate.families")
                                             : std::vector<std::string>{}));

    const std::string out =
        !common.out_path.empty() ? common.out_path : cfg.str_or("output", "correlate.csv");
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file: " + out);
    os << "family,rho,rate_bits,err_corr\n";
    for (Family fam : families) {
        for (double rho : rhos) {
            BivariateGaussianSpec bspec;
            bspec.rho = rho;
            bspec.variance = cfg.number_or("source.variance", 1.0);
            bspec.truncation = cfg.number_or("source.half_width", 3.0);
            const double corr =
                correlation_experiment(bspec, fam, mode, rate, n, seed, dc);
            os << family_name(fam) << "," << fmt9(rho) << "," << fmt9(rate) << ","
               << fmt9(corr) << "\n";
        }
    }
    std::cout << "correlate: " << families.size() * rhos.size() << " rows -> " << out
              << "\n";
    return 0;
}

int run_whiteness_cmd(const toml::Table& cfg, const CommonArgs& common,
                      const std::string& mode_flag, const std::string& family_flag,
                      double rate_flag) {
    const SourceModel src = load_source(cfg);
    DesignConfig dc = load_design_config(cfg);
    const std::uint64_t seed =
        common.seed ? *common.seed
                    : static_cast<std::uint64_t>(cfg.number_or("whiteness.seed", 1.0));
    dc.seed = seed;
    const RateMode mode = parse_mode(
        !mode_flag.empty() ? mode_flag : cfg.str_or("whiteness.mode", "variable"));
    const double rate = rate_flag > 0.0 ? rate_flag : cfg.number_or("whiteness.rate", 2.0);
    const int n = static_cast<int>(cfg.number_or("whiteness.samples", 1e6));
    const Family fam = family_from_name(
        !family_flag.empty() ? family_flag
                             : cfg.str_or("whiteness.family", "constrained-randomized"));

    WhitenessReport rep;
    if (fam == Family::ConstrainedDeterministic || fam == Family::OptimalDeterministic) {
        const int m = std::max(1, static_cast<int>(std::lround(std::exp2(rate))));
        CellQuantizer q = mode == RateMode::Fixed ? lloyd_max(src, m, seed)
                                                  : ecsq_at_rate(src, rate, 64, seed);
        if (fam == Family::ConstrainedDeterministic)
            q = constrain_deterministic(q, src).first;
        rep = whiteness_deterministic(q, src, n, seed);
    } else {
        RandomizedDesign d;
        if (fam == Family::ConventionalDither) {
            // identity compander: the conventional quantizer as a design
            const double delta = mode == RateMode::Fixed
                                     ? conventional_best_delta(
                                           src, std::max(1, static_cast<int>(std::lround(
                                                                (std::exp2(rate) - 1.0) / 2.0))))
                                     : 1.0;
            d.compressor = MonotoneMap::identity(src.x_min(), src.x_max(), dc.design_points);
            d.expander = make_grid(src.x_min() - delta, src.x_max() + delta, 1001,
                                   [](double y) { return y; });
            d.delta = delta;
            d.mode = mode == RateMode::Fixed
                         ? CompanderMode::fixed(std::max(
                               1, static_cast<int>(std::lround((std::exp2(rate) - 1.0) / 2.0))))
                         : CompanderMode::variable(0.0);
        } else if (mode == RateMode::Fixed) {
            const int t = std::max(1, static_cast<int>(std::lround((std::exp2(rate) - 1.0) / 2.0)));
            d = design_unconstrained(src, CompanderMode::fixed(t), dc);
        } else {
            d = design_randomized_at_rate(src, rate, dc);
        }
        if (fam == Family::ConstrainedRandomized) d = constrain_randomized(d, src);
        rep = whiteness_randomized(d, src, n, seed);
    }

    const std::string out =
        !common.out_path.empty() ? common.out_path : cfg.str_or("output", "whiteness.csv");
    std::ofstream os(out, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open output file: " + out);
    os << "stat,value\n";
    os << "corr_source_error," << fmt9(rep.corr_source_error) << "\n";
    os << "error_mean," << fmt9(rep.error_mean) << "\n";
    os << "error_variance," << fmt9(rep.error_variance) << "\n";
    for (size_t i = 0; i < rep.histogram.size(); ++i)
        os << "hist_" << i << "," << fmt9(rep.histogram[i]) << "\n";
    std::cout << "whiteness: corr=" << fmt9(rep.corr_source_error) << " -> " << out
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"scalar quantizer design and benchmarking"};
    app.require_subcommand(1);

    CommonArgs common;
    std::uint64_t seed_flag = 0;
    bool seed_given = false;
    app.add_option("--config", common.config_path, "TOML config file");
    app.add_option("--out", common.out_path, "output path (overrides config)");
    auto* seed_opt = app.add_option("--seed", seed_flag, "seed override");

    std::string mode_flag, family_flag;
    double rate_flag = 0.0;
    std::vector<double> rates_flag;
    std::vector<std::string> families_flag, rho_flag;

    auto* design = app.add_subcommand("design", "design one randomized quantizer");
    design->fallthrough();  // --config/--out/--seed may follow the subcommand
    design->add_option("--mode", mode_flag, "fixed | variable");
    design->add_option("--rate", rate_flag, "target rate in bits");

    auto* sweep = app.add_subcommand("sweep", "SNR-versus-rate sweep");
    sweep->fallthrough();
    sweep->add_option("--mode", mode_flag, "fixed | variable");
    sweep->add_option("--rates", rates_flag, "target rates in bits")->delimiter(',');
    sweep->add_option("--families", families_flag, "family names")->delimiter(',');

    auto* correlate = app.add_subcommand("correlate", "bivariate error correlation");
    correlate->fallthrough();
    correlate->add_option("--mode", mode_flag, "fixed | variable");
    correlate->add_option("--rate", rate_flag, "target rate in bits");
    correlate->add_option("--rho", rho_flag, "correlations (list or start:step:stop)")
        ->delimiter(',');
    correlate->add_option("--families", families_flag, "family names")->delimiter(',');

    auto* whiteness = app.add_subcommand("whiteness", "error whiteness diagnostics");
    whiteness->fallthrough();
    whiteness->add_option("--mode", mode_flag, "fixed | variable");
    whiteness->add_option("--rate", rate_flag, "target rate in bits");
    whiteness->add_option("--family", family_flag, "family name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    seed_given = seed_opt->count() > 0;
    if (seed_given) common.seed = seed_flag;

    try {
        quant::toml::Table cfg;
        if (!common.config_path.empty()) cfg = quant::toml::parse_file(common.config_path);

        if (design->parsed()) return run_design_cmd(cfg, common, mode_flag, rate_flag);
        if (sweep->parsed())
            return run_sweep_cmd(cfg, common, mode_flag, rates_flag, families_flag);
        if (correlate->parsed())
            return run_correlate_cmd(cfg, common, mode_flag, rho_flag, rate_flag,
                                     families_flag);
        if (whiteness->parsed())
            return run_whiteness_cmd(cfg, common, mode_flag, family_flag, rate_flag);
        std::cerr << "error: no subcommand\n";
        return 2;
    } catch (const quant::toml::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::out_of_range& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
