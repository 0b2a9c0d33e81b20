#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "quant/dither.hpp"
#include "quant/harness.hpp"
#include "quant/toml.hpp"

using namespace quant;

namespace {

SourceModel gauss() { return make_truncated_gaussian(1.0, 3.0); }

DesignConfig quick_config() {
    DesignConfig cfg;
    cfg.design_points = 101;
    cfg.max_iters = 300;
    cfg.seed = 1;
    return cfg;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("family names round-trip") {
    for (Family f : {Family::ConventionalDither, Family::Randomized,
                     Family::ConstrainedRandomized, Family::ConstrainedDeterministic,
                     Family::OptimalDeterministic})
        CHECK(family_from_name(family_name(f)) == f);
    CHECK_THROWS_AS(family_from_name("nope"), std::invalid_argument);
}

TEST_CASE("conventional_best_delta is an interior minimum") {
    SourceModel src = gauss();
    const double d = conventional_best_delta(src, 2);
    const double f0 = conventional_distortion({d, 2}, src);
    CHECK(f0 <= conventional_distortion({d * 1.05, 2}, src) + 1e-12);
    CHECK(f0 <= conventional_distortion({d * 0.95, 2}, src) + 1e-12);
}

TEST_CASE("ecsq_at_rate hits the target entropy within 0.01 bits") {
    SourceModel src = gauss();
    for (double r : {1.0, 1.5, 2.0}) {
        CellQuantizer q = ecsq_at_rate(src, r, 64, 1);
        CHECK(std::abs(q.entropy_bits() - r) <= 0.01);
    }
}

TEST_CASE("deterministic-family sweep rows are consistent and ordered") {
    SourceModel src = gauss();
    SweepSpec spec;
    spec.rate_mode = RateMode::Fixed;
    spec.rate_points = {std::log2(3.0), std::log2(5.0)};
    spec.families = {Family::OptimalDeterministic, Family::ConstrainedDeterministic,
                     Family::ConventionalDither};
    spec.config = quick_config();
    const auto rows = snr_sweep(spec, src);
    CHECK(rows.size() == 6);
    const double s2 = src.variance();
    for (const auto& r : rows) {
        CHECK(r.converged);
        // snr consistent with distortion
        CHECK(r.snr_db ==
              doctest::Approx(10.0 * std::log10(s2 / r.distortion)).epsilon(1e-9));
    }
    // sorted by (family, rate); distortion non-increasing in rate per family
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].family == rows[i - 1].family) {
            CHECK(rows[i].rate_bits > rows[i - 1].rate_bits);
            CHECK(rows[i].distortion <= rows[i - 1].distortion + 1e-12);
        }
    }
    // constrained deterministic never beats unconstrained at the same rate
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t j = 0; j < rows.size(); ++j)
            if (rows[i].family == Family::OptimalDeterministic &&
                rows[j].family == Family::ConstrainedDeterministic &&
                std::abs(rows[i].rate_bits - rows[j].rate_bits) < 1e-9)
                CHECK(rows[i].snr_db >= rows[j].snr_db);
}

TEST_CASE("monte carlo distortion matches quadrature for a randomized design") {
    SourceModel src = gauss();
    DesignConfig cfg = quick_config();
    RandomizedDesign d = design_unconstrained(src, CompanderMode::fixed(2), cfg);
    const int n = 400000;
    const double mc = simulate_randomized_distortion(d, src, n, 12345);
    // 3 standard errors of a chi-square-ish mean estimate
    const double se = d.distortion * std::sqrt(2.0 / n) * 3.0;
    CHECK(std::abs(mc - d.distortion) < std::max(3.0 * se, 0.01 * d.distortion));
}

TEST_CASE("whiteness: deterministic lloyd error is strongly source-correlated") {
    SourceModel src = gauss();
    CellQuantizer q = lloyd_max(src, 2, 1);
    WhitenessReport rep = whiteness_deterministic(q, src, 200000, 9);
    CHECK(rep.corr_source_error > 0.5);
    CHECK(std::abs(rep.error_mean) < 0.01);
    double mass = 0.0;
    for (double b : rep.histogram) mass += b;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("correlation experiment: independent components stay uncorrelated") {
    BivariateGaussianSpec spec;
    spec.rho = 0.0;
    DesignConfig cfg = quick_config();
    const double c = correlation_experiment(spec, Family::OptimalDeterministic,
                                            RateMode::Fixed, 2.0, 100000, 21, cfg);
    CHECK(std::abs(c) < 3.0 / std::sqrt(100000.0));
}

TEST_CASE("results csv format and byte determinism") {
    std::vector<ResultRow> rows(2);
    rows[0].family = Family::Randomized;
    rows[0].rate_bits = 1.23456789123;
    rows[0].distortion = 0.1;
    rows[0].snr_db = 10.0;
    rows[1].family = Family::ConventionalDither;
    rows[1].converged = false;
    const std::string p1 = "test_rows_a.csv", p2 = "test_rows_b.csv";
    write_results_csv(rows, p1);
    write_results_csv(rows, p2);
    const std::string a = slurp(p1);
    CHECK(a == slurp(p2));
    CHECK(a.rfind("family,rate_bits,distortion,snr_db,ortho_residual,"
                  "err_src_corr,converged\n", 0) == 0);
    CHECK(a.find("randomized,1.23456789,") != std::string::npos);  // 9 significant digits
    CHECK(a.find(",0\n") != std::string::npos);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("toml parser: sections, types, arrays, comments") {
    const std::string text =
        "# top comment\n"
        "output = \"runs/out.csv\"\n"
        "[design]\n"
        "max_iters = 500   # inline\n"
        "cost_tol = 1e-7\n"
        "schedule = [1.6, 0.8, 0.4]\n"
        "verbose = false\n"
        "[sweep]\n"
        "families = [\"randomized\", \"conventional-dither\"]\n";
    auto tab = toml::parse(text);
    CHECK(tab.str("output") == "runs/out.csv");
    CHECK(tab.number("design.max_iters") == doctest::Approx(500));
    CHECK(tab.number("design.cost_tol") == doctest::Approx(1e-7));
    CHECK(tab.numbers("design.schedule").size() == 3);
    CHECK(tab.boolean_or("design.verbose", true) == false);
    CHECK(tab.strings("sweep.families")[1] == "conventional-dither");
    CHECK(tab.number_or("design.missing", 7.0) == doctest::Approx(7.0));
}

TEST_CASE("toml parser reports the offending line") {
    try {
        toml::parse("a = 1\nb ~ 2\n");
        CHECK(false);
    } catch (const toml::ParseError& e) {
        CHECK(e.line == 2);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(toml::parse("x = [1, \"two\"]"), toml::ParseError);
    CHECK_THROWS_AS(toml::parse("[unterminated\nx = 1"), toml::ParseError);
}
