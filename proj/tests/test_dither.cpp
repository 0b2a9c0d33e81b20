#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "quant/dither.hpp"
#include "quant/rng.hpp"

using namespace quant;

namespace {

SourceModel triangle_source() {
    return SourceModel::from_pdf(
        make_grid(-1.0, 1.0, 2001, [](double x) { return 1.0 - std::abs(x); }));
}

}  // namespace

TEST_CASE("uniform quantizer: mid-tread rounding and saturation") {
    UniformQuantizerSpec q{1.0, std::nullopt};
    CHECK(uniform_quantize(0.49, q) == doctest::Approx(0.0));
    CHECK(uniform_quantize(0.5, q) == doctest::Approx(0.0));  // ties to the lower level
    CHECK(uniform_quantize(0.51, q) == doctest::Approx(1.0));
    CHECK(uniform_quantize(-0.5, q) == doctest::Approx(-1.0));
    CHECK(uniform_quantize(7.3, q) == doctest::Approx(7.0));

    UniformQuantizerSpec clamped{1.0, 2};
    CHECK(uniform_quantize(7.3, clamped) == doctest::Approx(2.0));
    CHECK(uniform_quantize(-99.0, clamped) == doctest::Approx(-2.0));
    CHECK(fixed_rate_of(clamped) == doctest::Approx(std::log2(5.0)));
    CHECK_THROWS_AS(fixed_rate_of(q), std::invalid_argument);
}

TEST_CASE("subtractive dither error is within a half step and source-independent") {
    UniformQuantizerSpec q{0.25, std::nullopt};
    Rng rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = rng.uniform(-4.0, 4.0);
        const double z = rng.uniform(-0.125, 0.125);
        const double err = dithered_reconstruct(x, {z}, q) - x;
        CHECK(std::abs(err) <= 0.125 + 1e-12);
    }
}

TEST_CASE("variable rate identity h(X+N) - log2 delta") {
    SourceModel tri = triangle_source();
    // small delta: h(X+N) -> h(X) = 1/(2 ln 2) bits, so R ~ h(X) - log2 delta
    const double delta = 0.01;
    const double r = conventional_variable_rate(tri, delta);
    const double expected = 0.5 / std::log(2.0) - std::log2(delta);
    CHECK(r == doctest::Approx(expected).epsilon(1e-3));

    // smoothing can only add entropy, and h(X+N) is capped by the
    // log-width of the widened support
    const double r_half = conventional_variable_rate(tri, 0.5);
    CHECK(r_half >= 0.5 / std::log(2.0) + 1.0 - 1e-6);
    CHECK(r_half <= std::log2(2.5) + 1.0 + 1e-6);
    // monotone in delta
    CHECK(conventional_variable_rate(tri, 0.25) > r_half);
}

TEST_CASE("conventional distortion: delta^2/12 without overload, larger with") {
    SourceModel tri = triangle_source();
    CHECK(conventional_distortion({0.2, std::nullopt}, tri) ==
          doctest::Approx(0.2 * 0.2 / 12.0));
    // T delta = 1 covers the support exactly
    CHECK(conventional_distortion({0.5, 2}, tri) ==
          doctest::Approx(0.5 * 0.5 / 12.0));
    // T delta = 0.5 < 1: overload raises distortion above delta^2/12
    const double d_over = conventional_distortion({0.25, 2}, tri);
    CHECK(d_over > 0.25 * 0.25 / 12.0);
}

TEST_CASE("rate identity cross-check by simulation") {
    // for the dithered quantizer, D = E[(Q(x+z)-z-x)^2] averaged over
    // source and dither must equal delta^2/12 when nothing overloads
    SourceModel tri = triangle_source();
    const double delta = 0.3;
    UniformQuantizerSpec q{delta, std::nullopt};
    Rng rng(17);
    const int n = 400000;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform01();
        const double x = tri.inverse_cdf(u);
        const double z = rng.uniform(-0.5 * delta, 0.5 * delta);
        const double e = dithered_reconstruct(x, {z}, q) - x;
        acc += e * e;
    }
    CHECK(acc / n == doctest::Approx(delta * delta / 12.0).epsilon(0.01));
}
