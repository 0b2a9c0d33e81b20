#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>

#include "doctest.h"
#include "quant/grid.hpp"

using namespace quant;

TEST_CASE("grid evaluation is piecewise linear and clamped") {
    ScalarGrid g = make_grid(0.0, 2.0, 5, [](double x) { return x * x; });
    CHECK(g.n() == 5);
    CHECK(g.h() == doctest::Approx(0.5));
    CHECK(g(1.0) == doctest::Approx(1.0));
    // midpoint of the [1, 1.5] segment: chord value, not x^2
    CHECK(g(1.25) == doctest::Approx(0.5 * (1.0 + 2.25)));
    CHECK(g(-3.0) == doctest::Approx(0.0));  // clamped to the end values
    CHECK(g(9.0) == doctest::Approx(4.0));
    CHECK(g.segment(0.0) == 0);
    CHECK(g.segment(2.0) == 3);
}

TEST_CASE("trapezoid integrates linear functions exactly") {
    ScalarGrid g = make_grid(-1.0, 3.0, 7, [](double x) { return 2.0 * x + 1.0; });
    // integral of 2x+1 over [-1,3] = [x^2+x] = 12 - 0 = 12
    CHECK(trapezoid(g) == doctest::Approx(12.0).epsilon(1e-14));
}

TEST_CASE("gauss-legendre rules integrate high-degree polynomials") {
    for (int n : {4, 8, 16, 64}) {
        GaussRule r = gauss_legendre(n);
        double w_sum = 0.0;
        for (double w : r.weights) w_sum += w;
        CHECK(w_sum == doctest::Approx(2.0).epsilon(1e-13));
        // degree 2n-1 monomial: odd, integrates to 0; degree 2n-2 exactly
        const int d = 2 * n - 2;
        double acc = 0.0;
        for (size_t i = 0; i < r.nodes.size(); ++i)
            acc += r.weights[i] * std::pow(r.nodes[i], d);
        CHECK(acc == doctest::Approx(2.0 / (d + 1)).epsilon(1e-12));
    }
}

TEST_CASE("pdf moments match closed forms for a triangle density") {
    // f(x) = 1 - |x| on [-1, 1]
    ScalarGrid f = make_grid(-1.0, 1.0, 401, [](double x) { return 1.0 - std::abs(x); });
    PdfMoments m(f);
    CHECK(m.mass(-1.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m.first(-1.0, 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    // Var = 1/6 for the symmetric triangle
    CHECK(m.second(-1.0, 1.0) == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    // partial mass over [0, 0.5]: 1/2 - 1/8 = 3/8
    CHECK(m.mass(0.0, 0.5) == doctest::Approx(0.375).epsilon(1e-6));
    CHECK(m.cdf(0.0) == doctest::Approx(0.5).epsilon(1e-12));
    // sub-segment query (both endpoints inside one grid cell)
    const double a = 0.2501, b = 0.2503;
    CHECK(m.mass(a, b) == doctest::Approx((b - a) * (1.0 - 0.2502)).epsilon(1e-6));
}

TEST_CASE("isotonic fit pools violators and preserves monotone input") {
    std::vector<double> y{1.0, 3.0, 2.0, 4.0};
    auto z = isotonic_fit(y);
    CHECK(z[0] == doctest::Approx(1.0));
    CHECK(z[1] == doctest::Approx(2.5));
    CHECK(z[2] == doctest::Approx(2.5));
    CHECK(z[3] == doctest::Approx(4.0));

    std::vector<double> inc{0.0, 0.5, 2.0};
    auto same = isotonic_fit(inc);
    for (size_t i = 0; i < inc.size(); ++i) CHECK(same[i] == doctest::Approx(inc[i]));
}
