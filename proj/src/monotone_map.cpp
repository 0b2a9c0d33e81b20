#include "quant/monotone_map.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace quant {

double mono_floor(double range, int n_points) {
    return 1e-6 * range / n_points;
}

ScalarGrid project_monotone(ScalarGrid g, double eps) {
    std::vector<double> z(g.values.size());
    for (size_t i = 0; i < z.size(); ++i) z[i] = g.values[i] - eps * static_cast<double>(i);
    z = isotonic_fit(z);
    for (size_t i = 0; i < z.size(); ++i) {
        g.values[i] = z[i] + eps * static_cast<double>(i);
        // the ramp guarantees strict increase mathematically; when values
        // dwarf eps it can round away, so force at least one ulp
        if (i > 0 && !(g.values[i] > g.values[i - 1]))
            g.values[i] = std::nextafter(g.values[i - 1],
                                         std::numeric_limits<double>::infinity());
    }
    return g;
}

MonotoneMap::MonotoneMap(ScalarGrid g) : grid_(std::move(g)) {
    for (int i = 0; i + 1 < grid_.n(); ++i)
        if (!(grid_.values[i + 1] > grid_.values[i]))
            throw std::invalid_argument("MonotoneMap: values must be strictly increasing");
}

MonotoneMap MonotoneMap::identity(double lo, double hi, int n) {
    return MonotoneMap(make_grid(lo, hi, n, [](double x) { return x; }));
}

double MonotoneMap::operator()(double x) const {
    return hermite_eval(grid_, x);
}

double MonotoneMap::inverse(double y) const {
    const auto& v = grid_.values;
    if (y <= v.front()) return grid_.x_min;
    if (y >= v.back()) return grid_.x_max;
    auto it = std::upper_bound(v.begin(), v.end(), y);
    int i = static_cast<int>(it - v.begin()) - 1;
    i = std::clamp(i, 0, grid_.n() - 2);
    const double h = grid_.h();
    const double m0 = hermite_slope(v, i, h);
    const double m1 = hermite_slope(v, i + 1, h);
    // Newton on the segment cubic, bisection-safeguarded: the cubic is
    // nondecreasing (harmonic-mean slopes satisfy the Fritsch-Carlson
    // bound) but its derivative can vanish at the endpoints
    double lo = 0.0, hi = 1.0;
    double t = (y - v[i]) / (v[i + 1] - v[i]);
    t = std::clamp(t, 0.0, 1.0);
    for (int it2 = 0; it2 < 100; ++it2) {
        const double f = hermite_seg(t, h, v[i], v[i + 1], m0, m1) - y;
        if (f == 0.0) break;
        if (f > 0.0)
            hi = t;
        else
            lo = t;
        const double df = hermite_seg_dt(t, h, v[i], v[i + 1], m0, m1);
        double tn = (df > 0.0) ? t - f / df : 0.5 * (lo + hi);
        if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
        if (std::abs(tn - t) < 1e-16) {
            t = tn;
            break;
        }
        t = tn;
    }
    return grid_.x(i) + t * grid_.h();
}

}  // namespace quant
