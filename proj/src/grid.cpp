#include "quant/grid.hpp"

#include <algorithm>

namespace quant {

ScalarGrid::ScalarGrid(double lo, double hi, std::vector<double> v)
    : x_min(lo), x_max(hi), values(std::move(v)) {
    if (!(x_min < x_max))
        throw std::invalid_argument("ScalarGrid: x_min must be < x_max");
    if (n() < 3) throw std::invalid_argument("ScalarGrid: need at least 3 points");
}

int ScalarGrid::segment(double xq) const {
    int i = static_cast<int>(std::floor((xq - x_min) / h()));
    return std::clamp(i, 0, n() - 2);
}

double ScalarGrid::operator()(double xq) const {
    if (xq <= x_min) return values.front();
    if (xq >= x_max) return values.back();
    const int i = segment(xq);
    const double t = (xq - x(i)) / h();
    return values[i] + t * (values[i + 1] - values[i]);
}

ScalarGrid make_grid(double lo, double hi, int n,
                     const std::function<double(double)>& f) {
    if (n < 3) throw std::invalid_argument("make_grid: need at least 3 points");
    std::vector<double> v(n);
    const double h = (hi - lo) / (n - 1);
    for (int i = 0; i < n; ++i) v[i] = f(lo + i * h);
    return ScalarGrid(lo, hi, std::move(v));
}

double hermite_slope(const std::vector<double>& v, int i, double h) {
    const int n = static_cast<int>(v.size());
    if (i == 0) return (v[1] - v[0]) / h;
    if (i == n - 1) return (v[n - 1] - v[n - 2]) / h;
    const double dl = (v[i] - v[i - 1]) / h;
    const double dr = (v[i + 1] - v[i]) / h;
    const double s = dl + dr;
    // harmonic mean: <= 2 min(dl, dr), which keeps the segment cubics
    // monotone (Fritsch-Carlson); zero when the increments disagree in sign
    if (dl * dr <= 0.0 || s == 0.0) return 0.0;
    return 2.0 * dl * dr / s;
}

double hermite_seg(double t, double h, double y0, double y1, double m0, double m1) {
    const double t2 = t * t;
    const double t3 = t2 * t;
    return (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * h * m0 +
           (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * h * m1;
}

double hermite_seg_dt(double t, double h, double y0, double y1, double m0, double m1) {
    const double t2 = t * t;
    return (6.0 * t2 - 6.0 * t) * (y0 - y1) + (3.0 * t2 - 4.0 * t + 1.0) * h * m0 +
           (3.0 * t2 - 2.0 * t) * h * m1;
}

double hermite_eval(const ScalarGrid& g, double xq) {
    if (xq <= g.x_min) return g.values.front();
    if (xq >= g.x_max) return g.values.back();
    const int i = g.segment(xq);
    const double h = g.h();
    const double t = (xq - g.x(i)) / h;
    return hermite_seg(t, h, g.values[i], g.values[i + 1],
                       hermite_slope(g.values, i, h),
                       hermite_slope(g.values, i + 1, h));
}

double trapezoid(const ScalarGrid& g) {
    double s = 0.5 * (g.values.front() + g.values.back());
    for (int i = 1; i + 1 < g.n(); ++i) s += g.values[i];
    return s * g.h();
}

GaussRule gauss_legendre(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
    GaussRule r;
    r.nodes.resize(n);
    r.weights.resize(n);
    const double pi = std::acos(-1.0);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            // Legendre polynomial by recurrence, derivative from identity
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            pp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        r.nodes[i] = -x;
        r.nodes[n - 1 - i] = x;
        const double w = 2.0 / ((1.0 - x * x) * pp * pp);
        r.weights[i] = w;
        r.weights[n - 1 - i] = w;
    }
    if (n % 2 == 1) r.nodes[n / 2] = 0.0;
    return r;
}

PdfMoments::PdfMoments(const ScalarGrid& pdf) : grid_(pdf) {
    const int n = grid_.n();
    for (auto& p : pre_) p.assign(n, 0.0);
    const double h = grid_.h();
    for (int i = 0; i + 1 < n; ++i) {
        const double f0 = grid_.values[i];
        const double s = (grid_.values[i + 1] - f0) / h;
        const double xi = grid_.x(i);
        const double t = h;
        const double m0 = f0 * t + 0.5 * s * t * t;
        const double a1 = 0.5 * f0 * t * t + s * t * t * t / 3.0;  // ∫ t f dt
        const double m1 = xi * m0 + a1;
        const double a2 = f0 * t * t * t / 3.0 + 0.25 * s * t * t * t * t;  // ∫ t² f dt
        const double m2 = xi * xi * m0 + 2.0 * xi * a1 + a2;
        pre_[0][i + 1] = pre_[0][i] + m0;
        pre_[1][i + 1] = pre_[1][i] + m1;
        pre_[2][i + 1] = pre_[2][i] + m2;
    }
}

double PdfMoments::prefix(int order, double x) const {
    if (x <= grid_.x_min) return 0.0;
    if (x >= grid_.x_max) return pre_[order].back();
    const int i = grid_.segment(x);
    const double h = grid_.h();
    const double f0 = grid_.values[i];
    const double s = (grid_.values[i + 1] - f0) / h;
    const double xi = grid_.x(i);
    const double t = x - xi;
    const double m0 = f0 * t + 0.5 * s * t * t;
    double part = 0.0;
    switch (order) {
        case 0:
            part = m0;
            break;
        case 1:
            part = xi * m0 + 0.5 * f0 * t * t + s * t * t * t / 3.0;
            break;
        default: {
            const double a1 = 0.5 * f0 * t * t + s * t * t * t / 3.0;
            const double a2 = f0 * t * t * t / 3.0 + 0.25 * s * t * t * t * t;
            part = xi * xi * m0 + 2.0 * xi * a1 + a2;
            break;
        }
    }
    return pre_[order][i] + part;
}

double PdfMoments::partial(int order, double a, double b) const {
    if (b <= a) return 0.0;
    return prefix(order, b) - prefix(order, a);
}

std::vector<double> isotonic_fit(const std::vector<double>& y) {
    const int n = static_cast<int>(y.size());
    std::vector<double> mean;
    std::vector<int> count;
    mean.reserve(n);
    count.reserve(n);
    for (int i = 0; i < n; ++i) {
        mean.push_back(y[i]);
        count.push_back(1);
        while (mean.size() > 1 && mean[mean.size() - 2] >= mean.back()) {
            const double m2 = mean.back();
            const int c2 = count.back();
            mean.pop_back();
            count.pop_back();
            const double m1 = mean.back();
            const int c1 = count.back();
            mean.back() = (m1 * c1 + m2 * c2) / (c1 + c2);
            count.back() = c1 + c2;
        }
    }
    std::vector<double> out;
    out.reserve(n);
    for (size_t k = 0; k < mean.size(); ++k)
        out.insert(out.end(), count[k], mean[k]);
    return out;
}

}  // namespace quant
