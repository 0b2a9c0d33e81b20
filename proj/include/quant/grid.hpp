#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace quant {

/// A scalar function sampled on a uniform grid over [x_min, x_max],
/// both endpoints included. Evaluation is piecewise linear, clamped
/// to the end values outside the domain.
struct ScalarGrid {
    double x_min = 0.0;
    double x_max = 1.0;
    std::vector<double> values;

    ScalarGrid() = default;
    ScalarGrid(double lo, double hi, std::vector<double> v);

    int n() const { return static_cast<int>(values.size()); }
    double h() const { return (x_max - x_min) / (n() - 1); }
    double x(int i) const { return x_min + i * h(); }

    double operator()(double xq) const;

    /// Index of the segment containing xq, clamped to [0, n-2].
    int segment(double xq) const;
};

ScalarGrid make_grid(double lo, double hi, int n,
                     const std::function<double(double)>& f);

/// Monotone cubic Hermite interpolation (harmonic-mean node slopes).
/// C^1 in the query point and in the sampled values, monotone-preserving
/// for monotone data, and exact on linear data. Clamped outside the
/// domain. Used where the evaluation must be differentiable (descent
/// costs and their finite-difference gradients); the plain operator()
/// stays piecewise linear.
double hermite_eval(const ScalarGrid& g, double xq);

/// Harmonic-mean slope estimate at node i (one-sided at the ends).
double hermite_slope(const std::vector<double>& v, int i, double h);

/// Value / t-derivative of the Hermite cubic on one segment of width h,
/// endpoint values y0,y1 and endpoint slopes m0,m1, at t in [0,1].
double hermite_seg(double t, double h, double y0, double y1, double m0, double m1);
double hermite_seg_dt(double t, double h, double y0, double y1, double m0, double m1);

/// Trapezoidal integral of the sampled function over its domain.
double trapezoid(const ScalarGrid& g);

/// Gauss-Legendre rule on (-1, 1).
struct GaussRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussRule gauss_legendre(int n);

/// Exact partial moments of a piecewise-linear density: integrals of
/// f, x*f and x^2*f over arbitrary subintervals of the grid domain.
class PdfMoments {
public:
    explicit PdfMoments(const ScalarGrid& pdf);

    double mass(double a, double b) const { return partial(0, a, b); }
    double first(double a, double b) const { return partial(1, a, b); }
    double second(double a, double b) const { return partial(2, a, b); }

    /// Integral of f from x_min to x (exact on segments).
    double cdf(double x) const { return prefix(0, x); }

    const ScalarGrid& grid() const { return grid_; }

private:
    double prefix(int order, double x) const;
    double partial(int order, double a, double b) const;

    ScalarGrid grid_;
    // prefix integrals at the grid nodes, one vector per moment order
    std::vector<double> pre_[3];
};

/// L2 projection onto nondecreasing sequences (pool adjacent violators).
std::vector<double> isotonic_fit(const std::vector<double>& y);

}  // namespace quant
