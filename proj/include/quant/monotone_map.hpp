#pragma once

#include "quant/grid.hpp"

namespace quant {

/// Minimum allowed increment between consecutive samples of a monotone map.
double mono_floor(double range, int n_points);

/// L2 projection onto maps whose consecutive increments are >= eps:
/// subtract the eps ramp, pool-adjacent-violators, add the ramp back.
ScalarGrid project_monotone(ScalarGrid g, double eps);

/// Strictly increasing sampled scalar map evaluated by monotone cubic
/// Hermite interpolation (harmonic-mean slopes), so both the map and its
/// inverse are C^1 in the query point *and* in the sampled values — the
/// descent cost must be smooth in the node values for finite-difference
/// gradients to be consistent. Inputs outside the domain (or outputs
/// outside the range, for the inverse) are clamped.
class MonotoneMap {
public:
    MonotoneMap() = default;
    explicit MonotoneMap(ScalarGrid g);

    static MonotoneMap identity(double lo, double hi, int n);

    const ScalarGrid& grid() const { return grid_; }
    int n() const { return grid_.n(); }
    double x_min() const { return grid_.x_min; }
    double x_max() const { return grid_.x_max; }
    double y_min() const { return grid_.values.front(); }
    double y_max() const { return grid_.values.back(); }

    double operator()(double x) const;
    double inverse(double y) const;

    /// Adjust one sample in place; the caller keeps the map strictly
    /// increasing (used for small finite-difference probes).
    void set_value(int i, double v) { grid_.values[i] = v; }

private:
    ScalarGrid grid_;
};

}  // namespace quant
