#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quant/monotone_map.hpp"
#include "quant/source_model.hpp"

namespace quant {

enum class RateMode { Fixed, Variable };

struct CompanderMode {
    RateMode kind = RateMode::Variable;
    int t_max = 1;        // Fixed: levels {0, ±delta, ..., ±T delta}
    double lambda = 0.0;  // Variable: Lagrangian rate weight

    static CompanderMode fixed(int t) { return {RateMode::Fixed, t, 0.0}; }
    static CompanderMode variable(double lambda) { return {RateMode::Variable, 0, lambda}; }
    bool is_fixed() const { return kind == RateMode::Fixed; }
};

struct DesignConfig {
    double step_size = 1.0;        // descent step mu (adapted by backtracking)
    int max_iters = 5000;          // per schedule stage
    double cost_tol = 1e-7;        // relative cost-decrease stop threshold
    int tol_window = 10;           // consecutive below-threshold iterations to stop
    int quad_nodes_n = 16;         // dither quadrature nodes
    std::vector<double> schedule;  // descending lambda (variable) / ascending T (fixed)
    std::uint64_t seed = 1;
    int design_points = 201;       // compressor grid resolution
    int gauss_per_segment = 4;     // x quadrature nodes per compressor segment
    double init_noise = 0.02;      // random compressor initialization amplitude
    double fd_epsilon = 1e-6;      // functional-gradient probe size
};

/// A compander-domain dithered quantizer: compressor g, expander w
/// (sampled over the dithered output domain), step size delta, and the
/// achieved rate/distortion of the design.
struct RandomizedDesign {
    MonotoneMap compressor;
    ScalarGrid expander;
    double delta = 1.0;
    CompanderMode mode;
    double distortion = 0.0;
    double rate_bits = 0.0;
    double lagrangian_cost = 0.0;
    double ortho_residual = 0.0;  // E[X(X - Xhat)]
    double expander_scale = 1.0;  // cumulative scaling applied by constrain_randomized
    bool converged = false;
    std::uint64_t seed = 0;
};

/// Discretized cost functional with all quadrature grids pinned at
/// construction, so pointwise perturbations of the compressor are
/// evaluated on identical nodes and finite differences of the cost are
/// exact derivatives of the same discretization.
class CompanderQuadrature {
public:
    CompanderQuadrature(const SourceModel& source, double delta, CompanderMode mode,
                        const MonotoneMap& g_ref, int quad_nodes, int gauss_per_segment,
                        double penalty_lambda_c = 0.0);

    struct Eval {
        double granular = 0.0;
        double overload = 0.0;
        double rate = 0.0;   // bits (variable mode only)
        double cross = 0.0;  // E[X Xhat]
        double cost = 0.0;
    };

    Eval total(const MonotoneMap& g, const ScalarGrid& w) const;
    double cost(const MonotoneMap& g, const ScalarGrid& w) const { return total(g, w).cost; }

    /// d(cost)/d(g_k) for every compressor node, by central finite
    /// differences with recomputation confined to the affected segments
    /// and output-density window.
    std::vector<double> gradient(const MonotoneMap& g, const ScalarGrid& w,
                                 double fd_eps) const;

    /// True while the pinned per-panel node counts still resolve g's
    /// output range (the panels stretch with g; the counts do not).
    bool covers(const MonotoneMap& g) const;

    const SourceModel& source() const { return *src_; }
    CompanderMode mode() const { return mode_; }
    double delta() const { return delta_; }
    double penalty_lambda_c() const { return penalty_; }

private:
    struct Pieces {
        double granular, cross_granular, overload, cross_overload;
    };
    Pieces segments(const MonotoneMap& g, const ScalarGrid& w, int s_first,
                    int s_last, bool with_overload) const;
    double rate_term(const MonotoneMap& g, double win_lo, double win_hi) const;
    double output_density_at(const MonotoneMap& g, double y) const;
    double local_cost(const MonotoneMap& g, const ScalarGrid& w, int node,
                      double win_lo, double win_hi) const;

    const SourceModel* src_;
    double delta_;
    CompanderMode mode_;
    double penalty_;
    std::vector<double> dn_, dw_;  // dither nodes / normalized weights
    std::vector<double> gn_, gw_;  // per-segment Gauss nodes / weights on (0,1)
    double y_h_ = 0.0;             // target entropy-node spacing
    int cnt_[3] = {2, 2, 2};       // entropy nodes per panel (pinned)
};

/// Eq.-level operations ------------------------------------------------

/// Conditional-mean expander w(y) = E[X | Y = y] on a grid over the
/// dithered output domain; empty windows fall back to the window midpoint.
ScalarGrid optimal_expander(const MonotoneMap& g, const SourceModel& source,
                            double delta, const CompanderMode& mode);

/// Granular distortion: mean squared error over the covered range,
/// averaged over the dither. t_max empty means the unbounded (variable
/// rate) quantizer.
double granular_distortion(const MonotoneMap& g, const ScalarGrid& w,
                           const SourceModel& source, double delta,
                           std::optional<int> t_max);

/// Overload distortion: the two saturation tail integrals, averaged over
/// the dither.
double overload_distortion(const MonotoneMap& g, const ScalarGrid& w,
                           const SourceModel& source, double delta, int t_max);

/// Density of Y = g(X) + N by CDF differencing.
ScalarGrid output_density(const MonotoneMap& g, const SourceModel& source,
                          double delta);

/// Variable rate h(Y) - log2 delta in bits.
double variable_rate(const MonotoneMap& g, const SourceModel& source,
                     double delta);

/// Fixed rate: granular + overload distortion. Variable rate: D + lambda R.
double total_cost(const RandomizedDesign& design, const SourceModel& source);

/// Functional gradient of the total cost sampled on the compressor grid
/// (spec-level convenience; the design loop uses the quadrature context).
std::vector<double> compressor_gradient(const MonotoneMap& g, const ScalarGrid& w,
                                        const SourceModel& source, double delta,
                                        const CompanderMode& mode);

struct DescendResult {
    MonotoneMap g;
    double cost_before = 0.0;
    double cost_after = 0.0;
    double used_step = 0.0;
    bool accepted = false;
};

/// One steepest-descent step with monotone projection and backtracking
/// (step halved up to 20 times so the cost never increases).
DescendResult descend(const MonotoneMap& g, const ScalarGrid& w,
                      const CompanderQuadrature& quad,
                      const std::vector<double>& grad, double mu);

/// Annealed alternation of expander and compressor updates over the
/// relaxation schedule, warm-starting each stage from the previous one.
RandomizedDesign design_unconstrained(const SourceModel& source,
                                      const CompanderMode& target,
                                      const DesignConfig& config,
                                      std::vector<double>* cost_trace = nullptr);

/// Single-stage variant starting from a given compressor (no relaxation
/// schedule); used when tracking an operating point across nearby targets.
RandomizedDesign design_unconstrained(const SourceModel& source,
                                      const CompanderMode& target,
                                      const DesignConfig& config,
                                      const MonotoneMap& warm_start);

/// Orthogonality-constrained variant: keeps g, rescales the expander so
/// that E[X Xhat] = sigma_X^2.
RandomizedDesign constrain_randomized(const RandomizedDesign& design,
                                      const SourceModel& source);

/// Direct penalized route to the constrained design: optimizes
/// J + lambda_c (sigma^2 - E[X Xhat]) with lambda_c adjusted by bisection
/// until the orthogonality residual vanishes. Cross-check for the
/// scale-the-expander construction. An optional warm start pins the search
/// to that design's basin (the designs are local optima).
RandomizedDesign design_constrained_direct(const SourceModel& source,
                                           const CompanderMode& target,
                                           const DesignConfig& config,
                                           double* lambda_c_out = nullptr,
                                           const RandomizedDesign* warm_start = nullptr);

/// Versioned CSV bundle round-trip.
void save_design(const RandomizedDesign& design, const std::string& path);
RandomizedDesign load_design(const std::string& path);

}  // namespace quant
