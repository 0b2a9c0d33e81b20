#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quant/compander.hpp"
#include "quant/lloyd.hpp"
#include "quant/source_model.hpp"

namespace quant {

enum class Family {
    ConventionalDither,
    Randomized,              // Quantizer 1
    ConstrainedRandomized,   // Quantizer 2
    ConstrainedDeterministic,// Quantizer 3
    OptimalDeterministic,
};

std::string family_name(Family f);
Family family_from_name(const std::string& name);

struct SweepSpec {
    RateMode rate_mode = RateMode::Variable;
    std::vector<double> rate_points;  // target rates in bits
    std::vector<Family> families;
    DesignConfig config;
    std::uint64_t seed = 1;
};

struct ResultRow {
    Family family = Family::ConventionalDither;
    double rate_bits = 0.0;
    double distortion = 0.0;
    double snr_db = 0.0;
    double ortho_residual = 0.0;
    double err_src_corr = 0.0;
    bool converged = true;
};

/// Operating-point designers -------------------------------------------

/// Randomized (compander) design hitting a target variable rate within
/// 0.01 bits by bisection on lambda, warm-started across probes.
RandomizedDesign design_randomized_at_rate(const SourceModel& source,
                                           double rate_bits,
                                           const DesignConfig& config);

/// Entropy-constrained deterministic design at a target rate (0.01 bits)
/// by bisection on lambda.
CellQuantizer ecsq_at_rate(const SourceModel& source, double rate_bits,
                           int M_init, std::uint64_t seed);

/// Step size minimizing the conventional dithered quantizer's total
/// distortion at level bound T (golden-section search).
double conventional_best_delta(const SourceModel& source, int t_max);

/// Experiments ------------------------------------------------------------

/// Designs and evaluates every (family, rate point) pair of the spec on
/// the given source; rows sorted by (family, rate). Per-point failures set
/// converged = false and the sweep continues.
std::vector<ResultRow> snr_sweep(const SweepSpec& spec, const SourceModel& source);

/// Pearson correlation of the two reconstruction-error streams when both
/// components of correlated Gaussian pairs pass through the same scalar
/// design (independent per-component dither for randomized families).
double correlation_experiment(const BivariateGaussianSpec& spec, Family family,
                              RateMode rate_mode, double rate_target,
                              int n_samples, std::uint64_t seed,
                              const DesignConfig& config);

struct WhitenessReport {
    double corr_source_error = 0.0;
    double error_mean = 0.0;
    double error_variance = 0.0;
    std::vector<double> histogram;  // 20 bins over the observed error range
};

WhitenessReport whiteness_randomized(const RandomizedDesign& design,
                                     const SourceModel& source, int n_samples,
                                     std::uint64_t seed);
WhitenessReport whiteness_deterministic(const CellQuantizer& q,
                                        const SourceModel& source, int n_samples,
                                        std::uint64_t seed);

/// Monte Carlo distortion of a randomized design (quadrature cross-check).
double simulate_randomized_distortion(const RandomizedDesign& design,
                                      const SourceModel& source, int n_samples,
                                      std::uint64_t seed);

/// CSV with header family,rate_bits,distortion,snr_db,ortho_residual,
/// err_src_corr,converged; reals at 9 significant digits.
void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path);

}  // namespace quant
