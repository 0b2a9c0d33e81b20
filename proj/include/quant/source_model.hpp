#pragma once

#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "quant/grid.hpp"

namespace quant {

/// Bounded-support scalar source density on a uniform grid.
/// The density integrates to one (trapezoidal rule, 1e-9), the mean is
/// zero within 1e-9 and the variance is recomputed from the sampled
/// density, not taken from any nominal parameter.
class SourceModel {
public:
    static SourceModel from_pdf(ScalarGrid pdf);

    const ScalarGrid& pdf() const { return pdf_; }
    const ScalarGrid& cdf() const { return cdf_; }
    double variance() const { return variance_; }
    double mean() const { return mean_; }
    double x_min() const { return pdf_.x_min; }
    double x_max() const { return pdf_.x_max; }

    /// Exact CDF of the piecewise-linear density (quadratic on segments).
    double cdf_at(double x) const;
    /// Inverse CDF, exact on segments.
    double inverse_cdf(double u) const;

    const PdfMoments& moments() const { return *moments_; }

private:
    SourceModel() = default;
    ScalarGrid pdf_;
    ScalarGrid cdf_;
    double variance_ = 0.0;
    double mean_ = 0.0;
    std::shared_ptr<const PdfMoments> moments_;
};

/// Gaussian density truncated to [-half_width, half_width] and
/// renormalized to unit mass. The variance field is recomputed from the
/// truncated density.
SourceModel make_truncated_gaussian(double variance, double half_width,
                                    int n_points = 2001);

/// Load a density from a two-column CSV (abscissa, density) on a uniform
/// grid; validates all SourceModel invariants.
SourceModel load_source_csv(const std::string& path);

/// Differential entropy -∫ f log2 f in bits; the integrand is taken as 0
/// where f vanishes.
double differential_entropy(const ScalarGrid& pdf);

/// i.i.d. draws by inverse-CDF transform of a seeded uniform stream.
std::vector<double> sample(const SourceModel& source, int n, std::uint64_t seed);

struct BivariateGaussianSpec {
    double rho = 0.0;        // source correlation
    double variance = 1.0;
    double truncation = 3.0; // support half-width per component
};

/// Correlated Gaussian pairs, rejected to the square
/// [-truncation, truncation]^2.
std::vector<std::pair<double, double>> sample_bivariate(
    const BivariateGaussianSpec& spec, int n, std::uint64_t seed);

/// Density of X + U where U is uniform on (-delta/2, delta/2), computed by
/// exact CDF differencing of the piecewise-linear pdf on a grid of spacing
/// ~dy covering the widened support.
ScalarGrid uniform_smoothed_density(const SourceModel& source, double delta,
                                    double dy);

}  // namespace quant
