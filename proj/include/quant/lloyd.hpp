#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "quant/source_model.hpp"

namespace quant {

/// Deterministic scalar quantizer: a partition of the source support into
/// cells (b_{i-1}, b_i] with one reconstruction level per cell. probs and
/// moments are the cell mass p_i and first moment l_i under the source.
struct CellQuantizer {
    std::vector<double> boundaries;       // b_0 < ... < b_M, spans the support
    std::vector<double> reconstructions;  // r_1 ... r_M
    std::vector<double> probs;
    std::vector<double> moments;
    std::optional<double> lambda;  // set: variable-rate (entropy-constrained) design

    int cells() const { return static_cast<int>(reconstructions.size()); }

    double quantize(double x) const;
    double distortion(const SourceModel& source) const;
    /// Entropy of the cell index in bits (0 log 0 = 0).
    double entropy_bits() const;
    void validate() const;
};

/// Theorem-1 constraint report for a deterministic design.
struct ConstraintReport {
    double scale_c = 1.0;
    double orthogonality_residual = 0.0;
    double distortion_unconstrained = 0.0;  // D*
    double distortion_constrained = 0.0;    // D
};

/// Fixed-rate MSE-optimal design by Lloyd iteration (centroid /
/// nearest-neighbor alternation, multistart over perturbed initializations,
/// best design kept).
CellQuantizer lloyd_max(const SourceModel& source, int M, std::uint64_t seed);

/// Entropy-constrained design minimizing D + lambda * H(index) by
/// Lagrangian Lloyd iteration; empty cells are pruned.
CellQuantizer ecsq(const SourceModel& source, double lambda, int M_init,
                   std::uint64_t seed);

/// Orthogonality-constrained counterpart: same partition, reconstructions
/// scaled by c = sigma^2 / sum p_i r_i^2 so that E[X(X - Xhat)] = 0.
std::pair<CellQuantizer, ConstraintReport> constrain_deterministic(
    const CellQuantizer& q, const SourceModel& source);

/// |D - sigma^2 D* / (sigma^2 - D*)|, the Eq.-(30) closed-form check.
double verify_distortion_identity(const ConstraintReport& report, double sigma2);

/// E[X(X - Xhat)] by exact per-cell moments.
double orthogonality_residual(const CellQuantizer& q, const SourceModel& source);

/// CSV rows (b_{i-1}, b_i, r_i, p_i); the loader re-validates invariants.
void save_quantizer(const CellQuantizer& q, const std::string& path);
CellQuantizer load_quantizer(const std::string& path, const SourceModel& source);

}  // namespace quant
