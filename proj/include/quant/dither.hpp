#pragma once

#include <optional>

#include "quant/source_model.hpp"

namespace quant {

/// Uniform mid-tread quantizer with reconstruction levels
/// {0, ±delta, ..., ±T delta}. An empty t_max means an unbounded level
/// set (the variable-rate convention T -> ∞).
struct UniformQuantizerSpec {
    double delta = 1.0;
    std::optional<int> t_max;  // nullopt: unbounded
};

struct DitherRealization {
    double z = 0.0;  // in (-delta/2, delta/2]
};

/// Q(x) = i*delta for i*delta - delta/2 < x <= i*delta + delta/2,
/// with i clamped to [-T, T] when T is finite.
double uniform_quantize(double x, const UniformQuantizerSpec& spec);

/// log2(2T+1) bits; requires finite T.
double fixed_rate_of(const UniformQuantizerSpec& spec);

/// Subtractive-dither reconstruction Q(x+z) - z.
double dithered_reconstruct(double x, DitherRealization z,
                            const UniformQuantizerSpec& spec);

/// Variable rate H(Q(X+Z)|Z) = h(X+N) - log2 delta, with the density of
/// X+N obtained by exact convolution of the piecewise-linear pdf with the
/// uniform dither density.
double conventional_variable_rate(const SourceModel& source, double delta);

/// Expected squared error of the dithered quantizer. Returns delta^2/12
/// exactly when the level set spans the source support; otherwise the
/// overload region is integrated by quadrature over x and the dither.
double conventional_distortion(const UniformQuantizerSpec& spec,
                               const SourceModel& source);

}  // namespace quant
