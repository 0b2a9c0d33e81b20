#include "quant/dither.hpp"

#include <algorithm>
#include <cmath>

namespace quant {

double uniform_quantize(double x, const UniformQuantizerSpec& spec) {
    const double d = spec.delta;
    double i = std::ceil(x / d - 0.5);
    if (spec.t_max) {
        const double t = static_cast<double>(*spec.t_max);
        i = std::clamp(i, -t, t);
    }
    return i * d;
}

double fixed_rate_of(const UniformQuantizerSpec& spec) {
    if (!spec.t_max) throw std::invalid_argument("fixed_rate_of: T is unbounded");
    return std::log2(2.0 * *spec.t_max + 1.0);
}

double dithered_reconstruct(double x, DitherRealization z,
                            const UniformQuantizerSpec& spec) {
    return uniform_quantize(x + z.z, spec) - z.z;
}

double conventional_variable_rate(const SourceModel& source, double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("conventional_variable_rate: delta must be > 0");
    const ScalarGrid fy = uniform_smoothed_density(source, delta, source.pdf().h() / 4.0);
    return differential_entropy(fy) - std::log2(delta);
}

double conventional_distortion(const UniformQuantizerSpec& spec,
                               const SourceModel& source) {
    const double d = spec.delta;
    const double reach = std::max(-source.x_min(), source.x_max());
    if (!spec.t_max || *spec.t_max * d >= reach) return d * d / 12.0;

    // overloaded: average the squared error over x (trapezoid on the source
    // grid) and the dither (Gauss-Legendre on (-delta/2, delta/2))
    const GaussRule gr = gauss_legendre(64);
    const ScalarGrid& pdf = source.pdf();
    std::vector<double> integrand(pdf.n());
    for (int i = 0; i < pdf.n(); ++i) {
        const double x = pdf.x(i);
        double acc = 0.0;
        for (size_t k = 0; k < gr.nodes.size(); ++k) {
            const double z = 0.5 * d * gr.nodes[k];
            const double e = dithered_reconstruct(x, {z}, spec) - x;
            acc += 0.5 * gr.weights[k] * e * e;
        }
        integrand[i] = acc * pdf.values[i];
    }
    return trapezoid(ScalarGrid(pdf.x_min, pdf.x_max, std::move(integrand)));
}

}  // namespace quant
