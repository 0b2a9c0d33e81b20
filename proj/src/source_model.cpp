#include "quant/source_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "quant/rng.hpp"

namespace quant {

namespace {
constexpr double kMassTol = 1e-9;
constexpr double kMeanTol = 1e-9;
}  // namespace

SourceModel SourceModel::from_pdf(ScalarGrid pdf) {
    for (double v : pdf.values)
        if (v < 0.0) throw std::invalid_argument("SourceModel: negative density value");
    const double mass = trapezoid(pdf);
    if (std::abs(mass - 1.0) > kMassTol)
        throw std::invalid_argument("SourceModel: density mass differs from 1 by more than 1e-9");

    SourceModel m;
    m.pdf_ = std::move(pdf);
    m.moments_ = std::make_shared<PdfMoments>(m.pdf_);

    const int n = m.pdf_.n();
    std::vector<double> c(n);
    for (int i = 0; i < n; ++i) c[i] = m.moments_->cdf(m.pdf_.x(i));
    m.cdf_ = ScalarGrid(m.pdf_.x_min, m.pdf_.x_max, std::move(c));

    m.mean_ = m.moments_->first(m.pdf_.x_min, m.pdf_.x_max);
    if (std::abs(m.mean_) > kMeanTol)
        throw std::invalid_argument("SourceModel: density mean differs from 0 by more than 1e-9");
    m.variance_ = m.moments_->second(m.pdf_.x_min, m.pdf_.x_max) - m.mean_ * m.mean_;
    return m;
}

double SourceModel::cdf_at(double x) const { return moments_->cdf(x); }

double SourceModel::inverse_cdf(double u) const {
    const auto& c = cdf_.values;
    const double total = c.back();
    u = std::clamp(u, 0.0, total);
    // locate the segment whose node CDF brackets u
    auto it = std::lower_bound(c.begin(), c.end(), u);
    int i = static_cast<int>(it - c.begin());
    if (i > 0) --i;
    i = std::min(i, cdf_.n() - 2);
    // invert the quadratic CDF within the segment
    const double h = pdf_.h();
    const double f0 = pdf_.values[i];
    const double s = (pdf_.values[i + 1] - f0) / h;
    const double du = u - c[i];
    double t;
    if (std::abs(s) < 1e-300) {
        t = (f0 > 0.0) ? du / f0 : 0.5 * h;
    } else {
        // solve 0.5 s t^2 + f0 t - du = 0, stable root
        const double disc = f0 * f0 + 2.0 * s * du;
        const double root = std::sqrt(std::max(disc, 0.0));
        t = (s > 0.0) ? (root - f0) / s : 2.0 * du / (f0 + root);
    }
    t = std::clamp(t, 0.0, h);
    return pdf_.x(i) + t;
}

SourceModel make_truncated_gaussian(double variance, double half_width, int n_points) {
    if (!(variance > 0.0)) throw std::invalid_argument("make_truncated_gaussian: variance must be > 0");
    if (!(half_width > 0.0)) throw std::invalid_argument("make_truncated_gaussian: half_width must be > 0");
    if (n_points < 3) throw std::invalid_argument("make_truncated_gaussian: n_points must be >= 3");
    const double sigma = std::sqrt(variance);
    if (half_width / sigma < 2.0)
        throw std::invalid_argument("make_truncated_gaussian: half_width must be at least 2 sigma");

    ScalarGrid pdf = make_grid(-half_width, half_width, n_points, [&](double x) {
        return std::exp(-0.5 * x * x / variance);
    });
    const double mass = trapezoid(pdf);
    for (double& v : pdf.values) v /= mass;
    return SourceModel::from_pdf(std::move(pdf));
}

SourceModel load_source_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("load_source_csv: cannot open " + path);
    std::vector<double> xs, fs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ss(line);
        double x, f;
        if (!(ss >> x >> f)) {
            // tolerate a single header line
            if (lineno == 1) continue;
            throw std::invalid_argument("load_source_csv: parse error at line " +
                                        std::to_string(lineno));
        }
        xs.push_back(x);
        fs.push_back(f);
    }
    if (xs.size() < 3) throw std::invalid_argument("load_source_csv: need at least 3 rows");
    const double h = xs[1] - xs[0];
    for (size_t i = 1; i < xs.size(); ++i)
        if (std::abs((xs[i] - xs[i - 1]) - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw std::invalid_argument("load_source_csv: abscissae are not uniformly spaced");
    return SourceModel::from_pdf(ScalarGrid(xs.front(), xs.back(), std::move(fs)));
}

double differential_entropy(const ScalarGrid& pdf) {
    std::vector<double> integrand(pdf.n());
    for (int i = 0; i < pdf.n(); ++i) {
        const double f = pdf.values[i];
        if (f < 0.0) throw std::invalid_argument("differential_entropy: negative density value");
        integrand[i] = (f > 0.0) ? -f * std::log2(f) : 0.0;
    }
    return trapezoid(ScalarGrid(pdf.x_min, pdf.x_max, std::move(integrand)));
}

std::vector<double> sample(const SourceModel& source, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("sample: n must be >= 1");
    Rng rng(seed);
    std::vector<double> out(n);
    for (int i = 0; i < n; ++i) out[i] = source.inverse_cdf(rng.uniform01());
    return out;
}

std::vector<std::pair<double, double>> sample_bivariate(
    const BivariateGaussianSpec& spec, int n, std::uint64_t seed) {
    if (std::abs(spec.rho) > 1.0) throw std::invalid_argument("sample_bivariate: |rho| must be <= 1");
    if (!(spec.variance > 0.0)) throw std::invalid_argument("sample_bivariate: variance must be > 0");
    if (!(spec.truncation > 0.0)) throw std::invalid_argument("sample_bivariate: truncation must be > 0");
    if (n < 1) throw std::invalid_argument("sample_bivariate: n must be >= 1");

    Rng rng(seed);
    const double sigma = std::sqrt(spec.variance);
    const double c = std::sqrt(std::max(0.0, 1.0 - spec.rho * spec.rho));
    std::vector<std::pair<double, double>> out;
    out.reserve(n);
    while (static_cast<int>(out.size()) < n) {
        const double z1 = rng.normal();
        const double z2 = rng.normal();
        const double x1 = sigma * z1;
        const double x2 = sigma * (spec.rho * z1 + c * z2);
        if (std::abs(x1) > spec.truncation || std::abs(x2) > spec.truncation) continue;
        out.emplace_back(x1, x2);
    }
    return out;
}

ScalarGrid uniform_smoothed_density(const SourceModel& source, double delta, double dy) {
    if (!(delta > 0.0)) throw std::invalid_argument("uniform_smoothed_density: delta must be > 0");
    const double lo = source.x_min() - 0.5 * delta;
    const double hi = source.x_max() + 0.5 * delta;
    const int n = std::max(3, static_cast<int>(std::lround((hi - lo) / dy)) + 1);
    return make_grid(lo, hi, n, [&](double y) {
        return (source.cdf_at(y + 0.5 * delta) - source.cdf_at(y - 0.5 * delta)) / delta;
    });
}

}  // namespace quant
