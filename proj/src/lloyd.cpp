#include "quant/lloyd.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "quant/rng.hpp"

namespace quant {

namespace {

void refresh_cells(CellQuantizer& q, const SourceModel& src) {
    const PdfMoments& mom = src.moments();
    const int m = q.cells();
    q.probs.resize(m);
    q.moments.resize(m);
    for (int i = 0; i < m; ++i) {
        q.probs[i] = mom.mass(q.boundaries[i], q.boundaries[i + 1]);
        q.moments[i] = mom.first(q.boundaries[i], q.boundaries[i + 1]);
    }
}

void centroid_step(CellQuantizer& q) {
    for (int i = 0; i < q.cells(); ++i) {
        if (q.probs[i] > 0.0)
            q.reconstructions[i] = q.moments[i] / q.probs[i];
        else
            q.reconstructions[i] = 0.5 * (q.boundaries[i] + q.boundaries[i + 1]);
    }
}

// Lagrangian nearest-neighbor boundary between cells i and i+1; lambda = 0
// is the plain midpoint rule.
double cell_boundary(const CellQuantizer& q, int i, double lambda) {
    const double ra = q.reconstructions[i], rb = q.reconstructions[i + 1];
    double b = 0.5 * (ra + rb);
    if (lambda > 0.0 && i + 1 < static_cast<int>(q.probs.size()) &&
        q.probs[i] > 0.0 && q.probs[i + 1] > 0.0 && rb > ra)
        b += lambda * std::log2(q.probs[i] / q.probs[i + 1]) / (2.0 * (rb - ra));
    return b;
}

CellQuantizer one_run(const SourceModel& src, int M, double lambda,
                      std::vector<double> recon) {
    std::sort(recon.begin(), recon.end());
    CellQuantizer q;
    q.reconstructions = std::move(recon);
    if (lambda > 0.0) q.lambda = lambda;
    q.boundaries.assign(M + 1, 0.0);

    double prev_cost = 1e300;
    for (int it = 0; it < 2000; ++it) {
        const int m = q.cells();
        q.boundaries.resize(m + 1);
        q.boundaries.front() = src.x_min();
        q.boundaries.back() = src.x_max();
        for (int i = 0; i + 1 < m; ++i) {
            double b = cell_boundary(q, i, lambda);
            b = std::clamp(b, q.boundaries[i], src.x_max());
            q.boundaries[i + 1] = b;
        }
        for (int i = 1; i <= m; ++i)
            q.boundaries[i] = std::max(q.boundaries[i], q.boundaries[i - 1]);
        refresh_cells(q, src);

        // prune cells squeezed to zero mass (entropy-constrained runs)
        if (lambda > 0.0) {
            for (int i = q.cells() - 1; i >= 0 && q.cells() > 1; --i) {
                if (q.probs[i] > 1e-12) continue;
                q.reconstructions.erase(q.reconstructions.begin() + i);
                q.boundaries.erase(q.boundaries.begin() + (i == 0 ? 1 : i));
                refresh_cells(q, src);
            }
        }
        centroid_step(q);
        refresh_cells(q, src);

        const double cost = q.distortion(src) + lambda * q.entropy_bits();
        if (std::abs(prev_cost - cost) < 1e-10) break;
        prev_cost = cost;
    }
    return q;
}

CellQuantizer multistart(const SourceModel& src, int M, double lambda,
                         std::uint64_t seed, int starts = 16) {
    const double lo = src.x_min(), hi = src.x_max();
    CellQuantizer best;
    double best_cost = 1e300;
    Rng rng(seed);
    for (int s = 0; s < starts; ++s) {
        std::vector<double> init(M);
        for (int i = 0; i < M; ++i) {
            const double u = (i + 0.5) / M;
            double x = (s == 0) ? src.inverse_cdf(u)  // quantile start, then jittered
                                : lo + u * (hi - lo) + rng.uniform(-0.4, 0.4) * (hi - lo) / M;
            init[i] = std::clamp(x, lo, hi);
        }
        CellQuantizer q = one_run(src, M, lambda, std::move(init));
        const double cost = q.distortion(src) + lambda * q.entropy_bits();
        if (cost < best_cost) {
            best_cost = cost;
            best = std::move(q);
        }
    }
    return best;
}

}  // namespace

double CellQuantizer::quantize(double x) const {
    auto it = std::lower_bound(boundaries.begin() + 1, boundaries.end() - 1, x);
    return reconstructions[it - (boundaries.begin() + 1)];
}

double CellQuantizer::distortion(const SourceModel& source) const {
    const PdfMoments& mom = source.moments();
    double d = 0.0;
    for (int i = 0; i < cells(); ++i) {
        const double a = boundaries[i], b = boundaries[i + 1];
        const double r = reconstructions[i];
        d += mom.second(a, b) - 2.0 * r * mom.first(a, b) + r * r * mom.mass(a, b);
    }
    return d;
}

double CellQuantizer::entropy_bits() const {
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0) h -= p * std::log2(p);
    return h;
}

void CellQuantizer::validate() const {
    const int m = cells();
    if (m < 1 || static_cast<int>(boundaries.size()) != m + 1 ||
        static_cast<int>(probs.size()) != m || static_cast<int>(moments.size()) != m)
        throw std::invalid_argument("CellQuantizer: inconsistent sizes");
    for (int i = 0; i < m; ++i) {
        if (!(boundaries[i + 1] > boundaries[i]))
            throw std::invalid_argument("CellQuantizer: boundaries must be strictly increasing");
        if (!std::isfinite(reconstructions[i]))
            throw std::invalid_argument("CellQuantizer: non-finite reconstruction");
    }
    double mass = 0.0;
    for (double p : probs) mass += p;
    if (std::abs(mass - 1.0) > 1e-9)
        throw std::invalid_argument("CellQuantizer: cell probabilities must sum to 1");
}

CellQuantizer lloyd_max(const SourceModel& source, int M, std::uint64_t seed) {
    if (M < 1) throw std::invalid_argument("lloyd_max: M must be >= 1");
    return multistart(source, M, 0.0, seed);
}

CellQuantizer ecsq(const SourceModel& source, double lambda, int M_init,
                   std::uint64_t seed) {
    if (lambda < 0.0) throw std::invalid_argument("ecsq: lambda must be >= 0");
    if (M_init < 1) throw std::invalid_argument("ecsq: M_init must be >= 1");
    return multistart(source, M_init, lambda, seed);
}

std::pair<CellQuantizer, ConstraintReport> constrain_deterministic(
    const CellQuantizer& q, const SourceModel& source) {
    double power = 0.0;  // sum p_i r_i^2 = E[Xhat^2]
    for (int i = 0; i < q.cells(); ++i)
        power += q.probs[i] * q.reconstructions[i] * q.reconstructions[i];
    if (power <= 1e-14)
        throw std::domain_error("constrain_deterministic: zero-rate quantizer, constraint infeasible");

    const double sigma2 = source.variance();
    const double c = sigma2 / power;
    CellQuantizer out = q;
    for (double& r : out.reconstructions) r *= c;

    ConstraintReport rep;
    rep.scale_c = c;
    rep.distortion_unconstrained = q.distortion(source);
    rep.distortion_constrained = out.distortion(source);
    rep.orthogonality_residual = orthogonality_residual(out, source);
    return {std::move(out), rep};
}

double verify_distortion_identity(const ConstraintReport& report, double sigma2) {
    const double ds = report.distortion_unconstrained;
    if (ds >= sigma2)
        throw std::invalid_argument("verify_distortion_identity: D* >= sigma^2");
    return std::abs(report.distortion_constrained - sigma2 * ds / (sigma2 - ds));
}

double orthogonality_residual(const CellQuantizer& q, const SourceModel& source) {
    const PdfMoments& mom = source.moments();
    double exhat = 0.0;  // E[X Xhat]
    for (int i = 0; i < q.cells(); ++i)
        exhat += q.reconstructions[i] * mom.first(q.boundaries[i], q.boundaries[i + 1]);
    return source.variance() - exhat;
}

void save_quantizer(const CellQuantizer& q, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_quantizer: cannot open " + path);
    out.precision(17);
    out << "cell-quantizer,v1," << q.cells() << ","
        << (q.lambda ? *q.lambda : -1.0) << "\n";
    for (int i = 0; i < q.cells(); ++i)
        out << q.boundaries[i] << "," << q.boundaries[i + 1] << ","
            << q.reconstructions[i] << "," << q.probs[i] << "\n";
}

CellQuantizer load_quantizer(const std::string& path, const SourceModel& source) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_quantizer: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error("load_quantizer: empty file");
    std::stringstream hdr(line);
    std::string tag, ver, mstr, lstr;
    std::getline(hdr, tag, ',');
    std::getline(hdr, ver, ',');
    std::getline(hdr, mstr, ',');
    std::getline(hdr, lstr, ',');
    if (tag != "cell-quantizer" || ver != "v1")
        throw std::runtime_error("load_quantizer: unrecognized header");
    const int m = std::stoi(mstr);
    const double lambda = std::stod(lstr);

    CellQuantizer q;
    if (lambda >= 0.0) q.lambda = lambda;
    q.boundaries.resize(m + 1);
    q.reconstructions.resize(m);
    for (int i = 0; i < m; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("load_quantizer: truncated file");
        std::stringstream row(line);
        std::string a, b, r, p;
        std::getline(row, a, ',');
        std::getline(row, b, ',');
        std::getline(row, r, ',');
        std::getline(row, p, ',');
        q.boundaries[i] = std::stod(a);
        q.boundaries[i + 1] = std::stod(b);
        q.reconstructions[i] = std::stod(r);
    }
    refresh_cells(q, source);
    q.validate();
    return q;
}

}  // namespace quant
