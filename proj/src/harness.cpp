#include "quant/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <future>

#include "quant/dither.hpp"
#include "quant/rng.hpp"

namespace quant {

namespace {

double snr_db_of(double sigma2, double d) {
    return 10.0 * std::log10(sigma2 / std::max(d, 1e-300));
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    const double den = std::sqrt(saa * sbb);
    return den > 0.0 ? sab / den : 0.0;
}

// E[X Xhat] for the conventional dithered quantizer, Gauss over the
// dither and trapezoid over the source grid.
double conventional_cross(const UniformQuantizerSpec& spec, const SourceModel& src) {
    const GaussRule gr = gauss_legendre(64);
    const ScalarGrid& pdf = src.pdf();
    std::vector<double> integrand(pdf.n());
    for (int i = 0; i < pdf.n(); ++i) {
        const double x = pdf.x(i);
        double acc = 0.0;
        for (size_t k = 0; k < gr.nodes.size(); ++k) {
            const double z = 0.5 * spec.delta * gr.nodes[k];
            acc += 0.5 * gr.weights[k] * dithered_reconstruct(x, {z}, spec);
        }
        integrand[i] = acc * x * pdf.values[i];
    }
    return trapezoid(ScalarGrid(pdf.x_min, pdf.x_max, std::move(integrand)));
}

double randomized_reconstruct(const RandomizedDesign& d, double x, double z) {
    const UniformQuantizerSpec spec{d.delta, d.mode.is_fixed()
                                                 ? std::optional<int>(d.mode.t_max)
                                                 : std::nullopt};
    const double v = uniform_quantize(d.compressor(x) + z, spec) - z;
    // same C^1 evaluation the design quadrature uses, so simulation and
    // quadrature estimate the same system
    return hermite_eval(d.expander, v);
}

// Smallest step with no overload at T levels per side: the correlation
// and whiteness experiments assume the Schuchman condition holds, which
// requires the quantizer to cover the source support.
double conventional_no_overload_delta(const SourceModel& src, int t_max) {
    const double reach = std::max(-src.x_min(), src.x_max());
    return reach / (t_max + 0.5);
}

WhitenessReport report_from_streams(const std::vector<double>& xs,
                                    const std::vector<double>& errs) {
    WhitenessReport rep;
    rep.corr_source_error = pearson(xs, errs);
    const size_t n = errs.size();
    for (double e : errs) rep.error_mean += e;
    rep.error_mean /= n;
    for (double e : errs) rep.error_variance += (e - rep.error_mean) * (e - rep.error_mean);
    rep.error_variance /= n;
    const auto [lo_it, hi_it] = std::minmax_element(errs.begin(), errs.end());
    const double lo = *lo_it, hi = *hi_it;
    rep.histogram.assign(20, 0.0);
    const double w = std::max(hi - lo, 1e-300);
    for (double e : errs) {
        int b = static_cast<int>(20.0 * (e - lo) / w);
        rep.histogram[std::clamp(b, 0, 19)] += 1.0;
    }
    for (double& c : rep.histogram) c /= static_cast<double>(n);
    return rep;
}

ResultRow make_row(Family fam, double rate, double dist, double residual,
                   double sigma2, bool converged) {
    ResultRow row;
    row.family = fam;
    row.rate_bits = rate;
    row.distortion = dist;
    row.snr_db = snr_db_of(sigma2, dist);
    row.ortho_residual = residual;
    row.err_src_corr = dist > 0.0 ? residual / std::sqrt(sigma2 * dist) : 0.0;
    row.converged = converged;
    return row;
}

// Conventional variable-rate step size hitting a target rate (rate is
// decreasing in delta).
double conventional_delta_at_rate(const SourceModel& src, double rate_bits) {
    double lo = 1e-4, hi = 2.0 * (src.x_max() - src.x_min());
    for (int it = 0; it < 200; ++it) {
        const double mid = std::sqrt(lo * hi);
        const double r = conventional_variable_rate(src, mid);
        if (std::abs(r - rate_bits) < 1e-4) return mid;
        if (r > rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    return std::sqrt(lo * hi);
}

// Operational ECSQ benchmark at an exact rate. The Lagrangian family skips
// rates inside nonconvex stretches of the frontier (entropy jumps when a
// cell is born), so the benchmark is the lower convex hull: time-share the
// two Lagrangian designs bracketing the target entropy. Returns the hull
// distortion and the interpolated orthogonality residual.
std::pair<double, double> ecsq_hull_at_rate(const SourceModel& src, double rate,
                                            std::uint64_t seed) {
    const double sigma2 = src.variance();
    double h_lo = 0.0, d_lo = sigma2, r_lo = sigma2;   // zero-rate endpoint
    double h_hi = -1.0, d_hi = 0.0, r_hi = 0.0;
    double lam_lo = 1e-7, lam_hi = 4.0 * sigma2;
    for (int it = 0; it < 48; ++it) {
        const double mid = std::sqrt(lam_lo * lam_hi);
        CellQuantizer q = ecsq(src, mid, 64, seed);
        const double h = q.entropy_bits();
        const double d = q.distortion(src);
        const double r = orthogonality_residual(q, src);
        if (h <= rate) {
            if (h > h_lo) { h_lo = h; d_lo = d; r_lo = r; }
            lam_hi = mid;
        } else {
            if (h_hi < 0.0 || h < h_hi) { h_hi = h; d_hi = d; r_hi = r; }
            lam_lo = mid;
        }
        if (h_hi >= 0.0 && h_hi - h_lo < 1e-3) break;
    }
    if (h_hi < 0.0) return {d_lo, r_lo};  // rate beyond the sampled frontier
    const double t = (rate - h_lo) / std::max(h_hi - h_lo, 1e-12);
    return {d_lo + t * (d_hi - d_lo), r_lo + t * (r_hi - r_lo)};
}

ResultRow sweep_point(const SweepSpec& spec, const SourceModel& src, Family fam,
                      double rate) {
    const double sigma2 = src.variance();
    const bool fixed = spec.rate_mode == RateMode::Fixed;
    const int t_max = std::max(1, static_cast<int>(std::lround((std::exp2(rate) - 1.0) / 2.0)));
    const int m_cells = std::max(1, static_cast<int>(std::lround(std::exp2(rate))));

    switch (fam) {
        case Family::ConventionalDither: {
            if (fixed) {
                const double delta = conventional_best_delta(src, t_max);
                const UniformQuantizerSpec uspec{delta, t_max};
                const double d = conventional_distortion(uspec, src);
                const double residual = sigma2 - conventional_cross(uspec, src);
                return make_row(fam, fixed_rate_of(uspec), d, residual, sigma2, true);
            }
            const double delta = conventional_delta_at_rate(src, rate);
            const UniformQuantizerSpec uspec{delta, std::nullopt};
            const double d = conventional_distortion(uspec, src);
            return make_row(fam, conventional_variable_rate(src, delta), d, 0.0,
                            sigma2, true);
        }
        case Family::Randomized:
        case Family::ConstrainedRandomized: {
            DesignConfig cfg = spec.config;
            cfg.seed = spec.seed;
            RandomizedDesign d =
                fixed ? design_unconstrained(src, CompanderMode::fixed(t_max), cfg)
                      : design_randomized_at_rate(src, rate, cfg);
            if (fam == Family::ConstrainedRandomized) d = constrain_randomized(d, src);
            return make_row(fam, d.rate_bits, d.distortion, d.ortho_residual,
                            sigma2, d.converged);
        }
        case Family::ConstrainedDeterministic:
        case Family::OptimalDeterministic: {
            if (fixed) {
                CellQuantizer q = lloyd_max(src, m_cells, spec.seed);
                const double r = std::log2(static_cast<double>(m_cells));
                if (fam == Family::ConstrainedDeterministic) {
                    auto [cq, rep] = constrain_deterministic(q, src);
                    return make_row(fam, r, rep.distortion_constrained,
                                    rep.orthogonality_residual, sigma2, true);
                }
                return make_row(fam, r, q.distortion(src),
                                orthogonality_residual(q, src), sigma2, true);
            }
            auto [d_hull, resid] = ecsq_hull_at_rate(src, rate, spec.seed);
            if (fam == Family::ConstrainedDeterministic) {
                // scaling the time-shared reconstruction to orthogonality
                // maps the hull distortion exactly as for a single design
                const double d_c = sigma2 * d_hull / (sigma2 - d_hull);
                return make_row(fam, rate, d_c, 0.0, sigma2, true);
            }
            return make_row(fam, rate, d_hull, resid, sigma2, true);
        }
    }
    throw std::logic_error("sweep_point: unknown family");
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::ConventionalDither: return "conventional-dither";
        case Family::Randomized: return "randomized";
        case Family::ConstrainedRandomized: return "constrained-randomized";
        case Family::ConstrainedDeterministic: return "constrained-deterministic";
        case Family::OptimalDeterministic: return "optimal-deterministic";
    }
    throw std::logic_error("family_name: unknown family");
}

Family family_from_name(const std::string& name) {
    for (Family f : {Family::ConventionalDither, Family::Randomized,
                     Family::ConstrainedRandomized, Family::ConstrainedDeterministic,
                     Family::OptimalDeterministic})
        if (family_name(f) == name) return f;
    throw std::invalid_argument("unknown family: " + name);
}

namespace {

// Rescale a design's compressor so the variable rate hits `rate_bits`
// exactly (the rate is increasing in the output scale), recompute the
// optimal expander and the reported metrics at the new operating point.
RandomizedDesign rescale_to_rate(const RandomizedDesign& d, const SourceModel& src,
                                 double rate_bits) {
    auto scaled = [&](double s) {
        ScalarGrid g = d.compressor.grid();
        for (double& v : g.values) v *= s;
        // increments at the monotonicity floor can collapse under rounding
        return MonotoneMap(project_monotone(std::move(g), 0.0));
    };
    auto rate_of = [&](double s) {
        return variable_rate(scaled(s), src, d.delta);
    };
    double lo = 1.0, hi = 1.0;
    if (d.rate_bits < rate_bits)
        while (rate_of(hi) < rate_bits && hi < 1e6) hi *= 2.0;
    else
        while (rate_of(lo) > rate_bits && lo > 1e-6) lo *= 0.5;
    for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        if (rate_of(mid) < rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    const double s = std::sqrt(lo * hi);

    RandomizedDesign out = d;
    out.compressor = scaled(s);
    out.expander = optimal_expander(out.compressor, src, d.delta, d.mode);
    const CompanderQuadrature quad(src, d.delta, d.mode, out.compressor, 128, 4);
    const auto ev = quad.total(out.compressor, out.expander);
    out.distortion = ev.granular + ev.overload;
    out.rate_bits = variable_rate(out.compressor, src, d.delta);
    out.lagrangian_cost = out.distortion + d.mode.lambda * out.rate_bits;
    out.ortho_residual = src.variance() - ev.cross;
    out.expander_scale = 1.0;
    return out;
}

}  // namespace

RandomizedDesign design_randomized_at_rate(const SourceModel& source,
                                           double rate_bits,
                                           const DesignConfig& config) {
    const double sigma2 = source.variance();
    double lambda = 2.0 * std::log(2.0) * sigma2 * std::exp2(-2.0 * rate_bits);

    DesignConfig cfg = config;
    if (cfg.schedule.empty()) cfg.schedule = {lambda / 16.0, lambda / 4.0};
    RandomizedDesign d = design_unconstrained(source, CompanderMode::variable(lambda), cfg);

    // Lagrangian designs track the lower convex hull, which skips the
    // target rate when the operational curve is nonconvex (low rates: the
    // optimum jumps from a positive-rate branch straight to zero rate).
    // Bisect lambda while it helps, keeping the nearest non-degenerate
    // designs on either side; finish by rescaling onto the exact rate.
    auto usable = [](const RandomizedDesign& r) { return r.rate_bits > 0.05; };
    RandomizedDesign lo_side = d, hi_side = d;  // rate below / above target
    bool have_lo = usable(d) && d.rate_bits <= rate_bits;
    bool have_hi = usable(d) && d.rate_bits > rate_bits;
    auto note = [&](const RandomizedDesign& r) {
        if (!usable(r)) return;
        if (r.rate_bits <= rate_bits &&
            (!have_lo || r.rate_bits > lo_side.rate_bits)) {
            lo_side = r;
            have_lo = true;
        }
        if (r.rate_bits > rate_bits &&
            (!have_hi || r.rate_bits < hi_side.rate_bits)) {
            hi_side = r;
            have_hi = true;
        }
    };
    double l_lo = lambda, l_hi = lambda;  // small lambda: rate too high side
    RandomizedDesign cur = d;
    for (int t = 0; t < 8 && !have_lo; ++t) {
        l_hi *= 2.0;
        cur = design_unconstrained(source, CompanderMode::variable(l_hi), cfg,
                                   cur.compressor);
        note(cur);
    }
    cur = d;
    for (int t = 0; t < 20 && !have_hi; ++t) {
        l_lo *= 0.5;
        cur = design_unconstrained(source, CompanderMode::variable(l_lo), cfg,
                                   cur.compressor);
        note(cur);
    }
    for (int it = 0; it < 12; ++it) {
        if (have_lo && rate_bits - lo_side.rate_bits <= 0.05) break;
        if (have_hi && hi_side.rate_bits - rate_bits <= 0.05) break;
        const double mid = std::sqrt(l_lo * l_hi);
        const MonotoneMap& warm =
            have_hi && (!have_lo || hi_side.rate_bits - rate_bits <
                                        rate_bits - lo_side.rate_bits)
                ? hi_side.compressor
                : (have_lo ? lo_side.compressor : d.compressor);
        RandomizedDesign dm =
            design_unconstrained(source, CompanderMode::variable(mid), cfg, warm);
        note(dm);
        if (dm.rate_bits > rate_bits)
            l_lo = mid;
        else
            l_hi = mid;
    }

    RandomizedDesign best;
    bool any = false;
    for (const RandomizedDesign* side : {have_lo ? &lo_side : nullptr,
                                         have_hi ? &hi_side : nullptr}) {
        if (!side) continue;
        RandomizedDesign r = rescale_to_rate(*side, source, rate_bits);
        if (!any || r.distortion < best.distortion) {
            best = std::move(r);
            any = true;
        }
    }
    return any ? best : d;
}

CellQuantizer ecsq_at_rate(const SourceModel& source, double rate_bits,
                           int M_init, std::uint64_t seed) {
    double lo = 1e-7, hi = 4.0 * source.variance();
    CellQuantizer best = ecsq(source, lo, M_init, seed);
    for (int it = 0; it < 60; ++it) {
        const double mid = std::sqrt(lo * hi);
        CellQuantizer q = ecsq(source, mid, M_init, seed);
        const double r = q.entropy_bits();
        if (std::abs(r - rate_bits) < std::abs(best.entropy_bits() - rate_bits))
            best = std::move(q);
        if (std::abs(best.entropy_bits() - rate_bits) <= 0.01) break;
        if (r > rate_bits)
            lo = mid;
        else
            hi = mid;
    }
    return best;
}

double conventional_best_delta(const SourceModel& source, int t_max) {
    const double reach = std::max(-source.x_min(), source.x_max());
    double a = 0.05 * reach / t_max, b = 2.5 * reach / t_max;
    auto dist = [&](double delta) {
        return conventional_distortion({delta, t_max}, source);
    };
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = dist(c), fd = dist(d);
    for (int it = 0; it < 80; ++it) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = dist(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = dist(d);
        }
    }
    return 0.5 * (a + b);
}

std::vector<ResultRow> snr_sweep(const SweepSpec& spec, const SourceModel& source) {
    if (spec.rate_points.empty() || spec.families.empty())
        throw std::invalid_argument("snr_sweep: empty rate points or families");
    std::vector<std::future<ResultRow>> jobs;
    for (Family fam : spec.families)
        for (double rate : spec.rate_points)
            jobs.push_back(std::async(std::launch::async, [&, fam, rate] {
                try {
                    return sweep_point(spec, source, fam, rate);
                } catch (const std::exception&) {
                    ResultRow row;
                    row.family = fam;
                    row.rate_bits = rate;
                    row.distortion = source.variance();
                    row.snr_db = 0.0;
                    row.converged = false;
                    return row;
                }
            }));
    std::vector<ResultRow> rows;
    rows.reserve(jobs.size());
    for (auto& j : jobs) rows.push_back(j.get());
    std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
        if (a.family != b.family) return a.family < b.family;
        return a.rate_bits < b.rate_bits;
    });
    return rows;
}

double correlation_experiment(const BivariateGaussianSpec& spec, Family family,
                              RateMode rate_mode, double rate_target,
                              int n_samples, std::uint64_t seed,
                              const DesignConfig& config) {
    SourceModel marginal = make_truncated_gaussian(spec.variance, spec.truncation);
    const bool fixed = rate_mode == RateMode::Fixed;
    const int t_max =
        std::max(1, static_cast<int>(std::lround((std::exp2(rate_target) - 1.0) / 2.0)));
    const int m_cells = std::max(1, static_cast<int>(std::lround(std::exp2(rate_target))));

    const auto pairs = sample_bivariate(spec, n_samples, seed);
    std::vector<double> e1(n_samples), e2(n_samples);

    auto run_randomized = [&](const RandomizedDesign& d) {
        Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
        for (int i = 0; i < n_samples; ++i) {
            const double z1 = rng.uniform(-0.5 * d.delta, 0.5 * d.delta);
            const double z2 = rng.uniform(-0.5 * d.delta, 0.5 * d.delta);
            e1[i] = pairs[i].first - randomized_reconstruct(d, pairs[i].first, z1);
            e2[i] = pairs[i].second - randomized_reconstruct(d, pairs[i].second, z2);
        }
    };

    switch (family) {
        case Family::ConventionalDither: {
            const double delta = fixed ? conventional_no_overload_delta(marginal, t_max)
                                       : conventional_delta_at_rate(marginal, rate_target);
            const UniformQuantizerSpec uspec{
                delta, fixed ? std::optional<int>(t_max) : std::nullopt};
            Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
            for (int i = 0; i < n_samples; ++i) {
                const double z1 = rng.uniform(-0.5 * delta, 0.5 * delta);
                const double z2 = rng.uniform(-0.5 * delta, 0.5 * delta);
                e1[i] = pairs[i].first - dithered_reconstruct(pairs[i].first, {z1}, uspec);
                e2[i] = pairs[i].second - dithered_reconstruct(pairs[i].second, {z2}, uspec);
            }
            break;
        }
        case Family::Randomized:
        case Family::ConstrainedRandomized: {
            RandomizedDesign d =
                fixed ? design_unconstrained(marginal, CompanderMode::fixed(t_max), config)
                      : design_randomized_at_rate(marginal, rate_target, config);
            if (family == Family::ConstrainedRandomized)
                d = constrain_randomized(d, marginal);
            run_randomized(d);
            break;
        }
        case Family::ConstrainedDeterministic:
        case Family::OptimalDeterministic: {
            CellQuantizer q = fixed ? lloyd_max(marginal, m_cells, config.seed)
                                    : ecsq_at_rate(marginal, rate_target, 64, config.seed);
            if (family == Family::ConstrainedDeterministic)
                q = constrain_deterministic(q, marginal).first;
            for (int i = 0; i < n_samples; ++i) {
                e1[i] = pairs[i].first - q.quantize(pairs[i].first);
                e2[i] = pairs[i].second - q.quantize(pairs[i].second);
            }
            break;
        }
    }
    return pearson(e1, e2);
}

WhitenessReport whiteness_randomized(const RandomizedDesign& design,
                                     const SourceModel& source, int n_samples,
                                     std::uint64_t seed) {
    const std::vector<double> xs = sample(source, n_samples, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<double> errs(n_samples);
    for (int i = 0; i < n_samples; ++i) {
        const double z = rng.uniform(-0.5 * design.delta, 0.5 * design.delta);
        errs[i] = xs[i] - randomized_reconstruct(design, xs[i], z);
    }
    return report_from_streams(xs, errs);
}

WhitenessReport whiteness_deterministic(const CellQuantizer& q,
                                        const SourceModel& source, int n_samples,
                                        std::uint64_t seed) {
    const std::vector<double> xs = sample(source, n_samples, seed);
    std::vector<double> errs(n_samples);
    for (int i = 0; i < n_samples; ++i) errs[i] = xs[i] - q.quantize(xs[i]);
    return report_from_streams(xs, errs);
}

double simulate_randomized_distortion(const RandomizedDesign& design,
                                      const SourceModel& source, int n_samples,
                                      std::uint64_t seed) {
    const std::vector<double> xs = sample(source, n_samples, seed);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    double acc = 0.0;
    for (int i = 0; i < n_samples; ++i) {
        const double z = rng.uniform(-0.5 * design.delta, 0.5 * design.delta);
        const double e = xs[i] - randomized_reconstruct(design, xs[i], z);
        acc += e * e;
    }
    return acc / n_samples;
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_results_csv: cannot open " + path);
    out << "family,rate_bits,distortion,snr_db,ortho_residual,err_src_corr,converged\n";
    char buf[64];
    auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        return std::string(buf);
    };
    for (const ResultRow& r : rows)
        out << family_name(r.family) << "," << fmt(r.rate_bits) << ","
            << fmt(r.distortion) << "," << fmt(r.snr_db) << ","
            << fmt(r.ortho_residual) << "," << fmt(r.err_src_corr) << ","
            << (r.converged ? 1 : 0) << "\n";
}

}  // namespace quant
