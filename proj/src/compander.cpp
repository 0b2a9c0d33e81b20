#include "quant/compander.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "quant/rng.hpp"

namespace quant {

namespace {

double half_support(const SourceModel& src) {
    return std::max(-src.x_min(), src.x_max());
}

// The entropy integrand -f_Y log f_Y has derivative kinks exactly where a
// dither-window end meets an edge of the compressor range (the source is
// hard-truncated, so its density does not vanish there). Splitting the
// integral at those four ordinates keeps each panel's integrand smooth in
// the compressor's node values.
std::array<double, 4> rate_panels(const MonotoneMap& g, double delta) {
    const double lo = g.y_min(), hi = g.y_max();
    return {lo - 0.5 * delta, std::min(lo + 0.5 * delta, hi - 0.5 * delta),
            std::max(lo + 0.5 * delta, hi - 0.5 * delta), hi + 0.5 * delta};
}

}  // namespace

// ---- CompanderQuadrature ---------------------------------------------

CompanderQuadrature::CompanderQuadrature(const SourceModel& source, double delta,
                                         CompanderMode mode, const MonotoneMap& g_ref,
                                         int quad_nodes, int gauss_per_segment,
                                         double penalty_lambda_c)
    : src_(&source), delta_(delta), mode_(mode), penalty_(penalty_lambda_c) {
    if (!(delta > 0.0)) throw std::invalid_argument("CompanderQuadrature: delta must be > 0");
    if (quad_nodes < 8) throw std::invalid_argument("CompanderQuadrature: quad_nodes must be >= 8");

    const GaussRule dith = gauss_legendre(quad_nodes);
    dn_.resize(quad_nodes);
    dw_.resize(quad_nodes);
    for (int k = 0; k < quad_nodes; ++k) {
        dn_[k] = 0.5 * delta * dith.nodes[k];
        dw_[k] = 0.5 * dith.weights[k];  // sums to 1: the 1/delta average
    }
    const GaussRule seg = gauss_legendre(gauss_per_segment);
    gn_.resize(gauss_per_segment);
    gw_.resize(gauss_per_segment);
    for (int j = 0; j < gauss_per_segment; ++j) {
        gn_[j] = 0.5 * (seg.nodes[j] + 1.0);
        gw_[j] = 0.5 * seg.weights[j];
    }

    y_h_ = g_ref.grid().h() / 4.0;
    const auto b = rate_panels(g_ref, delta_);
    for (int p = 0; p < 3; ++p) {
        const double len = std::max(b[p + 1] - b[p], 0.0);
        cnt_[p] = std::max(2, static_cast<int>(std::ceil(len / y_h_)) + 1);
    }
}

bool CompanderQuadrature::covers(const MonotoneMap& g) const {
    if (mode_.is_fixed()) return true;  // no rate term in use
    const auto b = rate_panels(g, delta_);
    for (int p = 0; p < 3; ++p)
        if ((b[p + 1] - b[p]) / (cnt_[p] - 1) > 2.0 * y_h_) return false;
    return true;
}

double CompanderQuadrature::output_density_at(const MonotoneMap& g, double y) const {
    const double xp = g.inverse(y + 0.5 * delta_);
    const double xm = g.inverse(y - 0.5 * delta_);
    return (src_->cdf_at(xp) - src_->cdf_at(xm)) / delta_;
}

double CompanderQuadrature::rate_term(const MonotoneMap& g, double win_lo,
                                      double win_hi) const {
    const auto b = rate_panels(g, delta_);
    double acc = 0.0;
    for (int p = 0; p < 3; ++p) {
        const double len = b[p + 1] - b[p];
        if (!(len > 0.0) || b[p + 1] < win_lo || b[p] > win_hi) continue;
        const int m = cnt_[p];
        const double h = len / (m - 1);
        for (int i = 0; i < m; ++i) {
            const double y = b[p] + i * h;
            if (y < win_lo || y > win_hi) continue;
            const double fy = output_density_at(g, y);
            if (fy <= 0.0) continue;
            const double wgt = (i == 0 || i == m - 1) ? 0.5 : 1.0;
            acc += wgt * h * (-fy * std::log2(fy));
        }
    }
    return acc;
}

CompanderQuadrature::Pieces CompanderQuadrature::segments(const MonotoneMap& g,
                                                          const ScalarGrid& w,
                                                          int s_first, int s_last,
                                                          bool with_overload) const {
    Pieces p{0.0, 0.0, 0.0, 0.0};
    const ScalarGrid& pdf = src_->pdf();
    double gamma_m = src_->x_min(), gamma_p = src_->x_max();
    if (mode_.is_fixed()) {
        gamma_m = g.inverse(-mode_.t_max * delta_);
        gamma_p = g.inverse(mode_.t_max * delta_);
    }
    const int nq = static_cast<int>(dn_.size());
    for (int s = s_first; s <= s_last; ++s) {
        const double xa = std::max(g.grid().x(s), gamma_m);
        const double xb = std::min(g.grid().x(s + 1), gamma_p);
        if (xb <= xa) continue;
        const double len = xb - xa;
        for (size_t j = 0; j < gn_.size(); ++j) {
            const double x = xa + gn_[j] * len;
            const double fx = pdf(x);
            if (fx <= 0.0) continue;
            const double wx = gw_[j] * len * fx;
            const double gx = g(x);
            for (int k = 0; k < nq; ++k) {
                const double wv = hermite_eval(w, gx + dn_[k]);
                const double e = x - wv;
                p.granular += wx * dw_[k] * e * e;
                p.cross_granular += wx * dw_[k] * x * wv;
            }
        }
    }
    if (with_overload && mode_.is_fixed()) {
        const PdfMoments& mom = src_->moments();
        const double td = mode_.t_max * delta_;
        if (gamma_m > src_->x_min()) {
            const double m0 = mom.mass(src_->x_min(), gamma_m);
            const double m1 = mom.first(src_->x_min(), gamma_m);
            const double m2 = mom.second(src_->x_min(), gamma_m);
            for (int k = 0; k < static_cast<int>(dn_.size()); ++k) {
                const double wv = hermite_eval(w, -td + dn_[k]);
                p.overload += dw_[k] * (m2 - 2.0 * wv * m1 + wv * wv * m0);
                p.cross_overload += dw_[k] * wv * m1;
            }
        }
        if (gamma_p < src_->x_max()) {
            const double m0 = mom.mass(gamma_p, src_->x_max());
            const double m1 = mom.first(gamma_p, src_->x_max());
            const double m2 = mom.second(gamma_p, src_->x_max());
            for (int k = 0; k < static_cast<int>(dn_.size()); ++k) {
                const double wv = hermite_eval(w, td + dn_[k]);
                p.overload += dw_[k] * (m2 - 2.0 * wv * m1 + wv * wv * m0);
                p.cross_overload += dw_[k] * wv * m1;
            }
        }
    }
    return p;
}

CompanderQuadrature::Eval CompanderQuadrature::total(const MonotoneMap& g,
                                                     const ScalarGrid& w) const {
    Eval ev;
    const Pieces p = segments(g, w, 0, g.n() - 2, true);
    ev.granular = p.granular;
    ev.overload = p.overload;
    ev.cross = p.cross_granular + p.cross_overload;
    ev.cost = ev.granular + ev.overload;
    if (!mode_.is_fixed()) {
        ev.rate = rate_term(g, -HUGE_VAL, HUGE_VAL) - std::log2(delta_);
        ev.cost += mode_.lambda * ev.rate;
    }
    if (penalty_ != 0.0) ev.cost += penalty_ * (src_->variance() - ev.cross);
    return ev;
}

double CompanderQuadrature::local_cost(const MonotoneMap& g, const ScalarGrid& w,
                                       int node, double win_lo, double win_hi) const {
    // Hermite slopes couple each node to its neighbors, so a bump at
    // `node` reaches segments node-2 .. node+1
    const int s_first = std::max(node - 2, 0);
    const int s_last = std::min(node + 1, g.n() - 2);
    const Pieces p = segments(g, w, s_first, s_last, true);
    double c = p.granular + p.overload;
    if (penalty_ != 0.0) c -= penalty_ * (p.cross_granular + p.cross_overload);
    if (!mode_.is_fixed()) c += mode_.lambda * rate_term(g, win_lo, win_hi);
    return c;
}

std::vector<double> CompanderQuadrature::gradient(const MonotoneMap& g,
                                                  const ScalarGrid& w,
                                                  double fd_eps) const {
    const int n = g.n();
    std::vector<double> grad(n, 0.0);
    MonotoneMap work = g;
    const auto& gv = g.grid().values;
    for (int k = 0; k < n; ++k) {
        const double inc_l = (k > 0) ? gv[k] - gv[k - 1] : 1e300;
        const double inc_r = (k + 1 < n) ? gv[k + 1] - gv[k] : 1e300;
        const double eps = std::min(fd_eps, 0.45 * std::min(inc_l, inc_r));
        if (!(eps > 0.0)) continue;

        // f_Y changes where y -+ delta/2 falls in the span the bump can
        // reach; the entropy node positions themselves only depend on the
        // two end values, so probes of the end region recompute everything
        double win_lo = -HUGE_VAL, win_hi = HUGE_VAL;
        if (!mode_.is_fixed() && k >= 2 && k <= n - 3) {
            win_lo = gv[k - 2] - 0.5 * delta_;
            win_hi = gv[k + 2] + 0.5 * delta_;
        }
        const double save = gv[k];
        work.set_value(k, save + eps);
        const double jp = local_cost(work, w, k, win_lo, win_hi);
        work.set_value(k, save - eps);
        const double jm = local_cost(work, w, k, win_lo, win_hi);
        work.set_value(k, save);
        grad[k] = (jp - jm) / (2.0 * eps);
    }
    return grad;
}

// ---- Eq.-level operations --------------------------------------------

ScalarGrid optimal_expander(const MonotoneMap& g, const SourceModel& source,
                            double delta, const CompanderMode& mode) {
    if (!(delta > 0.0)) throw std::invalid_argument("optimal_expander: delta must be > 0");
    double lo = g.y_min(), hi = g.y_max();
    if (mode.is_fixed()) {
        lo = std::min(lo, -mode.t_max * delta);
        hi = std::max(hi, mode.t_max * delta);
    }
    lo -= 0.5 * delta;
    hi += 0.5 * delta;
    const double hy = g.grid().h() / 4.0;
    const int n = std::max(3, static_cast<int>(std::lround((hi - lo) / hy)) + 1);
    const PdfMoments& mom = source.moments();
    const double td = mode.t_max * delta;
    return make_grid(lo, hi, n, [&](double y) {
        // fixed rate: y in the outer dither band is also produced by every
        // saturated input, so the conditioning window absorbs the full tail
        double a = (mode.is_fixed() && y - 0.5 * delta <= -td)
                       ? source.x_min()
                       : g.inverse(y - 0.5 * delta);
        double b = (mode.is_fixed() && y + 0.5 * delta >= td)
                       ? source.x_max()
                       : g.inverse(y + 0.5 * delta);
        if (b < a) std::swap(a, b);
        const double den = mom.mass(a, b);
        if (den <= 1e-14) return 0.5 * (a + b);
        return mom.first(a, b) / den;
    });
}

double granular_distortion(const MonotoneMap& g, const ScalarGrid& w,
                           const SourceModel& source, double delta,
                           std::optional<int> t_max) {
    const CompanderMode mode = t_max ? CompanderMode::fixed(*t_max)
                                     : CompanderMode::variable(0.0);
    const CompanderQuadrature quad(source, delta, mode, g, 16, 4);
    return quad.total(g, w).granular;
}

double overload_distortion(const MonotoneMap& g, const ScalarGrid& w,
                           const SourceModel& source, double delta, int t_max) {
    const CompanderQuadrature quad(source, delta, CompanderMode::fixed(t_max), g, 16, 4);
    return quad.total(g, w).overload;
}

ScalarGrid output_density(const MonotoneMap& g, const SourceModel& source,
                          double delta) {
    if (!(delta > 0.0)) throw std::invalid_argument("output_density: delta must be > 0");
    const double lo = g.y_min() - 0.5 * delta;
    const double hi = g.y_max() + 0.5 * delta;
    const double hy = g.grid().h() / 4.0;
    const int n = std::max(3, static_cast<int>(std::lround((hi - lo) / hy)) + 1);
    return make_grid(lo, hi, n, [&](double y) {
        const double xp = g.inverse(y + 0.5 * delta);
        const double xm = g.inverse(y - 0.5 * delta);
        return (source.cdf_at(xp) - source.cdf_at(xm)) / delta;
    });
}

double variable_rate(const MonotoneMap& g, const SourceModel& source, double delta) {
    return differential_entropy(output_density(g, source, delta)) - std::log2(delta);
}

double total_cost(const RandomizedDesign& design, const SourceModel& source) {
    const CompanderQuadrature quad(source, design.delta, design.mode,
                                   design.compressor, 128, 4);
    const auto ev = quad.total(design.compressor, design.expander);
    if (design.mode.is_fixed()) return ev.granular + ev.overload;
    return ev.granular + design.mode.lambda * ev.rate;
}

std::vector<double> compressor_gradient(const MonotoneMap& g, const ScalarGrid& w,
                                        const SourceModel& source, double delta,
                                        const CompanderMode& mode) {
    const CompanderQuadrature quad(source, delta, mode, g, 16, 4);
    return quad.gradient(g, w, 1e-6);
}

DescendResult descend(const MonotoneMap& g, const ScalarGrid& w,
                      const CompanderQuadrature& quad,
                      const std::vector<double>& grad, double mu) {
    if (grad.size() != static_cast<size_t>(g.n()))
        throw std::invalid_argument("descend: gradient length mismatch");
    DescendResult res;
    res.cost_before = quad.cost(g, w);
    const double eps = mono_floor(g.y_max() - g.y_min(), g.n());
    for (int t = 0; t <= 20; ++t) {
        const double step = mu * std::pow(0.5, t);
        ScalarGrid cand = g.grid();
        for (int i = 0; i < g.n(); ++i) cand.values[i] -= step * grad[i];
        MonotoneMap gc(project_monotone(std::move(cand), eps));
        const double cost = quad.cost(gc, w);
        if (cost <= res.cost_before) {
            res.g = std::move(gc);
            res.cost_after = cost;
            res.used_step = step;
            res.accepted = step > 0.0;
            return res;
        }
        if (step == 0.0) break;
    }
    res.g = g;
    res.cost_after = res.cost_before;
    res.used_step = 0.0;
    res.accepted = false;
    return res;
}

namespace {

MonotoneMap initial_compressor(const SourceModel& src, double delta,
                               const CompanderMode& first_stage,
                               const DesignConfig& cfg) {
    const double hw = half_support(src);
    double slope;
    if (first_stage.is_fixed())
        slope = 0.9 * first_stage.t_max * delta / hw;
    else
        slope = 0.25 * delta / hw;
    Rng rng(cfg.seed);
    const int n = std::max(9, cfg.design_points);
    std::vector<double> v(n);
    const double amp = cfg.init_noise * slope * 2.0 * hw;
    const double h = (src.x_max() - src.x_min()) / (n - 1);
    for (int i = 0; i < n; ++i)
        v[i] = slope * (src.x_min() + i * h) + amp * rng.uniform(-1.0, 1.0);
    // one smoothing pass keeps the random start from aliasing the grid
    std::vector<double> sm(v);
    for (int i = 1; i + 1 < n; ++i) sm[i] = (v[i - 1] + v[i] + v[i + 1]) / 3.0;
    ScalarGrid grid(src.x_min(), src.x_max(), std::move(sm));
    return MonotoneMap(project_monotone(std::move(grid),
                                        mono_floor(slope * 2.0 * hw, n)));
}

struct StageResult {
    MonotoneMap g;
    ScalarGrid w;
    bool converged = false;
};

// The pointwise gradient adjusts the compressor's overall output scale
// (and with it the rate) only through many tiny steps, so the descent can
// sit on the wrong rate branch indefinitely. A line-search over a global
// rescale s*g jumps across branches directly; the cost is evaluated with
// the matching optimal expander so the move is always admissible.
MonotoneMap scale_search(const SourceModel& src, double delta, const CompanderMode& mode,
                         const DesignConfig& cfg, double lambda_c, double kappa,
                         MonotoneMap g, double cur_cost, bool* changed) {
    auto scaled = [&](double s) {
        ScalarGrid gs = g.grid();
        for (double& v : gs.values) v *= s;
        // increments at the monotonicity floor can collapse under rounding
        return MonotoneMap(project_monotone(std::move(gs), 0.0));
    };
    auto eval = [&](const MonotoneMap& gg) {
        const CompanderQuadrature q(src, delta, mode, gg, cfg.quad_nodes_n,
                                    cfg.gauss_per_segment, lambda_c);
        ScalarGrid w = optimal_expander(gg, src, delta, mode);
        if (kappa != 1.0)
            for (double& v : w.values) v *= kappa;
        return q.cost(gg, w);
    };
    // coarse log-spaced scan (the cost is multimodal in s), then golden
    // refinement around the best sample
    double best_s = 1.0, best_c = cur_cost;
    const int coarse = 25;
    for (int i = 0; i < coarse; ++i) {
        const double s = std::exp(std::log(1.0 / 3.0) +
                                  (std::log(3.0) - std::log(1.0 / 3.0)) * i / (coarse - 1));
        const double c = eval(scaled(s));
        if (c < best_c) {
            best_c = c;
            best_s = s;
        }
    }
    const double ratio = std::pow(3.0, 2.0 / (coarse - 1));
    double lo = std::log(best_s / ratio), hi = std::log(best_s * ratio);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = hi - gr * (hi - lo), b = lo + gr * (hi - lo);
    double fa = eval(scaled(std::exp(a))), fb = eval(scaled(std::exp(b)));
    for (int it = 0; it < 24; ++it) {
        if (fa < fb) {
            hi = b;
            b = a;
            fb = fa;
            a = hi - gr * (hi - lo);
            fa = eval(scaled(std::exp(a)));
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + gr * (hi - lo);
            fb = eval(scaled(std::exp(b)));
        }
    }
    const double s_ref = std::exp(fa < fb ? a : b);
    const double c_ref = std::min(fa, fb);
    if (c_ref < best_c) {
        best_c = c_ref;
        best_s = s_ref;
    }
    // sub-tolerance gains are noise: accepting them resets the convergence
    // window and the stage never terminates
    *changed = best_c < cur_cost - 1e-6 * std::max(std::abs(cur_cost), 1.0) &&
               best_s != 1.0;
    return *changed ? scaled(best_s) : g;
}

StageResult run_stage(const SourceModel& src, double delta, const CompanderMode& mode,
                      const DesignConfig& cfg, double lambda_c, MonotoneMap g,
                      std::vector<double>* trace) {
    const double kappa = 1.0 + 0.5 * lambda_c;
    auto expander = [&](const MonotoneMap& gg) {
        ScalarGrid w = optimal_expander(gg, src, delta, mode);
        if (kappa != 1.0)
            for (double& v : w.values) v *= kappa;
        return w;
    };

    CompanderQuadrature quad(src, delta, mode, g, cfg.quad_nodes_n,
                             cfg.gauss_per_segment, lambda_c);
    ScalarGrid w = expander(g);
    double cost = quad.cost(g, w);
    if (trace) trace->push_back(cost);

    double mu = cfg.step_size;
    bool converged = false;
    std::vector<double> recent{cost};  // costs on the current quadrature grid
    auto try_rescale = [&]() {
        bool changed = false;
        g = scale_search(src, delta, mode, cfg, lambda_c, kappa, std::move(g),
                         cost, &changed);
        if (changed) {
            quad = CompanderQuadrature(src, delta, mode, g, cfg.quad_nodes_n,
                                       cfg.gauss_per_segment, lambda_c);
            w = expander(g);
            cost = quad.cost(g, w);
            recent.assign(1, cost);
            mu = cfg.step_size;  // fresh point, fresh line search
        }
        return changed;
    };
    if (!mode.is_fixed()) try_rescale();
    for (int it = 0; it < cfg.max_iters; ++it) {
        if (!mode.is_fixed() && it > 0 && it % 60 == 0) try_rescale();
        const auto grad = quad.gradient(g, w, cfg.fd_epsilon);
        DescendResult st = descend(g, w, quad, grad, mu);
        g = std::move(st.g);
        const bool floored = !st.accepted && mu <= 1e-12;
        mu = st.accepted ? std::min(st.used_step * 2.0, 1e8) : mu * 0.25;
        mu = std::max(mu, 1e-12);
        if (floored) {  // no step of any size helps: this is the fixed point
            if (mode.is_fixed() || !try_rescale()) {
                converged = true;
                break;
            }
            continue;
        }
        w = expander(g);
        if (!quad.covers(g)) {
            quad = CompanderQuadrature(src, delta, mode, g, cfg.quad_nodes_n,
                                       cfg.gauss_per_segment, lambda_c);
            cost = quad.cost(g, w);  // re-baseline on the new grid
            recent.assign(1, cost);
            if (trace && !trace->empty()) trace->back() = std::min(trace->back(), cost);
        }
        const double next = quad.cost(g, w);
        if (trace) trace->push_back(next);
        recent.push_back(next);
        cost = next;
        // windowed detector: the expander/compressor alternation oscillates
        // at the last digit, so test the mean decrease over the window
        const int win = cfg.tol_window;
        if (static_cast<int>(recent.size()) > win) {
            const double first = recent[recent.size() - 1 - win];
            const double rel = std::abs(first - next) /
                               (win * std::max(std::abs(next), 1e-300));
            if (rel < cfg.cost_tol) {
                // confirm the stall is not just a sticky rate branch
                if (!mode.is_fixed() && try_rescale()) continue;
                converged = true;
                break;
            }
        }
    }
    return {std::move(g), std::move(w), converged};
}

RandomizedDesign run_design(const SourceModel& src, const CompanderMode& target,
                            const DesignConfig& cfg, double lambda_c,
                            const MonotoneMap* warm, std::vector<double>* trace) {
    const double delta = 1.0;  // the compressor's output scale absorbs delta
    std::vector<CompanderMode> stages;
    if (target.is_fixed()) {
        for (double t : cfg.schedule) {
            const int ti = static_cast<int>(std::lround(t));
            if (ti >= 1 && ti < target.t_max) stages.push_back(CompanderMode::fixed(ti));
        }
        stages.push_back(target);
    } else {
        for (double l : cfg.schedule)
            if (l > target.lambda) stages.push_back(CompanderMode::variable(l));
        stages.push_back(target);
    }

    MonotoneMap g = warm ? *warm : initial_compressor(src, delta, stages.front(), cfg);
    StageResult sr;
    sr.g = g;
    for (size_t i = 0; i < stages.size(); ++i) {
        sr = run_stage(src, delta, stages[i], cfg, lambda_c, std::move(sr.g), trace);
        // a relaxation stage whose lambda favors zero rate flattens the
        // compressor, and the flat map is a fixed point of the alternation
        // (the expander goes constant, killing the distortion gradient);
        // restart the next stage from scratch instead of inheriting that
        if (i + 1 < stages.size() && !stages[i].is_fixed() &&
            sr.g.y_max() - sr.g.y_min() < 0.05 * delta)
            sr.g = initial_compressor(src, delta, stages[i + 1], cfg);
    }

    RandomizedDesign d;
    d.compressor = std::move(sr.g);
    d.expander = std::move(sr.w);
    d.delta = delta;
    d.mode = target;
    d.seed = cfg.seed;
    d.converged = sr.converged;
    // the design loop runs on a cheap dither rule; reported metrics use a
    // converged one (the 16-node rule is ~3% low on sharp expanders)
    const CompanderQuadrature quad(src, delta, target, d.compressor,
                                   std::max(cfg.quad_nodes_n, 128),
                                   cfg.gauss_per_segment);
    const auto ev = quad.total(d.compressor, d.expander);
    d.distortion = ev.granular + ev.overload;
    d.rate_bits = target.is_fixed() ? std::log2(2.0 * target.t_max + 1.0)
                                    : variable_rate(d.compressor, src, delta);
    d.lagrangian_cost = target.is_fixed() ? d.distortion
                                          : d.distortion + target.lambda * d.rate_bits;
    d.ortho_residual = src.variance() - ev.cross;
    return d;
}

}  // namespace

RandomizedDesign design_unconstrained(const SourceModel& source,
                                      const CompanderMode& target,
                                      const DesignConfig& config,
                                      std::vector<double>* cost_trace) {
    return run_design(source, target, config, 0.0, nullptr, cost_trace);
}

RandomizedDesign design_unconstrained(const SourceModel& source,
                                      const CompanderMode& target,
                                      const DesignConfig& config,
                                      const MonotoneMap& warm_start) {
    DesignConfig cfg = config;
    cfg.schedule.clear();
    return run_design(source, target, cfg, 0.0, &warm_start, nullptr);
}

RandomizedDesign constrain_randomized(const RandomizedDesign& design,
                                      const SourceModel& source) {
    const CompanderQuadrature quad(source, design.delta, design.mode,
                                   design.compressor, 128, 4);
    const auto ev = quad.total(design.compressor, design.expander);
    const double sigma2 = source.variance();
    if (std::abs(ev.cross) < 1e-12 * std::max(sigma2, 1.0))
        throw std::domain_error("constrain_randomized: E[X Xhat] is zero, constraint infeasible");
    const double s = sigma2 / ev.cross;

    RandomizedDesign out = design;
    for (double& v : out.expander.values) v *= s;
    out.expander_scale = design.expander_scale * s;
    const auto ev2 = quad.total(out.compressor, out.expander);
    out.distortion = ev2.granular + ev2.overload;
    out.ortho_residual = sigma2 - ev2.cross;
    out.lagrangian_cost = design.mode.is_fixed()
                              ? out.distortion
                              : out.distortion + design.mode.lambda * out.rate_bits;
    return out;
}

RandomizedDesign design_constrained_direct(const SourceModel& source,
                                           const CompanderMode& target,
                                           const DesignConfig& config,
                                           double* lambda_c_out,
                                           const RandomizedDesign* warm_start) {
    const double sigma2 = source.variance();

    DesignConfig refine = config;
    refine.schedule.clear();  // warm-started single-stage runs

    auto residual_of = [&](double lc, const MonotoneMap& warm, RandomizedDesign* out) {
        RandomizedDesign d = run_design(source, target, refine, lc, &warm, nullptr);
        if (out) *out = d;
        return d.ortho_residual;
    };

    // The penalized cost at weight lambda has the effective rate weight
    // lambda/kappa^2, so for variable-rate targets the lambda_c = 0 base run
    // may sit in a different basin (or collapse outright when lambda alone
    // favors zero rate). With a warm start we instead open at the predicted
    // multiplier lambda_c = 2(s-1), which keeps the search in the caller's
    // basin; without one, the base run supplies both basin and estimate.
    RandomizedDesign base;
    if (warm_start) {
        const double s0 = sigma2 / std::max(sigma2 - warm_start->distortion, 1e-9);
        base = run_design(source, target, refine, 2.0 * (s0 - 1.0),
                          &warm_start->compressor, nullptr);
    } else {
        DesignConfig base_cfg = config;
        if (base_cfg.schedule.empty() && !target.is_fixed())
            base_cfg.schedule = {target.lambda / 16.0, target.lambda / 4.0};
        base = run_design(source, target, base_cfg, 0.0, nullptr, nullptr);
    }

    // residual(0) = sigma^2 - E[X Xhat] = D > 0; bracket with growing lambda_c
    double lo = 0.0;
    const double s_est = sigma2 / std::max(sigma2 - base.distortion, 1e-9);
    double hi = 4.0 * (s_est - 1.0) + 0.1;
    RandomizedDesign cur = base;
    double r_hi = residual_of(hi, base.compressor, &cur);
    for (int t = 0; t < 8 && r_hi > 0.0; ++t) {
        hi *= 2.0;
        r_hi = residual_of(hi, cur.compressor, &cur);
    }
    if (r_hi > 0.0)
        throw std::domain_error("design_constrained_direct: could not bracket lambda_c");

    double lc = hi;
    for (int it = 0; it < 24; ++it) {
        const double mid = 0.5 * (lo + hi);
        RandomizedDesign d;
        const double r = residual_of(mid, cur.compressor, &d);
        cur = std::move(d);
        lc = mid;
        if (std::abs(r) < 1e-6 * std::max(sigma2, 1.0)) break;
        if (r > 0.0)
            lo = mid;
        else
            hi = mid;
    }
    if (lambda_c_out) *lambda_c_out = lc;
    return cur;
}

// ---- serialization -----------------------------------------------------

void save_design(const RandomizedDesign& design, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_design: cannot open " + path);
    out.precision(17);
    out << "quantizer-design,v1\n";
    out << "mode," << (design.mode.is_fixed() ? "fixed" : "variable") << "\n";
    out << "delta," << design.delta << "\n";
    if (design.mode.is_fixed())
        out << "t_max," << design.mode.t_max << "\n";
    else
        out << "lambda," << design.mode.lambda << "\n";
    out << "distortion," << design.distortion << "\n";
    out << "rate_bits," << design.rate_bits << "\n";
    out << "lagrangian_cost," << design.lagrangian_cost << "\n";
    out << "ortho_residual," << design.ortho_residual << "\n";
    out << "expander_scale," << design.expander_scale << "\n";
    out << "converged," << (design.converged ? 1 : 0) << "\n";
    out << "seed," << design.seed << "\n";
    const auto& gg = design.compressor.grid();
    out << "compressor," << gg.n() << "," << gg.x_min << "," << gg.x_max << "\n";
    for (int i = 0; i < gg.n(); ++i) out << gg.x(i) << "," << gg.values[i] << "\n";
    const auto& ww = design.expander;
    out << "expander," << ww.n() << "," << ww.x_min << "," << ww.x_max << "\n";
    for (int i = 0; i < ww.n(); ++i) out << ww.x(i) << "," << ww.values[i] << "\n";
}

RandomizedDesign load_design(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_design: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "quantizer-design,v1")
        throw std::runtime_error("load_design: unrecognized bundle header");

    RandomizedDesign d;
    auto split = [](const std::string& s) {
        std::vector<std::string> parts;
        std::stringstream ss(s);
        std::string tok;
        while (std::getline(ss, tok, ',')) parts.push_back(tok);
        return parts;
    };
    bool fixed = false;
    int t_max = 0;
    double lambda = 0.0;
    while (std::getline(in, line)) {
        const auto p = split(line);
        if (p.empty()) continue;
        if (p[0] == "mode") fixed = (p.at(1) == "fixed");
        else if (p[0] == "delta") d.delta = std::stod(p.at(1));
        else if (p[0] == "t_max") t_max = std::stoi(p.at(1));
        else if (p[0] == "lambda") lambda = std::stod(p.at(1));
        else if (p[0] == "distortion") d.distortion = std::stod(p.at(1));
        else if (p[0] == "rate_bits") d.rate_bits = std::stod(p.at(1));
        else if (p[0] == "lagrangian_cost") d.lagrangian_cost = std::stod(p.at(1));
        else if (p[0] == "ortho_residual") d.ortho_residual = std::stod(p.at(1));
        else if (p[0] == "expander_scale") d.expander_scale = std::stod(p.at(1));
        else if (p[0] == "converged") d.converged = std::stoi(p.at(1)) != 0;
        else if (p[0] == "seed") d.seed = std::stoull(p.at(1));
        else if (p[0] == "compressor" || p[0] == "expander") {
            const int n = std::stoi(p.at(1));
            const double lo = std::stod(p.at(2));
            const double hi = std::stod(p.at(3));
            std::vector<double> v(n);
            for (int i = 0; i < n; ++i) {
                if (!std::getline(in, line))
                    throw std::runtime_error("load_design: truncated bundle");
                v[i] = std::stod(split(line).at(1));
            }
            ScalarGrid grid(lo, hi, std::move(v));
            if (p[0] == "compressor")
                d.compressor = MonotoneMap(std::move(grid));
            else
                d.expander = std::move(grid);
        }
    }
    d.mode = fixed ? CompanderMode::fixed(t_max) : CompanderMode::variable(lambda);
    return d;
}

}  // namespace quant
