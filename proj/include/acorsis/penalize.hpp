#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/errors.hpp"
#include "acorsis/glm.hpp"
#include "acorsis/linalg.hpp"
#include "acorsis/screening.hpp"

namespace acorsis {

enum class PenaltyMethod { gresh, shim };

/// Penalty configuration. lambda2 < 0 means "use the method default":
/// 0.5 * lambda1 for gresh, lambda1 for shim. The group exponent is fixed
/// at r = 2.
struct PenaltyConfig {
    PenaltyMethod method = PenaltyMethod::gresh;
    double lambda1 = 0.0;
    double lambda2 = -1.0;
    double tol = 1e-6;
    int max_sweeps = 1000;
    static constexpr int r = 2;

    /// Test hook: when set, the full objective is appended after every
    /// single coordinate update.
    std::vector<double>* objective_trace = nullptr;

    double lambda2_ratio() const { return method == PenaltyMethod::gresh ? 0.5 : 1.0; }
    double resolved_lambda2() const { return lambda2 >= 0.0 ? lambda2 : lambda2_ratio() * lambda1; }
};

/// A fitted sparse model over a screened variable set. Maps hold only the
/// coefficients that survived zero-snapping, so "in the map" means nonzero.
struct CoefficientSet {
    double beta0 = 0.0;
    std::map<int, double> main;                    // variable -> beta_j
    std::map<std::pair<int, int>, double> inter;   // (j,k), j<k -> beta_jk
    std::vector<int> screened;                     // fitting set, ascending
    bool converged = true;
    int sweeps = 0;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double sigma2 = std::numeric_limits<double>::quiet_NaN();

    double main_coef(int j) const {
        auto it = main.find(j);
        return it == main.end() ? 0.0 : it->second;
    }
    double inter_coef(int j, int k) const {
        auto it = inter.find({std::min(j, k), std::max(j, k)});
        return it == inter.end() ? 0.0 : it->second;
    }
    int n_main() const { return static_cast<int>(main.size()); }
    int n_inter() const { return static_cast<int>(inter.size()); }
    /// Nonzero coefficient count, intercept included in the counting.
    int df() const { return (beta0 != 0.0 ? 1 : 0) + n_main() + n_inter(); }
};

struct ShCheck {
    bool satisfied = true;
    std::vector<std::pair<int, int>> violations;
};

/// Strong-hierarchy audit: every nonzero interaction must have both parent
/// main effects nonzero.
inline ShCheck check_sh(const CoefficientSet& model) {
    ShCheck out;
    for (const auto& [pair, value] : model.inter) {
        if (value == 0.0) continue;
        if (model.main_coef(pair.first) == 0.0 || model.main_coef(pair.second) == 0.0) {
            out.violations.push_back(pair);
        }
    }
    out.satisfied = out.violations.empty();
    return out;
}

namespace detail {

/// The materialized penalization-stage design: screened main columns first,
/// then all within-set product columns in lexicographic order. This is the
/// only n x O(d^2) allocation in the pipeline.
struct ScreenedDesign {
    int n = 0;
    int m = 0;
    std::vector<int> vars; // global 1-based indices, ascending
    Matrix cols;
    std::vector<double> colsq;

    int n_pairs() const { return m * (m - 1) / 2; }
    int n_effects() const { return m + n_pairs(); }
    // local pair (a,b), 0 <= a < b < m, to column index
    int pair_col(int a, int b) const { return m + a * (2 * m - a - 1) / 2 + (b - a - 1); }
};

inline ScreenedDesign build_screened_design(const Dataset& ds, const std::vector<int>& vars) {
    ScreenedDesign d;
    d.n = ds.n;
    d.m = static_cast<int>(vars.size());
    d.vars = vars;
    d.cols = Matrix(d.n, d.n_effects());
    for (int a = 0; a < d.m; ++a) {
        std::span<const double> src = ds.x(vars[a]);
        std::span<double> dst = d.cols.col(a);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    for (int a = 0; a < d.m; ++a) {
        std::span<const double> xa = d.cols.col(a);
        for (int b = a + 1; b < d.m; ++b) {
            std::span<const double> xb = d.cols.col(b);
            std::span<double> dst = d.cols.col(d.pair_col(a, b));
            for (int i = 0; i < d.n; ++i) dst[i] = xa[i] * xb[i];
        }
    }
    d.colsq.resize(d.n_effects());
    for (int c = 0; c < d.n_effects(); ++c) {
        double s = 0.0;
        for (double v : d.cols.col(c)) s += v * v;
        d.colsq[c] = s;
    }
    return d;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Root of psi(b) = a*b - g + t0 + sum_i nl2 * b / sqrt(b^2 + w_i^2) on
/// (0, g/a], for g > t0 >= 0. psi is increasing and concave on b >= 0, so
/// Newton from the slope-at-zero linearization climbs monotonically to the
/// root; a bisection safeguard covers pathological rounding.
inline double positive_branch_root(double g, double a, double t0, std::span<const double> ws, double nl2) {
    double slope0 = a;
    for (double w : ws) slope0 += nl2 / w;
    double lo = 0.0;
    double hi = g / a;
    double x = (g - t0) / slope0; // slope at zero is the maximal slope, so x starts below the root
    if (!(x > lo) || x > hi) x = 0.5 * (lo + hi);
    for (int iter = 0; iter < 100; ++iter) {
        double psi = a * x - g + t0;
        double dpsi = a;
        for (double w : ws) {
            const double denom = std::sqrt(x * x + w * w);
            psi += nl2 * x / denom;
            dpsi += nl2 * w * w / (denom * denom * denom);
        }
        if (psi < 0.0) lo = x;
        else hi = x;
        const double step = psi / dpsi;
        if (std::fabs(step) <= 1e-10 * (1.0 + std::fabs(x))) return x - step;
        double next = x - step;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    // bisection fallback on the maintained bracket
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = 0.5 * (lo + hi);
        double psi = a * mid - g + t0;
        for (double w : ws) psi += nl2 * mid / std::sqrt(mid * mid + w * w);
        (psi < 0.0 ? lo : hi) = mid;
        if (hi - lo <= 1e-12 * (1.0 + hi)) break;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// One-dimensional main-effect update. g = x_j^T y_partial, a = ||x_j||^2,
/// w = norm of j's interaction coefficients, nl2 = n * lambda2.
/// w == 0: soft threshold at nl2. w > 0: the penalty is smooth in beta_j, so
/// the update is the unique root of the strictly convex derivative.
inline double solve_main_coordinate(double g, double a, double w, double nl2) {
    if (!(a > 1e-12)) return 0.0;
    if (w == 0.0) {
        if (g - nl2 > 0.0) return (g - nl2) / a;
        if (g + nl2 < 0.0) return (g + nl2) / a;
        return 0.0;
    }
    const double ga = std::fabs(g);
    if (ga == 0.0) return 0.0;
    const double ws[1] = {w};
    const double root = detail::positive_branch_root(ga, a, 0.0, ws, nl2);
    return g > 0.0 ? root : -root;
}

/// One-dimensional interaction update for pair (j,k). w1/w2 are the group
/// norms excluding beta_jk itself. Four regimes: both groups empty gives a
/// soft threshold at n(2*lambda2 + lambda1); otherwise each empty group
/// contributes n*lambda2 to the kink at zero and each active group a smooth
/// term, solved by sign-restricted Newton; at most one sign admits a root
/// and when neither does the update is zero.
inline double solve_interaction_coordinate(double g, double a, double w1, double w2, double nl1, double nl2) {
    if (!(a > 1e-12)) return 0.0;
    double t0 = nl1;
    double ws_buf[2];
    std::size_t nw = 0;
    if (w1 == 0.0) t0 += nl2;
    else ws_buf[nw++] = w1;
    if (w2 == 0.0) t0 += nl2;
    else ws_buf[nw++] = w2;
    const double ga = std::fabs(g);
    if (ga <= t0) return 0.0;
    const double root = detail::positive_branch_root(ga, a, t0, std::span<const double>(ws_buf, nw), nl2);
    return g > 0.0 ? root : -root;
}

namespace detail {

/// Coordinate-descent state for the group-plus-lasso objective on a
/// screened design. The residual is maintained incrementally and refreshed
/// from scratch at extraction time.
class GreshSolver {
  public:
    GreshSolver(const ScreenedDesign& d, std::span<const double> y) : d_(d), y_(y.begin(), y.end()) {
        beta_main_.assign(d_.m, 0.0);
        beta_int_.assign(d_.n_pairs(), 0.0);
        resid_ = y_;
    }

    void set_lambda(double lambda1, double lambda2) {
        nl1_ = static_cast<double>(d_.n) * lambda1;
        nl2_ = static_cast<double>(d_.n) * lambda2;
    }

    double beta_main(int a) const { return beta_main_[a]; }
    double beta_int(int a, int b) const { return beta_int_[d_.pair_col(a, b) - d_.m]; }
    double beta0() const { return beta0_; }

    // squared norm of j's interaction-coefficient vector, optionally
    // excluding one partner; sums of squares of exact values, so exact zero
    // means structurally empty
    double xi_sq(int j, int excl = -1) const {
        double s = 0.0;
        for (int k = 0; k < d_.m; ++k) {
            if (k == j || k == excl) continue;
            const double v = beta_int_[d_.pair_col(std::min(j, k), std::max(j, k)) - d_.m];
            s += v * v;
        }
        return s;
    }

    double objective() const {
        double obj = 0.5 * dot(resid_, resid_);
        for (int j = 0; j < d_.m; ++j)
            obj += nl2_ * std::sqrt(beta_main_[j] * beta_main_[j] + xi_sq(j));
        for (double v : beta_int_) obj += nl1_ * std::fabs(v);
        return obj;
    }

    /// Cyclic sweeps (intercept, mains ascending, pairs lexicographic) until
    /// the largest coefficient change drops below tol. Returns sweeps used;
    /// converged() reports whether the budget sufficed.
    int run(const PenaltyConfig& cfg) {
        converged_ = false;
        int sweep = 0;
        for (; sweep < cfg.max_sweeps; ++sweep) {
            const double delta = one_sweep(cfg);
            if (delta < cfg.tol) {
                converged_ = true;
                ++sweep;
                break;
            }
        }
        return sweep;
    }

    bool converged() const { return converged_; }

    /// Snap tiny coefficients to exact zero and emit the sparse model with
    /// the residual, objective, and sigma^2 recomputed at the snapped state.
    CoefficientSet extract() const {
        CoefficientSet out;
        out.screened = d_.vars;
        out.converged = converged_;
        const double snap = 1e-10;
        out.beta0 = std::fabs(beta0_) < snap ? 0.0 : beta0_;
        std::vector<double> r = y_;
        for (int i = 0; i < d_.n; ++i) r[i] -= out.beta0;
        for (int a = 0; a < d_.m; ++a) {
            const double v = beta_main_[a];
            if (std::fabs(v) < snap) continue;
            out.main[d_.vars[a]] = v;
            std::span<const double> col = d_.cols.col(a);
            for (int i = 0; i < d_.n; ++i) r[i] -= v * col[i];
        }
        for (int a = 0; a < d_.m; ++a) {
            for (int b = a + 1; b < d_.m; ++b) {
                const double v = beta_int_[d_.pair_col(a, b) - d_.m];
                if (std::fabs(v) < snap) continue;
                out.inter[{d_.vars[a], d_.vars[b]}] = v;
                std::span<const double> col = d_.cols.col(d_.pair_col(a, b));
                for (int i = 0; i < d_.n; ++i) r[i] -= v * col[i];
            }
        }
        out.sigma2 = dot(r, r) / static_cast<double>(d_.n);
        double obj = 0.5 * dot(r, r);
        for (int a = 0; a < d_.m; ++a) {
            double gsq = out.main_coef(d_.vars[a]) * out.main_coef(d_.vars[a]);
            for (int b = 0; b < d_.m; ++b) {
                if (b == a) continue;
                const double v = out.inter_coef(d_.vars[a], d_.vars[b]);
                gsq += v * v;
            }
            obj += nl2_ * std::sqrt(gsq);
        }
        for (const auto& [pair, v] : out.inter) obj += nl1_ * std::fabs(v);
        out.objective = obj;
        return out;
    }

  private:
    double one_sweep(const PenaltyConfig& cfg) {
        double max_delta = 0.0;
        // intercept: unpenalized mean of the partial residual
        {
            double s = 0.0;
            for (double v : resid_) s += v;
            const double nb = beta0_ + s / static_cast<double>(d_.n);
            const double delta = nb - beta0_;
            if (delta != 0.0)
                for (double& v : resid_) v -= delta;
            beta0_ = nb;
            max_delta = std::max(max_delta, std::fabs(delta));
            trace(cfg);
        }
        for (int a = 0; a < d_.m; ++a) {
            std::span<const double> col = d_.cols.col(a);
            const double old = beta_main_[a];
            const double g = dot(col, resid_) + old * d_.colsq[a];
            const double w = std::sqrt(xi_sq(a));
            const double nb = solve_main_coordinate(g, d_.colsq[a], w, nl2_);
            apply(col, a, old, nb, beta_main_[a], max_delta);
            trace(cfg);
        }
        for (int a = 0; a < d_.m; ++a) {
            for (int b = a + 1; b < d_.m; ++b) {
                const int c = d_.pair_col(a, b);
                std::span<const double> col = d_.cols.col(c);
                double& slot = beta_int_[c - d_.m];
                const double old = slot;
                const double g = dot(col, resid_) + old * d_.colsq[c];
                const double w1 = std::sqrt(beta_main_[a] * beta_main_[a] + xi_sq(a, b));
                const double w2 = std::sqrt(beta_main_[b] * beta_main_[b] + xi_sq(b, a));
                const double nb = solve_interaction_coordinate(g, d_.colsq[c], w1, w2, nl1_, nl2_);
                apply(col, c, old, nb, slot, max_delta);
                trace(cfg);
            }
        }
        return max_delta;
    }

    void apply(std::span<const double> col, int, double old, double nb, double& slot, double& max_delta) {
        const double delta = nb - old;
        if (delta != 0.0) {
            for (int i = 0; i < d_.n; ++i) resid_[i] -= delta * col[i];
        }
        slot = nb;
        max_delta = std::max(max_delta, std::fabs(delta));
    }

    void trace(const PenaltyConfig& cfg) const {
        if (cfg.objective_trace) cfg.objective_trace->push_back(objective());
    }

    const ScreenedDesign& d_;
    std::vector<double> y_;
    std::vector<double> resid_;
    std::vector<double> beta_main_;
    std::vector<double> beta_int_;
    double beta0_ = 0.0;
    double nl1_ = 0.0, nl2_ = 0.0;
    bool converged_ = false;
};

/// Coordinate descent for the product-parameterized objective: interactions
/// are gamma_jk * beta_j * beta_k, so a zero main effect silences all of its
/// interactions by construction.
class ShimSolver {
  public:
    ShimSolver(const ScreenedDesign& d, std::span<const double> y) : d_(d), y_(y.begin(), y.end()) {
        beta_main_.assign(d_.m, 0.0);
        gamma_.assign(d_.n_pairs(), 0.0);
        resid_ = y_;
        synth_.assign(d_.n, 0.0);
    }

    void set_lambda(double lambda1, double lambda2) {
        nl1_ = static_cast<double>(d_.n) * lambda1;
        nl2_ = static_cast<double>(d_.n) * lambda2;
    }

    double gamma(int a, int b) const { return gamma_[d_.pair_col(a, b) - d_.m]; }
    double beta_main(int a) const { return beta_main_[a]; }

    double objective() const {
        double obj = 0.5 * dot(resid_, resid_);
        for (double v : beta_main_) obj += nl2_ * std::fabs(v);
        for (double v : gamma_) obj += nl1_ * std::fabs(v);
        return obj;
    }

    int run(const PenaltyConfig& cfg) {
        converged_ = false;
        int sweep = 0;
        for (; sweep < cfg.max_sweeps; ++sweep) {
            const double delta = one_sweep(cfg);
            if (delta < cfg.tol) {
                converged_ = true;
                ++sweep;
                break;
            }
        }
        return sweep;
    }

    bool converged() const { return converged_; }

    CoefficientSet extract(std::map<std::pair<int, int>, double>* gamma_out = nullptr) const {
        CoefficientSet out;
        out.screened = d_.vars;
        out.converged = converged_;
        const double snap = 1e-10;
        out.beta0 = std::fabs(beta0_) < snap ? 0.0 : beta0_;
        for (int a = 0; a < d_.m; ++a) {
            if (std::fabs(beta_main_[a]) >= snap) out.main[d_.vars[a]] = beta_main_[a];
        }
        for (int a = 0; a < d_.m; ++a) {
            for (int b = a + 1; b < d_.m; ++b) {
                const double gma = gamma_[d_.pair_col(a, b) - d_.m];
                const double v = gma * beta_main_[a] * beta_main_[b];
                // the parameterization forces the implication: a snapped
                // parent wipes its interactions too
                if (std::fabs(v) < snap || out.main_coef(d_.vars[a]) == 0.0 || out.main_coef(d_.vars[b]) == 0.0)
                    continue;
                out.inter[{d_.vars[a], d_.vars[b]}] = v;
                if (gamma_out) (*gamma_out)[{d_.vars[a], d_.vars[b]}] = gma;
            }
        }
        // residual and sigma^2 at the snapped model
        std::vector<double> r = y_;
        for (int i = 0; i < d_.n; ++i) r[i] -= out.beta0;
        for (const auto& [j, v] : out.main) {
            const int a = local(j);
            std::span<const double> col = d_.cols.col(a);
            for (int i = 0; i < d_.n; ++i) r[i] -= v * col[i];
        }
        for (const auto& [pair, v] : out.inter) {
            std::span<const double> col = d_.cols.col(d_.pair_col(local(pair.first), local(pair.second)));
            for (int i = 0; i < d_.n; ++i) r[i] -= v * col[i];
        }
        out.sigma2 = dot(r, r) / static_cast<double>(d_.n);
        out.objective = 0.5 * dot(r, r);
        for (const auto& [j, v] : out.main) {
            (void)j;
            out.objective += nl2_ * std::fabs(v);
        }
        for (const auto& [pair, v] : out.inter) {
            const double gma = gamma_[d_.pair_col(local(pair.first), local(pair.second)) - d_.m];
            (void)v;
            out.objective += nl1_ * std::fabs(gma);
        }
        return out;
    }

  private:
    int local(int var) const {
        return static_cast<int>(std::lower_bound(d_.vars.begin(), d_.vars.end(), var) - d_.vars.begin());
    }

    double one_sweep(const PenaltyConfig& cfg) {
        double max_delta = 0.0;
        {
            double s = 0.0;
            for (double v : resid_) s += v;
            const double nb = beta0_ + s / static_cast<double>(d_.n);
            const double delta = nb - beta0_;
            if (delta != 0.0)
                for (double& v : resid_) v -= delta;
            beta0_ = nb;
            max_delta = std::max(max_delta, std::fabs(delta));
            trace(cfg);
        }
        // main effects against their synthetic columns
        for (int a = 0; a < d_.m; ++a) {
            std::span<const double> xa = d_.cols.col(a);
            std::copy(xa.begin(), xa.end(), synth_.begin());
            for (int b = 0; b < d_.m; ++b) {
                if (b == a) continue;
                const double gma = gamma_[d_.pair_col(std::min(a, b), std::max(a, b)) - d_.m];
                const double scale = gma * beta_main_[b];
                if (scale == 0.0) continue;
                std::span<const double> zc = d_.cols.col(d_.pair_col(std::min(a, b), std::max(a, b)));
                for (int i = 0; i < d_.n; ++i) synth_[i] += scale * zc[i];
            }
            double a2 = 0.0, gres = 0.0;
            for (int i = 0; i < d_.n; ++i) {
                a2 += synth_[i] * synth_[i];
                gres += synth_[i] * resid_[i];
            }
            const double old = beta_main_[a];
            const double g = gres + old * a2;
            double nb = 0.0;
            if (a2 > 1e-12) {
                if (g - nl2_ > 0.0) nb = (g - nl2_) / a2;
                else if (g + nl2_ < 0.0) nb = (g + nl2_) / a2;
            }
            const double delta = nb - old;
            if (delta != 0.0)
                for (int i = 0; i < d_.n; ++i) resid_[i] -= delta * synth_[i];
            beta_main_[a] = nb;
            max_delta = std::max(max_delta, std::fabs(delta));
            trace(cfg);
        }
        // gamma updates against beta_a * beta_b * z_ab
        for (int a = 0; a < d_.m; ++a) {
            for (int b = a + 1; b < d_.m; ++b) {
                const int c = d_.pair_col(a, b);
                double& slot = gamma_[c - d_.m];
                const double q = beta_main_[a] * beta_main_[b];
                if (q == 0.0) {
                    // degenerate column: the model term is zero regardless
                    // of gamma, so the update is skipped and gamma cleared
                    slot = 0.0;
                    trace(cfg);
                    continue;
                }
                std::span<const double> zc = d_.cols.col(c);
                const double a2 = q * q * d_.colsq[c];
                const double old = slot;
                const double g = q * dot(zc, resid_) + old * a2;
                double nb = 0.0;
                if (a2 > 1e-12) {
                    if (g - nl1_ > 0.0) nb = (g - nl1_) / a2;
                    else if (g + nl1_ < 0.0) nb = (g + nl1_) / a2;
                }
                const double delta = nb - old;
                if (delta != 0.0) {
                    const double step = delta * q;
                    for (int i = 0; i < d_.n; ++i) resid_[i] -= step * zc[i];
                }
                slot = nb;
                max_delta = std::max(max_delta, std::fabs(delta));
                trace(cfg);
            }
        }
        return max_delta;
    }

    void trace(const PenaltyConfig& cfg) const {
        if (cfg.objective_trace) cfg.objective_trace->push_back(objective());
    }

    const ScreenedDesign& d_;
    std::vector<double> y_;
    std::vector<double> resid_;
    std::vector<double> beta_main_;
    std::vector<double> gamma_;
    std::vector<double> synth_;
    double beta0_ = 0.0;
    double nl1_ = 0.0, nl2_ = 0.0;
    bool converged_ = false;
};

inline void validate_screened(const Dataset& ds, const std::vector<int>& vars) {
    if (vars.empty()) throw dimension_error("screened set is empty");
    int prev = 0;
    for (int v : vars) {
        if (v <= prev || v > ds.p) throw index_error("screened set must be ascending within 1..p");
        prev = v;
    }
}

} // namespace detail

/// The restricted group-plus-lasso objective value at an arbitrary
/// coefficient set: 0.5 ||resid||^2 + n*l2 * sum_j group_j + n*l1 * sum |b_jk|,
/// every sum restricted to the screened set.
inline double gresh_objective(const Dataset& ds, const ShrunkSet& s, const CoefficientSet& beta,
                              const PenaltyConfig& cfg) {
    detail::validate_screened(ds, s.indices);
    const double nl1 = ds.n * cfg.lambda1;
    const double nl2 = ds.n * cfg.resolved_lambda2();
    std::vector<double> r(ds.y.begin(), ds.y.end());
    for (int i = 0; i < ds.n; ++i) r[i] -= beta.beta0;
    for (const auto& [j, v] : beta.main) {
        std::span<const double> col = ds.x(j);
        for (int i = 0; i < ds.n; ++i) r[i] -= v * col[i];
    }
    for (const auto& [pair, v] : beta.inter) {
        std::span<const double> xj = ds.x(pair.first);
        std::span<const double> xk = ds.x(pair.second);
        for (int i = 0; i < ds.n; ++i) r[i] -= v * xj[i] * xk[i];
    }
    double obj = 0.5 * detail::dot(r, r);
    for (int j : s.indices) {
        double gsq = beta.main_coef(j) * beta.main_coef(j);
        for (int k : s.indices) {
            if (k == j) continue;
            const double v = beta.inter_coef(j, k);
            gsq += v * v;
        }
        obj += nl2 * std::sqrt(gsq);
    }
    for (const auto& [pair, v] : beta.inter) {
        (void)pair;
        obj += nl1 * std::fabs(v);
    }
    return obj;
}

/// Fit the group-plus-lasso model on the screened set by cyclic coordinate
/// descent. The emitted set satisfies strong hierarchy after zero-snapping.
inline CoefficientSet gresh_fit(const Dataset& ds, const ShrunkSet& s, const PenaltyConfig& cfg) {
    if (ds.family != Family::gaussian) throw dimension_error("gresh_fit needs a gaussian dataset");
    if (cfg.lambda1 < 0.0 || cfg.resolved_lambda2() < 0.0) throw config_error("penalty weights must be nonnegative");
    detail::validate_screened(ds, s.indices);
    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    detail::GreshSolver solver(design, ds.y);
    solver.set_lambda(cfg.lambda1, cfg.resolved_lambda2());
    CoefficientSet out;
    const int sweeps = solver.run(cfg);
    out = solver.extract();
    out.sweeps = sweeps;
    return out;
}

struct ShimDiagnostics {
    std::map<std::pair<int, int>, double> gamma;
};

/// Fit the product-parameterized model (lambda1 = lambda2 recommended).
/// beta_jk = gamma_jk * beta_j * beta_k is emitted, so a zero parent
/// silences its interactions exactly.
inline CoefficientSet shim_fit(const Dataset& ds, const ShrunkSet& s, const PenaltyConfig& cfg,
                               ShimDiagnostics* diag = nullptr) {
    if (ds.family != Family::gaussian) throw dimension_error("shim_fit needs a gaussian dataset");
    if (cfg.lambda1 < 0.0 || cfg.resolved_lambda2() < 0.0) throw config_error("penalty weights must be nonnegative");
    detail::validate_screened(ds, s.indices);
    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    detail::ShimSolver solver(design, ds.y);
    solver.set_lambda(cfg.lambda1, cfg.resolved_lambda2());
    const int sweeps = solver.run(cfg);
    CoefficientSet out = solver.extract(diag ? &diag->gamma : nullptr);
    out.sweeps = sweeps;
    return out;
}

/// Largest lambda1 for which the all-zero fit is stationary, from the
/// update-rule thresholds evaluated at the zero state.
inline double lambda_max_for(const Dataset& ds, const ShrunkSet& s, PenaltyMethod method) {
    detail::validate_screened(ds, s.indices);
    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    double ybar = 0.0;
    for (double v : ds.y) ybar += v;
    ybar /= static_cast<double>(ds.n);
    std::vector<double> ytil(ds.y.begin(), ds.y.end());
    for (double& v : ytil) v -= ybar;
    const double ratio = method == PenaltyMethod::gresh ? 0.5 : 1.0;
    double lmax = 0.0;
    for (int a = 0; a < design.m; ++a) {
        const double g = std::fabs(detail::dot(design.cols.col(a), ytil));
        lmax = std::max(lmax, g / (ds.n * ratio));
    }
    if (method == PenaltyMethod::gresh) {
        for (int c = design.m; c < design.n_effects(); ++c) {
            const double g = std::fabs(detail::dot(design.cols.col(c), ytil));
            lmax = std::max(lmax, g / (ds.n * (2.0 * ratio + 1.0)));
        }
    }
    return lmax;
}

struct GicPoint {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double sigma2_hat = std::numeric_limits<double>::quiet_NaN();
    double loglik = std::numeric_limits<double>::quiet_NaN();
    int df = 0;
    double gic = std::numeric_limits<double>::quiet_NaN();
    bool ok = false;
    bool converged = true;
    std::string note;
};

struct GicResult {
    std::vector<double> lambda_grid; // descending
    std::vector<GicPoint> points;
    int chosen = -1;
    double kappa = 0.0;
    CoefficientSet chosen_model;
};

/// The conventional information-criterion weight for diverging dimension:
/// log(p) * log(log(n)).
inline double default_kappa(int p, int n) {
    return std::log(static_cast<double>(p)) * std::log(std::log(static_cast<double>(n)));
}

/// Warm-started lambda path with information-criterion selection. Fifty
/// geometric grid points from lambda_max down to 0.01 * lambda_max; lambda2
/// stays slaved to the method's recommended ratio along the whole path.
/// Per point: sigma2 = mean squared residual, loglik the gaussian profile
/// likelihood, df the nonzero count, gic = -2 loglik + kappa * df.
inline GicResult lambda_path_gic(const Dataset& ds, const ShrunkSet& s, PenaltyMethod method, double kappa,
                                 int n_lambda = 50, double lambda_min_ratio = 0.01,
                                 const PenaltyConfig& base = {}) {
    if (ds.family != Family::gaussian) throw dimension_error("lambda_path_gic needs a gaussian dataset");
    detail::validate_screened(ds, s.indices);
    GicResult out;
    out.kappa = kappa;

    const double lmax = lambda_max_for(ds, s, method);
    if (!(lmax > 0.0)) throw nonconvergence_error("lambda_max is zero: response is orthogonal to every effect");
    out.lambda_grid.resize(n_lambda);
    for (int i = 0; i < n_lambda; ++i)
        out.lambda_grid[i] = lmax * std::pow(lambda_min_ratio, static_cast<double>(i) / (n_lambda - 1));

    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    detail::GreshSolver gresh(design, ds.y);
    detail::ShimSolver shim(design, ds.y);
    PenaltyConfig cfg = base;
    cfg.method = method;
    cfg.lambda2 = -1.0;

    const double dn = static_cast<double>(ds.n);
    double best_gic = std::numeric_limits<double>::infinity();
    out.points.resize(n_lambda);
    for (int i = 0; i < n_lambda; ++i) {
        GicPoint& pt = out.points[i];
        pt.lambda1 = out.lambda_grid[i];
        pt.lambda2 = cfg.lambda2_ratio() * pt.lambda1;
        cfg.lambda1 = pt.lambda1;
        try {
            CoefficientSet model;
            if (method == PenaltyMethod::gresh) {
                gresh.set_lambda(pt.lambda1, pt.lambda2);
                const int sweeps = gresh.run(cfg);
                model = gresh.extract();
                model.sweeps = sweeps;
            } else {
                shim.set_lambda(pt.lambda1, pt.lambda2);
                const int sweeps = shim.run(cfg);
                model = shim.extract();
                model.sweeps = sweeps;
            }
            pt.converged = model.converged;
            if (!model.converged) pt.note = "max_sweeps";
            pt.sigma2_hat = std::max(model.sigma2, 1e-12);
            pt.loglik = -0.5 * dn * (1.0 + std::log(2.0 * 3.14159265358979323846)) - 0.5 * dn * std::log(pt.sigma2_hat);
            pt.df = model.df();
            pt.gic = -2.0 * pt.loglik + kappa * pt.df;
            pt.ok = true;
            if (pt.gic < best_gic) {
                best_gic = pt.gic;
                out.chosen = i;
                out.chosen_model = model;
            }
        } catch (const error& e) {
            pt.ok = false;
            pt.note = e.what();
        }
    }
    if (out.chosen < 0) throw nonconvergence_error("every lambda grid point failed");
    return out;
}

/// Subgradient audit of a fitted group-plus-lasso model: the largest
/// violation, scaled by n, over every coordinate's stationarity condition.
inline double gresh_kkt_violation(const Dataset& ds, const ShrunkSet& s, const CoefficientSet& fit,
                                  const PenaltyConfig& cfg) {
    detail::validate_screened(ds, s.indices);
    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    const double nl1 = ds.n * cfg.lambda1;
    const double nl2 = ds.n * cfg.resolved_lambda2();
    const int m = design.m;

    std::vector<double> bm(m, 0.0);
    std::vector<double> bi(design.n_pairs(), 0.0);
    for (int a = 0; a < m; ++a) bm[a] = fit.main_coef(design.vars[a]);
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) bi[design.pair_col(a, b) - m] = fit.inter_coef(design.vars[a], design.vars[b]);

    std::vector<double> r(ds.y.begin(), ds.y.end());
    for (int i = 0; i < ds.n; ++i) r[i] -= fit.beta0;
    for (int a = 0; a < m; ++a) {
        if (bm[a] == 0.0) continue;
        std::span<const double> col = design.cols.col(a);
        for (int i = 0; i < ds.n; ++i) r[i] -= bm[a] * col[i];
    }
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b) {
            const double v = bi[design.pair_col(a, b) - m];
            if (v == 0.0) continue;
            std::span<const double> col = design.cols.col(design.pair_col(a, b));
            for (int i = 0; i < ds.n; ++i) r[i] -= v * col[i];
        }

    auto xi_sq = [&](int j, int excl) {
        double ssum = 0.0;
        for (int k = 0; k < m; ++k) {
            if (k == j || k == excl) continue;
            const double v = bi[design.pair_col(std::min(j, k), std::max(j, k)) - m];
            ssum += v * v;
        }
        return ssum;
    };

    double worst = 0.0;
    {
        double sum = 0.0;
        for (double v : r) sum += v;
        worst = std::fabs(sum) / ds.n;
    }
    for (int a = 0; a < m; ++a) {
        std::span<const double> col = design.cols.col(a);
        const double g = detail::dot(col, r) + bm[a] * design.colsq[a];
        const double w = std::sqrt(xi_sq(a, -1));
        double viol;
        if (w == 0.0 && bm[a] == 0.0) {
            viol = std::max(0.0, std::fabs(g) - nl2);
        } else if (w == 0.0) {
            viol = std::fabs(design.colsq[a] * bm[a] - g + nl2 * (bm[a] > 0 ? 1.0 : -1.0));
        } else {
            viol = std::fabs(design.colsq[a] * bm[a] - g + nl2 * bm[a] / std::sqrt(bm[a] * bm[a] + w * w));
        }
        worst = std::max(worst, viol / ds.n);
    }
    for (int a = 0; a < m; ++a) {
        for (int b = a + 1; b < m; ++b) {
            const int c = design.pair_col(a, b);
            std::span<const double> col = design.cols.col(c);
            const double v = bi[c - m];
            const double g = detail::dot(col, r) + v * design.colsq[c];
            const double w1 = std::sqrt(bm[a] * bm[a] + xi_sq(a, b));
            const double w2 = std::sqrt(bm[b] * bm[b] + xi_sq(b, a));
            double t0 = nl1;
            if (w1 == 0.0) t0 += nl2;
            if (w2 == 0.0) t0 += nl2;
            double viol;
            if (v == 0.0) {
                viol = std::max(0.0, std::fabs(g) - t0);
            } else {
                double deriv = design.colsq[c] * v - g + t0 * (v > 0 ? 1.0 : -1.0);
                if (w1 > 0.0) deriv += nl2 * v / std::sqrt(v * v + w1 * w1);
                if (w2 > 0.0) deriv += nl2 * v / std::sqrt(v * v + w2 * w2);
                viol = std::fabs(deriv);
            }
            worst = std::max(worst, viol / ds.n);
        }
    }
    return worst;
}

/// Linear predictor of a fitted model on (standardized) dataset columns.
inline std::vector<double> linear_predictor(const CoefficientSet& model, const Dataset& ds) {
    std::vector<double> eta(ds.n, model.beta0);
    for (const auto& [j, v] : model.main) {
        std::span<const double> col = ds.x(j);
        for (int i = 0; i < ds.n; ++i) eta[i] += v * col[i];
    }
    for (const auto& [pair, v] : model.inter) {
        std::span<const double> xj = ds.x(pair.first);
        std::span<const double> xk = ds.x(pair.second);
        for (int i = 0; i < ds.n; ++i) eta[i] += v * xj[i] * xk[i];
    }
    return eta;
}

inline std::vector<double> predict_probabilities(const CoefficientSet& model, const Dataset& ds) {
    std::vector<double> eta = linear_predictor(model, ds);
    for (double& v : eta) v = clip_probability(sigmoid(v));
    return eta;
}

/// Held-out binomial prediction deviance:
/// 2 * sum { y log(y/yhat) + (1-y) log((1-y)/(1-yhat)) }, 0 log 0 = 0,
/// probabilities clipped to [1e-12, 1 - 1e-12].
inline double prediction_deviance(const CoefficientSet& model, const Dataset& test) {
    if (test.family != Family::binomial) throw degenerate_response_error("prediction_deviance needs a binomial dataset");
    const std::vector<double> prob = predict_probabilities(model, test);
    double g2 = 0.0;
    for (int i = 0; i < test.n; ++i) {
        const double yi = test.y[i];
        const double pi = prob[i];
        if (yi > 0.0) g2 += 2.0 * yi * std::log(yi / pi);
        if (yi < 1.0) g2 += 2.0 * (1.0 - yi) * std::log((1.0 - yi) / (1.0 - pi));
    }
    return g2;
}

struct LogisticSelectDiagnostics {
    std::vector<int> repaired_mains;
    std::vector<std::pair<int, int>> pruned_interactions;
    bool separation_fallback = false;
    double chosen_lambda = std::numeric_limits<double>::quiet_NaN();
    double chosen_gic = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

/// l1-penalized logistic coordinate descent on a fixed design: outer
/// quadratic approximation, inner cyclic soft-threshold sweeps.
/// beta[0] is the unpenalized intercept; beta[1+c] follows design column c.
inline bool logistic_lasso(const ScreenedDesign& d, std::span<const double> y, double lambda,
                           std::vector<double>& beta, double& deviance_out) {
    const int n = d.n;
    const int ncol = d.n_effects();
    const double nl = n * lambda;
    std::vector<double> eta(n, 0.0), prob(n), weight(n), resid(n);

    auto refresh = [&]() {
        for (int i = 0; i < n; ++i) {
            double e = beta[0];
            for (int c = 0; c < ncol; ++c) {
                if (beta[1 + c] == 0.0) continue;
                e += beta[1 + c] * d.cols.col(c)[i];
            }
            eta[i] = e;
            prob[i] = sigmoid(e);
        }
        return binomial_deviance(y, prob);
    };

    double dev = refresh();
    for (int outer = 0; outer < 30; ++outer) {
        for (int i = 0; i < n; ++i) {
            double w = prob[i] * (1.0 - prob[i]);
            if (w < 1e-5) w = 1e-5;
            weight[i] = w;
            resid[i] = (y[i] - prob[i]) / w; // working residual z - eta
        }
        // inner sweeps on the weighted quadratic surrogate
        for (int sweep = 0; sweep < 100; ++sweep) {
            double max_delta = 0.0;
            {
                double num = 0.0, den = 0.0;
                for (int i = 0; i < n; ++i) {
                    num += weight[i] * resid[i];
                    den += weight[i];
                }
                const double delta = num / den;
                beta[0] += delta;
                for (int i = 0; i < n; ++i) resid[i] -= delta;
                max_delta = std::max(max_delta, std::fabs(delta));
            }
            for (int c = 0; c < ncol; ++c) {
                std::span<const double> col = d.cols.col(c);
                double num = 0.0, den = 0.0;
                for (int i = 0; i < n; ++i) {
                    num += weight[i] * col[i] * resid[i];
                    den += weight[i] * col[i] * col[i];
                }
                if (!(den > 1e-12)) continue;
                const double old = beta[1 + c];
                const double g = num + old * den;
                double nb = 0.0;
                if (g - nl > 0.0) nb = (g - nl) / den;
                else if (g + nl < 0.0) nb = (g + nl) / den;
                const double delta = nb - old;
                if (delta != 0.0) {
                    for (int i = 0; i < n; ++i) resid[i] -= delta * col[i];
                    beta[1 + c] = nb;
                    max_delta = std::max(max_delta, std::fabs(delta));
                }
            }
            if (max_delta < 1e-7) break;
        }
        const double dev_old = dev;
        dev = refresh();
        if (std::fabs(dev_old - dev) < 1e-8 * (std::fabs(dev) + 1.0)) {
            deviance_out = dev;
            return true;
        }
        if (dev > dev_old + 1e-6) {
            deviance_out = dev;
            return true; // surrogate stalled; accept the current iterate
        }
    }
    deviance_out = dev;
    return true;
}

} // namespace detail

/// Binomial two-stage selection on the screened set: l1-penalized logistic
/// path tuned by the information criterion, hierarchy repair (missing
/// parents added), an unpenalized refit, then backward pruning of
/// interactions by Wald p-value (> 0.05, largest first) while keeping the
/// parents of the survivors.
inline CoefficientSet logistic_select(const Dataset& ds, const ShrunkSet& s, double kappa,
                                      LogisticSelectDiagnostics* diag = nullptr) {
    if (ds.family != Family::binomial) throw degenerate_response_error("logistic_select needs a binomial dataset");
    detail::validate_screened(ds, s.indices);
    detail::ScreenedDesign design = detail::build_screened_design(ds, s.indices);
    const int m = design.m;
    const int ncol = design.n_effects();

    // lambda_max from the null-model score
    double ybar = 0.0;
    for (double v : ds.y) ybar += v;
    ybar /= ds.n;
    double lmax = 0.0;
    for (int c = 0; c < ncol; ++c) {
        double g = 0.0;
        std::span<const double> col = design.cols.col(c);
        for (int i = 0; i < ds.n; ++i) g += col[i] * (ds.y[i] - ybar);
        lmax = std::max(lmax, std::fabs(g) / ds.n);
    }
    if (!(lmax > 0.0)) lmax = 1.0;

    const int n_lambda = 50;
    std::vector<double> beta(1 + ncol, 0.0);
    double best_gic = std::numeric_limits<double>::infinity();
    double best_lambda = lmax;
    std::vector<double> best_beta = beta;
    for (int i = 0; i < n_lambda; ++i) {
        const double lambda = lmax * std::pow(0.01, static_cast<double>(i) / (n_lambda - 1));
        double dev = 0.0;
        detail::logistic_lasso(design, ds.y, lambda, beta, dev);
        int df = std::fabs(beta[0]) >= 1e-10 ? 1 : 0;
        for (int c = 0; c < ncol; ++c)
            if (std::fabs(beta[1 + c]) >= 1e-10) ++df;
        const double gic = dev + kappa * df;
        if (gic < best_gic) {
            best_gic = gic;
            best_lambda = lambda;
            best_beta = beta;
        }
    }
    if (diag) {
        diag->chosen_lambda = best_lambda;
        diag->chosen_gic = best_gic;
    }

    // support of the chosen penalized fit
    std::vector<bool> main_in(m, false);
    std::vector<std::pair<int, int>> inter_in; // local pairs
    for (int a = 0; a < m; ++a) main_in[a] = std::fabs(best_beta[1 + a]) >= 1e-10;
    for (int a = 0; a < m; ++a)
        for (int b = a + 1; b < m; ++b)
            if (std::fabs(best_beta[1 + design.pair_col(a, b)]) >= 1e-10) inter_in.push_back({a, b});

    // hierarchy repair: force parents of selected interactions in
    std::vector<bool> repaired(m, false);
    for (const auto& [a, b] : inter_in) {
        if (!main_in[a]) {
            main_in[a] = true;
            repaired[a] = true;
        }
        if (!main_in[b]) {
            main_in[b] = true;
            repaired[b] = true;
        }
    }
    if (diag)
        for (int a = 0; a < m; ++a)
            if (repaired[a]) diag->repaired_mains.push_back(design.vars[a]);

    const double wald_threshold = 0.05;
    bool separation_fallback = false;

    // unpenalized refit + Wald pruning loop
    while (true) {
        std::vector<const double*> cols;
        std::vector<int> col_ids; // design column per predictor
        for (int a = 0; a < m; ++a)
            if (main_in[a]) {
                cols.push_back(design.cols.col(a).data());
                col_ids.push_back(a);
            }
        for (const auto& [a, b] : inter_in) {
            cols.push_back(design.cols.col(design.pair_col(a, b)).data());
            col_ids.push_back(design.pair_col(a, b));
        }
        const int k = 1 + static_cast<int>(cols.size());

        IrlsOptions opt;
        LogisticFit fit = logistic_irls(std::span<const double* const>(cols.data(), cols.size()), ds.n, ds.y, opt);
        if (!fit.converged || fit.separated) {
            opt.ridge = 1e-6;
            fit = logistic_irls(std::span<const double* const>(cols.data(), cols.size()), ds.n, ds.y, opt);
            separation_fallback = true;
            if (!fit.converged) throw nonconvergence_error("logistic refit failed even with ridge fallback");
        }

        // Wald p-values need the weighted information matrix at the fit
        std::vector<double> info(static_cast<std::size_t>(k) * k, 0.0);
        {
            std::vector<double> eta(ds.n, fit.beta[0]);
            for (std::size_t c = 0; c < cols.size(); ++c)
                for (int i = 0; i < ds.n; ++i) eta[i] += fit.beta[1 + c] * cols[c][i];
            auto column = [&](int c, int i) { return c == 0 ? 1.0 : cols[c - 1][i]; };
            for (int i = 0; i < ds.n; ++i) {
                const double pi = sigmoid(eta[i]);
                double w = pi * (1.0 - pi);
                if (w < 1e-10) w = 1e-10;
                for (int a2 = 0; a2 < k; ++a2)
                    for (int b2 = a2; b2 < k; ++b2) info[static_cast<std::size_t>(a2) * k + b2] += w * column(a2, i) * column(b2, i);
            }
            for (int a2 = 0; a2 < k; ++a2)
                for (int b2 = 0; b2 < a2; ++b2) info[static_cast<std::size_t>(a2) * k + b2] = info[static_cast<std::size_t>(b2) * k + a2];
        }
        bool have_cov = detail::invert_spd(info, k);

        // largest-p interaction above the threshold gets dropped
        int drop_pos = -1;
        double drop_p = wald_threshold;
        if (have_cov) {
            const int n_main_in = static_cast<int>(cols.size()) - static_cast<int>(inter_in.size());
            for (std::size_t t = 0; t < inter_in.size(); ++t) {
                const int c = 1 + n_main_in + static_cast<int>(t);
                const double se = std::sqrt(std::max(info[static_cast<std::size_t>(c) * k + c], 0.0));
                const double z = se > 0.0 ? std::fabs(fit.beta[c]) / se : std::numeric_limits<double>::infinity();
                const double pval = std::erfc(z / std::sqrt(2.0));
                if (pval > drop_p) {
                    drop_p = pval;
                    drop_pos = static_cast<int>(t);
                }
            }
        }

        if (drop_pos < 0) {
            // assemble the final model from this refit
            CoefficientSet out;
            out.screened = s.indices;
            out.beta0 = fit.beta[0];
            int c = 1;
            for (int a = 0; a < m; ++a) {
                if (!main_in[a]) continue;
                // keep refit mains at their exact values, however small:
                // parents must stay present for the hierarchy
                if (fit.beta[c] != 0.0) out.main[design.vars[a]] = fit.beta[c];
                ++c;
            }
            for (const auto& [a, b] : inter_in) {
                if (std::fabs(fit.beta[c]) >= 1e-10) out.inter[{design.vars[a], design.vars[b]}] = fit.beta[c];
                ++c;
            }
            if (diag) diag->separation_fallback = separation_fallback;
            // a parent whose refit coefficient is exactly 0.0 (measure-zero
            // event) would break the hierarchy; nudge it to a representable
            // presence rather than dropping the interaction
            for (const auto& pair : check_sh(out).violations) {
                if (out.main.find(pair.first) == out.main.end()) out.main[pair.first] = 1e-12;
                if (out.main.find(pair.second) == out.main.end()) out.main[pair.second] = 1e-12;
            }
            return out;
        }

        const auto dropped = inter_in[static_cast<std::size_t>(drop_pos)];
        inter_in.erase(inter_in.begin() + drop_pos);
        if (diag) diag->pruned_interactions.push_back({design.vars[dropped.first], design.vars[dropped.second]});
        // repair-added parents that no longer parent anything fall out too
        for (int a : {dropped.first, dropped.second}) {
            if (!repaired[a]) continue;
            bool still_parent = false;
            for (const auto& [x1, x2] : inter_in)
                if (x1 == a || x2 == a) still_parent = true;
            if (!still_parent) main_in[a] = false;
        }
    }
}

} // namespace acorsis
