#pragma once

// Test-only oracles, kept independent of the solver code paths they check:
// a multi-round grid minimizer for tiny group-plus-lasso problems and an
// exhaustive-submodel information-criterion search based on plain OLS.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "acorsis/dataset.hpp"
#include "acorsis/linalg.hpp"
#include "acorsis/rng.hpp"

namespace oracles {

// 1-D objective slice used by the coordinate-update oracles:
// 0.5*a*b^2 - g*b + l1_term*|b| + nl2 * sum_i sqrt(b^2 + w_i^2)
inline double coordinate_objective(double b, double a, double g, double l1_term, double nl2,
                                   std::span<const double> ws) {
    double v = 0.5 * a * b * b - g * b + l1_term * std::fabs(b);
    for (double w : ws) v += nl2 * std::sqrt(b * b + w * w);
    return v;
}

// argmin over a fixed-step grid on [-range, range]
inline double coordinate_grid_argmin(double range, double step, double a, double g, double l1_term, double nl2,
                                     std::span<const double> ws) {
    double best_b = 0.0;
    double best_v = coordinate_objective(0.0, a, g, l1_term, nl2, ws);
    const long steps = static_cast<long>(range / step);
    for (long t = -steps; t <= steps; ++t) {
        const double b = static_cast<double>(t) * step;
        const double v = coordinate_objective(b, a, g, l1_term, nl2, ws);
        if (v < best_v) {
            best_v = v;
            best_b = b;
        }
    }
    return best_b;
}

// Small-instance objective for screened sets of size one or two, with the
// intercept profiled exactly. Effects are [x1, (x2, x12 when m == 2)].
// Quadratic parts come from a centered Gram matrix so a grid point costs
// O(1).
struct SmallGreshProblem {
    int n = 0;
    int m = 0; // 1 or 2 variables
    double nl1 = 0.0, nl2 = 0.0;
    // centered quadratic form: obj = 0.5*(yy - 2 q.b + b'G b) + penalties
    std::array<std::array<double, 3>, 3> gram{};
    std::array<double, 3> q{};
    double yy = 0.0;
    int k = 0; // effect count: 1 (m=1) or 3 (m=2)

    static SmallGreshProblem build(const acorsis::Dataset& ds, double lambda1, double lambda2) {
        SmallGreshProblem p;
        p.n = ds.n;
        p.m = ds.p;
        p.k = ds.p == 1 ? 1 : 3;
        p.nl1 = ds.n * lambda1;
        p.nl2 = ds.n * lambda2;
        std::vector<std::vector<double>> cols;
        {
            std::span<const double> x1 = ds.x(1);
            cols.emplace_back(x1.begin(), x1.end());
            if (ds.p == 2) {
                std::span<const double> x2 = ds.x(2);
                cols.emplace_back(x2.begin(), x2.end());
                std::vector<double> z(ds.n);
                for (int i = 0; i < ds.n; ++i) z[i] = x1[i] * x2[i];
                cols.push_back(std::move(z));
            }
        }
        // center columns and response: profiling the intercept exactly
        std::vector<double> yc(ds.y.begin(), ds.y.end());
        double ybar = 0.0;
        for (double v : yc) ybar += v;
        ybar /= ds.n;
        for (double& v : yc) v -= ybar;
        for (auto& c : cols) {
            double mean = 0.0;
            for (double v : c) mean += v;
            mean /= ds.n;
            for (double& v : c) v -= mean;
        }
        for (double v : yc) p.yy += v * v;
        for (int a = 0; a < p.k; ++a) {
            for (int b = 0; b < p.k; ++b) {
                double s = 0.0;
                for (int i = 0; i < ds.n; ++i) s += cols[a][i] * cols[b][i];
                p.gram[a][b] = s;
            }
            double s = 0.0;
            for (int i = 0; i < ds.n; ++i) s += cols[a][i] * yc[i];
            p.q[a] = s;
        }
        return p;
    }

    // b = (b1) or (b1, b2, b12)
    double objective(const std::array<double, 3>& b) const {
        double quad = yy;
        for (int a = 0; a < k; ++a) {
            quad -= 2.0 * q[a] * b[a];
            for (int c = 0; c < k; ++c) quad += b[a] * gram[a][c] * b[c];
        }
        double obj = 0.5 * quad;
        if (m == 1) {
            obj += nl2 * std::fabs(b[0]);
        } else {
            obj += nl2 * std::sqrt(b[0] * b[0] + b[2] * b[2]); // group of x1
            obj += nl2 * std::sqrt(b[1] * b[1] + b[2] * b[2]); // group of x2
            obj += nl1 * std::fabs(b[2]);
        }
        return obj;
    }
};

// Shrinking-box grid search: rounds of a 21^k lattice centered on the
// incumbent. Returns the best objective value found.
inline double small_gresh_grid_min(const SmallGreshProblem& p, double initial_halfwidth, int rounds) {
    std::array<double, 3> center{0.0, 0.0, 0.0};
    double best = p.objective(center);
    std::array<double, 3> best_b = center;
    double h = initial_halfwidth;
    const int g = 10; // lattice is -g..g per axis
    for (int round = 0; round < rounds; ++round) {
        const double step = h / g;
        std::array<double, 3> b{0.0, 0.0, 0.0};
        const int lim1 = g, lim2 = p.k > 1 ? g : 0, lim3 = p.k > 2 ? g : 0;
        for (int i1 = -lim1; i1 <= lim1; ++i1) {
            b[0] = center[0] + i1 * step;
            for (int i2 = -lim2; i2 <= lim2; ++i2) {
                b[1] = center[1] + i2 * step;
                for (int i3 = -lim3; i3 <= lim3; ++i3) {
                    b[2] = center[2] + i3 * step;
                    const double v = p.objective(b);
                    if (v < best) {
                        best = v;
                        best_b = b;
                    }
                }
            }
        }
        center = best_b;
        h *= 0.25;
    }
    return best;
}

// Exhaustive-submodel selection: every subset of the candidate effect
// columns is fit by OLS (intercept always included) and scored by
// -2 loglik + kappa * df with df = |subset| + 1. Returns the best subset
// as a bitmask; ties go to the earlier mask.
struct SubmodelSearch {
    int n = 0;
    int k = 0;                  // candidate effect count (<= 24)
    std::vector<double> gram;   // (k+1) x (k+1), col 0 = intercept
    std::vector<double> q;      // (k+1)
    double yy = 0.0;

    static SubmodelSearch build(std::span<const double* const> cols, int n, std::span<const double> y) {
        SubmodelSearch s;
        s.n = n;
        s.k = static_cast<int>(cols.size());
        const int kk = s.k + 1;
        s.gram.assign(static_cast<std::size_t>(kk) * kk, 0.0);
        s.q.assign(kk, 0.0);
        auto col = [&](int c, int i) { return c == 0 ? 1.0 : cols[c - 1][i]; };
        for (int a = 0; a < kk; ++a) {
            for (int b = a; b < kk; ++b) {
                double v = 0.0;
                for (int i = 0; i < n; ++i) v += col(a, i) * col(b, i);
                s.gram[static_cast<std::size_t>(a) * kk + b] = v;
                s.gram[static_cast<std::size_t>(b) * kk + a] = v;
            }
            double v = 0.0;
            for (int i = 0; i < n; ++i) v += col(a, i) * y[i];
            s.q[a] = v;
        }
        for (int i = 0; i < n; ++i) s.yy += y[i] * y[i];
        return s;
    }

    struct Scratch {
        std::vector<int> idx;
        std::vector<double> a, b, sol;
        explicit Scratch(int k) : idx(k + 1), a((k + 1) * (k + 1)), b(k + 1), sol(k + 1) {}
    };

    double gic_of(std::uint32_t mask, double kappa, Scratch& s) const {
        const int kk = k + 1;
        int sz = 0;
        s.idx[sz++] = 0;
        for (int c = 0; c < k; ++c)
            if (mask & (1u << c)) s.idx[sz++] = c + 1;
        for (int i = 0; i < sz; ++i) {
            for (int j = 0; j < sz; ++j)
                s.a[static_cast<std::size_t>(i) * sz + j] = gram[static_cast<std::size_t>(s.idx[i]) * kk + s.idx[j]];
            s.b[i] = q[s.idx[i]];
        }
        std::copy(s.b.begin(), s.b.begin() + sz, s.sol.begin());
        if (!chol_solve_prefix(s.a, sz, s.sol)) return std::numeric_limits<double>::infinity();
        double rss = yy;
        for (int i = 0; i < sz; ++i) rss -= s.sol[i] * s.b[i];
        const double sigma2 = std::max(rss / n, 1e-12);
        const double loglik = -0.5 * n * (1.0 + std::log(2.0 * 3.14159265358979323846)) - 0.5 * n * std::log(sigma2);
        return -2.0 * loglik + kappa * sz;
    }

    double gic_of(std::uint32_t mask, double kappa) const {
        Scratch s(k);
        return gic_of(mask, kappa, s);
    }

    std::uint32_t best_mask(double kappa) const {
        Scratch s(k);
        std::uint32_t best = 0;
        double best_gic = gic_of(0, kappa, s);
        const std::uint32_t limit = 1u << k;
        for (std::uint32_t mask = 1; mask < limit; ++mask) {
            const double gic = gic_of(mask, kappa, s);
            if (gic < best_gic) {
                best_gic = gic;
                best = mask;
            }
        }
        return best;
    }

  private:
    // Cholesky solve on the leading sz x sz block stored with stride sz.
    static bool chol_solve_prefix(std::vector<double>& a, int sz, std::vector<double>& b) {
        for (int j = 0; j < sz; ++j) {
            double d = a[static_cast<std::size_t>(j) * sz + j];
            for (int t = 0; t < j; ++t) {
                const double l = a[static_cast<std::size_t>(j) * sz + t];
                d -= l * l;
            }
            if (!(d > 0.0)) return false;
            const double lj = std::sqrt(d);
            a[static_cast<std::size_t>(j) * sz + j] = lj;
            for (int i = j + 1; i < sz; ++i) {
                double v = a[static_cast<std::size_t>(i) * sz + j];
                for (int t = 0; t < j; ++t)
                    v -= a[static_cast<std::size_t>(i) * sz + t] * a[static_cast<std::size_t>(j) * sz + t];
                a[static_cast<std::size_t>(i) * sz + j] = v / lj;
            }
        }
        for (int i = 0; i < sz; ++i) {
            double v = b[i];
            for (int t = 0; t < i; ++t) v -= a[static_cast<std::size_t>(i) * sz + t] * b[t];
            b[i] = v / a[static_cast<std::size_t>(i) * sz + i];
        }
        for (int i = sz - 1; i >= 0; --i) {
            double v = b[i];
            for (int t = i + 1; t < sz; ++t) v -= a[static_cast<std::size_t>(t) * sz + i] * b[t];
            b[i] = v / a[static_cast<std::size_t>(i) * sz + i];
        }
        return true;
    }
};

} // namespace oracles
