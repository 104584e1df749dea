#pragma once

#include <cmath>
#include <vector>

namespace acorsis::detail {

/// In-place Cholesky factorization of a symmetric positive definite k x k
/// matrix stored row-major; the lower triangle receives L. Returns false if
/// a non-positive pivot appears.
inline bool cholesky_factor(std::vector<double>& a, int k) {
    for (int j = 0; j < k; ++j) {
        double d = a[static_cast<std::size_t>(j) * k + j];
        for (int t = 0; t < j; ++t) {
            const double l = a[static_cast<std::size_t>(j) * k + t];
            d -= l * l;
        }
        if (!(d > 0.0)) return false;
        const double lj = std::sqrt(d);
        a[static_cast<std::size_t>(j) * k + j] = lj;
        for (int i = j + 1; i < k; ++i) {
            double s = a[static_cast<std::size_t>(i) * k + j];
            for (int t = 0; t < j; ++t)
                s -= a[static_cast<std::size_t>(i) * k + t] * a[static_cast<std::size_t>(j) * k + t];
            a[static_cast<std::size_t>(i) * k + j] = s / lj;
        }
    }
    return true;
}

/// Solve L L^T x = b given the factor from cholesky_factor; b is overwritten
/// with the solution.
inline void cholesky_solve_factored(const std::vector<double>& l, int k, std::vector<double>& b) {
    for (int i = 0; i < k; ++i) {
        double s = b[i];
        for (int t = 0; t < i; ++t) s -= l[static_cast<std::size_t>(i) * k + t] * b[t];
        b[i] = s / l[static_cast<std::size_t>(i) * k + i];
    }
    for (int i = k - 1; i >= 0; --i) {
        double s = b[i];
        for (int t = i + 1; t < k; ++t) s -= l[static_cast<std::size_t>(t) * k + i] * b[t];
        b[i] = s / l[static_cast<std::size_t>(i) * k + i];
    }
}

/// One-shot SPD solve; a and b are clobbered, the solution lands in b.
inline bool cholesky_solve(std::vector<double>& a, int k, std::vector<double>& b) {
    if (!cholesky_factor(a, k)) return false;
    cholesky_solve_factored(a, k, b);
    return true;
}

/// Replace a by its inverse (SPD input). Used for Wald standard errors.
inline bool invert_spd(std::vector<double>& a, int k) {
    std::vector<double> l = a;
    if (!cholesky_factor(l, k)) return false;
    std::vector<double> e(k, 0.0);
    for (int j = 0; j < k; ++j) {
        std::fill(e.begin(), e.end(), 0.0);
        e[j] = 1.0;
        cholesky_solve_factored(l, k, e);
        for (int i = 0; i < k; ++i) a[static_cast<std::size_t>(i) * k + j] = e[i];
    }
    return true;
}

} // namespace acorsis::detail
