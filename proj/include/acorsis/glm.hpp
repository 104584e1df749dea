#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "acorsis/errors.hpp"
#include "acorsis/linalg.hpp"

namespace acorsis {

inline double sigmoid(double eta) {
    if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
    const double e = std::exp(eta);
    return e / (1.0 + e);
}

inline double clip_probability(double p) {
    if (p < 1e-12) return 1e-12;
    if (p > 1.0 - 1e-12) return 1.0 - 1e-12;
    return p;
}

/// -2 * binomial loglikelihood at the given probabilities (clipped).
inline double binomial_deviance(std::span<const double> y, std::span<const double> prob) {
    double dev = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double pi = clip_probability(prob[i]);
        dev -= 2.0 * (y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi));
    }
    return dev;
}

inline double binomial_null_deviance(std::span<const double> y) {
    double sum = 0.0;
    for (double v : y) sum += v;
    const double p = clip_probability(sum / static_cast<double>(y.size()));
    double dev = 0.0;
    for (double v : y) dev -= 2.0 * (v * std::log(p) + (1.0 - v) * std::log(1.0 - p));
    return dev;
}

struct IrlsOptions {
    int max_iter = 50;
    double tol = 1e-8;   // absolute deviance-change threshold
    double ridge = 0.0;  // added to the normal-equation diagonal (not the intercept)
};

struct LogisticFit {
    std::vector<double> beta; // beta[0] intercept, beta[1..] aligned with cols
    double deviance = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    bool separated = false;
    int iterations = 0;
};

/// Logistic regression by iteratively reweighted least squares with an
/// implicit intercept. Step-halving when a step raises the deviance;
/// |eta| > 30 anywhere flags separation and stops. The normal equations are
/// solved by Cholesky; a failed factorization retries once with a 1e-6 ridge.
inline LogisticFit logistic_irls(std::span<const double* const> cols, int n, std::span<const double> y,
                                 const IrlsOptions& opt = {}) {
    const int k = 1 + static_cast<int>(cols.size());
    LogisticFit fit;
    fit.beta.assign(k, 0.0);

    std::vector<double> eta(n, 0.0), prob(n, 0.0), weight(n, 0.0), work(n, 0.0);
    std::vector<double> xtwx(static_cast<std::size_t>(k) * k), xtwz(k), step(k);

    auto column = [&](int c, int i) -> double { return c == 0 ? 1.0 : cols[c - 1][i]; };
    auto compute_eta = [&](const std::vector<double>& b) {
        for (int i = 0; i < n; ++i) {
            double e = b[0];
            for (int c = 1; c < k; ++c) e += b[c] * cols[c - 1][i];
            eta[i] = e;
        }
    };
    auto deviance_at = [&]() {
        for (int i = 0; i < n; ++i) prob[i] = sigmoid(eta[i]);
        return binomial_deviance(y, prob);
    };

    compute_eta(fit.beta);
    double dev = deviance_at();

    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        fit.iterations = iter;
        for (int i = 0; i < n; ++i) {
            const double pi = prob[i];
            double w = pi * (1.0 - pi);
            if (w < 1e-10) w = 1e-10;
            weight[i] = w;
            work[i] = eta[i] + (y[i] - pi) / w;
        }
        for (int a = 0; a < k; ++a) {
            for (int b = a; b < k; ++b) {
                double s = 0.0;
                for (int i = 0; i < n; ++i) s += weight[i] * column(a, i) * column(b, i);
                xtwx[static_cast<std::size_t>(a) * k + b] = s;
                xtwx[static_cast<std::size_t>(b) * k + a] = s;
            }
            double s = 0.0;
            for (int i = 0; i < n; ++i) s += weight[i] * column(a, i) * work[i];
            xtwz[a] = s;
        }
        for (int c = 1; c < k; ++c) xtwx[static_cast<std::size_t>(c) * k + c] += opt.ridge;

        step = xtwz;
        std::vector<double> a_copy = xtwx;
        if (!detail::cholesky_solve(a_copy, k, step)) {
            a_copy = xtwx;
            for (int c = 0; c < k; ++c) a_copy[static_cast<std::size_t>(c) * k + c] += 1e-6;
            if (!detail::cholesky_solve(a_copy, k, step)) {
                fit.deviance = dev;
                return fit; // singular even with ridge; report nonconvergence
            }
        }

        const std::vector<double> beta_old = fit.beta;
        const double dev_old = dev;
        fit.beta = step;
        compute_eta(fit.beta);
        dev = deviance_at();
        int halvings = 0;
        while (dev > dev_old + 1e-8 && halvings < 30) {
            for (int c = 0; c < k; ++c) fit.beta[c] = 0.5 * (fit.beta[c] + beta_old[c]);
            compute_eta(fit.beta);
            dev = deviance_at();
            ++halvings;
        }
        if (dev > dev_old + 1e-8) {
            fit.beta = beta_old;
            compute_eta(fit.beta);
            dev = deviance_at();
            fit.deviance = dev;
            return fit; // no descent direction left
        }

        double max_eta = 0.0;
        for (int i = 0; i < n; ++i) max_eta = std::max(max_eta, std::fabs(eta[i]));
        if (max_eta > 30.0) {
            fit.separated = true;
            fit.converged = true;
            fit.deviance = dev;
            return fit;
        }
        if (std::fabs(dev_old - dev) < opt.tol) {
            fit.converged = true;
            fit.deviance = dev;
            return fit;
        }
    }
    fit.deviance = dev;
    return fit;
}

} // namespace acorsis
