#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "data.hpp"

namespace varaudit {

struct LogisticParams {
    std::size_t max_iters = 500;
    double tolerance = 1e-6;  // on the max-abs gradient of the objective
    double l2 = 1.0;          // 1/C in scikit-learn's convention; intercept is not penalized

    friend bool operator==(const LogisticParams&, const LogisticParams&) = default;
};

struct LogisticModel {
    std::vector<double> weights;
    double intercept = 0.0;
    std::size_t iterations = 0;
    bool converged = false;
    // Objective value before the first step and after every accepted step.
    std::vector<double> loss_trace;

    double decision(std::span<const double> x) const noexcept {
        double z = intercept;
        for (std::size_t j = 0; j < weights.size(); ++j) z += weights[j] * x[j];
        return z;
    }

    double predict_proba(std::span<const double> x) const noexcept {
        const double z = decision(x);
        return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    }

    friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

namespace detail {

// log(1 + e^z) without overflow.
inline double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

// In-place Cholesky solve of the SPD system a x = b (a is k x k row-major).
// Returns false if a is not numerically positive definite.
inline bool cholesky_solve(std::vector<double> a, std::vector<double>& b, std::size_t k) {
    for (std::size_t j = 0; j < k; ++j) {
        double d = a[j * k + j];
        for (std::size_t p = 0; p < j; ++p) d -= a[j * k + p] * a[j * k + p];
        if (!(d > 0.0)) return false;
        d = std::sqrt(d);
        a[j * k + j] = d;
        for (std::size_t i = j + 1; i < k; ++i) {
            double s = a[i * k + j];
            for (std::size_t p = 0; p < j; ++p) s -= a[i * k + p] * a[j * k + p];
            a[i * k + j] = s / d;
        }
    }
    for (std::size_t i = 0; i < k; ++i) {
        double s = b[i];
        for (std::size_t p = 0; p < i; ++p) s -= a[i * k + p] * b[p];
        b[i] = s / a[i * k + i];
    }
    for (std::size_t i = k; i-- > 0;) {
        double s = b[i];
        for (std::size_t p = i + 1; p < k; ++p) s -= a[p * k + i] * b[p];
        b[i] = s / a[i * k + i];
    }
    return true;
}

}  // namespace detail

// Penalized log-loss  sum_i softplus(z_i) - y_i z_i + (l2/2)|w|^2  minimized by
// damped Newton steps with Armijo backtracking. Every accepted step lowers the
// objective, so loss_trace is non-increasing.
inline LogisticModel fit_logistic(const TabularDataset& train, const LogisticParams& params) {
    const std::size_t n = train.size();
    const std::size_t m = train.num_features();
    const std::size_t k = m + 1;  // parameter vector: weights then intercept

    std::vector<double> theta(k, 0.0);

    auto objective = [&](const std::vector<double>& th) {
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            auto x = train.row(i);
            double zi = th[m];
            for (std::size_t j = 0; j < m; ++j) zi += th[j] * x[j];
            loss += detail::softplus(zi) - (train.label(i) ? zi : 0.0);
        }
        double reg = 0.0;
        for (std::size_t j = 0; j < m; ++j) reg += th[j] * th[j];
        return loss + 0.5 * params.l2 * reg;
    };

    LogisticModel model;
    double current = objective(theta);
    model.loss_trace.push_back(current);

    std::vector<double> grad(k), hess(k * k);
    for (std::size_t iter = 0; iter < params.max_iters; ++iter) {
        std::fill(grad.begin(), grad.end(), 0.0);
        std::fill(hess.begin(), hess.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto x = train.row(i);
            double zi = theta[m];
            for (std::size_t j = 0; j < m; ++j) zi += theta[j] * x[j];
            const double pi = zi >= 0.0 ? 1.0 / (1.0 + std::exp(-zi)) : std::exp(zi) / (1.0 + std::exp(zi));
            const double r = pi - train.label(i);
            const double w = pi * (1.0 - pi);
            for (std::size_t a = 0; a < m; ++a) {
                grad[a] += r * x[a];
                for (std::size_t b = 0; b <= a; ++b) hess[a * k + b] += w * x[a] * x[b];
                hess[m * k + a] += w * x[a];
            }
            grad[m] += r;
            hess[m * k + m] += w;
        }
        for (std::size_t j = 0; j < m; ++j) {
            grad[j] += params.l2 * theta[j];
            hess[j * k + j] += params.l2;
        }
        for (std::size_t a = 0; a < k; ++a)
            for (std::size_t b = a + 1; b < k; ++b) hess[a * k + b] = hess[b * k + a];

        double gmax = 0.0;
        for (double g : grad) gmax = std::max(gmax, std::abs(g));
        if (gmax <= params.tolerance) {
            model.converged = true;
            break;
        }

        // Newton direction; fall back to increasing ridge, then to the gradient.
        std::vector<double> step = grad;
        bool solved = detail::cholesky_solve(hess, step, k);
        for (double ridge = 1e-8; !solved && ridge <= 1e4; ridge *= 100.0) {
            std::vector<double> h = hess;
            for (std::size_t j = 0; j < k; ++j) h[j * k + j] += ridge;
            step = grad;
            solved = detail::cholesky_solve(std::move(h), step, k);
        }
        if (!solved) step = grad;

        double slope = 0.0;
        for (std::size_t j = 0; j < k; ++j) slope += grad[j] * step[j];

        bool accepted = false;
        std::vector<double> trial(k);
        for (double t = 1.0; t >= 1e-10; t *= 0.5) {
            for (std::size_t j = 0; j < k; ++j) trial[j] = theta[j] - t * step[j];
            const double value = objective(trial);
            if (value <= current - 1e-4 * t * slope) {
                theta = trial;
                current = value;
                accepted = true;
                break;
            }
        }
        model.iterations = iter + 1;
        if (!accepted) break;  // stalled: no representable decrease along the step
        model.loss_trace.push_back(current);
    }

    model.weights.assign(theta.begin(), theta.begin() + static_cast<std::ptrdiff_t>(m));
    model.intercept = theta[m];
    return model;
}

}  // namespace varaudit
