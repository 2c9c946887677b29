#pragma once

#include "patchsieve/common.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

namespace patchsieve {

/// Mixture of axis-aligned Gaussians.
template <typename Scalar>
struct GmmModel {
    Vector<Scalar> weights;         // K, sums to 1
    RowMatrix<Scalar> means;        // K×d
    RowMatrix<Scalar> variances;    // K×d, every entry >= variance_floor
    std::vector<double> log_likelihood_trace;  // total log-likelihood per E-step
    int iterations = 0;             // M-steps performed
    bool converged = false;

    static constexpr double variance_floor = 1e-6;

    Eigen::Index components() const { return weights.size(); }
    Eigen::Index dim() const { return means.cols(); }
};

struct GmmOptions {
    int max_iter = 200;
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    double tol = 1e-5;
};

namespace detail {

template <typename Scalar>
Scalar log_sum_exp(const Vector<Scalar>& v) {
    const Scalar top = v.maxCoeff();
    if (!std::isfinite(top)) return top;
    return top + std::log((v.array() - top).exp().sum());
}

/// Row i, column k: log(w_k) + log N(x_i | mean_k, diag(var_k)).
template <typename Scalar, typename Derived>
RowMatrix<Scalar> weighted_log_densities(const GmmModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
    const Eigen::Index k = model.components();
    const Eigen::Index d = model.dim();
    RowMatrix<Scalar> out(x.rows(), k);
    const Scalar log_two_pi = std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
    for (Eigen::Index c = 0; c < k; ++c) {
        const Scalar log_w = model.weights[c] > 0 ? std::log(model.weights[c]) : -std::numeric_limits<Scalar>::infinity();
        const auto var = model.variances.row(c).array();
        const Scalar log_norm = Scalar(-0.5) * (Scalar(d) * log_two_pi + var.log().sum());
        const auto inv_var = var.inverse().eval();
        for (Eigen::Index i = 0; i < x.rows(); ++i) {
            const Scalar quad = ((x.row(i).array() - model.means.row(c).array()).square() * inv_var).sum();
            out(i, c) = log_w + log_norm - Scalar(0.5) * quad;
        }
    }
    return out;
}

}  // namespace detail

/// Log of the mixture density at every row of `x`.
template <typename Scalar, typename Derived>
Vector<Scalar> gmm_log_density(const GmmModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
    if (x.cols() != model.dim()) throw InputError("gmm_log_density: dimension mismatch");
    const auto table = detail::weighted_log_densities(model, x);
    Vector<Scalar> out(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) out[i] = detail::log_sum_exp<Scalar>(table.row(i).transpose());
    return out;
}

/// EM for a diagonal-covariance mixture. Means start at data rows picked by
/// seeded k-means++ (D²-weighted) sampling, weights uniform, variances at the
/// per-dimension data variance. Variances are floored at 1e-6 inside the
/// M-step, which keeps every iteration a constrained maximization so the
/// likelihood trace never decreases.
template <typename Derived>
GmmModel<typename Derived::Scalar> gmm_fit(const Eigen::MatrixBase<Derived>& features, int components,
                                           std::uint64_t seed, const GmmOptions& options = {}) {
    using Scalar = typename Derived::Scalar;
    const Eigen::Index m = features.rows();
    const Eigen::Index d = features.cols();
    if (components < 1) throw UsageError("gmm_fit: need at least one component");
    if (m < components)
        throw InputError("gmm_fit: " + std::to_string(m) + " rows cannot support " + std::to_string(components) +
                         " components");
    if (d < 1) throw InputError("gmm_fit: zero-dimensional features");
    if (!features.allFinite()) throw InputError("gmm_fit: features contain non-finite values");

    const auto floor = static_cast<Scalar>(GmmModel<Scalar>::variance_floor);
    const Eigen::Index k = components;
    GmmModel<Scalar> model;

    std::mt19937_64 rng(seed);
    model.means.resize(k, d);
    Vector<Scalar> nearest = Vector<Scalar>::Constant(m, std::numeric_limits<Scalar>::infinity());
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::Index pick = 0;
        const Scalar total = c == 0 ? Scalar(0) : nearest.sum();
        if (c == 0 || !(total > 0)) {
            pick = static_cast<Eigen::Index>(bounded(rng, static_cast<std::uint64_t>(m)));
        } else {
            const Scalar target = static_cast<Scalar>(unit_uniform(rng)) * total;
            Scalar running = 0;
            pick = m - 1;
            for (Eigen::Index i = 0; i < m; ++i) {
                running += nearest[i];
                if (running > target && nearest[i] > 0) {
                    pick = i;
                    break;
                }
            }
        }
        model.means.row(c) = features.row(pick);
        for (Eigen::Index i = 0; i < m; ++i)
            nearest[i] = std::min(nearest[i], (features.row(i) - model.means.row(c)).squaredNorm());
    }

    const Vector<Scalar> mean = features.colwise().mean().transpose();
    const Vector<Scalar> spread =
        ((features.rowwise() - mean.transpose()).array().square().colwise().sum() / Scalar(m)).matrix().transpose();
    model.weights = Vector<Scalar>::Constant(k, Scalar(1) / Scalar(k));
    model.variances = spread.cwiseMax(floor).transpose().replicate(k, 1);

    RowMatrix<Scalar> resp(m, k);
    double previous = -std::numeric_limits<double>::infinity();
    for (int iter = 0;; ++iter) {
        // E-step
        const auto table = detail::weighted_log_densities(model, features);
        double log_likelihood = 0;
        for (Eigen::Index i = 0; i < m; ++i) {
            const Scalar lse = detail::log_sum_exp<Scalar>(table.row(i).transpose());
            resp.row(i) = (table.row(i).array() - lse).exp();
            log_likelihood += static_cast<double>(lse);
        }
        model.log_likelihood_trace.push_back(log_likelihood);
        if (!std::isfinite(log_likelihood)) throw NumericalError("gmm_fit: log-likelihood is not finite");
        if (iter > 0 && (log_likelihood - previous) / static_cast<double>(m) < options.tol) {
            model.converged = true;
            break;
        }
        if (iter == options.max_iter) break;
        previous = log_likelihood;

        // M-step
        const Vector<Scalar> mass = resp.colwise().sum().transpose();
        for (Eigen::Index c = 0; c < k; ++c) {
            if (!(mass[c] > 0)) {
                model.weights[c] = 0;
                continue;
            }
            model.weights[c] = mass[c] / Scalar(m);
            model.means.row(c) = (resp.col(c).transpose() * features) / mass[c];
            const auto centered = (features.rowwise() - model.means.row(c)).array().square().matrix();
            model.variances.row(c) = ((resp.col(c).transpose() * centered) / mass[c]).cwiseMax(floor);
        }
        model.weights /= model.weights.sum();
        model.iterations = iter + 1;
    }
    return model;
}

}  // namespace patchsieve
