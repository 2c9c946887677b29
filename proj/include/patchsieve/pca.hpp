#pragma once

#include "patchsieve/common.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace patchsieve {

/// Principal subspace of a training matrix.
template <typename Scalar>
struct PcaModel {
    Vector<Scalar> mean;                  // d
    RowMatrix<Scalar> components;         // k×d, orthonormal rows
    Vector<Scalar> explained_variance;    // k, non-increasing
    Scalar total_variance = 0;
    Scalar retained_fraction = 1;

    Eigen::Index input_dim() const { return mean.size(); }
    Eigen::Index output_dim() const { return components.rows(); }
};

/// Dense route used by pca_fit for the given shape: the d×d covariance when
/// it is the smaller problem, otherwise the n×n Gram matrix.
inline bool pca_uses_covariance_route(Eigen::Index n, Eigen::Index d) { return d <= 4096 && n > d; }

namespace detail {

template <typename Scalar>
void canonical_signs(RowMatrix<Scalar>& components) {
    for (Eigen::Index r = 0; r < components.rows(); ++r) {
        Eigen::Index arg = 0;
        components.row(r).cwiseAbs().maxCoeff(&arg);
        if (components(r, arg) < 0) components.row(r) *= Scalar(-1);
    }
}

}  // namespace detail

/// Fits the smallest leading principal subspace whose eigenvalues (sample
/// covariance, divisor n-1) cover `retained_fraction` of the total variance.
/// Component signs are fixed so that each row's largest-magnitude entry is
/// positive.
template <typename Derived>
PcaModel<typename Derived::Scalar> pca_fit(const Eigen::MatrixBase<Derived>& features,
                                           typename Derived::Scalar retained_fraction) {
    using Scalar = typename Derived::Scalar;
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < 2) throw UsageError("pca_fit needs at least two rows");
    if (d < 1) throw UsageError("pca_fit needs at least one column");
    if (!(retained_fraction > 0 && retained_fraction <= 1))
        throw UsageError("pca retained_fraction must lie in (0, 1]");
    if (!features.allFinite()) throw InputError("pca_fit: features contain non-finite values");

    PcaModel<Scalar> model;
    model.retained_fraction = retained_fraction;
    model.mean = features.colwise().mean().transpose();
    const Matrix centered = features.rowwise() - model.mean.transpose();
    const Scalar denom = Scalar(n - 1);
    model.total_variance = centered.squaredNorm() / denom;

    const Scalar scale = std::max(Scalar(1), model.mean.squaredNorm() / Scalar(d));
    if (!(model.total_variance > Scalar(1e-24) * scale))
        throw NumericalError("pca_fit: total variance is zero (all rows identical)");

    Vector<Scalar> eigenvalues;
    Matrix eigenvectors;  // columns, in the input space
    if (pca_uses_covariance_route(n, d)) {
        const Matrix cov = (centered.transpose() * centered) / denom;
        Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
        if (solver.info() != Eigen::Success) throw NumericalError("pca_fit: eigendecomposition failed");
        eigenvalues = solver.eigenvalues().reverse();
        eigenvectors = solver.eigenvectors().rowwise().reverse();
    } else {
        const Matrix gram = (centered * centered.transpose()) / denom;
        Eigen::SelfAdjointEigenSolver<Matrix> solver(gram);
        if (solver.info() != Eigen::Success) throw NumericalError("pca_fit: eigendecomposition failed");
        eigenvalues = solver.eigenvalues().reverse();
        const Matrix u = solver.eigenvectors().rowwise().reverse();
        eigenvectors.resize(d, u.cols());
        for (Eigen::Index i = 0; i < u.cols(); ++i) {
            const Scalar lambda = std::max(eigenvalues[i], Scalar(0));
            if (lambda > 0)
                eigenvectors.col(i) = centered.transpose() * u.col(i) / std::sqrt(denom * lambda);
            else
                eigenvectors.col(i).setZero();
        }
    }
    eigenvalues = eigenvalues.cwiseMax(Scalar(0));

    // Directions below this level are numerical noise of a rank-deficient input.
    const Scalar noise = eigenvalues[0] * Scalar(std::max(n, d)) * std::numeric_limits<Scalar>::epsilon() * 16;
    Eigen::Index rank = 0;
    while (rank < eigenvalues.size() && eigenvalues[rank] > noise) ++rank;

    const Scalar target = retained_fraction * model.total_variance * (Scalar(1) - Scalar(1e-12));
    Eigen::Index k = rank;
    Scalar cumulative = 0;
    for (Eigen::Index i = 0; i < rank; ++i) {
        cumulative += eigenvalues[i];
        if (cumulative >= target) {
            k = i + 1;
            break;
        }
    }
    k = std::max<Eigen::Index>(k, 1);

    model.explained_variance = eigenvalues.head(k);
    model.components = eigenvectors.leftCols(k).transpose();
    detail::canonical_signs(model.components);
    return model;
}

/// Coordinates of (x - mean) in the retained subspace, one row per input row.
template <typename Scalar, typename Derived>
RowMatrix<Scalar> pca_transform(const PcaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& features) {
    if (features.cols() != model.input_dim())
        throw InputError("pca_transform: expected " + std::to_string(model.input_dim()) + " columns, got " +
                         std::to_string(features.cols()));
    return (features.template cast<Scalar>().rowwise() - model.mean.transpose()) * model.components.transpose();
}

template <typename Scalar, typename Derived>
RowMatrix<Scalar> pca_reconstruct(const PcaModel<Scalar>& model, const Eigen::MatrixBase<Derived>& coords) {
    if (coords.cols() != model.output_dim()) throw InputError("pca_reconstruct: coordinate dimension mismatch");
    return (coords.template cast<Scalar>() * model.components).rowwise() + model.mean.transpose();
}

/// Model persistence as JSON with round-trip float precision.
std::string pca_to_json(const PcaModel<double>& model);
PcaModel<double> pca_from_json(const std::string& text);

}  // namespace patchsieve
