#include "patchsieve/pca.hpp"

#include <doctest.h>

#include <random>

using namespace patchsieve;

namespace {

RowMatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d) {
    std::normal_distribution<double> g;
    RowMatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    // uneven scales so the spectrum is not flat
    for (Eigen::Index j = 0; j < d; ++j) x.col(j) *= 1.0 + 0.3 * static_cast<double>(j);
    return x;
}

// Cyclic Jacobi eigensolver for a symmetric matrix; returns eigenvalues in
// descending order with matching eigenvector columns.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> jacobi(Eigen::MatrixXd a) {
    const Eigen::Index n = a.rows();
    Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (Eigen::Index p = 0; p < n; ++p)
            for (Eigen::Index q = p + 1; q < n; ++q) {
                if (std::abs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1));
                const double c = 1 / std::sqrt(t * t + 1), s = t * c;
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) > a(y, y); });
    Eigen::VectorXd values(n);
    Eigen::MatrixXd vectors(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        values[i] = a(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(i)]);
        vectors.col(i) = v.col(order[static_cast<std::size_t>(i)]);
    }
    return {values, vectors};
}

Eigen::MatrixXd sample_covariance(const RowMatrixXd& x) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(x.cols(), x.cols());
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) mean += x.row(i).transpose();
    mean /= static_cast<double>(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const Eigen::VectorXd t = x.row(i).transpose() - mean;
        c += t * t.transpose();
    }
    return c / static_cast<double>(x.rows() - 1);
}

void check_against_oracle(const RowMatrixXd& x, double fraction) {
    const auto model = pca_fit(x, fraction);
    const auto [values, vectors] = jacobi(sample_covariance(x));
    const double total = values.sum();
    CHECK(model.total_variance == doctest::Approx(total).epsilon(1e-10));

    // smallest k whose prefix reaches the target
    Eigen::Index k = 0;
    double acc = 0;
    while (acc < fraction * total * (1 - 1e-12)) acc += values[k++];
    REQUIRE(model.output_dim() == k);
    for (Eigen::Index i = 0; i < k; ++i) {
        CHECK(model.explained_variance[i] == doctest::Approx(values[i]).epsilon(1e-8));
        // same direction up to sign
        CHECK(std::abs(model.components.row(i).dot(vectors.col(i))) == doctest::Approx(1.0).epsilon(1e-8));
    }

    // mean squared reconstruction residual equals the discarded spectrum
    const RowMatrixXd coords = pca_transform(model, x);
    const RowMatrixXd back = pca_reconstruct(model, coords);
    const double residual = (x - back).squaredNorm() / static_cast<double>(x.rows() - 1);
    CHECK(residual == doctest::Approx(values.tail(values.size() - k).sum()).epsilon(1e-8));
}

}  // namespace

TEST_SUITE("pca") {

TEST_CASE("points on a line need one component") {
    RowMatrixXd x(20, 2);
    for (int i = 0; i < 20; ++i) x.row(i) << i, 3.0 - 2.0 * i;
    const auto model = pca_fit(x, 0.95);
    CHECK(model.output_dim() == 1);
    CHECK(model.explained_variance[0] == doctest::Approx(model.total_variance));
    // largest-magnitude coordinate is positive: direction (-1, 2)/sqrt(5)
    CHECK(model.components(0, 1) > 0);
    CHECK(model.components(0, 0) == doctest::Approx(-1 / std::sqrt(5.0)));
}

TEST_CASE("fraction 1.0 keeps min(n-1, d) components on both routes") {
    std::mt19937_64 rng(1);
    const RowMatrixXd tall = gaussian(rng, 30, 5);
    REQUIRE(pca_uses_covariance_route(30, 5));
    CHECK(pca_fit(tall, 1.0).output_dim() == 5);
    const RowMatrixXd wide = gaussian(rng, 6, 30);
    REQUIRE_FALSE(pca_uses_covariance_route(6, 30));
    CHECK(pca_fit(wide, 1.0).output_dim() == 5);
}

TEST_CASE("covariance route matches an independent eigensolver") {
    std::mt19937_64 rng(2);
    const RowMatrixXd x = gaussian(rng, 50, 10);
    for (double f : {0.5, 0.8, 0.95, 1.0}) check_against_oracle(x, f);
}

TEST_CASE("Gram route matches an independent eigensolver") {
    std::mt19937_64 rng(3);
    const RowMatrixXd x = gaussian(rng, 12, 20);
    REQUIRE_FALSE(pca_uses_covariance_route(12, 20));
    for (double f : {0.5, 0.9, 1.0}) check_against_oracle(x, f);
}

TEST_CASE("model invariants") {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        const Eigen::Index n = 5 + static_cast<Eigen::Index>(rng() % 60), d = 2 + static_cast<Eigen::Index>(rng() % 30);
        const RowMatrixXd x = gaussian(rng, n, d);
        const auto model = pca_fit(x, 0.9);
        const auto k = model.output_dim();
        const Eigen::MatrixXd gram = model.components * model.components.transpose();
        CHECK((gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff() < 1e-6);
        for (Eigen::Index i = 1; i < k; ++i) CHECK(model.explained_variance[i] <= model.explained_variance[i - 1]);
        CHECK(model.explained_variance.sum() / model.total_variance >= 0.9 * (1 - 1e-12));
        CHECK(model.explained_variance.sum() <= model.total_variance * (1 + 1e-12));
        for (Eigen::Index i = 0; i < k; ++i) {
            Eigen::Index arg;
            model.components.row(i).cwiseAbs().maxCoeff(&arg);
            CHECK(model.components(i, arg) > 0);
        }
        const RowMatrixXd coords = pca_transform(model, x);
        CHECK(coords.colwise().mean().cwiseAbs().maxCoeff() < 1e-6);
        const RowMatrixXd mean_row = model.mean.transpose();
        CHECK(pca_transform(model, mean_row).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("distances are preserved on rank-k data") {
    std::mt19937_64 rng(5);
    const RowMatrixXd basis = gaussian(rng, 3, 12);
    const RowMatrixXd coeff = gaussian(rng, 40, 3);
    const RowMatrixXd x = coeff * basis;
    const auto model = pca_fit(x, 1.0);
    CHECK(model.output_dim() == 3);
    const RowMatrixXd y = pca_transform(model, x);
    for (int i = 0; i < 40; ++i)
        for (int j = i + 1; j < 40; j += 7)
            CHECK((y.row(i) - y.row(j)).norm() == doctest::Approx((x.row(i) - x.row(j)).norm()).epsilon(1e-9));
}

TEST_CASE("full-rank 200x50 keeps the variance target and reconstructs exactly") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 5; ++t) {
        const RowMatrixXd x = gaussian(rng, 200, 50);
        const auto model = pca_fit(x, 0.95);
        CHECK(model.explained_variance.sum() >= 0.95 * model.total_variance * (1 - 1e-12));
        const auto all = pca_fit(x, 1.0);
        CHECK(all.output_dim() == 50);
        CHECK((pca_reconstruct(all, pca_transform(all, x)) - x).cwiseAbs().maxCoeff() < 1e-6);
    }
}

TEST_CASE("float instantiation") {
    std::mt19937_64 rng(7);
    const RowMatrixXf x = gaussian(rng, 40, 6).cast<float>();
    const auto model = pca_fit(x, 1.0);
    CHECK(model.output_dim() == 6);
    CHECK((pca_reconstruct(model, pca_transform(model, x)) - x).cwiseAbs().maxCoeff() < 1e-4f);
}

TEST_CASE("JSON round trip") {
    std::mt19937_64 rng(8);
    const auto model = pca_fit(gaussian(rng, 30, 7), 0.9);
    const auto back = pca_from_json(pca_to_json(model));
    CHECK(back.mean == model.mean);
    CHECK(back.components == model.components);
    CHECK(back.explained_variance == model.explained_variance);
    CHECK(back.total_variance == model.total_variance);
    CHECK(back.retained_fraction == model.retained_fraction);
}

TEST_CASE("errors") {
    RowMatrixXd same(5, 3);
    same.rowwise() = Eigen::RowVector3d(1, 2, 3);
    CHECK_THROWS_AS(pca_fit(same, 0.95), NumericalError);
    CHECK_THROWS_AS(pca_fit(RowMatrixXd::Zero(1, 3), 0.95), UsageError);
    std::mt19937_64 rng(9);
    const RowMatrixXd x = gaussian(rng, 10, 3);
    CHECK_THROWS_AS(pca_fit(x, 0.0), UsageError);
    CHECK_THROWS_AS(pca_fit(x, 1.5), UsageError);
    const auto model = pca_fit(x, 0.9);
    CHECK_THROWS_AS(pca_transform(model, RowMatrixXd::Zero(2, 4)), InputError);
    RowMatrixXd bad = x;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(pca_fit(bad, 0.9), InputError);
}

}
