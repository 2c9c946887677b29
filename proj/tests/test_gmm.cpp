#include "patchsieve/gmm.hpp"

#include <doctest.h>

#include <random>

using namespace patchsieve;

namespace {

RowMatrixXd gaussian(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d, double sigma = 1.0) {
    std::normal_distribution<double> g(0.0, sigma);
    RowMatrixXd x(n, d);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = g(rng);
    return x;
}

bool trace_non_decreasing(const std::vector<double>& trace, double tol) {
    for (std::size_t i = 1; i < trace.size(); ++i)
        if (trace[i] < trace[i - 1] - tol) return false;
    return true;
}

}  // namespace

TEST_SUITE("gmm") {

TEST_CASE("one component is the sample mean and variance") {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 10; ++t) {
        const RowMatrixXd x = gaussian(rng, 30 + t, 4, 1.0 + t);
        const auto model = gmm_fit(x, 1, 7);
        for (Eigen::Index j = 0; j < 4; ++j) {
            long double mean = 0, var = 0;
            for (Eigen::Index i = 0; i < x.rows(); ++i) mean += x(i, j);
            mean /= x.rows();
            for (Eigen::Index i = 0; i < x.rows(); ++i) var += (x(i, j) - mean) * (x(i, j) - mean);
            var /= x.rows();
            CHECK(std::abs(model.means(0, j) - static_cast<double>(mean)) < 1e-9);
            CHECK(std::abs(model.variances(0, j) - static_cast<double>(var)) < 1e-9);
        }
        CHECK(model.weights[0] == 1.0);
    }
}

TEST_CASE("two separated 1-D blobs") {
    std::mt19937_64 rng(2);
    RowMatrixXd x = gaussian(rng, 400, 1);
    for (int i = 200; i < 400; ++i) x(i, 0) += 100.0;
    const auto model = gmm_fit(x, 2, 3);
    const double lo = std::min(model.means(0, 0), model.means(1, 0));
    const double hi = std::max(model.means(0, 0), model.means(1, 0));
    // the fitted means equal the per-blob sample means here
    const double m0 = x.topRows(200).mean(), m1 = x.bottomRows(200).mean();
    CHECK(std::abs(lo - m0) < 1e-6);
    CHECK(std::abs(hi - m1) < 1e-6);
    CHECK(std::abs(lo) < 0.5);
    CHECK(std::abs(hi - 100) < 0.5);
    CHECK(model.weights[0] == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("EM never lowers the likelihood") {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 500; ++t) {
        const Eigen::Index m = 10 + static_cast<Eigen::Index>(rng() % 60);
        const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng() % 6);
        const int k = 1 + static_cast<int>(rng() % 3);
        RowMatrixXd x = gaussian(rng, m, d);
        // a few shifted groups and some duplicated rows
        for (Eigen::Index i = 0; i < m; i += 3) x.row(i).array() += 4.0;
        if (m > 4) x.row(1) = x.row(0);
        const auto model = gmm_fit(x, k, rng());
        CHECK(trace_non_decreasing(model.log_likelihood_trace, 1e-7));
        CHECK(std::abs(model.weights.sum() - 1.0) < 1e-9);
        CHECK(model.weights.minCoeff() >= 0);
        CHECK(model.variances.minCoeff() >= GmmModel<double>::variance_floor);
    }
}

TEST_CASE("fits are deterministic per seed") {
    std::mt19937_64 rng(4);
    const RowMatrixXd x = gaussian(rng, 60, 3);
    const auto a = gmm_fit(x, 3, 99), b = gmm_fit(x, 3, 99);
    CHECK(a.means == b.means);
    CHECK(a.variances == b.variances);
    CHECK(a.log_likelihood_trace == b.log_likelihood_trace);
}

TEST_CASE("log density matches a direct evaluation") {
    std::mt19937_64 rng(5);
    const RowMatrixXd x = gaussian(rng, 50, 3);
    const auto model = gmm_fit(x, 2, 6);
    const Eigen::VectorXd got = gmm_log_density(model, x);
    const long double pi = 3.141592653589793238462643383279502884L;
    long double total = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        long double p = 0;
        for (Eigen::Index k = 0; k < model.components(); ++k) {
            long double term = model.weights[k];
            for (Eigen::Index j = 0; j < x.cols(); ++j) {
                const long double v = model.variances(k, j), t = x(i, j) - model.means(k, j);
                term *= std::exp(-t * t / (2 * v)) / std::sqrt(2 * pi * v);
            }
            p += term;
        }
        CHECK(got[i] == doctest::Approx(static_cast<double>(std::log(p))).epsilon(1e-12));
        total += std::log(p);
    }
    // parameters belong to the last trace entry
    CHECK(model.log_likelihood_trace.back() == doctest::Approx(static_cast<double>(total)).epsilon(1e-10));
}

TEST_CASE("constant data hits the variance floor") {
    RowMatrixXd x = RowMatrixXd::Constant(12, 2, 3.0);
    const auto model = gmm_fit(x, 2, 1);
    CHECK(model.variances.minCoeff() >= GmmModel<double>::variance_floor);
    CHECK(std::isfinite(model.log_likelihood_trace.back()));
}

TEST_CASE("errors") {
    CHECK_THROWS_AS(gmm_fit(RowMatrixXd::Zero(2, 2), 3, 0), InputError);
    RowMatrixXd bad = RowMatrixXd::Zero(5, 2);
    bad(2, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(gmm_fit(bad, 1, 0), InputError);
}

}
