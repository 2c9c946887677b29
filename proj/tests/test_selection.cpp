#include "patchsieve/gmm.hpp"
#include "patchsieve/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

using namespace patchsieve;

namespace {

ClusterMembers make_cluster(std::mt19937_64& rng, const std::string& prefix, int n, double offset) {
    std::normal_distribution<double> g;
    ClusterMembers c;
    c.features.resize(n, 3);
    for (int i = 0; i < n; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s_x%03d_y0", prefix.c_str(), i);
        c.ids.push_back(id);
        for (int j = 0; j < 3; ++j) c.features(i, j) = g(rng) + offset;
    }
    return c;
}

// Members ranked by a long-double mixture density, ties to the smaller id.
std::vector<std::string> top_by_density(const ClusterMembers& c, const GmmModel<double>& model, std::size_t q) {
    const long double pi = 3.141592653589793238462643383279502884L;
    std::vector<std::pair<long double, std::string>> scored;
    for (Eigen::Index i = 0; i < c.features.rows(); ++i) {
        long double p = 0;
        for (Eigen::Index k = 0; k < model.components(); ++k) {
            long double term = model.weights[k];
            for (Eigen::Index j = 0; j < c.features.cols(); ++j) {
                const long double v = model.variances(k, j), t = c.features(i, j) - model.means(k, j);
                term *= std::exp(-t * t / (2 * v)) / std::sqrt(2 * pi * v);
            }
            p += term;
        }
        scored.emplace_back(-std::log(p), c.ids[static_cast<std::size_t>(i)]);
    }
    std::sort(scored.begin(), scored.end());
    std::vector<std::string> out;
    for (std::size_t r = 0; r < q; ++r) out.push_back(scored[r].second);
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

TEST_SUITE("selection") {

TEST_CASE("target counts round half away from zero") {
    CHECK(target_count(0.1, 100) == 10);
    CHECK(target_count(0.15, 10) == 2);  // 1.5
    CHECK(target_count(0.5, 7) == 4);    // 3.5
    CHECK(target_count(1.0, 37) == 37);
    CHECK(target_count(0.1, 4) == 0);
}

TEST_CASE("largest-remainder apportionment") {
    CHECK(apportion({60, 40}, 50) == std::vector<std::size_t>{30, 20});
    // quotas 1.5 / 1.5: equal remainders go to the lower group
    CHECK(apportion({3, 3}, 3) == std::vector<std::size_t>{2, 1});
    CHECK(apportion({10, 0, 5}, 3) == std::vector<std::size_t>{2, 0, 1});
    std::mt19937_64 rng(1);
    for (int t = 0; t < 2000; ++t) {
        std::vector<std::size_t> sizes(1 + rng() % 12);
        for (auto& s : sizes) s = rng() % 200;
        const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
        const std::size_t total = n ? rng() % (n + 1) : 0;
        const auto q = apportion(sizes, total);
        CHECK(std::accumulate(q.begin(), q.end(), std::size_t{0}) == total);
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            CHECK(q[i] <= sizes[i]);
            // each quota is the floor or ceiling of its exact share
            const long double share = n ? static_cast<long double>(total) * sizes[i] / n : 0;
            CHECK(static_cast<long double>(q[i]) >= std::floor(share));
            CHECK(static_cast<long double>(q[i]) <= std::ceil(share));
        }
    }
}

TEST_CASE("components per cluster") {
    CHECK(components_for(1) == 1);
    CHECK(components_for(20) == 1);
    CHECK(components_for(21) == 2);
    CHECK(components_for(40) == 2);
    CHECK(components_for(41) == 3);
    CHECK(components_for(1000) == 3);
}

TEST_CASE("fraction 1.0 keeps everything") {
    std::mt19937_64 rng(2);
    std::vector<ClusterMembers> clusters{make_cluster(rng, "a", 25, 0), make_cluster(rng, "b", 7, 5)};
    const auto gmm = select_gmm("s", clusters, 1.0, 3);
    const auto rnd = select_random("s", {clusters[0].ids, clusters[1].ids}, 1.0, 3);
    CHECK(gmm.retained.size() == 32);
    CHECK(rnd.retained == gmm.retained);
}

TEST_CASE("identical points fall back to the id order") {
    ClusterMembers c;
    c.features = RowMatrixXd::Constant(10, 3, 2.5);
    for (int i = 9; i >= 0; --i) c.ids.push_back("s_x" + std::to_string(i) + "_y0");
    const auto sel = select_gmm("s", {c}, 0.5, 11);
    CHECK(sel.retained == std::vector<std::string>{"s_x0_y0", "s_x1_y0", "s_x2_y0", "s_x3_y0", "s_x4_y0"});
}

TEST_CASE("quotas (60, 40) at one half keep the densest members") {
    std::mt19937_64 rng(3);
    std::vector<ClusterMembers> clusters{make_cluster(rng, "a", 60, 0), make_cluster(rng, "b", 40, 10)};
    const std::uint64_t seed = 77;
    const auto sel = select_gmm("s", clusters, 0.5, seed);
    REQUIRE(sel.retained.size() == 50);
    std::vector<std::string> expected;
    const std::size_t quota[2] = {30, 20};
    for (std::size_t c = 0; c < 2; ++c) {
        const auto model = gmm_fit(clusters[c].features, components_for(clusters[c].ids.size()),
                                   derive_seed(seed, "gmm/cluster/" + std::to_string(c)));
        const auto top = top_by_density(clusters[c], model, quota[c]);
        expected.insert(expected.end(), top.begin(), top.end());
    }
    std::sort(expected.begin(), expected.end());
    CHECK(sel.retained == expected);
}

TEST_CASE("nearest-mean criterion keeps members closest to a component mean") {
    std::mt19937_64 rng(4);
    std::vector<ClusterMembers> clusters{make_cluster(rng, "a", 15, 0)};
    const auto sel = select_gmm("s", clusters, 0.2, 5, SelectionCriterion::nearest_mean);
    const auto model = gmm_fit(clusters[0].features, 1, derive_seed(5, "gmm/cluster/0"));
    std::vector<std::pair<double, std::string>> d;
    for (int i = 0; i < 15; ++i)
        d.emplace_back((clusters[0].features.row(i) - model.means.row(0)).squaredNorm(), clusters[0].ids[static_cast<std::size_t>(i)]);
    std::sort(d.begin(), d.end());
    std::vector<std::string> expected{d[0].second, d[1].second, d[2].second};
    std::sort(expected.begin(), expected.end());
    CHECK(sel.retained == expected);
}

TEST_CASE("retained count is exact over the sweep fractions") {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 30; ++t) {
        std::vector<ClusterMembers> clusters;
        std::vector<std::vector<std::string>> ids;
        std::size_t n = 0;
        const int k = 1 + static_cast<int>(rng() % 8);
        for (int c = 0; c < k; ++c) {
            clusters.push_back(make_cluster(rng, "c" + std::to_string(c), 1 + static_cast<int>(rng() % 70), 3.0 * c));
            ids.push_back(clusters.back().ids);
            n += clusters.back().ids.size();
        }
        for (double f : {0.10, 0.15, 0.20, 0.30, 0.40, 0.50}) {
            const auto want = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
            const auto g = select_gmm("s", clusters, f, rng());
            const auto r = select_random("s", ids, f, rng());
            CHECK(g.retained.size() == want);
            CHECK(r.retained.size() == want);
            CHECK(std::set<std::string>(g.retained.begin(), g.retained.end()).size() == want);
            CHECK(std::set<std::string>(r.retained.begin(), r.retained.end()).size() == want);
        }
    }
}

TEST_CASE("random selection is deterministic and uniform") {
    std::vector<std::string> ids;
    for (int i = 0; i < 100; ++i) ids.push_back("s_x" + std::to_string(i) + "_y0");
    CHECK(select_random("s", {ids}, 0.1, 5).retained == select_random("s", {ids}, 0.1, 5).retained);

    std::map<std::string, int> hits;
    const int trials = 10000;
    for (int t = 0; t < trials; ++t)
        for (const auto& id : select_random("s", {ids}, 0.1, derive_seed(123, "trial/" + std::to_string(t))).retained)
            ++hits[id];
    for (const auto& id : ids) {
        const double freq = static_cast<double>(hits[id]) / trials;
        CHECK(freq >= 0.08);
        CHECK(freq <= 0.12);
    }
}

TEST_CASE("JSON round trip and union") {
    std::mt19937_64 rng(7);
    std::vector<ClusterMembers> a{make_cluster(rng, "a", 30, 0)}, b{make_cluster(rng, "b", 20, 0)};
    std::vector<SelectionSet> sets{select_gmm("a", a, 0.3, 1), select_gmm("b", b, 0.3, 2)};
    const auto back = selections_from_json(selections_to_json(sets));
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back[i].scan_id == sets[i].scan_id);
        CHECK(back[i].method == sets[i].method);
        CHECK(back[i].fraction == sets[i].fraction);
        CHECK(back[i].seed == sets[i].seed);
        CHECK(back[i].retained == sets[i].retained);
    }
    const auto all = retained_ids(sets);
    CHECK(all.size() == 15);
    CHECK(std::is_sorted(all.begin(), all.end()));
}

TEST_CASE("errors") {
    std::mt19937_64 rng(8);
    std::vector<ClusterMembers> clusters{make_cluster(rng, "a", 5, 0)};
    CHECK_THROWS_AS(select_gmm("s", clusters, 0.0, 1), UsageError);
    CHECK_THROWS_AS(select_gmm("s", clusters, 1.2, 1), UsageError);
    CHECK_THROWS_AS(select_gmm("s", {}, 0.5, 1), UsageError);
    CHECK_THROWS_AS(select_random("s", {clusters[0].ids}, -0.1, 1), UsageError);
}

}
