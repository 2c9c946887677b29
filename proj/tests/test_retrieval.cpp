#include "oracles.hpp"

#include "patchsieve/feature_file.hpp"
#include "patchsieve/retrieval.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>

using namespace patchsieve;

namespace {

DescriptorSet random_set(std::mt19937_64& rng, std::size_t n, Eigen::Index d, int scans = 4) {
    std::uniform_real_distribution<float> u(0.0f, 1.0f);
    DescriptorSet set;
    set.kind = d == 36 ? DescriptorKind::lbp36 : DescriptorKind::pca_reduced;
    set.values.resize(static_cast<Eigen::Index>(n), d);
    for (std::size_t i = 0; i < n; ++i) {
        set.ids.push_back("scan" + std::to_string(i % static_cast<std::size_t>(scans)) + "_x" + std::to_string(i) + "_y0");
        for (Eigen::Index j = 0; j < d; ++j) set.values(static_cast<Eigen::Index>(i), j) = u(rng);
    }
    return set;
}

}  // namespace

TEST_SUITE("retrieval") {

TEST_CASE("a stored entry is its own nearest neighbour") {
    std::mt19937_64 rng(1);
    const auto set = random_set(rng, 50, 36);
    const auto index = build_index(set, nullptr);
    for (std::size_t i = 0; i < set.size(); ++i) {
        const auto m = index.query(set.at(i), 1);
        REQUIRE(m.size() == 1);
        CHECK(m[0].patch_id == set.ids[i]);
        CHECK(m[0].distance == 0.0);
        CHECK(m[0].rank == 1);
        CHECK(m[0].scan_id == parse_patch_id(set.ids[i]).scan_id);
    }
}

TEST_CASE("k equal to the index size returns every entry in order") {
    std::mt19937_64 rng(2);
    const auto set = random_set(rng, 30, 5);
    const auto index = build_index(set, nullptr);
    const Eigen::VectorXf q = Eigen::VectorXf::Constant(5, 0.5f);
    const auto m = index.query(q, 30);
    REQUIRE(m.size() == 30);
    for (std::size_t r = 1; r < m.size(); ++r) {
        CHECK(m[r - 1].distance <= m[r].distance);
        CHECK(m[r].rank == static_cast<int>(r) + 1);
    }
}

TEST_CASE("exhaustive oracle on 1000x36 with duplicates") {
    std::mt19937_64 rng(3);
    auto set = random_set(rng, 1000, 36);
    // duplicated rows force ties that must resolve by id
    for (Eigen::Index i = 0; i < 100; ++i) set.values.row(900 + i) = set.values.row(i);
    const auto index = build_index(set, nullptr);
    const auto queries = random_set(rng, 100, 36);
    const auto results = index.query_batch(queries, 10, 3);
    for (std::size_t qi = 0; qi < 100; ++qi) {
        const Eigen::VectorXf q = queries.values.row(static_cast<Eigen::Index>(qi)).transpose();
        const auto want = oracle::nearest(set.ids, set.values, q, 10);
        REQUIRE(results[qi].size() == 10);
        for (std::size_t r = 0; r < 10; ++r) {
            CHECK(results[qi][r].patch_id == want[r].first);
            CHECK(results[qi][r].distance == doctest::Approx(want[r].second).epsilon(1e-5));
        }
    }
    // a duplicated row used as the query: the tie resolves to the smaller id
    const auto m = index.query(set.at(0), 2);
    CHECK(m[0].distance == 0.0);
    CHECK(m[1].distance == 0.0);
    CHECK(m[0].patch_id < m[1].patch_id);
}

TEST_CASE("insertion order does not matter") {
    std::mt19937_64 rng(4);
    const auto set = random_set(rng, 40, 8);
    std::vector<std::string> reversed(set.ids.rbegin(), set.ids.rend());
    const auto a = build_index(set, nullptr), b = build_index(subset(set, reversed), nullptr);
    CHECK(a == b);
    CHECK(encode_index(a) == encode_index(b));
}

TEST_CASE("selection restricts the index") {
    std::mt19937_64 rng(5);
    const auto set = random_set(rng, 10, 4, 1);
    SelectionSet sel;
    sel.scan_id = "scan0";
    sel.fraction = 0.3;
    sel.retained = {set.ids[2], set.ids[5], set.ids[7]};
    std::sort(sel.retained.begin(), sel.retained.end());
    const std::vector<SelectionSet> sels{sel};
    const auto index = build_index(set, &sels);
    CHECK(index.size() == 3);
    CHECK(index.ids() == sel.retained);
    CHECK(index.metadata().at("count") == 3);

    sel.retained.push_back("scan0_x99_y0");
    const std::vector<SelectionSet> bad{sel};
    CHECK_THROWS_AS(build_index(set, &bad), InputError);
}

TEST_CASE("a larger selection never moves the best match further away") {
    std::mt19937_64 rng(6);
    const auto set = random_set(rng, 200, 6);
    const auto queries = random_set(rng, 30, 6);
    std::vector<std::string> order = set.ids;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> prev(30, INFINITY);
    for (std::size_t n : {10, 50, 120, 200}) {
        SelectionSet s;
        s.retained.assign(order.begin(), order.begin() + static_cast<long>(n));
        std::sort(s.retained.begin(), s.retained.end());
        const std::vector<SelectionSet> sels{s};
        const auto results = build_index(set, &sels).query_batch(queries, 1);
        for (std::size_t q = 0; q < 30; ++q) {
            CHECK(results[q][0].distance <= prev[q]);
            prev[q] = results[q][0].distance;
        }
    }
}

TEST_CASE("save and load round trip") {
    std::mt19937_64 rng(7);
    const auto index = build_index(random_set(rng, 25, 36), nullptr, {{"note", "x"}});
    CHECK(decode_index(encode_index(index)) == index);
    const auto dir = std::filesystem::temp_directory_path() / "patchsieve_retrieval";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "a.index").string();
    save_index(index, path);
    CHECK(load_index(path) == index);

    const std::string bytes = encode_index(index);
    for (std::size_t cut : {std::size_t{0}, std::size_t{5}, bytes.size() - 1}) {
        try {
            decode_index(std::string_view(bytes).substr(0, cut));
            FAIL("decoded a truncated index");
        } catch (const FeatureFormatError& e) {
            CHECK(e.reason() == FeatureFormatError::Reason::truncated);
        }
    }
}

TEST_CASE("query errors") {
    std::mt19937_64 rng(8);
    const auto index = build_index(random_set(rng, 5, 36), nullptr);
    const Eigen::VectorXf q = Eigen::VectorXf::Zero(36);
    CHECK_THROWS_AS(index.query(q, 0), UsageError);
    CHECK_THROWS_AS(index.query(q, 6), UsageError);
    CHECK_THROWS_AS(index.query(Eigen::VectorXf(Eigen::VectorXf::Zero(35)), 1), InputError);
    CHECK_THROWS_AS(RetrievalIndex().query(q, 1), InputError);
}

TEST_CASE("results CSV") {
    std::mt19937_64 rng(9);
    const auto set = random_set(rng, 12, 4, 3);
    const auto index = build_index(set, nullptr);
    DescriptorSet queries = subset(set, {set.ids[0], set.ids[4]});
    queries.ids = {"qa", "qb"};
    const auto results = index.query_batch(queries, 2);
    const std::string csv = matches_to_csv(queries.ids, results);
    CHECK(csv.rfind("query_id,rank,patch_id,scan_id,distance\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
    const auto top1 = top1_from_csv(csv);
    REQUIRE(top1.size() == 2);
    CHECK(top1[0] == std::make_pair(std::string("qa"), std::string("scan0")));
    CHECK(top1[1] == std::make_pair(std::string("qb"), std::string("scan1")));
    CHECK_THROWS_AS(top1_from_csv("id,rank\n"), InputError);
}

}
