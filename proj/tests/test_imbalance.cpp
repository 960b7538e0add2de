#include <catch_amalgamated.hpp>

#include "ecgnet/imbalance.hpp"
#include "test_util.hpp"

using namespace ecgnet;

namespace {

LabeledSet skewed_set(std::uint64_t seed, std::size_t n_major, std::size_t n_minor,
                      std::size_t dim = 4) {
    std::mt19937_64 rng(seed);
    LabeledSet s;
    s.seed = seed;
    for (std::size_t i = 0; i < n_major; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = testutil::urand(rng, -1.0, 0.0);
        s.vectors.push_back(v);
        s.labels.push_back(0);
    }
    for (std::size_t i = 0; i < n_minor; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = testutil::urand(rng, 0.5, 1.5);
        s.vectors.push_back(v);
        s.labels.push_back(1);
    }
    return s;
}

std::map<int, std::size_t> class_counts(const LabeledSet& s) {
    std::map<int, std::size_t> c;
    for (int l : s.labels) ++c[l];
    return c;
}

} // namespace

TEST_CASE("adasyn leaves a balanced set unchanged") {
    const LabeledSet s = skewed_set(1, 10, 10);
    const LabeledSet out = adasyn_augment(s, 3, 1.0);
    CHECK(out.vectors == s.vectors);
    CHECK(out.labels == s.labels);
}

TEST_CASE("adasyn generates exactly (m_l - m_s) * beta synthetic points") {
    const LabeledSet s = skewed_set(2, 50, 10);
    const LabeledSet out = adasyn_augment(s, 5, 1.0);
    const auto counts = class_counts(out);
    CHECK(counts.at(0) == 50);
    CHECK(counts.at(1) == 50);
    CHECK(out.vectors.size() == 100);

    const LabeledSet half = adasyn_augment(s, 5, 0.5);
    CHECK(class_counts(half).at(1) == 10 + 20);
}

TEST_CASE("originals are a verbatim prefix and synthetics lie on segments") {
    const LabeledSet s = skewed_set(3, 30, 8);
    const LabeledSet out = adasyn_augment(s, 4, 1.0);
    for (std::size_t i = 0; i < s.vectors.size(); ++i) {
        CHECK(out.vectors[i] == s.vectors[i]);
        CHECK(out.labels[i] == s.labels[i]);
    }
    // synthetic minority points stay inside the class bounding box
    std::vector<double> lo(4, 1e300), hi(4, -1e300);
    for (std::size_t i = 0; i < s.vectors.size(); ++i) {
        if (s.labels[i] != 1) continue;
        for (std::size_t d = 0; d < 4; ++d) {
            lo[d] = std::min(lo[d], s.vectors[i][d]);
            hi[d] = std::max(hi[d], s.vectors[i][d]);
        }
    }
    for (std::size_t i = s.vectors.size(); i < out.vectors.size(); ++i) {
        CHECK(out.labels[i] == 1);
        for (std::size_t d = 0; d < 4; ++d) {
            CHECK(out.vectors[i][d] >= lo[d] - 1e-12);
            CHECK(out.vectors[i][d] <= hi[d] + 1e-12);
        }
    }
}

TEST_CASE("adasyn determinism and parameter validation") {
    const LabeledSet s = skewed_set(4, 40, 12);
    const LabeledSet a = adasyn_augment(s, 5, 1.0);
    const LabeledSet b = adasyn_augment(s, 5, 1.0);
    CHECK(a.vectors == b.vectors);
    CHECK(a.labels == b.labels);

    LabeledSet reseeded = s;
    reseeded.seed = 999;
    const LabeledSet c = adasyn_augment(reseeded, 5, 1.0);
    CHECK(c.vectors != a.vectors);

    CHECK_THROWS_AS(adasyn_augment(s, 0, 1.0), UsageError);
    CHECK_THROWS_AS(adasyn_augment(s, 5, 0.0), UsageError);
    CHECK_THROWS_AS(adasyn_augment(s, 5, 1.5), UsageError);
}

TEST_CASE("adasyn clamps k with a warning and rejects singleton minorities") {
    const LabeledSet s = skewed_set(5, 20, 3);
    std::vector<std::string> warnings;
    const LabeledSet out = adasyn_augment(s, 10, 1.0, &warnings);
    CHECK(class_counts(out).at(1) == 20);
    REQUIRE(!warnings.empty());
    CHECK(warnings[0].find("clamped") != std::string::npos);

    const LabeledSet lone = skewed_set(6, 5, 1);
    CHECK_THROWS_AS(adasyn_augment(lone, 3, 1.0), DataError);
}

TEST_CASE("adasyn balances multiple minority classes") {
    std::mt19937_64 rng(7);
    LabeledSet s;
    s.seed = 7;
    auto add = [&](int label, std::size_t n, double center) {
        for (std::size_t i = 0; i < n; ++i) {
            s.vectors.push_back({center + testutil::urand(rng, -0.1, 0.1),
                                 center + testutil::urand(rng, -0.1, 0.1)});
            s.labels.push_back(label);
        }
    };
    add(0, 30, 0.0);
    add(1, 12, 2.0);
    add(2, 7, -2.0);
    const LabeledSet out = adasyn_augment(s, 3, 1.0);
    const auto counts = class_counts(out);
    CHECK(counts.at(0) == 30);
    CHECK(counts.at(1) == 30);
    CHECK(counts.at(2) == 30);
}
