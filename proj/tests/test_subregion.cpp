#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "fingerloc/subregion_select.hpp"
#include "support.hpp"

using namespace fingerloc;
using fingerloc::test::code_of;

namespace {

FeatureSet keys(std::initializer_list<const char*> ids) {
    FeatureSet out;
    for (const char* id : ids) out.insert(id);
    return out;
}

FeatureSet numbered(int from, int to) {
    FeatureSet out;
    for (int i = from; i < to; ++i) out.insert("f" + std::to_string(i));
    return out;
}

LabeledSample sample(double x, double y, Fingerprint::Map obs) { return {{x, y}, Fingerprint(obs)}; }

}  // namespace

TEST_CASE("mji hand values") {
    CHECK(mji(keys({"a", "b", "c"}), keys({"a", "b", "c"})) == 1.0);
    CHECK(mji(keys({"a", "b", "c", "d"}), keys({"a", "b", "c"})) == 1.0);
    CHECK(mji(keys({"a"}), keys({"a", "b", "c", "d", "e"})) == doctest::Approx(0.2));
    CHECK(mji(keys({"x"}), keys({"a", "b"})) == 0.0);
    CHECK(mji(keys({"a"}), {}) == 0.0);
    // Jaccard penalizes the extra user key; coverage does not.
    CHECK(mji(keys({"a", "b", "c", "d"}), keys({"a", "b", "c"}), MjiFormula::Jaccard) == doctest::Approx(0.75));
}

TEST_CASE("mji qualitative ordering for |G| = 10") {
    const FeatureSet g = numbered(0, 10);
    const double nine = mji(numbered(0, 9), g);
    const double superset = mji(numbered(0, 11), g);
    const double two = mji(numbered(0, 2), g);
    FeatureSet one_overlap = numbered(100, 109);
    one_overlap.insert("f0");
    const double one = mji(one_overlap, g);

    CHECK(nine >= 0.9);
    CHECK(superset >= 0.9);
    CHECK(two <= 0.2);
    CHECK(one <= 0.2);
    CHECK(std::min(nine, superset) > std::max(two, one));
}

TEST_CASE("mji bounds on random sets") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 500; ++trial) {
        FeatureSet u, c;
        for (int i = 0; i < 12; ++i) {
            if (rng() % 2) u.insert("f" + std::to_string(i));
            if (rng() % 2) c.insert("f" + std::to_string(i));
        }
        for (auto formula : {MjiFormula::Coverage, MjiFormula::Jaccard}) {
            const double s = mji(u, c, formula);
            CHECK(s >= 0.0);
            CHECK(s <= 1.0);
            if (!c.empty()) CHECK(mji(c, c, formula) == 1.0);
            FeatureSet both;
            std::set_intersection(u.begin(), u.end(), c.begin(), c.end(), std::inserter(both, both.end()));
            if (both.empty()) CHECK(s == 0.0);
        }
    }
}

TEST_CASE("top cells breaks ties by ascending index") {
    const auto top = top_cells({{0, 0.9}, {1, 0.1}, {2, 0.9}}, 2);
    CHECK(top == std::vector<std::size_t>{0, 2});
    const auto reversed = top_cells({{2, 0.9}, {1, 0.1}, {0, 0.9}}, 2);
    CHECK(reversed == std::vector<std::size_t>{0, 2});
}

namespace {

// 3 x 2 cells of 2 m, each with its own feature plus a shared one.
SubregionIndex toy_index() {
    const RoiGeometry roi{{0.0, 0.0}, 6.0, 4.0, 2.0};
    std::vector<LabeledSample> samples;
    for (std::size_t c = 0; c < roi.cell_count(); ++c) {
        const Point2 p = roi.cell_bounds(c).center();
        samples.push_back(sample(p.x, p.y, {{"own" + std::to_string(c), -50.0}, {"shared", -70.0}}));
    }
    return partition(Rfm(samples, roi), 2.0);
}

}  // namespace

TEST_CASE("rank subregions") {
    const auto index = toy_index();
    const std::size_t M = index.cells.size();

    auto all = rank_subregions(Fingerprint({{"own3", -50.0}, {"shared", -70.0}}), index, M);
    CHECK(all.front() == 3);
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected(M);
    std::iota(expected.begin(), expected.end(), 0);
    CHECK(all == expected);

    CHECK(code_of([&] { rank_subregions(Fingerprint(), index, 0); }) == errc::kBadM);
    CHECK(code_of([&] { rank_subregions(Fingerprint(), index, M + 1); }) == errc::kBadM);

    // Truncation keeps the prefix of the full ranking.
    const Fingerprint fp({{"own4", -50.0}, {"own1", -60.0}});
    const auto full = rank_subregions(fp, index, M);
    for (std::size_t m = 1; m <= M; ++m) {
        const auto part = rank_subregions(fp, index, m);
        CHECK(std::equal(part.begin(), part.end(), full.begin()));
        CHECK(part == rank_subregions(fp, index, m));
    }
}

TEST_CASE("selection indicator") {
    const auto index = toy_index();
    const Point2 in5 = index.roi.cell_bounds(5).center();
    const std::vector<std::size_t> with5{5, 9}, without5{9};
    CHECK(selection_indicator(in5, with5, index) == 1);
    CHECK(selection_indicator(in5, without5, index) == 0);
    std::vector<std::size_t> every(index.cells.size());
    std::iota(every.begin(), every.end(), 0);
    CHECK(selection_indicator({0.3, 3.9}, every, index) == 1);
    CHECK(code_of([&] { selection_indicator({-1.0, 0.0}, every, index); }) == errc::kOutsideRoi);
}

TEST_CASE("selection loss") {
    const auto index = toy_index();
    const std::size_t M = index.cells.size();
    std::vector<LabeledSample> validation;
    for (std::size_t c = 0; c < M; ++c) {
        const Point2 p = index.roi.cell_bounds(c).center();
        validation.push_back(sample(p.x, p.y, {{"own" + std::to_string(c), -55.0}}));
    }
    CHECK(selection_loss(validation, index, M) == 0.0);
    CHECK(selection_loss(validation, index, 1) == 0.0);

    // Keys unknown to every cell: all MJI are 0, so the ranking is 0, 1, ...
    // and exactly the samples in cells >= m miss.
    std::vector<LabeledSample> blind;
    for (std::size_t c = 0; c < M; ++c) {
        const Point2 p = index.roi.cell_bounds(c).center();
        blind.push_back(sample(p.x, p.y, {{"nowhere", -55.0}}));
    }
    for (std::size_t m = 1; m <= M; ++m)
        CHECK(selection_loss(blind, index, m) == doctest::Approx(static_cast<double>(M - m) / M));

    CHECK(code_of([&] { selection_loss({}, index, 1); }) == errc::kEmptyValidation);
}

TEST_CASE("loss curve is non-increasing and reaches zero at M") {
    std::mt19937_64 rng(9);
    const RoiGeometry roi{{0.0, 0.0}, 8.0, 6.0, 2.0};
    std::uniform_real_distribution<double> ux(0.0, 8.0), uy(0.0, 6.0);
    for (int trial = 0; trial < 10; ++trial) {
        auto observe = [&](double x, double y) {
            Fingerprint::Map obs;
            for (int f = 0; f < 10; ++f) {
                const double fx = (f % 4) * 2.5, fy = (f / 4) * 2.5;
                if (std::hypot(x - fx, y - fy) < 4.0 || rng() % 10 == 0) obs["f" + std::to_string(f)] = -60.0;
            }
            return obs;
        };
        std::vector<LabeledSample> rfm, validation;
        for (int i = 0; i < 60; ++i) {
            const double x = ux(rng), y = uy(rng);
            rfm.push_back(sample(x, y, observe(x, y)));
        }
        for (int i = 0; i < 40; ++i) {
            const double x = ux(rng), y = uy(rng);
            validation.push_back(sample(x, y, observe(x, y)));
        }
        const auto index = partition(Rfm(rfm, roi), 2.0);
        const auto curve = loss_curve(validation, index, index.cells.size());
        REQUIRE(curve.points.size() == index.cells.size());
        for (std::size_t i = 1; i < curve.points.size(); ++i) CHECK(curve.points[i].loss <= curve.points[i - 1].loss);
        CHECK(curve.points.back().loss == 0.0);
        for (const auto& p : curve.points) CHECK(p.loss == doctest::Approx(selection_loss(validation, index, p.m)));
    }
}

TEST_CASE("choose m") {
    LossCurve flat;
    for (std::size_t m = 1; m <= 20; ++m) flat.points.push_back({m, 0.3});
    CHECK(choose_m(flat) == 1);

    LossCurve ramp;
    for (std::size_t m = 1; m <= 20; ++m) ramp.points.push_back({m, std::max(0.0, 0.5 - 0.1 * static_cast<double>(m))});
    CHECK(choose_m(ramp, 0.01) == 5);
}
