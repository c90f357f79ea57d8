#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "fingerloc/error.hpp"
#include "fingerloc/io.hpp"
#include "fingerloc/rfm.hpp"
#include "support.hpp"

using namespace fingerloc;
using fingerloc::test::code_of;

namespace {

LabeledSample sample(double x, double y, Fingerprint::Map obs) { return {{x, y}, Fingerprint(obs)}; }

}  // namespace

TEST_CASE("fingerprint stores values in (-100, 0] and drops the floor") {
    Fingerprint fp({{"a", -60.0}, {"b", -100.0}});
    CHECK(fp.has("a"));
    CHECK_FALSE(fp.has("b"));
    CHECK(fp.size() == 1);
    fp.set("a", -100.0);
    CHECK(fp.empty());

    CHECK(code_of([] { Fingerprint({{"a", 1.0}}); }) == errc::kBadRss);
    CHECK(code_of([] { Fingerprint({{"a", -100.5}}); }) == errc::kBadRss);
}

TEST_CASE("roi tiles its rectangle with ceil-sized cell grid") {
    RoiGeometry roi{{0.0, 0.0}, 12.5, 9.6, 2.0};
    CHECK(roi.cols() == 7);
    CHECK(roi.rows() == 5);
    CHECK(roi.cell_count() == 35);
    CHECK(roi.cell_of({0.0, 0.0}) == 0);
    // Shared edges go to the lower index.
    CHECK(roi.cell_of({2.0, 1.0}) == 0);
    CHECK(roi.cell_of({1.0, 2.0}) == 0);
    CHECK(roi.cell_of({2.0, 2.0}) == 0);
    CHECK(roi.cell_of({12.5, 9.6}) == 34);
    CHECK(code_of([&] { roi.cell_of({12.6, 1.0}); }) == errc::kOutsideRoi);
    CHECK(code_of([] { RoiGeometry{{0, 0}, 0.0, 1.0, 2.0}.validate(); }) == errc::kBadRoi);

    const auto whole = roi.whole_cells();
    CHECK(whole.width == doctest::Approx(14.0));
    CHECK(whole.height == doctest::Approx(10.0));
    CHECK(whole.cell_count() == 35);
}

TEST_CASE("partition of a 120 m^2 RoI with one unvisited cell") {
    // 12.5 x 9.6 m = 120 m^2 -> 7 x 5 cells; leave cell 17 without samples.
    RoiGeometry roi{{0.0, 0.0}, 12.5, 9.6, 2.0};
    std::vector<LabeledSample> samples;
    for (std::size_t c = 0; c < roi.cell_count(); ++c) {
        if (c == 17) continue;
        const Rect b = roi.cell_bounds(c);
        const Point2 p{(b.min_x + std::min(b.max_x, 12.5)) / 2.0, (b.min_y + std::min(b.max_y, 9.6)) / 2.0};
        samples.push_back(sample(p.x, p.y, {{"ap" + std::to_string(c % 5), -50.0}}));
    }
    const auto index = partition(Rfm(samples, roi), 2.0);
    CHECK(index.cells.size() == 35);
    CHECK(index.non_empty_count() == 34);
    CHECK(index.cells[17].empty());
    CHECK(index.cells[17].observable_features.empty());
}

TEST_CASE("partition corner and quadrant cases") {
    RoiGeometry roi{{0.0, 0.0}, 4.0, 4.0, 2.0};
    {
        const auto index = partition(Rfm({sample(0.0, 0.0, {{"a", -60}})}, roi), 2.0);
        CHECK(index.assignment.at(0) == 0);
    }
    const auto index = partition(Rfm({sample(1, 1, {{"a", -60}}), sample(3, 1, {{"b", -60}}), sample(1, 3, {{"c", -60}}),
                                      sample(3, 3, {{"d", -60}})},
                                     roi),
                                 2.0);
    REQUIRE(index.cells.size() == 4);
    for (const auto& cell : index.cells) CHECK(cell.sample_indices.size() == 1);
}

TEST_CASE("observable features are the union of the cell's key sets") {
    RoiGeometry roi{{0.0, 0.0}, 4.0, 2.0, 2.0};
    const auto index = partition(Rfm({sample(0.5, 0.5, {{"a", -60}}), sample(1.5, 1.5, {{"b", -70}})}, roi), 2.0);
    CHECK(observable_features(index, 0) == FeatureSet{"a", "b"});
    CHECK(observable_features(index, 1).empty());
    CHECK(code_of([&] { observable_features(index, 2); }) == errc::kBadCell);
}

TEST_CASE("partition properties on random RFMs") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0.0, 9.0), uy(0.0, 5.0), rss(-99.0, -30.0);
    for (int trial = 0; trial < 20; ++trial) {
        RoiGeometry roi{{0.0, 0.0}, 9.0, 5.0, 2.0};
        std::vector<LabeledSample> samples;
        const int n = 1 + static_cast<int>(rng() % 60);
        for (int i = 0; i < n; ++i) {
            Fingerprint::Map obs;
            for (int f = 0; f < 8; ++f)
                if (rng() % 3 == 0) obs["f" + std::to_string(f)] = std::round(rss(rng));
            samples.push_back(sample(ux(rng), uy(rng), obs));
        }
        const Rfm rfm(samples, roi);
        const auto index = partition(rfm, 2.0);

        // Every sample appears exactly once.
        std::vector<int> seen(samples.size(), 0);
        for (const auto& cell : index.cells)
            for (std::size_t s : cell.sample_indices) ++seen[s];
        for (int s : seen) CHECK(s == 1);

        FeatureSet all;
        for (const auto& cell : index.cells) all.insert(cell.observable_features.begin(), cell.observable_features.end());
        CHECK(all == rfm.feature_universe());
    }
}

TEST_CASE("rfm rejects empty input and samples outside the roi") {
    RoiGeometry roi{{0.0, 0.0}, 4.0, 4.0, 2.0};
    CHECK(code_of([&] { Rfm({}, roi); }) == errc::kEmptyRfm);
    CHECK(code_of([&] { Rfm({sample(5, 1, {{"a", -50}})}, roi); }) == errc::kOutsideRoi);
}

TEST_CASE("bounding roi snaps to cell multiples") {
    const auto roi = bounding_roi({sample(0.3, 0.2, {}), sample(5.1, 2.9, {})}, 2.0);
    CHECK(roi.origin == Point2{0.0, 0.0});
    CHECK(roi.width == doctest::Approx(6.0));
    CHECK(roi.height == doctest::Approx(4.0));
}

TEST_CASE("json lines round trip and strict parsing") {
    const LabeledSample s = sample(1.5, -2.25, {{"02:00:5e:00:00:01", -61.0}, {"beacon-7", -80.5}});
    const auto line = format_sample(s);
    CHECK(parse_sample(line) == s);

    std::stringstream ss;
    write_samples(ss, {s, s});
    CHECK(read_samples(ss).size() == 2);

    CHECK(code_of([] { parse_sample("{\"x\": 1, \"obs\": {}}"); }) == errc::kParse);
    CHECK(code_of([] { parse_sample("not json"); }) == errc::kParse);
    CHECK(code_of([] { parse_sample(R"({"x":0,"y":0,"obs":{"a":-120}})"); }) == errc::kBadRss);
    // The floor itself means "not measurable".
    CHECK(parse_sample(R"({"x":0,"y":0,"obs":{"a":-100}})").fingerprint.empty());
    CHECK(parse_fingerprint(R"({"obs":{"a":-40}})").get("a") == -40.0);

    std::stringstream bad("{\"x\":0,\"y\":0,\"obs\":{}}\n{oops}\n");
    try {
        read_samples(bad);
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(e.code() == errc::kParse);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}
