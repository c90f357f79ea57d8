#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "fingerloc/locate.hpp"
#include "support.hpp"
#include "worlds.hpp"

using namespace fingerloc;
using fingerloc::test::code_of;

namespace {

// One-cell bundle holding the given grid points.
PrecomputedBundle one_cell(std::vector<BundleGridPoint> grid, double size = 8.0) {
    PrecomputedBundle b;
    b.roi = {{0.0, 0.0}, size, size, size};
    BundleCell cell;
    cell.bounds = b.roi.cell_bounds(0);
    FeatureSet seen;
    for (const auto& g : grid)
        for (const auto& [f, v] : g.values) seen.insert(f);
    cell.observable_features.assign(seen.begin(), seen.end());
    cell.grid = std::move(grid);
    b.feature_universe = cell.observable_features;
    b.cells.push_back(std::move(cell));
    return b;
}

// Random bundle over a 3 x 2 grid of 2 m cells, 4 points per cell.
PrecomputedBundle random_bundle(std::mt19937_64& rng, std::size_t features) {
    PrecomputedBundle b;
    b.roi = {{0.0, 0.0}, 6.0, 4.0, 2.0};
    std::uniform_int_distribution<int> rss(-95, -30);
    std::uniform_real_distribution<double> prior(0.5, 2.0);
    for (std::size_t f = 0; f < features; ++f) b.feature_universe.push_back("f" + std::to_string(f));
    for (std::size_t c = 0; c < b.roi.cell_count(); ++c) {
        BundleCell cell;
        cell.cell_index = c;
        cell.bounds = b.roi.cell_bounds(c);
        FeatureSet seen;
        for (int p = 0; p < 4; ++p) {
            BundleGridPoint g;
            g.location = {cell.bounds.min_x + 0.5 + (p % 2), cell.bounds.min_y + 0.5 + (p / 2)};
            g.prior = prior(rng);
            for (const auto& f : b.feature_universe)
                if (rng() % 3 != 0) {
                    g.values[f] = rss(rng);
                    seen.insert(f);
                }
            cell.grid.push_back(g);
        }
        cell.observable_features.assign(seen.begin(), seen.end());
        b.cells.push_back(std::move(cell));
    }
    return b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// log p(v | mean) written out directly: Gaussian mass of the unit bin around
// v, renormalized over [-99, 0].
double log_likelihood(int v, int grid, const LikelihoodModel& model) {
    if (grid <= -100) return std::log(model.p_miss);
    const double s = model.sigma;
    const double norm = normal_cdf((0.5 - grid) / s) - normal_cdf((-99.5 - grid) / s);
    const double p = (normal_cdf((v + 0.5 - grid) / s) - normal_cdf((v - 0.5 - grid) / s)) / norm;
    return std::max(-745.0, std::log(p));
}

}  // namespace

TEST_CASE("candidate features rank by selection count") {
    SelectionProfile profile;
    profile.per_cell[0] = {0, {"a", "b"}};
    profile.per_cell[1] = {1, {"a"}};
    profile.per_cell[2] = {2, {"c"}};
    const Fingerprint fp({{"a", -50.0}, {"b", -60.0}, {"d", -70.0}});
    const std::vector<std::size_t> cells{0, 1};

    CHECK(candidate_features(fp, cells, profile, -1).features == std::vector<FeatureId>{"a", "b"});
    CHECK(candidate_features(fp, cells, profile, 1).features == std::vector<FeatureId>{"a"});
    const std::vector<std::size_t> only2{2};
    CHECK(code_of([&] { candidate_features(fp, only2, profile, -1); }) == errc::kNoCommonFeatures);
    CHECK(code_of([&] { candidate_features(fp, cells, profile, 0); }) == errc::kBadConfig);
    CHECK(code_of([&] { candidate_features(fp, cells, profile, -2); }) == errc::kBadConfig);
}

TEST_CASE("knn weights nearer points by inverse distance") {
    const auto b = one_cell({{{0.0, 0.0}, {{"a", -51}}}, {{4.0, 0.0}, {{"a", -53}}}});
    const Locator loc(b);
    const std::vector<std::size_t> cells{0};
    const Point2 p = loc.knn_estimate(Fingerprint({{"a", -50.0}}), {{"a"}, -1}, cells, 2);
    CHECK(p.x == doctest::Approx(1.0));
    CHECK(p.y == doctest::Approx(0.0));

    // Exact match returns that point regardless of the others.
    const Point2 exact = loc.knn_estimate(Fingerprint({{"a", -53.0}}), {{"a"}, -1}, cells, 2);
    CHECK(exact.x == 4.0);

    CHECK(code_of([&] { loc.knn_estimate(Fingerprint({{"a", -50.0}}), {{"a"}, -1}, cells, 3); }) ==
          errc::kInsufficientCandidates);

    const auto w = inverse_distance_weights(std::vector<double>{1.0, 3.0});
    CHECK(w[0] == doctest::Approx(0.75));
    CHECK(w[1] == doctest::Approx(0.25));
}

TEST_CASE("knn estimates stay inside the hull of the reference points") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 30; ++trial) {
        const auto b = random_bundle(rng, 6);
        const Locator loc(b);
        Fingerprint::Map obs;
        for (const auto& f : b.feature_universe)
            if (rng() % 2) obs[f] = -40.0 - static_cast<double>(rng() % 50);
        if (obs.empty()) obs["f0"] = -60.0;
        LocateConfig config;
        config.selector = kAllFeatures;
        config.m = 3;
        const auto r = loc.online_position(Fingerprint(obs), config);
        CHECK(r.estimate.x >= 0.5);
        CHECK(r.estimate.x <= 5.5);
        CHECK(r.estimate.y >= 0.5);
        CHECK(r.estimate.y <= 3.5);

        auto w = inverse_distance_weights(std::vector<double>{0.3, 1.0, 2.5, 7.0, 7.0});
        double total = 0.0;
        for (double x : w) {
            CHECK(x > 0.0);
            total += x;
        }
        CHECK(total == doctest::Approx(1.0));
    }
}

TEST_CASE("map matches a brute-force posterior product") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 40; ++trial) {
        const auto b = random_bundle(rng, 5);
        const Locator loc(b);
        Fingerprint::Map obs;
        for (const auto& f : b.feature_universe)
            if (rng() % 3) obs[f] = -35.0 - static_cast<double>(rng() % 60);
        if (obs.empty()) obs["f1"] = -70.0;
        const Fingerprint fp(obs);

        double best = -std::numeric_limits<double>::infinity();
        Point2 best_at;
        for (const auto& cell : b.cells)
            for (const auto& g : cell.grid) {
                double s = std::log(g.prior);
                for (const auto& [f, v] : obs) {
                    auto it = g.values.find(f);
                    s += log_likelihood(static_cast<int>(v), it == g.values.end() ? -100 : it->second, b.likelihood);
                }
                if (s > best) {
                    best = s;
                    best_at = g.location;
                }
            }
        const Point2 got = loc.baseline_map(fp);
        CHECK(got.x == best_at.x);
        CHECK(got.y == best_at.y);
    }
}

TEST_CASE("map ties go to the lowest grid index and a single location wins") {
    const auto twins = one_cell({{{1.0, 1.0}, {{"a", -60}}}, {{3.0, 1.0}, {{"a", -60}}}});
    const Locator loc(twins);
    CHECK(loc.baseline_map(Fingerprint({{"a", -61.0}})).x == 1.0);

    const auto single = one_cell({{{2.0, 5.0}, {{"a", -90}}}});
    const Locator one(single);
    CHECK(one.baseline_map(Fingerprint({{"a", -30.0}})) == Point2{2.0, 5.0});
}

TEST_CASE("online positioning with m = M and every feature reproduces the full search") {
    SelectorConfig sc;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        WorldConfig wc;
        wc.seed = seed;
        wc.roi = {{0.0, 0.0}, 8.0, 6.0, 2.0};
        wc.n_emitters = 10;
        wc.sample_density = 1.0;
        wc.n_tests = 30;
        const World world = generate(wc);
        const auto w = test::selection_world(world.rfm_samples, wc.roi, sc);
        auto bundle = make_bundle(w.gridded, w.index, {}, seed);
        bundle.profiles["foba"] = build_profile(*w.context, SelectorKind::Foba);
        const Locator loc(bundle);
        const std::size_t M = loc.cell_count();

        for (const auto& t : world.tests) {
            for (Method method : {Method::Knn, Method::Map}) {
                LocateConfig config;
                config.m = M;
                config.method = method;
                config.selector = kAllFeatures;
                const auto r = loc.online_position(t.fingerprint, config);
                const Point2 full =
                    method == Method::Knn ? loc.baseline_knn(t.fingerprint, 5) : loc.baseline_map(t.fingerprint);
                CHECK(r.estimate.x == full.x);
                CHECK(r.estimate.y == full.y);
            }

            // Prefix property and search-space bounds.
            const auto ranking = loc.rank_subregions(t.fingerprint, M);
            for (std::size_t m : {std::size_t{1}, std::size_t{3}, M / 2}) {
                const auto top = loc.rank_subregions(t.fingerprint, m);
                CHECK(std::equal(top.begin(), top.end(), ranking.begin()));
                for (int h : {-1, 2}) {
                    LocateConfig config;
                    config.m = m;
                    config.h = h;
                    config.k = 1;
                    const auto r = loc.online_position(t.fingerprint, config);
                    CHECK(r.cells == top);
                    CHECK(r.locations_scored <= loc.alpha() * m);
                    if (h > 0) CHECK(r.candidate_count <= static_cast<std::size_t>(h));
                }
            }
        }
        CHECK(code_of([&] { loc.rank_subregions(world.tests.front().fingerprint, M + 1); }) == errc::kBadM);
    }
}
