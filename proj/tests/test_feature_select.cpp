#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "fingerloc/feature_select.hpp"
#include "support.hpp"
#include "oracles.hpp"
#include "worlds.hpp"

using namespace fingerloc;
using fingerloc::test::code_of;

namespace {

// Loss looked up from a table keyed by the sorted subset.
class TableObjective : public SubsetObjective {
public:
    TableObjective(std::size_t n, std::map<std::vector<std::size_t>, double> table, double fallback = 100.0)
        : n_(n), table_(std::move(table)), fallback_(fallback) {}

    std::size_t candidate_count() const override { return n_; }
    double loss(std::span<const std::size_t> subset) override {
        std::vector<std::size_t> key(subset.begin(), subset.end());
        std::sort(key.begin(), key.end());
        auto it = table_.find(key);
        return it == table_.end() ? fallback_ : it->second;
    }

private:
    std::size_t n_;
    std::map<std::vector<std::size_t>, double> table_;
    double fallback_;
};

// Loss = base - sum of per-feature gains (+ pairwise bonuses), evaluated
// on the fly for random instances.
class AdditiveObjective : public SubsetObjective {
public:
    AdditiveObjective(double base, std::vector<double> gains) : base_(base), gains_(std::move(gains)) {}
    std::size_t candidate_count() const override { return gains_.size(); }
    double loss(std::span<const std::size_t> subset) override {
        double l = base_;
        for (std::size_t c : subset) l -= gains_[c];
        return l;
    }

private:
    double base_;
    std::vector<double> gains_;
};

class RandomObjective : public SubsetObjective {
public:
    RandomObjective(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}
    std::size_t candidate_count() const override { return n_; }
    double loss(std::span<const std::size_t> subset) override {
        std::uint64_t key = 0;
        for (std::size_t c : subset) key |= 1ULL << c;
        std::mt19937_64 rng(seed_ ^ (key * 0x9e3779b97f4a7c15ULL));
        // Shrinks with subset size, with interaction noise on top.
        return 10.0 / (1.0 + static_cast<double>(subset.size())) + std::uniform_real_distribution<double>(0, 2)(rng);
    }

private:
    std::size_t n_;
    std::uint64_t seed_;
};

}  // namespace

TEST_CASE("forward search hand trace") {
    // A alone 1.0, B alone 4.0, {A, B} 0.9, empty 5.0.
    TableObjective obj(2, {{{}, 5.0}, {{0}, 1.0}, {{1}, 4.0}, {{0, 1}, 0.9}});
    SelectorConfig config;
    config.epsilon = 0.05;
    config.k_max = 10;
    const auto r = forward_search(obj, config);
    CHECK(r.selected == std::vector<std::size_t>{0, 1});
    CHECK(r.initial_loss == 5.0);
    CHECK(r.final_loss == doctest::Approx(0.9));

    // With a larger epsilon the second step fails and is discarded.
    config.epsilon = 0.2;
    CHECK(forward_search(obj, config).selected == std::vector<std::size_t>{0});

    // Epsilon above every single-feature gain: nothing is selected.
    config.epsilon = 10.0;
    const auto none = forward_search(obj, config);
    CHECK(none.selected.empty());
    CHECK(none.final_loss == none.initial_loss);
}

TEST_CASE("forward search respects k_max and breaks ties by index") {
    TableObjective obj(3, {{{}, 5.0}, {{0}, 2.0}, {{1}, 2.0}, {{2}, 3.0}, {{0, 1}, 1.0}, {{0, 2}, 1.5}, {{1, 2}, 1.0},
                           {{0, 1, 2}, 0.5}});
    SelectorConfig config;
    config.k_max = 1;
    CHECK(forward_search(obj, config).selected == std::vector<std::size_t>{0});
    config.k_max = 30;
    CHECK(forward_search(obj, config).selected == std::vector<std::size_t>{0, 1, 2});
}

TEST_CASE("backward search extremes") {
    TableObjective obj(3, {{{}, 5.0}, {{0}, 2.0}, {{1}, 2.5}, {{2}, 3.0}, {{0, 1}, 1.5}, {{0, 2}, 1.7}, {{1, 2}, 1.9},
                           {{0, 1, 2}, 1.0}});
    SelectorConfig config;
    config.phi = std::numeric_limits<double>::infinity();
    config.k_min = 1;
    const auto single = backward_search(obj, config);
    CHECK(single.selected == std::vector<std::size_t>{0});

    config.phi = 1e-9;
    const auto all = backward_search(obj, config);
    CHECK(all.selected.size() == 3);
    CHECK(all.final_loss == 1.0);
}

TEST_CASE("foba keeps independent features that forward picks") {
    AdditiveObjective obj(10.0, {3.0, 0.5, 2.0, 0.01, 1.0});
    SelectorConfig config;
    const auto f = forward_search(obj, config);
    const auto b = foba_search(obj, config);
    CHECK(f.selected == std::vector<std::size_t>{0, 2, 4, 1});
    CHECK(std::set<std::size_t>(b.selected.begin(), b.selected.end()) ==
          std::set<std::size_t>(f.selected.begin(), f.selected.end()));
}

TEST_CASE("foba removes a decoy that forward keeps") {
    // C (index 2) is the best single feature, A and B are jointly perfect
    // and C only adds noise once both are in.
    TableObjective obj(3, {{{}, 10.0},
                           {{0}, 6.0},
                           {{1}, 6.0},
                           {{2}, 4.0},
                           {{0, 1}, 0.5},
                           {{0, 2}, 3.0},
                           {{1, 2}, 3.0},
                           {{0, 1, 2}, 1.0}});
    SelectorConfig config;
    const auto f = forward_search(obj, config);
    const auto b = foba_search(obj, config);
    CHECK(f.selected == std::vector<std::size_t>{2, 0, 1});
    CHECK(f.final_loss == 1.0);
    CHECK(std::set<std::size_t>(b.selected.begin(), b.selected.end()) == std::set<std::size_t>{0, 1});
    CHECK(b.final_loss == 0.5);
}

TEST_CASE("foba invariants on random objectives") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        RandomObjective obj(6, seed);
        SelectorConfig config;
        config.epsilon = 0.05 + 0.01 * static_cast<double>(seed % 7);
        const auto r = foba_search(obj, config);
        CHECK(r.iterations <= foba_iteration_bound(r.initial_loss, config.nu, config.epsilon));

        // Every accepted forward step gains more than epsilon; every removal
        // costs at most nu times the gain of the step that opened the purge.
        for (const auto& e : r.events) {
            if (e.kind == SearchEvent::Kind::Forward) {
                CHECK(e.loss_before - e.loss_after > config.epsilon);
            } else {
                CHECK(e.loss_after - e.loss_before <= config.nu * e.forward_gain + 1e-12);
            }
        }

        const auto f = forward_search(obj, config);
        for (const auto& e : f.events) CHECK(e.loss_before - e.loss_after > config.epsilon);
    }
    CHECK(foba_iteration_bound(1.0, 0.5, 0.05) == 41);
    CHECK(foba_iteration_bound(0.0, 0.5, 0.05) == 1);
}

TEST_CASE("selector config validation and names") {
    SelectorConfig c;
    CHECK_NOTHROW(c.validate());
    c.nu = 1.0;
    CHECK(code_of([&] { c.validate(); }) == errc::kBadConfig);
    c = {};
    c.epsilon = 0.0;
    CHECK(code_of([&] { c.validate(); }) == errc::kBadConfig);
    CHECK(parse_selector("foba") == SelectorKind::Foba);
    CHECK(to_string(SelectorKind::Backward) == "backward");
    CHECK(code_of([] { parse_selector("lasso"); }) == errc::kBadConfig);
}

TEST_CASE("fs_loss hand values") {
    GriddedRfm g;
    g.grid_spacing = 1.0;
    g.roi = {{0.0, 0.0}, 4.0, 2.0, 2.0};
    g.per_subregion_point_count = 3;
    for (double x : {0.0, 1.0, 2.0}) g.points.push_back({{x, 0.0}, 0, Fingerprint({{"a", -50.0 - 10.0 * x}})});
    const std::vector<LabeledSample> at_median{{{1.0, 0.0}, Fingerprint({{"a", -60.0}})}};
    CHECK(fs_loss({}, Method::Knn, at_median, g) == 0.0);

    const std::vector<LabeledSample> two{{{0.0, 0.0}, Fingerprint()}, {{2.0, 0.0}, Fingerprint()}};
    CHECK(fs_loss({}, Method::Knn, two, g) == doctest::Approx(1.0));

    // 1-NN with an exact fingerprint match lands on that grid point.
    SelectorConfig one;
    one.knn_k = 1;
    const std::vector<LabeledSample> exact{{{0.5, 0.0}, Fingerprint({{"a", -70.0}})}};
    CHECK(fs_loss({"a"}, Method::Knn, exact, g, one) == doctest::Approx(1.5 * 1.5));
}

TEST_CASE("forward first pick equals the brute-force best singleton") {
    SelectorConfig config;
    config.positioning = Method::Knn;
    std::size_t checked = 0;
    for (std::uint64_t seed = 1; seed <= 6; ++seed) {
        const auto w = test::radio_world(seed, 6, config);
        for (const auto& cell : w.index.cells) {
            if (cell.empty() || w.context->validation_in_cell(cell.cell_index).empty()) continue;
            const std::vector<FeatureId> features(cell.observable_features.begin(), cell.observable_features.end());
            double best = std::numeric_limits<double>::infinity();
            for (const auto& f : features)
                best = std::min(best, test::oracle_knn_loss(w, cell.cell_index, {f}, config.knn_k));

            const auto subset = forward_greedy(*w.context, cell.cell_index);
            CHECK(subset.initial_loss == doctest::Approx(test::oracle_knn_loss(w, cell.cell_index, {}, config.knn_k)));
            if (subset.features.empty()) {
                CHECK(subset.initial_loss - best <= config.epsilon);
                continue;
            }
            CHECK(test::oracle_knn_loss(w, cell.cell_index, {subset.features.front()}, config.knn_k) ==
                  doctest::Approx(best).epsilon(1e-9));
            const double oracle = test::oracle_knn_loss(w, cell.cell_index, subset.features, config.knn_k);
            CHECK(subset.final_loss == doctest::Approx(oracle));
            ++checked;
        }
    }
    CHECK(checked >= 10);
}

TEST_CASE("backward search drops a pure-noise feature before an informative one") {
    // 1-D strip: "slope" falls off with x, "noise" is random everywhere.
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> noise(-90, -40);
    std::vector<LabeledSample> raw;
    for (int i = 0; i < 80; ++i) {
        const double x = 0.05 + 0.1 * static_cast<double>(i % 40), y = i < 40 ? 0.5 : 1.5;
        raw.push_back({{x, y}, Fingerprint({{"noise", noise(rng)}, {"slope", std::round(-40.0 - 10.0 * x)}})});
    }
    SelectorConfig config;
    config.phi = std::numeric_limits<double>::infinity();
    const auto w = test::selection_world(raw, {{0.0, 0.0}, 4.0, 2.0, 4.0}, config);
    const auto subset = backward_greedy(*w.context, 0);
    CHECK(subset.features == std::vector<FeatureId>{"slope"});
}

TEST_CASE("profiles cover every non-empty cell and are deterministic") {
    SelectorConfig config;
    const auto w = test::radio_world(3, 8, config);
    const auto a = build_profile(*w.context, SelectorKind::Foba, 1);
    const auto b = build_profile(*w.context, SelectorKind::Foba, 4);
    CHECK(a == b);
    CHECK(a.per_cell.size() == w.index.non_empty_count());
    for (const auto& [cell, subset] : a.per_cell) {
        CHECK(subset.cell_index == cell);
        CHECK(subset.final_loss <= subset.initial_loss);
    }
}

TEST_CASE("subset sizes vary on a world with unequal visibility") {
    WorldConfig wc;
    wc.seed = 21;
    wc.n_tests = 0;
    wc.walls = office_walls(wc.roi, 5.0, 2.5, 10.0);
    World world = generate(wc);
    SelectorConfig config;
    const auto w = test::selection_world(world.rfm_samples, wc.roi, config);
    const auto profile = build_profile(*w.context, SelectorKind::Foba);
    std::set<std::size_t> sizes;
    for (const auto& [cell, subset] : profile.per_cell) sizes.insert(subset.features.size());
    CHECK(sizes.size() > 1);
}

TEST_CASE("validation split is per cell, seeded and disjoint") {
    GriddedRfm g;
    g.roi = {{0.0, 0.0}, 4.0, 2.0, 2.0};
    for (std::size_t cell = 0; cell < 2; ++cell)
        for (int i = 0; i < 10; ++i)
            g.points.push_back({{2.0 * cell + 0.1 + 0.2 * i, 1.0}, cell, Fingerprint({{"a", -50.0 - i}})});
    const auto s1 = split_validation(g, 0.2, 7);
    const auto s2 = split_validation(g, 0.2, 7);
    CHECK(s1.validation == s2.validation);
    CHECK(s1.validation.size() == 4);
    CHECK(s1.reference.size() == 16);
    std::size_t left = 0;
    for (const auto& v : s1.validation) left += v.location.x < 2.0;
    CHECK(left == 2);
    CHECK(code_of([&] { split_validation(g, 1.0, 7); }) == errc::kBadConfig);
}
