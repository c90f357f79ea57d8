#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "fingerloc/evalbench.hpp"
#include "support.hpp"
#include "worlds.hpp"

using namespace fingerloc;
using fingerloc::test::code_of;

TEST_CASE("circular error percentiles") {
    std::vector<double> errors;
    for (int i = 100; i >= 1; --i) errors.push_back(i);
    CHECK(circular_error(errors, 50) == 50.0);
    CHECK(circular_error(errors, 75) == 75.0);
    CHECK(circular_error(errors, 90) == 90.0);
    CHECK(circular_error(errors, 100) == 100.0);
    CHECK(circular_error(std::vector<double>{3.0, 1.0, 2.0}, 50) == 2.0);
    CHECK(circular_error(std::vector<double>(7, 0.0), 90) == 0.0);
    CHECK(code_of([] { circular_error(std::vector<double>{}, 50); }) == errc::kEmptyErrors);
}

TEST_CASE("circular error is monotone in the percentile") {
    std::mt19937_64 rng(1);
    std::exponential_distribution<double> err(0.5);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> e(1 + rng() % 200);
        for (double& x : e) x = err(rng);
        double last = 0.0;
        for (double p = 1; p <= 100; p += 1) {
            const double c = circular_error(e, p);
            CHECK(c >= last);
            last = c;
        }
        CHECK(last == *std::max_element(e.begin(), e.end()));
    }
}

TEST_CASE("large error ratio") {
    CHECK(large_error_ratio(std::vector<double>{5.0, 15.0}) == 0.5);
    CHECK(large_error_ratio(std::vector<double>{10.0, 9.0}) == 0.0);
    CHECK(large_error_ratio(std::vector<double>{3.0}, 2.0) == 1.0);
    CHECK(code_of([] { large_error_ratio(std::vector<double>{}); }) == errc::kEmptyErrors);
}

TEST_CASE("report csv header and rows") {
    std::ostringstream out;
    EvalReport r;
    r.method = "knn";
    r.selector = "foba";
    r.m = 17;
    r.h = -1;
    r.ce50 = 1.5;
    write_report_csv(out, {r});
    std::istringstream in(out.str());
    std::string header, row;
    std::getline(in, header);
    std::getline(in, row);
    CHECK(header == "method,selector,m,h,mean_time_s,ce50_m,ce75_m,ce90_m,large_error_pct,fallback_pct");
    CHECK(row.rfind("knn,foba,17,-1,", 0) == 0);
}

TEST_CASE("eval grid parsing") {
    const auto grid = parse_eval_grid("methods=knn,map;m=11,16,M;h=-1,5", 50);
    CHECK(grid.size() == 2 * 3 * 2);
    CHECK(std::count_if(grid.begin(), grid.end(), [](const EvalConfig& c) { return c.m == 50; }) == 4);
    CHECK(std::all_of(grid.begin(), grid.end(), [](const EvalConfig& c) { return c.selector == "foba"; }));

    const auto sel = parse_eval_grid("methods=map;m=M;h=-1;selectors=foba,full", 10);
    CHECK(sel.size() == 2);

    CHECK(code_of([] { parse_eval_grid("methods=svm;m=1;h=-1", 10); }) == errc::kBadConfig);
    CHECK(code_of([] { parse_eval_grid("methods=knn;m=0;h=-1", 10); }) == errc::kBadConfig);
    CHECK(code_of([] { parse_eval_grid("methods=knn;m=11;h=-1", 10); }) == errc::kBadConfig);
    CHECK(code_of([] { parse_eval_grid("methods=knn;m=x;h=-1", 10); }) == errc::kBadConfig);
    CHECK(code_of([] { parse_eval_grid("nonsense", 10); }) == errc::kBadConfig);
}

TEST_CASE("benchmark over fewer subregions is faster") {
    WorldConfig wc;
    wc.seed = 3;
    wc.roi = {{0.0, 0.0}, 12.0, 12.0, 2.0};
    wc.n_emitters = 20;
    wc.n_tests = 60;
    const World world = generate(wc);
    SelectorConfig sc;
    const auto w = test::selection_world(world.rfm_samples, wc.roi, sc);
    const auto bundle = make_bundle(w.gridded, w.index, {}, 3);
    const Locator loc(bundle);
    const std::size_t M = loc.cell_count();

    std::vector<EvalConfig> configs;
    for (std::size_t m : {M / 3, M}) configs.push_back({Method::Knn, kAllFeatures, m, -1});
    configs.push_back({Method::Knn, kFullSearch, M, -1});
    const auto reports = run_benchmark(loc, world.tests, configs);
    REQUIRE(reports.size() == 3);
    const EvalReport* third = nullptr;
    const EvalReport* whole = nullptr;
    for (const auto& r : reports) {
        CHECK(r.errors.size() == world.tests.size());
        CHECK(r.ce50 <= r.ce75);
        CHECK(r.ce75 <= r.ce90);
        if (r.selector == kAllFeatures) (r.m == M ? whole : third) = &r;
    }
    REQUIRE(third != nullptr);
    REQUIRE(whole != nullptr);
    CHECK(third->mean_time_s < whole->mean_time_s);

    CHECK(code_of([&] { run_benchmark(loc, {}, configs); }) == errc::kEmptyValidation);
}
