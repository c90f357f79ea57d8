#include "fingerloc/evalbench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <tuple>

#include <fmt/format.h>

#include "fingerloc/error.hpp"

namespace fingerloc {

double circular_error(std::span<const double> errors, double percentile) {
    if (errors.empty()) throw Error(errc::kEmptyErrors, "no errors to summarize");
    if (!(percentile > 0.0) || percentile > 100.0)
        throw Error(errc::kBadConfig, "percentile must be in (0, 100]");
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    // The slack stops p*N/100 that is integral on paper from rounding up a rank.
    const double n = static_cast<double>(sorted.size());
    auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0 - 1e-9));
    rank = std::clamp<std::size_t>(rank, 1, sorted.size());
    return sorted[rank - 1];
}

double large_error_ratio(std::span<const double> errors, double threshold) {
    if (errors.empty()) throw Error(errc::kEmptyErrors, "no errors to summarize");
    const auto n = std::count_if(errors.begin(), errors.end(), [&](double e) { return e > threshold; });
    return static_cast<double>(n) / static_cast<double>(errors.size());
}

std::vector<EvalReport> run_benchmark(const Locator& locator, const std::vector<LabeledSample>& tests,
                                      const std::vector<EvalConfig>& configs, const BenchmarkOptions& options) {
    if (tests.empty()) throw Error(errc::kEmptyValidation, "empty test set");
    using clock = std::chrono::steady_clock;
    std::vector<EvalReport> reports;
    reports.reserve(configs.size());

    for (const auto& cfg : configs) {
        const bool full = cfg.selector == kFullSearch;
        LocateConfig lc;
        lc.m = cfg.m;
        lc.h = cfg.h;
        lc.method = cfg.method;
        lc.k = options.knn_k;
        lc.selector = cfg.selector;
        lc.formula = options.formula;

        auto position = [&](const Fingerprint& fp, bool& fallback) {
            if (full) {
                fallback = false;
                return cfg.method == Method::Knn ? locator.baseline_knn(fp, options.knn_k) : locator.baseline_map(fp);
            }
            auto r = locator.online_position(fp, lc);
            fallback = r.fallback;
            return r.estimate;
        };

        bool ignored = false;
        for (std::size_t i = 0; i < std::min(options.warmup, tests.size()); ++i)
            (void)position(tests[i].fingerprint, ignored);

        EvalReport rep;
        rep.method = to_string(cfg.method);
        rep.selector = cfg.selector;
        rep.m = full ? locator.cell_count() : (cfg.m != 0 ? cfg.m : locator.cell_count());
        rep.h = full ? -1 : cfg.h;
        rep.errors.reserve(tests.size());
        clock::duration total{};
        std::size_t fallbacks = 0;
        for (const auto& t : tests) {
            bool fb = false;
            const auto start = clock::now();
            const Point2 est = position(t.fingerprint, fb);
            total += clock::now() - start;
            if (fb) ++fallbacks;
            rep.errors.push_back(distance(est, t.location));
        }
        const double n = static_cast<double>(tests.size());
        rep.mean_time_s = std::chrono::duration<double>(total).count() / n;
        rep.ce50 = circular_error(rep.errors, 50);
        rep.ce75 = circular_error(rep.errors, 75);
        rep.ce90 = circular_error(rep.errors, 90);
        rep.large_error_ratio = large_error_ratio(rep.errors, options.large_error_threshold);
        rep.fallback_ratio = static_cast<double>(fallbacks) / n;
        reports.push_back(std::move(rep));
    }

    std::stable_sort(reports.begin(), reports.end(), [](const EvalReport& a, const EvalReport& b) {
        return std::tie(a.method, a.selector, a.m, a.h) < std::tie(b.method, b.selector, b.m, b.h);
    });
    return reports;
}

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports) {
    out << kReportHeader << '\n';
    for (const auto& r : reports) {
        out << fmt::format("{},{},{},{},{:.6g},{:.3f},{:.3f},{:.3f},{:.2f},{:.2f}\n", r.method, r.selector, r.m, r.h,
                           r.mean_time_s, r.ce50, r.ce75, r.ce90, 100.0 * r.large_error_ratio,
                           100.0 * r.fallback_ratio);
    }
}

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        out.push_back(b == std::string::npos ? std::string() : item.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

std::vector<EvalConfig> parse_eval_grid(const std::string& spec, std::size_t cell_count,
                                        const std::vector<std::string>& default_selectors) {
    std::vector<Method> methods;
    std::vector<std::size_t> ms;
    std::vector<int> hs;
    std::vector<std::string> selectors;
    auto bad = [&](const std::string& why) { throw Error(errc::kBadConfig, "eval grid '" + spec + "': " + why); };

    for (const auto& clause : split(spec, ';')) {
        if (clause.empty()) continue;
        const auto eq = clause.find('=');
        if (eq == std::string::npos) bad("expected key=value in '" + clause + "'");
        const std::string key = clause.substr(0, eq);
        const auto values = split(clause.substr(eq + 1), ',');
        if (values.empty()) bad("no values for " + key);
        for (const auto& v : values) {
            if (key == "methods" || key == "method") {
                methods.push_back(parse_method(v));
            } else if (key == "m") {
                if (v == "M") {
                    ms.push_back(cell_count);
                    continue;
                }
                std::size_t pos = 0;
                long long m = 0;
                try {
                    m = std::stoll(v, &pos);
                } catch (const std::exception&) {
                    bad("bad m value '" + v + "'");
                }
                if (pos != v.size() || m < 1 || static_cast<std::size_t>(m) > cell_count)
                    bad("m must be in [1, " + std::to_string(cell_count) + "] or M, got '" + v + "'");
                ms.push_back(static_cast<std::size_t>(m));
            } else if (key == "h") {
                std::size_t pos = 0;
                int h = 0;
                try {
                    h = std::stoi(v, &pos);
                } catch (const std::exception&) {
                    bad("bad h value '" + v + "'");
                }
                if (pos != v.size() || h == 0 || h < -1) bad("h must be -1 or positive, got '" + v + "'");
                hs.push_back(h);
            } else if (key == "selectors" || key == "selector") {
                selectors.push_back(v);
            } else {
                bad("unknown key '" + key + "'");
            }
        }
    }
    if (methods.empty()) bad("no methods");
    if (ms.empty()) ms.push_back(cell_count);
    if (hs.empty()) hs.push_back(-1);
    if (selectors.empty()) selectors = default_selectors;

    std::vector<EvalConfig> out;
    for (Method method : methods) {
        for (const auto& sel : selectors) {
            if (sel == kFullSearch) {
                out.push_back({method, sel, cell_count, -1});
                continue;
            }
            for (std::size_t m : ms)
                for (int h : hs) out.push_back({method, sel, m, h});
        }
    }
    return out;
}

}  // namespace fingerloc
