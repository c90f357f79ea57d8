#pragma once

// Accuracy metrics, timed benchmark runs and the report table.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fingerloc/locate.hpp"
#include "fingerloc/rfm.hpp"

namespace fingerloc {

/// Nearest-rank percentile: the ceil(p * N / 100)-th smallest error, i.e. the
/// smallest radius that covers at least p percent of the errors. Throws
/// "empty-errors".
double circular_error(std::span<const double> errors, double percentile);

/// Fraction of errors strictly above `threshold` metres. Throws "empty-errors".
double large_error_ratio(std::span<const double> errors, double threshold = 10.0);

/// Selector label for exhaustive search without subregion or feature
/// selection.
inline constexpr const char* kFullSearch = "full";

struct EvalConfig {
    Method method = Method::Knn;
    std::string selector = "foba";
    std::size_t m = 0;
    int h = -1;
};

struct EvalReport {
    std::string method;
    std::string selector;
    std::size_t m = 0;
    int h = -1;
    double mean_time_s = 0.0;
    double ce50 = 0.0;
    double ce75 = 0.0;
    double ce90 = 0.0;
    double large_error_ratio = 0.0;
    double fallback_ratio = 0.0;
    /// Per-query errors in test-set order (not written to the CSV).
    std::vector<double> errors;
};

struct BenchmarkOptions {
    std::size_t warmup = 5;
    std::size_t knn_k = 5;
    double large_error_threshold = 10.0;
    MjiFormula formula = MjiFormula::Coverage;
};

/// Runs every configuration over the test set, timing only the positioning
/// call. Rows come back ordered by method, selector, m, h. Throws
/// "empty-validation" for an empty test set.
std::vector<EvalReport> run_benchmark(const Locator& locator, const std::vector<LabeledSample>& tests,
                                      const std::vector<EvalConfig>& configs, const BenchmarkOptions& options = {});

inline constexpr const char* kReportHeader =
    "method,selector,m,h,mean_time_s,ce50_m,ce75_m,ce90_m,large_error_pct,fallback_pct";

void write_report_csv(std::ostream& out, const std::vector<EvalReport>& reports);

/// Parses "methods=knn,map;m=11,16,21,M;h=-1[;selectors=foba,full]". "M"
/// stands for `cell_count`; selectors default to `default_selectors`.
/// Throws "bad-config".
std::vector<EvalConfig> parse_eval_grid(const std::string& spec, std::size_t cell_count,
                                        const std::vector<std::string>& default_selectors = {"foba"});

}  // namespace fingerloc
