#pragma once

// Sub-command implementations behind the `fingerloc` tool. Kept out of
// main.cpp so tests can drive them directly.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "fingerloc/bundle.hpp"
#include "fingerloc/densify.hpp"
#include "fingerloc/feature_select.hpp"
#include "fingerloc/positioning.hpp"
#include "fingerloc/subregion_select.hpp"
#include "fingerloc/synthworld.hpp"

namespace fingerloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitComputation = 1;
inline constexpr int kExitUsage = 2;

struct PipelineConfig {
    std::filesystem::path rfm;
    std::filesystem::path validation;
    std::filesystem::path bundle;
    std::filesystem::path tests;
    std::filesystem::path queries;
    std::filesystem::path out;

    DensifyConfig densify;
    double cell_size = 2.0;
    /// x0, y0, width, height; empty = bounding box of the RFM snapped to cells.
    std::vector<double> roi;

    SelectorConfig selector;
    std::vector<std::string> selectors{"foba"};
    double flatness_tol = 0.01;
    /// Last m of the segment-eval curve; 0 = every cell.
    std::size_t m_max = 0;
    /// > 0: feature selection validates on this per-cell fraction of the
    /// gridded RFM (seeded) instead of the raw samples.
    double holdout = 0.0;
    std::size_t threads = 0;
    MjiFormula formula = MjiFormula::Coverage;

    /// 0 = chosen from the subregion loss curve (precompute) or the bundle
    /// default (locate).
    std::size_t m = 0;
    int h = -1;
    Method method = Method::Map;
    std::size_t k = 5;
    std::string locate_selector = "foba";
    LikelihoodModel likelihood;

    std::uint64_t seed = 7;

    /// Throws "bad-config" naming the first offending field.
    void validate() const;
};

struct PrecomputeSummary {
    std::size_t cells = 0;
    std::size_t non_empty = 0;
    std::size_t alpha = 0;
    std::size_t chosen_m = 0;
    std::size_t default_m = 0;
};

/// densify -> partition -> choose_m -> build_profile -> save_bundle. Stage
/// failures are rethrown as "<stage>: <cause>" with the original code.
PrecomputeSummary cmd_precompute(const PipelineConfig& config, std::ostream& report);

void cmd_synth(const WorldConfig& world, const std::filesystem::path& out, std::ostream& report);
void cmd_ingest(const PipelineConfig& config, std::ostream& report);
void cmd_densify(const PipelineConfig& config, std::ostream& report);
void cmd_segment_eval(const PipelineConfig& config, std::ostream& report);
void cmd_featsel(const PipelineConfig& config, std::ostream& report);
void cmd_locate(const PipelineConfig& config, std::ostream& report);
void cmd_eval(const PipelineConfig& config, const std::string& grid, std::ostream& report);

/// Parses arguments, runs one sub-command and maps failures to exit codes:
/// 0 success, 1 computation error, 2 usage or I/O error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace fingerloc::cli
