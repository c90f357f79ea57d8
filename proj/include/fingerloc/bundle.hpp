#pragma once

// Everything the online stage needs, cached by the offline stage.
//
// On disk a bundle is a directory:
//   manifest.json          format tag and version, RoI geometry, feature
//                          universe, likelihood model, selection profiles
//                          (config only), and a size + CRC-32 for every
//                          record file
//   cells/cell-NNNNN.json  one record per subregion: bounds, observable
//                          features, gridded reference points and the
//                          per-selector feature subsets
// See docs/bundle-format.md for the field-level layout.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fingerloc/feature_select.hpp"
#include "fingerloc/positioning.hpp"
#include "fingerloc/rfm.hpp"

namespace fingerloc {

inline constexpr int kBundleFormatVersion = 1;
inline constexpr const char* kBundleFormatTag = "fingerloc-bundle";

struct BundleGridPoint {
    Point2 location;
    /// Integer dBm values, absent = non-measurable.
    std::map<FeatureId, int> values;
    /// Unnormalized prior weight of this location.
    double prior = 1.0;

    friend bool operator==(const BundleGridPoint&, const BundleGridPoint&) = default;
};

struct BundleCell {
    std::size_t cell_index = 0;
    Rect bounds;
    /// Sorted.
    std::vector<FeatureId> observable_features;
    std::vector<BundleGridPoint> grid;

    friend bool operator==(const BundleCell&, const BundleCell&) = default;
};

struct PrecomputedBundle {
    RoiGeometry roi;
    double grid_spacing = 0.2;
    /// Sorted.
    std::vector<FeatureId> feature_universe;
    /// Every subregion in index order; empty ones have no grid points.
    std::vector<BundleCell> cells;
    /// Feature subsets keyed by selector label ("foba", "forward", ...).
    std::map<std::string, SelectionProfile> profiles;
    LikelihoodModel likelihood;
    /// Operating number of candidate subregions chosen offline (0 = unset).
    std::size_t default_m = 0;
    std::uint64_t seed = 0;

    /// Grid points per non-empty cell (0 when there is none).
    std::size_t alpha() const;

    /// Throws "inconsistent-bundle" when a referenced feature is missing from
    /// the universe, a profile names an unknown cell, or alpha varies.
    void validate() const;

    friend bool operator==(const PrecomputedBundle&, const PrecomputedBundle&) = default;
};

/// Assembles a bundle from a gridded RFM and its partition.
PrecomputedBundle make_bundle(const GriddedRfm& gridded, const SubregionIndex& index,
                              const LikelihoodModel& likelihood, std::uint64_t seed);

/// Writes to a sibling temporary directory and renames it into place, so the
/// target holds either the previous bundle or the complete new one.
void save_bundle(const PrecomputedBundle& bundle, const std::filesystem::path& dir);

/// Throws "corrupt-bundle" for unreadable or truncated files,
/// "version-mismatch" for another format version and "checksum-mismatch" when
/// a record's CRC-32 disagrees with the manifest.
PrecomputedBundle load_bundle(const std::filesystem::path& dir);

/// CRC-32 of the manifest, which itself pins every record's checksum.
std::uint32_t bundle_checksum(const std::filesystem::path& dir);

std::uint32_t crc32_of(const std::string& bytes);

}  // namespace fingerloc
