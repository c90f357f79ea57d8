#pragma once

// Online positioning against a precomputed bundle: rank subregions by MJI,
// fuse the relevant features of the top m, then run weighted kNN or MAP over
// the grid points of those subregions only.

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fingerloc/bundle.hpp"
#include "fingerloc/positioning.hpp"
#include "fingerloc/rfm.hpp"
#include "fingerloc/subregion_select.hpp"

namespace fingerloc {

/// Selector label whose per-cell "selection" is every observable feature.
inline constexpr const char* kAllFeatures = "all";

struct LocateConfig {
    /// Candidate subregions; 0 uses the bundle's default (or every cell).
    std::size_t m = 0;
    /// Candidate features kept; -1 keeps all.
    int h = -1;
    Method method = Method::Knn;
    std::size_t k = 5;
    std::string selector = "foba";
    MjiFormula formula = MjiFormula::Coverage;
};

struct CandidateFeatureSet {
    /// Most frequently selected first, ties by id.
    std::vector<FeatureId> features;
    int h = -1;
};

/// Features observed in fp and selected in at least one of `cells`, ranked by
/// how many of those cells select them and truncated to h (-1 keeps all).
/// Throws "no-common-features" for an empty result and "bad-config" for h = 0
/// or h < -1.
CandidateFeatureSet candidate_features(const Fingerprint& fp, std::span<const std::size_t> cells,
                                       const SelectionProfile& profile, int h);

struct LocateResult {
    Point2 estimate;
    /// No candidate feature was found; the estimate is the top cell's centre.
    bool fallback = false;
    std::vector<std::size_t> cells;
    std::size_t candidate_count = 0;
    std::size_t locations_scored = 0;
    std::size_t feature_comparisons = 0;
};

/// Read-only view of a bundle prepared for fast queries. Safe to share across
/// threads; the bundle must outlive the locator.
class Locator {
public:
    explicit Locator(const PrecomputedBundle& bundle);

    const PrecomputedBundle& bundle() const { return *bundle_; }
    std::size_t cell_count() const { return cell_keys_.size(); }
    std::size_t alpha() const { return alpha_; }
    bool has_selector(const std::string& label) const { return selections_.count(label) != 0; }
    std::vector<std::string> selectors() const;

    /// Top m cells by MJI. Throws "bad-m" unless 1 <= m <= cell count.
    std::vector<std::size_t> rank_subregions(const Fingerprint& fp, std::size_t m,
                                             MjiFormula formula = MjiFormula::Coverage) const;

    CandidateFeatureSet candidate_features(const Fingerprint& fp, std::span<const std::size_t> cells,
                                           const std::string& selector, int h) const;

    /// Weighted kNN over the grid points of `cells` using `candidates`.
    Point2 knn_estimate(const Fingerprint& fp, const CandidateFeatureSet& candidates,
                        std::span<const std::size_t> cells, std::size_t k) const;
    /// MAP grid location over `cells` using `candidates`.
    Point2 map_estimate(const Fingerprint& fp, const CandidateFeatureSet& candidates,
                        std::span<const std::size_t> cells) const;

    /// Subregion ranking, candidate fusion and estimation in one call.
    LocateResult online_position(const Fingerprint& fp, const LocateConfig& config) const;

    /// Full search: every grid point, every query feature the bundle knows.
    Point2 baseline_knn(const Fingerprint& fp, std::size_t k) const;
    Point2 baseline_map(const Fingerprint& fp) const;

private:
    struct Query {
        std::vector<FeatureIndex> features;  // ascending
        std::vector<double> values;          // aligned with features
        std::vector<int> bins;               // aligned with features
    };

    Query restrict(const EncodedFingerprint& q, std::span<const FeatureIndex> features) const;
    std::vector<FeatureIndex> ranked_candidates(const EncodedFingerprint& q, std::span<const std::size_t> cells,
                                                const std::vector<std::vector<FeatureIndex>>& selected, int h) const;
    std::vector<FeatureIndex> encode_candidates(const CandidateFeatureSet& candidates) const;
    std::vector<std::size_t> ranked_cells(const EncodedFingerprint& q, std::size_t m, MjiFormula formula) const;

    // Sums one per-feature table row per grid point of `cells` into `acc`,
    // feature by feature in ascending index order.
    void accumulate(std::span<const double* const> rows, const Query& q, std::span<const std::size_t> cells,
                    std::vector<double>& acc) const;
    Point2 knn(const Query& q, std::span<const std::size_t> cells, std::size_t k, std::size_t* scored) const;
    Point2 map(const Query& q, std::span<const std::size_t> cells, std::size_t* scored) const;
    const std::vector<std::vector<FeatureIndex>>& selection(const std::string& label) const;

    const PrecomputedBundle* bundle_;
    FeatureDictionary dict_;
    LogLikelihoodTable likelihood_;
    /// likelihood_.lookup over every grid value, one row of kTableSize per
    /// user bin, so MAP scoring is a single indexed load.
    std::vector<double> map_rows_;
    std::size_t points_ = 0;
    std::vector<Point2> locations_;
    std::vector<double> log_prior_;
    /// Blocked by cell, feature-major inside a block:
    /// values_[first * F + f * size + (id - first)] for the cell starting at
    /// grid id `first`; kAbsentRss when absent.
    std::vector<std::int16_t> values_;
    std::size_t alpha_ = 0;
    std::vector<std::size_t> cell_first_;  // first grid id of each cell
    std::vector<std::size_t> cell_size_;
    std::vector<std::vector<FeatureIndex>> cell_keys_;
    std::map<std::string, std::vector<std::vector<FeatureIndex>>> selections_;
    std::vector<std::size_t> all_cells_;
};

}  // namespace fingerloc
