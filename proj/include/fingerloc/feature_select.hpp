#pragma once

// Offline selection of the relevant features of each subregion by forward,
// backward and adaptive forward-backward (FoBa) greedy search. The loss is
// the mean squared position error of the configured positioning method.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fingerloc/densify.hpp"
#include "fingerloc/positioning.hpp"
#include "fingerloc/rfm.hpp"
#include "fingerloc/subregion_select.hpp"

namespace fingerloc {

enum class SelectorKind { Forward, Backward, Foba };

std::string to_string(SelectorKind kind);
/// Accepts "forward", "backward" or "foba"; throws "bad-config" otherwise.
SelectorKind parse_selector(const std::string& text);

struct SelectorConfig {
    /// Minimum forward loss reduction (m^2).
    double epsilon = 0.05;
    /// Relative backward increment tolerated by FoBa.
    double nu = 0.5;
    /// Forward size cap.
    std::size_t k_max = 30;
    /// Maximum backward loss increment (m^2).
    double phi = 0.05;
    /// Backward size floor.
    std::size_t k_min = 1;
    Method positioning = Method::Knn;
    std::size_t knn_k = 5;
    LikelihoodModel likelihood;
    /// Validation queries are positioned over the grid points of their top
    /// `search_cells` MJI subregions; 0 searches every subregion.
    std::size_t search_cells = 0;

    /// Throws "bad-config" on out-of-range values.
    void validate() const;

    friend bool operator==(const SelectorConfig&, const SelectorConfig&) = default;
};

struct FeatureSubset {
    std::size_t cell_index = 0;
    /// In selection order.
    std::vector<FeatureId> features;
    double final_loss = 0.0;
    double initial_loss = 0.0;
    std::size_t iterations = 0;

    friend bool operator==(const FeatureSubset&, const FeatureSubset&) = default;
};

struct SelectionProfile {
    SelectorKind kind = SelectorKind::Foba;
    SelectorConfig config;
    std::map<std::size_t, FeatureSubset> per_cell;

    friend bool operator==(const SelectionProfile&, const SelectionProfile&) = default;
};

// ---------------------------------------------------------------------------
// Generic greedy search over candidate features 0..n-1. Lower candidate index
// wins ties, so candidates should be listed in lexicographic id order.

class SubsetObjective {
public:
    virtual ~SubsetObjective() = default;

    virtual std::size_t candidate_count() const = 0;
    /// Loss of an arbitrary subset (order irrelevant).
    virtual double loss(std::span<const std::size_t> subset) = 0;

    /// Makes `subset` the reference for the incremental queries below.
    virtual void commit(std::span<const std::size_t> subset);
    virtual double loss_adding(std::size_t candidate);
    virtual double loss_removing(std::size_t candidate);

private:
    std::vector<std::size_t> committed_;
};

struct SearchEvent {
    enum class Kind { Forward, Backward } kind = Kind::Forward;
    std::size_t candidate = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    /// FoBa: the gain of the forward step that opened this purge.
    double forward_gain = 0.0;
};

struct SearchResult {
    std::vector<std::size_t> selected;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    /// Forward iterations for forward/FoBa, removals tried for backward.
    std::size_t iterations = 0;
    /// FoBa stopped at its iteration bound rather than on epsilon.
    bool hit_iteration_cap = false;
    std::vector<SearchEvent> events;
};

SearchResult forward_search(SubsetObjective& objective, const SelectorConfig& config);
SearchResult backward_search(SubsetObjective& objective, const SelectorConfig& config);
SearchResult foba_search(SubsetObjective& objective, const SelectorConfig& config);
SearchResult run_search(SelectorKind kind, SubsetObjective& objective, const SelectorConfig& config);

/// ceil(1 + L(empty) / (nu * epsilon)).
std::size_t foba_iteration_bound(double initial_loss, double nu, double epsilon);

// ---------------------------------------------------------------------------
// Positioning-error objective over a gridded reference map.

/// Deterministic per-cell reference/validation split of a gridded RFM.
struct ValidationSplit {
    std::vector<LabeledSample> reference;
    std::vector<LabeledSample> validation;
};

/// Holds out round(fraction * n) points (at least one when n >= 2) of every
/// cell as validation, chosen by a seeded shuffle.
ValidationSplit split_validation(const GriddedRfm& gridded, double fraction, std::uint64_t seed);

/// Reference grid, validation queries and per-query search sets for the
/// selection loss. Immutable once built.
class SelectionContext {
public:
    /// `index` supplies the subregion geometry and the feature keys used for
    /// MJI ranking of validation queries.
    SelectionContext(const std::vector<LabeledSample>& reference, const std::vector<LabeledSample>& validation,
                     const SubregionIndex& index, const SelectorConfig& config);

    const SelectorConfig& config() const { return config_; }
    const SubregionIndex& index() const { return index_; }
    const ReferenceGrid& grid() const { return grid_; }
    const LogLikelihoodTable& likelihood() const { return likelihood_; }
    std::size_t validation_count() const { return validation_.size(); }
    const EncodedFingerprint& validation_query(std::size_t n) const { return validation_[n]; }
    const Point2& validation_truth(std::size_t n) const { return truth_[n]; }
    /// Grid points searched for validation query n.
    const std::vector<std::uint32_t>& search_set(std::size_t n) const { return search_sets_[n]; }
    /// Validation queries whose true location lies in `cell`.
    std::vector<std::size_t> validation_in_cell(std::size_t cell) const;
    /// Coordinate-wise median of all reference locations.
    const Point2& median_location() const { return median_; }

private:
    SelectorConfig config_;
    SubregionIndex index_;
    ReferenceGrid grid_;
    LogLikelihoodTable likelihood_;
    std::vector<EncodedFingerprint> validation_;
    std::vector<Point2> truth_;
    std::vector<std::size_t> truth_cell_;
    std::vector<std::vector<std::uint32_t>> search_sets_;
    Point2 median_;
};

/// MSE objective of one set of validation queries over a candidate list.
class PositioningObjective final : public SubsetObjective {
public:
    PositioningObjective(const SelectionContext& context, std::vector<std::size_t> validation_ids,
                         std::vector<FeatureIndex> candidates);

    std::size_t candidate_count() const override { return candidates_.size(); }
    double loss(std::span<const std::size_t> subset) override;
    void commit(std::span<const std::size_t> subset) override;
    double loss_adding(std::size_t candidate) override;
    double loss_removing(std::size_t candidate) override;

    const std::vector<FeatureIndex>& candidates() const { return candidates_; }

private:
    double term(std::size_t query, std::uint32_t point, std::size_t candidate) const;
    double loss_with_delta(std::size_t candidate, double sign);
    double empty_loss() const;

    const SelectionContext& ctx_;
    std::vector<std::size_t> queries_;
    std::vector<FeatureIndex> candidates_;
    std::vector<std::vector<double>> base_;  // per query, per search-set point
    std::vector<double> user_;               // per query, per candidate (absent -> kAbsentRss)
    std::size_t committed_size_ = 0;
    std::vector<ScoredPoint> scratch_;
};

/// Mean squared position error using only `features`; the empty set scores
/// the median reference location.
double fs_loss(const SelectionContext& context, const FeatureSet& features,
               const std::vector<std::size_t>& validation_ids);
/// Convenience form: every gridded point is a reference, all are searched.
double fs_loss(const FeatureSet& features, Method method, const std::vector<LabeledSample>& validation,
               const GriddedRfm& gridded, const SelectorConfig& config = {});

/// Runs the selector on one subregion against its own validation queries.
FeatureSubset select_features(const SelectionContext& context, std::size_t cell, SelectorKind kind);
FeatureSubset forward_greedy(const SelectionContext& context, std::size_t cell);
FeatureSubset backward_greedy(const SelectionContext& context, std::size_t cell);
FeatureSubset foba(const SelectionContext& context, std::size_t cell);

/// Runs the selector on every non-empty subregion. Throws "empty-rfm" when
/// the index has none; per-cell failures are rethrown with the cell index.
SelectionProfile build_profile(const SelectionContext& context, SelectorKind kind, std::size_t threads = 0);

}  // namespace fingerloc
