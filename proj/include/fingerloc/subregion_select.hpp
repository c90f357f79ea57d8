#pragma once

// Candidate-subregion selection by Modified Jaccard Index (MJI) and the
// validation loss used to pick the number m of candidate subregions.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "fingerloc/rfm.hpp"

namespace fingerloc {

enum class MjiFormula {
    /// |U ∩ G| / |G|: how much of the subregion's feature set the query covers.
    Coverage,
    /// Plain Jaccard |U ∩ G| / |U ∪ G|, kept for comparison runs.
    Jaccard,
};

double mji(const FeatureSet& user_keys, const FeatureSet& cell_keys, MjiFormula formula = MjiFormula::Coverage);

/// MJI from the intersection size and the two set sizes.
inline double mji_from_counts(std::size_t common, std::size_t user_size, std::size_t cell_size, MjiFormula formula) {
    if (formula == MjiFormula::Coverage) {
        if (cell_size == 0) return 0.0;
        return static_cast<double>(common) / static_cast<double>(cell_size);
    }
    const std::size_t uni = user_size + cell_size - common;
    if (uni == 0) return 0.0;
    return static_cast<double>(common) / static_cast<double>(uni);
}

/// Same score over sorted, duplicate-free id ranges. `user_extra` counts query
/// keys that are not representable in the id space (they only matter for
/// Jaccard).
template <typename Id>
double mji_sorted(std::span<const Id> user, std::span<const Id> cell, std::size_t user_extra = 0,
                  MjiFormula formula = MjiFormula::Coverage) {
    std::size_t common = 0;
    auto u = user.begin();
    auto c = cell.begin();
    while (u != user.end() && c != cell.end()) {
        if (*u < *c) {
            ++u;
        } else if (*c < *u) {
            ++c;
        } else {
            ++common;
            ++u;
            ++c;
        }
    }
    return mji_from_counts(common, user.size() + user_extra, cell.size(), formula);
}

struct MjiScore {
    std::size_t cell_index = 0;
    double score = 0.0;
};

/// Orders scores by descending MJI, ties by ascending cell index, and keeps
/// the first m.
std::vector<std::size_t> top_cells(std::vector<MjiScore> scores, std::size_t m);

std::vector<MjiScore> score_subregions(const FeatureSet& user_keys, const SubregionIndex& index,
                                       MjiFormula formula = MjiFormula::Coverage);

/// The m best cells for fp. Throws "bad-m" unless 1 <= m <= cell count.
std::vector<std::size_t> rank_subregions(const Fingerprint& fp, const SubregionIndex& index, std::size_t m,
                                         MjiFormula formula = MjiFormula::Coverage);

/// 1 when the cell containing true_location is selected, else 0. Throws
/// "outside-roi".
int selection_indicator(const Point2& true_location, std::span<const std::size_t> selected_cells,
                        const SubregionIndex& index);

/// Fraction of validation samples whose true cell is missing from their top-m
/// ranking. Samples that fall in empty cells are excluded. Throws
/// "empty-validation" when nothing is left to evaluate.
double selection_loss(const std::vector<LabeledSample>& validation, const SubregionIndex& index, std::size_t m,
                      MjiFormula formula = MjiFormula::Coverage);

struct LossCurve {
    struct Point {
        std::size_t m = 0;
        double loss = 0.0;
    };
    std::vector<Point> points;
};

/// Loss for m = 1..m_max in one pass (each sample is ranked once).
LossCurve loss_curve(const std::vector<LabeledSample>& validation, const SubregionIndex& index, std::size_t m_max,
                     MjiFormula formula = MjiFormula::Coverage);

/// Smallest m whose loss drops by at most flatness_tol over the next `window`
/// steps; the last m of the curve when none does.
std::size_t choose_m(const LossCurve& curve, double flatness_tol = 0.01, std::size_t window = 5);

}  // namespace fingerloc
