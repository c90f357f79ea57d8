#include "fingerloc/subregion_select.hpp"

#include <spdlog/spdlog.h>

#include "fingerloc/error.hpp"

namespace fingerloc {

double mji(const FeatureSet& user_keys, const FeatureSet& cell_keys, MjiFormula formula) {
    std::size_t common = 0;
    auto u = user_keys.begin();
    auto c = cell_keys.begin();
    while (u != user_keys.end() && c != cell_keys.end()) {
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
    if (formula == MjiFormula::Coverage) {
        if (cell_keys.empty()) return 0.0;
        return static_cast<double>(common) / static_cast<double>(cell_keys.size());
    }
    const std::size_t uni = user_keys.size() + cell_keys.size() - common;
    return uni == 0 ? 0.0 : static_cast<double>(common) / static_cast<double>(uni);
}

std::vector<std::size_t> top_cells(std::vector<MjiScore> scores, std::size_t m) {
    m = std::min(m, scores.size());
    auto better = [](const MjiScore& a, const MjiScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.cell_index < b.cell_index;
    };
    std::partial_sort(scores.begin(), scores.begin() + static_cast<std::ptrdiff_t>(m), scores.end(), better);
    std::vector<std::size_t> out(m);
    for (std::size_t i = 0; i < m; ++i) out[i] = scores[i].cell_index;
    return out;
}

std::vector<MjiScore> score_subregions(const FeatureSet& user_keys, const SubregionIndex& index,
                                       MjiFormula formula) {
    std::vector<MjiScore> scores;
    scores.reserve(index.cells.size());
    for (const auto& cell : index.cells)
        scores.push_back({cell.cell_index, mji(user_keys, cell.observable_features, formula)});
    return scores;
}

std::vector<std::size_t> rank_subregions(const Fingerprint& fp, const SubregionIndex& index, std::size_t m,
                                         MjiFormula formula) {
    if (m < 1 || m > index.cells.size())
        throw Error(errc::kBadM, "m=" + std::to_string(m) + " with " + std::to_string(index.cells.size()) + " cells");
    return top_cells(score_subregions(fp.keys(), index, formula), m);
}

int selection_indicator(const Point2& true_location, std::span<const std::size_t> selected_cells,
                        const SubregionIndex& index) {
    const std::size_t cell = index.roi.cell_of(true_location);
    return std::find(selected_cells.begin(), selected_cells.end(), cell) != selected_cells.end() ? 1 : 0;
}

namespace {

// 1-based rank of each usable sample's true cell in its full MJI ranking.
std::vector<std::size_t> true_cell_ranks(const std::vector<LabeledSample>& validation, const SubregionIndex& index,
                                         MjiFormula formula) {
    if (validation.empty()) throw Error(errc::kEmptyValidation, "no validation samples");
    std::vector<std::size_t> ranks;
    std::size_t skipped = 0;
    for (const auto& sample : validation) {
        const std::size_t truth = index.roi.cell_of(sample.location);
        if (index.cells[truth].empty()) {
            ++skipped;
            continue;
        }
        const auto order = top_cells(score_subregions(sample.fingerprint.keys(), index, formula), index.cells.size());
        const auto pos = std::find(order.begin(), order.end(), truth) - order.begin();
        ranks.push_back(static_cast<std::size_t>(pos) + 1);
    }
    if (skipped > 0)
        spdlog::warn("{} of {} validation samples fall in empty cells and are excluded from the loss", skipped,
                     validation.size());
    if (ranks.empty()) throw Error(errc::kEmptyValidation, "every validation sample falls in an empty cell");
    return ranks;
}

}  // namespace

double selection_loss(const std::vector<LabeledSample>& validation, const SubregionIndex& index, std::size_t m,
                      MjiFormula formula) {
    if (m < 1 || m > index.cells.size()) throw Error(errc::kBadM, "m=" + std::to_string(m));
    const auto ranks = true_cell_ranks(validation, index, formula);
    const auto hits = std::count_if(ranks.begin(), ranks.end(), [m](std::size_t r) { return r <= m; });
    return 1.0 - static_cast<double>(hits) / static_cast<double>(ranks.size());
}

LossCurve loss_curve(const std::vector<LabeledSample>& validation, const SubregionIndex& index, std::size_t m_max,
                     MjiFormula formula) {
    if (m_max < 1 || m_max > index.cells.size()) throw Error(errc::kBadM, "m_max=" + std::to_string(m_max));
    const auto ranks = true_cell_ranks(validation, index, formula);
    std::vector<std::size_t> hits_at(index.cells.size() + 1, 0);
    for (std::size_t r : ranks) ++hits_at[r];
    LossCurve curve;
    std::size_t hits = 0;
    for (std::size_t m = 1; m <= m_max; ++m) {
        hits += hits_at[m];
        curve.points.push_back({m, 1.0 - static_cast<double>(hits) / static_cast<double>(ranks.size())});
    }
    return curve;
}

std::size_t choose_m(const LossCurve& curve, double flatness_tol, std::size_t window) {
    const auto& pts = curve.points;
    if (pts.empty()) throw Error(errc::kBadConfig, "empty loss curve");
    for (std::size_t i = 0; i < pts.size(); ++i) {
        const std::size_t ahead = std::min(i + window, pts.size() - 1);
        if (pts[i].loss - pts[ahead].loss <= flatness_tol) return pts[i].m;
    }
    return pts.back().m;
}

}  // namespace fingerloc
