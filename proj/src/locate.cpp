#include "fingerloc/locate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "fingerloc/error.hpp"

namespace fingerloc {

namespace {

constexpr int kTableSize = 1 - kAbsentRss;  // grid values kAbsentRss..0

void check_h(int h) {
    if (h == 0 || h < -1) throw Error(errc::kBadConfig, "h must be -1 or positive, got " + std::to_string(h));
}

// Ranks (feature, count) pairs by descending count, then ascending key.
template <typename Key>
std::vector<Key> rank_by_count(std::map<Key, std::size_t> counts, int h) {
    std::vector<std::pair<Key, std::size_t>> ranked(counts.begin(), counts.end());
    std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    if (h > 0 && ranked.size() > static_cast<std::size_t>(h)) ranked.resize(static_cast<std::size_t>(h));
    std::vector<Key> out;
    out.reserve(ranked.size());
    for (auto& r : ranked) out.push_back(std::move(r.first));
    return out;
}

}  // namespace

CandidateFeatureSet candidate_features(const Fingerprint& fp, std::span<const std::size_t> cells,
                                       const SelectionProfile& profile, int h) {
    check_h(h);
    if (cells.empty()) throw Error(errc::kBadM, "no candidate subregions");
    std::map<FeatureId, std::size_t> counts;
    for (std::size_t c : cells) {
        auto it = profile.per_cell.find(c);
        if (it == profile.per_cell.end()) continue;
        for (const auto& f : it->second.features)
            if (fp.has(f)) ++counts[f];
    }
    if (counts.empty()) throw Error(errc::kNoCommonFeatures, "query shares no selected feature with its subregions");
    return {rank_by_count(std::move(counts), h), h};
}

Locator::Locator(const PrecomputedBundle& bundle)
    : bundle_(&bundle), dict_(bundle.feature_universe), likelihood_(bundle.likelihood), alpha_(bundle.alpha()) {
    for (const auto& c : bundle.cells) points_ += c.grid.size();
    locations_.reserve(points_);
    log_prior_.reserve(points_);
    values_.assign(points_ * dict_.size(), static_cast<std::int16_t>(kAbsentRss));

    const std::size_t n = bundle.cells.size();
    cell_first_.resize(n);
    cell_size_.resize(n);
    cell_keys_.resize(n);
    auto encode_ids = [&](const std::vector<FeatureId>& ids) {
        std::vector<FeatureIndex> out;
        out.reserve(ids.size());
        for (const auto& id : ids) {
            auto f = dict_.find(id);
            if (!f) throw Error(errc::kInconsistentBundle, "feature " + id + " missing from the universe");
            out.push_back(*f);
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    };

    for (std::size_t i = 0; i < n; ++i) {
        const auto& cell = bundle.cells[i];
        cell_first_[i] = locations_.size();
        cell_size_[i] = cell.grid.size();
        cell_keys_[i] = encode_ids(cell.observable_features);
        const std::size_t block = cell_first_[i] * dict_.size();
        for (std::size_t p = 0; p < cell.grid.size(); ++p) {
            const auto& g = cell.grid[p];
            locations_.push_back(g.location);
            log_prior_.push_back(std::log(g.prior));
            for (const auto& [fid, v] : g.values) {
                auto f = dict_.find(fid);
                if (!f) throw Error(errc::kInconsistentBundle, "grid value for unknown feature " + fid);
                values_[block + *f * cell.grid.size() + p] = static_cast<std::int16_t>(v);
            }
        }
    }
    map_rows_.resize(100 * kTableSize);
    for (int bin = -99; bin <= 0; ++bin)
        for (int g = kAbsentRss; g <= 0; ++g)
            map_rows_[static_cast<std::size_t>(bin + 99) * kTableSize + static_cast<std::size_t>(g - kAbsentRss)] =
                likelihood_.lookup(g, bin);
    all_cells_.resize(n);
    for (std::size_t i = 0; i < n; ++i) all_cells_[i] = i;

    selections_[kAllFeatures] = cell_keys_;
    for (const auto& [label, profile] : bundle.profiles) {
        std::vector<std::vector<FeatureIndex>> sel(n);
        for (const auto& [cell, subset] : profile.per_cell) {
            if (cell >= n) throw Error(errc::kInconsistentBundle, "profile " + label + " names cell " + std::to_string(cell));
            sel[cell] = encode_ids(subset.features);
        }
        selections_[label] = std::move(sel);
    }
}

std::vector<std::string> Locator::selectors() const {
    std::vector<std::string> out;
    for (const auto& [label, sel] : selections_) out.push_back(label);
    return out;
}

const std::vector<std::vector<FeatureIndex>>& Locator::selection(const std::string& label) const {
    auto it = selections_.find(label);
    if (it == selections_.end()) throw Error(errc::kBadConfig, "bundle has no selector '" + label + "'");
    return it->second;
}

std::vector<std::size_t> Locator::ranked_cells(const EncodedFingerprint& q, std::size_t m, MjiFormula formula) const {
    if (m < 1 || m > cell_keys_.size())
        throw Error(errc::kBadM, "m=" + std::to_string(m) + " outside [1, " + std::to_string(cell_keys_.size()) + "]");
    std::vector<std::uint8_t> present(dict_.size(), 0);
    for (const auto& [f, v] : q.values) present[f] = 1;
    const std::size_t user_size = q.values.size() + q.unknown;
    std::vector<MjiScore> scores(cell_keys_.size());
    for (std::size_t i = 0; i < cell_keys_.size(); ++i) {
        std::size_t common = 0;
        for (FeatureIndex f : cell_keys_[i]) common += present[f];
        scores[i] = {i, mji_from_counts(common, user_size, cell_keys_[i].size(), formula)};
    }
    return top_cells(std::move(scores), m);
}

std::vector<std::size_t> Locator::rank_subregions(const Fingerprint& fp, std::size_t m, MjiFormula formula) const {
    return ranked_cells(encode(fp, dict_), m, formula);
}

std::vector<FeatureIndex> Locator::ranked_candidates(const EncodedFingerprint& q, std::span<const std::size_t> cells,
                                                     const std::vector<std::vector<FeatureIndex>>& selected,
                                                     int h) const {
    check_h(h);
    // count[f] is 0 for features the query lacks, 1 + occurrences otherwise.
    std::vector<std::uint32_t> count(dict_.size(), 0);
    for (const auto& [f, v] : q.values) count[f] = 1;
    std::vector<FeatureIndex> seen;
    for (std::size_t c : cells) {
        if (c >= selected.size()) throw Error(errc::kBadCell, "cell " + std::to_string(c) + " out of range");
        for (FeatureIndex f : selected[c]) {
            if (count[f] == 0) continue;
            if (count[f]++ == 1) seen.push_back(f);
        }
    }
    if (seen.empty()) throw Error(errc::kNoCommonFeatures, "query shares no selected feature with its subregions");
    std::sort(seen.begin(), seen.end(), [&](FeatureIndex a, FeatureIndex b) {
        return count[a] != count[b] ? count[a] > count[b] : a < b;
    });
    if (h > 0 && seen.size() > static_cast<std::size_t>(h)) seen.resize(static_cast<std::size_t>(h));
    return seen;
}

CandidateFeatureSet Locator::candidate_features(const Fingerprint& fp, std::span<const std::size_t> cells,
                                                const std::string& selector, int h) const {
    if (cells.empty()) throw Error(errc::kBadM, "no candidate subregions");
    const auto ranked = ranked_candidates(encode(fp, dict_), cells, selection(selector), h);
    CandidateFeatureSet out;
    out.h = h;
    for (FeatureIndex f : ranked) out.features.push_back(dict_.id(f));
    return out;
}

std::vector<FeatureIndex> Locator::encode_candidates(const CandidateFeatureSet& candidates) const {
    std::vector<FeatureIndex> out;
    out.reserve(candidates.features.size());
    for (const auto& id : candidates.features) {
        auto f = dict_.find(id);
        if (!f) throw Error(errc::kBadConfig, "candidate feature " + id + " is not in the bundle");
        out.push_back(*f);
    }
    return out;
}

Locator::Query Locator::restrict(const EncodedFingerprint& q, std::span<const FeatureIndex> features) const {
    Query out;
    out.features.assign(features.begin(), features.end());
    // Distances and posteriors accumulate in index order so that the result
    // does not depend on how the candidates were ranked.
    std::sort(out.features.begin(), out.features.end());
    out.values.reserve(out.features.size());
    out.bins.reserve(out.features.size());
    for (FeatureIndex f : out.features) {
        const double v = q.value(f).value_or(static_cast<double>(kAbsentRss));
        out.values.push_back(v);
        out.bins.push_back(LogLikelihoodTable::bin(v));
    }
    return out;
}

void Locator::accumulate(std::span<const double* const> rows, const Query& q, std::span<const std::size_t> cells,
                         std::vector<double>& acc) const {
    double* a = acc.data();
    for (std::size_t c : cells) {
        const std::size_t size = cell_size_[c];
        const std::int16_t* block = values_.data() + cell_first_[c] * dict_.size();
        // Two features per sweep; each point still adds its terms in index
        // order, so the sums match a one-feature-at-a-time loop bit for bit.
        std::size_t j = 0;
        for (; j + 1 < q.features.size(); j += 2) {
            const double* r0 = rows[j] - kAbsentRss;
            const double* r1 = rows[j + 1] - kAbsentRss;
            const std::int16_t* v0 = block + q.features[j] * size;
            const std::int16_t* v1 = block + q.features[j + 1] * size;
            for (std::size_t p = 0; p < size; ++p) a[p] = (a[p] + r0[v0[p]]) + r1[v1[p]];
        }
        if (j < q.features.size()) {
            const double* r0 = rows[j] - kAbsentRss;
            const std::int16_t* v0 = block + q.features[j] * size;
            for (std::size_t p = 0; p < size; ++p) a[p] += r0[v0[p]];
        }
        a += size;
    }
}

Point2 Locator::knn(const Query& q, std::span<const std::size_t> cells, std::size_t k, std::size_t* scored) const {
    std::size_t n = 0;
    for (std::size_t c : cells) n += cell_size_.at(c);
    std::vector<double> tables(q.features.size() * kTableSize);
    std::vector<const double*> rows(q.features.size());
    for (std::size_t j = 0; j < q.features.size(); ++j) {
        rows[j] = tables.data() + j * kTableSize;
        for (int g = kAbsentRss; g <= 0; ++g) tables[j * kTableSize + (g - kAbsentRss)] = knn_term(q.values[j], g);
    }
    std::vector<double> acc(n, 0.0);
    accumulate(rows, q, cells, acc);

    std::vector<ScoredPoint> points;
    points.reserve(n);
    std::size_t slot = 0;
    for (std::size_t c : cells)
        for (std::size_t id = cell_first_[c]; id < cell_first_[c] + cell_size_[c]; ++id)
            points.push_back({acc[slot++], id, locations_[id]});
    if (scored) *scored = n;
    return knn_combine(points, k);
}

Point2 Locator::map(const Query& q, std::span<const std::size_t> cells, std::size_t* scored) const {
    std::size_t n = 0;
    for (std::size_t c : cells) n += cell_size_.at(c);
    std::vector<const double*> rows(q.features.size());
    for (std::size_t j = 0; j < q.features.size(); ++j)
        rows[j] = map_rows_.data() + static_cast<std::size_t>(q.bins[j] + 99) * kTableSize;
    std::vector<double> acc;
    acc.reserve(n);
    for (std::size_t c : cells)
        acc.insert(acc.end(), log_prior_.begin() + static_cast<std::ptrdiff_t>(cell_first_[c]),
                   log_prior_.begin() + static_cast<std::ptrdiff_t>(cell_first_[c] + cell_size_[c]));
    accumulate(rows, q, cells, acc);
    if (scored) *scored = n;

    // Argmax with ties to the lowest grid id; cells arrive in rank order.
    const std::size_t none = std::numeric_limits<std::size_t>::max();
    std::size_t best = none;
    double best_score = -std::numeric_limits<double>::infinity();
    const double* a = acc.data();
    for (std::size_t c : cells) {
        for (std::size_t p = 0; p < cell_size_[c]; ++p) {
            // Scores are finite or -inf; -inf and NaN never compare greater.
            const double s = a[p];
            if (s > best_score) {
                best = cell_first_[c] + p;
                best_score = s;
            } else if (s == best_score && best != none && cell_first_[c] + p < best) {
                best = cell_first_[c] + p;
            }
        }
        a += cell_size_[c];
    }
    if (n == 0) throw Error(errc::kInsufficientCandidates, "selected subregions hold no grid points");
    if (best == none) throw Error(errc::kDegeneratePosterior, "no location has a finite posterior");
    return locations_[best];
}

Point2 Locator::knn_estimate(const Fingerprint& fp, const CandidateFeatureSet& candidates,
                             std::span<const std::size_t> cells, std::size_t k) const {
    const auto f = encode_candidates(candidates);
    return knn(restrict(encode(fp, dict_), f), cells, k, nullptr);
}

Point2 Locator::map_estimate(const Fingerprint& fp, const CandidateFeatureSet& candidates,
                             std::span<const std::size_t> cells) const {
    const auto f = encode_candidates(candidates);
    return map(restrict(encode(fp, dict_), f), cells, nullptr);
}

LocateResult Locator::online_position(const Fingerprint& fp, const LocateConfig& config) const {
    LocateResult out;
    const std::size_t m = config.m != 0 ? config.m : (bundle_->default_m != 0 ? bundle_->default_m : cell_count());
    const EncodedFingerprint q = encode(fp, dict_);
    out.cells = ranked_cells(q, m, config.formula);

    std::vector<FeatureIndex> candidates;
    try {
        candidates = ranked_candidates(q, out.cells, selection(config.selector), config.h);
    } catch (const Error& e) {
        if (e.code() != errc::kNoCommonFeatures) throw;
        spdlog::debug("no common features; falling back to the centre of cell {}", out.cells.front());
        out.fallback = true;
        out.estimate = bundle_->cells[out.cells.front()].bounds.center();
        return out;
    }
    out.candidate_count = candidates.size();
    const Query restricted = restrict(q, candidates);
    out.estimate = config.method == Method::Knn ? knn(restricted, out.cells, config.k, &out.locations_scored)
                                                : map(restricted, out.cells, &out.locations_scored);
    out.feature_comparisons = out.locations_scored * out.candidate_count;
    return out;
}

Point2 Locator::baseline_knn(const Fingerprint& fp, std::size_t k) const {
    const EncodedFingerprint q = encode(fp, dict_);
    const auto keys = q.keys();
    return knn(restrict(q, keys), all_cells_, k, nullptr);
}

Point2 Locator::baseline_map(const Fingerprint& fp) const {
    const EncodedFingerprint q = encode(fp, dict_);
    const auto keys = q.keys();
    return map(restrict(q, keys), all_cells_, nullptr);
}

}  // namespace fingerloc
