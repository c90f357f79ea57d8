#include "fingerloc/feature_select.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <random>
#include <thread>

#include <spdlog/spdlog.h>

#include "fingerloc/error.hpp"

namespace fingerloc {

std::string to_string(SelectorKind kind) {
    switch (kind) {
        case SelectorKind::Forward:
            return "forward";
        case SelectorKind::Backward:
            return "backward";
        case SelectorKind::Foba:
        default:
            return "foba";
    }
}

SelectorKind parse_selector(const std::string& text) {
    if (text == "forward") return SelectorKind::Forward;
    if (text == "backward") return SelectorKind::Backward;
    if (text == "foba") return SelectorKind::Foba;
    throw Error(errc::kBadConfig, "unknown selector '" + text + "'");
}

void SelectorConfig::validate() const {
    if (!(epsilon > 0.0)) throw Error(errc::kBadConfig, "epsilon must be > 0");
    if (!(nu > 0.0 && nu < 1.0)) throw Error(errc::kBadConfig, "nu must be in (0, 1)");
    if (k_max < 1) throw Error(errc::kBadConfig, "k_max must be >= 1");
    if (!(phi > 0.0)) throw Error(errc::kBadConfig, "phi must be > 0");
    if (k_min < 1) throw Error(errc::kBadConfig, "k_min must be >= 1");
    if (knn_k < 1) throw Error(errc::kBadConfig, "knn k must be >= 1");
    if (!(likelihood.sigma > 0.0)) throw Error(errc::kBadConfig, "sigma must be > 0");
    if (!(likelihood.p_miss >= 0.0 && likelihood.p_miss <= 1.0)) throw Error(errc::kBadConfig, "p_miss must be in [0, 1]");
}

// ---------------------------------------------------------------------------
// Greedy searches

void SubsetObjective::commit(std::span<const std::size_t> subset) {
    committed_.assign(subset.begin(), subset.end());
}

double SubsetObjective::loss_adding(std::size_t candidate) {
    auto s = committed_;
    s.push_back(candidate);
    return loss(s);
}

double SubsetObjective::loss_removing(std::size_t candidate) {
    auto s = committed_;
    s.erase(std::remove(s.begin(), s.end(), candidate), s.end());
    return loss(s);
}

std::size_t foba_iteration_bound(double initial_loss, double nu, double epsilon) {
    return static_cast<std::size_t>(std::ceil(1.0 + std::max(0.0, initial_loss) / (nu * epsilon)));
}

namespace {

struct Pick {
    std::size_t candidate = 0;
    double loss = std::numeric_limits<double>::infinity();
    bool found = false;
};

Pick best_addition(SubsetObjective& objective, const std::vector<char>& in_set) {
    Pick best;
    for (std::size_t c = 0; c < in_set.size(); ++c) {
        if (in_set[c]) continue;
        const double l = objective.loss_adding(c);
        if (!best.found || l < best.loss) best = {c, l, true};
    }
    return best;
}

Pick best_removal(SubsetObjective& objective, const std::vector<std::size_t>& selected) {
    Pick best;
    // Scan in candidate order so ties go to the lowest candidate index.
    auto order = selected;
    std::sort(order.begin(), order.end());
    for (std::size_t c : order) {
        const double l = objective.loss_removing(c);
        if (!best.found || l < best.loss) best = {c, l, true};
    }
    return best;
}

void erase_value(std::vector<std::size_t>& v, std::size_t value) {
    v.erase(std::remove(v.begin(), v.end(), value), v.end());
}

}  // namespace

SearchResult forward_search(SubsetObjective& objective, const SelectorConfig& config) {
    const std::size_t n = objective.candidate_count();
    SearchResult result;
    std::vector<char> in_set(n, 0);
    objective.commit(result.selected);
    double current = objective.loss(result.selected);
    result.initial_loss = current;

    while (result.selected.size() < n) {
        ++result.iterations;
        objective.commit(result.selected);
        const Pick best = best_addition(objective, in_set);
        const double gain = current - best.loss;
        if (gain <= config.epsilon) break;  // the failing feature is discarded
        result.events.push_back({SearchEvent::Kind::Forward, best.candidate, current, best.loss, gain});
        result.selected.push_back(best.candidate);
        in_set[best.candidate] = 1;
        current = best.loss;
        if (result.selected.size() >= config.k_max) break;
    }
    result.final_loss = objective.loss(result.selected);
    return result;
}

SearchResult backward_search(SubsetObjective& objective, const SelectorConfig& config) {
    const std::size_t n = objective.candidate_count();
    SearchResult result;
    result.initial_loss = objective.loss(std::span<const std::size_t>{});
    result.selected.resize(n);
    std::iota(result.selected.begin(), result.selected.end(), std::size_t{0});
    double current = objective.loss(result.selected);

    while (result.selected.size() > config.k_min) {
        ++result.iterations;
        objective.commit(result.selected);
        const Pick best = best_removal(objective, result.selected);
        const double increase = best.loss - current;
        if (increase >= config.phi) break;  // undo: keep the larger set
        result.events.push_back({SearchEvent::Kind::Backward, best.candidate, current, best.loss, 0.0});
        erase_value(result.selected, best.candidate);
        current = best.loss;
    }
    result.final_loss = objective.loss(result.selected);
    return result;
}

SearchResult foba_search(SubsetObjective& objective, const SelectorConfig& config) {
    const std::size_t n = objective.candidate_count();
    SearchResult result;
    std::vector<char> in_set(n, 0);
    double current = objective.loss(result.selected);
    result.initial_loss = current;
    const std::size_t bound = foba_iteration_bound(current, config.nu, config.epsilon);

    while (result.selected.size() < n) {
        if (result.iterations >= bound) {
            result.hit_iteration_cap = true;
            break;
        }
        ++result.iterations;

        objective.commit(result.selected);
        const Pick add = best_addition(objective, in_set);
        const double forward_gain = current - add.loss;
        if (forward_gain <= config.epsilon) break;
        result.events.push_back({SearchEvent::Kind::Forward, add.candidate, current, add.loss, forward_gain});
        result.selected.push_back(add.candidate);
        in_set[add.candidate] = 1;
        current = add.loss;

        // Purge features whose removal costs at most nu times the last gain.
        while (result.selected.size() > 1) {
            objective.commit(result.selected);
            const Pick drop = best_removal(objective, result.selected);
            const double increase = drop.loss - current;
            if (increase > config.nu * forward_gain) break;
            result.events.push_back({SearchEvent::Kind::Backward, drop.candidate, current, drop.loss, forward_gain});
            erase_value(result.selected, drop.candidate);
            in_set[drop.candidate] = 0;
            current = drop.loss;
        }
    }
    result.final_loss = objective.loss(result.selected);
    return result;
}

SearchResult run_search(SelectorKind kind, SubsetObjective& objective, const SelectorConfig& config) {
    switch (kind) {
        case SelectorKind::Forward:
            return forward_search(objective, config);
        case SelectorKind::Backward:
            return backward_search(objective, config);
        case SelectorKind::Foba:
        default:
            return foba_search(objective, config);
    }
}

// ---------------------------------------------------------------------------
// Validation split and selection context

ValidationSplit split_validation(const GriddedRfm& gridded, double fraction, std::uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0)) throw Error(errc::kBadConfig, "validation fraction must be in [0, 1)");
    std::map<std::size_t, std::vector<std::size_t>> by_cell;
    for (std::size_t i = 0; i < gridded.points.size(); ++i) by_cell[gridded.points[i].cell].push_back(i);

    std::vector<char> held_out(gridded.points.size(), 0);
    for (auto& [cell, ids] : by_cell) {
        std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (cell + 1)));
        std::shuffle(ids.begin(), ids.end(), rng);
        auto take = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(ids.size())));
        if (fraction > 0.0 && ids.size() >= 2) take = std::clamp<std::size_t>(take, 1, ids.size() - 1);
        for (std::size_t i = 0; i < take; ++i) held_out[ids[i]] = 1;
    }
    ValidationSplit split;
    for (std::size_t i = 0; i < gridded.points.size(); ++i) {
        LabeledSample s{gridded.points[i].location, gridded.points[i].fingerprint};
        (held_out[i] ? split.validation : split.reference).push_back(std::move(s));
    }
    return split;
}

namespace {

std::vector<FeatureIndex> encode_keys(const FeatureSet& keys, const FeatureDictionary& dict) {
    std::vector<FeatureIndex> out;
    out.reserve(keys.size());
    for (const auto& k : keys)
        if (auto f = dict.find(k)) out.push_back(*f);
    return out;
}

}  // namespace

SelectionContext::SelectionContext(const std::vector<LabeledSample>& reference,
                                   const std::vector<LabeledSample>& validation, const SubregionIndex& index,
                                   const SelectorConfig& config)
    : config_(config), index_(index), likelihood_(config.likelihood) {
    config_.validate();
    if (reference.empty()) throw Error(errc::kEmptyRfm, "no reference points for feature selection");

    FeatureSet all;
    for (const auto& s : reference)
        for (const auto& kv : s.fingerprint.observations()) all.insert(kv.first);
    for (const auto& s : validation)
        for (const auto& kv : s.fingerprint.observations()) all.insert(kv.first);
    for (const auto& c : index_.cells) all.insert(c.observable_features.begin(), c.observable_features.end());

    grid_ = ReferenceGrid(FeatureDictionary({all.begin(), all.end()}), reference.size());
    std::vector<std::vector<std::uint32_t>> points_by_cell(index_.cells.size());
    std::vector<Point2> locations;
    locations.reserve(reference.size());
    // Lattice points of overhanging edge cells lie just outside the RoI.
    const RoiGeometry cells_roi = index_.roi.whole_cells();
    for (const auto& s : reference) {
        const std::size_t cell = cells_roi.cell_of(s.location);
        const std::size_t id = grid_.add(s.location, cell, s.fingerprint);
        points_by_cell[cell].push_back(static_cast<std::uint32_t>(id));
        locations.push_back(s.location);
    }
    median_ = coordinate_median(locations);

    std::vector<std::vector<FeatureIndex>> cell_keys;
    cell_keys.reserve(index_.cells.size());
    for (const auto& c : index_.cells) cell_keys.push_back(encode_keys(c.observable_features, grid_.dictionary()));

    std::vector<std::uint32_t> everything(grid_.size());
    std::iota(everything.begin(), everything.end(), 0u);
    const bool restrict = config_.search_cells > 0 && config_.search_cells < index_.cells.size();

    for (const auto& s : validation) {
        validation_.push_back(encode(s.fingerprint, grid_.dictionary()));
        truth_.push_back(s.location);
        truth_cell_.push_back(cells_roi.cell_of(s.location));
        if (!restrict) {
            search_sets_.push_back(everything);
            continue;
        }
        const auto keys = validation_.back().keys();
        std::vector<MjiScore> scores;
        scores.reserve(cell_keys.size());
        for (std::size_t c = 0; c < cell_keys.size(); ++c)
            scores.push_back({c, mji_sorted<FeatureIndex>(keys, cell_keys[c])});
        std::vector<std::uint32_t> set;
        for (std::size_t c : top_cells(std::move(scores), config_.search_cells))
            set.insert(set.end(), points_by_cell[c].begin(), points_by_cell[c].end());
        std::sort(set.begin(), set.end());
        search_sets_.push_back(std::move(set));
    }
}

std::vector<std::size_t> SelectionContext::validation_in_cell(std::size_t cell) const {
    std::vector<std::size_t> out;
    for (std::size_t n = 0; n < truth_cell_.size(); ++n)
        if (truth_cell_[n] == cell) out.push_back(n);
    return out;
}

// ---------------------------------------------------------------------------
// Positioning objective

PositioningObjective::PositioningObjective(const SelectionContext& context, std::vector<std::size_t> validation_ids,
                                           std::vector<FeatureIndex> candidates)
    : ctx_(context), queries_(std::move(validation_ids)), candidates_(std::move(candidates)) {
    std::sort(candidates_.begin(), candidates_.end());
    user_.resize(queries_.size() * candidates_.size());
    for (std::size_t q = 0; q < queries_.size(); ++q) {
        const auto& query = ctx_.validation_query(queries_[q]);
        for (std::size_t c = 0; c < candidates_.size(); ++c)
            user_[q * candidates_.size() + c] = query.value(candidates_[c]).value_or(kAbsentRss);
    }
    base_.resize(queries_.size());
    commit({});
}

double PositioningObjective::term(std::size_t q, std::uint32_t point, std::size_t c) const {
    const double u = user_[q * candidates_.size() + c];
    const int g = ctx_.grid().value(point, candidates_[c]);
    if (ctx_.config().positioning == Method::Knn) return knn_term(u, g);
    if (u <= kAbsentRss) return ctx_.likelihood().log_miss();
    return ctx_.likelihood()(g, u);
}

void PositioningObjective::commit(std::span<const std::size_t> subset) {
    const bool map = ctx_.config().positioning == Method::Map;
    for (std::size_t q = 0; q < queries_.size(); ++q) {
        const auto& set = ctx_.search_set(queries_[q]);
        auto& base = base_[q];
        base.assign(set.size(), 0.0);
        for (std::size_t j = 0; j < set.size(); ++j) {
            double acc = map ? ctx_.grid().log_prior(set[j]) : 0.0;
            for (std::size_t c : subset) acc += term(q, set[j], c);
            base[j] = acc;
        }
    }
    committed_size_ = subset.size();
}

double PositioningObjective::empty_loss() const {
    if (queries_.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t id : queries_) total += squared_distance(ctx_.median_location(), ctx_.validation_truth(id));
    return total / static_cast<double>(queries_.size());
}

double PositioningObjective::loss_with_delta(std::size_t candidate, double sign) {
    if (queries_.empty()) return 0.0;
    const bool map = ctx_.config().positioning == Method::Map;
    double total = 0.0;
    for (std::size_t q = 0; q < queries_.size(); ++q) {
        const auto& set = ctx_.search_set(queries_[q]);
        const auto& base = base_[q];
        const Point2& truth = ctx_.validation_truth(queries_[q]);
        if (set.empty()) {
            total += squared_distance(ctx_.median_location(), truth);
            continue;
        }
        scratch_.resize(set.size());
        for (std::size_t j = 0; j < set.size(); ++j) {
            double s = base[j];
            if (sign != 0.0) s += sign * term(q, set[j], candidate);
            // Guard the subtraction path against tiny negative residue.
            if (!map && s < 0.0) s = 0.0;
            scratch_[j] = {s, set[j], ctx_.grid().location(set[j])};
        }
        const Point2 estimate = map ? map_argmax(scratch_).location
                                    : knn_combine(scratch_, std::min(ctx_.config().knn_k, scratch_.size()));
        total += squared_distance(estimate, truth);
    }
    return total / static_cast<double>(queries_.size());
}

double PositioningObjective::loss(std::span<const std::size_t> subset) {
    if (subset.empty()) return empty_loss();
    commit(subset);
    return loss_with_delta(0, 0.0);
}

double PositioningObjective::loss_adding(std::size_t candidate) { return loss_with_delta(candidate, 1.0); }

double PositioningObjective::loss_removing(std::size_t candidate) {
    if (committed_size_ <= 1) return empty_loss();
    return loss_with_delta(candidate, -1.0);
}

// ---------------------------------------------------------------------------
// Per-cell selection

double fs_loss(const SelectionContext& context, const FeatureSet& features,
               const std::vector<std::size_t>& validation_ids) {
    std::vector<FeatureIndex> candidates;
    for (const auto& f : features)
        if (auto idx = context.grid().dictionary().find(f)) candidates.push_back(*idx);
    PositioningObjective objective(context, validation_ids, candidates);
    std::vector<std::size_t> all(objective.candidate_count());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return objective.loss(all);
}

double fs_loss(const FeatureSet& features, Method method, const std::vector<LabeledSample>& validation,
               const GriddedRfm& gridded, const SelectorConfig& config) {
    if (validation.empty()) throw Error(errc::kEmptyValidation, "fs_loss needs validation samples");
    std::vector<LabeledSample> reference;
    reference.reserve(gridded.points.size());
    for (const auto& p : gridded.points) reference.push_back({p.location, p.fingerprint});
    SelectorConfig cfg = config;
    cfg.positioning = method;
    cfg.search_cells = 0;
    const SubregionIndex index = partition(gridded.as_rfm());
    SelectionContext context(reference, validation, index, cfg);
    std::vector<std::size_t> ids(validation.size());
    std::iota(ids.begin(), ids.end(), std::size_t{0});
    return fs_loss(context, features, ids);
}

FeatureSubset select_features(const SelectionContext& context, std::size_t cell, SelectorKind kind) {
    const auto& features = observable_features(context.index(), cell);
    if (context.index().cells[cell].empty()) throw Error(errc::kBadCell, "cell " + std::to_string(cell) + " is empty");

    FeatureSubset subset;
    subset.cell_index = cell;
    const auto queries = context.validation_in_cell(cell);
    std::vector<FeatureIndex> candidates;
    for (const auto& f : features)
        if (auto idx = context.grid().dictionary().find(f)) candidates.push_back(*idx);

    if (queries.empty()) {
        spdlog::warn("cell {} has no validation samples; keeping all {} observable features", cell, features.size());
        subset.features.assign(features.begin(), features.end());
        return subset;
    }
    PositioningObjective objective(context, queries, candidates);
    const SearchResult result = run_search(kind, objective, context.config());
    for (std::size_t c : result.selected) subset.features.push_back(context.grid().dictionary().id(objective.candidates()[c]));
    subset.final_loss = result.final_loss;
    subset.initial_loss = result.initial_loss;
    subset.iterations = result.iterations;
    return subset;
}

FeatureSubset forward_greedy(const SelectionContext& context, std::size_t cell) {
    return select_features(context, cell, SelectorKind::Forward);
}

FeatureSubset backward_greedy(const SelectionContext& context, std::size_t cell) {
    return select_features(context, cell, SelectorKind::Backward);
}

FeatureSubset foba(const SelectionContext& context, std::size_t cell) {
    return select_features(context, cell, SelectorKind::Foba);
}

SelectionProfile build_profile(const SelectionContext& context, SelectorKind kind, std::size_t threads) {
    std::vector<std::size_t> cells;
    for (const auto& c : context.index().cells)
        if (!c.empty()) cells.push_back(c.cell_index);
    if (cells.empty()) throw Error(errc::kEmptyRfm, "no non-empty subregion to select features for");

    std::vector<FeatureSubset> results(cells.size());
    std::vector<std::exception_ptr> failures(cells.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            try {
                results[i] = select_features(context, cells[i], kind);
            } catch (...) {
                failures[i] = std::current_exception();
            }
        }
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, cells.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }

    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!failures[i]) continue;
        try {
            std::rethrow_exception(failures[i]);
        } catch (const Error& e) {
            throw Error(e.code(), "cell " + std::to_string(cells[i]) + ": " + e.detail());
        }
    }
    SelectionProfile profile;
    profile.kind = kind;
    profile.config = context.config();
    for (auto& r : results) profile.per_cell.emplace(r.cell_index, std::move(r));
    return profile;
}

}  // namespace fingerloc
