#include "fingerloc/positioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fingerloc/error.hpp"

namespace fingerloc {

std::string to_string(Method method) { return method == Method::Knn ? "knn" : "map"; }

Method parse_method(const std::string& text) {
    if (text == "knn") return Method::Knn;
    if (text == "map") return Method::Map;
    throw Error(errc::kBadConfig, "unknown positioning method '" + text + "'");
}

FeatureDictionary::FeatureDictionary(std::vector<FeatureId> ids) : ids_(std::move(ids)) {
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
}

std::optional<FeatureIndex> FeatureDictionary::find(const FeatureId& id) const {
    auto it = std::lower_bound(ids_.begin(), ids_.end(), id);
    if (it == ids_.end() || *it != id) return std::nullopt;
    return static_cast<FeatureIndex>(it - ids_.begin());
}

std::optional<double> EncodedFingerprint::value(FeatureIndex f) const {
    auto it = std::lower_bound(values.begin(), values.end(), f,
                               [](const auto& pair, FeatureIndex key) { return pair.first < key; });
    if (it == values.end() || it->first != f) return std::nullopt;
    return it->second;
}

std::vector<FeatureIndex> EncodedFingerprint::keys() const {
    std::vector<FeatureIndex> out;
    out.reserve(values.size());
    for (const auto& v : values) out.push_back(v.first);
    return out;
}

EncodedFingerprint encode(const Fingerprint& fp, const FeatureDictionary& dict) {
    EncodedFingerprint out;
    out.values.reserve(fp.size());
    // Map iteration is lexicographic, which is also index order, so one
    // forward walk over the dictionary suffices.
    const auto& ids = dict.ids();
    auto from = ids.begin();
    for (const auto& [id, rss] : fp.observations()) {
        from = std::lower_bound(from, ids.end(), id);
        if (from != ids.end() && *from == id)
            out.values.emplace_back(static_cast<FeatureIndex>(from - ids.begin()), rss);
        else
            ++out.unknown;
    }
    return out;
}

ReferenceGrid::ReferenceGrid(FeatureDictionary dict, std::size_t capacity) : dict_(std::move(dict)) {
    locations_.reserve(capacity);
    cells_.reserve(capacity);
    log_prior_.reserve(capacity);
    values_.reserve(capacity * dict_.size());
}

std::size_t ReferenceGrid::add(const Point2& location, std::size_t cell, const Fingerprint& fp,
                               double prior_weight) {
    const std::size_t id = locations_.size();
    locations_.push_back(location);
    cells_.push_back(cell);
    log_prior_.push_back(std::log(prior_weight));
    values_.resize(values_.size() + dict_.size(), static_cast<std::int16_t>(kAbsentRss));
    std::int16_t* row = values_.data() + id * dict_.size();
    for (const auto& [fid, rss] : fp.observations()) {
        if (auto f = dict_.find(fid)) row[*f] = static_cast<std::int16_t>(std::lround(rss));
    }
    return id;
}

namespace {

constexpr int kMinBin = -99;
constexpr int kMaxBin = 0;
constexpr int kBins = kMaxBin - kMinBin + 1;
constexpr double kLogFloor = -745.0;

// P(lo < X < hi) for X ~ N(0, 1), accurate in both tails.
double normal_mass(double lo, double hi) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    if (lo >= 0.0) return 0.5 * (std::erfc(lo * inv_sqrt2) - std::erfc(hi * inv_sqrt2));
    if (hi <= 0.0) return 0.5 * (std::erfc(-hi * inv_sqrt2) - std::erfc(-lo * inv_sqrt2));
    return 1.0 - 0.5 * std::erfc(-lo * inv_sqrt2) - 0.5 * std::erfc(hi * inv_sqrt2);
}

}  // namespace

LogLikelihoodTable::LogLikelihoodTable(const LikelihoodModel& model)
    : model_(model), table_(static_cast<std::size_t>(kBins * kBins)) {
    if (!(model.sigma > 0.0)) throw Error(errc::kBadConfig, "likelihood sigma must be positive");
    if (!(model.p_miss >= 0.0) || model.p_miss > 1.0) throw Error(errc::kBadConfig, "p_miss must be in [0, 1]");
    log_miss_ = model.p_miss > 0.0 ? std::log(model.p_miss) : -std::numeric_limits<double>::infinity();
    const double s = model.sigma;
    for (int mean = kMinBin; mean <= kMaxBin; ++mean) {
        const double norm = normal_mass((kMinBin - 0.5 - mean) / s, (kMaxBin + 0.5 - mean) / s);
        for (int v = kMinBin; v <= kMaxBin; ++v) {
            const double p = normal_mass((v - 0.5 - mean) / s, (v + 0.5 - mean) / s) / norm;
            table_[static_cast<std::size_t>((mean - kMinBin) * kBins + (v - kMinBin))] =
                p > 0.0 ? std::max(kLogFloor, std::log(p)) : kLogFloor;
        }
    }
}

int LogLikelihoodTable::bin(double user_value) {
    return std::clamp(static_cast<int>(std::lround(user_value)), kMinBin, kMaxBin);
}

double LogLikelihoodTable::operator()(int grid_value, double user_value) const {
    return lookup(grid_value, bin(user_value));
}

std::vector<double> inverse_distance_weights(std::span<const double> distances) {
    std::vector<double> w(distances.size());
    double total = 0.0;
    for (std::size_t i = 0; i < distances.size(); ++i) {
        w[i] = 1.0 / distances[i];
        total += w[i];
    }
    for (double& x : w) x /= total;
    return w;
}

Point2 knn_combine(std::vector<ScoredPoint>& scored, std::size_t k) {
    if (k < 1 || scored.size() < k)
        throw Error(errc::kInsufficientCandidates,
                    std::to_string(scored.size()) + " reference points for k=" + std::to_string(k));
    auto nearer = [](const ScoredPoint& a, const ScoredPoint& b) {
        if (a.score != b.score) return a.score < b.score;
        return a.id < b.id;
    };
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), nearer);

    if (scored.front().score <= 0.0) {
        std::vector<const ScoredPoint*> exact;
        for (const auto& p : scored)
            if (p.score <= 0.0) exact.push_back(&p);
        std::sort(exact.begin(), exact.end(), [](const ScoredPoint* a, const ScoredPoint* b) { return a->id < b->id; });
        Point2 sum;
        for (const auto* p : exact) {
            sum.x += p->location.x;
            sum.y += p->location.y;
        }
        const auto n = static_cast<double>(exact.size());
        return {sum.x / n, sum.y / n};
    }

    std::vector<double> dist(k);
    for (std::size_t q = 0; q < k; ++q) dist[q] = std::sqrt(scored[q].score);
    const auto w = inverse_distance_weights(dist);
    Point2 out;
    for (std::size_t q = 0; q < k; ++q) {
        out.x += w[q] * scored[q].location.x;
        out.y += w[q] * scored[q].location.y;
    }
    return out;
}

const ScoredPoint& map_argmax(std::span<const ScoredPoint> scored) {
    const ScoredPoint* best = nullptr;
    for (const auto& p : scored) {
        if (!std::isfinite(p.score)) continue;
        if (best == nullptr || p.score > best->score || (p.score == best->score && p.id < best->id)) best = &p;
    }
    if (best == nullptr) throw Error(errc::kDegeneratePosterior, "no location has a finite posterior");
    return *best;
}

Point2 coordinate_median(std::span<const Point2> points) {
    if (points.empty()) throw Error(errc::kInsufficientCandidates, "median of no points");
    std::vector<double> xs, ys;
    xs.reserve(points.size());
    ys.reserve(points.size());
    for (const auto& p : points) {
        xs.push_back(p.x);
        ys.push_back(p.y);
    }
    auto median = [](std::vector<double>& v) {
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
    };
    return {median(xs), median(ys)};
}

}  // namespace fingerloc
