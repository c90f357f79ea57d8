#pragma once

// Building blocks shared by offline feature selection and online positioning:
// a dense reference grid, the weighted-kNN combiner and the discretized
// Gaussian likelihood used by MAP.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fingerloc/rfm.hpp"

namespace fingerloc {

enum class Method { Knn, Map };

std::string to_string(Method method);
/// Accepts "knn" or "map"; throws "bad-config" otherwise.
Method parse_method(const std::string& text);

using FeatureIndex = std::uint32_t;

/// Value imputed for a feature that is not measurable at a location.
inline constexpr int kAbsentRss = -100;

/// Sorted feature ids; index order equals lexicographic id order.
class FeatureDictionary {
public:
    FeatureDictionary() = default;
    explicit FeatureDictionary(std::vector<FeatureId> ids);

    std::optional<FeatureIndex> find(const FeatureId& id) const;
    const FeatureId& id(FeatureIndex index) const { return ids_[index]; }
    const std::vector<FeatureId>& ids() const { return ids_; }
    std::size_t size() const { return ids_.size(); }

private:
    std::vector<FeatureId> ids_;
};

/// A query fingerprint restricted to the dictionary, sorted by index.
struct EncodedFingerprint {
    std::vector<std::pair<FeatureIndex, double>> values;
    /// Query keys the dictionary does not know.
    std::size_t unknown = 0;

    std::optional<double> value(FeatureIndex f) const;
    std::vector<FeatureIndex> keys() const;
};

EncodedFingerprint encode(const Fingerprint& fp, const FeatureDictionary& dict);

/// Reference locations with integer dBm values stored densely
/// (kAbsentRss marks absence).
class ReferenceGrid {
public:
    ReferenceGrid() = default;
    ReferenceGrid(FeatureDictionary dict, std::size_t capacity = 0);

    /// Appends a point; values are rounded to integer dBm. Features outside the
    /// dictionary are ignored.
    std::size_t add(const Point2& location, std::size_t cell, const Fingerprint& fp, double prior_weight = 1.0);

    std::size_t size() const { return locations_.size(); }
    const FeatureDictionary& dictionary() const { return dict_; }
    const Point2& location(std::size_t point) const { return locations_[point]; }
    std::size_t cell(std::size_t point) const { return cells_[point]; }
    double log_prior(std::size_t point) const { return log_prior_[point]; }
    int value(std::size_t point, FeatureIndex f) const {
        return values_[point * dict_.size() + f];
    }

private:
    FeatureDictionary dict_;
    std::vector<Point2> locations_;
    std::vector<std::size_t> cells_;
    std::vector<double> log_prior_;
    std::vector<std::int16_t> values_;
};

/// Squared-difference term of the kNN feature-space distance.
inline double knn_term(double user_value, int grid_value) {
    const double d = user_value - static_cast<double>(grid_value);
    return d * d;
}

struct LikelihoodModel {
    double sigma = 4.0;
    double p_miss = 1e-4;

    friend bool operator==(const LikelihoodModel&, const LikelihoodModel&) = default;
};

/// log p(v | mean) for integer v in [-99, 0] under a Gaussian of the given
/// sigma, discretized to unit bins and truncated to that range. Features
/// missing at the location use log(p_miss).
class LogLikelihoodTable {
public:
    explicit LogLikelihoodTable(const LikelihoodModel& model = {});

    double operator()(int grid_value, double user_value) const;
    /// Same as operator() with the measured value already binned.
    double lookup(int grid_value, int user_bin) const {
        if (grid_value <= kAbsentRss) return log_miss_;
        const int mean = grid_value < -99 ? -99 : (grid_value > 0 ? 0 : grid_value);
        return table_[static_cast<std::size_t>((mean + 99) * 100 + (user_bin + 99))];
    }
    double log_miss() const { return log_miss_; }
    const LikelihoodModel& model() const { return model_; }

    /// Index of a measured value after rounding and clamping to [-99, 0].
    static int bin(double user_value);

private:
    LikelihoodModel model_;
    double log_miss_;
    std::vector<double> table_;  // [mean + 99][value + 99]
};

/// Inverse-distance weights w_q = (1/d_q) / sum_p (1/d_p). Every distance must
/// be positive.
std::vector<double> inverse_distance_weights(std::span<const double> distances);

struct ScoredPoint {
    double score = 0.0;  // squared feature distance for kNN, log posterior for MAP
    std::size_t id = 0;  // global grid index, used for tie-breaks
    Point2 location;
};

/// Weighted kNN over pre-scored points (score = squared feature distance).
/// Neighbors are ordered by (score, id). When the nearest distance is zero the
/// result is the centroid of all zero-distance points, summed in id order so
/// the result does not depend on the order of `scored`. Throws
/// "insufficient-candidates" when fewer than k points are given.
Point2 knn_combine(std::vector<ScoredPoint>& scored, std::size_t k);

/// Highest score, ties to the lowest id. Throws "degenerate-posterior" when
/// no score is finite.
const ScoredPoint& map_argmax(std::span<const ScoredPoint> scored);

/// Coordinate-wise median (mean of the two middle values for even counts).
Point2 coordinate_median(std::span<const Point2> points);

}  // namespace fingerloc
