#pragma once

// Core data model: fingerprints, the reference fingerprint map (RFM) and its
// partition into rectangular subregions.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fingerloc {

/// Opaque feature identifier, e.g. "02:00:5e:00:00:01@2.4".
using FeatureId = std::string;
using FeatureSet = std::set<FeatureId>;

/// RSS at or below this level is non-measurable and is stored as absence.
inline constexpr double kRssFloor = -100.0;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point2&, const Point2&) = default;
};

double distance(const Point2& a, const Point2& b);
double squared_distance(const Point2& a, const Point2& b);

struct Rect {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    Point2 center() const { return {(min_x + max_x) / 2.0, (min_y + max_y) / 2.0}; }
    bool contains(const Point2& p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
    friend bool operator==(const Rect&, const Rect&) = default;
};

/// A set of (feature, RSS) observations. Each feature appears at most once and
/// every stored value lies in (-100, 0] dBm.
class Fingerprint {
public:
    using Map = std::map<FeatureId, double>;

    Fingerprint() = default;
    /// Throws "bad-rss" for values outside [-100, 0]; -100 is dropped.
    explicit Fingerprint(const Map& observations, std::optional<double> timestamp = std::nullopt);

    /// Sets a value; -100 dBm (the floor) erases the feature instead.
    void set(const FeatureId& id, double rss);
    bool has(const FeatureId& id) const { return obs_.count(id) != 0; }
    std::optional<double> get(const FeatureId& id) const;

    const Map& observations() const { return obs_; }
    std::size_t size() const { return obs_.size(); }
    bool empty() const { return obs_.empty(); }
    FeatureSet keys() const;

    std::optional<double> timestamp() const { return timestamp_; }
    void set_timestamp(std::optional<double> t) { timestamp_ = t; }

    friend bool operator==(const Fingerprint&, const Fingerprint&) = default;

private:
    Map obs_;
    std::optional<double> timestamp_;
};

struct LabeledSample {
    Point2 location;
    Fingerprint fingerprint;

    friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

/// Axis-aligned region of interest tiled by square cells. Cells are numbered
/// row-major from the origin: index = row * cols + col.
struct RoiGeometry {
    Point2 origin;
    double width = 0.0;
    double height = 0.0;
    double cell_size = 2.0;

    /// Throws "bad-roi" unless width, height and cell_size are positive.
    void validate() const;

    std::size_t cols() const;
    std::size_t rows() const;
    std::size_t cell_count() const { return cols() * rows(); }
    Rect bounds() const { return {origin.x, origin.y, origin.x + width, origin.y + height}; }
    bool contains(const Point2& p) const { return bounds().contains(p); }
    Rect cell_bounds(std::size_t cell) const;
    /// Same cells, with width and height grown to whole multiples of
    /// cell_size so edge cells overhanging the RoI are fully inside.
    RoiGeometry whole_cells() const;

    /// Cell containing p. Points on a shared edge go to the lower index.
    /// Throws "outside-roi" when p is not inside the RoI rectangle.
    std::size_t cell_of(const Point2& p) const;

    friend bool operator==(const RoiGeometry&, const RoiGeometry&) = default;
};

/// Smallest cell-aligned RoI anchored at a cell-size multiple that contains
/// every sample.
RoiGeometry bounding_roi(const std::vector<LabeledSample>& samples, double cell_size);

class Rfm {
public:
    /// Throws "empty-rfm" for no samples and "outside-roi" for samples that
    /// fall outside the RoI.
    Rfm(std::vector<LabeledSample> samples, RoiGeometry roi);

    const std::vector<LabeledSample>& samples() const { return samples_; }
    const RoiGeometry& roi() const { return roi_; }
    /// Union of all sample key sets.
    const FeatureSet& feature_universe() const { return universe_; }

private:
    std::vector<LabeledSample> samples_;
    RoiGeometry roi_;
    FeatureSet universe_;
};

struct Subregion {
    std::size_t cell_index = 0;
    Rect bounds;
    std::vector<std::size_t> sample_indices;
    FeatureSet observable_features;

    bool empty() const { return sample_indices.empty(); }
};

struct SubregionIndex {
    RoiGeometry roi;
    std::vector<Subregion> cells;
    /// assignment[sample] = cell index.
    std::vector<std::size_t> assignment;

    std::size_t non_empty_count() const;
};

/// Splits the RoI into cell_size x cell_size cells and assigns every sample.
/// Empty cells are kept.
SubregionIndex partition(const Rfm& rfm, double cell_size);
SubregionIndex partition(const Rfm& rfm);

/// Throws "bad-cell" for an out-of-range cell.
const FeatureSet& observable_features(const SubregionIndex& index, std::size_t cell);

}  // namespace fingerloc
