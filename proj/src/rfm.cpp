#include "fingerloc/rfm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fingerloc/error.hpp"

namespace fingerloc {

double squared_distance(const Point2& a, const Point2& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

double distance(const Point2& a, const Point2& b) { return std::sqrt(squared_distance(a, b)); }

Fingerprint::Fingerprint(const Map& observations, std::optional<double> timestamp)
    : timestamp_(timestamp) {
    for (const auto& [id, rss] : observations) set(id, rss);
}

void Fingerprint::set(const FeatureId& id, double rss) {
    if (id.empty()) throw Error(errc::kBadRss, "empty feature id");
    if (!std::isfinite(rss) || rss > 0.0 || rss < kRssFloor) {
        std::ostringstream msg;
        msg << "rss " << rss << " dBm for '" << id << "' outside [-100, 0]";
        throw Error(errc::kBadRss, msg.str());
    }
    if (rss <= kRssFloor) {
        obs_.erase(id);
        return;
    }
    obs_[id] = rss;
}

std::optional<double> Fingerprint::get(const FeatureId& id) const {
    auto it = obs_.find(id);
    if (it == obs_.end()) return std::nullopt;
    return it->second;
}

FeatureSet Fingerprint::keys() const {
    FeatureSet out;
    for (const auto& kv : obs_) out.insert(out.end(), kv.first);
    return out;
}

void RoiGeometry::validate() const {
    if (!(width > 0.0) || !(height > 0.0) || !(cell_size > 0.0) || !std::isfinite(width) ||
        !std::isfinite(height) || !std::isfinite(cell_size)) {
        std::ostringstream msg;
        msg << "width=" << width << " height=" << height << " cell_size=" << cell_size;
        throw Error(errc::kBadRoi, msg.str());
    }
}

namespace {

// Cell count along one axis; tolerate width/cell_size landing a hair above an
// integer through rounding.
std::size_t axis_cells(double extent, double cell) {
    const double ratio = extent / cell;
    const double nearest = std::round(ratio);
    if (std::abs(ratio - nearest) < 1e-9) return static_cast<std::size_t>(std::max(1.0, nearest));
    return static_cast<std::size_t>(std::ceil(ratio));
}

// Lower-index tie-break: an offset of exactly k*cell maps to slot k-1.
std::size_t axis_slot(double offset, double cell, std::size_t count) {
    const double ratio = offset / cell;
    const double nearest = std::round(ratio);
    double slot;
    if (std::abs(ratio - nearest) < 1e-9)
        slot = nearest - 1.0;
    else
        slot = std::floor(ratio);
    slot = std::clamp(slot, 0.0, static_cast<double>(count - 1));
    return static_cast<std::size_t>(slot);
}

}  // namespace

std::size_t RoiGeometry::cols() const { return axis_cells(width, cell_size); }
std::size_t RoiGeometry::rows() const { return axis_cells(height, cell_size); }

Rect RoiGeometry::cell_bounds(std::size_t cell) const {
    if (cell >= cell_count()) throw Error(errc::kBadCell, std::to_string(cell));
    const std::size_t c = cell % cols();
    const std::size_t r = cell / cols();
    return {origin.x + c * cell_size, origin.y + r * cell_size, origin.x + (c + 1) * cell_size,
            origin.y + (r + 1) * cell_size};
}

RoiGeometry RoiGeometry::whole_cells() const {
    RoiGeometry out = *this;
    out.width = static_cast<double>(cols()) * cell_size;
    out.height = static_cast<double>(rows()) * cell_size;
    return out;
}

std::size_t RoiGeometry::cell_of(const Point2& p) const {
    if (!contains(p)) {
        std::ostringstream msg;
        msg << "(" << p.x << ", " << p.y << ")";
        throw Error(errc::kOutsideRoi, msg.str());
    }
    const std::size_t c = axis_slot(p.x - origin.x, cell_size, cols());
    const std::size_t r = axis_slot(p.y - origin.y, cell_size, rows());
    return r * cols() + c;
}

RoiGeometry bounding_roi(const std::vector<LabeledSample>& samples, double cell_size) {
    if (samples.empty()) throw Error(errc::kEmptyRfm, "no samples to bound");
    if (!(cell_size > 0.0)) throw Error(errc::kBadRoi, "cell_size must be positive");
    double min_x = std::numeric_limits<double>::infinity(), min_y = min_x;
    double max_x = -min_x, max_y = -min_x;
    for (const auto& s : samples) {
        min_x = std::min(min_x, s.location.x);
        min_y = std::min(min_y, s.location.y);
        max_x = std::max(max_x, s.location.x);
        max_y = std::max(max_y, s.location.y);
    }
    RoiGeometry roi;
    roi.cell_size = cell_size;
    roi.origin = {std::floor(min_x / cell_size) * cell_size, std::floor(min_y / cell_size) * cell_size};
    roi.width = std::max(1.0, std::ceil((max_x - roi.origin.x) / cell_size)) * cell_size;
    roi.height = std::max(1.0, std::ceil((max_y - roi.origin.y) / cell_size)) * cell_size;
    return roi;
}

Rfm::Rfm(std::vector<LabeledSample> samples, RoiGeometry roi) : samples_(std::move(samples)), roi_(roi) {
    if (samples_.empty()) throw Error(errc::kEmptyRfm, "RFM has no samples");
    roi_.validate();
    for (const auto& s : samples_) {
        if (!roi_.contains(s.location)) {
            std::ostringstream msg;
            msg << "sample at (" << s.location.x << ", " << s.location.y << ")";
            throw Error(errc::kOutsideRoi, msg.str());
        }
        for (const auto& kv : s.fingerprint.observations()) universe_.insert(kv.first);
    }
}

std::size_t SubregionIndex::non_empty_count() const {
    return static_cast<std::size_t>(
        std::count_if(cells.begin(), cells.end(), [](const Subregion& c) { return !c.empty(); }));
}

SubregionIndex partition(const Rfm& rfm, double cell_size) {
    if (rfm.samples().empty()) throw Error(errc::kEmptyRfm, "RFM has no samples");
    SubregionIndex index;
    index.roi = rfm.roi();
    index.roi.cell_size = cell_size;
    index.roi.validate();

    const std::size_t n_cells = index.roi.cell_count();
    index.cells.resize(n_cells);
    for (std::size_t c = 0; c < n_cells; ++c) {
        index.cells[c].cell_index = c;
        index.cells[c].bounds = index.roi.cell_bounds(c);
    }
    index.assignment.resize(rfm.samples().size());
    for (std::size_t i = 0; i < rfm.samples().size(); ++i) {
        const auto& sample = rfm.samples()[i];
        const std::size_t c = index.roi.cell_of(sample.location);
        index.assignment[i] = c;
        auto& cell = index.cells[c];
        cell.sample_indices.push_back(i);
        for (const auto& kv : sample.fingerprint.observations()) cell.observable_features.insert(kv.first);
    }
    return index;
}

SubregionIndex partition(const Rfm& rfm) { return partition(rfm, rfm.roi().cell_size); }

const FeatureSet& observable_features(const SubregionIndex& index, std::size_t cell) {
    if (cell >= index.cells.size())
        throw Error(errc::kBadCell, "cell " + std::to_string(cell) + " of " + std::to_string(index.cells.size()));
    return index.cells[cell].observable_features;
}

}  // namespace fingerloc
