#include "fingerloc/densify.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fingerloc/error.hpp"

namespace fingerloc {

double matern_kernel(double r, double length_scale, MaternSmoothness nu) {
    const double s = std::abs(r) / length_scale;
    switch (nu) {
        case MaternSmoothness::Half:
            return std::exp(-s);
        case MaternSmoothness::ThreeHalves: {
            const double a = std::sqrt(3.0) * s;
            return (1.0 + a) * std::exp(-a);
        }
        case MaternSmoothness::FiveHalves:
        default: {
            const double a = std::sqrt(5.0) * s;
            return (1.0 + a + a * a / 3.0) * std::exp(-a);
        }
    }
}

std::vector<Point2> cell_lattice(const Rect& cell, double spacing) {
    const double w = cell.max_x - cell.min_x;
    const double h = cell.max_y - cell.min_y;
    const auto nx = static_cast<std::size_t>(std::floor(w / spacing + 1e-9));
    const auto ny = static_cast<std::size_t>(std::floor(h / spacing + 1e-9));
    const double ox = (w - nx * spacing) / 2.0 + spacing / 2.0;
    const double oy = (h - ny * spacing) / 2.0 + spacing / 2.0;
    std::vector<Point2> out;
    out.reserve(nx * ny);
    for (std::size_t j = 0; j < ny; ++j)
        for (std::size_t i = 0; i < nx; ++i)
            out.push_back({cell.min_x + ox + i * spacing, cell.min_y + oy + j * spacing});
    return out;
}

Rfm GriddedRfm::as_rfm() const {
    std::vector<LabeledSample> samples;
    samples.reserve(points.size());
    for (const auto& p : points) samples.push_back({p.location, p.fingerprint});
    // Edge cells that overhang the RoI keep their full lattice; widen to whole
    // cells so those points stay inside. Cell numbering is unchanged.
    return Rfm(std::move(samples), roi.whole_cells());
}

namespace {

void check_config(const DensifyConfig& config) {
    if (!(config.spacing > 0.0)) throw Error(errc::kBadConfig, "spacing must be positive");
    if (!(config.length_scale > 0.0)) throw Error(errc::kBadConfig, "length_scale must be positive");
    if (!(config.cutoff_factor > 0.0)) throw Error(errc::kBadConfig, "cutoff_factor must be positive");
}

}  // namespace

std::optional<double> kernel_estimate(const Rfm& rfm, const FeatureId& feature, const Point2& p,
                                      const DensifyConfig& config) {
    const double radius = config.cutoff_factor * config.length_scale;
    double num = 0.0, den = 0.0;
    for (const auto& s : rfm.samples()) {
        auto v = s.fingerprint.get(feature);
        if (!v) continue;
        const double d = distance(p, s.location);
        if (d > radius) continue;
        const double w = matern_kernel(d, config.length_scale, config.smoothness);
        num += w * *v;
        den += w;
    }
    if (den <= 0.0) return std::nullopt;
    return num / den;
}

GriddedRfm densify(const Rfm& rfm, const SubregionIndex& index, const DensifyConfig& config) {
    check_config(config);
    if (rfm.samples().empty() || index.non_empty_count() == 0)
        throw Error(errc::kEmptyRfm, "nothing to densify");

    // Dense feature ids so per-point accumulation avoids string maps.
    const std::vector<FeatureId> universe(rfm.feature_universe().begin(), rfm.feature_universe().end());
    std::unordered_map<FeatureId, std::size_t> slot;
    for (std::size_t i = 0; i < universe.size(); ++i) slot.emplace(universe[i], i);
    std::vector<std::vector<std::pair<std::size_t, double>>> encoded(rfm.samples().size());
    for (std::size_t i = 0; i < rfm.samples().size(); ++i)
        for (const auto& [id, rss] : rfm.samples()[i].fingerprint.observations())
            encoded[i].emplace_back(slot.at(id), rss);

    const double radius = config.cutoff_factor * config.length_scale;
    std::vector<double> num(universe.size(), 0.0), den(universe.size(), 0.0);
    std::vector<char> seen(universe.size(), 0);
    std::vector<std::size_t> touched;

    GriddedRfm out;
    out.grid_spacing = config.spacing;
    out.roi = index.roi;
    for (const auto& cell : index.cells) {
        if (cell.empty()) continue;
        const auto lattice = cell_lattice(cell.bounds, config.spacing);
        if (out.per_subregion_point_count == 0) out.per_subregion_point_count = lattice.size();
        for (const auto& p : lattice) {
            touched.clear();
            for (std::size_t i = 0; i < encoded.size(); ++i) {
                const double d = distance(p, rfm.samples()[i].location);
                if (d > radius) continue;
                const double w = matern_kernel(d, config.length_scale, config.smoothness);
                for (const auto& [f, rss] : encoded[i]) {
                    if (!seen[f]) {
                        seen[f] = 1;
                        touched.push_back(f);
                    }
                    num[f] += w * rss;
                    den[f] += w;
                }
            }
            std::sort(touched.begin(), touched.end());
            GridPoint gp{p, cell.cell_index, {}};
            for (std::size_t f : touched) {
                if (den[f] > 0.0) {
                    const double value = std::min(0.0, std::round(num[f] / den[f]));
                    if (value > kRssFloor) gp.fingerprint.set(universe[f], value);
                }
                num[f] = 0.0;
                den[f] = 0.0;
                seen[f] = 0;
            }
            out.points.push_back(std::move(gp));
        }
    }
    return out;
}

GriddedRfm densify(const Rfm& rfm, const SubregionIndex& index, double spacing, double length_scale) {
    DensifyConfig config;
    config.spacing = spacing;
    config.length_scale = length_scale;
    return densify(rfm, index, config);
}

}  // namespace fingerloc
