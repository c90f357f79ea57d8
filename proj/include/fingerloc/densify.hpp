#pragma once

// Kernel-smoothing interpolation of a raw RFM onto a regular lattice inside
// every non-empty subregion.

#include <cstddef>
#include <optional>
#include <vector>

#include "fingerloc/rfm.hpp"

namespace fingerloc {

enum class MaternSmoothness { Half, ThreeHalves, FiveHalves };

/// Matérn covariance with unit variance at distance r.
double matern_kernel(double r, double length_scale, MaternSmoothness nu = MaternSmoothness::FiveHalves);

struct DensifyConfig {
    double spacing = 0.2;
    double length_scale = 1.0;
    MaternSmoothness smoothness = MaternSmoothness::FiveHalves;
    /// Samples farther than cutoff_factor * length_scale do not contribute.
    double cutoff_factor = 3.0;
};

struct GridPoint {
    Point2 location;
    std::size_t cell = 0;
    /// Integer dBm values in [-99, 0].
    Fingerprint fingerprint;
};

struct GriddedRfm {
    double grid_spacing = 0.2;
    RoiGeometry roi;
    std::vector<GridPoint> points;
    /// Grid points per non-empty subregion (alpha).
    std::size_t per_subregion_point_count = 0;

    /// The lattice as an ordinary RFM for the downstream stages.
    Rfm as_rfm() const;
};

/// Lattice locations of one cell: cell-centred, pitch `spacing`.
std::vector<Point2> cell_lattice(const Rect& cell, double spacing);

/// Unrounded Nadaraya-Watson estimate of one feature at p; nullopt when no
/// sample observing the feature lies within the support radius.
std::optional<double> kernel_estimate(const Rfm& rfm, const FeatureId& feature, const Point2& p,
                                      const DensifyConfig& config);

/// Throws "empty-rfm" if the index has no non-empty subregion, "bad-config"
/// for non-positive spacing or length scale.
GriddedRfm densify(const Rfm& rfm, const SubregionIndex& index, const DensifyConfig& config);
GriddedRfm densify(const Rfm& rfm, const SubregionIndex& index, double spacing, double length_scale);

}  // namespace fingerloc
