#pragma once

// Seeded log-distance radio world with optional attenuating walls. Produces a
// training RFM and an independent test set with known ground truth.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "fingerloc/rfm.hpp"

namespace fingerloc {

struct Wall {
    Point2 a;
    Point2 b;
    /// dB lost by a signal crossing the wall.
    double attenuation = 0.0;
};

struct WorldConfig {
    std::uint64_t seed = 7;
    RoiGeometry roi{{0.0, 0.0}, 20.0, 10.0, 2.0};
    std::size_t n_emitters = 40;
    /// dBm at d0 = 1 m.
    double tx_power = -40.0;
    double path_loss_exponent = 2.5;
    double noise_sigma = 3.0;
    /// RFM samples per m^2.
    double sample_density = 4.0;
    std::vector<Wall> walls;
    std::size_t n_tests = 300;
    /// Report whole dBm like a scanner does.
    bool integer_rss = true;

    /// Throws "bad-roi" for a zero-area RoI and "bad-config" for other
    /// out-of-range fields.
    void validate() const;
};

/// Interior walls of a grid of room_w x room_h rooms filling the RoI.
std::vector<Wall> office_walls(const RoiGeometry& roi, double room_w, double room_h, double attenuation);

/// The reference desk-scale world: 20 x 10 m, 40 emitters, 3 dB noise,
/// 5 x 2.5 m rooms with 10 dB walls.
WorldConfig standard_world(std::uint64_t seed = 7);

struct Emitter {
    FeatureId id;
    Point2 location;
};

struct World {
    WorldConfig config;
    std::vector<Emitter> emitters;
    std::vector<LabeledSample> rfm_samples;
    std::vector<LabeledSample> tests;

    Rfm rfm() const { return Rfm(rfm_samples, config.roi); }
};

/// Noise-free received power (unrounded, unfloored) at p.
double mean_rss(const WorldConfig& config, const Point2& emitter, const Point2& p);

/// Number of walls the straight segment a-b crosses.
std::size_t walls_crossed(const std::vector<Wall>& walls, const Point2& a, const Point2& b, double* loss = nullptr);

World generate(const WorldConfig& config);

/// Writes rfm.jsonl, tests.jsonl and world.meta into `dir`.
void write_world(const World& world, const std::filesystem::path& dir);

}  // namespace fingerloc
