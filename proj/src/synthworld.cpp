#include "fingerloc/synthworld.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "fingerloc/error.hpp"
#include "fingerloc/io.hpp"

namespace fingerloc {

void WorldConfig::validate() const {
    if (!(roi.width > 0.0) || !(roi.height > 0.0)) throw Error(errc::kBadRoi, "world RoI has zero area");
    roi.validate();
    if (n_emitters < 1) throw Error(errc::kBadConfig, "need at least one emitter");
    if (n_emitters > (1u << 24)) throw Error(errc::kBadConfig, "too many emitters for unique ids");
    if (!(tx_power >= -40.0 && tx_power <= 0.0)) throw Error(errc::kBadConfig, "tx power must be in [-40, 0] dBm");
    if (!(path_loss_exponent > 0.0)) throw Error(errc::kBadConfig, "path-loss exponent must be positive");
    if (!(noise_sigma >= 0.0)) throw Error(errc::kBadConfig, "noise sigma must be non-negative");
    if (!(sample_density > 0.0)) throw Error(errc::kBadConfig, "sample density must be positive");
    for (const auto& w : walls)
        if (!(w.attenuation >= 0.0)) throw Error(errc::kBadConfig, "wall attenuation must be non-negative");
}

std::vector<Wall> office_walls(const RoiGeometry& roi, double room_w, double room_h, double attenuation) {
    if (!(room_w > 0.0) || !(room_h > 0.0)) throw Error(errc::kBadConfig, "room size must be positive");
    std::vector<Wall> walls;
    const Rect b = roi.bounds();
    for (double x = b.min_x + room_w; x < b.max_x - 1e-9; x += room_w)
        walls.push_back({{x, b.min_y}, {x, b.max_y}, attenuation});
    for (double y = b.min_y + room_h; y < b.max_y - 1e-9; y += room_h)
        walls.push_back({{b.min_x, y}, {b.max_x, y}, attenuation});
    return walls;
}

WorldConfig standard_world(std::uint64_t seed) {
    WorldConfig c;
    c.seed = seed;
    c.walls = office_walls(c.roi, 5.0, 2.5, 10.0);
    return c;
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
    return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Proper or endpoint-touching intersection; collinear overlaps do not count
// since a ray grazing along a wall does not pass through it.
bool segments_cross(const Point2& p1, const Point2& p2, const Point2& q1, const Point2& q2) {
    const double d1 = cross(q1, q2, p1);
    const double d2 = cross(q1, q2, p2);
    const double d3 = cross(p1, p2, q1);
    const double d4 = cross(p1, p2, q2);
    if ((d1 == 0.0 && d2 == 0.0) || (d3 == 0.0 && d4 == 0.0)) return false;
    return ((d1 <= 0.0 && d2 >= 0.0) || (d1 >= 0.0 && d2 <= 0.0)) &&
           ((d3 <= 0.0 && d4 >= 0.0) || (d3 >= 0.0 && d4 <= 0.0));
}

}  // namespace

std::size_t walls_crossed(const std::vector<Wall>& walls, const Point2& a, const Point2& b, double* loss) {
    std::size_t n = 0;
    double total = 0.0;
    for (const auto& w : walls) {
        if (segments_cross(a, b, w.a, w.b)) {
            ++n;
            total += w.attenuation;
        }
    }
    if (loss) *loss = total;
    return n;
}

double mean_rss(const WorldConfig& config, const Point2& emitter, const Point2& p) {
    const double d = std::max(distance(emitter, p), 1.0);
    double wall_loss = 0.0;
    walls_crossed(config.walls, emitter, p, &wall_loss);
    return config.tx_power - 10.0 * config.path_loss_exponent * std::log10(d) - wall_loss;
}

namespace {

Fingerprint observe(const WorldConfig& config, const std::vector<Emitter>& emitters, const Point2& p,
                    std::mt19937_64& rng) {
    std::normal_distribution<double> noise(0.0, 1.0);
    Fingerprint fp;
    for (const auto& e : emitters) {
        // Draw unconditionally so the stream does not depend on visibility.
        double v = mean_rss(config, e.location, p) + config.noise_sigma * noise(rng);
        if (config.integer_rss) v = std::round(v);
        if (v <= kRssFloor) continue;
        fp.set(e.id, std::min(v, 0.0));
    }
    return fp;
}

}  // namespace

World generate(const WorldConfig& config) {
    config.validate();
    World world;
    world.config = config;
    std::mt19937_64 rng(config.seed);
    const Rect b = config.roi.bounds();
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    std::set<std::uint32_t> used;
    std::uniform_int_distribution<std::uint32_t> mac(0, (1u << 24) - 1);
    for (std::size_t i = 0; i < config.n_emitters; ++i) {
        std::uint32_t suffix = mac(rng);
        while (!used.insert(suffix).second) suffix = mac(rng);
        Emitter e;
        e.id = fmt::format("02:00:5e:{:02x}:{:02x}:{:02x}", (suffix >> 16) & 0xff, (suffix >> 8) & 0xff, suffix & 0xff);
        e.location = {b.min_x + unit(rng) * config.roi.width, b.min_y + unit(rng) * config.roi.height};
        world.emitters.push_back(std::move(e));
    }

    // Jittered lattice: one sample per lattice cell at a uniform offset.
    const double pitch = 1.0 / std::sqrt(config.sample_density);
    const auto nx = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.roi.width / pitch)));
    const auto ny = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(config.roi.height / pitch)));
    const double sx = config.roi.width / static_cast<double>(nx);
    const double sy = config.roi.height / static_cast<double>(ny);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            const Point2 p{b.min_x + (static_cast<double>(i) + unit(rng)) * sx,
                           b.min_y + (static_cast<double>(j) + unit(rng)) * sy};
            world.rfm_samples.push_back({p, observe(config, world.emitters, p, rng)});
        }
    }

    for (std::size_t t = 0; t < config.n_tests; ++t) {
        const Point2 p{b.min_x + unit(rng) * config.roi.width, b.min_y + unit(rng) * config.roi.height};
        world.tests.push_back({p, observe(config, world.emitters, p, rng)});
    }
    return world;
}

void write_world(const World& world, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(errc::kIo, "cannot create " + dir.string() + ": " + ec.message());
    write_samples(dir / "rfm.jsonl", world.rfm_samples);
    write_samples(dir / "tests.jsonl", world.tests);

    const auto& c = world.config;
    nlohmann::json walls = nlohmann::json::array();
    for (const auto& w : c.walls) walls.push_back({{"a", {w.a.x, w.a.y}}, {"b", {w.b.x, w.b.y}}, {"attenuation", w.attenuation}});
    nlohmann::json emitters = nlohmann::json::array();
    for (const auto& e : world.emitters) emitters.push_back({{"id", e.id}, {"x", e.location.x}, {"y", e.location.y}});
    nlohmann::json meta = {
        {"seed", c.seed},
        {"roi",
         {{"origin", {c.roi.origin.x, c.roi.origin.y}},
          {"width", c.roi.width},
          {"height", c.roi.height},
          {"cell_size", c.roi.cell_size}}},
        {"n_emitters", c.n_emitters},
        {"tx_power", c.tx_power},
        {"path_loss_exponent", c.path_loss_exponent},
        {"noise_sigma", c.noise_sigma},
        {"sample_density", c.sample_density},
        {"visibility_floor", kRssFloor},
        {"integer_rss", c.integer_rss},
        {"n_tests", c.n_tests},
        {"walls", walls},
        {"emitters", emitters},
        {"rfm_samples", world.rfm_samples.size()},
    };
    std::ofstream out(dir / "world.meta");
    if (!out) throw Error(errc::kIo, "cannot write " + (dir / "world.meta").string());
    out << meta.dump(2) << '\n';
}

}  // namespace fingerloc
