#include "fingerloc/bundle.hpp"

#include <zlib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "fingerloc/error.hpp"

namespace fingerloc {

using nlohmann::json;
namespace fs = std::filesystem;

std::size_t PrecomputedBundle::alpha() const {
    for (const auto& c : cells)
        if (!c.grid.empty()) return c.grid.size();
    return 0;
}

void PrecomputedBundle::validate() const {
    auto bad = [](const std::string& what) { throw Error(errc::kInconsistentBundle, what); };
    if (cells.size() != roi.cell_count()) bad("cell count does not match the RoI");
    const std::set<FeatureId> universe(feature_universe.begin(), feature_universe.end());
    if (universe.size() != feature_universe.size()) bad("duplicate feature in universe");
    const std::size_t a = alpha();
    for (std::size_t i = 0; i < cells.size(); ++i) {
        const auto& c = cells[i];
        if (c.cell_index != i) bad("cell " + std::to_string(i) + " stored out of order");
        if (!c.grid.empty() && c.grid.size() != a) bad("cell " + std::to_string(i) + " breaks constant alpha");
        for (const auto& f : c.observable_features)
            if (!universe.count(f)) bad("cell " + std::to_string(i) + " observes unknown feature " + f);
        for (const auto& g : c.grid) {
            if (!(g.prior > 0.0)) bad("non-positive prior in cell " + std::to_string(i));
            for (const auto& [f, v] : g.values) {
                if (!universe.count(f)) bad("grid value for unknown feature " + f);
                if (v > 0 || v <= kAbsentRss) bad("grid value out of range for " + f);
            }
        }
    }
    for (const auto& [label, profile] : profiles) {
        for (const auto& [cell, subset] : profile.per_cell) {
            if (cell >= cells.size() || cells[cell].grid.empty())
                bad("profile '" + label + "' names unusable cell " + std::to_string(cell));
            for (const auto& f : subset.features)
                if (!universe.count(f)) bad("profile '" + label + "' selects unknown feature " + f);
        }
    }
}

PrecomputedBundle make_bundle(const GriddedRfm& gridded, const SubregionIndex& index,
                              const LikelihoodModel& likelihood, std::uint64_t seed) {
    PrecomputedBundle b;
    b.roi = gridded.roi;
    b.grid_spacing = gridded.grid_spacing;
    b.likelihood = likelihood;
    b.seed = seed;
    FeatureSet universe;
    b.cells.resize(index.cells.size());
    for (std::size_t i = 0; i < index.cells.size(); ++i) {
        b.cells[i].cell_index = i;
        b.cells[i].bounds = index.cells[i].bounds;
        b.cells[i].observable_features.assign(index.cells[i].observable_features.begin(),
                                              index.cells[i].observable_features.end());
        universe.insert(index.cells[i].observable_features.begin(), index.cells[i].observable_features.end());
    }
    for (const auto& p : gridded.points) {
        if (p.cell >= b.cells.size()) throw Error(errc::kInconsistentBundle, "grid point outside the partition");
        BundleGridPoint g;
        g.location = p.location;
        for (const auto& [f, v] : p.fingerprint.observations()) {
            g.values.emplace(f, static_cast<int>(std::lround(v)));
            universe.insert(f);
        }
        b.cells[p.cell].grid.push_back(std::move(g));
    }
    b.feature_universe.assign(universe.begin(), universe.end());
    return b;
}

std::uint32_t crc32_of(const std::string& bytes) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed large buffers in slices.
    const auto* data = reinterpret_cast<const Bytef*>(bytes.data());
    std::size_t left = bytes.size();
    while (left > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace {

json to_json(const Rect& r) { return json::array({r.min_x, r.min_y, r.max_x, r.max_y}); }

Rect rect_from(const json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

json to_json(const SelectorConfig& c) {
    return {{"epsilon", c.epsilon},
            {"nu", c.nu},
            {"k_max", c.k_max},
            {"phi", c.phi},
            {"k_min", c.k_min},
            {"positioning", to_string(c.positioning)},
            {"knn_k", c.knn_k},
            {"sigma", c.likelihood.sigma},
            {"p_miss", c.likelihood.p_miss},
            {"search_cells", c.search_cells}};
}

SelectorConfig selector_config_from(const json& j) {
    SelectorConfig c;
    c.epsilon = j.at("epsilon").get<double>();
    c.nu = j.at("nu").get<double>();
    c.k_max = j.at("k_max").get<std::size_t>();
    c.phi = j.at("phi").get<double>();
    c.k_min = j.at("k_min").get<std::size_t>();
    c.positioning = parse_method(j.at("positioning").get<std::string>());
    c.knn_k = j.at("knn_k").get<std::size_t>();
    c.likelihood.sigma = j.at("sigma").get<double>();
    c.likelihood.p_miss = j.at("p_miss").get<double>();
    c.search_cells = j.at("search_cells").get<std::size_t>();
    return c;
}

std::string cell_file_name(std::size_t cell) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "cell-%05zu.json", cell);
    return buf;
}

std::string cell_record(const PrecomputedBundle& b, const BundleCell& c) {
    json grid = json::array();
    for (const auto& g : c.grid) {
        json values = json::object();
        for (const auto& [f, v] : g.values) values[f] = v;
        grid.push_back({{"x", g.location.x}, {"y", g.location.y}, {"prior", g.prior}, {"values", values}});
    }
    json selections = json::object();
    for (const auto& [label, profile] : b.profiles) {
        auto it = profile.per_cell.find(c.cell_index);
        if (it == profile.per_cell.end()) continue;
        const auto& s = it->second;
        selections[label] = {{"features", s.features},
                             {"final_loss", s.final_loss},
                             {"initial_loss", s.initial_loss},
                             {"iterations", s.iterations}};
    }
    json j = {{"cell", c.cell_index},
              {"bounds", to_json(c.bounds)},
              {"observable_features", c.observable_features},
              {"grid", grid},
              {"selections", selections}};
    return j.dump(1);
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(errc::kCorruptBundle, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(errc::kIo, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw Error(errc::kIo, "short write to " + path.string());
}

fs::path sibling(const fs::path& dir, const std::string& suffix) {
    fs::path target = dir;
    if (!target.has_filename()) target = target.parent_path();
    return target.parent_path() / (target.filename().string() + suffix);
}

}  // namespace

void save_bundle(const PrecomputedBundle& bundle, const fs::path& dir) {
    bundle.validate();
    const fs::path tmp = sibling(dir, ".tmp");
    const fs::path old = sibling(dir, ".old");
    std::error_code ec;
    fs::remove_all(tmp, ec);
    fs::create_directories(tmp / "cells", ec);
    if (ec) throw Error(errc::kIo, "cannot create " + tmp.string() + ": " + ec.message());

    try {
        json records = json::array();
        for (const auto& c : bundle.cells) {
            const std::string bytes = cell_record(bundle, c);
            const std::string name = "cells/" + cell_file_name(c.cell_index);
            write_file(tmp / name, bytes);
            records.push_back({{"cell", c.cell_index}, {"file", name}, {"bytes", bytes.size()}, {"crc32", crc32_of(bytes)}});
        }
        json profiles = json::object();
        for (const auto& [label, p] : bundle.profiles)
            profiles[label] = {{"kind", to_string(p.kind)}, {"config", to_json(p.config)}, {"cells", p.per_cell.size()}};

        const auto& roi = bundle.roi;
        json manifest = {
            {"format", kBundleFormatTag},
            {"version", kBundleFormatVersion},
            {"roi",
             {{"origin", {roi.origin.x, roi.origin.y}},
              {"width", roi.width},
              {"height", roi.height},
              {"cell_size", roi.cell_size},
              {"cols", roi.cols()},
              {"rows", roi.rows()}}},
            {"grid_spacing", bundle.grid_spacing},
            {"alpha", bundle.alpha()},
            {"feature_universe", bundle.feature_universe},
            {"likelihood", {{"sigma", bundle.likelihood.sigma}, {"p_miss", bundle.likelihood.p_miss}}},
            {"default_m", bundle.default_m},
            {"seed", bundle.seed},
            {"profiles", profiles},
            {"records", records},
        };
        write_file(tmp / "manifest.json", manifest.dump(1));
    } catch (...) {
        fs::remove_all(tmp, ec);
        throw;
    }

    fs::remove_all(old, ec);
    const bool had_previous = fs::exists(dir);
    if (had_previous) {
        fs::rename(dir, old, ec);
        if (ec) throw Error(errc::kIo, "cannot move previous bundle aside: " + ec.message());
    }
    fs::rename(tmp, dir, ec);
    if (ec) {
        std::error_code ignored;
        if (had_previous) fs::rename(old, dir, ignored);
        throw Error(errc::kIo, "cannot install bundle at " + dir.string() + ": " + ec.message());
    }
    if (had_previous) fs::remove_all(old, ec);
}

PrecomputedBundle load_bundle(const fs::path& dir) {
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path)) throw Error(errc::kCorruptBundle, "no manifest in " + dir.string());
    json manifest;
    try {
        manifest = json::parse(read_file(manifest_path));
    } catch (const json::exception& e) {
        throw Error(errc::kCorruptBundle, "manifest: " + std::string(e.what()));
    }

    PrecomputedBundle b;
    std::vector<json> cell_docs;
    try {
        if (manifest.at("format").get<std::string>() != kBundleFormatTag)
            throw Error(errc::kCorruptBundle, "not a fingerloc bundle");
        const int version = manifest.at("version").get<int>();
        if (version != kBundleFormatVersion)
            throw Error(errc::kVersionMismatch, "bundle format version " + std::to_string(version) + ", expected " +
                                                    std::to_string(kBundleFormatVersion));

        const auto& r = manifest.at("roi");
        b.roi.origin = {r.at("origin").at(0).get<double>(), r.at("origin").at(1).get<double>()};
        b.roi.width = r.at("width").get<double>();
        b.roi.height = r.at("height").get<double>();
        b.roi.cell_size = r.at("cell_size").get<double>();
        b.roi.validate();
        b.grid_spacing = manifest.at("grid_spacing").get<double>();
        b.feature_universe = manifest.at("feature_universe").get<std::vector<FeatureId>>();
        b.likelihood.sigma = manifest.at("likelihood").at("sigma").get<double>();
        b.likelihood.p_miss = manifest.at("likelihood").at("p_miss").get<double>();
        b.default_m = manifest.at("default_m").get<std::size_t>();
        b.seed = manifest.at("seed").get<std::uint64_t>();
        for (const auto& [label, p] : manifest.at("profiles").items()) {
            SelectionProfile profile;
            profile.kind = parse_selector(p.at("kind").get<std::string>());
            profile.config = selector_config_from(p.at("config"));
            b.profiles.emplace(label, std::move(profile));
        }

        for (const auto& rec : manifest.at("records")) {
            const std::string name = rec.at("file").get<std::string>();
            const fs::path path = dir / name;
            if (!fs::exists(path)) throw Error(errc::kCorruptBundle, "missing record " + name);
            const std::string bytes = read_file(path);
            if (bytes.size() != rec.at("bytes").get<std::size_t>())
                throw Error(errc::kCorruptBundle, "record " + name + " is truncated or padded");
            if (crc32_of(bytes) != rec.at("crc32").get<std::uint32_t>())
                throw Error(errc::kChecksumMismatch, "record " + name + " fails its CRC-32");
            try {
                cell_docs.push_back(json::parse(bytes));
            } catch (const json::exception& e) {
                throw Error(errc::kCorruptBundle, "record " + name + ": " + e.what());
            }
        }
    } catch (const json::exception& e) {
        throw Error(errc::kCorruptBundle, "manifest: " + std::string(e.what()));
    }

    try {
        for (const auto& doc : cell_docs) {
            BundleCell c;
            c.cell_index = doc.at("cell").get<std::size_t>();
            c.bounds = rect_from(doc.at("bounds"));
            c.observable_features = doc.at("observable_features").get<std::vector<FeatureId>>();
            for (const auto& g : doc.at("grid")) {
                BundleGridPoint p;
                p.location = {g.at("x").get<double>(), g.at("y").get<double>()};
                p.prior = g.at("prior").get<double>();
                for (const auto& [f, v] : g.at("values").items()) p.values.emplace(f, v.get<int>());
                c.grid.push_back(std::move(p));
            }
            for (const auto& [label, s] : doc.at("selections").items()) {
                auto it = b.profiles.find(label);
                if (it == b.profiles.end())
                    throw Error(errc::kInconsistentBundle, "selection for undeclared profile '" + label + "'");
                FeatureSubset subset;
                subset.cell_index = c.cell_index;
                subset.features = s.at("features").get<std::vector<FeatureId>>();
                subset.final_loss = s.at("final_loss").get<double>();
                subset.initial_loss = s.at("initial_loss").get<double>();
                subset.iterations = s.at("iterations").get<std::size_t>();
                it->second.per_cell.emplace(c.cell_index, std::move(subset));
            }
            b.cells.push_back(std::move(c));
        }
    } catch (const json::exception& e) {
        throw Error(errc::kCorruptBundle, std::string("cell record: ") + e.what());
    }
    std::sort(b.cells.begin(), b.cells.end(),
              [](const BundleCell& x, const BundleCell& y) { return x.cell_index < y.cell_index; });
    b.validate();
    spdlog::debug("loaded bundle from {}: {} cells, alpha {}", dir.string(), b.cells.size(), b.alpha());
    return b;
}

std::uint32_t bundle_checksum(const fs::path& dir) {
    return crc32_of(read_file(dir / "manifest.json"));
}

}  // namespace fingerloc
