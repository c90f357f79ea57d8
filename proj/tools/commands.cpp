#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "fingerloc/error.hpp"
#include "fingerloc/evalbench.hpp"
#include "fingerloc/io.hpp"
#include "fingerloc/locate.hpp"

namespace fingerloc::cli {

namespace fs = std::filesystem;

void PipelineConfig::validate() const {
    auto bad = [](const std::string& what) { throw Error(errc::kBadConfig, what); };
    if (!(densify.spacing > 0.0)) bad("spacing must be positive");
    if (!(densify.length_scale > 0.0)) bad("length-scale must be positive");
    if (!(densify.cutoff_factor > 0.0)) bad("cutoff must be positive");
    if (!(cell_size > 0.0)) bad("cell-size must be positive");
    if (densify.spacing > cell_size) bad("spacing must not exceed cell-size");
    if (!roi.empty()) {
        if (roi.size() != 4) bad("roi needs x0,y0,width,height");
        if (!(roi[2] > 0.0) || !(roi[3] > 0.0)) throw Error(errc::kBadRoi, "roi width and height must be positive");
    }
    selector.validate();
    if (selectors.empty()) bad("at least one selector is required");
    for (const auto& s : selectors) parse_selector(s);
    if (!(flatness_tol >= 0.0)) bad("flatness-tol must be non-negative");
    if (!(holdout >= 0.0 && holdout < 1.0)) bad("holdout must be in [0, 1)");
    if (h == 0 || h < -1) bad("h must be -1 or positive");
    if (k < 1) bad("k must be at least 1");
    if (!(likelihood.sigma > 0.0)) bad("sigma must be positive");
    if (!(likelihood.p_miss >= 0.0 && likelihood.p_miss <= 1.0)) bad("p-miss must be in [0, 1]");
}

namespace {

template <typename F>
auto stage(const char* name, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), std::string(name) + ": " + e.detail());
    }
}

void require_file(const fs::path& path, const char* what) {
    if (path.empty()) throw Error(errc::kBadConfig, std::string("--") + what + " is required");
    if (!fs::exists(path)) throw Error(errc::kIo, std::string(what) + " file not found: " + path.string());
}

struct Prepared {
    std::vector<LabeledSample> raw;
    RoiGeometry roi;
    GriddedRfm gridded;
    SubregionIndex index;
};

RoiGeometry resolve_roi(const PipelineConfig& config, const std::vector<LabeledSample>& samples) {
    if (config.roi.empty()) return bounding_roi(samples, config.cell_size);
    RoiGeometry roi{{config.roi[0], config.roi[1]}, config.roi[2], config.roi[3], config.cell_size};
    roi.validate();
    return roi;
}

Prepared prepare(const PipelineConfig& config) {
    require_file(config.rfm, "rfm");
    Prepared p;
    p.raw = stage("ingest", [&] { return read_samples(config.rfm); });
    if (p.raw.empty()) throw Error(errc::kEmptyRfm, "ingest: " + config.rfm.string() + " holds no samples");
    p.roi = stage("ingest", [&] { return resolve_roi(config, p.raw); });
    // Subregion key sets come from the measurements themselves: the lattice
    // inherits every feature seen within the kernel support, which blurs the
    // sets across neighbouring cells and flattens the MJI ranking.
    p.index = stage("partition", [&] { return partition(Rfm(p.raw, p.roi), config.cell_size); });
    p.gridded = stage("densify", [&] { return densify(Rfm(p.raw, p.roi), p.index, config.densify); });
    return p;
}

LossCurve subregion_curve(const PipelineConfig& config, const Prepared& p, std::size_t m_max = 0) {
    std::vector<LabeledSample> validation;
    if (!config.validation.empty()) {
        require_file(config.validation, "validation");
        validation = read_samples(config.validation);
    } else {
        validation = p.raw;
    }
    if (m_max > p.index.cells.size())
        throw Error(errc::kBadM, "m-max=" + std::to_string(m_max) + " exceeds " + std::to_string(p.index.cells.size()) +
                                     " cells");
    return loss_curve(validation, p.index, m_max == 0 ? p.index.cells.size() : m_max, config.formula);
}

std::map<std::string, SelectionProfile> select_all(const PipelineConfig& config, const Prepared& p,
                                                   std::size_t search_cells) {
    // Reference: the lattice that ships in the bundle. Validation: the raw
    // measurements, which look like online queries (noisy, unsmoothed), or a
    // seeded per-cell slice of the lattice with --holdout.
    std::vector<LabeledSample> reference, validation;
    if (config.holdout > 0.0) {
        auto split = split_validation(p.gridded, config.holdout, config.seed);
        reference = std::move(split.reference);
        validation = std::move(split.validation);
    } else {
        reference.reserve(p.gridded.points.size());
        for (const auto& g : p.gridded.points) reference.push_back({g.location, g.fingerprint});
        validation = p.raw;
    }
    SelectorConfig sc = config.selector;
    sc.likelihood = config.likelihood;
    sc.search_cells = search_cells;
    const SelectionContext context(reference, validation, p.index, sc);
    std::map<std::string, SelectionProfile> out;
    for (const auto& label : config.selectors) {
        spdlog::info("running {} selection on {} subregions", label, p.index.non_empty_count());
        out.emplace(label, build_profile(context, parse_selector(label), config.threads));
    }
    return out;
}

std::ostream& open_out(const fs::path& path, std::ofstream& file, std::ostream& fallback) {
    if (path.empty()) return fallback;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    file.open(path, std::ios::trunc);
    if (!file) throw Error(errc::kIo, "cannot write " + path.string());
    return file;
}

nlohmann::json profile_json(const SelectionProfile& profile) {
    nlohmann::json cells = nlohmann::json::object();
    for (const auto& [cell, s] : profile.per_cell) {
        cells[std::to_string(cell)] = {{"features", s.features},
                                       {"initial_loss", s.initial_loss},
                                       {"final_loss", s.final_loss},
                                       {"iterations", s.iterations}};
    }
    const auto& c = profile.config;
    return {{"kind", to_string(profile.kind)},
            {"config",
             {{"epsilon", c.epsilon},
              {"nu", c.nu},
              {"k_max", c.k_max},
              {"phi", c.phi},
              {"k_min", c.k_min},
              {"positioning", to_string(c.positioning)},
              {"knn_k", c.knn_k},
              {"search_cells", c.search_cells}}},
            {"cells", cells}};
}

}  // namespace

PrecomputeSummary cmd_precompute(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    if (config.bundle.empty()) throw Error(errc::kBadConfig, "--bundle (output directory) is required");
    const Prepared p = prepare(config);

    PrecomputeSummary summary;
    summary.cells = p.index.cells.size();
    summary.non_empty = p.index.non_empty_count();
    summary.alpha = p.gridded.per_subregion_point_count;
    const LossCurve curve = stage("choose-m", [&] { return subregion_curve(config, p); });
    summary.chosen_m = choose_m(curve, config.flatness_tol);
    if (config.m > summary.cells)
        throw Error(errc::kBadM, "m=" + std::to_string(config.m) + " exceeds " + std::to_string(summary.cells) + " cells");
    summary.default_m = config.m != 0 ? config.m : summary.chosen_m;

    auto profiles = stage("feature-select", [&] { return select_all(config, p, summary.default_m); });

    PrecomputedBundle bundle = stage("bundle", [&] {
        PrecomputedBundle b = make_bundle(p.gridded, p.index, config.likelihood, config.seed);
        b.roi = p.roi;
        b.profiles = std::move(profiles);
        b.default_m = summary.default_m;
        return b;
    });
    stage("save", [&] {
        save_bundle(bundle, config.bundle);
        return 0;
    });

    report << fmt::format("bundle      {}\n", config.bundle.string());
    report << fmt::format("cells       {} ({} x {} of {:g} m), {} non-empty\n", summary.cells, p.roi.cols(),
                          p.roi.rows(), p.roi.cell_size, summary.non_empty);
    report << fmt::format("alpha       {}\n", summary.alpha);
    report << fmt::format("features    {}\n", bundle.feature_universe.size());
    report << fmt::format("m           {} (loss curve suggests {})\n", summary.default_m, summary.chosen_m);
    for (const auto& [label, profile] : bundle.profiles) {
        std::size_t total = 0, lo = SIZE_MAX, hi = 0;
        for (const auto& [cell, s] : profile.per_cell) {
            total += s.features.size();
            lo = std::min(lo, s.features.size());
            hi = std::max(hi, s.features.size());
        }
        const double mean = profile.per_cell.empty() ? 0.0 : double(total) / double(profile.per_cell.size());
        report << fmt::format("{:<11} selected features per cell: mean {:.1f}, min {}, max {}\n", label, mean,
                              profile.per_cell.empty() ? 0 : lo, hi);
        for (const auto& [cell, s] : profile.per_cell)
            report << fmt::format("  cell {:>4}: {:>3} features, loss {:.3f} -> {:.3f}\n", cell, s.features.size(),
                                  s.initial_loss, s.final_loss);
    }
    report << fmt::format("seed        {}\nchecksum    {:08x}\n", config.seed, bundle_checksum(config.bundle));
    return summary;
}

void cmd_synth(const WorldConfig& world_config, const fs::path& out, std::ostream& report) {
    if (out.empty()) throw Error(errc::kBadConfig, "--out is required");
    const World world = generate(world_config);
    write_world(world, out);
    report << fmt::format("wrote {} RFM samples and {} test queries to {} (seed {})\n", world.rfm_samples.size(),
                          world.tests.size(), out.string(), world_config.seed);
}

void cmd_ingest(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    require_file(config.rfm, "rfm");
    const auto samples = read_samples(config.rfm);
    if (samples.empty()) throw Error(errc::kEmptyRfm, config.rfm.string() + " holds no samples");
    const RoiGeometry roi = resolve_roi(config, samples);
    const Rfm rfm(samples, roi);
    const SubregionIndex index = partition(rfm, config.cell_size);
    if (!config.out.empty()) write_samples(config.out, samples);
    std::size_t observations = 0;
    for (const auto& s : samples) observations += s.fingerprint.size();
    report << fmt::format("samples     {}\nobservations {}\nfeatures    {}\n", samples.size(), observations,
                          rfm.feature_universe().size());
    report << fmt::format("roi         origin ({:g}, {:g}), {:g} x {:g} m\n", roi.origin.x, roi.origin.y, roi.width,
                          roi.height);
    report << fmt::format("cells       {} ({} non-empty)\n", index.cells.size(), index.non_empty_count());
}

void cmd_densify(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    if (config.out.empty()) throw Error(errc::kBadConfig, "--out is required");
    const Prepared p = prepare(config);
    std::vector<LabeledSample> points;
    points.reserve(p.gridded.points.size());
    for (const auto& g : p.gridded.points) points.push_back({g.location, g.fingerprint});
    write_samples(config.out, points);
    report << fmt::format("{} grid points ({} per non-empty cell, {} non-empty cells) -> {}\n", points.size(),
                          p.gridded.per_subregion_point_count, p.index.non_empty_count(), config.out.string());
}

void cmd_segment_eval(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    const Prepared p = prepare(config);
    const LossCurve curve = stage("segment-eval", [&] { return subregion_curve(config, p, config.m_max); });
    std::ofstream file;
    std::ostream& out = open_out(config.out, file, report);
    out << "m,loss\n";
    for (const auto& pt : curve.points) out << fmt::format("{},{:.6f}\n", pt.m, pt.loss);
    spdlog::info("loss curve suggests m = {}", choose_m(curve, config.flatness_tol));
    if (!config.out.empty())
        report << fmt::format("chosen m = {} of {} cells\n", choose_m(curve, config.flatness_tol), curve.points.size());
}

void cmd_featsel(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    const Prepared p = prepare(config);
    std::size_t search_cells = config.m;
    if (search_cells > p.index.cells.size()) throw Error(errc::kBadM, "m exceeds the cell count");
    if (search_cells == 0)
        search_cells = choose_m(stage("choose-m", [&] { return subregion_curve(config, p); }), config.flatness_tol);
    const auto profiles = stage("feature-select", [&] { return select_all(config, p, search_cells); });

    nlohmann::json doc = {{"seed", config.seed}, {"search_cells", search_cells}, {"profiles", nlohmann::json::object()}};
    for (const auto& [label, profile] : profiles) doc["profiles"][label] = profile_json(profile);
    std::ofstream file;
    std::ostream& out = open_out(config.out, file, report);
    out << doc.dump(1) << '\n';
}

void cmd_locate(const PipelineConfig& config, std::ostream& report) {
    config.validate();
    require_file(config.bundle / "manifest.json", "bundle");
    require_file(config.queries, "in");
    const PrecomputedBundle bundle = load_bundle(config.bundle);
    const Locator locator(bundle);
    const auto queries = read_fingerprints(config.queries);

    LocateConfig lc;
    lc.m = config.m;
    lc.h = config.h;
    lc.method = config.method;
    lc.k = config.k;
    lc.selector = config.locate_selector;
    lc.formula = config.formula;

    std::ofstream file;
    std::ostream& out = open_out(config.out, file, report);
    out << "query_id,x,y,elapsed_seconds,fallback_flag\n";
    for (std::size_t i = 0; i < queries.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        const LocateResult r = locator.online_position(queries[i], lc);
        const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << fmt::format("{},{:.4f},{:.4f},{:.6g},{}\n", i, r.estimate.x, r.estimate.y, elapsed, r.fallback ? 1 : 0);
    }
}

void cmd_eval(const PipelineConfig& config, const std::string& grid, std::ostream& report) {
    config.validate();
    require_file(config.bundle / "manifest.json", "bundle");
    require_file(config.tests, "tests");
    const PrecomputedBundle bundle = load_bundle(config.bundle);
    const Locator locator(bundle);
    const auto tests = read_samples(config.tests);
    std::string spec = grid;
    if (spec.empty()) spec = "methods=" + to_string(config.method);
    const auto configs = parse_eval_grid(spec, locator.cell_count(), {config.locate_selector});
    for (const auto& c : configs)
        if (c.selector != kFullSearch && !locator.has_selector(c.selector))
            throw Error(errc::kBadConfig, "bundle has no selector '" + c.selector + "'");

    BenchmarkOptions options;
    options.knn_k = config.k;
    options.formula = config.formula;
    const auto reports = run_benchmark(locator, tests, configs, options);
    std::ofstream file;
    std::ostream& out = open_out(config.out, file, report);
    write_report_csv(out, reports);
    spdlog::info("evaluated {} configurations on {} queries (bundle seed {})", reports.size(), tests.size(),
                 bundle.seed);
}

// ---------------------------------------------------------------------------

namespace {

bool is_usage_error(const std::string& code) {
    static const std::set<std::string> usage = {errc::kBadConfig,      errc::kIo,
                                                errc::kParse,          errc::kCorruptBundle,
                                                errc::kVersionMismatch, errc::kChecksumMismatch};
    return usage.count(code) != 0;
}

std::pair<double, double> parse_extent(const std::string& text, const char* what) {
    const auto x = text.find('x');
    try {
        if (x != std::string::npos) {
            std::size_t a = 0, b = 0;
            const double w = std::stod(text.substr(0, x), &a);
            const double h = std::stod(text.substr(x + 1), &b);
            if (a == x && b == text.size() - x - 1) return {w, h};
        }
    } catch (const std::exception&) {
    }
    throw Error(errc::kBadConfig, std::string(what) + " must look like WxH, got '" + text + "'");
}

void init_logging(bool verbose) {
    auto logger = spdlog::get("fingerloc");
    if (!logger) {
        logger = spdlog::stderr_color_mt("fingerloc");
        spdlog::set_default_logger(logger);
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Fingerprint indoor positioning with subregion and feature selection", "fingerloc"};
    // "-h" would clash with the candidate-feature count option "--h".
    app.set_help_flag("--help", "Print this help message and exit");
    app.set_config("--config", "", "TOML or INI file with option values; flags win");
    app.require_subcommand(1);
    app.fallthrough();

    PipelineConfig cfg;
    bool verbose = false;
    app.add_option("--seed", cfg.seed, "Seed for every random draw")->capture_default_str();
    app.add_flag("--verbose,-v", verbose, "Debug logging");

    std::string method = "map", formula = "coverage", selectors = "foba", grid;

    auto densify_opts = [&](CLI::App* sub) {
        sub->add_option("--rfm,--in", cfg.rfm, "Raw RFM (JSON lines)");
        sub->add_option("--spacing", cfg.densify.spacing, "Grid spacing (m)")->capture_default_str();
        sub->add_option("--length-scale", cfg.densify.length_scale, "Kernel length scale (m)")->capture_default_str();
        sub->add_option("--cutoff", cfg.densify.cutoff_factor, "Kernel support in length scales")->capture_default_str();
        sub->add_option("--cell-size", cfg.cell_size, "Subregion side (m)")->capture_default_str();
        sub->add_option("--roi", cfg.roi, "x0,y0,width,height (default: RFM bounding box)")->delimiter(',')->expected(4);
    };
    auto segment_opts = [&](CLI::App* sub) {
        sub->add_option("--validation", cfg.validation, "Labeled queries for choosing m (default: the RFM)");
        sub->add_option("--flatness-tol", cfg.flatness_tol, "Loss flatness for choosing m")->capture_default_str();
        sub->add_option("--formula", formula, "coverage or jaccard")->capture_default_str();
    };
    auto selector_opts = [&](CLI::App* sub) {
        sub->add_option("--selectors", selectors, "Comma-separated: foba, forward, backward")->capture_default_str();
        sub->add_option("--epsilon", cfg.selector.epsilon, "Minimum forward gain (m^2)")->capture_default_str();
        sub->add_option("--nu", cfg.selector.nu, "FoBa backward tolerance")->capture_default_str();
        sub->add_option("--k-max", cfg.selector.k_max, "Forward size cap")->capture_default_str();
        sub->add_option("--phi", cfg.selector.phi, "Backward maximum loss increase (m^2)")->capture_default_str();
        sub->add_option("--k-min", cfg.selector.k_min, "Backward size floor")->capture_default_str();
        sub->add_option("--threads", cfg.threads, "Worker threads (0 = all cores)")->capture_default_str();
        sub->add_option("--holdout", cfg.holdout,
                        "Validate on this per-cell fraction of the grid instead of the raw RFM")
            ->capture_default_str();
    };
    auto likelihood_opts = [&](CLI::App* sub) {
        sub->add_option("--sigma", cfg.likelihood.sigma, "MAP likelihood spread (dBm)")->capture_default_str();
        sub->add_option("--p-miss", cfg.likelihood.p_miss, "MAP likelihood of a missing feature")
            ->capture_default_str();
    };
    auto locate_opts = [&](CLI::App* sub) {
        sub->add_option("--bundle", cfg.bundle, "Bundle directory")->required();
        sub->add_option("--m", cfg.m, "Candidate subregions (default: the bundle's)");
        sub->add_option("--h", cfg.h, "Candidate features, -1 for all")->capture_default_str();
        sub->add_option("--method", method, "knn or map")->capture_default_str();
        sub->add_option("--k", cfg.k, "kNN neighbors")->capture_default_str();
        sub->add_option("--selector", cfg.locate_selector, "Profile used online (or 'all')")->capture_default_str();
        sub->add_option("--formula", formula, "coverage or jaccard")->capture_default_str();
    };

    WorldConfig world = standard_world();
    std::string area = "20x10", rooms = "5x2.5";
    double wall_loss = 10.0;
    fs::path synth_out;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic radio world");
    synth->add_option("--area", area, "WxH in metres")->capture_default_str();
    synth->add_option("--emitters", world.n_emitters)->capture_default_str();
    synth->add_option("--density", world.sample_density, "RFM samples per m^2")->capture_default_str();
    synth->add_option("--noise", world.noise_sigma, "RSS noise sigma (dBm)")->capture_default_str();
    synth->add_option("--tx-power", world.tx_power, "dBm at 1 m")->capture_default_str();
    synth->add_option("--path-loss", world.path_loss_exponent, "Path-loss exponent")->capture_default_str();
    synth->add_option("--rooms", rooms, "Room size WxH, or 'none' for open space")->capture_default_str();
    synth->add_option("--wall-loss", wall_loss, "Attenuation per wall (dB)")->capture_default_str();
    synth->add_option("--tests", world.n_tests, "Test queries")->capture_default_str();
    synth->add_option("--cell-size", world.roi.cell_size, "Subregion side (m), echoed in world.meta")
        ->capture_default_str();
    synth->add_option("--out", synth_out, "Output directory")->required();

    auto* ingest = app.add_subcommand("ingest", "Validate a raw RFM and summarize it");
    densify_opts(ingest);
    ingest->add_option("--out", cfg.out, "Write the normalized RFM here");

    auto* dens = app.add_subcommand("densify", "Interpolate the RFM onto the grid");
    densify_opts(dens);
    dens->add_option("--out", cfg.out, "Gridded RFM (JSON lines)")->required();

    auto* seg = app.add_subcommand("segment-eval", "Subregion selection loss for every m");
    densify_opts(seg);
    segment_opts(seg);
    seg->add_option("--m-max", cfg.m_max, "Last m of the curve (default: every cell)");
    seg->add_option("--out", cfg.out, "CSV m,loss (default: stdout)");

    auto* featsel = app.add_subcommand("featsel", "Select relevant features per subregion");
    densify_opts(featsel);
    segment_opts(featsel);
    selector_opts(featsel);
    likelihood_opts(featsel);
    featsel->add_option("--m", cfg.m, "Subregions searched per validation query (default: chosen)");
    featsel->add_option("--method", method, "Positioning used for the loss: knn or map")->capture_default_str();
    featsel->add_option("--out", cfg.out, "Profile JSON (default: stdout)");

    auto* pre = app.add_subcommand("precompute", "Build the bundle for online positioning");
    densify_opts(pre);
    segment_opts(pre);
    selector_opts(pre);
    likelihood_opts(pre);
    pre->add_option("--m", cfg.m, "Default candidate subregions (default: chosen from the loss curve)");
    pre->add_option("--method", method, "Positioning used for the selection loss: knn or map")->capture_default_str();
    pre->add_option("--bundle,--out", cfg.bundle, "Bundle directory")->required();

    auto* loc = app.add_subcommand("locate", "Position queries against a bundle");
    locate_opts(loc);
    loc->add_option("--in", cfg.queries, "Queries (JSON lines; x/y optional)")->required();
    loc->add_option("--out", cfg.out, "Estimates CSV (default: stdout)");

    auto* ev = app.add_subcommand("eval", "Benchmark configurations on a labeled test set");
    locate_opts(ev);
    ev->add_option("--tests", cfg.tests, "Labeled test queries")->required();
    ev->add_option("--grid", grid, "e.g. methods=knn,map;m=11,21,M;h=-1;selectors=foba,full");
    ev->add_option("--out", cfg.out, "Report CSV (default: stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }
    init_logging(verbose);

    try {
        cfg.method = parse_method(method);
        cfg.selector.positioning = cfg.method;
        cfg.selector.knn_k = cfg.k;
        if (formula == "coverage")
            cfg.formula = MjiFormula::Coverage;
        else if (formula == "jaccard")
            cfg.formula = MjiFormula::Jaccard;
        else
            throw Error(errc::kBadConfig, "formula must be coverage or jaccard");
        cfg.selectors.clear();
        std::stringstream ss(selectors);
        for (std::string s; std::getline(ss, s, ',');)
            if (!s.empty()) cfg.selectors.push_back(s);

        if (synth->parsed()) {
            world.seed = cfg.seed;
            const auto [w, h] = parse_extent(area, "--area");
            world.roi.width = w;
            world.roi.height = h;
            world.walls.clear();
            if (rooms != "none") {
                const auto [rw, rh] = parse_extent(rooms, "--rooms");
                world.walls = office_walls(world.roi, rw, rh, wall_loss);
            }
            cmd_synth(world, synth_out, out);
        } else if (ingest->parsed()) {
            cmd_ingest(cfg, out);
        } else if (dens->parsed()) {
            cmd_densify(cfg, out);
        } else if (seg->parsed()) {
            cmd_segment_eval(cfg, out);
        } else if (featsel->parsed()) {
            cmd_featsel(cfg, out);
        } else if (pre->parsed()) {
            cmd_precompute(cfg, out);
        } else if (loc->parsed()) {
            cmd_locate(cfg, out);
        } else if (ev->parsed()) {
            cmd_eval(cfg, grid, out);
        }
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return is_usage_error(e.code()) ? kExitUsage : kExitComputation;
    } catch (const fs::filesystem_error& e) {
        err << "error: io-error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitComputation;
    }
    return kExitOk;
}

}  // namespace fingerloc::cli
