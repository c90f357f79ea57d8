#include "fingerloc/io.hpp"

#include <fstream>
#include <json.hpp>

#include "fingerloc/error.hpp"

namespace fingerloc {

using nlohmann::json;

namespace {

LabeledSample parse_record(const std::string& line, bool need_location) {
    json j;
    try {
        j = json::parse(line);
    } catch (const json::parse_error& e) {
        throw Error(errc::kParse, e.what());
    }
    if (!j.is_object()) throw Error(errc::kParse, "record is not an object");
    const bool located = j.contains("x") && j.contains("y") && j["x"].is_number() && j["y"].is_number();
    if (need_location && !located) throw Error(errc::kParse, "record needs numeric \"x\" and \"y\"");

    LabeledSample s;
    if (located) s.location = {j["x"].get<double>(), j["y"].get<double>()};
    if (j.contains("t") && !j["t"].is_null()) {
        if (!j["t"].is_number()) throw Error(errc::kParse, "\"t\" must be a number");
        s.fingerprint.set_timestamp(j["t"].get<double>());
    }
    if (j.contains("obs")) {
        const auto& obs = j["obs"];
        if (!obs.is_object()) throw Error(errc::kParse, "\"obs\" must be an object");
        for (const auto& [id, value] : obs.items()) {
            if (!value.is_number()) throw Error(errc::kParse, "rss for '" + id + "' is not a number");
            s.fingerprint.set(id, value.get<double>());
        }
    }
    return s;
}

template <typename T, typename Parse>
std::vector<T> read_lines(std::istream& in, Parse parse) {
    std::vector<T> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            out.push_back(parse(line));
        } catch (const Error& e) {
            throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.detail());
        }
    }
    return out;
}

}  // namespace

LabeledSample parse_sample(const std::string& line) { return parse_record(line, true); }

Fingerprint parse_fingerprint(const std::string& line) { return parse_record(line, false).fingerprint; }

std::string format_sample(const LabeledSample& sample) {
    json j;
    j["x"] = sample.location.x;
    j["y"] = sample.location.y;
    if (sample.fingerprint.timestamp()) j["t"] = *sample.fingerprint.timestamp();
    json obs = json::object();
    for (const auto& [id, rss] : sample.fingerprint.observations()) obs[id] = rss;
    j["obs"] = std::move(obs);
    return j.dump();
}

std::vector<LabeledSample> read_samples(std::istream& in) {
    return read_lines<LabeledSample>(in, parse_sample);
}

std::vector<Fingerprint> read_fingerprints(std::istream& in) {
    return read_lines<Fingerprint>(in, parse_fingerprint);
}

std::vector<Fingerprint> read_fingerprints(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::kIo, "cannot open " + path.string());
    return read_fingerprints(in);
}

std::vector<LabeledSample> read_samples(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(errc::kIo, "cannot open " + path.string());
    return read_samples(in);
}

void write_samples(std::ostream& out, const std::vector<LabeledSample>& samples) {
    for (const auto& s : samples) out << format_sample(s) << '\n';
}

void write_samples(const std::filesystem::path& path, const std::vector<LabeledSample>& samples) {
    std::ofstream out(path);
    if (!out) throw Error(errc::kIo, "cannot write " + path.string());
    write_samples(out, samples);
    if (!out) throw Error(errc::kIo, "write failed for " + path.string());
}

}  // namespace fingerloc
