#pragma once

// JSON Lines fingerprint records:
//   {"x": <m>, "y": <m>, "t": <s, optional>, "obs": {"<feature-id>": <rss dBm>}}

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fingerloc/rfm.hpp"

namespace fingerloc {

/// Parses one record. Throws "parse-error" on malformed JSON or missing
/// fields and "bad-rss" for values outside [-100, 0].
LabeledSample parse_sample(const std::string& line);
std::string format_sample(const LabeledSample& sample);
/// Like parse_sample but the location is optional (online queries).
Fingerprint parse_fingerprint(const std::string& line);

std::vector<LabeledSample> read_samples(std::istream& in);
/// Throws "io-error" when the file cannot be opened.
std::vector<LabeledSample> read_samples(const std::filesystem::path& path);

std::vector<Fingerprint> read_fingerprints(std::istream& in);
std::vector<Fingerprint> read_fingerprints(const std::filesystem::path& path);

void write_samples(std::ostream& out, const std::vector<LabeledSample>& samples);
void write_samples(const std::filesystem::path& path, const std::vector<LabeledSample>& samples);

}  // namespace fingerloc
