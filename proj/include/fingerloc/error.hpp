#pragma once

#include <stdexcept>
#include <string>

namespace fingerloc {

/// Exception carrying a stable, machine-readable error code such as
/// "empty-rfm" or "no-common-features" alongside a human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)), detail_(message) {}

    explicit Error(std::string code) : std::runtime_error(code), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& detail() const noexcept { return detail_; }

private:
    std::string code_;
    std::string detail_;
};

namespace errc {
inline constexpr const char* kEmptyRfm = "empty-rfm";
inline constexpr const char* kBadCell = "bad-cell";
inline constexpr const char* kBadRoi = "bad-roi";
inline constexpr const char* kBadRss = "bad-rss";
inline constexpr const char* kBadM = "bad-m";
inline constexpr const char* kOutsideRoi = "outside-roi";
inline constexpr const char* kEmptyValidation = "empty-validation";
inline constexpr const char* kNoCommonFeatures = "no-common-features";
inline constexpr const char* kInsufficientCandidates = "insufficient-candidates";
inline constexpr const char* kDegeneratePosterior = "degenerate-posterior";
inline constexpr const char* kEmptyErrors = "empty-errors";
inline constexpr const char* kCorruptBundle = "corrupt-bundle";
inline constexpr const char* kVersionMismatch = "version-mismatch";
inline constexpr const char* kChecksumMismatch = "checksum-mismatch";
inline constexpr const char* kInconsistentBundle = "inconsistent-bundle";
inline constexpr const char* kBadConfig = "bad-config";
inline constexpr const char* kParse = "parse-error";
inline constexpr const char* kIo = "io-error";
}  // namespace errc

}  // namespace fingerloc
