#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

namespace firmgrowth {

inline constexpr const char* kSoftwareVersion = "firmgrowth 0.1.0";

struct ResultRow {
    double x = 0.0;
    double y = 0.0;
    std::uint64_t count = 0;
    double stderr_value = 0.0; // NaN when not applicable

    bool operator==(const ResultRow&) const;
};

// Self-describing result container: re-running from spec_echo and seed
// reproduces the tables byte for byte.
struct ResultEnvelope {
    std::string experiment;
    std::string spec_echo; // JSON string of the experiment parameters
    std::uint64_t seed = 0;
    std::string timestamp; // fixed at creation (UTC, ISO 8601)
    std::string version = kSoftwareVersion;
    std::map<std::string, std::vector<ResultRow>> tables;

    bool operator==(const ResultEnvelope&) const;

    void add_row(const std::string& series, double x, double y, std::uint64_t count = 0,
                 double stderr_value = std::numeric_limits<double>::quiet_NaN());
};

ResultEnvelope make_envelope(const std::string& experiment, const std::string& spec_echo,
                             std::uint64_t seed);

/// Long-format CSV: `experiment,series,x,y,count,stderr`. Byte-stable for a
/// fixed envelope (shortest round-trip float formatting).
void export_csv(const ResultEnvelope& envelope, std::ostream& out);

/// JSON mirror of the envelope.
void export_json(const ResultEnvelope& envelope, std::ostream& out);

ResultEnvelope envelope_from_json(std::istream& in);

/// Shortest round-trip decimal rendering of a double (used by both exporters).
std::string format_double(double value);

} // namespace firmgrowth
