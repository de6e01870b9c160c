#include "firmgrowth/results.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <istream>
#include <limits>
#include <ostream>

#include <json.hpp>

#include "firmgrowth/errors.hpp"

namespace firmgrowth {

namespace {

bool same_double(double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return true;
    return a == b;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace

bool ResultRow::operator==(const ResultRow& other) const {
    return same_double(x, other.x) && same_double(y, other.y) && count == other.count &&
           same_double(stderr_value, other.stderr_value);
}

bool ResultEnvelope::operator==(const ResultEnvelope& other) const {
    return experiment == other.experiment && spec_echo == other.spec_echo &&
           seed == other.seed && timestamp == other.timestamp && version == other.version &&
           tables == other.tables;
}

void ResultEnvelope::add_row(const std::string& series, double x, double y, std::uint64_t count,
                             double stderr_value) {
    tables[series].push_back({x, y, count, stderr_value});
}

ResultEnvelope make_envelope(const std::string& experiment, const std::string& spec_echo,
                             std::uint64_t seed) {
    ResultEnvelope env;
    env.experiment = experiment;
    env.spec_echo = spec_echo;
    env.seed = seed;
    env.timestamp = utc_now();
    return env;
}

std::string format_double(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

void export_csv(const ResultEnvelope& envelope, std::ostream& out) {
    out << "experiment,series,x,y,count,stderr\n";
    for (const auto& [series, rows] : envelope.tables) {
        for (const auto& row : rows) {
            out << envelope.experiment << ',' << series << ',' << format_double(row.x) << ','
                << format_double(row.y) << ',' << row.count << ',';
            if (!std::isnan(row.stderr_value)) out << format_double(row.stderr_value);
            out << '\n';
        }
    }
    if (!out) throw DataError("export: failed to write CSV output");
}

void export_json(const ResultEnvelope& envelope, std::ostream& out) {
    nlohmann::ordered_json j;
    j["experiment"] = envelope.experiment;
    j["spec"] = envelope.spec_echo;
    j["seed"] = envelope.seed;
    j["timestamp"] = envelope.timestamp;
    j["version"] = envelope.version;
    nlohmann::ordered_json tables = nlohmann::ordered_json::object();
    for (const auto& [series, rows] : envelope.tables) {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const auto& row : rows) {
            nlohmann::ordered_json r;
            r["x"] = row.x;
            r["y"] = row.y;
            r["count"] = row.count;
            if (std::isnan(row.stderr_value))
                r["stderr"] = nullptr;
            else
                r["stderr"] = row.stderr_value;
            arr.push_back(std::move(r));
        }
        tables[series] = std::move(arr);
    }
    j["tables"] = std::move(tables);
    out << j.dump(2) << '\n';
    if (!out) throw DataError("export: failed to write JSON output");
}

ResultEnvelope envelope_from_json(std::istream& in) {
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("envelope json: ") + e.what());
    }
    ResultEnvelope env;
    try {
        env.experiment = j.at("experiment").get<std::string>();
        env.spec_echo = j.at("spec").get<std::string>();
        env.seed = j.at("seed").get<std::uint64_t>();
        env.timestamp = j.at("timestamp").get<std::string>();
        env.version = j.at("version").get<std::string>();
        for (const auto& [series, rows] : j.at("tables").items()) {
            for (const auto& r : rows) {
                ResultRow row;
                row.x = r.at("x").get<double>();
                row.y = r.at("y").get<double>();
                row.count = r.at("count").get<std::uint64_t>();
                row.stderr_value = r.at("stderr").is_null()
                                       ? std::numeric_limits<double>::quiet_NaN()
                                       : r.at("stderr").get<double>();
                env.tables[series].push_back(row);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("envelope json: ") + e.what());
    }
    return env;
}

} // namespace firmgrowth
