#include "firmgrowth/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "firmgrowth/errors.hpp"

namespace firmgrowth {

std::string level_name(Level level) {
    switch (level) {
    case Level::market: return "market";
    case Level::firm: return "firm";
    case Level::product: return "product";
    }
    return "?";
}

Level parse_level(const std::string& name) {
    if (name == "market") return Level::market;
    if (name == "firm") return Level::firm;
    if (name == "product") return Level::product;
    throw ConfigError("unknown aggregation level: " + name);
}

Panel Panel::from_records(std::vector<PanelRecord> records) {
    Panel panel;
    std::unordered_set<std::string> keys;
    keys.reserve(records.size());
    for (const auto& r : records) {
        if (!(r.sales > 0.0)) throw DataError("panel: nonpositive sales for unit " + r.unit);
        if (r.unit.empty()) throw DataError("panel: blank product id");
        if (r.firm.empty()) throw DataError("panel: blank firm id");
        if (!keys.insert(r.unit + '\x1f' + std::to_string(r.period)).second)
            throw DataError("panel: duplicate (product, period) key: " + r.unit + ", " +
                            std::to_string(r.period));
    }
    panel.records_ = std::move(records);
    for (std::size_t i = 0; i < panel.records_.size(); ++i)
        panel.by_period_[panel.records_[i].period].push_back(i);
    for (const auto& [p, rows] : panel.by_period_) panel.periods_.push_back(p);
    return panel;
}

std::span<const std::size_t> Panel::period_rows(long period) const {
    const auto it = by_period_.find(period);
    if (it == by_period_.end()) return {};
    return it->second;
}

double Panel::period_total(long period) const {
    double total = 0.0;
    for (std::size_t i : period_rows(period)) total += records_[i].sales;
    return total;
}

namespace {

constexpr const char* kHeader = "market_id,firm_id,product_id,period,sales";

bool split5(const std::string& line, std::string out[5]) {
    std::size_t field = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            if (field >= 5) return false;
            out[field++] = line.substr(start, i - start);
            start = i + 1;
        }
    }
    return field == 5;
}

bool parse_long(const std::string& s, long& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtol(s.c_str(), &end, 10);
    return end && *end == '\0';
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end && *end == '\0' && std::isfinite(out);
}

} // namespace

Panel ingest_panel(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataError("panel csv: empty input, missing header");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kHeader)
        throw DataError(std::string("panel csv: bad header, expected `") + kHeader + "`");

    std::vector<PanelRecord> records;
    std::vector<std::string> problems;
    std::unordered_set<std::string> keys;
    std::size_t row = 1;

    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;

        std::string f[5];
        PanelRecord r;
        bool ok = split5(line, f);
        if (ok) {
            r.market = f[0];
            r.firm = f[1];
            r.unit = f[2];
            ok = !r.firm.empty() && !r.unit.empty();
            if (!ok) problems.push_back("row " + std::to_string(row) + ": blank firm or product id");
        } else {
            problems.push_back("row " + std::to_string(row) + ": expected 5 comma-separated fields");
        }
        if (ok && !parse_long(f[3], r.period)) {
            problems.push_back("row " + std::to_string(row) + ": bad period `" + f[3] + "`");
            ok = false;
        }
        if (ok && (!parse_double(f[4], r.sales) || !(r.sales > 0.0))) {
            problems.push_back("row " + std::to_string(row) + ": sales must be a positive number");
            ok = false;
        }
        if (ok && !keys.insert(r.unit + '\x1f' + std::to_string(r.period)).second) {
            problems.push_back("row " + std::to_string(row) + ": duplicate (product, period) key");
            ok = false;
        }
        if (ok) records.push_back(std::move(r));
    }

    if (!problems.empty()) {
        std::ostringstream os;
        os << "panel csv: " << problems.size() << " invalid row(s)";
        const std::size_t shown = std::min<std::size_t>(problems.size(), 50);
        for (std::size_t i = 0; i < shown; ++i) os << "\n  " << problems[i];
        if (shown < problems.size()) os << "\n  ...";
        throw DataError(os.str());
    }
    return Panel::from_records(std::move(records));
}

namespace {

const std::string& level_key(const PanelRecord& r, Level level) {
    switch (level) {
    case Level::market: return r.market;
    case Level::firm: return r.firm;
    case Level::product: return r.unit;
    }
    return r.unit;
}

struct EntityAgg {
    double sum = 0.0;
    double largest = 0.0;
    std::uint64_t count = 0;
};

} // namespace

std::vector<GrowthObservation> compute_observations(const Panel& panel, Level level,
                                                    long t0, long t1) {
    const auto rows0 = panel.period_rows(t0);
    const auto rows1 = panel.period_rows(t1);
    if (rows0.empty() || rows1.empty())
        throw DataError("compute_observations: both periods must be present in the panel");

    std::unordered_map<std::string, EntityAgg> at0;
    at0.reserve(rows0.size());
    for (std::size_t i : rows0) {
        const auto& r = panel.records()[i];
        const std::string& key = level_key(r, level);
        if (key.empty()) continue; // blank market ids carry no market-level entity
        EntityAgg& agg = at0[key];
        agg.sum += r.sales;
        agg.largest = std::max(agg.largest, r.sales);
        ++agg.count;
    }
    std::unordered_map<std::string, double> at1;
    at1.reserve(rows1.size());
    for (std::size_t i : rows1) {
        const auto& r = panel.records()[i];
        const std::string& key = level_key(r, level);
        if (key.empty()) continue;
        at1[key] += r.sales;
    }

    std::vector<GrowthObservation> out;
    out.reserve(at0.size());
    for (const auto& [key, agg] : at0) {
        const auto it = at1.find(key);
        if (it == at1.end()) continue; // entity exit: no growth observation
        GrowthObservation obs;
        obs.size = agg.sum;
        obs.growth = std::log(it->second / agg.sum);
        obs.unit_count = agg.count;
        obs.largest_unit = agg.largest;
        obs.effective_units = agg.sum / agg.largest;
        out.push_back(obs);
    }
    return out;
}

std::vector<GrowthObservation> compute_observations_all_pairs(const Panel& panel, Level level) {
    const auto& periods = panel.periods();
    if (periods.size() < 2)
        throw DataError("compute_observations: panel has fewer than 2 periods");
    std::vector<GrowthObservation> out;
    for (std::size_t i = 0; i + 1 < periods.size(); ++i) {
        auto obs = compute_observations(panel, level, periods[i], periods[i + 1]);
        out.insert(out.end(), obs.begin(), obs.end());
    }
    return out;
}

LognormalParams estimate_lognormal_params(std::span<const double> values) {
    if (values.size() < 2) throw DataError("estimate_lognormal_params: need >= 2 values");
    double mean = 0.0;
    for (double v : values) {
        if (!(v > 0.0)) throw DataError("estimate_lognormal_params: values must be positive");
        mean += std::log(v);
    }
    mean /= static_cast<double>(values.size());
    double ss = 0.0;
    for (double v : values) {
        const double d = std::log(v) - mean;
        ss += d * d;
    }
    return {mean, ss / static_cast<double>(values.size() - 1)};
}

std::vector<FirmSeries> unit_growth_series(const Panel& panel) {
    // unit -> (period -> sales), and unit -> firm (last seen)
    std::unordered_map<std::string, std::map<long, double>> sales;
    std::unordered_map<std::string, std::string> firm_of;
    for (const auto& r : panel.records()) {
        sales[r.unit][r.period] = r.sales;
        firm_of[r.unit] = r.firm;
    }

    std::map<std::string, FirmSeries> by_firm;
    for (const auto& [unit, by_period] : sales) {
        UnitSeries series;
        auto it = by_period.begin();
        if (it == by_period.end()) continue;
        auto prev = it++;
        for (; it != by_period.end(); ++it, ++prev) {
            if (it->first != prev->first + 1) continue; // consecutive periods only
            series.periods.push_back(prev->first);
            series.growth.push_back(std::log(it->second / prev->second));
        }
        if (!series.periods.empty())
            by_firm[firm_of[unit]].units.push_back(std::move(series));
    }

    std::vector<FirmSeries> out;
    out.reserve(by_firm.size());
    for (auto& [firm, fs] : by_firm) out.push_back(std::move(fs));
    return out;
}

} // namespace firmgrowth
