#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "firmgrowth/estimators.hpp"
#include "firmgrowth/types.hpp"

namespace firmgrowth {

enum class Level { market, firm, product };

std::string level_name(Level level);
Level parse_level(const std::string& name);

// One unit-period record. market may be blank (market-level analyses are
// then unavailable for that record).
struct PanelRecord {
    std::string market;
    std::string firm;
    std::string unit;
    long period = 0;
    double sales = 0.0;

    bool operator==(const PanelRecord&) const = default;
};

// Immutable multi-level longitudinal panel with per-period indexes.
class Panel {
public:
    Panel() = default;
    static Panel from_records(std::vector<PanelRecord> records);

    const std::vector<PanelRecord>& records() const { return records_; }
    const std::vector<long>& periods() const { return periods_; } // sorted unique
    std::size_t record_count() const { return records_.size(); }

    /// Record indexes of one period, in input order.
    std::span<const std::size_t> period_rows(long period) const;

    /// Total sales of one period.
    double period_total(long period) const;

private:
    std::vector<PanelRecord> records_;
    std::vector<long> periods_;
    std::map<long, std::vector<std::size_t>> by_period_;
};

/// Parse the bit-exact CSV format `market_id,firm_id,product_id,period,sales`.
/// Throws DataError with row-numbered diagnostics on malformed input.
Panel ingest_panel(std::istream& in);

/// Growth observations at a level for the period pair (t0, t1): S and unit
/// structure from t0, g = ln(S_t1 / S_t0). Entities missing in either period
/// are skipped.
std::vector<GrowthObservation> compute_observations(const Panel& panel, Level level,
                                                    long t0, long t1);

/// Pooled observations over all consecutive period pairs.
std::vector<GrowthObservation> compute_observations_all_pairs(const Panel& panel, Level level);

/// m = mean of logs, V = unbiased variance of logs. Values must be positive.
LognormalParams estimate_lognormal_params(std::span<const double> values);

/// Per-firm unit growth-rate series (for correlation estimators). Growth of
/// unit u at period t is ln(sales_{t+1}/sales_t), consecutive periods only.
std::vector<FirmSeries> unit_growth_series(const Panel& panel);

} // namespace firmgrowth
