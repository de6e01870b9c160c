#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "firmgrowth/types.hpp"

namespace firmgrowth {

enum class BinAxis { size, unit_count };

// One base-2 logarithmic bin of the sigma(S) or sigma(K) curve.
struct BinnedSigma {
    double bin_lo = 0.0;
    double bin_hi = 0.0; // = 2 * bin_lo
    double center = 0.0; // geometric mean of the bounds
    std::size_t count = 0;
    double sigma = 0.0;  // unbiased sample std of g
    double mean_g = 0.0;
    double mean_ke = 0.0;
};

// Streaming per-bin accumulator; replicas accumulate independently and
// merge in a fixed order so pooled results are reproducible.
class BinAccumulator {
public:
    explicit BinAccumulator(BinAxis axis = BinAxis::size) : axis_(axis) {}

    void add(const GrowthObservation& obs);
    void merge(const BinAccumulator& other);
    std::vector<BinnedSigma> finalize(std::size_t min_count) const;
    BinAxis axis() const { return axis_; }

private:
    struct Cell {
        std::size_t n = 0;
        double sum_g = 0.0;
        double sum_g2 = 0.0;
        double sum_ke = 0.0;
    };
    BinAxis axis_;
    std::map<int, Cell> cells_;
};

/// Base-2 log binning of growth observations along S or K, suppressing
/// bins with fewer than min_count observations.
std::vector<BinnedSigma> bin_sigma_by_size(std::span<const GrowthObservation> observations,
                                           BinAxis axis, std::size_t min_count = 10);

struct BetaPoint {
    double center = 0.0; // same axis units as the input curve
    double beta = 0.0;
};

/// Local exponent beta = -d ln sigma / d ln center via least squares over a
/// moving window of bins (endpoints use truncated windows of >= 3 points).
std::vector<BetaPoint> effective_beta(std::span<const BinnedSigma> binned,
                                      std::size_t window = 5);

struct PowerLawFit {
    double exponent = 0.0;
    double intercept = 0.0; // of ln y vs ln x
    double stderr_exponent = 0.0;
    double r2 = 0.0;
};

/// OLS of ln y on ln x. Requires >= 3 strictly positive points.
PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points);

/// Simple linear OLS of y on x: returns (slope, intercept).
std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y);

struct BetaMinResult {
    double beta_min = 0.0;
    double argmin = 0.0;     // in the x units of the input curve (ln K / z)
    bool boundary = false;   // minimum sat on the curve boundary; no vertex fit
};

/// Locate the minimum of a beta curve: 3-point moving-average smoothing to
/// find the minimum bin, then a quadratic vertex fit through the raw point
/// and its two neighbors. Input points are (ln K, beta).
BetaMinResult extract_beta_min(std::span<const std::pair<double, double>> beta_curve);

struct CollapseCurveInput {
    double v_xi = 0.0;
    double v_eta = 0.0;
    std::vector<std::pair<double, double>> points; // (K, sigma^2)
};

struct CollapsedCurve {
    double v_xi = 0.0;
    double v_eta = 0.0;
    double shift = 0.0;                            // fitted f(V_xi, V_eta)
    std::vector<std::pair<double, double>> zy;     // (z = ln K - f, ln(sigma^2 K / C))
};

struct CollapseResult {
    std::vector<CollapsedCurve> curves;
    std::vector<std::pair<double, double>> beta_of_z; // (z, beta)
    BetaMinResult beta_min;
    double fit_p = 0.0; // populated by the beta_min sweep, NaN otherwise
    double fit_q = 0.0;
};

// Shift-fit grid bounds and step for the collapse; the reference curve
// (the one with the widest ln K range) keeps f = 0 by convention.
inline constexpr double kCollapseShiftMin = -20.0;
inline constexpr double kCollapseShiftMax = 20.0;
inline constexpr double kCollapseShiftStep = 0.01;

CollapseResult collapse_curves(const std::vector<CollapseCurveInput>& curves,
                               std::size_t window = 5);

/// Hill estimate of the tail density exponent (Pareto index + 1) over the
/// top tail_fraction order statistics.
double hill_tail_exponent(std::span<const double> samples, double tail_fraction = 0.1);

/// Mean unit size as a function of K: firms grouped into base-2 K bins,
/// within-firm mean unit sizes averaged per bin. Returns (mean K, <xi(K)>).
std::vector<std::pair<double, double>>
mean_unit_size_by_k(const std::vector<std::vector<double>>& firm_units);

// Per-unit growth-rate time series, aligned by period labels.
struct UnitSeries {
    std::vector<long> periods;
    std::vector<double> growth;
};

struct FirmSeries {
    std::vector<UnitSeries> units;
};

/// Mean pairwise Pearson correlation of unit growth series within firms,
/// averaged in base-2 bins of K. Pairs need >= min_common_periods shared
/// periods; firms need >= 2 qualifying units.
std::vector<std::pair<double, double>>
mean_pairwise_correlation_by_k(const std::vector<FirmSeries>& firms,
                               std::size_t min_common_periods = 5);

/// Sample autocorrelation at the given lag (>= 1).
double autocorrelation(std::span<const double> series, std::size_t lag);

/// The A and B statistics of the 1/K expansion for one firm:
/// A = sum xi_i (eta_i - mu_eta) / (mu_eta mu_xi), B = sum (xi_i - mu_xi) / mu_xi.
std::pair<double, double> ab_statistics(std::span<const double> units,
                                        std::span<const double> growth_factors,
                                        const LognormalParams& xi, const LognormalParams& eta);

} // namespace firmgrowth
