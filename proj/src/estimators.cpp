#include "firmgrowth/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "firmgrowth/analytics.hpp"
#include "firmgrowth/errors.hpp"

namespace firmgrowth {

namespace {

int base2_bin(double value) {
    // exact floor(log2(value)) for normal doubles
    return std::ilogb(value);
}

double axis_value(const GrowthObservation& obs, BinAxis axis) {
    return axis == BinAxis::size ? obs.size : static_cast<double>(obs.unit_count);
}

} // namespace

void BinAccumulator::add(const GrowthObservation& obs) {
    const double v = axis_value(obs, axis_);
    if (!(v > 0.0)) throw DataError("binning: observation with nonpositive axis value");
    Cell& cell = cells_[base2_bin(v)];
    ++cell.n;
    cell.sum_g += obs.growth;
    cell.sum_g2 += obs.growth * obs.growth;
    cell.sum_ke += obs.effective_units;
}

void BinAccumulator::merge(const BinAccumulator& other) {
    for (const auto& [bin, cell] : other.cells_) {
        Cell& mine = cells_[bin];
        mine.n += cell.n;
        mine.sum_g += cell.sum_g;
        mine.sum_g2 += cell.sum_g2;
        mine.sum_ke += cell.sum_ke;
    }
}

std::vector<BinnedSigma> BinAccumulator::finalize(std::size_t min_count) const {
    if (min_count < 2) throw ConfigError("binning: min_count must be >= 2");
    std::vector<BinnedSigma> out;
    for (const auto& [bin, cell] : cells_) {
        if (cell.n < min_count) continue;
        BinnedSigma b;
        b.bin_lo = std::ldexp(1.0, bin);
        b.bin_hi = std::ldexp(1.0, bin + 1);
        b.center = std::ldexp(std::numbers::sqrt2, bin);
        b.count = cell.n;
        const double n = static_cast<double>(cell.n);
        b.mean_g = cell.sum_g / n;
        const double ss = cell.sum_g2 - n * b.mean_g * b.mean_g;
        b.sigma = std::sqrt(std::max(0.0, ss) / (n - 1.0));
        b.mean_ke = cell.sum_ke / n;
        out.push_back(b);
    }
    return out; // map iteration is already ordered by bin
}

std::vector<BinnedSigma> bin_sigma_by_size(std::span<const GrowthObservation> observations,
                                           BinAxis axis, std::size_t min_count) {
    BinAccumulator acc(axis);
    for (const auto& obs : observations) acc.add(obs);
    return acc.finalize(min_count);
}

std::pair<double, double> linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw DataError("linear_fit: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw DataError("linear_fit: degenerate x values");
    const double slope = sxy / sxx;
    return {slope, my - slope * mx};
}

std::vector<BetaPoint> effective_beta(std::span<const BinnedSigma> binned, std::size_t window) {
    if (window < 3 || window % 2 == 0)
        throw ConfigError("effective_beta: window must be an odd count >= 3");

    std::vector<double> lx, ly;
    std::vector<double> centers;
    for (const auto& b : binned) {
        if (!(b.sigma > 0.0)) continue; // ln sigma undefined; skip the bin
        lx.push_back(std::log(b.center));
        ly.push_back(std::log(b.sigma));
        centers.push_back(b.center);
    }
    const std::size_t n = lx.size();
    if (n < 3) throw DataError("effective_beta: need at least 3 usable bins");

    const std::size_t half = window / 2;
    std::vector<BetaPoint> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t lo = i >= half ? i - half : 0;
        std::size_t hi = std::min(n, i + half + 1);
        if (hi - lo < 3) { // truncated endpoint windows keep >= 3 points
            if (lo == 0)
                hi = std::min<std::size_t>(n, 3);
            else
                lo = hi - 3;
        }
        const auto [slope, icpt] =
            linear_fit(std::span(lx).subspan(lo, hi - lo), std::span(ly).subspan(lo, hi - lo));
        (void)icpt;
        out.push_back({centers[i], -slope});
    }
    return out;
}

PowerLawFit fit_power_law(std::span<const std::pair<double, double>> points) {
    if (points.size() < 3) throw DataError("fit_power_law: need >= 3 points");
    std::vector<double> lx, ly;
    lx.reserve(points.size());
    ly.reserve(points.size());
    for (const auto& [x, y] : points) {
        if (!(x > 0.0) || !(y > 0.0))
            throw DataError("fit_power_law: coordinates must be positive");
        lx.push_back(std::log(x));
        ly.push_back(std::log(y));
    }
    const auto [slope, intercept] = linear_fit(lx, ly);

    const double n = static_cast<double>(lx.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, ssr = 0.0, sst = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double fit = intercept + slope * lx[i];
        sxx += (lx[i] - mx) * (lx[i] - mx);
        ssr += (ly[i] - fit) * (ly[i] - fit);
        sst += (ly[i] - my) * (ly[i] - my);
    }

    PowerLawFit out;
    out.exponent = slope;
    out.intercept = intercept;
    out.stderr_exponent = n > 2 ? std::sqrt(ssr / (n - 2.0) / sxx) : 0.0;
    out.r2 = sst > 0.0 ? 1.0 - ssr / sst : 1.0; // constant y: perfect fit by convention
    return out;
}

BetaMinResult extract_beta_min(std::span<const std::pair<double, double>> beta_curve) {
    if (beta_curve.size() < 5)
        throw DataError("extract_beta_min: need at least 5 points");
    const std::size_t n = beta_curve.size();

    // moving average locates the minimum; the vertex fit runs on raw points
    std::vector<double> smooth(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t lo = i > 0 ? i - 1 : 0;
        const std::size_t hi = std::min(n - 1, i + 1);
        double acc = 0.0;
        for (std::size_t j = lo; j <= hi; ++j) acc += beta_curve[j].second;
        smooth[i] = acc / static_cast<double>(hi - lo + 1);
    }
    const std::size_t imin =
        static_cast<std::size_t>(std::min_element(smooth.begin(), smooth.end()) - smooth.begin());

    BetaMinResult result;
    if (imin == 0 || imin == n - 1) {
        result.boundary = true;
        result.beta_min = beta_curve[imin].second;
        result.argmin = beta_curve[imin].first;
        return result;
    }

    const auto [x0, y0] = beta_curve[imin - 1];
    const auto [x1, y1] = beta_curve[imin];
    const auto [x2, y2] = beta_curve[imin + 1];
    // quadratic through three points (Lagrange), vertex at -b/2a
    const double d0 = (x0 - x1) * (x0 - x2);
    const double d1 = (x1 - x0) * (x1 - x2);
    const double d2 = (x2 - x0) * (x2 - x1);
    const double a = y0 / d0 + y1 / d1 + y2 / d2;
    const double b = -(y0 * (x1 + x2) / d0 + y1 * (x0 + x2) / d1 + y2 * (x0 + x1) / d2);
    const double c = y0 * x1 * x2 / d0 + y1 * x0 * x2 / d1 + y2 * x0 * x1 / d2;

    if (a <= 0.0) { // degenerate or concave triple: keep the raw minimum
        result.beta_min = y1;
        result.argmin = x1;
        return result;
    }
    double vx = -b / (2.0 * a);
    vx = std::clamp(vx, x0, x2); // never extrapolate outside the data
    result.beta_min = a * vx * vx + b * vx + c;
    result.argmin = vx;
    return result;
}

namespace {

struct TransformedCurve {
    double v_xi, v_eta;
    std::vector<double> x; // ln K
    std::vector<double> y; // ln(sigma^2 K / C)
};

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
    // xs ascending; caller guarantees x within [xs.front(), xs.back()]
    const auto it = std::lower_bound(xs.begin(), xs.end(), x);
    if (it == xs.begin()) return ys.front();
    const std::size_t hi = static_cast<std::size_t>(it - xs.begin());
    const std::size_t lo = hi - 1;
    const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
    return ys[lo] + t * (ys[hi] - ys[lo]);
}

} // namespace

CollapseResult collapse_curves(const std::vector<CollapseCurveInput>& curves,
                               std::size_t window) {
    if (curves.empty()) throw DataError("collapse: no curves");

    std::vector<TransformedCurve> tc;
    tc.reserve(curves.size());
    for (const auto& c : curves) {
        if (c.points.size() < 2) throw DataError("collapse: curve with fewer than 2 points");
        const double C =
            series_coefficients({0.0, c.v_xi}, {0.0, c.v_eta}).c;
        if (!(C > 0.0)) throw DataError("collapse: curve with C <= 0 (needs V_eta > 0)");
        TransformedCurve t;
        t.v_xi = c.v_xi;
        t.v_eta = c.v_eta;
        for (const auto& [k, s2] : c.points) {
            if (!(k > 0.0) || !(s2 > 0.0))
                throw DataError("collapse: nonpositive K or sigma^2");
            t.x.push_back(std::log(k));
            t.y.push_back(std::log(s2 * k / C));
        }
        tc.push_back(std::move(t));
    }

    // reference curve: widest ln K range, f = 0 by convention
    std::size_t ref = 0;
    double best_range = -1.0;
    for (std::size_t i = 0; i < tc.size(); ++i) {
        const double range = tc[i].x.back() - tc[i].x.front();
        if (range > best_range) {
            best_range = range;
            ref = i;
        }
    }

    CollapseResult result;
    result.fit_p = std::numeric_limits<double>::quiet_NaN();
    result.fit_q = std::numeric_limits<double>::quiet_NaN();
    result.curves.resize(tc.size());

    const auto& rx = tc[ref].x;
    const auto& ry = tc[ref].y;
    for (std::size_t i = 0; i < tc.size(); ++i) {
        double shift = 0.0;
        if (i != ref && tc.size() > 1) {
            double best = std::numeric_limits<double>::infinity();
            bool any = false;
            const int nsteps =
                static_cast<int>(std::round((kCollapseShiftMax - kCollapseShiftMin) /
                                            kCollapseShiftStep));
            for (int s = 0; s <= nsteps; ++s) {
                const double f = kCollapseShiftMin + kCollapseShiftStep * s;
                double sum = 0.0;
                std::size_t overlap = 0;
                for (std::size_t p = 0; p < tc[i].x.size(); ++p) {
                    const double z = tc[i].x[p] - f;
                    if (z < rx.front() || z > rx.back()) continue;
                    const double d = tc[i].y[p] - interpolate(rx, ry, z);
                    sum += d * d;
                    ++overlap;
                }
                if (overlap < 2) continue; // need a real overlap to score the shift
                const double score = sum / static_cast<double>(overlap);
                if (score < best) {
                    best = score;
                    shift = f;
                    any = true;
                }
            }
            if (!any) throw DataError("collapse: no overlap with the reference curve "
                                      "anywhere on the shift grid");
        }
        CollapsedCurve out;
        out.v_xi = tc[i].v_xi;
        out.v_eta = tc[i].v_eta;
        out.shift = shift;
        for (std::size_t p = 0; p < tc[i].x.size(); ++p)
            out.zy.emplace_back(tc[i].x[p] - shift, tc[i].y[p]);
        result.curves[i] = std::move(out);
    }

    // merged collapsed curve, sorted by z
    std::vector<std::pair<double, double>> merged;
    for (const auto& c : result.curves)
        merged.insert(merged.end(), c.zy.begin(), c.zy.end());
    std::sort(merged.begin(), merged.end());

    // beta(z) = (1 - dF/dz) / 2 via the same windowed least-squares slope
    if (merged.size() >= 3) {
        const std::size_t n = merged.size();
        const std::size_t half = window / 2;
        std::vector<double> zs(n), ys(n);
        for (std::size_t i = 0; i < n; ++i) {
            zs[i] = merged[i].first;
            ys[i] = merged[i].second;
        }
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t lo = i >= half ? i - half : 0;
            std::size_t hi = std::min(n, i + half + 1);
            if (hi - lo < 3) {
                if (lo == 0)
                    hi = std::min<std::size_t>(n, 3);
                else
                    lo = hi - 3;
            }
            try {
                const auto [slope, icpt] = linear_fit(std::span(zs).subspan(lo, hi - lo),
                                                      std::span(ys).subspan(lo, hi - lo));
                (void)icpt;
                result.beta_of_z.emplace_back(zs[i], (1.0 - slope) / 2.0);
            } catch (const DataError&) {
                // duplicate z values in the window; skip this point
            }
        }
    }
    if (result.beta_of_z.size() >= 5)
        result.beta_min = extract_beta_min(result.beta_of_z);

    return result;
}

double hill_tail_exponent(std::span<const double> samples, double tail_fraction) {
    if (!(tail_fraction > 0.0) || tail_fraction > 0.5)
        throw ConfigError("hill: tail fraction must lie in (0, 0.5]");
    const std::size_t n = samples.size();
    const std::size_t k = static_cast<std::size_t>(static_cast<double>(n) * tail_fraction);
    if (k < 50 || k + 1 > n)
        throw DataError("hill: insufficient tail (need >= 50 samples above the threshold)");

    std::vector<double> top(samples.begin(), samples.end());
    std::nth_element(top.begin(), top.begin() + k, top.end(), std::greater<>());
    const double threshold = top[k];
    if (!(threshold > 0.0)) throw DataError("hill: nonpositive threshold");

    double acc = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        if (!(top[i] > 0.0)) throw DataError("hill: nonpositive tail sample");
        acc += std::log(top[i] / threshold);
    }
    const double h = acc / static_cast<double>(k);
    if (!(h > 0.0)) throw DataError("hill: degenerate tail (all order statistics equal)");
    return 1.0 / h + 1.0;
}

std::vector<std::pair<double, double>>
mean_unit_size_by_k(const std::vector<std::vector<double>>& firm_units) {
    if (firm_units.empty()) throw DataError("mean_unit_size_by_k: no firms");
    struct Cell {
        std::size_t firms = 0;
        double sum_k = 0.0;
        double sum_mean = 0.0;
    };
    std::map<int, Cell> cells;
    for (const auto& units : firm_units) {
        if (units.empty()) continue;
        const double k = static_cast<double>(units.size());
        const double mean =
            std::accumulate(units.begin(), units.end(), 0.0) / k;
        Cell& c = cells[base2_bin(k)];
        ++c.firms;
        c.sum_k += k;
        c.sum_mean += mean;
    }
    std::vector<std::pair<double, double>> out;
    for (const auto& [bin, c] : cells)
        out.emplace_back(c.sum_k / static_cast<double>(c.firms),
                         c.sum_mean / static_cast<double>(c.firms));
    return out;
}

namespace {

// Pearson correlation over the aligned common periods of two unit series;
// returns false when fewer than min_common periods overlap or a series is
// constant on the overlap.
bool pair_correlation(const UnitSeries& a, const UnitSeries& b, std::size_t min_common,
                      double& rho) {
    std::vector<double> xa, xb;
    std::size_t i = 0, j = 0;
    while (i < a.periods.size() && j < b.periods.size()) {
        if (a.periods[i] == b.periods[j]) {
            xa.push_back(a.growth[i]);
            xb.push_back(b.growth[j]);
            ++i;
            ++j;
        } else if (a.periods[i] < b.periods[j]) {
            ++i;
        } else {
            ++j;
        }
    }
    if (xa.size() < min_common) return false;
    const double n = static_cast<double>(xa.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t t = 0; t < xa.size(); ++t) {
        ma += xa[t];
        mb += xb[t];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t t = 0; t < xa.size(); ++t) {
        saa += (xa[t] - ma) * (xa[t] - ma);
        sbb += (xb[t] - mb) * (xb[t] - mb);
        sab += (xa[t] - ma) * (xb[t] - mb);
    }
    if (saa == 0.0 || sbb == 0.0) return false;
    rho = sab / std::sqrt(saa * sbb);
    return true;
}

} // namespace

std::vector<std::pair<double, double>>
mean_pairwise_correlation_by_k(const std::vector<FirmSeries>& firms,
                               std::size_t min_common_periods) {
    struct Cell {
        std::size_t firms = 0;
        double sum_k = 0.0;
        double sum_rho = 0.0;
    };
    std::map<int, Cell> cells;
    for (const auto& firm : firms) {
        if (firm.units.size() < 2) continue;
        double acc = 0.0;
        std::size_t pairs = 0;
        for (std::size_t i = 0; i < firm.units.size(); ++i) {
            for (std::size_t j = i + 1; j < firm.units.size(); ++j) {
                double rho;
                if (pair_correlation(firm.units[i], firm.units[j], min_common_periods, rho)) {
                    acc += rho;
                    ++pairs;
                }
            }
        }
        if (pairs == 0) continue;
        const double k = static_cast<double>(firm.units.size());
        Cell& c = cells[base2_bin(k)];
        ++c.firms;
        c.sum_k += k;
        c.sum_rho += acc / static_cast<double>(pairs);
    }
    if (cells.empty())
        throw DataError("mean_pairwise_correlation_by_k: no qualifying firms");
    std::vector<std::pair<double, double>> out;
    for (const auto& [bin, c] : cells)
        out.emplace_back(c.sum_k / static_cast<double>(c.firms),
                         c.sum_rho / static_cast<double>(c.firms));
    return out;
}

double autocorrelation(std::span<const double> series, std::size_t lag) {
    if (lag < 1) throw ConfigError("autocorrelation: lag must be >= 1");
    if (series.size() <= lag + 2)
        throw DataError("autocorrelation: series too short for the requested lag");
    const std::size_t n = series.size();
    double mean = 0.0;
    for (double v : series) mean += v;
    mean /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t)
        num += (series[t] - mean) * (series[t + lag] - mean);
    for (double v : series) den += (v - mean) * (v - mean);
    if (den == 0.0) throw DataError("autocorrelation: constant series");
    num /= static_cast<double>(n - lag);
    den /= static_cast<double>(n);
    return num / den;
}

std::pair<double, double> ab_statistics(std::span<const double> units,
                                        std::span<const double> growth_factors,
                                        const LognormalParams& xi, const LognormalParams& eta) {
    if (units.size() != growth_factors.size() || units.empty())
        throw DataError("ab_statistics: unit and growth vectors must have equal length >= 1");
    const double mu_xi = lognormal_moment(1, xi);
    const double mu_eta = lognormal_moment(1, eta);
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < units.size(); ++i) {
        a += units[i] * (growth_factors[i] - mu_eta);
        b += units[i] - mu_xi;
    }
    return {a / (mu_eta * mu_xi), b / mu_xi};
}

} // namespace firmgrowth
