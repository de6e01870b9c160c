#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "firmgrowth/analytics.hpp"
#include "firmgrowth/errors.hpp"
#include "firmgrowth/estimators.hpp"
#include "test_helpers.hpp"

using namespace firmgrowth;

namespace {

GrowthObservation obs_of(double size, double growth, std::uint64_t k = 1) {
    GrowthObservation o;
    o.size = size;
    o.growth = growth;
    o.unit_count = k;
    o.largest_unit = size;
    o.effective_units = 1.0;
    return o;
}

} // namespace

TEST_CASE("binning basics") {
    SUBCASE("identical growth gives zero sigma everywhere") {
        std::vector<GrowthObservation> obs;
        std::mt19937_64 gen(1);
        std::uniform_real_distribution<double> us(0.5, 4000.0);
        for (int i = 0; i < 5000; ++i) obs.push_back(obs_of(us(gen), 0.25));
        for (const auto& b : bin_sigma_by_size(obs, BinAxis::size, 10)) {
            CHECK(b.sigma == doctest::Approx(0.0));
            CHECK(b.mean_g == doctest::Approx(0.25));
        }
    }
    SUBCASE("growth independent of size: every bin near sigma = 1") {
        std::vector<GrowthObservation> obs;
        std::mt19937_64 gen(2);
        std::normal_distribution<double> g(0.0, 1.0);
        std::lognormal_distribution<double> s(2.0, 2.0);
        for (int i = 0; i < 100000; ++i) obs.push_back(obs_of(s(gen), g(gen)));
        const auto bins = bin_sigma_by_size(obs, BinAxis::size, 100);
        REQUIRE(bins.size() >= 5);
        for (const auto& b : bins) {
            CHECK(b.sigma > 0.97 - 3.0 / std::sqrt(static_cast<double>(b.count)));
            CHECK(b.sigma < 1.03 + 3.0 / std::sqrt(static_cast<double>(b.count)));
        }
    }
    SUBCASE("two-point sample standard deviation") {
        std::vector<GrowthObservation> obs{obs_of(3.0, 0.0), obs_of(3.5, 2.0)};
        const auto bins = bin_sigma_by_size(obs, BinAxis::size, 2);
        REQUIRE(bins.size() == 1);
        CHECK(bins[0].sigma == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
        CHECK(bins[0].count == 2);
    }
    SUBCASE("partition: each observation lands in exactly one bin") {
        std::vector<GrowthObservation> obs;
        std::mt19937_64 gen(3);
        std::uniform_real_distribution<double> us(1e-3, 1e5);
        for (int i = 0; i < 2000; ++i) obs.push_back(obs_of(us(gen), 0.0));
        const auto bins = bin_sigma_by_size(obs, BinAxis::size, 2);
        for (std::size_t i = 1; i < bins.size(); ++i) CHECK(bins[i].bin_lo >= bins[i - 1].bin_hi);
        for (const auto& b : bins) {
            CHECK(b.bin_hi == doctest::Approx(2.0 * b.bin_lo));
            CHECK(b.center == doctest::Approx(std::sqrt(b.bin_lo * b.bin_hi)));
            std::size_t manual = 0;
            for (const auto& o : obs)
                if (o.size >= b.bin_lo && o.size < b.bin_hi) ++manual;
            CHECK(manual == b.count);
        }
        // suppressed bins do not leak into neighbors
        std::size_t reported = 0;
        for (const auto& b : bin_sigma_by_size(obs, BinAxis::size, 50)) reported += b.count;
        std::size_t all = 0;
        for (const auto& b : bins) all += b.count;
        CHECK(all == obs.size());
        CHECK(reported <= all);
    }
    SUBCASE("unit-count axis") {
        std::vector<GrowthObservation> obs;
        for (int i = 0; i < 20; ++i) obs.push_back(obs_of(10.0, 0.1, i % 2 ? 3 : 300));
        const auto bins = bin_sigma_by_size(obs, BinAxis::unit_count, 2);
        REQUIRE(bins.size() == 2);
        CHECK(bins[0].bin_lo == doctest::Approx(2.0));
        CHECK(bins[1].bin_lo == doctest::Approx(256.0));
    }
}

TEST_CASE("effective beta") {
    auto make_bins = [](double beta0) {
        std::vector<BinnedSigma> bins;
        for (int i = 0; i < 12; ++i) {
            BinnedSigma b;
            b.center = std::ldexp(std::numbers::sqrt2, i);
            b.sigma = 2.0 * std::pow(b.center, -beta0);
            b.count = 1000;
            bins.push_back(b);
        }
        return bins;
    };
    for (double beta0 : {0.0, 0.2, 0.5}) {
        for (const auto& p : effective_beta(make_bins(beta0), 5))
            CHECK(p.beta == doctest::Approx(beta0).epsilon(1e-10));
    }

    // analytic sigma(S) from the central-limit asymptote gives beta = 1/2
    std::vector<BinnedSigma> asym;
    for (int i = 0; i < 15; ++i) {
        BinnedSigma b;
        b.center = std::ldexp(std::numbers::sqrt2, i + 3);
        b.sigma = sigma_large_s(b.center, {3.44, 5.13}, {0.0, 0.36});
        b.count = 1000;
        asym.push_back(b);
    }
    for (const auto& p : effective_beta(asym, 5)) CHECK(p.beta == doctest::Approx(0.5).epsilon(1e-6));

    CHECK_THROWS_AS(effective_beta(std::vector<BinnedSigma>(2), 5), DataError);
    CHECK_THROWS_AS(effective_beta(asym, 4), ConfigError);
}

TEST_CASE("power-law fit") {
    SUBCASE("exact quadratic") {
        std::vector<std::pair<double, double>> pts;
        for (double x : {0.5, 1.0, 2.0, 5.0, 10.0}) pts.emplace_back(x, 4.0 * x * x);
        const PowerLawFit fit = fit_power_law(pts);
        CHECK(fit.exponent == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(fit.intercept == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(fit.r2 == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.stderr_exponent == doctest::Approx(0.0).epsilon(1e-10));
    }
    SUBCASE("constant y") {
        std::vector<std::pair<double, double>> pts{{1.0, 3.0}, {2.0, 3.0}, {4.0, 3.0}};
        const PowerLawFit fit = fit_power_law(pts);
        CHECK(fit.exponent == doctest::Approx(0.0));
        CHECK(fit.r2 == doctest::Approx(1.0));
    }
    SUBCASE("gamma = 0.38 with 5% noise") {
        std::mt19937_64 gen(4);
        std::normal_distribution<double> noise(0.0, std::log(1.05));
        std::vector<std::pair<double, double>> pts;
        for (int i = 0; i < 100; ++i) {
            const double x = std::pow(10.0, 4.0 * i / 99.0);
            pts.emplace_back(x, std::pow(x, 0.38) * std::exp(noise(gen)));
        }
        const PowerLawFit fit = fit_power_law(pts);
        CHECK(fit.exponent > 0.36);
        CHECK(fit.exponent < 0.40);
        CHECK(fit.stderr_exponent > 0.0);
    }
    SUBCASE("domain errors") {
        std::vector<std::pair<double, double>> bad{{1.0, 1.0}, {2.0, -1.0}, {3.0, 1.0}};
        CHECK_THROWS_AS(fit_power_law(bad), DataError);
        std::vector<std::pair<double, double>> few{{1.0, 1.0}, {2.0, 2.0}};
        CHECK_THROWS_AS(fit_power_law(few), DataError);
    }
}

TEST_CASE("beta_min extraction") {
    SUBCASE("exact quadratic vertex") {
        std::vector<std::pair<double, double>> curve;
        for (int x = 0; x <= 6; ++x)
            curve.emplace_back(x, (x - 3.0) * (x - 3.0) + 0.2);
        const BetaMinResult r = extract_beta_min(curve);
        CHECK_FALSE(r.boundary);
        CHECK(r.beta_min == doctest::Approx(0.2).epsilon(1e-9));
        CHECK(r.argmin == doctest::Approx(3.0).epsilon(1e-9));
    }
    SUBCASE("constant curve flags the boundary") {
        std::vector<std::pair<double, double>> curve;
        for (int x = 0; x < 8; ++x) curve.emplace_back(x, 0.3);
        const BetaMinResult r = extract_beta_min(curve);
        CHECK(r.boundary);
        CHECK(r.beta_min == doctest::Approx(0.3));
    }
    SUBCASE("monotone curve flags the boundary") {
        std::vector<std::pair<double, double>> curve;
        for (int x = 0; x < 8; ++x) curve.emplace_back(x, 0.1 + 0.05 * x);
        const BetaMinResult r = extract_beta_min(curve);
        CHECK(r.boundary);
        CHECK(r.beta_min == doctest::Approx(0.1));
        CHECK(r.argmin == doctest::Approx(0.0));
    }
    SUBCASE("too few points") {
        std::vector<std::pair<double, double>> curve{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
        CHECK_THROWS_AS(extract_beta_min(curve), DataError);
    }
}

TEST_CASE("collapse") {
    // construct curves from a known universal function F(z) = -ln(1+e^-z)
    auto synth_curve = [](double v_xi, double v_eta, double f, int kmax_pow) {
        const double c = series_coefficients({0.0, v_xi}, {0.0, v_eta}).c;
        CollapseCurveInput input{v_xi, v_eta, {}};
        for (int i = 0; i <= kmax_pow; ++i) {
            const double k = std::ldexp(1.0, i);
            const double z = std::log(k) - f;
            const double y = -std::log1p(std::exp(-z));
            input.points.emplace_back(k, c * std::exp(y) / k);
        }
        return input;
    };

    SUBCASE("single curve keeps f = 0") {
        const auto result = collapse_curves({synth_curve(1.0, 1.0, 2.0, 14)});
        REQUIRE(result.curves.size() == 1);
        CHECK(result.curves[0].shift == doctest::Approx(0.0));
        CHECK(result.curves[0].zy.size() == 15);
    }
    SUBCASE("identical curves collapse with equal shifts") {
        const auto a = synth_curve(2.0, 1.0, 1.5, 14);
        const auto result = collapse_curves({a, a});
        REQUIRE(result.curves.size() == 2);
        CHECK(std::abs(result.curves[0].shift - result.curves[1].shift) < 0.01);
    }
    SUBCASE("constructed shifts are recovered") {
        const auto result = collapse_curves({synth_curve(1.0, 0.5, 0.0, 16),
                                             synth_curve(2.0, 1.0, 1.7, 12),
                                             synth_curve(3.0, 0.5, 3.4, 12)});
        CHECK(result.curves[0].shift == doctest::Approx(0.0));
        CHECK(result.curves[1].shift == doctest::Approx(1.7).epsilon(0.02));
        CHECK(result.curves[2].shift == doctest::Approx(3.4).epsilon(0.02));
    }
    SUBCASE("re-collapsing shifted curves moves no shift by more than the grid step") {
        std::vector<CollapseCurveInput> inputs{synth_curve(1.0, 0.5, 0.0, 16),
                                               synth_curve(2.0, 1.0, 1.7, 12),
                                               synth_curve(3.0, 0.5, 3.4, 12)};
        const auto first = collapse_curves(inputs);
        std::vector<CollapseCurveInput> shifted = inputs;
        for (std::size_t c = 0; c < shifted.size(); ++c) {
            const double f = first.curves[c].shift;
            for (auto& [k, s2] : shifted[c].points) {
                k /= std::exp(f);
                s2 *= std::exp(f);
            }
        }
        const auto second = collapse_curves(shifted);
        for (const auto& curve : second.curves)
            CHECK(std::abs(curve.shift) <= kCollapseShiftStep + 1e-9);
    }
    SUBCASE("disjoint supports fail") {
        auto lo = synth_curve(1.0, 0.5, 0.0, 2);
        CollapseCurveInput hi{2.0, 1.0, {}};
        const double c = series_coefficients({0.0, 2.0}, {0.0, 1.0}).c;
        for (int i = 40; i <= 44; ++i) {
            const double k = std::ldexp(1.0, i);
            hi.points.emplace_back(k, c / k);
        }
        CHECK_THROWS_AS(collapse_curves({lo, hi}), DataError);
    }
}

TEST_CASE("hill tail exponent") {
    SUBCASE("exact pareto with density exponent 2") {
        const auto xs = testutil::pareto_samples(2.0, 100000, 6);
        const double est = hill_tail_exponent(xs, 0.1);
        CHECK(est > 1.95);
        CHECK(est < 2.05);
    }
    SUBCASE("exponential samples diverge upward") {
        std::mt19937_64 gen(7);
        std::exponential_distribution<double> e(1.0);
        std::vector<double> xs(100000);
        for (auto& x : xs) x = e(gen);
        CHECK(hill_tail_exponent(xs, 0.1) > 4.0);
    }
    SUBCASE("degenerate tails error out") {
        std::vector<double> same(1000, 2.5);
        CHECK_THROWS_AS(hill_tail_exponent(same, 0.1), DataError);
        std::vector<double> few(100, 1.0);
        CHECK_THROWS_AS(hill_tail_exponent(few, 0.1), DataError); // tail < 50
    }
}

TEST_CASE("mean unit size by K") {
    SUBCASE("single firm") {
        const auto profile = mean_unit_size_by_k({{2.0, 4.0, 6.0}});
        REQUIRE(profile.size() == 1);
        CHECK(profile[0].first == doctest::Approx(3.0));
        CHECK(profile[0].second == doctest::Approx(4.0));
    }
    SUBCASE("unit sizes independent of K give a flat profile") {
        std::mt19937_64 gen(8);
        std::lognormal_distribution<double> xi(0.0, 0.7);
        std::vector<std::vector<double>> firms;
        for (int i = 0; i < 20000; ++i) {
            std::vector<double> units(1 + gen() % 256);
            for (auto& u : units) u = xi(gen);
            firms.push_back(std::move(units));
        }
        const PowerLawFit fit = fit_power_law(mean_unit_size_by_k(firms));
        CHECK(fit.exponent > -0.05);
        CHECK(fit.exponent < 0.05);
    }
    SUBCASE("constructed gamma = 0.38 is recovered") {
        std::mt19937_64 gen(9);
        std::lognormal_distribution<double> noise(0.0, 0.3);
        std::vector<std::vector<double>> firms;
        for (int i = 0; i < 20000; ++i) {
            const std::uint64_t k = 1ULL << (gen() % 9);
            std::vector<double> units(k);
            const double scale =
                std::pow(static_cast<double>(k), 0.38) / std::exp(0.3 * 0.3 / 2.0);
            for (auto& u : units) u = scale * noise(gen);
            firms.push_back(std::move(units));
        }
        const PowerLawFit fit = fit_power_law(mean_unit_size_by_k(firms));
        CHECK(fit.exponent > 0.35);
        CHECK(fit.exponent < 0.41);
    }
}

TEST_CASE("mean pairwise correlation by K") {
    SUBCASE("identical growth series correlate perfectly") {
        UnitSeries s;
        for (int t = 0; t < 10; ++t) {
            s.periods.push_back(t);
            s.growth.push_back(std::sin(t * 0.7));
        }
        const auto profile = mean_pairwise_correlation_by_k({FirmSeries{{s, s}}});
        REQUIRE(profile.size() == 1);
        CHECK(profile[0].second == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("independent growths average near zero") {
        std::mt19937_64 gen(10);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<FirmSeries> firms;
        for (int f = 0; f < 1000; ++f) {
            FirmSeries firm;
            for (int u = 0; u < 10; ++u) {
                UnitSeries s;
                for (int t = 0; t < 20; ++t) {
                    s.periods.push_back(t);
                    s.growth.push_back(g(gen));
                }
                firm.units.push_back(std::move(s));
            }
            firms.push_back(std::move(firm));
        }
        const auto profile = mean_pairwise_correlation_by_k(firms);
        REQUIRE(profile.size() == 1);
        CHECK(std::abs(profile[0].second) < 0.03);
    }
    SUBCASE("common firm-level shock share is recovered") {
        const double share = 0.5;
        std::mt19937_64 gen(11);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<FirmSeries> firms;
        for (int f = 0; f < 1500; ++f) {
            FirmSeries firm;
            std::vector<double> common(25);
            for (auto& c : common) c = g(gen);
            for (int u = 0; u < 8; ++u) {
                UnitSeries s;
                for (int t = 0; t < 25; ++t) {
                    s.periods.push_back(t);
                    s.growth.push_back(std::sqrt(share) * common[t] +
                                       std::sqrt(1.0 - share) * g(gen));
                }
                firm.units.push_back(std::move(s));
            }
            firms.push_back(std::move(firm));
        }
        const auto profile = mean_pairwise_correlation_by_k(firms);
        REQUIRE(profile.size() == 1);
        CHECK(std::abs(profile[0].second - share) < 0.05);
    }
    SUBCASE("insufficient overlap errors out") {
        UnitSeries a{{0, 1, 2}, {0.1, 0.2, 0.3}};
        UnitSeries b{{5, 6, 7}, {0.1, 0.2, 0.3}};
        CHECK_THROWS_AS(mean_pairwise_correlation_by_k({FirmSeries{{a, b}}}), DataError);
    }
}

TEST_CASE("autocorrelation") {
    SUBCASE("alternating sequence at lag 1") {
        std::vector<double> xs(1000);
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = i % 2 ? 1.0 : -1.0;
        CHECK(autocorrelation(xs, 1) == doctest::Approx(-1.0).epsilon(1e-12));
    }
    SUBCASE("iid noise is uncorrelated") {
        std::mt19937_64 gen(12);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> xs(10000);
        for (auto& x : xs) x = g(gen);
        CHECK(std::abs(autocorrelation(xs, 1)) < 0.03);
    }
    SUBCASE("AR(1) coefficient recovered") {
        std::mt19937_64 gen(13);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<double> xs(100000);
        xs[0] = g(gen);
        for (std::size_t i = 1; i < xs.size(); ++i) xs[i] = 0.5 * xs[i - 1] + g(gen);
        CHECK(autocorrelation(xs, 1) == doctest::Approx(0.5).epsilon(0.04));
    }
    SUBCASE("constant series") {
        std::vector<double> xs(100, 1.0);
        CHECK_THROWS_AS(autocorrelation(xs, 1), DataError);
    }
}

TEST_CASE("A/B statistics") {
    const LognormalParams xi{0.0, 0.25}, eta{0.0, 0.25};
    const double mu_xi = lognormal_moment(1, xi);
    const double mu_eta = lognormal_moment(1, eta);

    SUBCASE("constant growth factors zero A") {
        const std::vector<double> units{1.0, 2.0, 3.0};
        const std::vector<double> growth(3, mu_eta);
        const auto [a, b] = ab_statistics(units, growth, xi, eta);
        CHECK(a == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("mean-sized units zero B") {
        const std::vector<double> units(5, mu_xi);
        const std::vector<double> growth{0.5, 1.0, 1.5, 2.0, 2.5};
        const auto [a, b] = ab_statistics(units, growth, xi, eta);
        CHECK(b == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("Monte Carlo moments match <A> = 0, <A^2> = C K, <AB> = 0") {
        const std::size_t n_firms = 100000, k = 100;
        std::mt19937_64 gen(14);
        std::normal_distribution<double> z(0.0, 0.5); // sqrt(0.25)
        std::vector<double> a_vals(n_firms), ab_vals(n_firms);
        std::vector<double> units(k), growth(k);
        for (std::size_t f = 0; f < n_firms; ++f) {
            for (std::size_t i = 0; i < k; ++i) {
                units[i] = std::exp(z(gen));
                growth[i] = std::exp(z(gen));
            }
            const auto [a, b] = ab_statistics(units, growth, xi, eta);
            a_vals[f] = a;
            ab_vals[f] = a * b;
        }
        const double c = series_coefficients(xi, eta).c;
        const double mean_a = testutil::mean(a_vals);
        const double se_a = testutil::sample_stddev(a_vals) / std::sqrt(n_firms);
        CHECK(std::abs(mean_a) <= 3.0 * se_a);

        double mean_a2 = 0.0;
        for (double a : a_vals) mean_a2 += a * a;
        mean_a2 /= static_cast<double>(n_firms);
        CHECK(std::abs(mean_a2 / k - c) / c < 0.02);

        const double mean_ab = testutil::mean(ab_vals);
        const double se_ab = testutil::sample_stddev(ab_vals) / std::sqrt(n_firms);
        CHECK(std::abs(mean_ab) <= 3.0 * se_ab);
    }
    SUBCASE("length mismatch") {
        const std::vector<double> u{1.0, 2.0}, g{1.0};
        CHECK_THROWS_AS(ab_statistics(u, g, xi, eta), DataError);
    }
}
