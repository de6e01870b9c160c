#pragma once

#include <cstdint>
#include <vector>

#include "firmgrowth/stochastic.hpp"
#include "firmgrowth/types.hpp"

namespace firmgrowth {

// Gaussian approximation of the conditional growth distribution for a
// firm of K units: g | K ~ N(m, V/K).
struct GibratApprox {
    double mean_g = 0.0;         // m = m_eta + V_eta/2
    double variance_scale = 0.0; // V = exp(V_xi)(exp(V_eta) - 1)
};

// Coefficients of the 1/K expansion of mean and variance of g.
// The expansion is asymptotic only (zero radius of convergence), so we
// never evaluate past second order.
struct SeriesCoefficients {
    double a = 1.0;        // exp(V_xi)
    double b_series = 1.0; // exp(V_eta); renamed from the entry probability b
    double c = 0.0;        // C = a (b_series - 1)
    double m0 = 0.0;       // m_eta + V_eta/2
    double m1 = 0.0;       // -C/2
    double v1 = 0.0;       // C
    double v2 = 0.0;       // C [a(5 b + 1)/2 - 1 - a^2 b (b + 1)]
};

// Where sigma(S) crosses over from the flat single-unit regime to the
// central-limit 1/sqrt(S) decay.
struct CrossoverPrediction {
    double mu_xi = 0.0;            // mean unit size exp(m_xi + V_xi/2)
    double s1 = 0.0;               // lower crossover bound, = mu_xi
    double s_star = 0.0;           // size where both asymptotes meet
    double s_star_small_veta = 0.0;// exp(3 V_xi/2 + m_xi), valid for V_eta < 1
    double k_star = 0.0;           // exp(V_xi), units needed at the crossover
    bool feasible = false;         // crossover window non-empty (s_star >= s1)
};

/// n-th moment of a lognormal: exp(n m + n^2 V / 2).
double lognormal_moment(int n, const LognormalParams& params);

GibratApprox gaussian_approx(const LognormalParams& xi, const LognormalParams& eta);

/// Flat asymptote sigma = sqrt(V_eta), valid for S below the mean unit size.
double sigma_small_s(const LognormalParams& eta);

/// Central-limit asymptote sigma(S) = exp(3V_xi/4 + m_xi/2) sqrt(exp(V_eta)-1) / sqrt(S).
double sigma_large_s(double size, const LognormalParams& xi, const LognormalParams& eta);

CrossoverPrediction crossover_size(const LognormalParams& xi, const LognormalParams& eta);

/// Whether an exponential P(K) with mean k0 leaves the crossover to
/// beta = 1/2 observable: V_xi > 8 exp(V_xi) / (9 k0).
bool crossover_feasible_exponential(double xi_variance, double k0);

/// Whether a power-law P(K) ~ K^-phi leaves the crossover observable: phi < 17/8.
bool crossover_feasible_powerlaw(double phi);

/// Power-law exponent of the class-size distribution grown with entry
/// probability b: phi = 2 + b/(1-b).
double yule_exponent(double entry_prob);

SeriesCoefficients series_coefficients(const LognormalParams& xi, const LognormalParams& eta);

/// Truncated series for sigma^2(K): V1/K (order 1) or V1/K + V2/K^2 (order 2).
double truncated_series_sigma2(std::uint64_t k, const SeriesCoefficients& coeffs, int order);

/// Central part of the growth-rate density: exp(-sqrt(2)|g|/sqrt(V)) / sqrt(2V).
double laplace_center_pdf(double g, double variance);

/// Gaussian conditional density of g for a firm of K units.
double gaussian_conditional_pdf(double g, std::uint64_t k, const GibratApprox& approx);

// Mixture density P(g) = sum_K P(K) P(g|K) truncated at k_max_eval and
// renormalized by the truncated mass. Builds the P(K) table once, so it
// can be evaluated cheaply on a grid of g values.
class MixturePdf {
public:
    // k_max_eval = 0 picks the 1 - 1e-6 quantile of the K distribution.
    MixturePdf(const KDistribution& kdist, const GibratApprox& approx,
               std::uint64_t k_max_eval = 0);

    double operator()(double g) const;
    std::uint64_t k_max_eval() const { return k_min_ + static_cast<std::uint64_t>(pk_.size()) - 1; }

private:
    GibratApprox approx_;
    std::uint64_t k_min_ = 1;
    std::vector<double> pk_; // renormalized masses for K = k_min_ .. k_max_eval
};

double mixture_growth_pdf(double g, const KDistribution& kdist, const GibratApprox& approx,
                          std::uint64_t k_max_eval = 0);

// Empirical fit constants of the beta_min law 1/(p V_xi + q). The sweep
// experiment re-estimates p and q instead of assuming these values.
inline constexpr double kBetaMinFitP = 0.54;
inline constexpr double kBetaMinFitQ = 2.66;

/// beta_min predicted by the empirical fit: 1 / (p V_xi + q).
double beta_min_empirical_fit(double xi_variance);

} // namespace firmgrowth
