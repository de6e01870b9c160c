#include "firmgrowth/analytics.hpp"

#include <cmath>
#include <numbers>

namespace firmgrowth {

double lognormal_moment(int n, const LognormalParams& params) {
    params.validate();
    if (n < 0) throw ConfigError("lognormal_moment: order must be >= 0");
    const double nn = static_cast<double>(n);
    return std::exp(nn * params.log_mean + nn * nn * params.log_variance / 2.0);
}

GibratApprox gaussian_approx(const LognormalParams& xi, const LognormalParams& eta) {
    xi.validate();
    eta.validate();
    GibratApprox approx;
    approx.mean_g = eta.log_mean + eta.log_variance / 2.0;
    approx.variance_scale = std::exp(xi.log_variance) * std::expm1(eta.log_variance);
    return approx;
}

double sigma_small_s(const LognormalParams& eta) {
    eta.validate();
    return std::sqrt(eta.log_variance);
}

double sigma_large_s(double size, const LognormalParams& xi, const LognormalParams& eta) {
    xi.validate();
    eta.validate();
    if (!(size > 0.0)) throw ConfigError("sigma_large_s: size must be positive");
    return std::exp(0.75 * xi.log_variance + 0.5 * xi.log_mean) *
           std::sqrt(std::expm1(eta.log_variance)) / std::sqrt(size);
}

CrossoverPrediction crossover_size(const LognormalParams& xi, const LognormalParams& eta) {
    xi.validate();
    eta.validate();
    if (eta.log_variance <= 0.0)
        throw ConfigError("crossover_size: V_eta must be positive");

    CrossoverPrediction cp;
    cp.mu_xi = std::exp(xi.log_mean + xi.log_variance / 2.0);
    cp.s1 = cp.mu_xi;
    cp.s_star_small_veta = std::exp(1.5 * xi.log_variance + xi.log_mean);
    cp.s_star = cp.s_star_small_veta * std::expm1(eta.log_variance) / eta.log_variance;
    cp.k_star = std::exp(xi.log_variance);
    cp.feasible = cp.s_star >= cp.s1;
    return cp;
}

bool crossover_feasible_exponential(double xi_variance, double k0) {
    if (k0 <= 0.0) throw ConfigError("crossover_feasible_exponential: K0 must be positive");
    return xi_variance > 8.0 * std::exp(xi_variance) / (9.0 * k0);
}

bool crossover_feasible_powerlaw(double phi) {
    if (phi <= 1.0) throw ConfigError("crossover_feasible_powerlaw: phi must be > 1");
    return phi < 17.0 / 8.0;
}

double yule_exponent(double entry_prob) {
    if (entry_prob < 0.0 || entry_prob >= 1.0)
        throw ConfigError("yule_exponent: entry probability must lie in [0,1)");
    return 2.0 + entry_prob / (1.0 - entry_prob);
}

SeriesCoefficients series_coefficients(const LognormalParams& xi, const LognormalParams& eta) {
    xi.validate();
    eta.validate();
    SeriesCoefficients s;
    s.a = std::exp(xi.log_variance);
    s.b_series = std::exp(eta.log_variance);
    s.c = s.a * std::expm1(eta.log_variance);
    s.m0 = eta.log_mean + eta.log_variance / 2.0;
    s.m1 = -s.c / 2.0;
    s.v1 = s.c;
    s.v2 = s.c * (s.a * (5.0 * s.b_series + 1.0) / 2.0 - 1.0 -
                  s.a * s.a * s.b_series * (s.b_series + 1.0));
    return s;
}

double truncated_series_sigma2(std::uint64_t k, const SeriesCoefficients& coeffs, int order) {
    if (k < 1) throw ConfigError("truncated_series_sigma2: K must be >= 1");
    if (order != 1 && order != 2)
        throw ConfigError("truncated_series_sigma2: only orders 1 and 2 are defined");
    const double kk = static_cast<double>(k);
    double value = coeffs.v1 / kk;
    if (order == 2) value += coeffs.v2 / (kk * kk);
    return value;
}

double laplace_center_pdf(double g, double variance) {
    if (!(variance > 0.0)) throw ConfigError("laplace_center_pdf: variance must be positive");
    return std::exp(-std::numbers::sqrt2 * std::abs(g) / std::sqrt(variance)) /
           std::sqrt(2.0 * variance);
}

double gaussian_conditional_pdf(double g, std::uint64_t k, const GibratApprox& approx) {
    if (k < 1) throw ConfigError("gaussian_conditional_pdf: K must be >= 1");
    if (!(approx.variance_scale > 0.0))
        throw ConfigError("gaussian_conditional_pdf: variance scale must be positive");
    const double kk = static_cast<double>(k);
    const double d = g - approx.mean_g;
    return std::sqrt(kk / (2.0 * std::numbers::pi * approx.variance_scale)) *
           std::exp(-d * d * kk / (2.0 * approx.variance_scale));
}

MixturePdf::MixturePdf(const KDistribution& kdist, const GibratApprox& approx,
                       std::uint64_t k_max_eval)
    : approx_(approx) {
    if (!(approx.variance_scale > 0.0))
        throw ConfigError("mixture pdf: variance scale must be positive");
    KSampler sampler(kdist);
    if (k_max_eval == 0) k_max_eval = sampler.quantile(1.0 - 1e-6);
    if (k_max_eval < 1) throw ConfigError("mixture pdf: empty K support");

    pk_.resize(k_max_eval);
    double mass = 0.0;
    for (std::uint64_t k = 1; k <= k_max_eval; ++k) {
        pk_[k - 1] = sampler.pmf(k);
        mass += pk_[k - 1];
    }
    if (mass <= 0.0) throw ConfigError("mixture pdf: no probability mass below k_max_eval");
    for (auto& p : pk_) p /= mass;
}

double MixturePdf::operator()(double g) const {
    double density = 0.0;
    for (std::size_t i = 0; i < pk_.size(); ++i) {
        if (pk_[i] == 0.0) continue;
        density += pk_[i] * gaussian_conditional_pdf(g, k_min_ + i, approx_);
    }
    return density;
}

double mixture_growth_pdf(double g, const KDistribution& kdist, const GibratApprox& approx,
                          std::uint64_t k_max_eval) {
    return MixturePdf(kdist, approx, k_max_eval)(g);
}

double beta_min_empirical_fit(double xi_variance) {
    if (xi_variance < 0.0) throw ConfigError("beta_min_empirical_fit: V_xi must be >= 0");
    return 1.0 / (kBetaMinFitP * xi_variance + kBetaMinFitQ);
}

} // namespace firmgrowth
