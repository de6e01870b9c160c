#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "firmgrowth/errors.hpp"
#include "firmgrowth/random.hpp"
#include "firmgrowth/types.hpp"

namespace firmgrowth {

// State of the preferential-attachment urn: at each step one unit enters,
// joining a new class with probability entry_prob, otherwise an existing
// class with probability proportional to its unit count.
struct UrnConfig {
    std::uint64_t initial_classes = 1; // N0
    std::uint64_t initial_units = 1;   // n0 >= N0
    double entry_prob = 0.0;           // b in [0,1]
    std::uint64_t steps = 0;           // T

    void validate() const;
};

// Continuous birth/death/entry rates. Only supported through the mapping
// onto the base urn: t = t' (theta - lambda + b'), b = b' / (theta - lambda + b').
struct GeneralizedRates {
    double birth_prob = 0.0; // theta
    double death_prob = 0.0; // lambda
    double entry_prob = 0.0; // b'
};

struct ClassEnsemble {
    std::vector<std::uint64_t> unit_counts; // K per class

    std::uint64_t total_units() const;
};

// Families of the unit-count distribution P(K).
struct KDistribution {
    enum class Family { fixed, exponential, yule, power_law, empirical };

    Family family = Family::fixed;
    std::uint64_t fixed_k = 1;   // fixed
    double mean_k = 1.0;         // exponential: K0 = <K>
    double entry_prob = 0.0;     // yule: urn entry probability b
    double exponent = 2.0;       // power_law: phi
    std::uint64_t k_max = 10000000; // power_law cutoff
    std::vector<std::pair<std::uint64_t, double>> table; // empirical: (K, weight)

    static KDistribution Fixed(std::uint64_t k);
    static KDistribution Exponential(double k0);
    static KDistribution Yule(double b);
    static KDistribution PowerLaw(double phi, std::uint64_t k_max = 10000000);
    static KDistribution Empirical(std::vector<std::pair<std::uint64_t, double>> table);

    void validate() const;
    std::string describe() const;
};

// Unit-size vectors per firm plus the seed they were generated from.
struct FirmEnsemble {
    std::vector<std::vector<double>> firms;
    std::uint64_t seed = 0;
};

/// Run the urn for config.steps steps. Unit conservation is exact:
/// sum(unit_counts) == initial_units + steps.
ClassEnsemble evolve_urn(const UrnConfig& config, std::uint64_t seed);

/// Map generalized birth/death/entry rates onto (steps, entry_prob) of the
/// base process. Throws ConfigError when theta - lambda + b' <= 0 or the
/// mapped entry probability falls outside [0,1].
std::pair<std::uint64_t, double> map_generalized_rates(const GeneralizedRates& rates,
                                                       std::uint64_t t_prime);

// Sampler with precomputed tables; cheap to draw from repeatedly.
// The yule family is backed by an urn run whose class counts are used as
// an empirical pool, sized from the requested sample count.
class KSampler {
public:
    explicit KSampler(KDistribution dist);

    std::vector<std::uint64_t> sample(std::size_t n, RandomStream& stream) const;

    /// One draw. Valid for every family except yule (which needs a pool).
    std::uint64_t draw(RandomStream& stream) const;

    /// P(K). Unsupported for the yule family (no closed finite-t form in use).
    double pmf(std::uint64_t k) const;

    /// Smallest K with CDF(K) >= p.
    std::uint64_t quantile(double p) const;

    const KDistribution& dist() const { return dist_; }

private:
    KDistribution dist_;
    std::vector<double> cdf_; // power_law / empirical cumulative over support
    std::vector<std::uint64_t> support_; // empirical support values
    double geometric_p_ = 1.0;
};

std::vector<std::uint64_t> sample_k(const KDistribution& dist, std::size_t n, std::uint64_t seed);

std::vector<double> sample_lognormal(const LognormalParams& params, std::size_t n,
                                     std::uint64_t seed);

/// n_firms firms, each with K ~ kdist units of size ~ P_xi.
FirmEnsemble generate_firms(const KDistribution& kdist, const LognormalParams& xi,
                            std::size_t n_firms, std::uint64_t seed);

/// Multiply every unit by an independent growth factor ~ P_eta; returns the
/// stepped ensemble and one GrowthObservation per firm (S, xi_max and K_e
/// taken before the step).
std::pair<FirmEnsemble, std::vector<GrowthObservation>>
step_firms(const FirmEnsemble& ensemble, const LognormalParams& eta, std::uint64_t seed);

// Fused generate+grow streaming path for large ensembles: no unit storage,
// one observation per firm. Same statistics as generate_firms + step_firms.
template <typename Emit>
void growth_step_stream(std::span<const std::uint64_t> unit_counts, const LognormalParams& xi,
                        const LognormalParams& eta, RandomStream& stream, Emit&& emit) {
    xi.validate();
    eta.validate();
    const double mx = xi.log_mean, sx = std::sqrt(xi.log_variance);
    const double me = eta.log_mean, se = std::sqrt(eta.log_variance);
    for (std::uint64_t k : unit_counts) {
        double s0 = 0.0, s1 = 0.0, largest = 0.0;
        for (std::uint64_t i = 0; i < k; ++i) {
            const double unit = stream.lognormal(mx, sx);
            const double factor = stream.lognormal(me, se);
            s0 += unit;
            s1 += unit * factor;
            if (unit > largest) largest = unit;
        }
        GrowthObservation obs;
        obs.size = s0;
        obs.growth = std::log(s1 / s0);
        obs.unit_count = k;
        obs.largest_unit = largest;
        obs.effective_units = s0 / largest;
        emit(obs);
    }
}

} // namespace firmgrowth
