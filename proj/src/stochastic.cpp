#include "firmgrowth/stochastic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace firmgrowth {

void UrnConfig::validate() const {
    if (initial_classes < 1)
        throw ConfigError("urn: initial_classes must be >= 1");
    if (initial_units < initial_classes)
        throw ConfigError("urn: initial_units must be >= initial_classes");
    if (entry_prob < 0.0 || entry_prob > 1.0)
        throw ConfigError("urn: entry_prob must lie in [0,1]");
    if (initial_units + steps > (1ULL << 32))
        throw ConfigError("urn: initial_units + steps exceeds the 2^32 unit limit");
}

std::uint64_t ClassEnsemble::total_units() const {
    return std::accumulate(unit_counts.begin(), unit_counts.end(), std::uint64_t{0});
}

ClassEnsemble evolve_urn(const UrnConfig& config, std::uint64_t seed) {
    config.validate();
    RandomStream stream(seed);

    const std::uint64_t n_units = config.initial_units + config.steps;
    std::vector<std::uint32_t> labels;
    labels.reserve(n_units);
    std::vector<std::uint64_t> counts(config.initial_classes, 0);

    // initial units spread round-robin so every class starts with >= 1
    for (std::uint64_t j = 0; j < config.initial_units; ++j) {
        const auto c = static_cast<std::uint32_t>(j % config.initial_classes);
        labels.push_back(c);
        ++counts[c];
    }

    for (std::uint64_t t = 0; t < config.steps; ++t) {
        if (stream.uniform() < config.entry_prob) {
            const auto c = static_cast<std::uint32_t>(counts.size());
            counts.push_back(1);
            labels.push_back(c);
        } else {
            // copying the class of a uniformly drawn unit realizes exact
            // K_alpha / sum(K) attachment in constant time
            const std::uint32_t c = labels[stream.uniform_index(labels.size())];
            ++counts[c];
            labels.push_back(c);
        }
    }

    return ClassEnsemble{std::move(counts)};
}

std::pair<std::uint64_t, double> map_generalized_rates(const GeneralizedRates& rates,
                                                       std::uint64_t t_prime) {
    const double denom = rates.birth_prob - rates.death_prob + rates.entry_prob;
    if (denom <= 0.0)
        throw ConfigError("generalized rates: theta - lambda + b' must be positive");
    const double b = rates.entry_prob / denom;
    if (b < 0.0 || b > 1.0)
        throw ConfigError("generalized rates: mapped entry probability outside [0,1]");
    const auto t = static_cast<std::uint64_t>(std::llround(static_cast<double>(t_prime) * denom));
    return {t, b};
}

KDistribution KDistribution::Fixed(std::uint64_t k) {
    KDistribution d;
    d.family = Family::fixed;
    d.fixed_k = k;
    d.validate();
    return d;
}

KDistribution KDistribution::Exponential(double k0) {
    KDistribution d;
    d.family = Family::exponential;
    d.mean_k = k0;
    d.validate();
    return d;
}

KDistribution KDistribution::Yule(double b) {
    KDistribution d;
    d.family = Family::yule;
    d.entry_prob = b;
    d.validate();
    return d;
}

KDistribution KDistribution::PowerLaw(double phi, std::uint64_t k_max) {
    KDistribution d;
    d.family = Family::power_law;
    d.exponent = phi;
    d.k_max = k_max;
    d.validate();
    return d;
}

KDistribution KDistribution::Empirical(std::vector<std::pair<std::uint64_t, double>> table) {
    KDistribution d;
    d.family = Family::empirical;
    d.table = std::move(table);
    d.validate();
    return d;
}

void KDistribution::validate() const {
    switch (family) {
    case Family::fixed:
        if (fixed_k < 1) throw ConfigError("K distribution: fixed K must be >= 1");
        break;
    case Family::exponential:
        if (mean_k < 1.0) throw ConfigError("K distribution: mean K0 must be >= 1");
        break;
    case Family::yule:
        if (entry_prob <= 0.0 || entry_prob >= 1.0)
            throw ConfigError("K distribution: yule entry probability must lie in (0,1)");
        break;
    case Family::power_law:
        if (exponent <= 1.0) throw ConfigError("K distribution: power-law exponent must be > 1");
        if (k_max < 1) throw ConfigError("K distribution: power-law cutoff must be >= 1");
        break;
    case Family::empirical: {
        if (table.empty()) throw ConfigError("K distribution: empirical table is empty");
        double total = 0.0;
        for (const auto& [k, w] : table) {
            if (k < 1) throw ConfigError("K distribution: empirical K values must be >= 1");
            if (!(w >= 0.0)) throw ConfigError("K distribution: empirical weights must be >= 0");
            total += w;
        }
        if (total <= 0.0) throw ConfigError("K distribution: empirical weights sum to zero");
        break;
    }
    }
}

std::string KDistribution::describe() const {
    std::ostringstream os;
    switch (family) {
    case Family::fixed: os << "fixed(K=" << fixed_k << ")"; break;
    case Family::exponential: os << "exponential(K0=" << mean_k << ")"; break;
    case Family::yule: os << "yule(b=" << entry_prob << ")"; break;
    case Family::power_law: os << "powerlaw(phi=" << exponent << ",kmax=" << k_max << ")"; break;
    case Family::empirical: os << "empirical(" << table.size() << " rows)"; break;
    }
    return os.str();
}

KSampler::KSampler(KDistribution dist) : dist_(std::move(dist)) {
    dist_.validate();
    switch (dist_.family) {
    case KDistribution::Family::exponential:
        geometric_p_ = 1.0 / dist_.mean_k;
        break;
    case KDistribution::Family::power_law: {
        cdf_.resize(dist_.k_max);
        double acc = 0.0;
        for (std::uint64_t k = 1; k <= dist_.k_max; ++k) {
            acc += std::pow(static_cast<double>(k), -dist_.exponent);
            cdf_[k - 1] = acc;
        }
        for (auto& c : cdf_) c /= acc;
        break;
    }
    case KDistribution::Family::empirical: {
        auto table = dist_.table;
        std::sort(table.begin(), table.end());
        cdf_.reserve(table.size());
        support_.reserve(table.size());
        double acc = 0.0;
        for (const auto& [k, w] : table) {
            if (w <= 0.0) continue;
            acc += w;
            support_.push_back(k);
            cdf_.push_back(acc);
        }
        if (cdf_.empty()) throw ConfigError("K distribution: empirical support is empty");
        for (auto& c : cdf_) c /= acc;
        break;
    }
    default:
        break;
    }
}

std::uint64_t KSampler::draw(RandomStream& stream) const {
    switch (dist_.family) {
    case KDistribution::Family::fixed:
        return dist_.fixed_k;
    case KDistribution::Family::exponential: {
        // geometric on {1,2,...} with mean K0
        if (geometric_p_ >= 1.0) return 1;
        const double u = stream.uniform();
        const auto k = 1 + static_cast<std::uint64_t>(std::floor(std::log1p(-u) /
                                                                 std::log1p(-geometric_p_)));
        return k;
    }
    case KDistribution::Family::power_law: {
        const double u = stream.uniform();
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
    }
    case KDistribution::Family::empirical: {
        const double u = stream.uniform();
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), u);
        return support_[static_cast<std::size_t>(it - cdf_.begin())];
    }
    case KDistribution::Family::yule:
        throw ConfigError("yule K draws require a pooled sample; use KSampler::sample");
    }
    throw ConfigError("unknown K distribution family");
}

std::vector<std::uint64_t> KSampler::sample(std::size_t n, RandomStream& stream) const {
    std::vector<std::uint64_t> out;
    out.reserve(n);
    if (dist_.family == KDistribution::Family::yule) {
        // grow an urn until its class pool comfortably exceeds n, then
        // resample classes uniformly
        const double b = dist_.entry_prob;
        const std::uint64_t target_classes =
            std::max<std::uint64_t>(4 * static_cast<std::uint64_t>(n), 100000);
        UrnConfig cfg;
        cfg.initial_classes = 10;
        cfg.initial_units = 10;
        cfg.entry_prob = b;
        cfg.steps = static_cast<std::uint64_t>(static_cast<double>(target_classes) / b) + 1;
        const ClassEnsemble classes = evolve_urn(cfg, stream.next_u64());
        for (std::size_t i = 0; i < n; ++i)
            out.push_back(classes.unit_counts[stream.uniform_index(classes.unit_counts.size())]);
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) out.push_back(draw(stream));
    return out;
}

double KSampler::pmf(std::uint64_t k) const {
    if (k < 1) return 0.0;
    switch (dist_.family) {
    case KDistribution::Family::fixed:
        return k == dist_.fixed_k ? 1.0 : 0.0;
    case KDistribution::Family::exponential: {
        const double p = geometric_p_;
        if (p >= 1.0) return k == 1 ? 1.0 : 0.0;
        return std::exp(static_cast<double>(k - 1) * std::log1p(-p)) * p;
    }
    case KDistribution::Family::power_law: {
        if (k > dist_.k_max) return 0.0;
        const double mass = cdf_[k - 1] - (k >= 2 ? cdf_[k - 2] : 0.0);
        return mass;
    }
    case KDistribution::Family::empirical: {
        const auto it = std::lower_bound(support_.begin(), support_.end(), k);
        if (it == support_.end() || *it != k) return 0.0;
        const auto idx = static_cast<std::size_t>(it - support_.begin());
        return cdf_[idx] - (idx > 0 ? cdf_[idx - 1] : 0.0);
    }
    case KDistribution::Family::yule:
        throw ConfigError("yule family has no usable closed-form pmf; sample it instead");
    }
    throw ConfigError("unknown K distribution family");
}

std::uint64_t KSampler::quantile(double p) const {
    if (p < 0.0 || p > 1.0) throw ConfigError("quantile level must lie in [0,1]");
    switch (dist_.family) {
    case KDistribution::Family::fixed:
        return dist_.fixed_k;
    case KDistribution::Family::exponential: {
        if (geometric_p_ >= 1.0) return 1;
        if (p >= 1.0) return std::numeric_limits<std::uint64_t>::max();
        const double k = std::ceil(std::log1p(-p) / std::log1p(-geometric_p_));
        return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(k));
    }
    case KDistribution::Family::power_law: {
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), p);
        if (it == cdf_.end()) return dist_.k_max;
        return static_cast<std::uint64_t>(it - cdf_.begin()) + 1;
    }
    case KDistribution::Family::empirical: {
        const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), p);
        if (it == cdf_.end()) return support_.back();
        return support_[static_cast<std::size_t>(it - cdf_.begin())];
    }
    case KDistribution::Family::yule:
        throw ConfigError("yule family has no usable closed-form quantile; sample it instead");
    }
    throw ConfigError("unknown K distribution family");
}

std::vector<std::uint64_t> sample_k(const KDistribution& dist, std::size_t n, std::uint64_t seed) {
    KSampler sampler(dist);
    RandomStream stream(seed);
    return sampler.sample(n, stream);
}

std::vector<double> sample_lognormal(const LognormalParams& params, std::size_t n,
                                     std::uint64_t seed) {
    params.validate();
    RandomStream stream(seed);
    const double sd = std::sqrt(params.log_variance);
    std::vector<double> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(stream.lognormal(params.log_mean, sd));
    return out;
}

FirmEnsemble generate_firms(const KDistribution& kdist, const LognormalParams& xi,
                            std::size_t n_firms, std::uint64_t seed) {
    xi.validate();
    KSampler sampler(kdist);
    RandomStream stream(seed);
    const auto ks = sampler.sample(n_firms, stream);

    const std::uint64_t total = std::accumulate(ks.begin(), ks.end(), std::uint64_t{0});
    if (total > (1ULL << 31))
        throw ConfigError("generate_firms: ensemble would exceed 2^31 units; "
                          "use the streaming experiment path");

    FirmEnsemble ensemble;
    ensemble.seed = seed;
    ensemble.firms.reserve(n_firms);
    const double sd = std::sqrt(xi.log_variance);
    for (std::uint64_t k : ks) {
        std::vector<double> units(k);
        for (auto& u : units) u = stream.lognormal(xi.log_mean, sd);
        ensemble.firms.push_back(std::move(units));
    }
    return ensemble;
}

std::pair<FirmEnsemble, std::vector<GrowthObservation>>
step_firms(const FirmEnsemble& ensemble, const LognormalParams& eta, std::uint64_t seed) {
    eta.validate();
    RandomStream stream(seed);
    const double sd = std::sqrt(eta.log_variance);

    FirmEnsemble stepped;
    stepped.seed = seed;
    stepped.firms.reserve(ensemble.firms.size());
    std::vector<GrowthObservation> observations;
    observations.reserve(ensemble.firms.size());

    for (const auto& units : ensemble.firms) {
        double s0 = 0.0, s1 = 0.0, largest = 0.0;
        std::vector<double> next(units.size());
        for (std::size_t i = 0; i < units.size(); ++i) {
            const double factor = stream.lognormal(eta.log_mean, sd);
            next[i] = units[i] * factor;
            s0 += units[i];
            s1 += next[i];
            if (units[i] > largest) largest = units[i];
        }
        GrowthObservation obs;
        obs.size = s0;
        obs.growth = std::log(s1 / s0);
        obs.unit_count = units.size();
        obs.largest_unit = largest;
        obs.effective_units = s0 / largest;
        observations.push_back(obs);
        stepped.firms.push_back(std::move(next));
    }
    return {std::move(stepped), std::move(observations)};
}

} // namespace firmgrowth
