#include "firmgrowth/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include <json.hpp>

#include "firmgrowth/errors.hpp"

namespace firmgrowth {

namespace {

// Fan tasks out to hardware threads; each task owns its result slot, so the
// reduction order never depends on scheduling.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& task) {
    if (n == 0) return;
    const std::size_t workers =
        std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) task(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= n) break;
                try {
                    task(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed ^ (0x9e3779b97f4a7c15ULL * (salt + 1));
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double ols_beta_from_bins(std::span<const BinnedSigma> bins) {
    std::vector<std::pair<double, double>> pts;
    for (const auto& b : bins)
        if (b.sigma > 0.0) pts.emplace_back(b.center, b.sigma);
    if (pts.size() < 3) throw DataError("global beta fit: fewer than 3 usable bins");
    return -fit_power_law(pts).exponent;
}

} // namespace

std::string ExperimentSpec::describe() const {
    nlohmann::ordered_json j;
    j["kdist"] = kdist.describe();
    j["m_xi"] = xi.log_mean;
    j["v_xi"] = xi.log_variance;
    j["m_eta"] = eta.log_mean;
    j["v_eta"] = eta.log_variance;
    j["n_firms"] = n_firms;
    j["replicas"] = replicas;
    j["seed"] = seed;
    j["min_count"] = min_count;
    j["window"] = window;
    return j.dump();
}

void ExperimentSpec::validate_sigma_run() const {
    kdist.validate();
    xi.validate();
    eta.validate();
    if (n_firms == 0 || replicas == 0)
        throw ConfigError("experiment: n_firms and replicas must be positive");
    if (n_firms * replicas < 10000)
        throw ConfigError("experiment: n_firms * replicas must be >= 10^4 for sigma curves");
}

ExperimentResult run_sigma_s(const ExperimentSpec& spec) {
    spec.validate_sigma_run();
    const auto start = std::chrono::steady_clock::now();

    const KSampler sampler(spec.kdist);
    std::vector<BinAccumulator> partial(spec.replicas, BinAccumulator(BinAxis::size));
    parallel_for(spec.replicas, [&](std::size_t r) {
        RandomStream stream(spec.seed, r + 1);
        const auto ks = sampler.sample(spec.n_firms, stream);
        growth_step_stream(ks, spec.xi, spec.eta, stream,
                           [&](const GrowthObservation& obs) { partial[r].add(obs); });
    });
    BinAccumulator acc(BinAxis::size);
    for (const auto& p : partial) acc.merge(p);

    ExperimentResult result;
    result.binned = acc.finalize(spec.min_count);
    if (result.binned.empty()) throw DataError("sigma(S): every bin below min_count");

    std::size_t usable = 0;
    for (const auto& b : result.binned)
        if (b.sigma > 0.0) ++usable;
    if (usable >= 3) {
        result.beta_profile = effective_beta(result.binned, spec.window);
        const auto it_max = std::max_element(
            result.beta_profile.begin(), result.beta_profile.end(),
            [](const BetaPoint& a, const BetaPoint& b) { return a.beta < b.beta; });
        result.beta_max = it_max->beta;
        result.beta_max_location = it_max->center;
        result.fitted_beta = ols_beta_from_bins(result.binned);
    } else {
        // degenerate curve (e.g. V_xi = 0 piling all firms into one bin)
        result.beta_max = std::numeric_limits<double>::quiet_NaN();
        result.beta_max_location = std::numeric_limits<double>::quiet_NaN();
        result.fitted_beta = std::numeric_limits<double>::quiet_NaN();
    }

    std::vector<std::pair<double, double>> beta_ln;
    for (const auto& p : result.beta_profile) beta_ln.emplace_back(std::log(p.center), p.beta);
    if (beta_ln.size() >= 5) result.beta_min = extract_beta_min(beta_ln);

    const auto it_ke = std::max_element(
        result.binned.begin(), result.binned.end(),
        [](const BinnedSigma& a, const BinnedSigma& b) { return a.mean_ke < b.mean_ke; });
    result.ke_max_location = it_ke->center;

    result.sigma_small_pred = sigma_small_s(spec.eta);
    if (spec.eta.log_variance > 0.0) {
        const CrossoverPrediction cp = crossover_size(spec.xi, spec.eta);
        result.s1 = cp.s1;
        result.s_star = cp.s_star;
        result.k_star = cp.k_star;
        for (const auto& b : result.binned)
            result.sigma_large_overlay.emplace_back(b.center,
                                                    sigma_large_s(b.center, spec.xi, spec.eta));
    }

    result.spec_echo = spec.describe();
    result.seed = spec.seed;
    result.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<std::pair<double, double>> run_sigma_k(const ExperimentSpec& spec,
                                                   std::span<const std::uint64_t> k_values) {
    spec.validate_sigma_run();
    if (k_values.empty()) throw ConfigError("sigma(K): empty K list");

    struct Moments {
        double sum = 0.0, sum2 = 0.0;
        std::size_t n = 0;
    };
    std::vector<Moments> partial(k_values.size() * spec.replicas);
    parallel_for(partial.size(), [&](std::size_t task) {
        const std::size_t ki = task / spec.replicas; // task = ki * replicas + r
        RandomStream stream(spec.seed, 1 + task);
        const std::vector<std::uint64_t> ks(spec.n_firms, k_values[ki]);
        Moments m;
        growth_step_stream(ks, spec.xi, spec.eta, stream, [&](const GrowthObservation& obs) {
            m.sum += obs.growth;
            m.sum2 += obs.growth * obs.growth;
            ++m.n;
        });
        partial[task] = m;
    });

    std::vector<std::pair<double, double>> curve;
    curve.reserve(k_values.size());
    for (std::size_t ki = 0; ki < k_values.size(); ++ki) {
        Moments total;
        for (std::size_t r = 0; r < spec.replicas; ++r) {
            const Moments& m = partial[ki * spec.replicas + r];
            total.sum += m.sum;
            total.sum2 += m.sum2;
            total.n += m.n;
        }
        const double n = static_cast<double>(total.n);
        const double mean = total.sum / n;
        const double var = std::max(0.0, total.sum2 - n * mean * mean) / (n - 1.0);
        curve.emplace_back(static_cast<double>(k_values[ki]), var);
    }
    return curve;
}

CollapseExperimentResult run_collapse(const std::vector<std::pair<double, double>>& grid,
                                      std::span<const std::uint64_t> k_values,
                                      const ExperimentSpec& defaults) {
    if (grid.empty()) throw ConfigError("collapse: empty (V_xi, V_eta) grid");

    std::vector<CollapseCurveInput> inputs(grid.size());
    for (std::size_t cell = 0; cell < grid.size(); ++cell) {
        ExperimentSpec spec = defaults;
        spec.xi.log_variance = grid[cell].first;
        spec.eta.log_variance = grid[cell].second;
        spec.seed = derive_seed(defaults.seed, cell);
        inputs[cell] = {grid[cell].first, grid[cell].second, run_sigma_k(spec, k_values)};
    }

    CollapseExperimentResult result;
    result.collapse = collapse_curves(inputs, defaults.window);

    // additive decomposition needs a complete rectangular grid
    std::set<double> vxis, vetas;
    for (const auto& [vx, ve] : grid) {
        vxis.insert(vx);
        vetas.insert(ve);
    }
    if (vxis.size() * vetas.size() == grid.size()) {
        std::map<std::pair<double, double>, double> f;
        for (const auto& c : result.collapse.curves) f[{c.v_xi, c.v_eta}] = c.shift;
        double grand = 0.0;
        for (const auto& [k, v] : f) grand += v;
        grand /= static_cast<double>(f.size());

        for (double vx : vxis) {
            double m = 0.0;
            for (double ve : vetas) m += f.at({vx, ve});
            result.f_xi.emplace_back(vx, m / static_cast<double>(vetas.size()));
        }
        for (double ve : vetas) {
            double m = 0.0;
            for (double vx : vxis) m += f.at({vx, ve});
            result.f_eta.emplace_back(ve, m / static_cast<double>(vxis.size()) - grand);
        }
        double worst = 0.0;
        for (std::size_t i = 0; i < result.f_xi.size(); ++i) {
            for (std::size_t j = 0; j < result.f_eta.size(); ++j) {
                const double fitted = result.f_xi[i].second + result.f_eta[j].second;
                const double actual = f.at({result.f_xi[i].first, result.f_eta[j].first});
                worst = std::max(worst, std::abs(actual - fitted));
            }
        }
        result.additive_residual = worst;

        if (result.f_xi.size() >= 2) {
            std::vector<double> xs, ys;
            for (const auto& [x, y] : result.f_xi) {
                xs.push_back(x);
                ys.push_back(y);
            }
            std::tie(result.f_xi_slope, result.f_xi_intercept) = linear_fit(xs, ys);
        }
        if (result.f_eta.size() >= 2) {
            std::vector<double> xs, ys;
            for (const auto& [x, y] : result.f_eta) {
                xs.push_back(x);
                ys.push_back(y);
            }
            std::tie(result.f_eta_slope, result.f_eta_intercept) = linear_fit(xs, ys);
        }
    }
    return result;
}

BetaMinSweepResult run_beta_min_sweep(std::span<const double> v_xi_values,
                                      std::span<const double> v_eta_values,
                                      const ExperimentSpec& defaults,
                                      std::span<const std::uint64_t> k_values) {
    if (v_xi_values.size() < 3)
        throw ConfigError("beta_min sweep: need at least 3 V_xi values");
    if (v_eta_values.empty()) throw ConfigError("beta_min sweep: empty V_eta list");

    BetaMinSweepResult result;
    std::size_t cell = 0;
    for (double ve : v_eta_values) {
        for (double vx : v_xi_values) {
            ExperimentSpec spec = defaults;
            spec.xi.log_variance = vx;
            spec.eta.log_variance = ve;
            spec.seed = derive_seed(defaults.seed, 1000 + cell);
            const auto curve = run_sigma_k(spec, k_values);

            std::vector<std::pair<double, double>> sigma_pts;
            for (const auto& [k, s2] : curve)
                if (s2 > 0.0) sigma_pts.emplace_back(k, std::sqrt(s2));
            std::vector<BinnedSigma> pseudo;
            for (const auto& [k, s] : sigma_pts) {
                BinnedSigma b;
                b.center = k;
                b.sigma = s;
                b.count = spec.n_firms * spec.replicas;
                pseudo.push_back(b);
            }
            const auto beta = effective_beta(pseudo, spec.window);
            std::vector<std::pair<double, double>> beta_ln;
            for (const auto& p : beta) beta_ln.emplace_back(std::log(p.center), p.beta);
            const BetaMinResult bm = extract_beta_min(beta_ln);
            result.cells.push_back({vx, ve, bm.beta_min, bm.argmin, bm.boundary});
            ++cell;
        }
    }

    std::vector<double> xs, ys;
    for (const auto& c : result.cells) {
        xs.push_back(c.v_xi);
        ys.push_back(1.0 / c.beta_min);
    }
    std::tie(result.p, result.q) = linear_fit(xs, ys);
    return result;
}

ConditionalPgskResult run_conditional_pgsk(const ExperimentSpec& spec) {
    spec.validate_sigma_run();
    if (spec.kdist.family != KDistribution::Family::fixed)
        throw ConfigError("conditional P(g|S,K) study requires the fixed K family");

    std::vector<BinAccumulator> partial(spec.replicas, BinAccumulator(BinAxis::size));
    parallel_for(spec.replicas, [&](std::size_t r) {
        RandomStream stream(spec.seed, r + 1);
        const std::vector<std::uint64_t> ks(spec.n_firms, spec.kdist.fixed_k);
        growth_step_stream(ks, spec.xi, spec.eta, stream,
                           [&](const GrowthObservation& obs) { partial[r].add(obs); });
    });
    BinAccumulator acc(BinAxis::size);
    for (const auto& p : partial) acc.merge(p);

    const auto bins = acc.finalize(2);
    if (bins.empty()) throw DataError("conditional study: no bin reached 2 observations");

    ConditionalPgskResult result;
    result.binned = bins;
    const auto modal = std::max_element(
        bins.begin(), bins.end(),
        [](const BinnedSigma& a, const BinnedSigma& b) { return a.count < b.count; });
    const std::size_t total = spec.n_firms * spec.replicas;
    result.modal = {modal->bin_lo, modal->bin_hi, modal->count, modal->sigma, modal->mean_ke};
    result.fraction_modal = static_cast<double>(modal->count) / static_cast<double>(total);

    const auto abnormal = std::find_if(bins.begin(), bins.end(), [&](const BinnedSigma& b) {
        return b.bin_lo == modal->bin_hi;
    });
    if (abnormal == bins.end()) {
        std::ostringstream os;
        os << "conditional study: abnormal bin empty (modal bin [" << modal->bin_lo << ","
           << modal->bin_hi << ") holds " << modal->count << " of " << total << " firms)";
        throw DataError(os.str());
    }
    result.abnormal = {abnormal->bin_lo, abnormal->bin_hi, abnormal->count, abnormal->sigma,
                       abnormal->mean_ke};
    return result;
}

std::vector<std::pair<double, double>> run_vxi_sweep(const KDistribution& kdist, double m_xi,
                                                     std::span<const double> v_xi_values,
                                                     const ExperimentSpec& defaults) {
    if (v_xi_values.empty()) throw ConfigError("V_xi sweep: empty V_xi list");
    kdist.validate();

    std::vector<std::pair<double, double>> out;
    out.reserve(v_xi_values.size());
    for (std::size_t i = 0; i < v_xi_values.size(); ++i) {
        ExperimentSpec spec = defaults;
        spec.kdist = kdist;
        spec.xi = {m_xi, v_xi_values[i]};
        spec.seed = derive_seed(defaults.seed, 7000 + i);

        // V_xi = 0 leaves S quantized on multiples of exp(m_xi); the global
        // OLS over base-2 bins is still well defined
        spec.validate_sigma_run();
        const KSampler sampler(spec.kdist);
        std::vector<BinAccumulator> partial(spec.replicas, BinAccumulator(BinAxis::size));
        parallel_for(spec.replicas, [&](std::size_t r) {
            RandomStream stream(spec.seed, r + 1);
            const auto ks = sampler.sample(spec.n_firms, stream);
            growth_step_stream(ks, spec.xi, spec.eta, stream,
                               [&](const GrowthObservation& obs) { partial[r].add(obs); });
        });
        BinAccumulator acc(BinAxis::size);
        for (const auto& p : partial) acc.merge(p);
        out.emplace_back(v_xi_values[i], ols_beta_from_bins(acc.finalize(spec.min_count)));
    }
    return out;
}

ReassignmentMode parse_reassignment_mode(const std::string& name) {
    if (name == "keep-eta" || name == "keep_eta") return ReassignmentMode::keep_eta;
    if (name == "shuffle-eta" || name == "shuffle_eta") return ReassignmentMode::shuffle_eta;
    if (name == "synthetic") return ReassignmentMode::synthetic;
    throw ConfigError("unknown reassignment mode: " + name);
}

std::string reassignment_mode_name(ReassignmentMode mode) {
    switch (mode) {
    case ReassignmentMode::keep_eta: return "keep_eta";
    case ReassignmentMode::shuffle_eta: return "shuffle_eta";
    case ReassignmentMode::synthetic: return "synthetic";
    }
    return "?";
}

namespace {

struct UnitIndex {
    std::vector<std::string> ids;                        // sorted unit ids
    std::vector<std::vector<std::size_t>> rows;          // record indexes per unit
    std::vector<std::string> signature;                  // period-presence signature per unit
};

UnitIndex build_unit_index(const Panel& panel) {
    std::map<std::string, std::vector<std::size_t>> by_unit;
    for (std::size_t i = 0; i < panel.records().size(); ++i)
        by_unit[panel.records()[i].unit].push_back(i);

    UnitIndex index;
    index.ids.reserve(by_unit.size());
    for (auto& [id, rows] : by_unit) {
        std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
            return panel.records()[a].period < panel.records()[b].period;
        });
        std::string sig;
        for (std::size_t r : rows) {
            sig += std::to_string(panel.records()[r].period);
            sig += ';';
        }
        index.ids.push_back(id);
        index.rows.push_back(std::move(rows));
        index.signature.push_back(std::move(sig));
    }
    return index;
}

} // namespace

Panel reassign_units_with(const Panel& panel, std::span<const std::size_t> perm) {
    const UnitIndex index = build_unit_index(panel);
    if (perm.size() != index.ids.size())
        throw ConfigError("reassign: permutation size does not match the unit count");

    std::vector<PanelRecord> records = panel.records();
    std::vector<bool> used(perm.size(), false);
    for (std::size_t u = 0; u < perm.size(); ++u) {
        const std::size_t target = perm[u];
        if (target >= index.ids.size())
            throw ConfigError("reassign: permutation index out of range");
        if (used[target]) throw ConfigError("reassign: duplicate permutation target");
        used[target] = true;
        if (index.signature[u] != index.signature[target])
            throw ConfigError("reassign: permutation crosses period-presence groups");
        // unit u inherits the (firm, market) slot of unit `target`, period-wise
        for (std::size_t k = 0; k < index.rows[u].size(); ++k) {
            const auto& donor = panel.records()[index.rows[target][k]];
            auto& mine = records[index.rows[u][k]];
            mine.firm = donor.firm;
            mine.market = donor.market;
        }
    }
    return Panel::from_records(std::move(records));
}

Panel reassign_units(const Panel& panel, std::uint64_t seed) {
    const UnitIndex index = build_unit_index(panel);
    RandomStream stream(seed, 0);

    // shuffle slot assignments within presence groups
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t u = 0; u < index.ids.size(); ++u)
        groups[index.signature[u]].push_back(u);

    std::vector<std::size_t> perm(index.ids.size());
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (auto& [sig, members] : groups) {
        std::vector<std::size_t> shuffled = members;
        for (std::size_t i = shuffled.size(); i > 1; --i)
            std::swap(shuffled[i - 1], shuffled[stream.uniform_index(i)]);
        for (std::size_t i = 0; i < members.size(); ++i) perm[members[i]] = shuffled[i];
    }
    return reassign_units_with(panel, perm);
}

namespace {

const std::string& level_key_of(const PanelRecord& r, Level level) {
    switch (level) {
    case Level::market: return r.market;
    case Level::firm: return r.firm;
    case Level::product: return r.unit;
    }
    return r.unit;
}

// Observations with growth factors permuted across all continuing units of
// the period pair; sizes stay real, only the surrogate next-period sum moves.
std::vector<GrowthObservation> shuffled_eta_observations(const Panel& panel, Level level,
                                                         long t0, long t1,
                                                         RandomStream& stream) {
    std::unordered_map<std::string, std::size_t> pos1;
    const auto rows1 = panel.period_rows(t1);
    pos1.reserve(rows1.size());
    for (std::size_t i : rows1) pos1[panel.records()[i].unit] = i;

    struct ContinuingUnit {
        double size;
        const std::string* key;
    };
    std::vector<ContinuingUnit> units;
    std::vector<double> factors;
    for (std::size_t i : panel.period_rows(t0)) {
        const auto& r0 = panel.records()[i];
        const auto it = pos1.find(r0.unit);
        if (it == pos1.end()) continue;
        const std::string& key = level_key_of(r0, level);
        if (key.empty()) continue;
        units.push_back({r0.sales, &key});
        factors.push_back(panel.records()[it->second].sales / r0.sales);
    }
    for (std::size_t i = factors.size(); i > 1; --i)
        std::swap(factors[i - 1], factors[stream.uniform_index(i)]);

    struct Agg {
        double s0 = 0.0, s1 = 0.0, largest = 0.0;
        std::uint64_t n = 0;
    };
    std::unordered_map<std::string, Agg> by_entity;
    for (std::size_t u = 0; u < units.size(); ++u) {
        Agg& a = by_entity[*units[u].key];
        a.s0 += units[u].size;
        a.s1 += units[u].size * factors[u];
        a.largest = std::max(a.largest, units[u].size);
        ++a.n;
    }

    std::vector<GrowthObservation> out;
    out.reserve(by_entity.size());
    for (const auto& [key, a] : by_entity) {
        GrowthObservation obs;
        obs.size = a.s0;
        obs.growth = std::log(a.s1 / a.s0);
        obs.unit_count = a.n;
        obs.largest_unit = a.largest;
        obs.effective_units = a.s0 / a.largest;
        out.push_back(obs);
    }
    return out;
}

// Synthetic rebuild of one period pair: real K per entity, unit sizes and
// growths redrawn from the panel-wide lognormal fits.
std::vector<GrowthObservation> synthetic_observations(const Panel& panel, Level level, long t0,
                                                      long t1, const LognormalParams& xi_hat,
                                                      const LognormalParams& eta_hat,
                                                      RandomStream& stream) {
    std::unordered_map<std::string, std::uint64_t> k_at_t0;
    std::unordered_map<std::string, bool> present1;
    for (std::size_t i : panel.period_rows(t1)) {
        const std::string& key = level_key_of(panel.records()[i], level);
        if (!key.empty()) present1[key] = true;
    }
    for (std::size_t i : panel.period_rows(t0)) {
        const std::string& key = level_key_of(panel.records()[i], level);
        if (!key.empty()) ++k_at_t0[key];
    }

    const double sx = std::sqrt(xi_hat.log_variance);
    const double se = std::sqrt(eta_hat.log_variance);
    std::vector<std::pair<std::string, std::uint64_t>> entities(k_at_t0.begin(), k_at_t0.end());
    std::sort(entities.begin(), entities.end()); // draw order independent of hash layout

    std::vector<GrowthObservation> out;
    out.reserve(entities.size());
    for (const auto& [key, k] : entities) {
        if (!present1.count(key)) continue;
        double s0 = 0.0, s1 = 0.0, largest = 0.0;
        for (std::uint64_t i = 0; i < k; ++i) {
            const double unit = stream.lognormal(xi_hat.log_mean, sx);
            const double factor = stream.lognormal(eta_hat.log_mean, se);
            s0 += unit;
            s1 += unit * factor;
            largest = std::max(largest, unit);
        }
        GrowthObservation obs;
        obs.size = s0;
        obs.growth = std::log(s1 / s0);
        obs.unit_count = k;
        obs.largest_unit = largest;
        obs.effective_units = s0 / largest;
        out.push_back(obs);
    }
    return out;
}

} // namespace

double fitted_global_beta(std::span<const GrowthObservation> observations,
                          std::size_t min_count) {
    const auto bins = bin_sigma_by_size(observations, BinAxis::size, min_count);
    return ols_beta_from_bins(bins);
}

ReassignmentResult run_reassignment(const Panel& panel, ReassignmentMode mode,
                                    std::span<const Level> levels, std::uint64_t seed,
                                    std::size_t min_count) {
    if (panel.periods().size() < 2)
        throw DataError("reassignment: panel needs at least 2 periods");
    if (levels.empty()) throw ConfigError("reassignment: no aggregation levels requested");

    ReassignmentResult result;
    result.mode = mode;

    Panel permuted;
    if (mode == ReassignmentMode::keep_eta || mode == ReassignmentMode::shuffle_eta)
        permuted = reassign_units(panel, seed);

    LognormalParams xi_hat, eta_hat;
    if (mode == ReassignmentMode::synthetic) {
        std::vector<double> sizes;
        sizes.reserve(panel.record_count());
        for (const auto& r : panel.records()) sizes.push_back(r.sales);
        xi_hat = estimate_lognormal_params(sizes);

        std::vector<double> factors;
        std::unordered_map<std::string, double> prev;
        const auto& periods = panel.periods();
        for (std::size_t p = 0; p + 1 < periods.size(); ++p) {
            prev.clear();
            for (std::size_t i : panel.period_rows(periods[p]))
                prev[panel.records()[i].unit] = panel.records()[i].sales;
            for (std::size_t i : panel.period_rows(periods[p + 1])) {
                const auto it = prev.find(panel.records()[i].unit);
                if (it != prev.end())
                    factors.push_back(panel.records()[i].sales / it->second);
            }
        }
        eta_hat = estimate_lognormal_params(factors);
    }

    const auto& periods = panel.periods();
    for (Level level : levels) {
        std::vector<GrowthObservation> base = compute_observations_all_pairs(panel, level);
        std::vector<GrowthObservation> star;
        switch (mode) {
        case ReassignmentMode::keep_eta:
            star = compute_observations_all_pairs(permuted, level);
            break;
        case ReassignmentMode::shuffle_eta: {
            for (std::size_t p = 0; p + 1 < periods.size(); ++p) {
                RandomStream stream(seed, 100 + p);
                auto obs = shuffled_eta_observations(permuted, level, periods[p],
                                                     periods[p + 1], stream);
                star.insert(star.end(), obs.begin(), obs.end());
            }
            break;
        }
        case ReassignmentMode::synthetic: {
            for (std::size_t p = 0; p + 1 < periods.size(); ++p) {
                RandomStream stream(seed, 1000 + p * 8 + static_cast<std::size_t>(level));
                auto obs = synthetic_observations(panel, level, periods[p], periods[p + 1],
                                                  xi_hat, eta_hat, stream);
                star.insert(star.end(), obs.begin(), obs.end());
            }
            break;
        }
        }
        ReassignmentResult::LevelBeta lb;
        lb.level = level;
        lb.beta_base = fitted_global_beta(base, min_count);
        lb.beta_star = fitted_global_beta(star, min_count);
        lb.observations = star.size();
        result.levels.push_back(lb);
    }
    return result;
}

Panel synthesize_panel(const KDistribution& kdist, const LognormalParams& xi,
                       const LognormalParams& eta, std::size_t n_firms, std::size_t n_periods,
                       std::uint64_t seed) {
    if (n_firms == 0 || n_periods < 2)
        throw ConfigError("synthesize_panel: need n_firms >= 1 and n_periods >= 2");
    xi.validate();
    eta.validate();

    KSampler sampler(kdist);
    RandomStream stream(seed, 0);
    const auto ks = sampler.sample(n_firms, stream);
    const std::uint64_t total_units = std::accumulate(ks.begin(), ks.end(), std::uint64_t{0});
    if (total_units * n_periods > 50000000ULL)
        throw ConfigError("synthesize_panel: panel would exceed 5*10^7 records");

    const double sx = std::sqrt(xi.log_variance);
    const double se = std::sqrt(eta.log_variance);

    std::vector<double> sizes(total_units);
    for (auto& s : sizes) s = stream.lognormal(xi.log_mean, sx);

    std::vector<PanelRecord> records;
    records.reserve(total_units * n_periods);
    for (std::size_t period = 1; period <= n_periods; ++period) {
        if (period > 1)
            for (auto& s : sizes) s *= stream.lognormal(eta.log_mean, se);
        std::size_t unit = 0;
        for (std::size_t f = 0; f < n_firms; ++f) {
            for (std::uint64_t j = 0; j < ks[f]; ++j, ++unit) {
                PanelRecord r;
                r.market = "";
                r.firm = "f" + std::to_string(f + 1);
                r.unit = "u" + std::to_string(unit + 1);
                r.period = static_cast<long>(period);
                r.sales = sizes[unit];
                records.push_back(std::move(r));
            }
        }
    }
    return Panel::from_records(std::move(records));
}

} // namespace firmgrowth
