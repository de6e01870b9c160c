// Command-line surface: simulation, prediction and panel-analysis
// subcommands that emit plot-ready CSV/JSON tables.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "firmgrowth/analytics.hpp"
#include "firmgrowth/errors.hpp"
#include "firmgrowth/experiments.hpp"
#include "firmgrowth/panel.hpp"
#include "firmgrowth/results.hpp"
#include "firmgrowth/stochastic.hpp"

using namespace firmgrowth;

namespace {

struct GlobalFlags {
    std::uint64_t seed = 1;
    std::size_t replicas = 1;
    std::string out;
    std::string format = "csv";
};

struct ModelFlags {
    std::string k_dist = "exp";
    double k0 = 100.0;
    double b = 0.1;
    double phi = 2.0;
    std::uint64_t kmax = 10000000;
    double mxi = 0.0;
    double vxi = 1.0;
    double meta = 0.0;
    double veta = 0.36;
    std::size_t firms = 100000;
    std::string pk_table;
};

struct EstimatorFlags {
    std::size_t min_count = 10;
    std::size_t window = 5;
};

void add_global_flags(CLI::App* cmd, GlobalFlags& g) {
    cmd->add_option("--seed", g.seed, "master random seed");
    cmd->add_option("--replicas", g.replicas, "independent replicas to pool");
    cmd->add_option("--out", g.out, "output path (default: stdout)");
    cmd->add_option("--format", g.format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
}

void add_model_flags(CLI::App* cmd, ModelFlags& m) {
    cmd->add_option("--k-dist", m.k_dist, "fixed|exp|yule|powerlaw|empirical")
        ->check(CLI::IsMember({"fixed", "exp", "yule", "powerlaw", "empirical"}));
    cmd->add_option("--k0", m.k0, "mean K (exp family) or the fixed K");
    cmd->add_option("--b", m.b, "entry probability (yule family)");
    cmd->add_option("--phi", m.phi, "power-law exponent");
    cmd->add_option("--kmax", m.kmax, "power-law cutoff");
    cmd->add_option("--mxi", m.mxi, "log-mean of unit sizes");
    cmd->add_option("--vxi", m.vxi, "log-variance of unit sizes");
    cmd->add_option("--meta", m.meta, "log-mean of growth factors");
    cmd->add_option("--veta", m.veta, "log-variance of growth factors");
    cmd->add_option("--firms", m.firms, "firms per replica");
    cmd->add_option("--pk-table", m.pk_table, "empirical K table CSV (K,weight)");
}

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& e) {
    cmd->add_option("--min-count", e.min_count, "minimum observations per bin");
    cmd->add_option("--window", e.window, "bins per local slope window (odd)");
}

KDistribution load_pk_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open K table: " + path);
    std::vector<std::pair<std::uint64_t, double>> table;
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::uint64_t k;
        char comma;
        double w;
        if (!(ls >> k >> comma >> w) || comma != ',')
            throw DataError("K table row " + std::to_string(row) + ": expected `K,weight`");
        table.emplace_back(k, w);
    }
    return KDistribution::Empirical(std::move(table));
}

KDistribution make_kdist(const ModelFlags& m) {
    if (m.k_dist == "fixed")
        return KDistribution::Fixed(static_cast<std::uint64_t>(std::llround(m.k0)));
    if (m.k_dist == "exp") return KDistribution::Exponential(m.k0);
    if (m.k_dist == "yule") return KDistribution::Yule(m.b);
    if (m.k_dist == "powerlaw") return KDistribution::PowerLaw(m.phi, m.kmax);
    if (m.k_dist == "empirical") {
        if (m.pk_table.empty())
            throw ConfigError("empirical K family requires --pk-table");
        return load_pk_table(m.pk_table);
    }
    throw ConfigError("unknown K family: " + m.k_dist);
}

ExperimentSpec make_spec(const GlobalFlags& g, const ModelFlags& m, const EstimatorFlags& e) {
    ExperimentSpec spec;
    spec.kdist = make_kdist(m);
    spec.xi = {m.mxi, m.vxi};
    spec.eta = {m.meta, m.veta};
    spec.n_firms = m.firms;
    spec.replicas = g.replicas;
    spec.seed = g.seed;
    spec.min_count = e.min_count;
    spec.window = e.window;
    return spec;
}

std::vector<double> parse_list(const std::string& csv, const char* what) {
    std::vector<double> out;
    std::istringstream in(csv);
    std::string tok;
    while (std::getline(in, tok, ',')) {
        try {
            out.push_back(std::stod(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string("bad ") + what + " list entry: " + tok);
        }
    }
    if (out.empty()) throw ConfigError(std::string("empty ") + what + " list");
    return out;
}

std::vector<std::uint64_t> default_k_values(std::uint64_t kmax) {
    std::vector<std::uint64_t> ks;
    for (std::uint64_t k = 1; k <= kmax; k *= 2) ks.push_back(k);
    return ks;
}

std::vector<std::uint64_t> k_values_from(const std::string& k_list, std::uint64_t default_max) {
    if (k_list.empty()) return default_k_values(default_max);
    std::vector<std::uint64_t> ks;
    for (double x : parse_list(k_list, "K")) {
        if (x < 1.0) throw ConfigError("K values must be >= 1");
        ks.push_back(static_cast<std::uint64_t>(x));
    }
    return ks;
}

void write_envelope(const ResultEnvelope& env, const GlobalFlags& g) {
    const auto emit = [&](std::ostream& os) {
        if (g.format == "json")
            export_json(env, os);
        else
            export_csv(env, os);
    };
    if (g.out.empty()) {
        emit(std::cout);
        return;
    }
    std::ofstream out(g.out, std::ios::binary);
    if (!out) throw DataError("cannot open output path: " + g.out);
    emit(out);
}

Panel load_panel(const std::string& path) {
    if (path.empty() || path == "-") return ingest_panel(std::cin);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open panel file: " + path);
    return ingest_panel(in);
}

double bin_sigma_stderr(const BinnedSigma& b) {
    return b.count > 1 ? b.sigma / std::sqrt(2.0 * static_cast<double>(b.count - 1)) : 0.0;
}

void fill_sigma_tables(ResultEnvelope& env, const ExperimentResult& r,
                       const std::string& prefix = "") {
    for (const auto& b : r.binned)
        env.add_row(prefix + "sigma_s", b.center, b.sigma, b.count, bin_sigma_stderr(b));
    for (const auto& p : r.beta_profile) env.add_row(prefix + "beta_s", p.center, p.beta);
    for (const auto& b : r.binned) env.add_row(prefix + "ke_s", b.center, b.mean_ke, b.count);
    for (const auto& [x, y] : r.sigma_large_overlay)
        env.add_row(prefix + "sigma_large_pred", x, y);
    env.add_row(prefix + "sigma_small_pred", 0.0, r.sigma_small_pred);
    env.add_row(prefix + "beta_global", 0.0, r.fitted_beta);
    env.add_row(prefix + "beta_max", r.beta_max_location, r.beta_max);
    if (r.s_star > 0.0) {
        env.add_row(prefix + "s_star", 0.0, r.s_star);
        env.add_row(prefix + "s1", 0.0, r.s1);
        env.add_row(prefix + "k_star", 0.0, r.k_star);
    }
}

int run_cli(int argc, char** argv) {
    CLI::App app{"proportional-growth firm simulator and analysis toolkit"};
    app.require_subcommand(1);

    GlobalFlags g;
    ModelFlags m;
    EstimatorFlags e;

    std::string vxi_list, veta_list, k_list, levels = "firm", mode = "keep-eta";
    std::string in_path, level = "firm", periods;

    auto* simulate_pk = app.add_subcommand("simulate-pk", "sample P(K) and emit its histogram");
    auto* sigma_s = app.add_subcommand("sigma-s", "sigma(S) curve with beta(S) and overlays");
    auto* sigma_k = app.add_subcommand("sigma-k", "sigma^2(K) over fixed-K ensembles");
    auto* collapse = app.add_subcommand("collapse", "scaling collapse over a (V_xi,V_eta) grid");
    auto* beta_min = app.add_subcommand("beta-min", "beta_min sweep and 1/(p V_xi + q) fit");
    auto* predict = app.add_subcommand("predict", "closed-form crossover predictions");
    auto* pgsk = app.add_subcommand("pgsk", "conditional P(g|S,K) bin study at fixed K");
    auto* vxi_sweep = app.add_subcommand("vxi-sweep", "global beta as a function of V_xi");
    auto* ingest = app.add_subcommand("ingest", "validate a panel CSV and summarize it");
    auto* observe = app.add_subcommand("observe", "binned sigma(S) from a panel at one level");
    auto* reassign = app.add_subcommand("reassign", "randomization experiments on a panel");
    auto* series = app.add_subcommand("series", "1/K series coefficients and sigma^2(K)");

    for (CLI::App* cmd : {simulate_pk, sigma_s, sigma_k, collapse, beta_min, predict, pgsk,
                          vxi_sweep, ingest, observe, reassign, series}) {
        add_global_flags(cmd, g);
        add_model_flags(cmd, m);
    }
    for (CLI::App* cmd : {sigma_s, sigma_k, collapse, beta_min, pgsk, vxi_sweep, observe,
                          reassign})
        add_estimator_flags(cmd, e);

    collapse->add_option("--vxi-list", vxi_list, "comma-separated V_xi grid values");
    collapse->add_option("--veta-list", veta_list, "comma-separated V_eta grid values");
    beta_min->add_option("--vxi-list", vxi_list, "comma-separated V_xi values");
    beta_min->add_option("--veta-list", veta_list, "comma-separated V_eta values");
    vxi_sweep->add_option("--vxi-list", vxi_list, "comma-separated V_xi values");
    for (CLI::App* cmd : {sigma_k, collapse, beta_min, series})
        cmd->add_option("--k-list", k_list, "comma-separated K values (default: powers of 2)");
    for (CLI::App* cmd : {ingest, observe, reassign})
        cmd->add_option("--in", in_path, "panel CSV path (default: stdin)");
    observe->add_option("--level", level, "market|firm|product");
    observe->add_option("--periods", periods, "period pair t0,t1 (default: all pairs)");
    reassign->add_option("--mode", mode, "keep-eta|shuffle-eta|synthetic");
    reassign->add_option("--levels", levels, "comma-separated levels");

    CLI11_PARSE(app, argc, argv);

    nlohmann::ordered_json echo;
    echo["argv"] = std::vector<std::string>(argv + 1, argv + argc);

    if (app.got_subcommand(simulate_pk)) {
        const KDistribution dist = make_kdist(m);
        const auto ks = sample_k(dist, m.firms, g.seed);
        ResultEnvelope env = make_envelope("simulate-pk", echo.dump(), g.seed);
        std::map<std::uint64_t, std::uint64_t> hist;
        for (auto k : ks) ++hist[k];
        for (const auto& [k, c] : hist)
            env.add_row("pk", static_cast<double>(k), static_cast<double>(c), c);
        // base-2 binned density for wide-ranged families
        std::map<int, std::uint64_t> bins;
        for (auto k : ks) ++bins[std::ilogb(static_cast<double>(k))];
        for (const auto& [b, c] : bins) {
            const double lo = std::ldexp(1.0, b), hi = std::ldexp(1.0, b + 1);
            env.add_row("pk_binned", std::sqrt(lo * hi),
                        static_cast<double>(c) / (hi - lo) / static_cast<double>(ks.size()), c);
        }
        write_envelope(env, g);
    } else if (app.got_subcommand(sigma_s)) {
        const ExperimentResult r = run_sigma_s(make_spec(g, m, e));
        ResultEnvelope env = make_envelope("sigma-s", r.spec_echo, g.seed);
        fill_sigma_tables(env, r);
        write_envelope(env, g);
    } else if (app.got_subcommand(sigma_k)) {
        const ExperimentSpec spec = make_spec(g, m, e);
        const auto ks = k_values_from(k_list, std::min<std::uint64_t>(m.kmax, 16384));
        const auto curve = run_sigma_k(spec, ks);
        ResultEnvelope env = make_envelope("sigma-k", spec.describe(), g.seed);
        for (const auto& [k, s2] : curve)
            env.add_row("sigma2_k", k, s2, spec.n_firms * spec.replicas);
        write_envelope(env, g);
    } else if (app.got_subcommand(collapse)) {
        const ExperimentSpec spec = make_spec(g, m, e);
        const auto vxis = parse_list(vxi_list.empty() ? "1,2,3,4" : vxi_list, "V_xi");
        const auto vetas = parse_list(veta_list.empty() ? "0.5,1" : veta_list, "V_eta");
        std::vector<std::pair<double, double>> grid;
        for (double vx : vxis)
            for (double ve : vetas) grid.emplace_back(vx, ve);
        const auto ks = k_values_from(k_list, 16384);
        const CollapseExperimentResult r = run_collapse(grid, ks, spec);
        ResultEnvelope env = make_envelope("collapse", echo.dump(), g.seed);
        for (const auto& c : r.collapse.curves) {
            std::ostringstream name;
            name << "collapsed/vxi=" << c.v_xi << ",veta=" << c.v_eta;
            for (const auto& [z, y] : c.zy) env.add_row(name.str(), z, y);
            std::ostringstream fname;
            fname << "shift_f/veta=" << c.v_eta;
            env.add_row(fname.str(), c.v_xi, c.shift);
        }
        for (const auto& [z, b] : r.collapse.beta_of_z) env.add_row("beta_z", z, b);
        env.add_row("beta_min", r.collapse.beta_min.argmin, r.collapse.beta_min.beta_min);
        for (const auto& [vx, fx] : r.f_xi) env.add_row("f_xi", vx, fx);
        for (const auto& [ve, fe] : r.f_eta) env.add_row("f_eta", ve, fe);
        env.add_row("f_xi_fit", r.f_xi_slope, r.f_xi_intercept);
        env.add_row("f_eta_fit", r.f_eta_slope, r.f_eta_intercept);
        env.add_row("additive_residual", 0.0, r.additive_residual);
        write_envelope(env, g);
    } else if (app.got_subcommand(beta_min)) {
        const ExperimentSpec spec = make_spec(g, m, e);
        const auto vxis = parse_list(vxi_list.empty() ? "4,6,8" : vxi_list, "V_xi");
        const auto vetas = parse_list(veta_list.empty() ? "1" : veta_list, "V_eta");
        const auto ks = k_values_from(k_list, 4096);
        const BetaMinSweepResult r = run_beta_min_sweep(vxis, vetas, spec, ks);
        ResultEnvelope env = make_envelope("beta-min", echo.dump(), g.seed);
        for (const auto& c : r.cells) {
            std::ostringstream name;
            name << "beta_min/veta=" << c.v_eta;
            env.add_row(name.str(), c.v_xi, c.beta_min);
        }
        env.add_row("fit_p", 0.0, r.p);
        env.add_row("fit_q", 0.0, r.q);
        write_envelope(env, g);
    } else if (app.got_subcommand(predict)) {
        const LognormalParams xi{m.mxi, m.vxi};
        const LognormalParams eta{m.meta, m.veta};
        const CrossoverPrediction cp = crossover_size(xi, eta);
        const bool exp_ok = crossover_feasible_exponential(m.vxi, m.k0);
        const bool pl_ok = crossover_feasible_powerlaw(m.phi);
        std::cout << "S1 (mean unit size)      = " << format_double(cp.s1) << "\n"
                  << "S* (crossover size)      = " << format_double(cp.s_star) << "\n"
                  << "S* for small V_eta       = " << format_double(cp.s_star_small_veta) << "\n"
                  << "K* (units at crossover)  = " << format_double(cp.k_star) << "\n"
                  << "exponential P(K), K0=" << format_double(m.k0) << ": crossover "
                  << (exp_ok ? "reachable" : "not reachable") << "\n"
                  << "power-law P(K), phi=" << format_double(m.phi) << ": crossover "
                  << (pl_ok ? "reachable" : "not reachable") << "\n";
        if (!g.out.empty()) {
            ResultEnvelope env = make_envelope("predict", echo.dump(), g.seed);
            env.add_row("s1", 0.0, cp.s1);
            env.add_row("s_star", 0.0, cp.s_star);
            env.add_row("s_star_small_veta", 0.0, cp.s_star_small_veta);
            env.add_row("k_star", 0.0, cp.k_star);
            env.add_row("feasible_exponential", m.k0, exp_ok ? 1.0 : 0.0);
            env.add_row("feasible_powerlaw", m.phi, pl_ok ? 1.0 : 0.0);
            write_envelope(env, g);
        }
    } else if (app.got_subcommand(pgsk)) {
        ExperimentSpec spec = make_spec(g, m, e);
        if (pgsk->count("--k-dist") == 0 && pgsk->count("--k0") == 0)
            spec.kdist = KDistribution::Fixed(32768);
        if (pgsk->count("--vxi") == 0) spec.xi.log_variance = 6.0;
        if (pgsk->count("--veta") == 0) spec.eta.log_variance = 1.0;
        const ConditionalPgskResult r = run_conditional_pgsk(spec);
        ResultEnvelope env = make_envelope("pgsk", spec.describe(), g.seed);
        for (const auto& b : r.binned)
            env.add_row("sigma_s", b.center, b.sigma, b.count, bin_sigma_stderr(b));
        for (const auto& b : r.binned) env.add_row("ke_s", b.center, b.mean_ke, b.count);
        env.add_row("modal_sigma", r.modal.bin_lo, r.modal.sigma, r.modal.count);
        env.add_row("modal_ke", r.modal.bin_lo, r.modal.mean_ke, r.modal.count);
        env.add_row("abnormal_sigma", r.abnormal.bin_lo, r.abnormal.sigma, r.abnormal.count);
        env.add_row("abnormal_ke", r.abnormal.bin_lo, r.abnormal.mean_ke, r.abnormal.count);
        env.add_row("fraction_modal", 0.0, r.fraction_modal);
        write_envelope(env, g);
    } else if (app.got_subcommand(vxi_sweep)) {
        const ExperimentSpec spec = make_spec(g, m, e);
        KDistribution kdist = spec.kdist;
        if (vxi_sweep->count("--pk-table") == 0 && vxi_sweep->count("--k-dist") == 0) {
            // default empirical-style table: phi = 2 power law with a cutoff
            std::vector<std::pair<std::uint64_t, double>> table;
            for (std::uint64_t k = 1; k <= 3000; ++k)
                table.emplace_back(k, std::pow(static_cast<double>(k), -2.0));
            kdist = KDistribution::Empirical(std::move(table));
        }
        const auto vxis = parse_list(vxi_list.empty() ? "0,1,2,4,8,16,25" : vxi_list, "V_xi");
        const auto curve = run_vxi_sweep(kdist, m.mxi, vxis, spec);
        ResultEnvelope env = make_envelope("vxi-sweep", echo.dump(), g.seed);
        for (const auto& [vx, beta] : curve) env.add_row("beta_vxi", vx, beta);
        write_envelope(env, g);
    } else if (app.got_subcommand(ingest)) {
        const Panel panel = load_panel(in_path);
        ResultEnvelope env = make_envelope("ingest", echo.dump(), g.seed);
        std::set<std::string> firms, units, markets;
        for (const auto& r : panel.records()) {
            firms.insert(r.firm);
            units.insert(r.unit);
            if (!r.market.empty()) markets.insert(r.market);
        }
        env.add_row("records", 0.0, static_cast<double>(panel.record_count()));
        env.add_row("markets", 0.0, static_cast<double>(markets.size()));
        env.add_row("firms", 0.0, static_cast<double>(firms.size()));
        env.add_row("products", 0.0, static_cast<double>(units.size()));
        env.add_row("periods", 0.0, static_cast<double>(panel.periods().size()));
        for (long t : panel.periods())
            env.add_row("period_total", static_cast<double>(t), panel.period_total(t));
        write_envelope(env, g);
    } else if (app.got_subcommand(observe)) {
        const Panel panel = load_panel(in_path);
        const Level lvl = parse_level(level);
        std::vector<GrowthObservation> obs;
        if (periods.empty()) {
            obs = compute_observations_all_pairs(panel, lvl);
        } else {
            const auto pair = parse_list(periods, "period");
            if (pair.size() != 2) throw ConfigError("--periods expects `t0,t1`");
            obs = compute_observations(panel, lvl, static_cast<long>(pair[0]),
                                       static_cast<long>(pair[1]));
        }
        ResultEnvelope env = make_envelope("observe", echo.dump(), g.seed);
        const auto bins = bin_sigma_by_size(obs, BinAxis::size, e.min_count);
        for (const auto& b : bins)
            env.add_row("sigma_s", b.center, b.sigma, b.count, bin_sigma_stderr(b));
        for (const auto& b : bins) env.add_row("ke_s", b.center, b.mean_ke, b.count);
        if (bins.size() >= 3) {
            for (const auto& p : effective_beta(bins, e.window))
                env.add_row("beta_s", p.center, p.beta);
            env.add_row("beta_global", 0.0, fitted_global_beta(obs, e.min_count));
        }
        write_envelope(env, g);
    } else if (app.got_subcommand(reassign)) {
        const Panel panel = load_panel(in_path);
        const ReassignmentMode rmode = parse_reassignment_mode(mode);
        std::vector<Level> lvls;
        {
            std::istringstream ls(levels);
            std::string tok;
            while (std::getline(ls, tok, ',')) lvls.push_back(parse_level(tok));
        }
        const ReassignmentResult r = run_reassignment(panel, rmode, lvls, g.seed, e.min_count);
        ResultEnvelope env = make_envelope("reassign", echo.dump(), g.seed);
        for (const auto& lb : r.levels) {
            env.add_row("beta_star/" + level_name(lb.level), 0.0, lb.beta_star,
                        lb.observations);
            env.add_row("beta_base/" + level_name(lb.level), 0.0, lb.beta_base);
        }
        write_envelope(env, g);
    } else if (app.got_subcommand(series)) {
        const SeriesCoefficients s = series_coefficients({m.mxi, m.vxi}, {m.meta, m.veta});
        ResultEnvelope env = make_envelope("series", echo.dump(), g.seed);
        env.add_row("a", 0.0, s.a);
        env.add_row("b_series", 0.0, s.b_series);
        env.add_row("c", 0.0, s.c);
        env.add_row("m0", 0.0, s.m0);
        env.add_row("m1", 0.0, s.m1);
        env.add_row("v1", 0.0, s.v1);
        env.add_row("v2", 0.0, s.v2);
        const auto ks = k_values_from(k_list, 16384);
        for (auto k : ks) {
            env.add_row("sigma2_order1", static_cast<double>(k),
                        truncated_series_sigma2(k, s, 1));
            env.add_row("sigma2_order2", static_cast<double>(k),
                        truncated_series_sigma2(k, s, 2));
        }
        write_envelope(env, g);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_cli(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
