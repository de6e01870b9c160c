#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "firmgrowth/analytics.hpp"
#include "firmgrowth/estimators.hpp"
#include "firmgrowth/panel.hpp"
#include "firmgrowth/stochastic.hpp"
#include "firmgrowth/types.hpp"

namespace firmgrowth {

// Parameter bundle for one simulation experiment. Replicas run on
// independent random streams and merge deterministically.
struct ExperimentSpec {
    KDistribution kdist;
    LognormalParams xi;
    LognormalParams eta;
    std::size_t n_firms = 100000;
    std::size_t replicas = 1;
    std::uint64_t seed = 1;
    std::size_t min_count = 10;
    std::size_t window = 5;

    std::string describe() const;
    void validate_sigma_run() const; // statistical floor: n_firms * replicas >= 1e4
};

struct ExperimentResult {
    std::vector<BinnedSigma> binned;          // sigma(S) per base-2 bin
    std::vector<BetaPoint> beta_profile;      // local beta(S)
    double beta_max = 0.0;                    // maximal negative slope
    double beta_max_location = 0.0;           // bin center of beta_max
    BetaMinResult beta_min;
    double fitted_beta = 0.0;                 // global OLS slope of ln sigma vs ln S
    double ke_max_location = 0.0;             // bin center with largest mean K_e

    // predicted overlays
    double sigma_small_pred = 0.0;            // sqrt(V_eta)
    double s1 = 0.0, s_star = 0.0, k_star = 0.0;
    std::vector<std::pair<double, double>> sigma_large_overlay; // (center, prediction)

    // provenance
    std::string spec_echo;
    std::uint64_t seed = 0;
    double runtime_seconds = 0.0;
};

/// One growth step over n_firms * replicas firms; sigma binned by S with
/// beta(S), K_e(S), and the closed-form overlays.
ExperimentResult run_sigma_s(const ExperimentSpec& spec);

/// Monte-Carlo variance of g for firms of exactly K units, one point per K.
std::vector<std::pair<double, double>> run_sigma_k(const ExperimentSpec& spec,
                                                   std::span<const std::uint64_t> k_values);

struct CollapseExperimentResult {
    CollapseResult collapse;
    // fitted additive decomposition f(V_xi, V_eta) ~ f_xi(V_xi) + f_eta(V_eta)
    std::vector<std::pair<double, double>> f_xi;  // (V_xi, f_xi)
    std::vector<std::pair<double, double>> f_eta; // (V_eta, f_eta), mean-centered
    double additive_residual = 0.0;               // max |f - f_xi - f_eta|
    double f_xi_slope = 0.0, f_xi_intercept = 0.0;
    double f_eta_slope = 0.0, f_eta_intercept = 0.0;
};

/// sigma^2(K) per (V_xi, V_eta) grid cell, collapsed onto the universal
/// curve; also fits the linear asymptotes of the shift function.
CollapseExperimentResult run_collapse(const std::vector<std::pair<double, double>>& grid,
                                      std::span<const std::uint64_t> k_values,
                                      const ExperimentSpec& defaults);

struct BetaMinSweepResult {
    struct Cell {
        double v_xi = 0.0;
        double v_eta = 0.0;
        double beta_min = 0.0;
        double argmin_lnk = 0.0;
        bool boundary = false;
    };
    std::vector<Cell> cells;
    double p = 0.0; // fit of 1/beta_min = p V_xi + q
    double q = 0.0;
};

BetaMinSweepResult run_beta_min_sweep(std::span<const double> v_xi_values,
                                      std::span<const double> v_eta_values,
                                      const ExperimentSpec& defaults,
                                      std::span<const std::uint64_t> k_values);

struct ConditionalBinStats {
    double bin_lo = 0.0, bin_hi = 0.0;
    std::size_t count = 0;
    double sigma = 0.0;
    double mean_ke = 0.0;
};

struct ConditionalPgskResult {
    std::vector<BinnedSigma> binned;
    ConditionalBinStats modal;    // most populated S bin
    ConditionalBinStats abnormal; // next bin up
    double fraction_modal = 0.0;
};

/// P(g | S, K) study at fixed K: per-S-bin sigma and K_e for the modal bin
/// and the abnormally large bin above it. kdist must be the fixed family.
ConditionalPgskResult run_conditional_pgsk(const ExperimentSpec& spec);

/// Fitted global beta as a function of V_xi on a fixed (empirical-style)
/// P(K); unit sizes drawn lognormal(m_xi, V_xi).
std::vector<std::pair<double, double>> run_vxi_sweep(const KDistribution& kdist, double m_xi,
                                                     std::span<const double> v_xi_values,
                                                     const ExperimentSpec& defaults);

enum class ReassignmentMode { keep_eta, shuffle_eta, synthetic };

ReassignmentMode parse_reassignment_mode(const std::string& name);
std::string reassignment_mode_name(ReassignmentMode mode);

struct ReassignmentResult {
    struct LevelBeta {
        Level level;
        double beta_star = 0.0;    // after the reassignment
        double beta_base = 0.0;    // unmodified panel
        std::size_t observations = 0;
    };
    std::vector<LevelBeta> levels;
    ReassignmentMode mode;
};

/// Permute unit identities across unit slots with identical period-presence
/// signatures; each unit keeps its full size history, each firm keeps its K
/// per period. This is the keep_eta core transform.
Panel reassign_units(const Panel& panel, std::uint64_t seed);

/// Apply an explicit slot permutation (index i takes the slot of perm[i]);
/// units are ordered by id. perm must be a permutation within presence groups
/// to preserve per-period K; the identity is always valid.
Panel reassign_units_with(const Panel& panel, std::span<const std::size_t> perm);

/// Randomization experiments: keep_eta reassigns units to firms; shuffle_eta
/// additionally permutes growth factors across units within each period pair;
/// synthetic redraws unit sizes and growths from lognormal fits to the panel.
ReassignmentResult run_reassignment(const Panel& panel, ReassignmentMode mode,
                                    std::span<const Level> levels, std::uint64_t seed,
                                    std::size_t min_count = 10);

/// Model-generated multi-period panel (one blank market): K ~ kdist, initial
/// sizes ~ P_xi, sizes multiplied by P_eta draws each period.
Panel synthesize_panel(const KDistribution& kdist, const LognormalParams& xi,
                       const LognormalParams& eta, std::size_t n_firms, std::size_t n_periods,
                       std::uint64_t seed);

/// Unweighted OLS beta over base-2 sigma(S) bins (the global fit used by
/// the reassignment experiments).
double fitted_global_beta(std::span<const GrowthObservation> observations,
                          std::size_t min_count = 10);

} // namespace firmgrowth
