#pragma once

#include "gam/hamiltonian.hpp"
#include "gam/model.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace gam {

/// sum_l |v_l(m)| |v_l(n)| for one realization.
double correlator_sample(const EigenSystem& sys, long m, long n);

struct CorrelatorEstimate {
    long m = 0, n = 0;
    double mean = 0.0;
    double stderr = 0.0;
    long samples = 0;
    long L = 0;
    std::uint64_t seed_base = 0;
};

struct SampleOptions {
    long samples = 100;
    std::uint64_t seed = 1;  // realization i uses seed + i
    unsigned threads = 1;
};

CorrelatorEstimate rho_hat(const ModelConfig& config, long L, long m, long n, const SampleOptions& opt);

/// rho_hat(m, n) for every site m of the box at fixed n, from one set of realizations.
struct CorrelatorProfile {
    long L = 0, n = 0, first_site = 0;
    std::vector<CorrelatorEstimate> rows;  // m = first_site, first_site + 1, ...
    double worst_cauchy_schwarz = 0.0;     // max over samples of sum_l |v_l(m)||v_l(n)| - 1
};

/// Per-realization hook (sample index, eigensystem); may run concurrently on worker threads.
using RealizationHook = std::function<void(std::size_t, const EigenSystem&)>;

CorrelatorProfile rho_hat_profile(const ModelConfig& config, long L, long n, const SampleOptions& opt,
                                  const RealizationHook& hook = {});

/// Mean and standard error from batch means (up to 32 contiguous batches).
std::pair<double, double> batch_mean_stderr(const std::vector<double>& x, int max_batches = 32);

struct DynamicalCheck {
    double max_amplitude = 0.0;
    double t_at_max = 0.0;
    double correlator = 0.0;
    bool holds = true;
};

DynamicalCheck dynamical_bound_check(const EigenSystem& sys, long m, long n, const std::vector<double>& t_grid);
/// Checks every site m against source n; returns the per-m results.
std::vector<DynamicalCheck> dynamical_bound_check_all(const EigenSystem& sys, long n,
                                                      const std::vector<double>& t_grid);

/// {0}, 63 geometric points in [0.1, 1e4], 64 uniform random points in [0, 1e4].
std::vector<double> default_time_grid(std::uint64_t seed);

struct DecayFit {
    double gamma = 0.0;  // minus the slope, per block
    double C = 0.0;      // exp(intercept)
    double r2 = 0.0;
    double ci_lo = 0.0, ci_hi = 0.0;  // 95% interval for gamma
    std::size_t points = 0;
    bool localizing = false;  // ci excludes zero with gamma > 0
};

/// OLS of log(value) on the block distance; non-positive values are dropped.
DecayFit fit_decay(const std::vector<double>& block_distance, const std::vector<double>& value);
/// Fit of a correlator profile at m >= n, excluding the `edge_blocks` block distances nearest the boundary.
DecayFit fit_profile(const CorrelatorProfile& prof, int alpha, int edge_blocks = 2);

struct DecayProfile {
    long center = 0;
    double rate = 0.0;
    std::vector<double> abs_profile;  // |v_l| over the box
};

DecayProfile eigenfunction_decay_profile(const EigenSystem& sys, std::size_t l);

}  // namespace gam
