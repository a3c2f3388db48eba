#include "gam/correlator.hpp"

#include "gam/errors.hpp"
#include "gam/parallel.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

namespace gam {

double correlator_sample(const EigenSystem& sys, long m, long n) {
    double s = 0.0;
    for (std::size_t l = 0; l < sys.n; ++l) s += std::abs(sys.v(l, m)) * std::abs(sys.v(l, n));
    return s;
}

std::pair<double, double> batch_mean_stderr(const std::vector<double>& x, int max_batches) {
    const std::size_t N = x.size();
    if (N == 0) return {0.0, 0.0};
    double mean = 0.0;
    for (double v : x) mean += v;
    mean /= static_cast<double>(N);
    const std::size_t nb = std::min<std::size_t>(static_cast<std::size_t>(max_batches), N);
    if (nb < 2) return {mean, 0.0};
    std::vector<double> bm(nb, 0.0);
    std::vector<std::size_t> cnt(nb, 0);
    for (std::size_t i = 0; i < N; ++i) {
        std::size_t b = i * nb / N;
        bm[b] += x[i];
        ++cnt[b];
    }
    double var = 0.0;
    for (std::size_t b = 0; b < nb; ++b) {
        bm[b] /= static_cast<double>(cnt[b]);
        var += (bm[b] - mean) * (bm[b] - mean);
    }
    var /= static_cast<double>(nb - 1);
    return {mean, std::sqrt(var / static_cast<double>(nb))};
}

namespace {

EigenSystem realization_eigensystem(const ModelConfig& config, long L, std::uint64_t seed) {
    auto real = sample_realization(config, L, seed);
    try {
        return eigh_tridiagonal(assemble_finite_box(config, real, L));
    } catch (const NumericalError& e) {
        throw NumericalError(std::string(e.what()) + " (realization seed " + std::to_string(seed) + ")",
                             e.diagnostics());
    }
}

}  // namespace

CorrelatorProfile rho_hat_profile(const ModelConfig& config, long L, long n, const SampleOptions& opt,
                                  const RealizationHook& hook) {
    if (opt.samples < 1) throw ConfigError("samples must be at least 1");
    const long a = config.profile.alpha;
    const long first = -a * L, size = 2 * a * L;
    if (n < first || n >= first + size) throw ConfigError("site n outside the box");
    const auto S = static_cast<std::size_t>(opt.samples);
    const auto nsites = static_cast<std::size_t>(size);
    std::vector<double> values(S * nsites);
    std::vector<double> worst(S, 0.0);
    parallel_for(S, opt.threads, [&](std::size_t i) {
        auto sys = realization_eigensystem(config, L, opt.seed + i);
        for (long m = first; m < first + size; ++m) {
            double c = correlator_sample(sys, m, n);
            values[i * nsites + static_cast<std::size_t>(m - first)] = c;
            worst[i] = std::max(worst[i], c - 1.0);
        }
        if (hook) hook(i, sys);
    });
    CorrelatorProfile prof;
    prof.L = L;
    prof.n = n;
    prof.first_site = first;
    prof.worst_cauchy_schwarz = *std::max_element(worst.begin(), worst.end());
    std::vector<double> col(S);
    for (std::size_t j = 0; j < nsites; ++j) {
        for (std::size_t i = 0; i < S; ++i) col[i] = values[i * nsites + j];
        auto [mean, se] = batch_mean_stderr(col);
        CorrelatorEstimate est;
        est.m = first + static_cast<long>(j);
        est.n = n;
        est.mean = mean;
        est.stderr = se;
        est.samples = opt.samples;
        est.L = L;
        est.seed_base = opt.seed;
        prof.rows.push_back(est);
    }
    return prof;
}

CorrelatorEstimate rho_hat(const ModelConfig& config, long L, long m, long n, const SampleOptions& opt) {
    const long a = config.profile.alpha;
    if (m < -a * L || m >= a * L) throw ConfigError("site m outside the box");
    if (n < -a * L || n >= a * L) throw ConfigError("site n outside the box");
    const auto S = static_cast<std::size_t>(opt.samples);
    if (opt.samples < 1) throw ConfigError("samples must be at least 1");
    std::vector<double> vals(S);
    parallel_for(S, opt.threads, [&](std::size_t i) {
        vals[i] = correlator_sample(realization_eigensystem(config, L, opt.seed + i), m, n);
    });
    auto [mean, se] = batch_mean_stderr(vals);
    CorrelatorEstimate est;
    est.m = m;
    est.n = n;
    est.mean = mean;
    est.stderr = se;
    est.samples = opt.samples;
    est.L = L;
    est.seed_base = opt.seed;
    return est;
}

std::vector<DynamicalCheck> dynamical_bound_check_all(const EigenSystem& sys, long n,
                                                      const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw ConfigError("time grid is empty");
    std::vector<DynamicalCheck> out(sys.n);
    for (std::size_t j = 0; j < sys.n; ++j)
        out[j].correlator = correlator_sample(sys, sys.first_site + static_cast<long>(j), n);
    for (double t : t_grid) {
        auto amp = evolve(sys, t, n);
        for (std::size_t j = 0; j < sys.n; ++j) {
            double v = std::abs(amp[j]);
            if (v > out[j].max_amplitude) {
                out[j].max_amplitude = v;
                out[j].t_at_max = t;
            }
        }
    }
    for (auto& c : out) c.holds = c.max_amplitude <= c.correlator + 1e-10;
    return out;
}

DynamicalCheck dynamical_bound_check(const EigenSystem& sys, long m, long n, const std::vector<double>& t_grid) {
    if (t_grid.empty()) throw ConfigError("time grid is empty");
    DynamicalCheck c;
    c.correlator = correlator_sample(sys, m, n);
    for (double t : t_grid) {
        std::complex<double> z = 0.0;
        for (std::size_t l = 0; l < sys.n; ++l)
            z += std::polar(sys.v(l, m) * sys.v(l, n), -t * sys.values[l]);
        if (std::abs(z) > c.max_amplitude) {
            c.max_amplitude = std::abs(z);
            c.t_at_max = t;
        }
    }
    c.holds = c.max_amplitude <= c.correlator + 1e-10;
    return c;
}

std::vector<double> default_time_grid(std::uint64_t seed) {
    std::vector<double> t{0.0};
    for (int i = 0; i < 63; ++i) t.push_back(0.1 * std::pow(1e5, i / 62.0));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1e4);
    for (int i = 0; i < 64; ++i) t.push_back(u(rng));
    return t;
}

DecayFit fit_decay(const std::vector<double>& block_distance, const std::vector<double>& value) {
    if (block_distance.size() != value.size()) throw ConfigError("fit_decay: size mismatch");
    std::vector<double> x, y;
    for (std::size_t i = 0; i < value.size(); ++i)
        if (value[i] > 0.0 && std::isfinite(value[i])) {
            x.push_back(block_distance[i]);
            y.push_back(std::log(value[i]));
        }
    std::vector<double> distinct = x;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 4) throw NumericalError("fit_decay needs at least 4 distinct block distances", "{}");
    const double N = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= N;
    my /= N;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    double slope = sxy / sxx, icpt = my - slope * mx;
    double sse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        double r = y[i] - icpt - slope * x[i];
        sse += r * r;
    }
    DecayFit fit;
    fit.points = x.size();
    fit.gamma = -slope;
    fit.C = std::exp(icpt);
    fit.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
    double dof = N - 2;
    double se = dof > 0 ? std::sqrt(sse / dof / sxx) : 0.0;
    double tq = dof > 0 ? boost::math::quantile(boost::math::complement(boost::math::students_t(dof), 0.025)) : 0.0;
    fit.ci_lo = fit.gamma - tq * se;
    fit.ci_hi = fit.gamma + tq * se;
    fit.localizing = fit.gamma > 0 && fit.ci_lo > 0;
    return fit;
}

DecayFit fit_profile(const CorrelatorProfile& prof, int alpha, int edge_blocks) {
    std::vector<double> x, y;
    const long last = prof.first_site + static_cast<long>(prof.rows.size()) - 1;
    const long max_dist = floor_div(last - prof.n, alpha);
    for (const auto& r : prof.rows) {
        if (r.m < prof.n) continue;
        long d = floor_div(r.m - prof.n, alpha);
        if (d > max_dist - edge_blocks) continue;
        x.push_back(static_cast<double>(d));
        y.push_back(r.mean);
    }
    return fit_decay(x, y);
}

DecayProfile eigenfunction_decay_profile(const EigenSystem& sys, std::size_t l) {
    if (l >= sys.n) throw ConfigError("eigen index out of range");
    DecayProfile p;
    const double* v = sys.column(l);
    p.abs_profile.resize(sys.n);
    std::size_t c = 0;
    for (std::size_t i = 0; i < sys.n; ++i) {
        p.abs_profile[i] = std::abs(v[i]);
        if (p.abs_profile[i] > p.abs_profile[c]) c = i;
    }
    p.center = sys.first_site + static_cast<long>(c);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    double N = 0;
    for (std::size_t i = 0; i < sys.n; ++i) {
        if (p.abs_profile[i] < 1e-13) continue;
        double x = std::abs(static_cast<double>(i) - static_cast<double>(c));
        double y = std::log(p.abs_profile[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        N += 1;
    }
    double den = N * sxx - sx * sx;
    p.rate = (N >= 2 && den > 0) ? -(N * sxy - sx * sy) / den : 0.0;
    return p;
}

}  // namespace gam
