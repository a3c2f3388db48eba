#include "gam/prufer.hpp"

#include "gam/errors.hpp"
#include "gam/hamiltonian.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace gam {

namespace {
constexpr double pi = std::numbers::pi;
constexpr double kRescale = 1e150;
constexpr int kRescaleExp = 498;  // 2^498 ~ 8e149

double log_sum_exp(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    double m = std::max(a, b);
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}
}  // namespace

int winding_B(int alpha) {
    if (alpha < 1) throw ConfigError("alpha must be positive");
    return alpha == 1 ? 1 : alpha + 1;
}

double step_increment(double u_prev, double u_here, double u_next) {
    // angle from (-u_prev, u_here) to (u_next, u_here)
    double cross = -u_here * (u_prev + u_next);
    double dot = u_here * u_here - u_prev * u_next;
    return pi / 2 + std::atan2(cross, dot);
}

double PruferTrajectory::u_at(long n) const { return u.at(static_cast<std::size_t>(n - n_first)); }

double PruferTrajectory::log_R(long n) const {
    auto i = static_cast<std::size_t>(n - n_first);
    return std::log(R.at(i)) + R_exp.at(i) * std::numbers::ln2;
}

double PruferTrajectory::u2_over_R2(long a, long b) const {
    auto ia = static_cast<std::size_t>(a - n_first);
    auto ib = static_cast<std::size_t>(b - n_first);
    double r = u.at(ia) / R.at(ib);
    return std::ldexp(r * r, 2 * (u_exp.at(ia) - R_exp.at(ib)));
}

std::vector<double> PruferTrajectory::block_end_phases() const {
    std::vector<double> out;
    for (long k = -L; k <= L - 1; ++k) out.push_back(phi_at(alpha * k + alpha - 1));
    return out;
}

PruferTrajectory prufer_forward_potential(const std::vector<double>& V, int alpha, long L, double E) {
    if (!std::isfinite(E)) throw std::invalid_argument("energy must be finite");
    const long nbox = 2L * alpha * L;
    if (static_cast<long>(V.size()) != nbox) throw std::invalid_argument("potential does not cover the box");
    PruferTrajectory t;
    t.alpha = alpha;
    t.L = L;
    t.E = E;
    t.V = V;
    t.n_first = -static_cast<long>(alpha) * L - 1;
    const std::size_t nsites = static_cast<std::size_t>(nbox + 1);  // n_first .. alpha L - 1
    t.u.resize(nsites + 1);
    t.u_exp.assign(nsites + 1, 0);
    t.R.resize(nsites);
    t.R_exp.assign(nsites, 0);
    t.phi.resize(nsites);

    double a = 0.0, b = 1.0;  // u(n-1), u(n) at the working exponent
    int e = 0;
    t.u[0] = 0.0;
    t.u[1] = 1.0;
    t.R[0] = 1.0;
    t.phi[0] = 0.0;
    for (std::size_t i = 1; i < nsites; ++i) {
        double c = (E - V[i - 1]) * b - a;
        t.phi[i] = t.phi[i - 1] + step_increment(a, b, c);
        t.R[i] = std::hypot(b, c);
        t.R_exp[i] = e;
        a = b;
        b = c;
        if (std::abs(b) > kRescale || std::abs(a) > kRescale) {
            a = std::ldexp(a, -kRescaleExp);
            b = std::ldexp(b, -kRescaleExp);
            e += kRescaleExp;
        }
        t.u[i + 1] = b;
        t.u_exp[i + 1] = e;
    }
    return t;
}

PruferTrajectory prufer_forward(const ModelConfig& config, const Realization& real, double E, long L) {
    const long a = config.profile.alpha;
    auto V = build_potential(config, real, -a * L, a * L - 1);
    return prufer_forward_potential(V, config.profile.alpha, L, E);
}

namespace {

struct Vec2 {
    double x, y;
};

double angle_between(Vec2 a, Vec2 b) { return std::atan2(a.x * b.y - a.y * b.x, a.x * b.x + a.y * b.y); }

Vec2 block_apply(const std::vector<double>& X, double g, Vec2 w) {
    // w = (u(n), u(n-1)); each factor maps it to (g X u(n) - u(n-1), u(n))
    for (double x : X) w = {g * x * w.x - w.y, w.x};
    return w;
}

double track(const std::vector<double>& X, Vec2 w, double g0, Vec2 v0, double g1, Vec2 v1, int depth,
             int& substeps) {
    double d = angle_between(v0, v1);
    double gm = 0.5 * (g0 + g1);
    Vec2 vm = block_apply(X, gm, w);
    double d1 = angle_between(v0, vm);
    double d2 = angle_between(vm, v1);
    if (std::abs(d1) < pi / 4 && std::abs(d2) < pi / 4 && std::abs(d1 + d2 - d) < 1e-12 && depth >= 2) {
        ++substeps;
        return d;
    }
    if (depth > 60) {
        nlohmann::json diag;
        diag["error"] = "homotopy subdivision exhausted";
        diag["X"] = X;
        diag["g"] = {g0, g1};
        throw NumericalError("phase lift did not resolve", diag.dump());
    }
    return track(X, w, g0, v0, gm, vm, depth + 1, substeps) + track(X, w, gm, vm, g1, v1, depth + 1, substeps);
}

}  // namespace

LiftResult lift_phase(const std::vector<double>& X, double u_here, double u_prev, double start_phase, double s) {
    s = std::clamp(s, 0.0, 1.0);
    const double alpha = static_cast<double>(X.size());
    LiftResult res;
    res.phase = start_phase + std::min(2.0 * s, 1.0) * alpha * pi / 2;
    if (s <= 0.5) return res;
    double g = 2.0 * s - 1.0;
    Vec2 w{u_here, u_prev};
    Vec2 v0 = block_apply(X, 0.0, w);
    Vec2 v1 = block_apply(X, g, w);
    res.phase += track(X, w, 0.0, v0, g, v1, 0, res.substeps);
    return res;
}

double LocalSolution::weighted_mass(const BlockProfile& profile) const {
    double m = 0.0;
    for (int i = 0; i < alpha; ++i) {
        double v = u[static_cast<std::size_t>(i + 1)];
        m += profile.f[static_cast<std::size_t>(i)] * v * v;
    }
    return m;
}

LocalSolution local_solution(LocalSolution::Direction direction, const BlockProfile& profile,
                             const std::vector<double>& v0_block, double theta, double lambda, double E, long k) {
    const int a = profile.alpha;
    auto V = block_potential(profile, v0_block, lambda);
    LocalSolution s;
    s.direction = direction;
    s.k = k;
    s.alpha = a;
    s.theta = theta;
    s.lambda = lambda;
    s.E = E;
    const std::size_t na = static_cast<std::size_t>(a);
    s.u.assign(na + 2, 0.0);
    s.R.assign(na + 1, 0.0);
    s.phi.assign(na + 1, 0.0);
    if (direction == LocalSolution::Direction::left) {
        s.u[0] = std::sin(theta);
        s.u[1] = std::cos(theta);
        s.phi[0] = theta;
        s.R[0] = 1.0;
        for (std::size_t i = 0; i < na; ++i) {
            s.u[i + 2] = (E - V[i]) * s.u[i + 1] - s.u[i];
            s.phi[i + 1] = s.phi[i] + step_increment(s.u[i], s.u[i + 1], s.u[i + 2]);
            s.R[i + 1] = std::hypot(s.u[i + 1], s.u[i + 2]);
        }
    } else {
        s.u[na] = std::sin(theta);
        s.u[na + 1] = std::cos(theta);
        s.phi[na] = theta;
        s.R[na] = 1.0;
        for (std::size_t i = na; i-- > 0;) {
            // site alpha k + i sits at index i + 1
            s.u[i] = (E - V[i]) * s.u[i + 1] - s.u[i + 2];
            s.phi[i] = s.phi[i + 1] - step_increment(s.u[i], s.u[i + 1], s.u[i + 2]);
            s.R[i] = std::hypot(s.u[i], s.u[i + 1]);
        }
    }
    return s;
}

BlockSweep sweep_left(const BlockProfile& profile, const double* v0_block, double theta, double lambda, double E) {
    BlockSweep r;
    double a = std::sin(theta), b = std::cos(theta);
    r.phi = theta;
    for (int i = 0; i < profile.alpha; ++i) {
        double f = profile.f[static_cast<std::size_t>(i)];
        double c = (E - lambda * f - (v0_block ? v0_block[i] : 0.0)) * b - a;
        r.phi += step_increment(a, b, c);
        r.mass += f * b * b;
        a = b;
        b = c;
    }
    r.R2 = a * a + b * b;
    return r;
}

BlockSweep sweep_right(const BlockProfile& profile, const double* v0_block, double theta, double lambda, double E) {
    BlockSweep r;
    double c = std::cos(theta), b = std::sin(theta);  // u(n+1), u(n)
    r.phi = theta;
    for (int i = profile.alpha - 1; i >= 0; --i) {
        double f = profile.f[static_cast<std::size_t>(i)];
        double a = (E - lambda * f - (v0_block ? v0_block[i] : 0.0)) * b - c;
        r.phi -= step_increment(a, b, c);
        r.mass += f * b * b;
        c = b;
        b = a;
    }
    r.R2 = b * b + c * c;
    return r;
}

namespace {

template <class F>
double bisect_monotone(F&& g, double lo, double hi, double target, bool increasing) {
    for (int it = 0; it < 200 && hi - lo > 1e-11 * std::max(1.0, std::max(std::abs(lo), std::abs(hi))) * 0.1;
         ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        bool below = g(mid) < target;
        if (below == increasing)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> lambda_for_left_phase(double target, double y, double E, const BlockProfile& profile,
                                            const double* v0_block, LambdaWindow window) {
    auto g = [&](double lam) { return sweep_left(profile, v0_block, y, lam, E).phi; };
    double glo = g(window.lo), ghi = g(window.hi);
    if (target < glo || target > ghi) return std::nullopt;
    return bisect_monotone(g, window.lo, window.hi, target, true);
}

std::optional<double> lambda_for_right_phase(double target, double y, double E, const BlockProfile& profile,
                                             const double* v0_block, LambdaWindow window) {
    auto g = [&](double lam) { return sweep_right(profile, v0_block, y, lam, E).phi; };
    double glo = g(window.lo), ghi = g(window.hi);
    if (target > glo || target < ghi) return std::nullopt;
    return bisect_monotone(g, window.lo, window.hi, target, false);
}

std::optional<double> coupling_lambda(double x, double y, double E, const BlockProfile& profile,
                                      const std::vector<double>& v0_block, LambdaWindow window, int B) {
    const double* v0 = v0_block.empty() ? nullptr : v0_block.data();
    const double period = 2.0 * pi * B;
    double glo = sweep_left(profile, v0, y, window.lo, E).phi;
    double ghi = sweep_left(profile, v0, y, window.hi, E).phi;
    double n = std::ceil((glo - x) / period);
    double target = x + n * period;
    if (target > ghi) return std::nullopt;
    return lambda_for_left_phase(target, y, E, profile, v0, window);
}

std::optional<double> coupling_lambda_alpha1(double x, double y, double E, double f0, double v0,
                                             LambdaWindow window) {
    double sx = std::sin(x), cy = std::cos(y);
    if (sx == 0.0 || cy == 0.0 || (sx > 0) != (cy > 0)) return std::nullopt;
    double lam = (E - v0 - std::tan(y) - std::cos(x) / sx) / f0;
    if (lam < window.lo || lam > window.hi) return std::nullopt;
    return lam;
}

double dphi_domega(const PruferTrajectory& traj, const BlockProfile& profile, long j, long n) {
    const long a = traj.alpha;
    const long jn = floor_div(n, a);
    if (j > jn) throw std::invalid_argument("dphi_domega needs j <= floor(n / alpha)");
    if (j < -traj.L) throw std::invalid_argument("block outside the box");
    long last = (j < jn) ? a - 1 : n - a * j;
    double s = 0.0;
    for (long i = 0; i <= last; ++i) s += profile.f[static_cast<std::size_t>(i)] * traj.u2_over_R2(a * j + i, n);
    return s;
}

double dphi_dE(const PruferTrajectory& traj, long n) {
    double s = 0.0;
    for (long m = -traj.alpha * traj.L; m <= n; ++m) s += traj.u2_over_R2(m, n);
    return -s;
}

double jacobian_det_from_trajectory(const PruferTrajectory& traj, const BlockProfile& profile) {
    const long a = traj.alpha, L = traj.L;
    auto log_u2 = [&](long n) {
        auto i = static_cast<std::size_t>(n - traj.n_first);
        double v = traj.u[i];
        return v == 0.0 ? -INFINITY : 2.0 * (std::log(std::abs(v)) + traj.u_exp[i] * std::numbers::ln2);
    };
    double log_det = 0.0;
    for (long j = -L; j <= L - 1; ++j) {
        double lm = -INFINITY;
        for (long i = 0; i < a; ++i)
            lm = log_sum_exp(lm, std::log(profile.f[static_cast<std::size_t>(i)]) + log_u2(a * j + i));
        log_det += lm;
    }
    for (long k = -L; k <= L - 2; ++k) log_det -= 2.0 * traj.log_R(a * k + a - 1);
    double ls = -INFINITY;
    for (long n = -a * L; n <= a * L - 1; ++n) ls = log_sum_exp(ls, log_u2(n));
    log_det -= ls;
    return -std::exp(log_det);
}

double jacobian_det_closed_form(const ModelConfig& config, const Realization& real, long L, std::size_t l) {
    auto box = assemble_finite_box(config, real, L);
    auto ev = eigenvalues_tridiagonal(box.diag);
    if (l >= ev.size()) throw std::out_of_range("eigen index out of range");
    auto traj = prufer_forward_potential(box.diag, config.profile.alpha, L, ev[l]);
    return jacobian_det_from_trajectory(traj, config.profile);
}

double jacobian_det_fd(const ModelConfig& config, const Realization& real, long L, std::size_t l, double h) {
    const long a = config.profile.alpha;
    const long nb = 2 * L;
    Eigen::MatrixXd J(nb, nb);
    for (long j = 0; j < nb; ++j) {
        std::vector<double> col_p, col_m;
        for (int sgn : {1, -1}) {
            Realization r = real;
            r.omega[static_cast<std::size_t>(j)] += sgn * h;
            auto V = build_potential(config, r, -a * L, a * L - 1);
            double E = eigenvalues_tridiagonal(V).at(l);
            auto traj = prufer_forward_potential(V, config.profile.alpha, L, E);
            auto th = traj.block_end_phases();
            std::vector<double> col{E};
            col.insert(col.end(), th.begin(), th.end() - 1);
            (sgn > 0 ? col_p : col_m) = col;
        }
        for (long i = 0; i < nb; ++i)
            J(i, j) = (col_p[static_cast<std::size_t>(i)] - col_m[static_cast<std::size_t>(i)]) / (2 * h);
    }
    return J.determinant();
}

double winding_sweep(const BlockProfile& profile, const std::vector<double>& v0_block, LambdaWindow window,
                     double e_lo, double e_hi, int samples, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ue(e_lo, e_hi), ul(window.lo, window.hi), ut(0.0, 2 * pi);
    const double* v0 = v0_block.empty() ? nullptr : v0_block.data();
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        double E = ue(rng), lam = ul(rng), th = ut(rng);
        double inc = sweep_left(profile, v0, th, lam, E).phi - th - profile.alpha * pi / 2;
        worst = std::max(worst, std::abs(inc));
    }
    return worst;
}

int validated_B(const BlockProfile& profile, const std::vector<double>& v0_block, LambdaWindow window, double e_lo,
                double e_hi, int samples, std::uint64_t seed) {
    int B = winding_B(profile.alpha);
    double w = winding_sweep(profile, v0_block, window, e_lo, e_hi, samples, seed);
    while (w >= pi * B) B *= 2;
    return B;
}

}  // namespace gam
