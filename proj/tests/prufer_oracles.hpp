#pragma once

// Long double finite-difference references for the phase identities and the Jacobian.

#include "gam/model.hpp"
#include "oracles.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace oracle {

using gam::floor_div;
using gam::floor_mod;

struct Instance {
    gam::ModelConfig cfg;
    gam::Realization real;
    long L = 2;
};

inline Instance random_instance(std::mt19937_64& rng, int alpha, bool with_v0, long L) {
    std::uniform_real_distribution<double> uf(0.5, 2.0), uv(-0.5, 0.5);
    Instance in;
    in.L = L;
    in.cfg.profile.alpha = alpha;
    in.cfg.profile.f.clear();
    for (int i = 0; i < alpha; ++i) in.cfg.profile.f.push_back(uf(rng));
    in.cfg.law = gam::SingleSiteLaw::uniform(-1.0, 1.0);
    if (with_v0) {
        std::vector<double> tab(static_cast<std::size_t>(alpha + 1));
        for (auto& v : tab) v = uv(rng);
        in.cfg.v0 = gam::Background::periodic_table(tab, -3);
    }
    in.real = gam::sample_realization(in.cfg, L, rng());
    return in;
}

inline std::vector<double> box_potential(const Instance& in, const gam::Realization& r) {
    const long a = in.cfg.profile.alpha;
    return gam::build_potential(in.cfg, r, -a * in.L, a * in.L - 1);
}

/// principal-angle difference of (u(n+1), u(n)) between two long double solutions
inline ld phase_diff(const std::vector<ld>& um, const std::vector<ld>& up, std::size_t idx) {
    return angle_diff(um[idx + 1], um[idx], up[idx + 1], up[idx]);
}

/// d phi(n) / d omega_j by central differences of the long double recursion (box starts at -a L).
inline double fd_dphi_domega(const Instance& in, const std::vector<double>& V, double E, long j, long n, ld h) {
    const long a = in.cfg.profile.alpha, L = in.L;
    std::vector<ld> up(V.size() + 2), um(V.size() + 2);
    up[0] = um[0] = 0;
    up[1] = um[1] = 1;
    for (std::size_t s = 0; s < V.size(); ++s) {
        long site = static_cast<long>(s) - a * L;
        ld shift = 0;
        if (floor_div(site, a) == j) shift = h * in.cfg.profile.f[static_cast<std::size_t>(floor_mod(site, a))];
        up[s + 2] = (E - (V[s] + shift)) * up[s + 1] - up[s];
        um[s + 2] = (E - (V[s] - shift)) * um[s + 1] - um[s];
    }
    auto idx = static_cast<std::size_t>(n + a * L + 1);
    return static_cast<double>(phase_diff(um, up, idx) / (2 * h));
}

/// d phi(n) / dE by central differences; the box starts at site -offset.
inline double fd_dphi_dE(const std::vector<double>& V, double E, long offset, long n, ld h) {
    auto up = solve_forward(V, E + h), um = solve_forward(V, E - h);
    auto idx = static_cast<std::size_t>(n + offset + 1);
    return static_cast<double>(phase_diff(um, up, idx) / (2 * h));
}

/// det of d(E_l, theta_{-L}..theta_{L-2}) / d omega by long double finite differences
inline double jacobian_oracle(const Instance& in, std::size_t l) {
    const long a = in.cfg.profile.alpha, L = in.L, nb = 2 * L;
    const ld h = 1e-7L;
    auto V = box_potential(in, in.real);
    Eigen::MatrixXd J(nb, nb);
    for (long j = 0; j < nb; ++j) {
        std::vector<ld> Ep(2);
        std::vector<std::vector<ld>> us(2);
        for (int s = 0; s < 2; ++s) {
            ld sg = s == 0 ? 1 : -1;
            std::vector<ld> Vl(V.begin(), V.end());
            for (long i = 0; i < a; ++i) Vl[static_cast<std::size_t>(a * j + i)] += sg * h * in.cfg.profile.f[static_cast<std::size_t>(i)];
            // Sturm bisection on the long double diagonal
            ld lo = -10, hi = 10;
            for (int it = 0; it < 200; ++it) {
                ld mid = (lo + hi) / 2;
                if (mid == lo || mid == hi) break;
                std::size_t c = 0;
                ld q = 1;
                for (std::size_t i = 0; i < Vl.size(); ++i) {
                    q = Vl[i] - mid - (i == 0 ? 0 : 1 / q);
                    if (q == 0) q = -1e-300L;
                    if (q < 0) ++c;
                }
                (c > l ? hi : lo) = mid;
            }
            Ep[static_cast<std::size_t>(s)] = (lo + hi) / 2;
            std::vector<ld> u(Vl.size() + 2);
            u[0] = 0;
            u[1] = 1;
            for (std::size_t i = 0; i < Vl.size(); ++i) u[i + 2] = (Ep[static_cast<std::size_t>(s)] - Vl[i]) * u[i + 1] - u[i];
            us[static_cast<std::size_t>(s)] = u;
        }
        J(0, j) = static_cast<double>((Ep[0] - Ep[1]) / (2 * h));
        for (long k = -L; k <= L - 2; ++k) {
            auto idx = static_cast<std::size_t>(a * k + a - 1 + a * L + 1);
            J(k + L + 1, j) = static_cast<double>(phase_diff(us[1], us[0], idx) / (2 * h));
        }
    }
    return J.determinant();
}

}  // namespace oracle
