// Acceptance battery: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "gam/correlator.hpp"
#include "gam/errors.hpp"
#include "gam/hamiltonian.hpp"
#include "gam/ksoperator.hpp"
#include "gam/lyapunov.hpp"
#include "gam/model.hpp"
#include "gam/prufer.hpp"
#include "gam/spectrum.hpp"

#include "oracles.hpp"
#include "prufer_oracles.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>
#include <vector>

using namespace gam;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;
};

struct Criterion {
    int id;
    const char* name;
    double budget_s;
    std::function<Outcome()> run;
};

void note(Outcome& o, bool ok, const std::string& what) {
    if (!ok) {
        o.pass = false;
        o.detail += (o.detail.empty() ? "" : "; ") + what;
    }
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

std::vector<double> midpoints(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * (i + 0.5) / n);
    return g;
}

ModelConfig uniform01(int alpha = 1) {
    ModelConfig c;
    c.profile = {alpha, std::vector<double>(static_cast<std::size_t>(alpha), 1.0)};
    c.law = SingleSiteLaw::uniform(0, 1);
    return c;
}

Outcome exceptional_energies() {
    Outcome o;
    auto w0 = verify_identity_power(one_step(0.0, 0.0), 2);
    auto w1 = verify_identity_power(one_step(0.0, 1.0), 3);
    note(o, w0.verdict == IdentityPower::Verdict::minus_identity && w0.deviation < 1e-14, "M0^2 != -I");
    note(o, w1.verdict == IdentityPower::Verdict::plus_identity && w1.deviation < 1e-14, "M1^3 != I");
    double worst_dev = 0, worst_ly = 0;
    for (int N = 2; N <= 12; ++N) {
        // roots of unity: the support is {-2 cos(2 pi j / N)} recomputed here
        std::vector<double> support;
        for (int j = 1; 2 * j < N; ++j) support.push_back(-2 * std::cos(2 * std::numbers::pi * j / N));
        auto lib = exceptional_support(N);
        note(o, lib.size() == support.size(), "support size N=" + std::to_string(N));
        for (std::size_t i = 0; i < std::min(lib.size(), support.size()); ++i)
            note(o, std::abs(lib[i] - support[i]) < 1e-14, "support value N=" + std::to_string(N));
        if (N == 2) support.push_back(0.0);
        for (double v : support) {
            auto ip = verify_identity_power(one_step(0.0, v), N);
            bool identity = ip.verdict == IdentityPower::Verdict::plus_identity ||
                            (N == 2 && ip.verdict == IdentityPower::Verdict::minus_identity);
            worst_dev = std::max(worst_dev, ip.deviation);
            note(o, identity && ip.deviation < 1e-10, "M^N != I at N=" + std::to_string(N));
        }
        ModelConfig cfg;
        const int alpha = N == 2 ? 2 : N;
        cfg.profile = {alpha, std::vector<double>(static_cast<std::size_t>(alpha), 1.0)};
        cfg.law = exceptional_law(N, N == 2);
        auto ly = lyapunov_exponent(cfg, 0.0, 1000000 / alpha, 7);
        worst_ly = std::max(worst_ly, std::abs(ly.value));
        note(o, ly.value < 1e-3, "L(0) too large at N=" + std::to_string(N));
    }
    if (o.pass) o.detail = fmt("max |M^N - I| = %.2e, max |L(0)| = %.2e", worst_dev, worst_ly);
    return o;
}

Outcome constant_potential_lyapunov() {
    Outcome o;
    const double c = 0.5;
    ModelConfig cfg;
    cfg.law = SingleSiteLaw::delta(c);
    auto [lo, hi] = cfg.sigma0();
    double worst = 0;
    for (double E : midpoints(lo - 1.0, hi + 1.0, 32)) {
        double x = std::abs(E - c) / 2;
        double expect = x > 1 ? std::log(x + std::sqrt(x * x - 1)) : 0.0;
        auto est = lyapunov_exponent(cfg, E, 200000, 3);
        double err = std::abs(est.value - expect);
        worst = std::max(worst, err);
        note(o, err < 3 * est.stderr + 1e-3, fmt("E=%.4f: got %.6f want %.6f", E, est.value, expect));
    }
    if (o.pass) o.detail = fmt("max deviation %.2e over 32 energies", worst);
    return o;
}

Outcome prufer_identities() {
    using namespace oracle;
    Outcome o;
    std::mt19937_64 rng(4242);
    const ld h = 1e-6L;
    double worst_w = 0, worst_E = 0;
    for (int inst = 0; inst < 100; ++inst) {
        int alpha = 1 + inst % 3;
        auto in = random_instance(rng, alpha, (inst / 3) % 2 == 1, 2);
        const long a = alpha, L = in.L;
        auto V = box_potential(in, in.real);
        auto ev = eigenvalues_tridiagonal(V);
        std::uniform_int_distribution<std::size_t> pick(0, ev.size() - 1);
        double E = ev[pick(rng)] + 0.05;
        auto t = prufer_forward_potential(V, alpha, L, E);
        std::uniform_int_distribution<long> pn(-a * L, a * L - 1);
        long n = pn(rng);
        long jn = floor_div(n, a);
        std::uniform_int_distribution<long> pj(std::max(-L, jn - 2), jn);
        long j = pj(rng);
        double fd = fd_dphi_domega(in, V, E, j, n, h);
        double rw = std::abs(dphi_domega(t, in.cfg.profile, j, n) - fd) / std::abs(fd);
        double fdE = fd_dphi_dE(V, E, a * L, n, h);
        double rE = std::abs(dphi_dE(t, n) - fdE) / std::abs(fdE);
        worst_w = std::max(worst_w, rw);
        worst_E = std::max(worst_E, rE);
    }
    note(o, worst_w < 1e-6, fmt("d phi / d omega rel error %.2e", worst_w));
    note(o, worst_E < 1e-6, fmt("d phi / dE rel error %.2e", worst_E));
    if (o.pass) o.detail = fmt("100 instances, rel errors %.2e (omega), %.2e (E)", worst_w, worst_E);
    return o;
}

Outcome jacobian_determinant() {
    using namespace oracle;
    Outcome o;
    std::mt19937_64 rng(777);
    double worst = 0;
    int negative = 0, total = 0;
    for (int alpha : {1, 2}) {
        for (int inst = 0; inst < 20; ++inst) {
            auto in = random_instance(rng, alpha, inst % 2 == 1, 2);
            std::size_t l = static_cast<std::size_t>(rng() % static_cast<std::uint64_t>(4 * alpha));
            double cf = jacobian_det_closed_form(in.cfg, in.real, in.L, l);
            double fd = jacobian_oracle(in, l);
            worst = std::max(worst, std::abs(cf - fd) / std::abs(fd));
            negative += cf < 0;
            ++total;
        }
    }
    note(o, worst < 1e-4, fmt("rel error %.2e", worst));
    note(o, negative == total, fmt("%.0f of %.0f determinants negative", negative, total));
    if (o.pass) o.detail = fmt("%.0f instances, rel error %.2e, all negative", total, worst);
    return o;
}

Outcome correlator_decay() {
    Outcome o;
    auto cfg = uniform01(2);
    const long L = 30;
    const auto t_grid = default_time_grid(1);
    std::atomic<long> violations{0}, checked{0};
    auto prof = rho_hat_profile(cfg, L, 0, {2000, 1, 4}, [&](std::size_t, const EigenSystem& sys) {
        for (const auto& c : dynamical_bound_check_all(sys, 0, t_grid)) {
            violations += !c.holds;
            checked += 1;
        }
    });
    // ordinary least squares of log rho against floor(m / 2), computed independently of the library fit
    std::vector<double> x, y;
    const long last = prof.first_site + static_cast<long>(prof.rows.size()) - 1;
    const long max_dist = floor_div(last, 2) - 2;
    for (const auto& r : prof.rows) {
        if (r.m < 0 || floor_div(r.m, 2) > max_dist) continue;
        x.push_back(static_cast<double>(floor_div(r.m, 2)));
        y.push_back(std::log(r.mean));
    }
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) mx += x[i] / n, my += y[i] / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    double slope = sxy / sxx, sse = syy - slope * sxy;
    double gamma = -slope, r2 = 1 - sse / syy;
    double se = std::sqrt(sse / (n - 2) / sxx);
    double tq = boost::math::quantile(boost::math::students_t(n - 2), 0.975);
    double ci_lo = gamma - tq * se, ci_hi = gamma + tq * se;
    auto lib = fit_profile(prof, 2);
    note(o, gamma > 0 && ci_lo > 0, fmt("gamma %.4f CI [%.4f, %.4f]", gamma, ci_lo, ci_hi));
    note(o, r2 > 0.9, fmt("R^2 = %.4f", r2));
    note(o, std::abs(lib.gamma - gamma) < 1e-9 && std::abs(lib.r2 - r2) < 1e-9, "library fit disagrees with OLS");
    note(o, violations == 0, fmt("%.0f of %.0f dynamical checks violated", violations.load(), checked.load()));
    if (o.pass)
        o.detail = fmt("gamma %.4f, CI lower %.4f, ", gamma, ci_lo) + fmt("R^2 %.4f, %.0f dynamical checks hold", r2,
                                                                         static_cast<double>(checked.load()));
    return o;
}

struct ScanCache {
    bool done = false;
    ContractionScan scan;
};
ScanCache g_scan;

const ContractionScan& scan_uniform01() {
    if (!g_scan.done) {
        auto cfg = uniform01();
        auto [lo, hi] = cfg.sigma0();
        GridOptions opt;
        opt.n = 400;
        opt.pi_symmetry = true;
        g_scan.scan = contraction_scan(cfg, midpoints(lo, hi, 64), opt);
        g_scan.done = true;
    }
    return g_scan.scan;
}

Outcome operator_contraction() {
    Outcome o;
    auto cfg = uniform01();
    const auto& scan = scan_uniform01();
    double worst_col = 0;
    for (double E : {-2.5, 0.5, 2.5}) {
        GridOptions opt;
        opt.n = 400;
        auto T = build_kernel_grid(OperatorTag::T, E, cfg, opt);
        auto c = norm_11_check(T);
        worst_col = std::max({worst_col, std::abs(c.max - 1), std::abs(c.min - 1)});
    }
    note(o, worst_col < 2e-2, fmt("column sums off by %.2e", worst_col));
    bool all_below = true;
    for (double v : scan.norm22) all_below = all_below && v < 1.0;
    note(o, all_below && scan.norm22.size() == 64, fmt("q_hat = %.10f", scan.q_hat));

    GridOptions full;
    full.n = 400;
    auto ctx = make_kernel_context(cfg, scan.E_at_max, 1);
    auto tt = build_kernel_grid(KernelKind::t_tilde, ctx, full);
    double torus = opnorm_22(tt).value;
    double folded = opnorm_22(build_kernel_grid(OperatorTag::L0, scan.E_at_max, cfg, full)).value;
    auto t1 = t1_realline(scan.E_at_max, cfg.law, 200, 0.0, full);
    note(o, std::abs(torus - folded) < 1e-2, fmt("folded %.6f vs torus %.6f", folded, torus));
    note(o, std::abs(t1.norm - torus) < 1e-2, fmt("real line %.6f vs torus %.6f", t1.norm, torus));
    if (o.pass)
        o.detail = fmt("q_hat %.10f, fold gap %.1e, ", scan.q_hat, std::abs(torus - folded)) +
                   fmt("real-line gap %.1e, column-sum error %.1e", std::abs(t1.norm - torus), worst_col);
    return o;
}

Outcome operator_chain() {
    Outcome o;
    auto cfg = uniform01();
    const double q = scan_uniform01().q_hat;
    const long L = 8;
    std::vector<long> ms;
    for (long m = 0; m < L; ++m) ms.push_back(m);
    ChainOptions opt;
    opt.grid.n = 200;
    opt.mode = BoundMode::bound;
    auto bd = integrated_correlator_bound(cfg, L, ms, opt, 12, 1);
    double worst_ratio = 0;
    for (long k0 = 1; k0 <= 6; ++k0) {
        double r = bd.value[static_cast<std::size_t>(k0 + 1)] / bd.value[static_cast<std::size_t>(k0)];
        worst_ratio = std::max(worst_ratio, r);
        note(o, r <= q + 2e-2, fmt("ratio at k0=%.0f is %.4f > q_hat + 0.02", k0, r));
    }
    auto mc = rho_hat_profile(cfg, L, 0, {4000, 11, 1});
    double worst_excess = -1e9;
    for (std::size_t k = 0; k < ms.size(); ++k) {
        const auto& row = mc.rows[static_cast<std::size_t>(ms[k] - mc.first_site)];
        worst_excess = std::max(worst_excess, (row.mean - bd.value[k]) / row.stderr);
        note(o, row.mean <= bd.value[k] + 3 * row.stderr, fmt("m=%.0f: MC %.4f above bound %.4f", ms[k], row.mean, bd.value[k]));
    }
    if (o.pass) o.detail = fmt("max ratio %.4f vs q_hat %.4f, max (MC - bound)/stderr %.1f", worst_ratio, q, worst_excess);
    return o;
}

double hausdorff_to(const IntervalUnion& s, double a, double b) { return hausdorff(s, IntervalUnion{{{a, b}}}); }

Outcome almost_sure_spectrum_check() {
    Outcome o;
    auto cfg = uniform01();
    SpectrumOptions opt;
    opt.max_period = 4;
    opt.step = 1e-3;
    auto res = almost_sure_spectrum(cfg, cfg.law.support_sample(17), opt);
    double d_u = hausdorff_to(res.sigma, -2, 3);
    note(o, d_u < 0.05, fmt("uniform: Hausdorff distance %.4f", d_u));

    ModelConfig d;
    d.law = SingleSiteLaw::delta(0.0);
    auto rd = almost_sure_spectrum(d, {0.0}, opt);
    double d_0 = hausdorff_to(rd.sigma, -2, 2);
    note(o, d_0 <= opt.step, fmt("delta: Hausdorff distance %.4f", d_0));

    std::vector<double> ev;
    for (std::uint64_t s = 0; s < 5; ++s) {
        auto r = sample_realization(cfg, 200, s);
        auto e = eigenvalues_tridiagonal(assemble_finite_box(cfg, r, 200).diag);
        ev.insert(ev.end(), e.begin(), e.end());
    }
    double frac = containment_fraction(res.sigma, ev, 2 * opt.step);
    note(o, frac >= 0.99, fmt("containment %.4f", frac));
    if (o.pass) o.detail = fmt("uniform %.4f, delta %.4f, containment %.4f", d_u, d_0, frac);
    return o;
}

Outcome furstenberg_hypotheses() {
    Outcome o;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> support(5);
    for (auto& v : support) v = u(rng);
    std::sort(support.begin(), support.end());
    ModelConfig cfg;
    cfg.profile = {2, {1.0, 1.0}};
    cfg.law = SingleSiteLaw::atomic(support, std::vector<double>(5, 0.2));
    auto [lo, hi] = cfg.sigma0();
    double min_z = 1e9;
    for (double E : midpoints(lo, hi, 16)) {
        auto rep = furstenberg_check(support, E, cfg.profile, {});
        note(o, rep.noncompact, fmt("E=%.4f: not noncompact", E));
        note(o, !rep.invariant_set.has_value() && !rep.degenerate && !rep.inconclusive, fmt("E=%.4f: invariant set found", E));
        auto ly = lyapunov_exponent(cfg, E, 50000, 13);
        min_z = std::min(min_z, ly.value / ly.stderr);
        note(o, ly.value - 1.96 * ly.stderr > 0, fmt("E=%.4f: L = %.4f +- %.4f", E, ly.value, ly.stderr));
    }
    if (o.pass) o.detail = fmt("16 energies, min L/stderr %.1f", min_z);
    return o;
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "exceptional energies", 30, exceptional_energies},
        {2, "constant potential Lyapunov exponent", 60, constant_potential_lyapunov},
        {3, "Prufer phase derivatives", 10, prufer_identities},
        {4, "Jacobian determinant", 30, jacobian_determinant},
        {5, "correlator decay", 300, correlator_decay},
        {6, "operator contraction", 180, operator_contraction},
        {7, "operator chain", 120, operator_chain},
        {8, "almost sure spectrum", 120, almost_sure_spectrum_check},
        {9, "Furstenberg hypotheses", 120, furstenberg_hypotheses},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("exception: ") + e.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (secs > c.budget_s) note(o, false, fmt("took %.1f s, budget %.0f s", secs, c.budget_s));
        failed += !o.pass;
        std::printf("%s criterion %d (%s) [%.1f s]: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.c_str());
        std::fflush(stdout);
    }
    return failed == 0 ? 0 : 1;
}
