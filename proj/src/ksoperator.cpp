#include "gam/ksoperator.hpp"

#include "gam/errors.hpp"
#include "gam/parallel.hpp"
#include "gam/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <stdexcept>

namespace gam {

namespace {
constexpr double pi = std::numbers::pi;

const double* v0_ptr(const KernelContext& c) { return c.v0_block.empty() ? nullptr : c.v0_block.data(); }
double v0_at(const KernelContext& c, int i) { return c.v0_block.empty() ? 0.0 : c.v0_block[static_cast<std::size_t>(i)]; }
bool single_site(const KernelContext& c) { return c.profile.alpha == 1 && c.closed_form; }

struct PhaseEval {
    double phi, dphi_dlam, R2;
};

/// Lifted output phase as a function of lambda; dphi/din = 1 / R2.
PhaseEval out_phase(KernelKind kind, const KernelContext& c, double in, double lam) {
    if (is_left_kind(kind)) {
        auto s = sweep_left(c.profile, v0_ptr(c), in, lam, c.E);
        return {s.phi, s.mass / s.R2, s.R2};
    }
    auto s = sweep_right(c.profile, v0_ptr(c), in, lam, c.E);
    return {s.phi, -s.mass / s.R2, s.R2};
}

/// Lambda in [a, b] at which the output phase equals `target`.
double invert_phase(KernelKind kind, const KernelContext& c, double in, double target, double a, double b) {
    if (single_site(c)) {
        double X0 = c.E - v0_at(c, 0);
        double cot_t = std::cos(target) / std::sin(target);
        double lam = is_left_kind(kind) ? (X0 - std::tan(in) - cot_t) / c.profile.f[0]
                                        : (X0 - std::cos(in) / std::sin(in) - std::tan(target)) / c.profile.f[0];
        return std::clamp(lam, a, b);
    }
    const double s = is_left_kind(kind) ? 1.0 : -1.0;
    double lo = a, hi = b, lam = 0.5 * (a + b);
    const double scale = 1.0 + std::abs(a) + std::abs(b);
    for (int it = 0; it < 100; ++it) {
        auto ev = out_phase(kind, c, in, lam);
        double g = s * (ev.phi - target);
        if (g > 0)
            hi = lam;
        else
            lo = lam;
        if (std::abs(g) < 1e-15 * (1.0 + std::abs(target)) || hi - lo < 1e-15 * scale) break;
        double next = lam - g / (s * ev.dphi_dlam);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - lam) < 1e-16 * scale) break;
        lam = next;
    }
    return lam;
}

/// Site factor times the amplitude normalization, per unit lambda (the density excluded).
double site_weight(KernelKind kind, const KernelContext& c, double in, double lam, const SiteFactor& sf) {
    if (kind == KernelKind::t_left || kind == KernelKind::t_right) return 1.0;
    const int a = c.profile.alpha;
    thread_local std::vector<double> u;
    u.assign(static_cast<std::size_t>(a + 2), 0.0);
    auto X = [&](int i) { return c.E - lam * c.profile.f[static_cast<std::size_t>(i)] - v0_at(c, i); };
    auto amp = [&](int s) { return std::hypot(u[static_cast<std::size_t>(s + 1)], u[static_cast<std::size_t>(s + 2)]); };
    auto fac = [&](int s) { return sf.bound ? amp(s) : std::abs(u[static_cast<std::size_t>(s + 1)]); };
    if (is_left_kind(kind)) {
        u[0] = std::sin(in);
        u[1] = std::cos(in);
        for (int i = 0; i < a; ++i)
            u[static_cast<std::size_t>(i + 2)] = X(i) * u[static_cast<std::size_t>(i + 1)] - u[static_cast<std::size_t>(i)];
        double R_end = amp(a - 1);
        if (kind == KernelKind::site_left) return fac(sf.site) / R_end;
        return fac(sf.site) * fac(sf.site2) / (R_end * R_end);
    }
    u[static_cast<std::size_t>(a)] = std::sin(in);
    u[static_cast<std::size_t>(a + 1)] = std::cos(in);
    for (int i = a - 1; i >= 0; --i)
        u[static_cast<std::size_t>(i)] = X(i) * u[static_cast<std::size_t>(i + 1)] - u[static_cast<std::size_t>(i + 2)];
    double R0 = std::hypot(u[0], u[1]);
    if (kind == KernelKind::t_tilde) return 1.0 / R0;
    return fac(sf.site) / R0;
}

/// asinh(A) - asinh(B) without cancellation for large arguments of equal sign.
double asinh_diff(double A, double B) {
    if (A > 0 && B > 0) {
        double hA = std::hypot(A, 1.0), hB = std::hypot(B, 1.0);
        return std::log1p((A - B) * (1.0 + (A + B) / (hA + hB)) / (B + hB));
    }
    if (A < 0 && B < 0) return -asinh_diff(-A, -B);
    return std::asinh(A) - std::asinh(B);
}

template <class F>
double adaptive_gauss(F&& f, double a, double b, double tol, int depth) {
    const auto& g = gauss_rule<8>();
    auto panel = [&](double lo, double hi) {
        double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo), s = 0.0;
        for (std::size_t i = 0; i < g.x.size(); ++i) s += g.w[i] * f(c + r * g.x[i]);
        return s * r;
    };
    double whole = panel(a, b), m = 0.5 * (a + b);
    double halves = panel(a, m) + panel(m, b);
    if (std::abs(whole - halves) <= tol || depth <= 0) return halves;
    return adaptive_gauss(f, a, m, 0.5 * tol, depth - 1) + adaptive_gauss(f, m, b, 0.5 * tol, depth - 1);
}

/// int_a^b r(lambda) w(lambda) dlambda.
double integrate_rw(KernelKind kind, const KernelContext& c, double in, double a, double b, const SiteFactor& sf) {
    if (!(b > a)) return 0.0;
    if (kind == KernelKind::t_left || kind == KernelKind::t_right) return c.law.cdf(b) - c.law.cdf(a);
    const auto& br = c.law.breaks;
    double total = 0.0;
    for (std::size_t i = 0; i < c.law.heights.size(); ++i) {
        double hgt = c.law.heights[i];
        if (hgt <= 0.0) continue;
        double lo = std::max(a, br[i]), hi = std::min(b, br[i + 1]);
        if (!(hi > lo)) continue;
        if (kind == KernelKind::t_tilde && single_site(c)) {
            double f0 = c.profile.f[0], X0 = c.E - v0_at(c, 0);
            double sr = std::sin(in), cot = std::cos(in) / sr;
            total += hgt * asinh_diff(X0 - f0 * lo - cot, X0 - f0 * hi - cot) / (f0 * std::abs(sr));
        } else {
            auto w = [&](double lam) { return site_weight(kind, c, in, lam, sf); };
            total += hgt * adaptive_gauss(w, lo, hi, 1e-13 * (hi - lo), 12);
        }
    }
    return total;
}

/// Density breakpoints where r jumps, clipped to the window.
std::vector<double> jump_points(const KernelContext& c) {
    std::vector<double> out;
    const auto& br = c.law.breaks;
    const auto& ht = c.law.heights;
    for (std::size_t i = 0; i < br.size(); ++i) {
        double left = i == 0 ? 0.0 : ht[i - 1];
        double right = i < ht.size() ? ht[i] : 0.0;
        if (left != right && br[i] >= c.window.lo && br[i] <= c.window.hi) out.push_back(br[i]);
    }
    return out;
}

/// Input angles in (ya, yb) where the output phase at fixed lambda hits a multiple of h.
void phase_kinks(KernelKind kind, const KernelContext& c, double lam, double ya, double yb, double h,
                 std::vector<double>& out) {
    double ga = out_phase(kind, c, ya, lam).phi, gb = out_phase(kind, c, yb, lam).phi;
    for (double q = std::ceil(ga / h); q * h <= gb; q += 1.0) {
        double t = q * h;
        if (t <= ga || t >= gb) continue;
        double lo = ya, hi = yb, y = ya + (yb - ya) * (t - ga) / (gb - ga);
        for (int it = 0; it < 100; ++it) {
            auto ev = out_phase(kind, c, y, lam);
            double g = ev.phi - t;
            if (g > 0)
                hi = y;
            else
                lo = y;
            if (std::abs(g) < 1e-15 * (1.0 + std::abs(t)) || hi - lo < 1e-16) break;
            double next = y - g * ev.R2;
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            y = next;
        }
        out.push_back(y);
    }
}

std::vector<double> galerkin_column(KernelKind kind, const KernelContext& c, int j, int n, const SiteFactor& sf,
                                    int y_points, const std::vector<double>& jumps) {
    const double h = c.period() / n;
    const double ya = j * h, yb = (j + 1) * h;
    std::vector<double> pts{ya, yb};
    for (double lam : jumps) phase_kinks(kind, c, lam, ya, yb, h, pts);
    std::sort(pts.begin(), pts.end());
    QuadRule rule;
    switch (y_points) {
        case 2: rule = gauss_rule<2>(); break;
        case 4: rule = gauss_rule<4>(); break;
        case 6: rule = gauss_rule<6>(); break;
        case 8: rule = gauss_rule<8>(); break;
        case 12: rule = gauss_rule<12>(); break;
        case 16: rule = gauss_rule<16>(); break;
        default: throw ConfigError("y_points must be one of 2, 4, 6, 8, 12, 16");
    }
    std::vector<double> col(static_cast<std::size_t>(n), 0.0);
    for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
        double lo = pts[p], hi = pts[p + 1];
        if (!(hi > lo)) continue;
        double mid = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
        for (std::size_t q = 0; q < rule.x.size(); ++q) {
            auto v = cell_integrals(kind, c, mid + r * rule.x[q], n, sf);
            for (std::size_t i = 0; i < col.size(); ++i) col[i] += rule.w[q] * r * v[i];
        }
    }
    for (double& v : col) v /= h;
    return col;
}

}  // namespace

double KernelContext::period() const { return 2.0 * pi * B; }

KernelContext make_kernel_context(const ModelConfig& config, double E, long k) {
    config.validate();
    if (config.law.kind != SingleSiteLaw::Kind::density)
        throw ConfigError("kernel operators need an absolutely continuous single-site law");
    KernelContext c;
    c.profile = config.profile;
    if (!config.v0.is_zero()) c.v0_block = config.v0.block(k, config.profile.alpha);
    c.law = config.law;
    c.E = E;
    c.B = winding_B(config.profile.alpha);
    c.window = {config.law.lo(), config.law.hi()};
    return c;
}

bool is_left_kind(KernelKind kind) {
    return kind == KernelKind::t_left || kind == KernelKind::site_left || kind == KernelKind::site_both;
}

std::string to_string(KernelKind kind) {
    switch (kind) {
        case KernelKind::t_left: return "T_left";
        case KernelKind::t_right: return "T_right";
        case KernelKind::t_tilde: return "T_tilde";
        case KernelKind::site_left: return "site_left";
        case KernelKind::site_right: return "site_right";
        case KernelKind::site_both: return "site_both";
    }
    return "?";
}

std::string to_string(OperatorTag tag) {
    switch (tag) {
        case OperatorTag::T: return "T";
        case OperatorTag::T_tilde: return "T_tilde";
        case OperatorTag::L0: return "L0";
        case OperatorTag::T1_realline: return "T1_realline";
    }
    return "?";
}

std::optional<double> kernel_lambda(const KernelContext& c, double left, double right) {
    if (single_site(c))
        return coupling_lambda_alpha1(right, left, c.E, c.profile.f[0], v0_at(c, 0), c.window);
    return coupling_lambda(right, left, c.E, c.profile, c.v0_block, c.window, c.B);
}

double kernel_value(KernelKind kind, const KernelContext& c, double out, double in, SiteFactor sf) {
    bool left = is_left_kind(kind);
    auto lam = left ? kernel_lambda(c, in, out) : kernel_lambda(c, out, in);
    if (!lam) return 0.0;
    double r = c.law.density(*lam);
    if (r <= 0.0) return 0.0;
    auto ev = out_phase(kind, c, in, *lam);
    double jac = 1.0 / std::abs(ev.dphi_dlam);
    return r * site_weight(kind, c, in, *lam, sf) * jac;
}

double kernel_value(OperatorTag tag, double E, double x, double y, const BlockProfile& profile,
                    const SingleSiteLaw& law, const std::vector<double>& v0_block, long k) {
    if (law.kind != SingleSiteLaw::Kind::density) return 0.0;
    KernelContext c;
    c.profile = profile;
    c.v0_block = v0_block;
    c.law = law;
    c.E = E;
    c.B = winding_B(profile.alpha);
    c.window = {law.lo(), law.hi()};
    switch (tag) {
        case OperatorTag::T: return kernel_value(k <= 0 ? KernelKind::t_left : KernelKind::t_right, c, x, y);
        case OperatorTag::T_tilde: return kernel_value(KernelKind::t_tilde, c, x, y);
        case OperatorTag::L0: {
            double s = 0.0;
            for (int q = 0; q < 2 * c.B; ++q) s += kernel_value(KernelKind::t_tilde, c, x, y + q * pi);
            return s;
        }
        case OperatorTag::T1_realline: {
            if (y == 0.0) return 0.0;
            return law.density(E - x - 1.0 / y) / std::abs(y);
        }
    }
    return 0.0;
}

std::vector<double> cell_integrals(KernelKind kind, const KernelContext& c, double in, int n, SiteFactor sf) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    const double h = c.period() / n;
    const double la = c.window.lo, lb = c.window.hi;
    const bool inc = is_left_kind(kind);
    double pa = out_phase(kind, c, in, la).phi, pb = out_phase(kind, c, in, lb).phi;
    double P0 = inc ? pa : pb, P1 = inc ? pb : pa;
    double l_prev = inc ? la : lb;
    const double l_end = inc ? lb : la;
    if (!(P1 - P0 > 1e-14 * h)) {
        out[static_cast<std::size_t>(floor_mod(static_cast<long>(std::floor(P0 / h)), n))] +=
            integrate_rw(kind, c, in, la, lb, sf);
        return out;
    }
    long q = static_cast<long>(std::floor(P0 / h)) + 1;
    while (true) {
        bool last = q * h >= P1;
        double l_next = last ? l_end
                             : (inc ? invert_phase(kind, c, in, q * h, l_prev, lb)
                                    : invert_phase(kind, c, in, q * h, la, l_prev));
        auto cell = static_cast<std::size_t>(floor_mod(q - 1, n));
        out[cell] += integrate_rw(kind, c, in, std::min(l_prev, l_next), std::max(l_prev, l_next), sf);
        if (last) break;
        l_prev = l_next;
        ++q;
    }
    return out;
}

std::vector<double> KernelGrid::apply(const std::vector<double>& f) const {
    if (static_cast<int>(f.size()) != n) throw std::invalid_argument("vector length does not match the grid");
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        const double* row = G.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(n);
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += row[j] * f[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(i)] = s;
    }
    return out;
}

int aligned_n(int n, int B) {
    if (n < 1) throw ConfigError("grid size must be positive");
    int m = 2 * B;
    return ((n + m - 1) / m) * m;
}

KernelGrid build_kernel_grid(KernelKind kind, const KernelContext& c, const GridOptions& opt, SiteFactor sf) {
    KernelGrid g;
    g.kind = kind;
    g.tag = kind == KernelKind::t_tilde ? OperatorTag::T_tilde : OperatorTag::T;
    g.disc = opt.disc;
    g.E = c.E;
    g.B = c.B;
    g.n = aligned_n(opt.n, c.B);
    g.h = c.period() / g.n;
    const int n = g.n;
    g.G.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    const int fold = n / (2 * c.B);
    const int ncols = opt.pi_symmetry ? fold : n;
    const auto jumps = jump_points(c);
    parallel_for(static_cast<std::size_t>(ncols), opt.threads, [&](std::size_t jj) {
        int j = static_cast<int>(jj);
        if (opt.disc == Discretization::galerkin) {
            auto col = galerkin_column(kind, c, j, n, sf, opt.y_points, jumps);
            for (int i = 0; i < n; ++i) g.at(i, j) = col[static_cast<std::size_t>(i)];
        } else {
            double y = (j + 0.5) * g.h;
            for (int i = 0; i < n; ++i) g.at(i, j) = g.h * kernel_value(kind, c, (i + 0.5) * g.h, y, sf);
        }
    });
    if (opt.pi_symmetry) {
        for (int s = 1; s < 2 * c.B; ++s)
            for (int j = 0; j < fold; ++j)
                for (int i = 0; i < n; ++i) g.at((i + s * fold) % n, j + s * fold) = g.at(i, j);
    }
    return g;
}

KernelGrid build_kernel_grid(OperatorTag tag, double E, const ModelConfig& config, const GridOptions& opt, long k) {
    auto c = make_kernel_context(config, E, k);
    switch (tag) {
        case OperatorTag::T: {
            auto g = build_kernel_grid(k <= 0 ? KernelKind::t_left : KernelKind::t_right, c, opt);
            g.k = k;
            return g;
        }
        case OperatorTag::T_tilde: {
            if (k < 1) throw ConfigError("T_tilde is defined for blocks k >= 1");
            auto g = build_kernel_grid(KernelKind::t_tilde, c, opt);
            g.k = k;
            return g;
        }
        case OperatorTag::L0: {
            GridOptions full = opt;
            full.pi_symmetry = false;
            auto g = build_kernel_grid(KernelKind::t_tilde, c, full);
            g.k = k;
            return direct_sum_reduce(g);
        }
        case OperatorTag::T1_realline: throw ConfigError("the real-line operator has no torus grid; use t1_realline");
    }
    throw ConfigError("unknown operator tag");
}

Norm11 norm_11_check(const KernelGrid& g) {
    Norm11 r;
    r.max = -INFINITY;
    r.min = INFINITY;
    for (int j = 0; j < g.n; ++j) {
        double s = 0.0;
        for (int i = 0; i < g.n; ++i) s += g.at(i, j);
        r.max = std::max(r.max, s);
        r.min = std::min(r.min, s);
    }
    r.truncated = r.min < 1.0 - 2e-2;
    return r;
}

double explicit_C0(const ModelConfig& config) {
    const auto& p = config.profile;
    double c1bar = std::pow(2.0 + 2.0 * p.f_max() * config.support_radius() + 2.0 * config.v0.sup_norm(), 2) + 2.0;
    double C1 = std::pow(c1bar, p.alpha);
    double C4 = p.f_min() * std::pow(c1bar, -p.alpha);
    return std::sqrt(2.0 * pi * winding_B(p.alpha)) * (C1 / C4) * config.law.sup_density();
}

Norm12 norm_12_bound(KernelKind kind, const KernelContext& c, int samples) {
    if (kind != KernelKind::t_left && kind != KernelKind::t_right)
        throw ConfigError("the L1 -> L2 bound is computed for T");
    Norm12 out;
    ModelConfig cfg;
    cfg.profile = c.profile;
    cfg.law = c.law;
    cfg.v0 = c.v0_block.empty() ? Background{} : Background::zero_extended(c.v0_block, 0);
    out.C0 = explicit_C0(cfg);
    const double h = c.period() / samples;
    for (int j = 0; j < samples; ++j) {
        double y = (j + 0.5) * h;
        // ||K(., y)||_2^2 = int r^2 (dlambda / dout) dlambda
        double s = 0.0;
        for (auto [lo, hi] : c.law.positive_pieces()) {
            lo = std::max(lo, c.window.lo);
            hi = std::min(hi, c.window.hi);
            if (!(hi > lo)) continue;
            auto f = [&](double lam) {
                double r = c.law.density(lam);
                return r * r / std::abs(out_phase(kind, c, y, lam).dphi_dlam);
            };
            s += adaptive_gauss(f, lo, hi, 1e-10 * (hi - lo), 14);
        }
        double v = std::sqrt(s);
        if (v > out.value) {
            out.value = v;
            out.y_at_max = y;
        }
    }
    out.below = out.value <= out.C0;
    return out;
}

PowerResult top_singular_value(const std::vector<double>& A, int rows, int cols, double tol, int max_iter) {
    using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const Mat> M(A.data(), rows, cols);
    PowerResult r;
    if (rows == 0 || cols == 0) return r;
    Eigen::VectorXd v = Eigen::VectorXd::Constant(cols, 1.0 / std::sqrt(static_cast<double>(cols)));
    double prev = 0.0;
    for (int it = 1; it <= max_iter; ++it) {
        Eigen::VectorXd w = M * v;
        Eigen::VectorXd z = M.transpose() * w;
        double nz = z.norm();
        r.iterations = it;
        if (nz == 0.0) {
            r.value = 0.0;
            r.converged = true;
            return r;
        }
        r.value = std::sqrt(nz);
        v = z / nz;
        if (std::abs(r.value - prev) <= tol * r.value) {
            r.converged = true;
            break;
        }
        prev = r.value;
    }
    return r;
}

PowerResult opnorm_22(const KernelGrid& g) { return top_singular_value(g.G, g.n, g.n); }

SchurFactors schur_factors(const KernelContext& c, const GridOptions& opt) {
    SchurFactors s;
    GridOptions o = opt;
    o.disc = Discretization::galerkin;
    auto g1 = build_kernel_grid(KernelKind::t_left, c, o);
    auto g2 = build_kernel_grid(KernelKind::t_right, c, o);
    const int n = g1.n;
    const double h = g1.h;
    s.n = n;
    const auto nn = static_cast<std::size_t>(n) * static_cast<std::size_t>(n);
    s.K1.assign(nn, 0.0);
    s.K2.assign(nn, 0.0);
    s.K.assign(nn, 0.0);
    parallel_for(static_cast<std::size_t>(n), opt.threads, [&](std::size_t ii) {
        double x = (static_cast<double>(ii) + 0.5) * h;
        for (int j = 0; j < n; ++j) {
            double y = (j + 0.5) * h;
            auto idx = ii * static_cast<std::size_t>(n) + static_cast<std::size_t>(j);
            s.K1[idx] = kernel_value(KernelKind::t_left, c, y, x);
            s.K2[idx] = kernel_value(KernelKind::t_right, c, x, y);
            s.K[idx] = kernel_value(KernelKind::t_tilde, c, x, y);
        }
    });
    s.marginal_1.assign(static_cast<std::size_t>(n), 0.0);
    s.marginal_2.assign(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            s.marginal_1[static_cast<std::size_t>(j)] += g1.at(i, j);
            s.marginal_2[static_cast<std::size_t>(j)] += g2.at(i, j);
        }
    return s;
}

KernelGrid direct_sum_reduce(const KernelGrid& g) {
    if (g.n % (2 * g.B) != 0) throw ConfigError("grid size must be a multiple of 2B to fold by pi");
    const int m = g.n / (2 * g.B);
    KernelGrid L;
    L.tag = OperatorTag::L0;
    L.kind = g.kind;
    L.disc = g.disc;
    L.E = g.E;
    L.B = g.B;
    L.k = g.k;
    L.n = m;
    L.h = g.h;
    L.G.assign(static_cast<std::size_t>(m) * static_cast<std::size_t>(m), 0.0);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            double s = 0.0;
            for (int q = 0; q < 2 * g.B; ++q) s += g.at(a, b + q * m);
            L.at(a, b) = s;
        }
    return L;
}

ContractionScan contraction_scan(const ModelConfig& config, const std::vector<double>& E_grid, const GridOptions& opt,
                                 long k) {
    if (k < 1) throw ConfigError("the contraction scan runs over blocks k >= 1");
    ContractionScan s;
    const std::size_t m = E_grid.size();
    s.E = E_grid;
    s.norm22.assign(m, 0.0);
    s.norm11_dev.assign(m, 0.0);
    s.iterations.assign(m, 0);
    GridOptions inner = opt;
    inner.threads = 1;
    parallel_for(m, opt.threads, [&](std::size_t i) {
        auto c = make_kernel_context(config, E_grid[i], k);
        auto tt = build_kernel_grid(KernelKind::t_tilde, c, inner);
        auto p = opnorm_22(tt);
        if (!p.converged) {
            throw NumericalError("power iteration did not converge",
                                 "{\"E\": " + std::to_string(E_grid[i]) + ", \"iterations\": " +
                                     std::to_string(p.iterations) + "}");
        }
        s.norm22[i] = p.value;
        s.iterations[i] = p.iterations;
        auto t = build_kernel_grid(KernelKind::t_right, c, inner);
        auto n11 = norm_11_check(t);
        s.norm11_dev[i] = std::max(std::abs(n11.max - 1.0), std::abs(1.0 - n11.min));
        if (i == 0) s.n = tt.n;
    });
    for (std::size_t i = 0; i < m; ++i) {
        if (s.norm22[i] > s.q_hat) {
            s.q_hat = s.norm22[i];
            s.E_at_max = E_grid[i];
        }
        if (i > 0 && std::abs(s.norm22[i] - s.norm22[i - 1]) > s.max_jump) {
            s.max_jump = std::abs(s.norm22[i] - s.norm22[i - 1]);
            s.E_at_jump = 0.5 * (E_grid[i] + E_grid[i - 1]);
        }
    }
    return s;
}

T1Result t1_realline(double E, const SingleSiteLaw& law, int m, double V, const GridOptions& opt) {
    if (law.kind != SingleSiteLaw::Kind::density) throw ConfigError("the real-line operator needs a density");
    if (m < 2) throw ConfigError("the real-line mesh needs at least two cells");
    std::vector<double> u(static_cast<std::size_t>(m) + 1);
    for (int i = 0; i <= m; ++i)
        u[static_cast<std::size_t>(i)] =
            V > 0.0 ? -V + 2.0 * V * i / m : std::tan(-pi / 2 + (i + 1) * pi / (m + 2));
    if (V <= 0.0 && m % 2 == 0) u[static_cast<std::size_t>(m / 2)] = 0.0;
    T1Result res;
    res.cells = m;
    res.V = u.back();
    // kinks of the integrand in v: E - u_i - 1/v crosses a density breakpoint
    std::vector<double> kinks;
    for (double ui : u)
        for (double b : law.breaks) {
            double d = E - ui - b;
            if (d != 0.0) kinks.push_back(1.0 / d);
        }
    kinks.push_back(0.0);
    std::sort(kinks.begin(), kinks.end());
    const auto& rule = gauss_rule<8>();
    const auto mm = static_cast<std::size_t>(m);
    std::vector<double> A(mm * mm, 0.0);
    parallel_for(mm, opt.threads, [&](std::size_t j) {
        double va = u[j], vb = u[j + 1];
        std::vector<double> pts{va, vb};
        for (auto it = std::upper_bound(kinks.begin(), kinks.end(), va); it != kinks.end() && *it < vb; ++it)
            pts.push_back(*it);
        std::sort(pts.begin(), pts.end());
        std::vector<double> col(mm, 0.0);
        for (std::size_t p = 0; p + 1 < pts.size(); ++p) {
            double lo = pts[p], hi = pts[p + 1];
            if (!(hi > lo)) continue;
            double c = 0.5 * (lo + hi), r = 0.5 * (hi - lo);
            for (std::size_t q = 0; q < rule.x.size(); ++q) {
                double v = c + r * rule.x[q];
                double s = E - 1.0 / v;
                double scale = rule.w[q] * r / std::abs(v);
                double Fprev = law.cdf(s - u[0]);
                for (std::size_t i = 0; i < mm; ++i) {
                    double Fnext = law.cdf(s - u[i + 1]);
                    col[i] += scale * (Fprev - Fnext);
                    Fprev = Fnext;
                }
            }
        }
        double hj = vb - va;
        for (std::size_t i = 0; i < mm; ++i) A[i * mm + j] = col[i] / std::sqrt((u[i + 1] - u[i]) * hj);
    });
    res.power = top_singular_value(A, m, m);
    res.norm = res.power.value;
    return res;
}

namespace {

/// Galerkin matrices of one energy, cached by kind, site factor and background block.
class ChainCache {
public:
    ChainCache(const ModelConfig& config, double E, const GridOptions& opt) : config_(config), E_(E), opt_(opt) {}

    const KernelGrid& grid(KernelKind kind, long k, SiteFactor sf) {
        if (kind == KernelKind::t_left || kind == KernelKind::t_right || kind == KernelKind::t_tilde) sf = {};
        if (kind != KernelKind::site_both) sf.site2 = 0;
        auto key = make_key(kind, k, sf);
        auto it = grids_.find(key);
        if (it != grids_.end()) return it->second;
        auto c = make_kernel_context(config_, E_, k);
        return grids_.emplace(key, build_kernel_grid(kind, c, opt_, sf)).first->second;
    }

    std::vector<double> psi(KernelKind kind, long k, double in, SiteFactor sf) {
        auto c = make_kernel_context(config_, E_, k);
        int n = aligned_n(opt_.n, c.B);
        auto v = cell_integrals(kind, c, in, n, sf);
        double h = c.period() / n;
        for (double& x : v) x /= h;
        return v;
    }

private:
    std::string make_key(KernelKind kind, long k, SiteFactor sf) const {
        std::string key = std::to_string(static_cast<int>(kind)) + ":" + std::to_string(sf.site) + ":" +
                          std::to_string(sf.site2) + ":" + (sf.bound ? "b" : "e");
        if (!config_.v0.is_zero()) {
            for (double v : config_.v0.block(k, config_.profile.alpha)) key += ":" + std::to_string(v);
        }
        return key;
    }

    const ModelConfig& config_;
    double E_;
    GridOptions opt_;
    std::map<std::string, KernelGrid> grids_;
};

}  // namespace

std::vector<double> correlator_chain(const ModelConfig& config, long L, const std::vector<long>& ms, double E,
                                     const ChainOptions& opt) {
    if (L < 2) throw ConfigError("the operator chain needs L >= 2");
    const long a = config.profile.alpha;
    const bool bnd = opt.mode == BoundMode::bound;
    ChainCache cache(config, E, opt.grid);
    const int B = winding_B(config.profile.alpha);
    const double h = 2.0 * pi * B / aligned_n(opt.grid.n, B);

    // left side up to block -1
    auto left = cache.psi(KernelKind::t_left, -L, 0.0, {});
    for (long k = -L + 1; k <= -1; ++k) left = cache.grid(KernelKind::t_left, k, {}).apply(left);
    const auto left_site0 = cache.grid(KernelKind::site_left, 0, {0, 0, bnd}).apply(left);

    std::vector<double> out;
    for (long m : ms) {
        if (m < 0 || m >= a * L) throw ConfigError("site m must lie in [0, alpha L)");
        const long k0 = m / a;
        const int j = static_cast<int>(m % a);
        const auto& lf = k0 == 0 ? cache.grid(KernelKind::site_both, 0, {0, j, bnd}).apply(left) : left_site0;
        double total = 0.0;
        for (int N = 0; N < 2 * B; ++N) {
            const double rho = N * pi + pi / 2;
            auto kind_at = [&](long k) {
                if (k > k0) return KernelKind::t_right;
                if (k == k0) return KernelKind::site_right;
                return KernelKind::t_tilde;
            };
            SiteFactor sf{j, 0, bnd};
            std::vector<double> g = cache.psi(kind_at(L - 1), L - 1, rho, sf);
            for (long k = L - 2; k >= 1; --k) g = cache.grid(kind_at(k), k, sf).apply(g);
            double s = 0.0;
            for (std::size_t i = 0; i < g.size(); ++i) s += g[i] * lf[i];
            total += h * s;
        }
        out.push_back(total);
    }
    return out;
}

double correlator_operator_bound(const ModelConfig& config, long L, long m, double E, const ChainOptions& opt) {
    return correlator_chain(config, L, {m}, E, opt).front();
}

IntegratedBound integrated_correlator_bound(const ModelConfig& config, long L, const std::vector<long>& ms,
                                            const ChainOptions& opt, int panels, unsigned threads) {
    if (panels < 1) throw ConfigError("need at least one energy panel");
    auto [lo, hi] = config.sigma0();
    const auto& g4 = gauss_rule<4>();
    IntegratedBound res;
    res.m = ms;
    const double w = (hi - lo) / panels;
    for (int p = 0; p < panels; ++p)
        for (std::size_t q = 0; q < g4.x.size(); ++q) {
            res.E_nodes.push_back(lo + w * (p + 0.5 + 0.5 * g4.x[q]));
            res.E_weights.push_back(0.5 * w * g4.w[q]);
        }
    std::vector<std::vector<double>> vals(res.E_nodes.size());
    ChainOptions inner = opt;
    inner.grid.threads = 1;
    parallel_for(res.E_nodes.size(), threads,
                 [&](std::size_t i) { vals[i] = correlator_chain(config, L, ms, res.E_nodes[i], inner); });
    res.value.assign(ms.size(), 0.0);
    for (std::size_t i = 0; i < vals.size(); ++i)
        for (std::size_t k = 0; k < ms.size(); ++k) res.value[k] += res.E_weights[i] * vals[i][k];
    return res;
}

}  // namespace gam
