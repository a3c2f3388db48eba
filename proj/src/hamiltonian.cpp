#include "gam/hamiltonian.hpp"

#include "gam/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gam {

FiniteBox assemble_finite_box(const ModelConfig& config, const Realization& real, long L) {
    if (real.L < L) throw std::invalid_argument("realization does not cover the box");
    FiniteBox box;
    box.alpha = config.profile.alpha;
    box.L = L;
    box.first_site = -static_cast<long>(box.alpha) * L;
    box.diag = build_potential(config, real, box.first_site, box.alpha * L - 1);
    return box;
}

FiniteBox box_from_diagonal(std::vector<double> diag, long first_site) {
    FiniteBox box;
    box.first_site = first_site;
    box.diag = std::move(diag);
    return box;
}

std::size_t sturm_count(const std::vector<double>& diag, double x) {
    const double tiny = std::numeric_limits<double>::min() / std::numeric_limits<double>::epsilon();
    std::size_t count = 0;
    double q = 1.0;
    for (std::size_t i = 0; i < diag.size(); ++i) {
        q = (diag[i] - x) - (i ? 1.0 / q : 0.0);
        if (q == 0.0) q = -tiny;
        if (q < 0.0) ++count;
    }
    return count;
}

namespace {

double gershgorin_radius(const std::vector<double>& d, double& lo, double& hi) {
    lo = std::numeric_limits<double>::infinity();
    hi = -lo;
    const std::size_t n = d.size();
    for (std::size_t i = 0; i < n; ++i) {
        double r = (i > 0 ? 1.0 : 0.0) + (i + 1 < n ? 1.0 : 0.0);
        lo = std::min(lo, d[i] - r);
        hi = std::max(hi, d[i] + r);
    }
    return std::max(std::abs(lo), std::abs(hi));
}

// k-th smallest eigenvalue (0-based) by bisection on the Sturm count.
double bisect_eigenvalue(const std::vector<double>& d, std::size_t k, double lo, double hi) {
    const double eps = std::numeric_limits<double>::epsilon();
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) break;
        if (hi - lo <= 2.0 * eps * std::max(std::abs(lo), std::abs(hi))) break;
        if (sturm_count(d, mid) > k)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

// Solves (T - shift) x = b in place for the unit-offdiagonal tridiagonal T,
// Gaussian elimination with partial pivoting; tiny pivots are replaced.
struct ShiftedLU {
    std::size_t n;
    std::vector<double> u0, u1, u2, l;
    std::vector<char> swapped;

    ShiftedLU(const std::vector<double>& d, double shift, double pivot_floor)
        : n(d.size()), u0(n), u1(n), u2(n), l(n), swapped(n, 0) {
        // row i currently holds (a_i, b_i, c_i) at columns (i, i+1, i+2)
        double a = d[0] - shift, b = n > 1 ? 1.0 : 0.0, c = 0.0;
        for (std::size_t i = 0; i + 1 < n; ++i) {
            double na = 1.0, nb = d[i + 1] - shift, nc = i + 2 < n ? 1.0 : 0.0;
            if (std::abs(na) > std::abs(a)) {
                swapped[i] = 1;
                std::swap(a, na);
                std::swap(b, nb);
                std::swap(c, nc);
            }
            if (std::abs(a) < pivot_floor) a = std::copysign(pivot_floor, a == 0.0 ? 1.0 : a);
            double m = na / a;
            l[i] = m;
            u0[i] = a;
            u1[i] = b;
            u2[i] = c;
            a = nb - m * b;
            b = nc - m * c;
            c = 0.0;
        }
        if (std::abs(a) < pivot_floor) a = std::copysign(pivot_floor, a == 0.0 ? 1.0 : a);
        u0[n - 1] = a;
        u1[n - 1] = 0.0;
        u2[n - 1] = 0.0;
    }

    void solve(std::vector<double>& x) const {
        for (std::size_t i = 0; i + 1 < n; ++i) {
            if (swapped[i]) std::swap(x[i], x[i + 1]);
            x[i + 1] -= l[i] * x[i];
        }
        for (std::size_t i = n; i-- > 0;) {
            double s = x[i];
            if (i + 1 < n) s -= u1[i] * x[i + 1];
            if (i + 2 < n) s -= u2[i] * x[i + 2];
            x[i] = s / u0[i];
        }
    }
};

double norm2(const std::vector<double>& x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return std::sqrt(s);
}

double residual(const std::vector<double>& d, const std::vector<double>& x, double lam) {
    const std::size_t n = d.size();
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double y = (d[i] - lam) * x[i];
        if (i > 0) y += x[i - 1];
        if (i + 1 < n) y += x[i + 1];
        s += y * y;
    }
    return std::sqrt(s);
}

}  // namespace

std::vector<double> eigenvalues_tridiagonal(const std::vector<double>& diag) {
    const std::size_t n = diag.size();
    std::vector<double> w(n);
    if (n == 0) return w;
    double lo, hi;
    gershgorin_radius(diag, lo, hi);
    lo -= 1e-12 * (1.0 + std::abs(lo));
    hi += 1e-12 * (1.0 + std::abs(hi));
    for (std::size_t k = 0; k < n; ++k) w[k] = bisect_eigenvalue(diag, k, lo, hi);
    return w;
}

EigenSystem eigh_tridiagonal(const FiniteBox& box) {
    const auto& d = box.diag;
    const std::size_t n = d.size();
    EigenSystem sys;
    sys.first_site = box.first_site;
    sys.n = n;
    sys.values = eigenvalues_tridiagonal(d);
    sys.vectors.assign(n * n, 0.0);
    if (n == 0) return sys;

    double lo, hi;
    const double scale = std::max(1.0, gershgorin_radius(d, lo, hi));
    const double eps = std::numeric_limits<double>::epsilon();
    const double cluster_gap = 1e-8 * scale;
    const double target = 1e-12 * scale;

    std::size_t cluster_start = 0;
    std::vector<double> x(n), prev(n);
    for (std::size_t l = 0; l < n; ++l) {
        if (l > 0 && sys.values[l] - sys.values[l - 1] >= cluster_gap) cluster_start = l;
        // nudge repeated shifts inside a cluster apart so the factorizations differ
        double shift = sys.values[l];
        if (l > cluster_start) {
            double prev_shift = sys.values[l - 1];
            if (shift - prev_shift < 10.0 * eps * scale) shift = prev_shift + 10.0 * eps * scale;
        }
        ShiftedLU lu(d, shift, eps * scale);
        for (std::size_t i = 0; i < n; ++i)
            x[i] = 1.0 + 0.5 * std::sin(0.7 * static_cast<double>(i) + 0.3 * static_cast<double>(l));
        bool ok = false;
        double res = 0.0;
        for (int it = 0; it < 100; ++it) {
            lu.solve(x);
            for (std::size_t j = cluster_start; j < l; ++j) {
                const double* q = sys.vectors.data() + j * n;
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i) dot += q[i] * x[i];
                for (std::size_t i = 0; i < n; ++i) x[i] -= dot * q[i];
            }
            double nx = norm2(x);
            if (!(nx > 0.0) || !std::isfinite(nx)) {
                for (std::size_t i = 0; i < n; ++i) x[i] = std::cos(1.3 * static_cast<double>(i + it + 1));
                continue;
            }
            for (auto& v : x) v /= nx;
            res = residual(d, x, sys.values[l]);
            if (res <= target && it >= 1) {
                ok = true;
                break;
            }
        }
        if (!ok) {
            nlohmann::json diag_json;
            diag_json["error"] = "inverse iteration did not converge";
            diag_json["index"] = l;
            diag_json["eigenvalue"] = sys.values[l];
            diag_json["residual"] = res;
            diag_json["diagonal"] = d;
            throw NumericalError("eigenvector " + std::to_string(l) + " did not converge", diag_json.dump());
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (x[i] != 0.0) {
                if (x[i] < 0.0)
                    for (auto& v : x) v = -v;
                break;
            }
        }
        std::copy(x.begin(), x.end(), sys.vectors.begin() + static_cast<std::ptrdiff_t>(l * n));
    }
    return sys;
}

std::vector<std::complex<double>> evolve(const EigenSystem& sys, double t, long source) {
    if (source < sys.first_site || source >= sys.first_site + static_cast<long>(sys.n))
        throw std::out_of_range("source site outside the box");
    const std::size_t s = static_cast<std::size_t>(source - sys.first_site);
    std::vector<std::complex<double>> amp(sys.n, {0.0, 0.0});
    for (std::size_t l = 0; l < sys.n; ++l) {
        const double* q = sys.column(l);
        std::complex<double> ph = std::polar(q[s], -t * sys.values[l]);
        for (std::size_t m = 0; m < sys.n; ++m) amp[m] += ph * q[m];
    }
    return amp;
}

}  // namespace gam
