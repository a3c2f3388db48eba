#pragma once

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

namespace gam {

/// Symmetric rule on [-1, 1].
struct QuadRule {
    std::vector<double> x, w;
};

template <unsigned N>
const QuadRule& gauss_rule() {
    static const QuadRule rule = [] {
        using G = boost::math::quadrature::gauss<double, N>;
        QuadRule r;
        const auto& a = G::abscissa();
        const auto& w = G::weights();
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] == 0.0) {
                r.x.push_back(0.0);
                r.w.push_back(w[i]);
            } else {
                r.x.push_back(a[i]);
                r.w.push_back(w[i]);
                r.x.push_back(-a[i]);
                r.w.push_back(w[i]);
            }
        }
        return r;
    }();
    return rule;
}

/// Kronrod 15 nodes with the embedded 7-point Gauss weights (zero where not a Gauss node).
struct KronrodPair {
    std::vector<double> x, wk, wg;
};

inline const KronrodPair& kronrod15() {
    static const KronrodPair rule = [] {
        using K = boost::math::quadrature::gauss_kronrod<double, 15>;
        using G = boost::math::quadrature::gauss<double, 7>;
        KronrodPair r;
        const auto& ka = K::abscissa();
        const auto& kw = K::weights();
        auto gauss_weight = [&](double x) {
            for (std::size_t j = 0; j < G::abscissa().size(); ++j)
                if (std::abs(G::abscissa()[j] - x) < 1e-14) return G::weights()[j];
            return 0.0;
        };
        for (std::size_t i = 0; i < ka.size(); ++i) {
            double g = gauss_weight(ka[i]);
            r.x.push_back(ka[i]);
            r.wk.push_back(kw[i]);
            r.wg.push_back(g);
            if (ka[i] != 0.0) {
                r.x.push_back(-ka[i]);
                r.wk.push_back(kw[i]);
                r.wg.push_back(g);
            }
        }
        return r;
    }();
    return rule;
}

/// Adaptive Gauss-Kronrod for vector-valued integrands f(y, out) with out of length dim.
/// Subdivides until max_i |K15 - G7| <= tol on every panel (scaled by panel length) or depth runs out.
template <class F>
void integrate_vector(F&& f, double a, double b, std::size_t dim, double tol, std::vector<double>& result,
                      int max_depth = 18) {
    const auto& q = kronrod15();
    std::vector<double> val(dim), k(dim), g(dim);
    struct Panel {
        double a, b;
        int depth;
    };
    std::vector<Panel> stack{{a, b, 0}};
    result.assign(dim, 0.0);
    const double total = b - a;
    while (!stack.empty()) {
        Panel p = stack.back();
        stack.pop_back();
        double c = 0.5 * (p.a + p.b), r = 0.5 * (p.b - p.a);
        std::fill(k.begin(), k.end(), 0.0);
        std::fill(g.begin(), g.end(), 0.0);
        for (std::size_t i = 0; i < q.x.size(); ++i) {
            f(c + r * q.x[i], val);
            for (std::size_t d = 0; d < dim; ++d) {
                k[d] += q.wk[i] * val[d];
                if (q.wg[i] != 0.0) g[d] += q.wg[i] * val[d];
            }
        }
        double err = 0.0;
        for (std::size_t d = 0; d < dim; ++d) err = std::max(err, std::abs(k[d] - g[d]) * r);
        if (err <= tol * (2 * r) / total || p.depth >= max_depth) {
            for (std::size_t d = 0; d < dim; ++d) result[d] += k[d] * r;
        } else {
            stack.push_back({p.a, c, p.depth + 1});
            stack.push_back({c, p.b, p.depth + 1});
        }
    }
}

}  // namespace gam
