#pragma once

#include "gam/model.hpp"

#include <complex>
#include <vector>

namespace gam {

/// H restricted to sites [-alpha L, alpha L - 1]; unit off-diagonal.
struct FiniteBox {
    int alpha = 1;
    long L = 0;
    long first_site = 0;
    std::vector<double> diag;

    std::size_t size() const { return diag.size(); }
    long last_site() const { return first_site + static_cast<long>(diag.size()) - 1; }
};

/// Ascending eigenvalues; column l of `vectors` (column-major) is the unit eigenvector of values[l].
struct EigenSystem {
    long first_site = 0;
    std::size_t n = 0;
    std::vector<double> values;
    std::vector<double> vectors;

    double v(std::size_t l, long site) const {
        return vectors[l * n + static_cast<std::size_t>(site - first_site)];
    }
    const double* column(std::size_t l) const { return vectors.data() + l * n; }
};

FiniteBox assemble_finite_box(const ModelConfig& config, const Realization& real, long L);
/// Box from an explicit diagonal, for tests and periodic approximants.
FiniteBox box_from_diagonal(std::vector<double> diag, long first_site = 0);

/// Number of eigenvalues strictly below x (Sturm sequence of the unit-offdiagonal tridiagonal).
std::size_t sturm_count(const std::vector<double>& diag, double x);

EigenSystem eigh_tridiagonal(const FiniteBox& box);
/// Eigenvalues only (bisection).
std::vector<double> eigenvalues_tridiagonal(const std::vector<double>& diag);

/// <delta_m, exp(-i t H) delta_source> for every site m of the box.
std::vector<std::complex<double>> evolve(const EigenSystem& sys, double t, long source);

}  // namespace gam
