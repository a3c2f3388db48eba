#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace gam {

/// Floor division for possibly negative site indices.
inline long floor_div(long n, long a) {
    long q = n / a;
    if ((n % a != 0) && ((n < 0) != (a < 0))) --q;
    return q;
}

inline long floor_mod(long n, long a) { return n - a * floor_div(n, a); }

/// Single-site law: a piecewise-constant density or finitely many atoms.
struct SingleSiteLaw {
    enum class Kind { density, atomic };

    Kind kind = Kind::density;
    std::vector<double> breaks;   // density: ascending breakpoints b_0 < ... < b_n
    std::vector<double> heights;  // density: value on [b_i, b_{i+1})
    std::vector<double> points;   // atomic
    std::vector<double> probs;    // atomic

    static SingleSiteLaw uniform(double a, double b);
    static SingleSiteLaw piecewise(std::vector<double> breaks, std::vector<double> heights);
    static SingleSiteLaw atomic(std::vector<double> points, std::vector<double> probs);
    static SingleSiteLaw delta(double c);
    /// Equal weights on the given points.
    static SingleSiteLaw uniform_atoms(std::vector<double> points);

    void validate() const;

    double density(double x) const;  // r(x); zero for atomic laws
    double cdf(double x) const;      // nu((-inf, x])
    double quantile(double u) const;
    double sup_density() const;
    double lo() const;  // inf of the topological support
    double hi() const;  // sup of the topological support
    double M() const;   // sup |supp|
    double mean() const;
    double variance() const;

    /// Finite stand-in for the support: atoms, or >= n quantile points including both endpoints.
    std::vector<double> support_sample(int n = 17) const;
    /// Maximal intervals where the density is positive.
    std::vector<std::pair<double, double>> positive_pieces() const;
};

struct BlockProfile {
    int alpha = 1;
    std::vector<double> f{1.0};

    void validate() const;
    double f_max() const;
    double f_min() const;
};

/// Background potential V0: constant, finite table with zero extension, or periodic table.
struct Background {
    enum class Kind { constant, table, periodic };

    Kind kind = Kind::constant;
    double c = 0.0;
    std::vector<double> values;
    long origin = 0;  // lattice site of values[0]

    static Background constant_value(double c);
    static Background zero_extended(std::vector<double> v, long origin = 0);
    static Background periodic_table(std::vector<double> v, long origin = 0);

    double at(long n) const;
    double sup_norm() const;
    bool is_zero() const;
    /// V0 on the block sites alpha*k .. alpha*k + alpha - 1.
    std::vector<double> block(long k, int alpha) const;
};

struct ModelConfig {
    BlockProfile profile;
    SingleSiteLaw law;
    Background v0;
    double M = 0.0;  // stated support radius; 0 means take it from the law

    void validate() const;
    double support_radius() const;
    std::pair<double, double> sigma0() const;
    /// Canonical text form (round-trips through parse_config).
    std::string to_text() const;
};

/// Parses the key = value configuration format documented in the README.
ModelConfig parse_config(const std::string& text);
ModelConfig load_config(const std::string& path);

/// Draws for blocks -L .. L-1.
struct Realization {
    long L = 0;
    std::uint64_t seed = 0;
    std::vector<double> omega;

    double at(long k) const { return omega.at(static_cast<std::size_t>(k + L)); }
    long k_lo() const { return -L; }
    long k_hi() const { return L - 1; }
};

/// Seeded stream of i.i.d. draws from a law; one engine per seed.
class LawSampler {
public:
    LawSampler(const SingleSiteLaw& law, std::uint64_t seed);
    double operator()();

private:
    const SingleSiteLaw* law_;
    std::mt19937_64 engine_;
    std::uniform_real_distribution<double> unif_{0.0, 1.0};
};

Realization sample_realization(const ModelConfig& config, long L, std::uint64_t seed);

/// V(n) = f_i * omega_k + V0(n) for n = alpha*k + i, on [n_lo, n_hi].
std::vector<double> build_potential(const ModelConfig& config, const Realization& real, long n_lo,
                                    long n_hi);

/// The alpha values lambda * f_i + V0(alpha*k + i).
std::vector<double> block_potential(const BlockProfile& profile, const std::vector<double>& v0_block,
                                    double lambda);

}  // namespace gam
