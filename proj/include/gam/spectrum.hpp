#pragma once

#include "gam/model.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace gam {

struct Interval {
    double a = 0.0, b = 0.0;
};

/// Sorted, disjoint closed intervals.
struct IntervalUnion {
    std::vector<Interval> parts;

    /// Sorts and merges; gaps narrower than `gap` are closed.
    void normalize(double gap = 0.0);
    double measure() const;
    double distance(double x) const;
    bool empty() const { return parts.empty(); }
};

double hausdorff(const IntervalUnion& A, const IntervalUnion& B);

/// Block couplings omega_0 .. omega_{p-1}, repeated periodically.
struct PeriodicWord {
    std::vector<double> omega;
    int period() const { return static_cast<int>(omega.size()); }
};

/// Trace of the monodromy over alpha p sites starting at site 0.
double discriminant(const PeriodicWord& word, double E, const BlockProfile& profile, const Background& v0);

struct SpectrumOptions {
    int max_period = 4;
    double e_lo = 0.0, e_hi = 0.0;  // both zero: use sigma0
    double step = 1e-3;
    std::size_t word_cap = 4096;    // exhaustive below this count per period, sampled above
    std::size_t word_budget = 0;    // total words over all periods; 0 means unlimited
    std::uint64_t seed = 1;
};

struct SpectrumResult {
    IntervalUnion sigma;
    std::vector<std::size_t> words_per_period;
    std::vector<bool> exhaustive;  // per period
    bool partial = false;          // the total word budget ran out
    double e_lo = 0.0, e_hi = 0.0, step = 0.0;
};

/// Closure of the union of periodic spectra over words drawn from the support sample.
SpectrumResult almost_sure_spectrum(const ModelConfig& config, const std::vector<double>& support,
                                    const SpectrumOptions& opt);

/// Bands {E : |D(E)| <= 2} of one word on the grid, endpoints refined by bisection to 1e-8.
IntervalUnion word_bands(const PeriodicWord& word, const BlockProfile& profile, const Background& v0, double e_lo,
                         double e_hi, double step);

/// (E, D(E)) samples for plotting.
std::vector<std::pair<double, double>> discriminant_curve(const PeriodicWord& word, const BlockProfile& profile,
                                                          const Background& v0, double e_lo, double e_hi, int points);

/// Fraction of the values within `tol` of the union.
double containment_fraction(const IntervalUnion& sigma, const std::vector<double>& values, double tol);

}  // namespace gam
