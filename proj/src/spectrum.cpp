#include "gam/spectrum.hpp"

#include "gam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace gam {

void IntervalUnion::normalize(double gap) {
    std::sort(parts.begin(), parts.end(), [](const Interval& x, const Interval& y) { return x.a < y.a; });
    std::vector<Interval> out;
    for (const auto& p : parts) {
        if (!out.empty() && p.a - out.back().b <= gap)
            out.back().b = std::max(out.back().b, p.b);
        else
            out.push_back(p);
    }
    parts = std::move(out);
}

double IntervalUnion::measure() const {
    double m = 0.0;
    for (const auto& p : parts) m += p.b - p.a;
    return m;
}

double IntervalUnion::distance(double x) const {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& p : parts) {
        if (x >= p.a && x <= p.b) return 0.0;
        d = std::min(d, x < p.a ? p.a - x : x - p.b);
    }
    return d;
}

namespace {

double directed(const IntervalUnion& A, const IntervalUnion& B) {
    double h = 0.0;
    for (const auto& I : A.parts) {
        h = std::max({h, B.distance(I.a), B.distance(I.b)});
        for (std::size_t k = 0; k + 1 < B.parts.size(); ++k) {
            double mid = 0.5 * (B.parts[k].b + B.parts[k + 1].a);
            if (mid > I.a && mid < I.b) h = std::max(h, B.distance(mid));
        }
    }
    return h;
}

void check_period(const PeriodicWord& word, const BlockProfile& profile, const Background& v0) {
    if (word.omega.empty()) throw ConfigError("periodic word must have period >= 1");
    const long sites = static_cast<long>(profile.alpha) * word.period();
    switch (v0.kind) {
        case Background::Kind::constant: return;
        case Background::Kind::table:
            if (v0.is_zero()) return;
            throw ConfigError("a finitely supported background is not periodic");
        case Background::Kind::periodic:
            if (sites % static_cast<long>(v0.values.size()) != 0)
                throw ConfigError("background period does not divide the word period");
            return;
    }
}

}  // namespace

double hausdorff(const IntervalUnion& A, const IntervalUnion& B) {
    if (A.empty() || B.empty()) return std::numeric_limits<double>::infinity();
    return std::max(directed(A, B), directed(B, A));
}

double discriminant(const PeriodicWord& word, double E, const BlockProfile& profile, const Background& v0) {
    check_period(word, profile, v0);
    // (u(n+1), u(n)) columns of the monodromy
    double a = 1, b = 0, c = 0, d = 1;
    long n = 0;
    for (double w : word.omega) {
        for (int i = 0; i < profile.alpha; ++i, ++n) {
            double x = E - w * profile.f[static_cast<std::size_t>(i)] - v0.at(n);
            double na = x * a - c, nb = x * b - d;
            c = a;
            d = b;
            a = na;
            b = nb;
        }
    }
    return a + d;
}

IntervalUnion word_bands(const PeriodicWord& word, const BlockProfile& profile, const Background& v0, double e_lo,
                         double e_hi, double step) {
    check_period(word, profile, v0);
    auto F = [&](double E) { return std::abs(discriminant(word, E, profile, v0)) - 2.0; };
    auto refine = [&](double out, double in) {
        // F(out) > 0 >= F(in)
        while (std::abs(in - out) > 1e-8) {
            double mid = 0.5 * (in + out);
            (F(mid) <= 0 ? in : out) = mid;
        }
        return in;
    };
    IntervalUnion u;
    const long n = static_cast<long>(std::ceil((e_hi - e_lo) / step));
    bool inside = false;
    double start = e_lo, prevE = e_lo;
    for (long i = 0; i <= n; ++i) {
        double E = std::min(e_lo + static_cast<double>(i) * step, e_hi);
        bool now = F(E) <= 0;
        if (now && !inside) start = (i == 0) ? E : refine(prevE, E);
        if (!now && inside) u.parts.push_back({start, refine(E, prevE)});
        inside = now;
        prevE = E;
    }
    if (inside) u.parts.push_back({start, e_hi});
    return u;
}

SpectrumResult almost_sure_spectrum(const ModelConfig& config, const std::vector<double>& support,
                                    const SpectrumOptions& opt) {
    if (support.empty()) throw ConfigError("support sample is empty");
    if (opt.max_period < 1) throw ConfigError("period budget must be at least 1");
    if (!(opt.step > 0)) throw ConfigError("energy grid step must be positive");
    SpectrumResult res;
    res.step = opt.step;
    if (opt.e_lo == 0.0 && opt.e_hi == 0.0) {
        auto [lo, hi] = config.sigma0();
        res.e_lo = lo;
        res.e_hi = hi;
    } else {
        res.e_lo = opt.e_lo;
        res.e_hi = opt.e_hi;
    }
    const std::size_t S = support.size();
    std::size_t used = 0;
    for (int p = 1; p <= opt.max_period && !res.partial; ++p) {
        double total = std::pow(static_cast<double>(S), p);
        bool exhaustive = total <= static_cast<double>(opt.word_cap);
        std::size_t count = exhaustive ? static_cast<std::size_t>(total) : opt.word_cap;
        std::mt19937_64 rng(opt.seed + static_cast<std::uint64_t>(p) * 0x9e3779b97f4a7c15ULL);
        std::uniform_int_distribution<std::size_t> pick(0, S - 1);
        std::size_t done = 0;
        PeriodicWord w;
        w.omega.resize(static_cast<std::size_t>(p));
        for (std::size_t idx = 0; idx < count; ++idx) {
            if (opt.word_budget && used >= opt.word_budget) {
                res.partial = true;
                break;
            }
            if (exhaustive) {
                std::size_t r = idx;
                for (int q = 0; q < p; ++q) {
                    w.omega[static_cast<std::size_t>(q)] = support[r % S];
                    r /= S;
                }
            } else {
                for (auto& o : w.omega) o = support[pick(rng)];
            }
            auto bands = word_bands(w, config.profile, config.v0, res.e_lo, res.e_hi, opt.step);
            res.sigma.parts.insert(res.sigma.parts.end(), bands.parts.begin(), bands.parts.end());
            ++used;
            ++done;
        }
        res.words_per_period.push_back(done);
        res.exhaustive.push_back(exhaustive && done == count);
        res.sigma.normalize(opt.step);
    }
    return res;
}

std::vector<std::pair<double, double>> discriminant_curve(const PeriodicWord& word, const BlockProfile& profile,
                                                          const Background& v0, double e_lo, double e_hi,
                                                          int points) {
    std::vector<std::pair<double, double>> out;
    for (int i = 0; i < points; ++i) {
        double E = e_lo + (e_hi - e_lo) * i / std::max(1, points - 1);
        out.emplace_back(E, discriminant(word, E, profile, v0));
    }
    return out;
}

double containment_fraction(const IntervalUnion& sigma, const std::vector<double>& values, double tol) {
    if (values.empty()) return 1.0;
    std::size_t hit = 0;
    for (double v : values)
        if (sigma.distance(v) <= tol) ++hit;
    return static_cast<double>(hit) / static_cast<double>(values.size());
}

}  // namespace gam
