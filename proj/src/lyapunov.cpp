#include "gam/lyapunov.hpp"

#include "gam/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace gam {

Mat2 operator*(const Mat2& x, const Mat2& y) {
    return {x.a * y.a + x.b * y.c, x.a * y.b + x.b * y.d, x.c * y.a + x.d * y.c, x.c * y.b + x.d * y.d};
}

Mat2 operator-(const Mat2& x, const Mat2& y) { return {x.a - y.a, x.b - y.b, x.c - y.c, x.d - y.d}; }

double frobenius(const Mat2& m) { return std::sqrt(m.a * m.a + m.b * m.b + m.c * m.c + m.d * m.d); }

Mat2 one_step(double E, double v) { return {E - v, -1.0, 1.0, 0.0}; }

Mat2 block_transfer(double E, double lambda, const BlockProfile& profile, const std::vector<double>& v0_block) {
    Mat2 m;
    for (int i = 0; i < profile.alpha; ++i) {
        double v = lambda * profile.f[static_cast<std::size_t>(i)] +
                   (v0_block.empty() ? 0.0 : v0_block[static_cast<std::size_t>(i)]);
        m = one_step(E, v) * m;
    }
    return m;
}

Mat2 matrix_power(Mat2 m, long n) {
    Mat2 r;
    if (n < 0) {
        m = m.inverse();
        n = -n;
    }
    while (n > 0) {
        if (n & 1) r = r * m;
        m = m * m;
        n >>= 1;
    }
    return r;
}

LyapunovEstimate lyapunov_exponent(const ModelConfig& config, double E, long n_blocks, std::uint64_t seed) {
    if (n_blocks < 1000) throw ConfigError("lyapunov_exponent needs at least 1000 blocks");
    const int a = config.profile.alpha;
    constexpr int kBatches = 32;
    LawSampler draw(config.law, seed);
    std::vector<double> batch(kBatches, 0.0);
    std::vector<long> batch_sites(kBatches, 0);
    double x = 1.0, y = 0.0;
    double total = 0.0;
    for (long k = 0; k < n_blocks; ++k) {
        double lam = draw();
        double acc = 0.0;
        for (int i = 0; i < a; ++i) {
            long n = static_cast<long>(a) * k + i;
            double v = lam * config.profile.f[static_cast<std::size_t>(i)] + config.v0.at(n);
            double nx = (E - v) * x - y;
            y = x;
            x = nx;
            double r = std::hypot(x, y);
            acc += std::log(r);
            x /= r;
            y /= r;
        }
        std::size_t b = static_cast<std::size_t>((k * kBatches) / n_blocks);
        batch[b] += acc;
        batch_sites[b] += a;
        total += acc;
    }
    LyapunovEstimate est;
    est.E = E;
    est.seed = seed;
    est.steps = n_blocks * a;
    est.value = total / static_cast<double>(est.steps);
    double mean = 0.0;
    for (int b = 0; b < kBatches; ++b) {
        batch[static_cast<std::size_t>(b)] /= static_cast<double>(batch_sites[static_cast<std::size_t>(b)]);
        mean += batch[static_cast<std::size_t>(b)];
    }
    mean /= kBatches;
    double var = 0.0;
    for (double v : batch) var += (v - mean) * (v - mean);
    var /= (kBatches - 1);
    est.stderr = std::sqrt(var / kBatches);
    return est;
}

std::string to_string(MatrixClass c) {
    switch (c) {
        case MatrixClass::elliptic: return "elliptic";
        case MatrixClass::parabolic: return "parabolic";
        case MatrixClass::hyperbolic: return "hyperbolic";
        case MatrixClass::plus_minus_identity: return "plus_minus_identity";
    }
    return "?";
}

MatrixClass classify(const Mat2& m, double tol) {
    auto near = [&](double v, double t) { return std::abs(v - t) <= tol; };
    if (near(m.b, 0) && near(m.c, 0) && ((near(m.a, 1) && near(m.d, 1)) || (near(m.a, -1) && near(m.d, -1))))
        return MatrixClass::plus_minus_identity;
    double t = std::abs(m.trace());
    if (std::abs(t - 2.0) <= tol) return MatrixClass::parabolic;
    return t < 2.0 ? MatrixClass::elliptic : MatrixClass::hyperbolic;
}

ProjectivePoint ProjectivePoint::of(double x, double y) {
    double r = std::hypot(x, y);
    ProjectivePoint p{x / r, y / r};
    if (p.x < 0.0 || (p.x == 0.0 && p.y < 0.0)) {
        p.x = -p.x;
        p.y = -p.y;
    }
    if (p.x == 0.0) p.x = 0.0;  // drop negative zero
    return p;
}

double projective_distance(const ProjectivePoint& p, const ProjectivePoint& q) { return std::abs(p.x * q.y - p.y * q.x); }

ProjectivePoint apply(const Mat2& m, const ProjectivePoint& p) {
    return ProjectivePoint::of(m.a * p.x + m.b * p.y, m.c * p.x + m.d * p.y);
}

FixedPoints fixed_points(const Mat2& m) {
    FixedPoints out;
    MatrixClass cls = classify(m);
    if (cls == MatrixClass::plus_minus_identity) {
        out.all = true;
        return out;
    }
    if (cls == MatrixClass::elliptic) return out;
    // c v1^2 + (d - a) v1 v2 - b v2^2 = 0
    const double scale = std::max(1.0, frobenius(m));
    const double A = m.c, Bq = m.d - m.a, C = -m.b;
    double disc = m.trace() * m.trace() - 4.0;
    if (cls == MatrixClass::parabolic) disc = 0.0;
    double sq = std::sqrt(std::max(disc, 0.0));
    if (std::abs(A) <= 1e-14 * scale) {
        out.points.push_back(ProjectivePoint::of(1.0, 0.0));
        if (std::abs(Bq) > 1e-14 * scale) out.points.push_back(ProjectivePoint::of(-C, Bq));
        return out;
    }
    if (cls == MatrixClass::parabolic) {
        out.points.push_back(ProjectivePoint::of(-Bq, 2.0 * A));
        return out;
    }
    double q = -0.5 * (Bq + std::copysign(sq, Bq == 0.0 ? 1.0 : Bq));
    out.points.push_back(ProjectivePoint::of(q, A));  // z = q / A
    if (q != 0.0)
        out.points.push_back(ProjectivePoint::of(C, q));  // z = C / q
    else
        out.points.push_back(ProjectivePoint::of(0.0, 1.0));
    return out;
}

namespace {

constexpr double kProjTol = 1e-9;

bool contains(const std::vector<ProjectivePoint>& set, const ProjectivePoint& p) {
    for (const auto& q : set)
        if (projective_distance(p, q) <= kProjTol) return true;
    return false;
}

void add_unique(std::vector<ProjectivePoint>& set, const ProjectivePoint& p) {
    if (!contains(set, p)) set.push_back(p);
}

bool is_pm_identity(const Mat2& m) { return classify(m, 1e-12) == MatrixClass::plus_minus_identity; }

}  // namespace

FurstenbergReport furstenberg_check(const std::vector<double>& support, double E, const BlockProfile& profile,
                                    const std::vector<double>& v0_block) {
    if (support.size() < 2) throw ConfigError("furstenberg_check needs at least two support points");
    if (support.size() > 64) throw ConfigError("furstenberg_check is capped at 64 support points");
    FurstenbergReport rep;
    rep.E = E;
    std::vector<Mat2> gens;
    for (double lam : support) gens.push_back(block_transfer(E, lam, profile, v0_block));

    for (const auto& g : gens) {
        switch (classify(g)) {
            case MatrixClass::elliptic: ++rep.elliptic; break;
            case MatrixClass::parabolic: ++rep.parabolic; break;
            case MatrixClass::hyperbolic: ++rep.hyperbolic; break;
            case MatrixClass::plus_minus_identity: ++rep.identity; break;
        }
    }
    rep.degenerate = rep.identity == static_cast<int>(gens.size());

    for (std::size_t i = 0; i < gens.size() && !rep.noncompact; ++i) {
        for (std::size_t j = i + 1; j < gens.size(); ++j) {
            if (frobenius(gens[i] * gens[j] - gens[j] * gens[i]) > 1e-9) {
                rep.noncompact = true;
                rep.witness = "non-commuting pair";
                rep.witness_i = static_cast<int>(i);
                rep.witness_j = static_cast<int>(j);
                break;
            }
        }
    }
    if (!rep.noncompact) {
        for (std::size_t i = 0; i < gens.size(); ++i) {
            if (std::abs(gens[i].trace()) > 2.0 + 1e-12) {
                rep.noncompact = true;
                rep.witness = "hyperbolic generator";
                rep.witness_i = static_cast<int>(i);
                break;
            }
        }
    }
    if (rep.degenerate) return rep;

    // candidates: fixed points and 2-cycles of generators, fixed points of pairwise quotients
    std::vector<ProjectivePoint> cand;
    auto harvest = [&](const Mat2& m) {
        auto fp = fixed_points(m);
        if (fp.all) return;
        for (const auto& p : fp.points) add_unique(cand, p);
    };
    for (const auto& g : gens) {
        if (is_pm_identity(g)) continue;
        harvest(g);
        harvest(g * g);
    }
    for (std::size_t i = 0; i < gens.size(); ++i)
        for (std::size_t j = 0; j < gens.size(); ++j)
            if (i != j) harvest(gens[i].inverse() * gens[j]);
    if (cand.empty()) {
        rep.inconclusive = true;
        return rep;
    }
    auto invariant = [&](const std::vector<ProjectivePoint>& set) {
        for (const auto& g : gens)
            for (const auto& p : set)
                if (!contains(set, apply(g, p))) return false;
        return true;
    };
    for (std::size_t i = 0; i < cand.size(); ++i) {
        if (invariant({cand[i]})) {
            rep.invariant_set = std::vector<ProjectivePoint>{cand[i]};
            return rep;
        }
    }
    for (std::size_t i = 0; i < cand.size(); ++i)
        for (std::size_t j = i + 1; j < cand.size(); ++j)
            if (invariant({cand[i], cand[j]})) {
                rep.invariant_set = std::vector<ProjectivePoint>{cand[i], cand[j]};
                return rep;
            }
    return rep;
}

std::vector<double> exceptional_support(int N) {
    if (N < 2) throw ConfigError("exceptional_support needs N >= 2");
    int jmax = (N % 2 == 0) ? N / 2 - 1 : N / 2;
    std::vector<double> pts;
    for (int j = 1; j <= jmax; ++j) pts.push_back(-2.0 * std::cos(2.0 * std::numbers::pi * j / N));
    return pts;
}

SingleSiteLaw exceptional_law(int N, bool with_zero) {
    auto pts = exceptional_support(N);
    if (with_zero) {
        bool has = false;
        for (double p : pts) has = has || std::abs(p) < 1e-15;
        if (!has) pts.push_back(0.0);
    }
    if (pts.empty()) throw ConfigError("exceptional support is empty for N = " + std::to_string(N));
    return SingleSiteLaw::uniform_atoms(pts);
}

IdentityPower verify_identity_power(const Mat2& m, long N) {
    IdentityPower r;
    r.power = matrix_power(m, N);
    auto dev = [&](double s) {
        return std::max({std::abs(r.power.a - s), std::abs(r.power.b), std::abs(r.power.c), std::abs(r.power.d - s)});
    };
    double dp = dev(1.0), dm = dev(-1.0);
    r.deviation = std::min(dp, dm);
    if (r.deviation < 1e-6) r.verdict = dp <= dm ? IdentityPower::Verdict::plus_identity : IdentityPower::Verdict::minus_identity;
    return r;
}

}  // namespace gam
