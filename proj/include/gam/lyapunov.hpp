#pragma once

#include "gam/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gam {

/// [[a, b], [c, d]]
struct Mat2 {
    double a = 1, b = 0, c = 0, d = 1;

    double trace() const { return a + d; }
    double det() const { return a * d - b * c; }
    Mat2 inverse() const { return {d, -b, -c, a}; }  // unimodular inverse
};

Mat2 operator*(const Mat2& x, const Mat2& y);
Mat2 operator-(const Mat2& x, const Mat2& y);
double frobenius(const Mat2& m);

/// [[E - v, -1], [1, 0]]
Mat2 one_step(double E, double v);
/// T(alpha k + alpha - 1) ... T(alpha k) with V = lambda f_i + V0.
Mat2 block_transfer(double E, double lambda, const BlockProfile& profile, const std::vector<double>& v0_block);
Mat2 matrix_power(Mat2 m, long n);

struct LyapunovEstimate {
    double E = 0.0;
    double value = 0.0;   // per site
    double stderr = 0.0;  // from 32 batch means
    long steps = 0;       // sites
    std::uint64_t seed = 0;
};

LyapunovEstimate lyapunov_exponent(const ModelConfig& config, double E, long n_blocks, std::uint64_t seed);

enum class MatrixClass { elliptic, parabolic, hyperbolic, plus_minus_identity };
std::string to_string(MatrixClass c);
MatrixClass classify(const Mat2& m, double tol = 1e-12);

/// Unit representative of [x : y] with the first nonzero coordinate positive.
struct ProjectivePoint {
    double x = 1.0, y = 0.0;
    static ProjectivePoint of(double x, double y);
};
double projective_distance(const ProjectivePoint& p, const ProjectivePoint& q);
ProjectivePoint apply(const Mat2& m, const ProjectivePoint& p);

struct FixedPoints {
    bool all = false;  // m = +-I
    std::vector<ProjectivePoint> points;
};
/// Roots of c z^2 + (d - a) z - b = 0 in homogeneous form.
FixedPoints fixed_points(const Mat2& m);

struct FurstenbergReport {
    double E = 0.0;
    bool noncompact = false;
    std::string witness;  // description of the non-commuting pair or the hyperbolic generator
    int witness_i = -1, witness_j = -1;
    std::optional<std::vector<ProjectivePoint>> invariant_set;
    bool degenerate = false;    // every generator is +-I
    bool inconclusive = false;  // no finite candidate set could be formed
    int elliptic = 0, parabolic = 0, hyperbolic = 0, identity = 0;
};

FurstenbergReport furstenberg_check(const std::vector<double>& support, double E, const BlockProfile& profile,
                                    const std::vector<double>& v0_block);

/// {-2 cos(2 pi j / N)}: j = 1..N/2-1 (N even), j = 1..floor(N/2) (N odd). Empty for N = 2.
std::vector<double> exceptional_support(int N);
/// Uniform atomic law on the exceptional support, optionally with 0 added.
SingleSiteLaw exceptional_law(int N, bool with_zero = false);

struct IdentityPower {
    enum class Verdict { plus_identity, minus_identity, neither };
    Verdict verdict = Verdict::neither;
    double deviation = 0.0;  // max entry deviation from the closer of +-I
    Mat2 power;
};
IdentityPower verify_identity_power(const Mat2& m, long N);

}  // namespace gam
