#pragma once

#include "gam/model.hpp"
#include "gam/prufer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gam {

/// Kernel data for one block: profile, background on the block, law, energy, torus multiplicity.
struct KernelContext {
    BlockProfile profile;
    std::vector<double> v0_block;  // empty: zero background
    SingleSiteLaw law;
    double E = 0.0;
    int B = 1;
    LambdaWindow window;
    bool closed_form = true;  // use the single-site formulas when alpha = 1

    double period() const;
};

KernelContext make_kernel_context(const ModelConfig& config, double E, long k = 0);

/// Left kinds map a function of the left angle to a function of the right angle (blocks k <= 0);
/// right kinds map right angles to left angles (blocks k > 0).
enum class KernelKind {
    t_left,      // r R_-^2 / sum f u_-^2
    t_right,     // r R_+^2 / sum f u_+^2
    t_tilde,     // r R_+ / sum f u_+^2
    site_left,   // t_left times |u_-(site)| / R_-(end)
    site_right,  // t_tilde times |u_+(site)|
    site_both    // t_left times |u_-(site) u_-(site2)| / R_-^2(end)
};

bool is_left_kind(KernelKind kind);
std::string to_string(KernelKind kind);

/// Site offsets within the block; `bound` replaces |u| by the amplitude R at the same site.
struct SiteFactor {
    int site = 0;
    int site2 = 0;
    bool bound = false;
};

/// Coupling constant carrying left angle `left` to right angle `right` (torus angles).
std::optional<double> kernel_lambda(const KernelContext& ctx, double left, double right);

/// Pointwise kernel K(out, in); zero when no coupling constant exists or the density vanishes.
double kernel_value(KernelKind kind, const KernelContext& ctx, double out, double in, SiteFactor sf = {});

/// Operator-level tags.
enum class OperatorTag { T, T_tilde, L0, T1_realline };
std::string to_string(OperatorTag tag);

/// K(x, y) for T (k <= 0 left form, k > 0 right form) and T-tilde (k > 0); x is the output angle.
double kernel_value(OperatorTag tag, double E, double x, double y, const BlockProfile& profile,
                    const SingleSiteLaw& law, const std::vector<double>& v0_block, long k = 1);

/// Integrals of K(., in) over the n output cells [i h, (i+1) h), h = 2 pi B / n, exact up to the
/// lambda quadrature used for site factors.
std::vector<double> cell_integrals(KernelKind kind, const KernelContext& ctx, double in, int n, SiteFactor sf = {});

enum class Discretization { galerkin, midpoint };

struct GridOptions {
    int n = 400;
    Discretization disc = Discretization::galerkin;
    int y_points = 8;       // Gauss points per smooth piece of an input cell
    bool pi_symmetry = false;  // fill columns from the first 1/(2B) of the torus
    unsigned threads = 1;
};

/// Square matrix on the torus grid. Galerkin: G_ij = (1/h) int_cell_i int_cell_j K;
/// midpoint: G_ij = h K(x_i, y_j). Both act on cell values.
struct KernelGrid {
    OperatorTag tag = OperatorTag::T;
    KernelKind kind = KernelKind::t_left;
    Discretization disc = Discretization::galerkin;
    double E = 0.0;
    int n = 0;
    int B = 1;
    double h = 0.0;
    long k = 0;
    std::vector<double> G;  // row-major

    double at(int i, int j) const { return G[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
    double& at(int i, int j) { return G[static_cast<std::size_t>(i) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)]; }
    std::vector<double> apply(const std::vector<double>& f) const;
};

/// n rounded up to a multiple of 2B.
int aligned_n(int n, int B);

KernelGrid build_kernel_grid(KernelKind kind, const KernelContext& ctx, const GridOptions& opt, SiteFactor sf = {});
KernelGrid build_kernel_grid(OperatorTag tag, double E, const ModelConfig& config, const GridOptions& opt,
                             long k = 1);

struct Norm11 {
    double max = 0.0, min = 0.0;
    bool truncated = false;  // some column lost more than 2e-2 of its mass
};
/// Column sums (the L1 -> L1 norm of a nonnegative kernel).
Norm11 norm_11_check(const KernelGrid& grid);

struct Norm12 {
    double value = 0.0;  // max over sampled y of ||K(., y)||_2
    double y_at_max = 0.0;
    double C0 = 0.0;     // explicit constant sqrt(2 pi B) (C1 / C4) ||r||_inf
    bool below = false;
};
Norm12 norm_12_bound(KernelKind kind, const KernelContext& ctx, int samples);
/// sqrt(2 pi B) (C1 / C4) ||r||_inf with C1bar = (2 + 2 f_max M + 2 ||V0||)^2 + 2, C1 = C1bar^alpha,
/// C4 = f_min C1bar^-alpha.
double explicit_C0(const ModelConfig& config);

struct PowerResult {
    double value = 0.0;
    int iterations = 0;
    bool converged = false;
};
/// Largest singular value of a row-major matrix by power iteration on A^T A.
PowerResult top_singular_value(const std::vector<double>& A, int rows, int cols, double tol = 1e-10,
                               int max_iter = 10000);
PowerResult opnorm_22(const KernelGrid& grid);

struct SchurFactors {
    int n = 0;
    std::vector<double> K1, K2, K;  // pointwise at midpoints, row-major (x = left angle, y = right angle)
    std::vector<double> marginal_1;  // int K1(x, y) dy for each x cell
    std::vector<double> marginal_2;  // int K2(x, y) dx for each y cell
};
SchurFactors schur_factors(const KernelContext& ctx, const GridOptions& opt);

/// L0(x, y) = sum_s K(x, y + s pi) on (0, pi).
KernelGrid direct_sum_reduce(const KernelGrid& grid);

struct ContractionScan {
    std::vector<double> E, norm22, norm11_dev;
    std::vector<int> iterations;
    int n = 0;
    double q_hat = 0.0;
    double E_at_max = 0.0;
    double max_jump = 0.0;
    double E_at_jump = 0.0;
};
ContractionScan contraction_scan(const ModelConfig& config, const std::vector<double>& E_grid,
                                 const GridOptions& opt, long k = 1);

struct T1Result {
    double norm = 0.0;
    int cells = 0;
    double V = 0.0;
    PowerResult power;
};
/// Galerkin norm of (T1 f)(u) = int r(E - u - 1/v) |v|^-1 f(v) dv truncated to [-V, V].
/// V = 0 selects the graded mesh u_i = tan(-pi/2 + (i + 1) pi / (m + 2)).
T1Result t1_realline(double E, const SingleSiteLaw& law, int m, double V = 0.0, const GridOptions& opt = {});

enum class BoundMode { exact, bound };

struct ChainOptions {
    GridOptions grid;
    BoundMode mode = BoundMode::bound;
};

/// sum_N <T~^1 ... T^(L-1) psi^L_N, T^0 ... psi^-L> at energy E for each site m >= 0 of the box.
std::vector<double> correlator_chain(const ModelConfig& config, long L, const std::vector<long>& m, double E,
                                     const ChainOptions& opt);
double correlator_operator_bound(const ModelConfig& config, long L, long m, double E, const ChainOptions& opt);

struct IntegratedBound {
    std::vector<long> m;
    std::vector<double> value;
    std::vector<double> E_nodes, E_weights;
};
/// Composite Gauss-Legendre over sigma0 (panels x 4 nodes) of the chain values.
IntegratedBound integrated_correlator_bound(const ModelConfig& config, long L, const std::vector<long>& m,
                                            const ChainOptions& opt, int panels = 24, unsigned threads = 1);

}  // namespace gam
