#pragma once

#include "gam/model.hpp"

#include <optional>
#include <vector>

namespace gam {

/// Torus multiplicity: the phase torus has circumference 2 pi B(alpha).
int winding_B(int alpha);

/// Lifted increment of one site step, from phi(n-1) (vector (u(n), u(n-1)))
/// to phi(n) (vector (u(n+1), u(n))). Lies in (-pi/2, 3 pi/2).
double step_increment(double u_prev, double u_here, double u_next);

/// Global solution from the left edge: u(-alpha L - 1) = 0, u(-alpha L) = 1.
struct PruferTrajectory {
    int alpha = 1;
    long L = 0;
    double E = 0.0;
    long n_first = 0;           // -alpha L - 1
    std::vector<double> u;      // sites n_first .. alpha L (one past the box)
    std::vector<int> u_exp;     // true u(n) = u * 2^u_exp
    std::vector<double> R;      // sites n_first .. alpha L - 1
    std::vector<int> R_exp;
    std::vector<double> phi;    // lifted phase on n_first .. alpha L - 1
    std::vector<double> V;      // potential on the box, sites -alpha L .. alpha L - 1

    long n_last() const { return n_first + static_cast<long>(phi.size()) - 1; }
    double u_at(long n) const;        // scaled value
    double phi_at(long n) const { return phi.at(static_cast<std::size_t>(n - n_first)); }
    double log_R(long n) const;       // natural log of the true amplitude
    /// u(a)^2 / R(b)^2 with the scale exponents applied.
    double u2_over_R2(long a, long b) const;
    /// Lifted phases at the block ends alpha k + alpha - 1, k = -L .. L-1.
    std::vector<double> block_end_phases() const;
};

/// Solves the three-term recursion across the box at energy E.
PruferTrajectory prufer_forward(const ModelConfig& config, const Realization& real, double E, long L);
/// Same, from an explicit potential on sites -alpha L .. alpha L - 1.
PruferTrajectory prufer_forward_potential(const std::vector<double>& V, int alpha, long L, double E);

/// Block lift through the homotopy: rotation by alpha pi/2, then the polynomial
/// deformation prod [[g X_i, -1], [1, 0]] for g from 0 to 1, tracked adaptively.
/// `s` in [0, 1] selects a point along the homotopy (s = 1: the full block).
struct LiftResult {
    double phase = 0.0;
    int substeps = 0;
};
LiftResult lift_phase(const std::vector<double>& X, double u_here, double u_prev, double start_phase,
                      double s = 1.0);

/// Solution on one block with a boundary angle; sites alpha k - 1 .. alpha k + alpha.
struct LocalSolution {
    enum class Direction { left, right };

    Direction direction = Direction::left;
    long k = 0;
    int alpha = 1;
    double theta = 0.0;
    double lambda = 0.0;
    double E = 0.0;
    std::vector<double> u;    // alpha + 2 values, index 0 is site alpha k - 1
    std::vector<double> R;    // alpha + 1 values, sites alpha k - 1 .. alpha k + alpha - 1
    std::vector<double> phi;  // same sites

    long site0() const { return static_cast<long>(alpha) * k - 1; }
    double u_at(long n) const { return u.at(static_cast<std::size_t>(n - site0())); }
    double R_at(long n) const { return R.at(static_cast<std::size_t>(n - site0())); }
    double phi_at(long n) const { return phi.at(static_cast<std::size_t>(n - site0())); }
    /// sum_i f_i u(alpha k + i)^2
    double weighted_mass(const BlockProfile& profile) const;
};

LocalSolution local_solution(LocalSolution::Direction direction, const BlockProfile& profile,
                             const std::vector<double>& v0_block, double theta, double lambda, double E,
                             long k = 0);

/// Allocation-free block sweeps used inside kernels and root finders.
struct BlockSweep {
    double phi = 0.0;   // left: phi(alpha k + alpha - 1); right: phi(alpha k - 1)
    double R2 = 1.0;    // left: R^2(alpha k + alpha - 1); right: R^2(alpha k - 1)
    double mass = 0.0;  // sum f_i u^2 over the block
};
BlockSweep sweep_left(const BlockProfile& profile, const double* v0_block, double theta, double lambda,
                      double E);
BlockSweep sweep_right(const BlockProfile& profile, const double* v0_block, double theta, double lambda,
                       double E);

/// Support window for the coupling constant.
struct LambdaWindow {
    double lo = 0.0;
    double hi = 0.0;
};

/// The unique lambda in the window with phi_-(alpha k + alpha - 1; y, lambda) = x mod 2 pi B,
/// where y is the left boundary angle and x the right one.
std::optional<double> coupling_lambda(double x, double y, double E, const BlockProfile& profile,
                                      const std::vector<double>& v0_block, LambdaWindow window, int B);
/// alpha = 1 closed form: lambda = (E - V0 - tan y - cot x) / f0, valid when sign cos y = sign sin x.
std::optional<double> coupling_lambda_alpha1(double x, double y, double E, double f0, double v0,
                                             LambdaWindow window);
/// Lambda with phi_-(end; y, lambda) equal to the lifted target (no reduction).
std::optional<double> lambda_for_left_phase(double target, double y, double E, const BlockProfile& profile,
                                            const double* v0_block, LambdaWindow window);
/// Lambda with phi_+(alpha k - 1; y, lambda) equal to the lifted target; phi_+ decreases in lambda.
std::optional<double> lambda_for_right_phase(double target, double y, double E, const BlockProfile& profile,
                                             const double* v0_block, LambdaWindow window);

/// R^2(n) dphi(n)/domega_j = sum f_i u^2(alpha j + i) (partial sum on the block of n); returns dphi/domega_j.
double dphi_domega(const PruferTrajectory& traj, const BlockProfile& profile, long j, long n);
/// dphi(n)/dE = - sum_{m = -alpha L}^{n} u^2(m) / R^2(n).
double dphi_dE(const PruferTrajectory& traj, long n);

/// - prod_j M_j / prod_{k=-L}^{L-2} R^2(alpha k + alpha - 1) / sum u^2, at the l-th eigenvalue (ascending).
double jacobian_det_closed_form(const ModelConfig& config, const Realization& real, long L, std::size_t l);
/// Same quantity from an existing trajectory at an eigenvalue.
double jacobian_det_from_trajectory(const PruferTrajectory& traj, const BlockProfile& profile);
/// Central-difference Jacobian of omega -> (E_l, theta_{-L}, ..., theta_{L-2}).
double jacobian_det_fd(const ModelConfig& config, const Realization& real, long L, std::size_t l,
                       double h = 1e-6);

/// Largest |increment - alpha pi / 2| over random (E, lambda, theta) samples.
double winding_sweep(const BlockProfile& profile, const std::vector<double>& v0_block, LambdaWindow window,
                     double e_lo, double e_hi, int samples, std::uint64_t seed);
/// B(alpha) doubled until the sweep stays below pi B.
int validated_B(const BlockProfile& profile, const std::vector<double>& v0_block, LambdaWindow window,
                double e_lo, double e_hi, int samples = 10000, std::uint64_t seed = 1);

}  // namespace gam
