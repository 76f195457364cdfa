// Monotone finite-difference discretization of the Dirichlet problem and the
// three solution drivers: policy iteration, pseudo-time marching, and the
// Perron-style monotone iteration between barriers.
#pragma once

#include <memory>
#include <optional>

#include "ipde/operators.hpp"

namespace ipde {

/// One (a,b) control pair's coefficient fields.
struct ControlPair {
    std::function<SymMat(const Vec&)> diffusion;   // a_ab(x), symmetric, lambda I <= a <= Lambda I
    std::function<Vec(const Vec&)> drift;          // b_ab(x)
    std::function<double(const Vec&)> zero_order;  // c_ab(x) >= 0
    std::function<double(const Vec&)> forcing;     // f_ab(x)
    MultiplierField multiplier;                    // null => N_ab = K
};

/// sup_a inf_b problem data on a box-embedded domain. The exterior Dirichlet
/// data g covers all of Omega^c through the grid function's exterior rule.
struct HJBIProblem {
    Region domain;
    LevyKernel kernel;
    EllipticityParams ellip;
    std::size_t n_a = 1, n_b = 1;
    std::vector<ControlPair> pairs;  // a-major, size n_a * n_b
    std::function<double(const Vec&)> dirichlet;
    bool require_nonneg_zero_order = true;

    HJBIProblem(Region dom, LevyKernel K, EllipticityParams P)
        : domain(std::move(dom)), kernel(std::move(K)), ellip(P) {}

    const ControlPair& pair(std::size_t ai, std::size_t bi) const { return pairs[ai * n_b + bi]; }

    static HJBIProblem singleton(Region dom, LevyKernel K, EllipticityParams P, ControlPair cp,
                                 std::function<double(const Vec&)> g);
};

/// The minimal-type extremal equation -P^-(D^2 u) - P^-_{K,r}(u) + C0 r |Du| = f
/// (axis-aligned Pucci and max-norm gradient; see module notes). Solutions are
/// discrete supersolutions of the full extremal inequality.
struct ExtremalMinusProblem {
    Region domain;
    LevyKernel kernel;
    double r_scale = 1.0;
    EllipticityParams ellip;
    std::function<double(const Vec&)> forcing;
    std::function<double(const Vec&)> dirichlet;
};

struct SolveOptions {
    double tol = 0;           // 0 => 1e-8 * (1 + |f|_inf)
    int max_outer = 60;
    long max_steps = 4000000;  // pseudo-time sweep cap
    int nonlocal_refresh = 8;  // sweeps between nonlocal recomputations
    int threads = 1;
    double jacobi_damping = 0.8;
};

struct SolveStats {
    int outer_iters = 0;
    long sweeps = 0;
    double residual = 0;
    double dt = 0;
};

/// Assembled monotone stencils + shared quadrature geometry. Assembly certifies
/// monotonicity (all off-center coefficients <= 0) and throws ConstructionError
/// naming the offending node and control pair otherwise.
class DiscreteOperator {
public:
    DiscreteOperator(HJBIProblem prob, Lattice grid, QuadratureParams qp);
    DiscreteOperator(ExtremalMinusProblem prob, Lattice grid, QuadratureParams qp);
    ~DiscreteOperator();
    DiscreteOperator(DiscreteOperator&&) noexcept;

    const Lattice& grid() const;
    /// g sampled at every node (the initial iterate / Dirichlet values).
    const std::vector<double>& dirichlet_values() const;
    /// Nonlinear residual of the discrete sup-inf operator (0 at Dirichlet nodes).
    std::vector<double> residual(const std::vector<double>& u) const;
    double residual_norm(const std::vector<double>& u) const;
    /// Largest explicit-Euler step keeping the update monotone.
    double stability_dt() const;
    /// Default tolerance 1e-8 * (1 + |f|_inf).
    double default_tol() const;
    GridFunction wrap(std::vector<double> values) const;
    bool is_solve_node(std::size_t flat) const;

    struct Impl;
    Impl& impl() { return *impl_; }
    const Impl& impl() const { return *impl_; }

private:
    std::unique_ptr<Impl> impl_;
};

/// Howard iteration (outer max over a, inner min over b), frozen-policy linear
/// solves by exact local factorization with the nonlocal part lagged.
GridFunction solve_policy_iteration(const DiscreteOperator& op, const SolveOptions& opt = {},
                                    SolveStats* stats = nullptr);

/// Explicit monotone marching u <- u - dt F(u); dt above the stability bound is
/// rejected up front.
GridFunction solve_pseudo_time(const DiscreteOperator& op, double dt, const SolveOptions& opt = {},
                               SolveStats* stats = nullptr);

/// Monotone nondecreasing sweep from a verified subsolution, clamped at a
/// verified supersolution; the limit is the discrete solution.
GridFunction perron_iterate(const DiscreteOperator& op, const GridFunction& lower,
                            const GridFunction& upper, const SolveOptions& opt = {},
                            SolveStats* stats = nullptr);

/// Closed-form data for manufactured solutions.
struct SmoothFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
    std::function<SymMat(const Vec&)> hessian;
};

/// f_ab := tr a D^2 u + I_ab[x,u] - b.Du - c u for each pair, so u_exact solves
/// the equation with zero residual up to quadrature error. Uses closed-form
/// derivatives and a reference-quality scheme independent of any grid.
std::vector<std::function<double(const Vec&)>> manufactured_rhs(const HJBIProblem& prob,
                                                                const SmoothFunction& u_exact,
                                                                const QuadratureParams& qp);

/// Levy operator of a closed-form function (no grid): core via the exact
/// Hessian, annulus/tail via direct evaluation.
double levy_apply_closed(const SmoothFunction& u, const Vec& x, const QuadratureScheme& scheme,
                         const MultiplierField& multiplier = nullptr);

}  // namespace ipde
