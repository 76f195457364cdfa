// The four explicit barrier functions and the numerical verification of their
// defining differential inequalities, uniformly over the kernel-scaling family.
//
// The special barrier's steepness parameter eta comes out of a certificate
// search and can reach 2^40, far past float64 range for the barrier's values;
// its verification therefore runs in exponent-stripped units (residual times
// e^{+eta|x|}), which is exact because every operator involved is positively
// 1-homogeneous. Constants are reported in log2 form alongside a (possibly
// infinite) double.
#pragma once

#include "ipde/grid.hpp"
#include "ipde/operators.hpp"

namespace ipde {

enum class BarrierKind { Special, RescaledSpecial, Boundary, Global, Constant };

struct BarrierSpec {
    BarrierKind kind;
    int d = 1;
    EllipticityParams ellip;
    LevyKernel kernel;  // base K
    double eta = 0;
    double J = 0, T = 0;  // integral_{B_1}|z|^2 K and integral_{B_1^c} K

    // special / rescaled-special
    double space_scale = 1.0;  // 1 or r0 = 1/(9 sqrt d)
    double log2_M = 0;
    double cap_a = 0, cap_b = 0, cap_c = 0;  // cap polynomial relative coefficients
    double sup_log2 = 0;                     // log2 of the sup-norm

    // boundary(r)
    double r = 0;
    double delta1 = 0, delta2 = 0, eps5 = 0;
    double lipschitz = 0;
    std::vector<double> s_grid, psi_vals, psi_d1, psi_d2;  // psi-tilde tables

    // global
    double x1_ref = 0, eps6 = 0, tau = 0, x1_max = 0;

    double constant_value = 0;

    /// Direct value; overflows to +-inf for extreme special-barrier eta.
    double value(const Vec& x) const;
    /// log2 |Psi(x)| for the special kinds (sign via value's construction).
    double special_log2_value(double radius) const;
    /// psi-tilde table lookup (boundary barrier).
    double psi_tilde(double s) const;
    double psi_tilde_d1(double s) const;
    double psi_tilde_d2(double s) const;
};

/// Per-sample verification row. Residuals and budgets are reported in the
/// normalized (exponent-stripped, scale-divided) units described in the README.
struct BarrierSample {
    Vec x;
    double r_scale = 1;
    double residual_hat = 0;
    double budget_hat = 0;
    double xi = 0;
    double scale_hat = 1;
    double margin = 0;
    bool ok = true;
};

struct VerificationReport {
    std::string kind;
    bool pass = false;
    double worst_margin = 0;   // normalized units; pass <=> worst_margin >= -tol_budget
    double tol_budget = 0;
    double emp_constant = 0;       // C of the inequality (may be inf)
    double emp_constant_log2 = 0;  // log2 of the same constant
    double sup_norm_log2 = 0;
    std::size_t n_samples = 0;
    std::vector<BarrierSample> samples;
    std::vector<std::string> notes;
};

/// Lemma-style special barrier: Psi = M (phi - e^{-2 sqrt d eta}) with
/// phi = e^{-eta|x|} outside B_{1/3} and an even quartic cap inside, eta the
/// smallest power of 2 passing the scalar certificate built from J and T.
BarrierSpec build_special(int d, const EllipticityParams& P, const LevyKernel& K);

/// Rescaled special barrier: x -> Psi(x / r0), r0 = 1/(9 sqrt d).
BarrierSpec rescale_special(const BarrierSpec& special);

/// Checks P^-(D^2 Psi) + P^-_{K,r}(Psi) - C0|D Psi| >= -C xi pointwise over all
/// scales and samples; reports the smallest admissible C (log2 form).
VerificationReport verify_special(const BarrierSpec& B, const std::vector<double>& scales,
                                  const std::vector<Vec>& samples, const QuadratureParams& qp);

/// Deterministic sample cloud for the special verification (dense where the
/// cutoff lives, a ring around the transition, a few far points).
std::vector<Vec> special_sample_points(const BarrierSpec& B, std::size_t n, std::uint64_t seed);

/// Boundary barrier psi_r vanishing on B_r, built from the kernel tail
/// functional beta via the integral profile psi-tilde.
BarrierSpec build_boundary_barrier(double r, int d, const EllipticityParams& P,
                                   const LevyKernel& K);

/// Global barrier 2 - e^{-eta (x1 - ref)} with eta from the scalar certificate;
/// records eps6 > 0 with residual <= -eps6 on Omega.
BarrierSpec build_global_barrier(const BoxDomain& omega, const EllipticityParams& P,
                                 const LevyKernel& K);

/// Constant function pseudo-barrier (exercises the failure path).
BarrierSpec constant_barrier(int d, double value);

enum class InequalityForm { SubsolutionMinus, SupersolutionPlus };

/// Pointwise residual check of the requested inequality form on the given
/// samples: boundary barrier against <= -1 on the annulus, global barrier
/// against <= -eps6 on Omega.
VerificationReport verify_inequality(const BarrierSpec& B, InequalityForm form,
                                     const std::vector<Vec>& samples,
                                     const QuadratureParams& qp);

/// Samples for verify_inequality: annulus cloud for the boundary barrier,
/// box cloud for the global one.
std::vector<Vec> inequality_sample_points(const BarrierSpec& B, const BoxDomain* omega,
                                          std::size_t n, std::uint64_t seed);

}  // namespace ipde
