// Discrete convex envelopes, contact sets, paraboloid touching sets,
// sup-convolutions, and the ABP-inequality checker.
#pragma once

#include "ipde/barriers.hpp"
#include "ipde/grid.hpp"
#include "ipde/operators.hpp"

namespace ipde {

/// Nodes where a supporting affine function touches from below, with the
/// supporting slope where one was found. Indexed by lattice flat index.
struct ContactMask {
    std::vector<std::uint8_t> mask;
    std::vector<Vec> slope;
    std::vector<std::uint8_t> has_slope;

    std::size_t count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

struct ParaboloidMask {
    std::vector<std::uint8_t> mask;
    double opening_bound = 0;

    std::size_t count() const {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

/// Largest convex function <= u on the region's nodes: exact lower hull in
/// d = 1, per-node supporting-plane LP in d = 2. Non-convex regions are a
/// domain error. Values outside the region pass through unchanged.
GridFunction convex_envelope(const GridFunction& u, const Region& region);

enum class ContactVariant { Local, Nonlocal };

/// Local: u - envelope <= tol. Nonlocal: additionally u(x) < inf_{O^c} u and a
/// supporting plane over the diam(O)-collar (sampled on the lattice and its
/// exterior extension).
ContactMask contact_set(const GridFunction& u, const Region& region, ContactVariant variant,
                        double tol);

/// Default contact tolerance 10 h^2 (1 + |u|_inf).
double default_contact_tol(const GridFunction& u);

/// u^eps(x) = max_y [u(y) - |x-y|^2/(2 eps)] over lattice points (including the
/// virtual exterior lattice), search truncated at radius 2 sqrt(eps osc(u)).
GridFunction sup_convolution(const GridFunction& u, double eps);

/// Nodes admitting a concave paraboloid of opening <= M touching from below
/// over B_rho(x); the opening is swept over 33 log-spaced values in [0, M].
ParaboloidMask paraboloid_touch_set(const GridFunction& u, double M, const Region& region,
                                    double rho);

struct AbpOptions {
    double residual_slack = 1e-6;  // precondition tolerance on the extremal residual
    bool check_residual = true;
};

/// Empirical ABP inequality check:
///   -inf_Omega u <= -inf_{Omega^c} u + C diam(Omega) |f^-|_{L^d(contact set of u^-)}.
/// Reports the empirical constant; pass=false only on an outright violation
/// with vanishing right-hand side.
VerificationReport abp_check(const GridFunction& u, const GridFunction& f, const Region& omega,
                             const EllipticityParams& P, const LevyKernel& K, double r,
                             const QuadratureParams& qp, const AbpOptions& opt = {});

void write_mask_csv(const ContactMask& mask, const Lattice& grid, const std::string& path);

// Small dense LP (Seidel's algorithm), <= 3 variables: maximize c.v subject to
// a.v <= b rows plus |v_i| <= bound. Exposed for tests.
struct LinearConstraint {
    double a[3];
    double b;
};
std::optional<std::array<double, 3>> seidel_maximize(std::vector<LinearConstraint> cons,
                                                     const double c[3], double bound, int dim,
                                                     std::uint64_t seed);

}  // namespace ipde
