// Local Pucci extremal operators, the nonlocal extremal operators, the Levy
// operator, and the full sup-inf operator evaluated on grid functions.
#pragma once

#include "ipde/grid.hpp"
#include "ipde/kernel.hpp"
#include "ipde/quadrature.hpp"

namespace ipde {

struct HJBIProblem;  // solver.hpp

struct EllipticityParams {
    double lambda = 1.0;
    double Lambda = 1.0;
    double C0 = 0.0;  // drift bound

    EllipticityParams() = default;
    EllipticityParams(double lam, double Lam, double c0) : lambda(lam), Lambda(Lam), C0(c0) {
        if (!(0 < lambda && lambda <= Lambda) || C0 < 0)
            throw std::invalid_argument("EllipticityParams: need 0 < lambda <= Lambda, C0 >= 0");
    }
};

/// Central-difference curvature data at a point.
struct HessianEstimate {
    SymMat hessian;
    Vec gradient;
    double spacing;
};

/// Eigenvalues of a symmetric matrix (closed form for d <= 2, Eigen beyond).
std::vector<double> sym_eigenvalues(const SymMat& X);

/// P+(X) = Lambda * sum(eig > 0) + lambda * sum(eig < 0); P- swaps the weights.
double pucci_plus(const SymMat& X, const EllipticityParams& P);
double pucci_minus(const SymMat& X, const EllipticityParams& P);
/// Row-major overloads that reject non-symmetric input (asymmetry > 1e-9 * |X|).
double pucci_plus(const double* row_major, int d, const EllipticityParams& P);
double pucci_minus(const double* row_major, int d, const EllipticityParams& P);

/// Symmetrized second differences and central gradient at x; x must sit at
/// least one stencil width inside the box.
HessianEstimate hessian_estimate(const GridFunction& u, const Vec& x);

/// Pointwise kernel multiplier m(x,z) in [0,1]; N(x,z) = m(x,z) * K_r(z).
using MultiplierField = std::function<double(const Vec& x, const Vec& z)>;

/// integral [u(x+z) - u(x) - 1_{B_{1/r}}(z) Du(x).z] m(x,z) K_r(z) dz.
/// Core via second-order Taylor with the discrete Hessian, annulus and tail via
/// interpolated differences. `scheme` must have been built for (K, r).
double levy_apply(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme,
                  const MultiplierField& multiplier = nullptr);

/// Nonlocal extremal operators: positive / negative part of the compensated
/// increment against K_r.
double nonlocal_pucci_plus(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme);
double nonlocal_pucci_minus(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme);

/// sup_a inf_b { -tr a D^2 u - I_ab[x,u] + b.Du + c u + f } at x (r = 1).
double hjbi_eval(const HJBIProblem& prob, const GridFunction& u, const Vec& x,
                 const QuadratureParams& qp);

/// -P^-(D^2 u)(x) - P^-_{K,r}(u)(x) + C0 r |Du(x)|  (supersolution form).
double extremal_residual_minus(const GridFunction& u, const Vec& x, const EllipticityParams& P,
                               const QuadratureScheme& scheme);

/// Convenience: build the scheme for levy evaluations on this grid (rho_in
/// defaults to 2h when params.inner_radius == 0).
QuadratureScheme make_scheme(const LevyKernel& K, double r_scale, const QuadratureParams& qp,
                             const Lattice& grid);

}  // namespace ipde
