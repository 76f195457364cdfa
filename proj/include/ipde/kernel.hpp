// Levy jump kernels: radial densities K(z), their rescalings K_r, and the
// integrability functionals the estimates are built from.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ipde/common.hpp"

namespace ipde {

enum class KernelFamily {
    Fractional,           // K(z) = |z|^{-d-sigma}, sigma in (0,2)
    TruncatedFractional,  // fractional cut to |z| <= cutoff
    CompactUniform,       // K(z) = height on |z| < radius, 0 outside
    Tabulated,            // piecewise-linear radial profile, 0 past last sample
};

struct QuadratureParams;  // forward (quadrature.hpp)

/// A nonnegative radial jump density with rescaling support.
///
/// The stored scale factor r means this object evaluates K_r(z) = r^{d+2} K(r z)
/// for the base family. Kernels are immutable after construction; construction
/// checks the integrability functional and throws NonIntegrableError when the
/// core integral diverges under refinement.
class LevyKernel {
public:
    /// Default-constructed kernel is identically zero in d = 1.
    LevyKernel() : d_(1), family_(KernelFamily::CompactUniform), radius_(1), height_(0) {}

    static LevyKernel fractional(int d, double sigma);
    static LevyKernel truncated_fractional(int d, double sigma, double cutoff);
    static LevyKernel compact_uniform(int d, double radius, double height);
    static LevyKernel tabulated(int d, std::vector<std::pair<double, double>> samples);
    /// Two-column CSV (radius, density).
    static LevyKernel tabulated_from_csv(int d, const std::string& path);
    /// K identically zero (compact-uniform with height 0).
    static LevyKernel zero(int d);

    int dim() const { return d_; }
    KernelFamily family() const { return family_; }
    double scale_factor() const { return scale_; }
    double sigma() const { return sigma_; }
    bool is_zero() const;

    /// Density at z != 0 (z = 0 is the singular point: domain error).
    double evaluate(const Vec& z) const;
    /// Radial profile at |z| = s > 0, including the scale factor.
    double radial(double s) const;

    /// K_r with r relative to this kernel's current scale.
    LevyKernel scale(double r) const;

    /// Support radius of the scaled kernel (+inf for fractional).
    double support_radius() const;

    /// Radius R with tail mass integral_{|z|>R} K < tol.
    double tail_radius(double tol) const;

    /// m2(rho) = integral_{|z|<rho} |z|^2 K(z) dz.
    double second_moment(double rho) const;
    /// T(rho) = integral_{|z|>rho} K(z) dz.
    double tail_mass(double rho) const;
    /// min-compensated mass: integral min(|z|^2,1) K(z) dz  (Levy condition).
    double levy_integrability() const;
    /// beta(s) = integral_{|z|>s} min(1,|z|) K(z) dz, s > 0.
    double beta(double s) const;
    /// B(l) = integral_0^l beta(tau) dtau, computed via the exact identity
    /// B(l) = l*beta(l) + m2(l).
    double beta_antiderivative(double l) const;

private:
    LevyKernel(int d, KernelFamily f) : d_(d), family_(f) {}
    double base_radial(double s) const;  // profile at scale 1

    int d_ = 1;
    KernelFamily family_;
    double sigma_ = 0;
    double cutoff_ = 0;
    double radius_ = 0;
    double height_ = 0;
    double scale_ = 1.0;
    std::vector<std::pair<double, double>> table_;
};

/// Adaptive integral of f(s) * s^{d-1} * area(S^{d-1}) over s in (lo, hi),
/// with geometric refinement toward lo = 0 and hi = inf. Throws
/// NonIntegrableError when contributions diverge under refinement.
double radial_integral(int d, double lo, double hi, const std::function<double(double)>& f,
                       double tol = 1e-12);

}  // namespace ipde
