// Shell quadrature for singular Levy integrals: a Taylor-compensated core,
// geometric annular shells with volume-centroid nodes, and a truncated tail.
#pragma once

#include "ipde/common.hpp"
#include "ipde/kernel.hpp"

namespace ipde {

/// User-facing parameters (the config block).
struct QuadratureParams {
    double inner_radius = 0;     // rho_in; 0 means "derive from grid spacing" (2h)
    int shells_per_octave = 3;   // radial resolution
    int nodes_per_shell = 12;    // angular nodes in d = 2 (d = 1 always uses the 2 rays)
    double tail_tol = 1e-10;     // truncation mass for unbounded kernels

    QuadratureParams refined() const {
        QuadratureParams q = *this;
        q.inner_radius = inner_radius * 0.5;
        q.shells_per_octave = shells_per_octave * 2;
        q.nodes_per_shell = nodes_per_shell * 2;
        return q;
    }
};

/// One concrete quadrature node: z = radius * direction, weight = its share of
/// the shell volume (kernel applied at evaluation time so node geometry is
/// shared across kernels/multipliers).
struct QuadNode {
    Vec z;
    double weight;      // volume weight
    double kernel;      // K_r(z) cached for the kernel this set was built for
    bool in_unit_ball;  // |z| < 1/r_scale (gradient compensation zone)
};

/// Node set for one (kernel, r) pair. Shell boundaries are aligned with the
/// compensation radius 1/r and the kernel support so the indicator never
/// straddles a shell.
class QuadratureScheme {
public:
    QuadratureScheme(const LevyKernel& base, double r_scale, const QuadratureParams& params,
                     double inner_radius);

    const std::vector<QuadNode>& nodes() const { return nodes_; }
    double inner_radius() const { return rho_in_; }
    double far_cutoff() const { return r_inf_; }
    double compensation_radius() const { return comp_radius_; }
    int dim() const { return d_; }
    /// integral_{|z|<rho_in} |z|^2 K_r dz, for the Taylor core.
    double core_second_moment() const { return core_m2_; }
    /// Unit directions used for the core's angular split.
    const std::vector<Vec>& core_directions() const { return dirs_; }
    const LevyKernel& kernel() const { return kernel_; }

    /// Sum of node weights within a radial band (diagnostics/tests).
    double weight_sum(double r_lo, double r_hi) const;

private:
    int d_;
    double rho_in_, r_inf_, comp_radius_, core_m2_;
    LevyKernel kernel_;  // already scaled (K_r)
    std::vector<QuadNode> nodes_;
    std::vector<Vec> dirs_;
};

}  // namespace ipde
