// Empirical verification of the weak Harnack inequality, superlevel-set decay,
// and Holder-exponent estimation on computed solutions.
#pragma once

#include "ipde/grid.hpp"
#include "ipde/operators.hpp"

namespace ipde {

struct HarnackScaleRow {
    double scale = 0;      // l
    double eps3 = 0;
    double ratio = 0;      // |u|_{L^{eps3}(Q_inner)} / (inf_{Q_inner} u + l |f|_{L^d(Q_l)})
    double constant = 0;   // ratio^{eps3} / l^d  (the Corollary's scale-free constant)
    double inf_inner = 0;
    double f_norm = 0;
};

struct HarnackReport {
    std::vector<double> scales;
    std::vector<double> eps3_grid;
    std::vector<HarnackScaleRow> rows;  // all (scale, eps3) combinations
    double chosen_eps3 = 0;             // largest eps3 with bounded constants
    double max_ratio = 0;               // over scales at the chosen eps3
    double spread = 0;                  // max/min of the scale-free constant
    bool bounded = false;
};

struct HarnackOptions {
    double spread_threshold = 5.0;  // bounded <=> max/min constant <= threshold
    bool check_residual = true;
    double residual_slack = 1e-5;
    EllipticityParams ellip;
    LevyKernel kernel;
    QuadratureParams quad;
};

/// Corollary-form ratios of a nonnegative supersolution on the nested cubes
/// Q_{l/(9 sqrt d)} vs Q_l, for each scale l and each candidate eps3. By the
/// scaling substitution these are exactly the ratios of the rescaled family
/// u_l(x) = u(l x) on the fixed cubes.
HarnackReport weak_harnack_check(const GridFunction& u, const GridFunction& f,
                                 const std::vector<double>& scales,
                                 const std::vector<double>& eps3_grid,
                                 const HarnackOptions& opt);

struct SuperlevelRow {
    double t = 0;
    double measure = 0;
    double bound_shape = 0;  // l^d (inf + l|f|)^{eps3} t^{-eps3}
};

struct SuperlevelReport {
    std::vector<SuperlevelRow> rows;
    double fitted_c = 0;  // smallest C with measure <= C * bound_shape on the grid
    double eps3 = 0;
    double l = 0;
};

/// Empirical superlevel-set measure |{u > t} cap B_l| against the
/// t^{-eps3}-shaped bound; reports the smallest admissible C.
SuperlevelReport superlevel_decay(const GridFunction& u, const GridFunction& f, double l,
                                  double eps3, const std::vector<double>& t_grid);

struct OscillationSequence {
    std::vector<double> values;  // osc over B_{ratio^{-k}}(x0), k = 0..kmax
    double ratio = 8;
    bool truncated = false;  // smallest balls unresolvable; kmax reduced
};

/// osc(u, B_{ratio^{-k}}(x0)) for k = 0..kmax; balls needing fewer than 5 nodes
/// across truncate the sequence with a warning flag.
OscillationSequence oscillation_sequence(const GridFunction& u, const Vec& x0, double ratio,
                                         int kmax);

struct HolderFit {
    double alpha = 0;
    double constant = 0;  // intercept with safety factor 2
    double fit_residual = 0;
};

/// Least-squares fit of log osc_k against -k log(ratio). Fewer than 3 positive
/// entries is an insufficient-data error.
HolderFit holder_fit(const OscillationSequence& seq);

}  // namespace ipde
