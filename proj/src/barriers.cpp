#include "ipde/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kT0 = 1.0 / 3.0;  // cap seam radius of the special profile
constexpr double kLog2e = 1.4426950408889634;

// Smooth radial bump supported on the closed unit ball, normalized to [0,1].
double unit_bump(double s) {
    if (s >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

// Scalar certificate that makes e^{-eta|x|} a subsolution of the minimal
// equation outside B_1, uniformly over the kernel-scaling family.
double special_certificate(double eta, int d, const EllipticityParams& P, double J, double T) {
    double L = std::log(eta);
    return P.lambda * eta * eta - P.Lambda * (d - 1) * eta - 2.0 * std::pow(eta, 1.5) * J -
           4.0 * eta * eta * J / (L * L) - T - 2.0 * eta * eta * J / L - P.C0 * eta;
}

// Scalar certificate of the global barrier: S(eta) > 0 gives residual
// <= -S(eta) e^{-eta x1} on the strip containing Omega.
double global_certificate(double eta, const EllipticityParams& P, double J, double T, double tau) {
    return P.lambda * eta * eta - P.C0 * eta - (2.0 * eta / tau) * J - T;
}

double pucci_of_pair(double eig_rad, double eig_tan, int d, double pos_w, double neg_w) {
    double s = eig_rad > 0 ? pos_w * eig_rad : neg_w * eig_rad;
    if (d > 1) s += (d - 1) * (eig_tan > 0 ? pos_w * eig_tan : neg_w * eig_tan);
    return s;
}

}  // namespace

// --- BarrierSpec evaluators ---------------------------------------------------

double BarrierSpec::special_log2_value(double radius) const {
    double s = radius / space_scale;
    double log_phi;
    if (s >= kT0) {
        log_phi = -eta * s;
    } else {
        log_phi = -eta * kT0 + std::log(cap_a + cap_b * s * s + cap_c * s * s * s * s);
    }
    double log_coff = -eta * 2.0 * std::sqrt(double(d));
    // log(phi - c_inf) = log_phi + log1p(-exp(log_coff - log_phi)); negative past
    // the zero crossing, where the value itself is <= 0 and this is unused.
    double diff = log_coff - log_phi;
    double log_val = log_phi + std::log1p(-std::exp(std::min(diff, 0.0)));
    return log2_M + log_val * kLog2e;
}

double BarrierSpec::psi_tilde(double s) const {
    if (s <= 0) return 0.0;
    if (s >= s_grid.back()) return psi_vals.back();
    double t = s / s_grid.back() * double(s_grid.size() - 1);
    std::size_t j = std::min<std::size_t>(std::size_t(t), s_grid.size() - 2);
    double w = t - double(j);
    return psi_vals[j] * (1 - w) + psi_vals[j + 1] * w;
}

double BarrierSpec::psi_tilde_d1(double s) const {
    if (s <= 0) return psi_d1.empty() ? 1.0 : psi_d1.front();
    if (s >= s_grid.back()) return 0.0;
    double t = s / s_grid.back() * double(s_grid.size() - 1);
    std::size_t j = std::min<std::size_t>(std::size_t(t), s_grid.size() - 2);
    double w = t - double(j);
    return psi_d1[j] * (1 - w) + psi_d1[j + 1] * w;
}

double BarrierSpec::psi_tilde_d2(double s) const {
    if (s <= 0 || s >= s_grid.back()) return 0.0;
    double t = s / s_grid.back() * double(s_grid.size() - 1);
    std::size_t j = std::min<std::size_t>(std::size_t(t), s_grid.size() - 2);
    double w = t - double(j);
    return psi_d2[j] * (1 - w) + psi_d2[j + 1] * w;
}

double BarrierSpec::value(const Vec& x) const {
    switch (kind) {
        case BarrierKind::Special:
        case BarrierKind::RescaledSpecial: {
            double s = x.norm() / space_scale;
            double phi = s >= kT0 ? std::exp(-eta * s)
                                  : std::exp(-eta * kT0) *
                                        (cap_a + cap_b * s * s + cap_c * s * s * s * s);
            double coff = std::exp(-eta * 2.0 * std::sqrt(double(d)));
            return std::exp2(log2_M) * (phi - coff);  // overflows for extreme eta (documented)
        }
        case BarrierKind::Boundary: {
            double dist = std::max(0.0, x.norm() - r);
            return psi_tilde(std::min(dist / r, delta2));
        }
        case BarrierKind::Global: {
            double q = x[0] - x1_ref;
            return q >= 0 ? 2.0 - std::exp(-eta * q) : 1.0;
        }
        case BarrierKind::Constant:
            return constant_value;
    }
    return 0;
}

// --- special barrier ----------------------------------------------------------

BarrierSpec build_special(int d, const EllipticityParams& P, const LevyKernel& K) {
    if (K.dim() != d) throw std::invalid_argument("build_special: kernel dimension mismatch");
    K.levy_integrability();  // throws for non-integrable kernels

    BarrierSpec B;
    B.kind = BarrierKind::Special;
    B.d = d;
    B.ellip = P;
    B.kernel = K;
    B.J = K.second_moment(1.0);
    B.T = K.tail_mass(1.0);

    double eta = 2.0;
    bool found = false;
    while (eta <= std::exp2(40)) {
        if (special_certificate(eta, d, P, B.J, B.T) >= 0) {
            found = true;
            break;
        }
        eta *= 2.0;
    }
    if (!found)
        throw ConstructionError(
            "build_special: certificate search exhausted (eta > 2^40); kernel integrals too "
            "large for this ellipticity");
    B.eta = eta;

    // Even quartic cap matched to value/first/second derivative at |x| = t0;
    // coefficients relative to e^{-eta t0}. Radially decreasing by construction.
    const double t0 = kT0;
    B.cap_c = (eta * eta + eta / t0) / (8 * t0 * t0);
    B.cap_b = -eta / (2 * t0) - (eta * eta + eta / t0) / 4.0;
    B.cap_a = 1.0 - B.cap_b * t0 * t0 - B.cap_c * t0 * t0 * t0 * t0;

    // M: smallest power of 2 with Psi >= 2 on the cube whose corner reaches
    // (3/2) sqrt(d), inside B_{2 sqrt d}.
    double q3 = 1.5 * std::sqrt(double(d));
    double log_phimin =
        -eta * q3 + std::log1p(-std::exp(-eta * (2.0 * std::sqrt(double(d)) - q3)));
    B.log2_M = std::ceil(1.0 - log_phimin * kLog2e);
    // sup-norm attained at the origin
    double log_phi0 = -eta * t0 + std::log(B.cap_a);
    B.sup_log2 = B.log2_M + log_phi0 * kLog2e;
    B.space_scale = 1.0;
    return B;
}

BarrierSpec rescale_special(const BarrierSpec& special) {
    if (special.kind != BarrierKind::Special)
        throw std::invalid_argument("rescale_special: expects the special barrier");
    BarrierSpec B = special;
    B.kind = BarrierKind::RescaledSpecial;
    B.space_scale = 1.0 / (9.0 * std::sqrt(double(special.d)));
    return B;
}

namespace {

// Exponent-stripped pointwise data of the special profile.
struct SpecialAt {
    double s;        // |x| / rho
    double val_str;  // phi(x) e^{+eta s}
    double grad_str; // radial derivative, stripped
    double eig_rad;  // stripped Hessian eigenvalues
    double eig_tan;
};

struct SpecialEvaluator {
    double eta, rho, a, b, c;
    int d;

    // phi(target) e^{+eta s_eval}; +inf marks an overflowing (strongly positive
    // increment) evaluation, which the negative part discards.
    double phi_str(double s_target, double s_eval) const {
        if (s_target >= kT0) {
            double e = eta * (s_eval - s_target);
            return e > 700 ? kInf : std::exp(e);
        }
        double e = eta * (s_eval - kT0);
        if (e > 690) return kInf;
        double s2 = s_target * s_target;
        return std::exp(e) * (a + b * s2 + c * s2 * s2);
    }

    SpecialAt at(double radius) const {
        SpecialAt p;
        double s = radius / rho;
        p.s = s;
        if (s >= kT0) {
            p.val_str = 1.0;
            p.grad_str = -eta / rho;
            p.eig_rad = eta * eta / (rho * rho);
            p.eig_tan = -eta / (s * rho * rho);
        } else {
            double F0 = std::exp(eta * (s - kT0));
            double s2 = s * s;
            double q = a + b * s2 + c * s2 * s2;
            double qd = 2 * b * s + 4 * c * s * s2;
            double qdd = 2 * b + 12 * c * s2;
            p.val_str = F0 * q;
            p.grad_str = F0 * qd / rho;
            p.eig_rad = F0 * qdd / (rho * rho);
            p.eig_tan = s < 1e-12 ? F0 * 2 * b / (rho * rho) : F0 * qd / (s * rho * rho);
        }
        return p;
    }
};

// Stripped residual of the minimal-equation form at x against one scale's scheme.
double special_residual_hat(const SpecialEvaluator& ev, const EllipticityParams& P, const Vec& x,
                            const QuadratureScheme& scheme, double* scale_hat) {
    SpecialAt p = ev.at(x.norm());
    double local = pucci_of_pair(p.eig_rad, p.eig_tan, ev.d, P.lambda, P.Lambda);
    double gradmag = std::abs(p.grad_str);

    double xn = x.norm();
    Vec xhat(x.dim());
    if (xn > 1e-300) xhat = (1.0 / xn) * x;

    double nl = 0;
    if (!scheme.kernel().is_zero()) {
        double core = 0;
        const auto& dirs = scheme.core_directions();
        for (const Vec& e : dirs) {
            double xe = dot(xhat, e);
            double q = 0.5 * (p.eig_tan + (p.eig_rad - p.eig_tan) * xe * xe);
            if (q < 0) core += q;  // negative part of the Taylor core
        }
        core *= scheme.core_second_moment() / double(dirs.size());

        std::vector<double> terms;
        terms.reserve(scheme.nodes().size());
        for (const QuadNode& n : scheme.nodes()) {
            double tgt = (x + n.z).norm();
            double inc = ev.phi_str(tgt / ev.rho, p.s) - p.val_str;
            if (n.in_unit_ball) inc -= p.grad_str * dot(xhat, n.z);
            if (inc < 0) terms.push_back(inc * n.kernel * n.weight);
        }
        nl = core + compensated_sum(terms);
    }

    if (scale_hat) *scale_hat = 1.0 + std::abs(local) + std::abs(nl) + P.C0 * gradmag;
    return local + nl - P.C0 * gradmag;
}

}  // namespace

std::vector<Vec> special_sample_points(const BarrierSpec& B, std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Vec> pts;
    pts.reserve(n);
    double rho = B.space_scale;
    double far = B.kind == BarrierKind::Special ? 2.0 * std::sqrt(double(B.d)) + 1.0 : 1.2;
    while (pts.size() < n) {
        double u = rng.next_double();
        double s;
        if (u < 0.45)
            s = rng.uniform(0.0, 1.2) * rho;
        else if (u < 0.70)
            s = (1.0 + 0.2 * rng.uniform(-1.0, 1.0)) * rho;
        else if (u < 0.85)
            s = std::max(0.0, kT0 + 0.1 * rng.uniform(-1.0, 1.0)) * rho;
        else
            s = rng.uniform(1.2 * rho, std::max(1.3 * rho, far));
        Vec x(B.d);
        if (B.d == 1) {
            x[0] = rng.next_double() < 0.5 ? s : -s;
        } else {
            double norm2 = 0;
            for (int i = 0; i < B.d; ++i) {
                x[i] = rng.uniform(-1.0, 1.0);
                norm2 += x[i] * x[i];
            }
            if (norm2 < 1e-12) continue;
            double inv = s / std::sqrt(norm2);
            for (int i = 0; i < B.d; ++i) x[i] *= inv;
        }
        pts.push_back(x);
    }
    return pts;
}

VerificationReport verify_special(const BarrierSpec& B, const std::vector<double>& scales,
                                  const std::vector<Vec>& samples, const QuadratureParams& qp) {
    if (B.kind != BarrierKind::Special && B.kind != BarrierKind::RescaledSpecial)
        throw std::invalid_argument("verify_special: expects a special barrier");
    const double r_max = B.kind == BarrierKind::Special ? 1.0 : 9.0 * std::sqrt(double(B.d));
    for (double r : scales)
        if (!(r > 0 && r <= r_max * (1 + 1e-12)))
            throw std::domain_error("verify_special: scale outside the admissible range");

    SpecialEvaluator ev{B.eta, B.space_scale, B.cap_a, B.cap_b, B.cap_c, B.d};
    VerificationReport rep;
    rep.kind = B.kind == BarrierKind::Special ? "special" : "rescaled-special";
    rep.sup_norm_log2 = B.sup_log2;

    double rho_in = B.space_scale * std::min(kT0, 1.0 / B.eta) / 4.0;
    double log2C = -kInf;
    bool any_fail = false;
    double worst_budget_norm = 0;

    struct Row {
        Vec x;
        double r, Rf, budget, xi, scale;
        bool fail;
    };
    std::vector<Row> rows;
    rows.reserve(scales.size() * samples.size());

    for (double r : scales) {
        QuadratureScheme coarse(B.kernel, r, qp, rho_in);
        QuadratureScheme fine(B.kernel, r, qp.refined(), rho_in * 0.5);
        for (const Vec& x : samples) {
            double sc_c = 1, sc_f = 1;
            double Rc = special_residual_hat(ev, B.ellip, x, coarse, &sc_c);
            double Rf = special_residual_hat(ev, B.ellip, x, fine, &sc_f);
            double budget = std::abs(Rf - Rc) + 1e-8 * (1.0 + sc_f);
            double xi = unit_bump(x.norm() / B.space_scale);
            bool fail = false;
            if (Rf < -budget) {
                if (xi <= 0) {
                    fail = true;
                    any_fail = true;
                } else {
                    double cand = B.log2_M + std::log2(-Rf) -
                                  B.eta * (x.norm() / B.space_scale) * kLog2e - std::log2(xi);
                    log2C = std::max(log2C, cand);
                }
            }
            worst_budget_norm = std::max(worst_budget_norm, budget / sc_f);
            rows.push_back({x, r, Rf, budget, xi, sc_f, fail});
        }
    }

    rep.emp_constant_log2 = log2C == -kInf ? 0.0 : log2C;
    rep.emp_constant = log2C == -kInf ? 0.0 : (log2C > 1023.0 ? kInf : std::exp2(log2C));
    rep.tol_budget = worst_budget_norm;

    double worst_margin = kInf;
    for (const Row& row : rows) {
        BarrierSample s;
        s.x = row.x;
        s.r_scale = row.r;
        s.residual_hat = row.Rf;
        s.budget_hat = row.budget;
        s.xi = row.xi;
        s.scale_hat = row.scale;
        double allow = 0.0;
        if (row.xi > 0 && log2C > -kInf) {
            double e2 = log2C - B.log2_M + B.eta * (row.x.norm() / B.space_scale) * kLog2e +
                        std::log2(row.xi);
            allow = std::exp2(std::min(e2, 600.0));
        }
        s.margin = (row.Rf + allow) / row.scale;
        s.ok = !row.fail;
        worst_margin = std::min(worst_margin, s.margin);
        rep.samples.push_back(std::move(s));
    }
    rep.worst_margin = worst_margin;
    rep.n_samples = rep.samples.size();
    rep.pass = !any_fail;
    if (any_fail)
        rep.notes.push_back("negative residual beyond budget outside the cutoff support");
    return rep;
}

// --- boundary barrier -----------------------------------------------------------

BarrierSpec build_boundary_barrier(double r, int d, const EllipticityParams& P,
                                   const LevyKernel& K) {
    if (!(r > 0 && r < 1)) throw std::domain_error("build_boundary_barrier: need 0 < r < 1");
    BarrierSpec B;
    B.kind = BarrierKind::Boundary;
    B.d = d;
    B.r = r;
    B.ellip = P;
    B.kernel = K;
    B.J = K.second_moment(1.0);
    B.T = K.tail_mass(1.0);

    // eta = (C+1)/lambda, C assembled from the proof's intermediate bounds.
    double C = P.Lambda * (d - 1) + P.C0 + 2.0 * B.J + 2.0 * B.T + 1.0;
    B.eta = (C + 1.0) / P.lambda;

    // delta2 = s(eta)/2 where psi-tilde' first drops to 1/2:
    // solve s + B(s) = log(4/3)/eta (strictly increasing left side).
    double target = std::log(4.0 / 3.0) / B.eta;
    auto gfun = [&](double s) { return s + K.beta_antiderivative(s); };
    double lo = 0.0, hi = std::max(1.0, target);
    for (int guard = 0; guard < 60 && gfun(hi) < target; ++guard) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (gfun(mid) < target ? lo : hi) = mid;
    }
    double s_eta = 0.5 * (lo + hi);
    if (!(s_eta > 0)) throw ConstructionError("boundary barrier: psi-tilde' < 1/2 immediately");
    B.delta2 = 0.5 * s_eta;
    B.delta1 = std::min(B.delta2 / 4.0, 1.0);

    // Tabulate psi-tilde and derivatives on [0, delta2] (composite Simpson).
    const std::size_t N = 4097;
    B.s_grid.resize(N);
    B.psi_vals.resize(N);
    B.psi_d1.resize(N);
    B.psi_d2.resize(N);
    double ds = B.delta2 / double(N - 1);
    auto deriv = [&](double s) {
        return 2.0 * std::exp(-B.eta * s - B.eta * K.beta_antiderivative(s)) - 1.0;
    };
    double acc = 0;
    double prev = deriv(0.0);
    B.s_grid[0] = 0;
    B.psi_vals[0] = 0;
    B.psi_d1[0] = prev;
    for (std::size_t j = 1; j < N; ++j) {
        double s = ds * double(j);
        double mid = deriv(s - 0.5 * ds);
        double cur = deriv(s);
        acc += ds / 6.0 * (prev + 4.0 * mid + cur);
        prev = cur;
        B.s_grid[j] = s;
        B.psi_vals[j] = acc;
        B.psi_d1[j] = cur;
    }
    for (std::size_t j = 0; j < N; ++j) {
        double s = std::max(B.s_grid[j], 0.25 * ds);
        double beta = K.is_zero() ? 0.0 : K.beta(s);
        B.psi_d2[j] =
            -2.0 * B.eta * (1.0 + beta) * std::exp(-B.eta * s - B.eta * K.beta_antiderivative(s));
    }
    B.eps5 = B.psi_tilde(B.delta1);
    B.lipschitz = 1.0 / r;
    B.sup_log2 = std::log2(std::max(B.psi_vals.back(), 1e-300));
    if (!(B.eps5 > 0)) throw ConstructionError("boundary barrier: eps5 not positive");
    return B;
}

// --- global barrier --------------------------------------------------------------

BarrierSpec build_global_barrier(const BoxDomain& omega, const EllipticityParams& P,
                                 const LevyKernel& K) {
    BarrierSpec B;
    B.kind = BarrierKind::Global;
    B.d = omega.dim();
    B.ellip = P;
    B.kernel = K;
    B.J = K.second_moment(1.0);
    B.T = K.tail_mass(1.0);

    double R0 = omega.diam();
    B.tau = std::min(1.0, R0);
    B.x1_ref = omega.lo[0] - R0;  // Omega sits at x1-distance >= diam(Omega)
    B.x1_max = omega.hi[0] - B.x1_ref;

    double eta = 2.0;
    bool found = false;
    while (eta <= std::exp2(40) && eta * B.x1_max <= 600.0) {
        if (global_certificate(eta, P, B.J, B.T, B.tau) > 0) {
            found = true;
            break;
        }
        eta *= 2.0;
    }
    if (!found)
        throw ConstructionError(
            "build_global_barrier: eta search failed (certificate not satisfiable within the "
            "representable strip)");
    B.eta = eta;
    B.eps6 = global_certificate(eta, P, B.J, B.T, B.tau) * std::exp(-eta * B.x1_max);
    B.sup_log2 = 1.0;  // sup = 2
    return B;
}

BarrierSpec constant_barrier(int d, double value) {
    BarrierSpec B;
    B.kind = BarrierKind::Constant;
    B.d = d;
    B.constant_value = value;
    B.kernel = LevyKernel::zero(d);
    return B;
}

// --- plus-form verification -------------------------------------------------------

namespace {

// P^+ residual of the boundary barrier at x (direct units).
double boundary_residual(const BarrierSpec& B, const Vec& x, const QuadratureScheme& scheme,
                         double* scale_out) {
    const EllipticityParams& P = B.ellip;
    double xn = x.norm();
    double s = (xn - B.r) / B.r;
    double p1 = B.psi_tilde_d1(s), p2 = B.psi_tilde_d2(s);
    double eig_rad = p2 / (B.r * B.r);
    double eig_tan = p1 / (B.r * xn);
    double local = pucci_of_pair(eig_rad, eig_tan, B.d, P.Lambda, P.lambda);
    double gradmag = std::abs(p1) / B.r;

    Vec xhat = (1.0 / xn) * x;
    double nl = 0;
    if (!scheme.kernel().is_zero()) {
        double core = 0;
        const auto& dirs = scheme.core_directions();
        for (const Vec& e : dirs) {
            double xe = dot(xhat, e);
            double q = 0.5 * (eig_tan + (eig_rad - eig_tan) * xe * xe);
            if (q > 0) core += q;
        }
        core *= scheme.core_second_moment() / double(dirs.size());

        double v0 = B.value(x);
        std::vector<double> terms;
        terms.reserve(scheme.nodes().size());
        for (const QuadNode& n : scheme.nodes()) {
            double inc = B.value(x + n.z) - v0;
            if (n.in_unit_ball) inc -= p1 / B.r * dot(xhat, n.z);
            if (inc > 0) terms.push_back(inc * n.kernel * n.weight);
        }
        nl = core + compensated_sum(terms);
    }
    if (scale_out) *scale_out = 1.0 + std::abs(local) + std::abs(nl) + P.C0 * gradmag;
    return local + nl + P.C0 * gradmag;
}

// Stripped P^+ residual of the global barrier: e^{+eta q} * residual at x.
double global_residual_hat(const BarrierSpec& B, const Vec& x, const QuadratureScheme& scheme,
                           double* scale_out) {
    const EllipticityParams& P = B.ellip;
    double q = x[0] - B.x1_ref;
    double eta = B.eta;
    double local = -P.lambda * eta * eta;  // P^+ of the stripped Hessian -eta^2 e1 e1^T
    double gradmag = eta;

    double nl = 0;
    if (!scheme.kernel().is_zero()) {
        // Taylor core integrand -eta^2 theta_1^2 <= 0: positive part vanishes.
        std::vector<double> terms;
        terms.reserve(scheme.nodes().size());
        for (const QuadNode& n : scheme.nodes()) {
            double w = q + n.z[0];
            double expo = eta * (q - std::max(w, 0.0));
            double inc = 1.0 - std::exp(std::min(expo, 690.0));
            if (n.in_unit_ball) inc -= eta * n.z[0];
            if (inc > 0) terms.push_back(inc * n.kernel * n.weight);
        }
        nl = compensated_sum(terms);
    }
    if (scale_out) *scale_out = 1.0 + std::abs(local) + std::abs(nl) + P.C0 * gradmag;
    return local + nl + P.C0 * gradmag;
}

}  // namespace

std::vector<Vec> inequality_sample_points(const BarrierSpec& B, const BoxDomain* omega,
                                          std::size_t n, std::uint64_t seed) {
    SplitMix64 rng(seed);
    std::vector<Vec> pts;
    pts.reserve(n);
    if (B.kind == BarrierKind::Boundary) {
        while (pts.size() < n) {
            double t = rng.next_double();
            double s = B.r * (1.0 + B.delta1 * (0.02 + 0.96 * t));
            Vec x(B.d);
            if (B.d == 1) {
                x[0] = rng.next_double() < 0.5 ? s : -s;
            } else {
                double a = rng.uniform(0.0, 2.0 * M_PI);
                x[0] = s * std::cos(a);
                x[1] = s * std::sin(a);
            }
            pts.push_back(x);
        }
        return pts;
    }
    if (!omega) throw std::invalid_argument("inequality_sample_points: omega required");
    while (pts.size() < n) {
        Vec x(omega->dim());
        for (int i = 0; i < omega->dim(); ++i) x[i] = rng.uniform(omega->lo[i], omega->hi[i]);
        pts.push_back(x);
    }
    return pts;
}

VerificationReport verify_inequality(const BarrierSpec& B, InequalityForm form,
                                     const std::vector<Vec>& samples, const QuadratureParams& qp) {
    VerificationReport rep;
    rep.sup_norm_log2 = B.sup_log2;
    rep.kind = B.kind == BarrierKind::Boundary ? "boundary"
               : B.kind == BarrierKind::Global ? "global"
                                               : "constant";
    if (form == InequalityForm::SubsolutionMinus)
        rep.notes.push_back("subsolution-minus form checked through the -psi symmetry");

    double worst = kInf, worst_budget = 0;
    if (B.kind == BarrierKind::Boundary) {
        double rho_in = B.r * B.delta2 / 8.0;
        QuadratureScheme coarse(B.kernel, 1.0, qp, rho_in);
        QuadratureScheme fine(B.kernel, 1.0, qp.refined(), rho_in * 0.5);
        for (const Vec& x : samples) {
            double sc = 1, sf = 1;
            double Rc = boundary_residual(B, x, coarse, &sc);
            double Rf = boundary_residual(B, x, fine, &sf);
            double budget = std::abs(Rf - Rc) + 1e-8 * (1 + sf);
            BarrierSample row;
            row.x = x;
            row.residual_hat = Rf;
            row.budget_hat = budget;
            row.scale_hat = sf;
            row.margin = (-1.0 - Rf) / sf;
            row.ok = row.margin >= -budget / sf;
            worst = std::min(worst, row.margin);
            worst_budget = std::max(worst_budget, budget / sf);
            rep.samples.push_back(std::move(row));
        }
        rep.emp_constant = B.eps5;
    } else if (B.kind == BarrierKind::Global) {
        double rho_in = std::min(0.25, 1.0 / (4.0 * B.eta));
        QuadratureScheme coarse(B.kernel, 1.0, qp, rho_in);
        QuadratureScheme fine(B.kernel, 1.0, qp.refined(), rho_in * 0.5);
        double S = global_certificate(B.eta, B.ellip, B.J, B.T, B.tau);
        for (const Vec& x : samples) {
            double sc = 1, sf = 1;
            double Rc = global_residual_hat(B, x, coarse, &sc);
            double Rf = global_residual_hat(B, x, fine, &sf);
            double budget = std::abs(Rf - Rc) + 1e-8 * (1 + sf);
            BarrierSample row;
            row.x = x;
            row.residual_hat = Rf;
            row.budget_hat = budget;
            row.scale_hat = sf;
            row.margin = (-S - Rf) / sf;  // stripped form of: residual <= -eps6
            row.ok = row.margin >= -budget / sf;
            worst = std::min(worst, row.margin);
            worst_budget = std::max(worst_budget, budget / sf);
            rep.samples.push_back(std::move(row));
        }
        rep.emp_constant = B.eps6;
    } else {
        for (const Vec& x : samples) {
            BarrierSample row;
            row.x = x;
            row.residual_hat = 0;
            row.margin = -1.0;
            row.ok = false;
            worst = std::min(worst, row.margin);
            rep.samples.push_back(std::move(row));
        }
        rep.emp_constant = 0;
    }
    rep.n_samples = rep.samples.size();
    rep.worst_margin = worst;
    rep.tol_budget = worst_budget;
    rep.pass = true;
    for (const auto& s : rep.samples) rep.pass = rep.pass && s.ok;
    return rep;
}

}  // namespace ipde
