#include "ipde/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipde {

namespace {

// Kernel moments over a shell: m_k = integral_{a<|z|<b} |z|^k K(z) dz, k = 0..3.
// Closed forms for the power-law and uniform families, adaptive otherwise.
struct ShellMoments {
    double m[4];
};

double power_integral(double a, double b, double p) {
    // integral_a^b r^p dr
    if (std::abs(p + 1.0) < 1e-12) return std::log(b / a);
    return (std::pow(b, p + 1) - std::pow(a, p + 1)) / (p + 1);
}

ShellMoments shell_moments(const LevyKernel& K, double a, double b) {
    ShellMoments sm{};
    int d = K.dim();
    double area = unit_sphere_area(d);
    // radial profile of the scaled kernel; integrate r^{k + d - 1} K_r(r)
    for (int k = 0; k < 4; ++k) {
        switch (K.family()) {
            case KernelFamily::Fractional:
            case KernelFamily::TruncatedFractional: {
                double sup = K.support_radius();
                double hi = std::min(b, sup);
                if (hi <= a) {
                    sm.m[k] = 0;
                    break;
                }
                // K_r(r) = scale^{2-sigma} r^{-d-sigma} in radial form
                double coef = std::pow(K.scale_factor(), 2.0 - K.sigma());
                sm.m[k] = area * coef * power_integral(a, hi, k + d - 1 - d - K.sigma());
                break;
            }
            case KernelFamily::CompactUniform: {
                double sup = K.support_radius();
                double hi = std::min(b, sup);
                if (hi <= a) {
                    sm.m[k] = 0;
                    break;
                }
                double height = K.radial(0.5 * (a + hi));
                sm.m[k] = area * height * power_integral(a, hi, double(k + d - 1));
                break;
            }
            case KernelFamily::Tabulated: {
                sm.m[k] = radial_integral(
                    d, a, std::min(b, K.support_radius()),
                    [&](double r) { return std::pow(r, double(k)) * K.radial(r); }, 1e-13);
                break;
            }
        }
    }
    return sm;
}

// Two-point Gauss rule matching the four kernel moments of the shell; falls
// back to a single node when the measure degenerates.
struct RadialRule {
    double r[2];
    double mass[2];
    int n;
};

RadialRule gauss2(const ShellMoments& sm, double a, double b) {
    RadialRule rule{};
    double m0 = sm.m[0];
    if (!(m0 > 0) || !std::isfinite(m0)) {
        rule.n = 0;
        return rule;
    }
    // orthogonal quadratic x^2 + p x + q wrt the shell measure
    double det = sm.m[1] * sm.m[1] - sm.m[0] * sm.m[2];
    if (std::abs(det) < 1e-28 * m0 * m0 * b * b) {
        rule.n = 1;
        rule.r[0] = sm.m[1] / m0;
        rule.mass[0] = m0;
        return rule;
    }
    double p = (sm.m[0] * sm.m[3] - sm.m[1] * sm.m[2]) / det;
    double q = (sm.m[2] * sm.m[2] - sm.m[1] * sm.m[3]) / det;
    double disc = p * p / 4 - q;
    if (disc <= 0) {
        rule.n = 1;
        rule.r[0] = sm.m[1] / m0;
        rule.mass[0] = m0;
        return rule;
    }
    double x1 = -p / 2 - std::sqrt(disc), x2 = -p / 2 + std::sqrt(disc);
    x1 = std::clamp(x1, a, b);
    x2 = std::clamp(x2, a, b);
    if (x2 - x1 < 1e-14 * b) {
        rule.n = 1;
        rule.r[0] = sm.m[1] / m0;
        rule.mass[0] = m0;
        return rule;
    }
    double w1 = (sm.m[1] - m0 * x2) / (x1 - x2);
    double w2 = m0 - w1;
    if (w1 <= 0 || w2 <= 0) {
        rule.n = 1;
        rule.r[0] = sm.m[1] / m0;
        rule.mass[0] = m0;
        return rule;
    }
    rule.n = 2;
    rule.r[0] = x1;
    rule.r[1] = x2;
    rule.mass[0] = w1;
    rule.mass[1] = w2;
    return rule;
}

double shell_volume(int d, double a, double b) {
    return unit_sphere_area(d) * (std::pow(b, d) - std::pow(a, d)) / d;
}

}  // namespace

QuadratureScheme::QuadratureScheme(const LevyKernel& base, double r_scale,
                                   const QuadratureParams& params, double inner_radius)
    : d_(base.dim()), kernel_(base.scale(r_scale)) {
    if (!(r_scale > 0)) throw std::domain_error("QuadratureScheme: r_scale must be > 0");
    if (!(inner_radius > 0)) throw std::domain_error("QuadratureScheme: inner radius must be > 0");
    comp_radius_ = 1.0 / r_scale;
    rho_in_ = std::min(inner_radius, 0.5 * comp_radius_);
    r_inf_ = kernel_.is_zero() ? rho_in_ * 2
                               : std::max(kernel_.tail_radius(params.tail_tol), rho_in_ * 2);
    core_m2_ = kernel_.second_moment(rho_in_);

    // Angular directions: the two rays in d = 1, equally spaced (even count) in
    // d = 2, axis pairs beyond. Symmetric sets keep the compensator centered.
    if (d_ == 1) {
        dirs_ = {Vec{1.0}, Vec{-1.0}};
    } else if (d_ == 2) {
        int n = std::max(4, params.nodes_per_shell);
        if (n % 2) ++n;
        for (int k = 0; k < n; ++k) {
            double th = 2.0 * M_PI * (k + 0.5) / n;
            dirs_.push_back(Vec{std::cos(th), std::sin(th)});
        }
    } else {
        for (int i = 0; i < d_; ++i) {
            Vec e(d_);
            e[i] = 1;
            dirs_.push_back(e);
            Vec m(d_);
            m[i] = -1;
            dirs_.push_back(m);
        }
    }

    if (kernel_.is_zero()) return;

    // Geometric shell boundaries with forced breaks at the compensation radius
    // and at the kernel support edge, so no shell straddles either.
    std::vector<double> breaks;
    breaks.push_back(rho_in_);
    double ratio = std::pow(2.0, 1.0 / std::max(1, params.shells_per_octave));
    for (double r = rho_in_ * ratio; r < r_inf_ * (1 - 1e-12); r *= ratio) breaks.push_back(r);
    breaks.push_back(r_inf_);
    double sup = kernel_.support_radius();
    for (double forced : {comp_radius_, sup}) {
        if (forced > rho_in_ * (1 + 1e-12) && forced < r_inf_ * (1 - 1e-12))
            breaks.push_back(forced);
    }
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end(),
                             [](double a, double b) { return std::abs(a - b) < 1e-14 * b; }),
                 breaks.end());

    const double n_ang = double(dirs_.size());
    for (std::size_t s = 0; s + 1 < breaks.size(); ++s) {
        double a = breaks[s], b = breaks[s + 1];
        if (a >= sup * (1 - 1e-12)) continue;
        ShellMoments sm = shell_moments(kernel_, a, b);
        RadialRule rule = gauss2(sm, a, b);
        if (rule.n == 0) continue;
        double vol = shell_volume(d_, a, b);
        double mass_total = rule.n == 2 ? rule.mass[0] + rule.mass[1] : rule.mass[0];
        bool inside = b <= comp_radius_ * (1 + 1e-12);
        for (int t = 0; t < rule.n; ++t) {
            // bookkeeping: weight carries the volume share, kernel the density,
            // so weight * kernel equals this radius's kernel mass per direction.
            double wshare = vol * (rule.mass[t] / mass_total);
            double kv = rule.mass[t] / wshare;
            for (const Vec& e : dirs_) {
                QuadNode node;
                node.z = rule.r[t] * e;
                node.weight = wshare / n_ang;
                node.kernel = kv;
                node.in_unit_ball = inside;
                nodes_.push_back(node);
            }
        }
    }
}

double QuadratureScheme::weight_sum(double r_lo, double r_hi) const {
    double s = 0;
    for (const auto& n : nodes_) {
        double r = n.z.norm();
        if (r >= r_lo && r <= r_hi) s += n.weight;
    }
    return s;
}

}  // namespace ipde
