#include "ipde/kernel.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

namespace ipde {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Adaptive Simpson on [a,b] assuming f is smooth there.
double simpson_adaptive(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
    double m = 0.5 * (a + b);
    double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
    double flm = f(lm), frm = f(rm);
    double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
    double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
    if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
        return left + right + (left + right - whole) / 15.0;
    return simpson_adaptive(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
           simpson_adaptive(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double simpson(const std::function<double(double)>& f, double a, double b, double tol) {
    double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
    double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
    return simpson_adaptive(f, a, b, fa, fm, fb, whole, tol, 28);
}

}  // namespace

double unit_sphere_area(int d) {
    switch (d) {
        case 1: return 2.0;
        case 2: return 2.0 * M_PI;
        case 3: return 4.0 * M_PI;
        default: return 2.0 * std::pow(M_PI, d / 2.0) / std::tgamma(d / 2.0);
    }
}

double radial_integral(int d, double lo, double hi, const std::function<double(double)>& f,
                       double tol) {
    if (hi <= lo) return 0.0;
    const double area = unit_sphere_area(d);
    auto g = [&](double s) { return f(s) * std::pow(s, d - 1) * area; };

    double total = 0.0;
    double start = lo;

    if (lo == 0.0) {
        // Dyadic refinement toward the singular endpoint.
        double hi0 = std::min(hi, 1.0);
        double prev = kInf;
        int grow_streak = 0;
        double b = hi0;
        for (int k = 0; k < 2200 && b > 1e-300; ++k) {
            double a = b * 0.5;
            double piece = simpson(g, a, b, tol * 0.25);
            total += piece;
            double mag = std::abs(piece);
            if (mag > prev * 1.0000001 && mag > tol) {
                if (++grow_streak >= 40)
                    throw NonIntegrableError("radial_integral: diverging near 0");
            } else {
                grow_streak = 0;
            }
            prev = std::max(mag, 1e-300);
            if (mag < tol * 1e-3 && k > 4) break;
            b = a;
        }
        start = hi0;
        if (hi <= hi0) return total;
    }

    // Octave-by-octave sweep outward; geometric extension detects tails.
    double a = start;
    double prev = kInf;
    int grow_streak = 0;
    for (int k = 0; k < 2200 && a < hi; ++k) {
        double b = std::min(hi, a * 2.0);
        double piece = simpson(g, a, b, tol * 0.25);
        total += piece;
        a = b;
        if (b >= hi) break;
        double mag = std::abs(piece);
        if (mag > prev * 1.0000001 && mag > tol) {
            if (++grow_streak >= 40) throw NonIntegrableError("radial_integral: diverging tail");
        } else {
            grow_streak = 0;
        }
        prev = std::max(mag, 1e-300);
        if (hi == kInf && mag < tol * 1e-3 && k > 2) break;
        if (a > 1e280) {
            if (hi == kInf) break;
            throw NonIntegrableError("radial_integral: tail does not close");
        }
    }
    return total;
}

LevyKernel LevyKernel::fractional(int d, double sigma) {
    if (!(sigma > 0 && sigma < 2))
        throw NonIntegrableError("fractional kernel requires sigma in (0,2)");
    LevyKernel k(d, KernelFamily::Fractional);
    k.sigma_ = sigma;
    return k;
}

LevyKernel LevyKernel::truncated_fractional(int d, double sigma, double cutoff) {
    if (!(sigma > 0 && sigma < 2))
        throw NonIntegrableError("truncated-fractional kernel requires sigma in (0,2)");
    if (!(cutoff > 0)) throw std::invalid_argument("truncated-fractional: cutoff must be > 0");
    LevyKernel k(d, KernelFamily::TruncatedFractional);
    k.sigma_ = sigma;
    k.cutoff_ = cutoff;
    return k;
}

LevyKernel LevyKernel::compact_uniform(int d, double radius, double height) {
    if (!(radius > 0) || height < 0)
        throw std::invalid_argument("compact-uniform: radius > 0 and height >= 0 required");
    LevyKernel k(d, KernelFamily::CompactUniform);
    k.radius_ = radius;
    k.height_ = height;
    return k;
}

LevyKernel LevyKernel::zero(int d) { return compact_uniform(d, 1.0, 0.0); }

LevyKernel LevyKernel::tabulated(int d, std::vector<std::pair<double, double>> samples) {
    if (samples.size() < 2) throw std::invalid_argument("tabulated kernel needs >= 2 samples");
    std::sort(samples.begin(), samples.end());
    for (auto& [r, v] : samples) {
        if (!(r >= 0) || !(v >= 0) || !std::isfinite(v))
            throw std::invalid_argument("tabulated kernel: nonnegative finite samples required");
    }
    LevyKernel k(d, KernelFamily::Tabulated);
    k.table_ = std::move(samples);
    k.levy_integrability();  // bounded radial profiles always pass; keeps the invariant explicit
    return k;
}

LevyKernel LevyKernel::tabulated_from_csv(int d, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open kernel table: " + path);
    std::vector<std::pair<double, double>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream ls(line);
        double r, v;
        if (ls >> r >> v) rows.emplace_back(r, v);
    }
    return tabulated(d, std::move(rows));
}

bool LevyKernel::is_zero() const {
    if (family_ == KernelFamily::CompactUniform) return height_ == 0.0;
    if (family_ == KernelFamily::Tabulated) {
        for (auto& [r, v] : table_)
            if (v != 0) return false;
        return true;
    }
    return false;
}

double LevyKernel::base_radial(double s) const {
    switch (family_) {
        case KernelFamily::Fractional:
            return std::pow(s, -double(d_) - sigma_);
        case KernelFamily::TruncatedFractional:
            return s <= cutoff_ ? std::pow(s, -double(d_) - sigma_) : 0.0;
        case KernelFamily::CompactUniform:
            return s <= radius_ ? height_ : 0.0;  // closed support edge keeps quadrature clean
        case KernelFamily::Tabulated: {
            if (s <= table_.front().first) return table_.front().second;
            if (s >= table_.back().first) return 0.0;
            auto it = std::upper_bound(table_.begin(), table_.end(), std::make_pair(s, kInf));
            auto [r1, v1] = *it;
            auto [r0, v0] = *(it - 1);
            double t = (s - r0) / (r1 - r0);
            return v0 + t * (v1 - v0);
        }
    }
    return 0.0;
}

double LevyKernel::radial(double s) const {
    if (!(s > 0)) throw std::domain_error("LevyKernel: radial profile undefined at s <= 0");
    return std::pow(scale_, d_ + 2) * base_radial(scale_ * s);
}

double LevyKernel::evaluate(const Vec& z) const {
    double s = z.norm();
    if (s == 0.0) throw std::domain_error("LevyKernel: z = 0 is the singular point");
    return radial(s);
}

LevyKernel LevyKernel::scale(double r) const {
    if (!(r > 0)) throw std::domain_error("LevyKernel::scale: r must be > 0");
    LevyKernel k = *this;
    k.scale_ = scale_ * r;
    return k;
}

double LevyKernel::support_radius() const {
    switch (family_) {
        case KernelFamily::Fractional: return kInf;
        case KernelFamily::TruncatedFractional: return cutoff_ / scale_;
        case KernelFamily::CompactUniform: return radius_ / scale_;
        case KernelFamily::Tabulated: return table_.back().first / scale_;
    }
    return kInf;
}

double LevyKernel::tail_radius(double tol) const {
    double sup = support_radius();
    if (sup < kInf) return sup;
    if (family_ == KernelFamily::Fractional) {
        double c = std::pow(scale_, 2.0 - sigma_) * unit_sphere_area(d_) / sigma_;
        return std::pow(std::max(c / tol, 1.0), 1.0 / sigma_);
    }
    double R = 1.0;
    for (int k = 0; k < 2000; ++k) {
        if (tail_mass(R) < tol) return R;
        R *= 2.0;
    }
    throw NonIntegrableError("tail_radius: tail mass does not fall under tolerance");
}

double LevyKernel::second_moment(double rho) const {
    if (rho <= 0 || is_zero()) return 0.0;
    // Exact substitution: m2_{K_r}(rho) = m2_K(r * rho).
    double s = scale_ * rho;
    LevyKernel base = *this;
    base.scale_ = 1.0;
    if (family_ == KernelFamily::Fractional || family_ == KernelFamily::TruncatedFractional) {
        double hi = family_ == KernelFamily::Fractional ? s : std::min(s, cutoff_);
        if (hi <= 0) return 0.0;
        return unit_sphere_area(d_) * std::pow(hi, 2.0 - sigma_) / (2.0 - sigma_);
    }
    if (family_ == KernelFamily::CompactUniform) {
        double cap = std::min(s, radius_);
        return height_ * unit_sphere_area(d_) * std::pow(cap, d_ + 2) / (d_ + 2);
    }
    double cap = std::min(s, base.support_radius());
    if (cap <= 0) return 0.0;
    return radial_integral(d_, 0.0, cap, [&](double t) { return t * t * base.base_radial(t); });
}

double LevyKernel::tail_mass(double rho) const {
    if (is_zero()) return 0.0;
    // T_{K_r}(rho) = r^2 T_K(r * rho).
    double s = scale_ * rho;
    double factor = scale_ * scale_;
    LevyKernel base = *this;
    base.scale_ = 1.0;
    if (family_ == KernelFamily::Fractional)
        return factor * unit_sphere_area(d_) * std::pow(s, -sigma_) / sigma_;
    double sup = base.support_radius();
    if (s >= sup) return 0.0;
    return factor * radial_integral(d_, s, sup, [&](double t) { return base.base_radial(t); });
}

double LevyKernel::levy_integrability() const {
    if (is_zero()) return 0.0;
    return second_moment(1.0) + tail_mass(1.0);
}

double LevyKernel::beta(double s) const {
    if (!(s > 0)) throw std::domain_error("beta: s must be > 0");
    if (is_zero()) return 0.0;
    double sup = support_radius();
    if (s >= sup) return 0.0;
    return radial_integral(d_, s, sup, [&](double t) { return std::min(1.0, t) * radial(t); });
}

double LevyKernel::beta_antiderivative(double l) const {
    if (l <= 0 || is_zero()) return 0.0;
    // Fubini: B(l) = integral min(1,|z|) min(l,|z|) K(z) dz, split at |z| = min(l,1).
    double sup = support_radius();
    double b = l < sup ? beta(l) : 0.0;
    double total = l * b + second_moment(std::min(l, 1.0));
    if (l > 1.0 && sup > 1.0) {
        double hi = std::min(l, sup);
        total += radial_integral(d_, 1.0, hi, [&](double t) { return t * radial(t); });
    }
    return total;
}

}  // namespace ipde
