#include "ipde/regularity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ipde {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

HarnackReport weak_harnack_check(const GridFunction& u, const GridFunction& f,
                                 const std::vector<double>& scales,
                                 const std::vector<double>& eps3_grid,
                                 const HarnackOptions& opt) {
    const Lattice& g = u.grid();
    const int d = g.dim();
    const double nine_rd = 9.0 * std::sqrt(double(d));

    // Preconditions: u >= 0 on the largest outer cube; residual check on a
    // subsample of interior nodes.
    double lmax = *std::max_element(scales.begin(), scales.end());
    Region outer = Region::cube(Vec(d), lmax);
    for (auto i : region_nodes(g, outer))
        if (u.value_at(i) < 0)
            throw std::invalid_argument("weak_harnack_check: u negative on the outer cube");

    if (opt.check_residual) {
        QuadratureScheme scheme = make_scheme(opt.kernel, 1.0, opt.quad, g);
        auto nodes = region_nodes(g, outer);
        std::size_t step = std::max<std::size_t>(1, nodes.size() / 48);
        double worst = 0;
        for (std::size_t k = 0; k < nodes.size(); k += step) {
            Vec x = g.node(nodes[k]);
            if (!g.box().strictly_inside(x, g.spacing_max() * 1.5)) continue;
            worst = std::min(worst, extremal_residual_minus(u, x, opt.ellip, scheme) - f(x));
        }
        if (worst < -opt.residual_slack * (1 + f.max_abs() + u.max_abs()))
            throw std::invalid_argument("weak_harnack_check: supersolution residual check failed");
    }

    HarnackReport rep;
    rep.scales = scales;
    rep.eps3_grid = eps3_grid;

    for (double eps3 : eps3_grid) {
        for (double l : scales) {
            Region inner = Region::cube(Vec(d), l / nine_rd);
            Region outer_l = Region::cube(Vec(d), l);
            HarnackScaleRow row;
            row.scale = l;
            row.eps3 = eps3;
            row.inf_inner = inf_over_region(u, inner);
            row.f_norm = lp_norm(f, double(d), outer_l);
            double num = lp_norm(u, eps3, inner);
            double den = row.inf_inner + l * row.f_norm;
            row.ratio = den > 0 ? num / den : (num > 0 ? kInf : 0.0);
            row.constant = std::pow(row.ratio, eps3) / std::pow(l, double(d));
            rep.rows.push_back(row);
        }
    }

    // Choose the largest eps3 whose scale-free constants stay within the
    // spread threshold across scales.
    rep.bounded = false;
    for (double eps3 : eps3_grid) {
        double cmin = kInf, cmax = 0, rmax = 0;
        for (const auto& row : rep.rows) {
            if (row.eps3 != eps3) continue;
            cmin = std::min(cmin, row.constant);
            cmax = std::max(cmax, row.constant);
            rmax = std::max(rmax, row.ratio);
        }
        bool ok = cmin > 0 && std::isfinite(cmax) && cmax / cmin <= opt.spread_threshold;
        if (ok && eps3 >= rep.chosen_eps3) {
            rep.chosen_eps3 = eps3;
            rep.max_ratio = rmax;
            rep.spread = cmax / cmin;
            rep.bounded = true;
        }
    }
    if (!rep.bounded) {
        // report the least-spread exponent anyway
        double best = kInf;
        for (double eps3 : eps3_grid) {
            double cmin = kInf, cmax = 0, rmax = 0;
            for (const auto& row : rep.rows) {
                if (row.eps3 != eps3) continue;
                cmin = std::min(cmin, row.constant);
                cmax = std::max(cmax, row.constant);
                rmax = std::max(rmax, row.ratio);
            }
            double spread = cmin > 0 ? cmax / cmin : kInf;
            if (spread < best) {
                best = spread;
                rep.chosen_eps3 = eps3;
                rep.max_ratio = rmax;
                rep.spread = spread;
            }
        }
    }
    return rep;
}

SuperlevelReport superlevel_decay(const GridFunction& u, const GridFunction& f, double l,
                                  double eps3, const std::vector<double>& t_grid) {
    const Lattice& g = u.grid();
    const int d = g.dim();
    Region ball = Region::ball(Vec(d), l);
    Region ball2 = Region::ball(Vec(d), 2 * l);
    for (auto i : region_nodes(g, ball2))
        if (u.value_at(i) < 0)
            throw std::invalid_argument("superlevel_decay: u negative on B_{2l}");

    double inf_l = inf_over_region(u, ball);
    double fnorm = lp_norm(f, double(d), ball2);
    SuperlevelReport rep;
    rep.eps3 = eps3;
    rep.l = l;
    double C = 0;
    for (double t : t_grid) {
        SuperlevelRow row;
        row.t = t;
        row.measure = superlevel_measure(u, t, ball);
        row.bound_shape =
            std::pow(l, double(d)) * std::pow(inf_l + l * fnorm, eps3) * std::pow(t, -eps3);
        if (row.bound_shape > 0) C = std::max(C, row.measure / row.bound_shape);
        rep.rows.push_back(row);
    }
    rep.fitted_c = C;
    return rep;
}

OscillationSequence oscillation_sequence(const GridFunction& u, const Vec& x0, double ratio,
                                         int kmax) {
    const Lattice& g = u.grid();
    OscillationSequence seq;
    seq.ratio = ratio;
    double h = g.spacing_max();
    for (int k = 0; k <= kmax; ++k) {
        double radius = std::pow(ratio, -double(k));
        if (2 * radius < 4 * h) {  // fewer than ~5 nodes across
            seq.truncated = true;
            break;
        }
        seq.values.push_back(oscillation(u, Region::ball(x0, radius)));
    }
    return seq;
}

HolderFit holder_fit(const OscillationSequence& seq) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < seq.values.size(); ++k) {
        if (seq.values[k] <= 0) break;  // zeros truncate the tail
        xs.push_back(-double(k) * std::log(seq.ratio));
        ys.push_back(std::log(seq.values[k]));
    }
    if (xs.size() < 3)
        throw std::invalid_argument("holder_fit: fewer than 3 positive oscillation entries");
    double n = double(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        sx += xs[i];
        sy += ys[i];
        sxx += xs[i] * xs[i];
        sxy += xs[i] * ys[i];
    }
    double denom = n * sxx - sx * sx;
    HolderFit fit;
    if (std::abs(denom) < 1e-300) {
        fit.alpha = 0;
        fit.constant = 2 * std::exp(sy / n);
        fit.fit_residual = 0;
        return fit;
    }
    double slope = (n * sxy - sx * sy) / denom;
    double intercept = (sy - slope * sx) / n;
    fit.alpha = std::max(0.0, slope);
    fit.constant = 2.0 * std::exp(intercept);
    double ss = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        double r = ys[i] - (slope * xs[i] + intercept);
        ss += r * r;
    }
    fit.fit_residual = std::sqrt(ss / n);
    return fit;
}

}  // namespace ipde
