#include "ipde/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>

namespace ipde {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

// --- Seidel LP ---------------------------------------------------------------

namespace {

struct LpProblem {
    std::vector<LinearConstraint> cons;
    double c[3];
    double bound;
    int dim;
};

std::optional<std::array<double, 3>> seidel_rec(LpProblem& P, SplitMix64& rng) {
    const double eps = 1e-11 * (1 + std::abs(P.bound));
    if (P.dim == 1) {
        double lo = -P.bound, hi = P.bound;
        for (const auto& con : P.cons) {
            double a = con.a[0];
            if (a > 1e-13) {
                hi = std::min(hi, con.b / a);
            } else if (a < -1e-13) {
                lo = std::max(lo, con.b / a);
            } else if (con.b < -eps) {
                return std::nullopt;
            }
        }
        if (lo > hi + eps) return std::nullopt;
        double v = P.c[0] > 0 ? hi : (P.c[0] < 0 ? lo : std::clamp(0.0, lo, hi));
        return std::array<double, 3>{v, 0, 0};
    }

    std::vector<std::size_t> order(P.cons.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rng.next_u64() % i]);

    std::array<double, 3> v{};
    for (int k = 0; k < P.dim; ++k)
        v[k] = P.c[k] > 0 ? P.bound : (P.c[k] < 0 ? -P.bound : 0.0);

    for (std::size_t oi = 0; oi < order.size(); ++oi) {
        const LinearConstraint& con = P.cons[order[oi]];
        double lhs = 0, amax = 0;
        for (int k = 0; k < P.dim; ++k) {
            lhs += con.a[k] * v[k];
            amax = std::max(amax, std::abs(con.a[k]));
        }
        double slack_tol = 1e-11 * (1 + std::abs(con.b) + amax * std::abs(P.bound));
        if (lhs <= con.b + slack_tol) continue;
        if (amax < 1e-13) return std::nullopt;  // "0 <= b" violated

        // The optimum moved onto this constraint's hyperplane: eliminate the
        // largest-coefficient variable and recurse on the prefix.
        int j = 0;
        for (int k = 1; k < P.dim; ++k)
            if (std::abs(con.a[k]) > std::abs(con.a[j])) j = k;
        double aj = con.a[j];

        LpProblem Q;
        Q.dim = P.dim - 1;
        Q.bound = P.bound;
        auto reduce = [&](const LinearConstraint& row) {
            LinearConstraint rr{};
            int t = 0;
            for (int k = 0; k < P.dim; ++k) {
                if (k == j) continue;
                rr.a[t++] = row.a[k] - row.a[j] * con.a[k] / aj;
            }
            rr.b = row.b - row.a[j] * con.b / aj;
            return rr;
        };
        for (std::size_t m = 0; m < oi; ++m) Q.cons.push_back(reduce(P.cons[order[m]]));
        LinearConstraint up{}, dn{};
        up.a[j] = 1;
        up.b = P.bound;
        dn.a[j] = -1;
        dn.b = P.bound;
        Q.cons.push_back(reduce(up));
        Q.cons.push_back(reduce(dn));
        {
            int t = 0;
            for (int k = 0; k < P.dim; ++k) {
                if (k == j) continue;
                Q.c[t++] = P.c[k] - P.c[j] * con.a[k] / aj;
            }
        }
        auto sub = seidel_rec(Q, rng);
        if (!sub) return std::nullopt;
        int t = 0;
        double vj = con.b / aj;
        for (int k = 0; k < P.dim; ++k) {
            if (k == j) continue;
            v[k] = (*sub)[t++];
            vj -= con.a[k] / aj * v[k];
        }
        v[j] = vj;
    }
    return v;
}

}  // namespace

std::optional<std::array<double, 3>> seidel_maximize(std::vector<LinearConstraint> cons,
                                                     const double c[3], double bound, int dim,
                                                     std::uint64_t seed) {
    LpProblem P;
    P.cons = std::move(cons);
    P.c[0] = c[0];
    P.c[1] = dim > 1 ? c[1] : 0;
    P.c[2] = dim > 2 ? c[2] : 0;
    P.bound = bound;
    P.dim = dim;
    SplitMix64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    return seidel_rec(P, rng);
}

// --- convex envelope -----------------------------------------------------------

namespace {

void require_convex_region(const Region& r) {
    if (r.kind() != Region::Kind::Ball && r.kind() != Region::Kind::Cube &&
        r.kind() != Region::Kind::Box)
        throw std::domain_error("convex envelope: region must be convex (ball, cube, or box)");
}

// d=1 lower convex hull of (x, u) pairs sorted by x.
void lower_hull_1d(const std::vector<double>& xs, const std::vector<double>& us,
                   std::vector<double>& env, std::vector<double>& slopes) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> hull;
    auto cross = [&](std::size_t o, std::size_t a, std::size_t b) {
        return (xs[a] - xs[o]) * (us[b] - us[o]) - (us[a] - us[o]) * (xs[b] - xs[o]);
    };
    for (std::size_t i = 0; i < n; ++i) {
        while (hull.size() >= 2 && cross(hull[hull.size() - 2], hull.back(), i) <= 0)
            hull.pop_back();
        hull.push_back(i);
    }
    env.resize(n);
    slopes.resize(n);
    std::size_t seg = 0;
    for (std::size_t i = 0; i < n; ++i) {
        while (seg + 1 < hull.size() && xs[hull[seg + 1]] < xs[i]) ++seg;
        if (seg + 1 >= hull.size()) {
            env[i] = us[hull.back()];
            slopes[i] = 0;
            continue;
        }
        std::size_t a = hull[seg], b = hull[seg + 1];
        double t = (xs[i] - xs[a]) / (xs[b] - xs[a]);
        env[i] = us[a] + t * (us[b] - us[a]);
        slopes[i] = (us[b] - us[a]) / (xs[b] - xs[a]);
    }
}

// d=2 per-node envelope value and slope via the supporting-plane LP.
std::pair<double, Vec> envelope_lp(const std::vector<Vec>& pts, const std::vector<double>& vals,
                                   const Vec& x0, double bound, std::uint64_t seed) {
    std::vector<LinearConstraint> cons;
    cons.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        LinearConstraint c{};
        c.a[0] = pts[i][0] - x0[0];
        c.a[1] = pts[i][1] - x0[1];
        c.a[2] = 1.0;
        c.b = vals[i];
        cons.push_back(c);
    }
    double obj[3] = {0, 0, 1};  // the supporting plane's value at x0
    auto sol = seidel_maximize(std::move(cons), obj, bound, 3, seed);
    if (!sol) throw std::runtime_error("envelope LP infeasible (unexpected)");
    Vec p(2);
    p[0] = (*sol)[0];
    p[1] = (*sol)[1];
    return {(*sol)[2], p};
}

}  // namespace

GridFunction convex_envelope(const GridFunction& u, const Region& region) {
    require_convex_region(region);
    const Lattice& g = u.grid();
    auto nodes = region_nodes(g, region);
    if (nodes.empty()) throw std::domain_error("convex_envelope: empty region");
    std::vector<double> out = u.values();

    if (g.dim() == 1) {
        std::vector<double> xs, us, env, slopes;
        for (auto i : nodes) {
            xs.push_back(g.node(i)[0]);
            us.push_back(u.value_at(i));
        }
        lower_hull_1d(xs, us, env, slopes);
        for (std::size_t k = 0; k < nodes.size(); ++k) out[nodes[k]] = env[k];
    } else if (g.dim() == 2) {
        std::vector<Vec> pts;
        std::vector<double> vals;
        double vmax = 0;
        for (auto i : nodes) {
            pts.push_back(g.node(i));
            vals.push_back(u.value_at(i));
            vmax = std::max(vmax, std::abs(u.value_at(i)));
        }
        double bound = 4.0 * (1.0 + vmax / g.spacing_max() + vmax);
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto [val, p] = envelope_lp(pts, vals, g.node(nodes[k]), bound, 1234 + k);
            (void)p;
            out[nodes[k]] = std::min(val, u.value_at(nodes[k]));
        }
    } else {
        throw std::domain_error("convex_envelope: d > 2 not supported");
    }
    return u.with_values(std::move(out));
}

// --- contact sets ----------------------------------------------------------------

double default_contact_tol(const GridFunction& u) {
    double h = u.grid().spacing_max();
    return 10.0 * h * h * (1.0 + u.max_abs());
}

namespace {

// Lattice samples of the diam(O)-collar around a region: in-box nodes plus the
// exterior lattice extension evaluated through the exterior rule.
struct CollarSamples {
    std::vector<Vec> pts;
    std::vector<double> vals;
    double inf_outside = kInf;  // over sampled points outside the region
};

CollarSamples collar_samples(const GridFunction& u, const Region& region) {
    const Lattice& g = u.grid();
    const int d = g.dim();
    double diam = region.diam();
    CollarSamples S;

    int lo_idx[kMaxDim], hi_idx[kMaxDim];
    for (int ax = 0; ax < d; ++ax) {
        double h = g.spacing(ax);
        lo_idx[ax] = -int(std::ceil(diam / h)) - 1;
        hi_idx[ax] = g.extent(ax) + int(std::ceil(diam / h));
    }
    std::vector<int> idx(std::size_t(d), 0);
    std::function<void(int)> walk = [&](int ax) {
        if (ax == d) {
            Vec y(d);
            bool inside_box = true;
            for (int k = 0; k < d; ++k) {
                y[k] = g.box().lo[k] + idx[k] * g.spacing(k);
                if (idx[k] < 0 || idx[k] >= g.extent(k)) inside_box = false;
            }
            bool in_region = region.contains(y);
            if (!in_region) {
                double dd = (y - region.center()).norm();
                if (dd > region.diam() * 1.5 + 1e-12) return;  // beyond the collar
            }
            double val;
            if (inside_box) {
                std::vector<int> iv(idx.begin(), idx.end());
                val = u.value_at(g.flat(iv));
            } else {
                val = u.exterior(y);
            }
            S.pts.push_back(y);
            S.vals.push_back(val);
            if (!in_region) S.inf_outside = std::min(S.inf_outside, val);
            return;
        }
        for (int i = lo_idx[ax]; i <= hi_idx[ax]; ++i) {
            idx[ax] = i;
            walk(ax + 1);
        }
    };
    walk(0);
    return S;
}

}  // namespace

ContactMask contact_set(const GridFunction& u, const Region& region, ContactVariant variant,
                        double tol) {
    const Lattice& g = u.grid();
    ContactMask out;
    out.mask.assign(g.size(), 0);
    out.slope.assign(g.size(), Vec(g.dim()));
    out.has_slope.assign(g.size(), 0);
    auto nodes = region_nodes(g, region);
    if (nodes.empty()) return out;

    if (variant == ContactVariant::Local) {
        if (g.dim() == 1) {
            std::vector<double> xs, us, envv, slopes;
            for (auto i : nodes) {
                xs.push_back(g.node(i)[0]);
                us.push_back(u.value_at(i));
            }
            lower_hull_1d(xs, us, envv, slopes);
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                if (us[k] - envv[k] <= tol) {
                    out.mask[nodes[k]] = 1;
                    Vec p(1);
                    p[0] = slopes[k];
                    out.slope[nodes[k]] = p;
                    out.has_slope[nodes[k]] = 1;
                }
            }
        } else {
            GridFunction env = convex_envelope(u, region);
            std::vector<Vec> pts;
            std::vector<double> vals;
            double vmax = 0;
            for (auto i : nodes) {
                pts.push_back(g.node(i));
                vals.push_back(u.value_at(i));
                vmax = std::max(vmax, std::abs(u.value_at(i)));
            }
            double bound = 4.0 * (1.0 + vmax / g.spacing_max() + vmax);
            for (std::size_t k = 0; k < nodes.size(); ++k) {
                std::size_t i = nodes[k];
                if (u.value_at(i) - env.value_at(i) <= tol) {
                    out.mask[i] = 1;
                    auto [val, p] = envelope_lp(pts, vals, g.node(i), bound, 77 + k);
                    (void)val;
                    out.slope[i] = p;
                    out.has_slope[i] = 1;
                }
            }
        }
        return out;
    }

    // Nonlocal: u(x) < inf over the complement samples, plus a supporting plane
    // over the diam(O)-collar (truncated at the sampled collar width).
    CollarSamples S = collar_samples(u, region);
    const int d = g.dim();
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        std::size_t i = nodes[k];
        double ux = u.value_at(i);
        if (!(ux < S.inf_outside)) continue;
        Vec x = g.node(i);
        std::vector<LinearConstraint> cons;
        cons.reserve(S.pts.size());
        double vscale = 1.0;
        for (std::size_t m = 0; m < S.pts.size(); ++m) {
            LinearConstraint c{};
            for (int ax = 0; ax < d; ++ax) c.a[ax] = S.pts[m][ax] - x[ax];
            c.a[d] = -1.0;
            c.b = S.vals[m] - ux;
            vscale = std::max(vscale, std::abs(c.b));
            cons.push_back(c);
        }
        double obj[3] = {0, 0, 0};
        obj[d] = -1.0;  // minimize the worst violation t
        double bound = 8.0 * (1.0 + vscale / g.spacing_max() + vscale);
        auto sol = seidel_maximize(std::move(cons), obj, bound, d + 1, 555 + i);
        if (!sol) continue;
        double tstar = (*sol)[d];
        if (tstar <= tol) {
            out.mask[i] = 1;
            Vec p(d);
            for (int ax = 0; ax < d; ++ax) p[ax] = (*sol)[ax];
            out.slope[i] = p;
            out.has_slope[i] = 1;
        }
    }
    return out;
}

// --- sup-convolution ---------------------------------------------------------------

GridFunction sup_convolution(const GridFunction& u, double eps) {
    if (!(eps > 0)) throw std::domain_error("sup_convolution: eps must be > 0");
    const Lattice& g = u.grid();
    const int d = g.dim();
    double osc = 0;
    {
        double lo = kInf, hi = -kInf;
        for (double v : u.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        osc = hi - lo;
    }
    double radius = 2.0 * std::sqrt(eps * std::max(osc, 1e-300)) + g.spacing_max();

    auto eval_at = [u, radius, eps, d](const Vec& x) {
        const Lattice& gg = u.grid();
        int lo_idx[kMaxDim], hi_idx[kMaxDim];
        for (int ax = 0; ax < d; ++ax) {
            double h = gg.spacing(ax);
            double t = (x[ax] - gg.box().lo[ax]) / h;
            lo_idx[ax] = int(std::floor(t - radius / h));
            hi_idx[ax] = int(std::ceil(t + radius / h));
        }
        double best = -kInf;
        std::vector<int> idx(std::size_t(d), 0);
        std::function<void(int)> walk = [&](int ax) {
            if (ax == d) {
                Vec y(d);
                bool inside = true;
                for (int k = 0; k < d; ++k) {
                    y[k] = gg.box().lo[k] + idx[k] * gg.spacing(k);
                    if (idx[k] < 0 || idx[k] >= gg.extent(k)) inside = false;
                }
                double dy2 = (y - x).norm2();
                if (dy2 > radius * radius) return;
                double val;
                if (inside) {
                    std::vector<int> iv(idx.begin(), idx.end());
                    val = u.value_at(gg.flat(iv));
                } else {
                    val = u.exterior(y);
                }
                best = std::max(best, val - dy2 / (2 * eps));
                return;
            }
            for (int i = lo_idx[ax]; i <= hi_idx[ax]; ++i) {
                idx[ax] = i;
                walk(ax + 1);
            }
        };
        walk(0);
        return best;
    };

    std::vector<double> vals(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) vals[i] = eval_at(g.node(i));
    return GridFunction(g, std::move(vals), eval_at);
}

// --- paraboloid touching sets ----------------------------------------------------------

ParaboloidMask paraboloid_touch_set(const GridFunction& u, double M, const Region& region,
                                    double rho) {
    const Lattice& g = u.grid();
    const int d = g.dim();
    if (rho < 2.0 * g.spacing_max())
        throw std::domain_error("paraboloid_touch_set: rho must be at least 2h");
    ParaboloidMask out;
    out.mask.assign(g.size(), 0);
    out.opening_bound = M;

    std::vector<double> openings{0.0};
    for (int k = 0; k < 32 && M > 0; ++k) openings.push_back(M * std::exp2(-double(31 - k)));

    auto nodes = region_nodes(g, region);
    int span[kMaxDim];
    for (int ax = 0; ax < d; ++ax) span[ax] = int(std::ceil(rho / g.spacing(ax)));

    for (auto i : nodes) {
        Vec x = g.node(i);
        double ux = u.value_at(i);
        std::vector<Vec> vs;
        std::vector<double> ws_base;
        auto ix = g.unflat(i);
        std::vector<int> idx(std::size_t(d), 0);
        std::function<void(int)> walk = [&](int ax) {
            if (ax == d) {
                bool self = true;
                for (int k = 0; k < d; ++k)
                    if (idx[k] != 0) self = false;
                if (self) return;
                Vec y(d);
                bool inside = true;
                for (int k = 0; k < d; ++k) {
                    int j = ix[k] + idx[k];
                    y[k] = g.box().lo[k] + j * g.spacing(k);
                    if (j < 0 || j >= g.extent(k)) inside = false;
                }
                Vec dy = y - x;
                if (dy.norm2() > rho * rho) return;
                double val;
                if (inside) {
                    std::vector<int> iv(d, 0);
                    for (int k = 0; k < d; ++k) iv[k] = ix[k] + idx[k];
                    val = u.value_at(g.flat(iv));
                } else {
                    val = u.exterior(y);
                }
                vs.push_back(dy);
                ws_base.push_back(val - ux);
                return;
            }
            for (int t = -span[ax]; t <= span[ax]; ++t) {
                idx[ax] = t;
                walk(ax + 1);
            }
        };
        walk(0);

        bool feasible = false;
        for (double open : openings) {
            double budget = M - std::abs(ux) - open;
            if (budget < 0) continue;
            if (d == 1) {
                double lo = -kInf, hi = kInf;
                bool ok = true;
                for (std::size_t m = 0; m < vs.size(); ++m) {
                    double w = ws_base[m] + 0.5 * open * vs[m].norm2();
                    double v = vs[m][0];
                    if (v > 0)
                        hi = std::min(hi, w / v);
                    else if (v < 0)
                        lo = std::max(lo, w / v);
                    else if (w < 0)
                        ok = false;
                }
                if (!ok || lo > hi + 1e-13) continue;
                double minabs = (lo <= 0 && hi >= 0) ? 0.0 : std::min(std::abs(lo), std::abs(hi));
                if (minabs <= budget) {
                    feasible = true;
                    break;
                }
            } else {
                // minimize |B|_1 through the four orthant LPs
                for (int sgn = 0; sgn < 4 && !feasible; ++sgn) {
                    double s0 = (sgn & 1) ? -1.0 : 1.0;
                    double s1 = (sgn & 2) ? -1.0 : 1.0;
                    std::vector<LinearConstraint> cons;
                    cons.reserve(vs.size() + 2);
                    for (std::size_t m = 0; m < vs.size(); ++m) {
                        LinearConstraint c{};
                        c.a[0] = vs[m][0];
                        c.a[1] = vs[m][1];
                        c.b = ws_base[m] + 0.5 * open * vs[m].norm2();
                        cons.push_back(c);
                    }
                    LinearConstraint o1{}, o2{};
                    o1.a[0] = -s0;
                    o1.b = 0;
                    o2.a[1] = -s1;
                    o2.b = 0;
                    cons.push_back(o1);
                    cons.push_back(o2);
                    double obj[3] = {-s0, -s1, 0};
                    auto sol = seidel_maximize(std::move(cons), obj, budget + 1.0, 2, 999 + i);
                    if (sol) {
                        double l1 = s0 * (*sol)[0] + s1 * (*sol)[1];
                        if (l1 <= budget + 1e-12) feasible = true;
                    }
                }
                if (feasible) break;
            }
        }
        out.mask[i] = feasible ? 1 : 0;
    }
    return out;
}

// --- ABP check -------------------------------------------------------------------------

VerificationReport abp_check(const GridFunction& u, const GridFunction& f, const Region& omega,
                             const EllipticityParams& P, const LevyKernel& K, double r,
                             const QuadratureParams& qp, const AbpOptions& opt) {
    const Lattice& g = u.grid();
    const int d = g.dim();
    VerificationReport rep;
    rep.kind = "abp";

    auto nodes = region_nodes(g, omega);
    if (nodes.empty()) throw std::domain_error("abp_check: empty domain");

    if (opt.check_residual) {
        QuadratureScheme scheme = make_scheme(K, r, qp, g);
        double worst = 0;
        std::size_t step = std::max<std::size_t>(1, nodes.size() / 64);
        for (std::size_t k = 0; k < nodes.size(); k += step) {
            Vec x = g.node(nodes[k]);
            if (!g.box().strictly_inside(x, g.spacing_max() * 1.5)) continue;
            double res = extremal_residual_minus(u, x, P, scheme) - f(x);
            worst = std::min(worst, res);
        }
        if (worst < -opt.residual_slack * (1 + f.max_abs() + u.max_abs()))
            throw std::invalid_argument("abp_check: u fails the supersolution residual check");
        rep.notes.push_back("residual precheck margin " + std::to_string(worst));
    }

    double inf_in = kInf;
    for (auto i : nodes) inf_in = std::min(inf_in, u.value_at(i));
    double lhs = -inf_in;

    CollarSamples S = collar_samples(u, omega);
    double inf_out = S.inf_outside;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!omega.contains(g.node(i))) inf_out = std::min(inf_out, u.value_at(i));

    // Gamma^{n,+}(u^-) realized as the lower contact set of min(u, 0).
    auto u_ext = u.exterior_rule();
    std::vector<double> wv = u.values();
    for (double& v : wv) v = std::min(v, 0.0);
    GridFunction wneg(g, std::move(wv), [u_ext](const Vec& y) { return std::min(u_ext(y), 0.0); });
    ContactMask contact =
        contact_set(wneg, omega, ContactVariant::Nonlocal, default_contact_tol(u));

    std::vector<double> terms;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (!contact.mask[i]) continue;
        double fm = std::max(-f.value_at(i), 0.0);
        terms.push_back(std::pow(fm, double(d)) * g.cell_volume());
    }
    double fnorm = terms.empty() ? 0.0 : std::pow(compensated_sum(terms), 1.0 / double(d));
    double diam = omega.diam();

    double tol = 1e-9 * (1 + u.max_abs());
    rep.n_samples = nodes.size();
    BarrierSample row;
    row.residual_hat = lhs;
    row.scale_hat = 1 + std::abs(lhs);
    if (diam * fnorm > 0) {
        rep.emp_constant = std::max(0.0, (lhs - (-inf_out)) / (diam * fnorm));
        rep.pass = true;
        row.margin = 0;
    } else if (lhs <= -inf_out + tol) {
        rep.emp_constant = 0;
        rep.pass = true;
        row.margin = (-inf_out) - lhs;
    } else {
        rep.emp_constant = 0;
        rep.pass = false;
        row.margin = (-inf_out) - lhs;
        rep.notes.push_back("minimum principle violated with vanishing forcing norm");
    }
    rep.samples.push_back(row);
    rep.worst_margin = row.margin;
    rep.notes.push_back("contact_nodes: " + std::to_string(contact.count()));
    rep.notes.push_back("f_minus_ld_norm: " + std::to_string(fnorm));
    rep.notes.push_back("inf_exterior: " + std::to_string(inf_out));
    return rep;
}

void write_mask_csv(const ContactMask& mask, const Lattice& grid, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_mask_csv: cannot open " + path);
    for (int i = 0; i < grid.dim(); ++i) out << "x" << (i + 1) << ",";
    out << "flag,slope\n";
    for (std::size_t i = 0; i < mask.mask.size(); ++i) {
        Vec x = grid.node(i);
        for (int k = 0; k < grid.dim(); ++k) out << x[k] << ",";
        out << int(mask.mask[i]) << ",";
        if (mask.has_slope[i])
            for (int k = 0; k < grid.dim(); ++k) out << (k ? ";" : "") << mask.slope[i][k];
        out << "\n";
    }
}

}  // namespace ipde
