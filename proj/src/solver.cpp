#include "ipde/solver.hpp"

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cstring>
#include <limits>
#include <sstream>

namespace ipde {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kExterior = kInf;  // gather sentinel: target left the box

std::string node_label(const Lattice& g, std::size_t flat) {
    std::ostringstream os;
    auto idx = g.unflat(flat);
    os << "node (";
    for (std::size_t i = 0; i < idx.size(); ++i) os << (i ? "," : "") << idx[i];
    os << ")";
    return os.str();
}
}  // namespace

HJBIProblem HJBIProblem::singleton(Region dom, LevyKernel K, EllipticityParams P, ControlPair cp,
                                   std::function<double(const Vec&)> g) {
    HJBIProblem prob(std::move(dom), std::move(K), P);
    prob.n_a = prob.n_b = 1;
    prob.pairs.push_back(std::move(cp));
    prob.dirichlet = std::move(g);
    return prob;
}

// Geometry of one quadrature offset, shared by every grid node (uniform grid:
// the fractional cell position of x_i + z does not depend on i).
struct Offset {
    Vec z;
    double wk;  // volume weight * kernel value
    bool in_ball;
    int shift[kMaxDim];
    double corner_w[1 << kMaxDim];
};

// Per-pair coefficients cached at a solve node. The gradient terms carry a
// per-axis mode: central when the sign condition a/h^2 >= |b|/(2h) holds,
// monotone one-sided otherwise; the nonlocal compensator is folded in as the
// central drift beta or as the sign-split pair (b_plus, b_minus).
struct PairCoef {
    double a_diag[kMaxDim];
    double cross = 0;
    double b_central[kMaxDim];  // raw drift + net compensator (central mode)
    double b_raw[kMaxDim];
    double b_plus[kMaxDim];   // >= 0, backward-differenced compensator share
    double b_minus[kMaxDim];  // <= 0, forward-differenced compensator share
    bool central[kMaxDim];
    double c = 0;
    double f = 0;
    double mass = 0;
    double out_val = 0;  // sum w K m g(x+z) over exterior-target offsets
};

struct DiscreteOperator::Impl {
    Lattice grid;
    QuadratureParams qp;
    Region domain;
    LevyKernel kernel;
    double r_scale = 1.0;
    EllipticityParams ellip;
    std::function<double(const Vec&)> dirichlet;
    bool require_nonneg_c = true;

    bool extremal = false;
    std::size_t n_a = 1, n_b = 1;
    std::vector<ControlPair> pairs;
    std::function<double(const Vec&)> forcing;

    std::optional<QuadratureScheme> scheme;
    std::vector<Offset> offsets;
    double core_coef = 0;  // m2(rho_in)/(2d)

    std::vector<std::size_t> solve_nodes;
    std::vector<std::int64_t> solve_index;  // flat -> solve position or -1
    std::vector<double> g_values;
    std::vector<std::vector<PairCoef>> coef;       // [pair][solve]
    std::vector<double> f_cache;                   // extremal forcing
    std::vector<std::vector<double>> out_g;        // [solve] g at exterior offsets, in order
    double f_inf = 0;
    double dt_bound = kInf;
    mutable int threads = 1;

    int dim() const { return grid.dim(); }

    // ---- assembly ----------------------------------------------------------

    void build_offsets() {
        double rho = qp.inner_radius > 0 ? qp.inner_radius : 2.0 * grid.spacing_max();
        scheme.emplace(kernel, r_scale, qp, rho);
        core_coef = scheme->core_second_moment() / (2.0 * dim());
        for (const QuadNode& n : scheme->nodes()) {
            Offset o;
            o.z = n.z;
            o.wk = n.weight * n.kernel;
            o.in_ball = n.in_unit_ball;
            double frac[kMaxDim];
            for (int ax = 0; ax < dim(); ++ax) {
                double s = n.z[ax] / grid.spacing(ax);
                double fl = std::floor(s);
                o.shift[ax] = int(fl);
                frac[ax] = s - fl;
            }
            for (int corner = 0; corner < (1 << dim()); ++corner) {
                double cw = 1;
                for (int ax = 0; ax < dim(); ++ax)
                    cw *= ((corner >> ax) & 1) ? frac[ax] : 1.0 - frac[ax];
                o.corner_w[corner] = cw;
            }
            offsets.push_back(o);
        }
    }

    void pick_nodes() {
        g_values.resize(grid.size());
        solve_index.assign(grid.size(), -1);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            Vec x = grid.node(i);
            g_values[i] = dirichlet(x);
            if (!domain.contains(x)) continue;
            auto idx = grid.unflat(i);
            bool inner = true;
            for (int ax = 0; ax < dim(); ++ax)
                if (idx[ax] < 1 || idx[ax] > grid.extent(ax) - 2) inner = false;
            if (!inner) continue;
            solve_index[i] = std::int64_t(solve_nodes.size());
            solve_nodes.push_back(i);
        }
        if (solve_nodes.empty())
            throw ConstructionError("discretize: domain contains no interior nodes");
    }

    bool offset_in_box(const std::vector<int>& idx, const Offset& o) const {
        for (int ax = 0; ax < dim(); ++ax) {
            int cell = idx[ax] + o.shift[ax];
            int n = grid.extent(ax);
            if (cell < 0 || cell > n - 1) return false;
            if (cell == n - 1 && o.corner_w[0] < 1.0 - 1e-12) return false;
        }
        return true;
    }

    double gather(const std::vector<double>& u, const std::vector<int>& idx,
                  const Offset& o) const {
        std::size_t base = 0;
        for (int ax = 0; ax < dim(); ++ax) {
            int cell = idx[ax] + o.shift[ax];
            int n = grid.extent(ax);
            if (cell < 0 || cell > n - 1) return kExterior;
            if (cell == n - 1) {
                if (o.corner_w[0] < 1.0 - 1e-12) return kExterior;
                cell = n - 2;
            }
            base += std::size_t(cell) * grid.stride(ax);
        }
        double acc = 0;
        for (int corner = 0; corner < (1 << dim()); ++corner) {
            double w = o.corner_w[corner];
            if (w == 0) continue;
            std::size_t at = base;
            for (int ax = 0; ax < dim(); ++ax)
                if ((corner >> ax) & 1) at += grid.stride(ax);
            acc += w * u[at];
        }
        return acc;
    }

    void finish_gradient_modes(PairCoef& pc) {
        for (int ax = 0; ax < dim(); ++ax) {
            double beta = pc.b_plus[ax] + pc.b_minus[ax];
            pc.b_central[ax] = pc.b_raw[ax] + beta;
            double h = grid.spacing(ax);
            pc.central[ax] = pc.a_diag[ax] / h >= 0.5 * std::abs(pc.b_central[ax]);
        }
    }

    void assemble_hjbi() {
        const int d = dim();
        if (d == 2) {
            if (std::abs(grid.spacing(0) - grid.spacing(1)) > 1e-12 * grid.spacing(0)) {
                for (const ControlPair& cp : pairs) {
                    SymMat a = cp.diffusion(grid.node(solve_nodes[0]));
                    if (a.at(0, 1) != 0)
                        throw ConstructionError("cross-derivative stencil requires square cells");
                }
            }
        }
        coef.assign(pairs.size(), {});
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            coef[p].resize(solve_nodes.size());
            const ControlPair& cp = pairs[p];
            std::string error;
            parallel_for(solve_nodes.size(), threads, [&](std::size_t s) {
                std::size_t i = solve_nodes[s];
                Vec x = grid.node(i);
                auto idx = grid.unflat(i);
                PairCoef pc{};
                SymMat a = cp.diffusion(x);
                for (double e : sym_eigenvalues(a)) {
                    if (e < ellip.lambda - 1e-9 || e > ellip.Lambda + 1e-9) {
                        error = "diffusion outside [lambda,Lambda]I at " + node_label(grid, i) +
                                ", pair " + std::to_string(p);
                        return;
                    }
                }
                double cross = d == 2 ? a.at(0, 1) : 0.0;
                if (d > 2) {
                    for (int r = 0; r < d; ++r)
                        for (int cc = r + 1; cc < d; ++cc)
                            if (a.at(r, cc) != 0.0) {
                                error = "off-diagonal diffusion unsupported beyond d=2 at " +
                                        node_label(grid, i) + ", pair " + std::to_string(p);
                                return;
                            }
                }
                for (int ax = 0; ax < d; ++ax) {
                    double w = a.at(ax, ax) - std::abs(cross);
                    if (w < -1e-12 * (1 + ellip.Lambda)) {
                        error = "monotonicity certification failed (cross-term dominance) at " +
                                node_label(grid, i) + ", pair " + std::to_string(p);
                        return;
                    }
                    pc.a_diag[ax] = std::max(0.0, w) + core_coef;
                }
                pc.cross = cross;
                Vec b = cp.drift(x);
                for (int ax = 0; ax < d; ++ax) pc.b_raw[ax] = b[ax];
                pc.c = cp.zero_order(x);
                if (require_nonneg_c && pc.c < 0) {
                    error = "zero-order coefficient negative at " + node_label(grid, i) +
                            ", pair " + std::to_string(p);
                    return;
                }
                pc.f = cp.forcing(x);

                for (const Offset& o : offsets) {
                    double m = cp.multiplier ? cp.multiplier(x, o.z) : 1.0;
                    if (m < -1e-9 || m > 1 + 1e-9) {
                        error = "kernel multiplier outside [0,1] at " + node_label(grid, i) +
                                ", pair " + std::to_string(p);
                        return;
                    }
                    double wkm = o.wk * m;
                    pc.mass += wkm;
                    if (o.in_ball) {
                        for (int ax = 0; ax < d; ++ax) {
                            double bz = wkm * o.z[ax];
                            if (bz > 0)
                                pc.b_plus[ax] += bz;
                            else
                                pc.b_minus[ax] += bz;
                        }
                    }
                    if (!offset_in_box(idx, o)) pc.out_val += wkm * dirichlet(x + o.z);
                }
                finish_gradient_modes(pc);
                coef[p][s] = pc;
            });
            if (!error.empty()) throw ConstructionError(error);
            for (std::size_t s = 0; s < solve_nodes.size(); ++s)
                f_inf = std::max(f_inf, std::abs(coef[p][s].f));
        }
        double dt_den = 0;
        for (std::size_t p = 0; p < pairs.size(); ++p)
            for (std::size_t s = 0; s < solve_nodes.size(); ++s)
                dt_den = std::max(dt_den, center_coefficient(coef[p][s]));
        dt_bound = dt_den > 0 ? 1.0 / dt_den : kInf;
    }

    double center_coefficient(const PairCoef& pc) const {
        double center = pc.c + pc.mass;
        for (int ax = 0; ax < dim(); ++ax) {
            double h = grid.spacing(ax);
            center += 2 * pc.a_diag[ax] / (h * h);
            if (pc.central[ax])
                center += 0.0;  // central drift does not touch the diagonal
            else
                center += (std::abs(pc.b_raw[ax]) + pc.b_plus[ax] - pc.b_minus[ax]) / h;
        }
        if (dim() == 2)
            center += 2 * std::abs(pc.cross) / (grid.spacing(0) * grid.spacing(1));
        return center;
    }

    void assemble_extremal() {
        const int d = dim();
        f_cache.resize(solve_nodes.size());
        out_g.resize(solve_nodes.size());
        double mass = 0;
        for (const Offset& o : offsets) mass += o.wk;
        parallel_for(solve_nodes.size(), threads, [&](std::size_t s) {
            std::size_t i = solve_nodes[s];
            Vec x = grid.node(i);
            auto idx = grid.unflat(i);
            f_cache[s] = forcing(x);
            std::vector<double> gs;
            for (const Offset& o : offsets)
                if (!offset_in_box(idx, o)) gs.push_back(dirichlet(x + o.z));
            out_g[s] = std::move(gs);
        });
        for (double f : f_cache) f_inf = std::max(f_inf, std::abs(f));
        double center = mass + ellip.C0 * r_scale / grid.spacing_max();
        double comp = 0;  // worst one-sided compensator column
        for (const Offset& o : offsets)
            if (o.in_ball) comp += o.wk * std::abs(o.z[0]) / grid.spacing(0);
        center += comp;
        for (int ax = 0; ax < d; ++ax) {
            double h = grid.spacing(ax);
            center += 2 * (ellip.Lambda + core_coef) / (h * h);
        }
        dt_bound = center > 0 ? 1.0 / center : kInf;
    }

    // ---- pointwise evaluation ------------------------------------------------

    double fwd(const std::vector<double>& u, std::size_t i, int ax) const {
        return (u[i + grid.stride(ax)] - u[i]) / grid.spacing(ax);
    }
    double bwd(const std::vector<double>& u, std::size_t i, int ax) const {
        return (u[i] - u[i - grid.stride(ax)]) / grid.spacing(ax);
    }
    double central(const std::vector<double>& u, std::size_t i, int ax) const {
        return (u[i + grid.stride(ax)] - u[i - grid.stride(ax)]) / (2 * grid.spacing(ax));
    }
    double second(const std::vector<double>& u, std::size_t i, int ax) const {
        double h = grid.spacing(ax);
        return (u[i + grid.stride(ax)] - 2 * u[i] + u[i - grid.stride(ax)]) / (h * h);
    }
    double cross_pp(const std::vector<double>& u, std::size_t i) const {
        std::size_t s0 = grid.stride(0), s1 = grid.stride(1);
        return (u[i + s0 + s1] - 2 * u[i] + u[i - s0 - s1]) /
               (grid.spacing(0) * grid.spacing(1));
    }
    double cross_pm(const std::vector<double>& u, std::size_t i) const {
        std::size_t s0 = grid.stride(0), s1 = grid.stride(1);
        return (u[i + s0 - s1] - 2 * u[i] + u[i - s0 + s1]) /
               (grid.spacing(0) * grid.spacing(1));
    }

    // Sign-split one-sided compensator for an offset z (monotone by construction).
    double split_compensator(const std::vector<double>& u, std::size_t i, const Vec& z) const {
        double comp = 0;
        for (int ax = 0; ax < z.dim(); ++ax) {
            double za = z[ax];
            if (za > 0)
                comp += za * bwd(u, i, ax);
            else if (za < 0)
                comp += za * fwd(u, i, ax);
        }
        return comp;
    }

    double pair_value(const std::vector<double>& u, std::size_t p, std::size_t s) const {
        const PairCoef& pc = coef[p][s];
        const std::size_t i = solve_nodes[s];
        const int d = dim();

        double val = 0;
        for (int ax = 0; ax < d; ++ax) val -= pc.a_diag[ax] * second(u, i, ax);
        if (d == 2 && pc.cross != 0)
            val -= pc.cross > 0 ? pc.cross * cross_pp(u, i) : -pc.cross * cross_pm(u, i);

        for (int ax = 0; ax < d; ++ax) {
            if (pc.central[ax]) {
                val += pc.b_central[ax] * central(u, i, ax);
            } else {
                double b = pc.b_raw[ax];
                val += b > 0 ? b * bwd(u, i, ax) : b * fwd(u, i, ax);
                val += pc.b_plus[ax] * bwd(u, i, ax) + pc.b_minus[ax] * fwd(u, i, ax);
            }
        }
        val += pc.c * u[i] + pc.f;

        // -I[u] : mass * u_i - gather - exterior  (compensator already above)
        const MultiplierField& m = pairs[p].multiplier;
        auto idx = grid.unflat(i);
        double acc = 0, out = pc.out_val;
        if (!m) {
            for (const Offset& o : offsets) {
                double uv = gather(u, idx, o);
                if (uv != kExterior) acc += o.wk * uv;
            }
        } else {
            Vec x = grid.node(i);
            out = 0;
            for (const Offset& o : offsets) {
                double mm = m(x, o.z);
                double uv = gather(u, idx, o);
                if (uv != kExterior)
                    acc += o.wk * mm * uv;
                else
                    out += o.wk * mm * dirichlet(x + o.z);
            }
        }
        val += pc.mass * u[i] - acc - out;
        return val;
    }

    double extremal_value(const std::vector<double>& u, std::size_t s) const {
        const std::size_t i = solve_nodes[s];
        const int d = dim();
        double val = 0;
        for (int ax = 0; ax < d; ++ax) {
            double d2 = second(u, i, ax);
            double aeff = d2 >= 0 ? ellip.lambda : ellip.Lambda + core_coef;
            val -= aeff * d2;
        }
        double rt = 0;
        for (int ax = 0; ax < d; ++ax)
            rt = std::max({rt, bwd(u, i, ax), -fwd(u, i, ax)});
        val += ellip.C0 * r_scale * rt;

        auto idx = grid.unflat(i);
        double acc = 0;
        std::size_t gsi = 0;
        const auto& gs = out_g[s];
        for (const Offset& o : offsets) {
            double uv = gather(u, idx, o);
            if (uv == kExterior) uv = gs[gsi++];
            double inc = uv - u[i];
            if (o.in_ball) inc -= split_compensator(u, i, o.z);
            if (inc < 0) acc -= o.wk * inc;  // [inc]^- against K_r
        }
        val += acc;
        return val - f_cache[s];
    }

    double node_residual(const std::vector<double>& u, std::size_t s) const {
        if (extremal) return extremal_value(u, s);
        double sup = -kInf;
        for (std::size_t ai = 0; ai < n_a; ++ai) {
            double inf = kInf;
            for (std::size_t bi = 0; bi < n_b; ++bi)
                inf = std::min(inf, pair_value(u, ai * n_b + bi, s));
            sup = std::max(sup, inf);
        }
        return sup;
    }

    // --- stale-nonlocal fast path for the explicit drivers --------------------
    //
    // The cache stores, per pair and solve node, the pure off-node nonlocal
    // value (gather + exterior for HJBI; the full [inc]^- sum shifted by u_i
    // for the extremal mode). Local terms are recomputed every sweep.

    std::vector<std::vector<double>> nonlocal_cache(const std::vector<double>& u) const {
        std::vector<std::vector<double>> cache(n_pairs_for_cache());
        for (auto& c : cache) c.assign(solve_nodes.size(), 0.0);
        parallel_for(solve_nodes.size(), threads, [&](std::size_t s) {
            std::size_t i = solve_nodes[s];
            auto idx = grid.unflat(i);
            if (extremal) {
                double acc = 0;
                std::size_t gsi = 0;
                const auto& gs = out_g[s];
                for (const Offset& o : offsets) {
                    double uv = gather(u, idx, o);
                    if (uv == kExterior) uv = gs[gsi++];
                    double inc = uv - u[i];
                    if (o.in_ball) inc -= split_compensator(u, i, o.z);
                    if (inc < 0) acc -= o.wk * inc;
                }
                cache[0][s] = acc;  // the full -P^-_{K,r} value at the snapshot
                return;
            }
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const MultiplierField& m = pairs[p].multiplier;
                double acc = 0, out = coef[p][s].out_val;
                if (!m) {
                    for (const Offset& o : offsets) {
                        double uv = gather(u, idx, o);
                        if (uv != kExterior) acc += o.wk * uv;
                    }
                } else {
                    Vec x = grid.node(i);
                    out = 0;
                    for (const Offset& o : offsets) {
                        double mm = m(x, o.z);
                        double uv = gather(u, idx, o);
                        if (uv != kExterior)
                            acc += o.wk * mm * uv;
                        else
                            out += o.wk * mm * dirichlet(x + o.z);
                    }
                }
                cache[p][s] = acc + out;  // gather + exterior (u_i mass applied fresh)
            }
        });
        return cache;
    }

    std::size_t n_pairs_for_cache() const { return extremal ? 1 : pairs.size(); }

    double pair_value_cached(const std::vector<double>& u, std::size_t p, std::size_t s,
                             double cached_gather) const {
        const PairCoef& pc = coef[p][s];
        const std::size_t i = solve_nodes[s];
        const int d = dim();
        double val = 0;
        for (int ax = 0; ax < d; ++ax) val -= pc.a_diag[ax] * second(u, i, ax);
        if (d == 2 && pc.cross != 0)
            val -= pc.cross > 0 ? pc.cross * cross_pp(u, i) : -pc.cross * cross_pm(u, i);
        for (int ax = 0; ax < d; ++ax) {
            if (pc.central[ax]) {
                val += pc.b_central[ax] * central(u, i, ax);
            } else {
                double b = pc.b_raw[ax];
                val += b > 0 ? b * bwd(u, i, ax) : b * fwd(u, i, ax);
                val += pc.b_plus[ax] * bwd(u, i, ax) + pc.b_minus[ax] * fwd(u, i, ax);
            }
        }
        val += pc.c * u[i] + pc.f;
        val += pc.mass * u[i] - cached_gather;
        return val;
    }

    double extremal_value_cached(const std::vector<double>& u, std::size_t s,
                                 double cached_nl) const {
        const std::size_t i = solve_nodes[s];
        const int d = dim();
        double val = 0;
        for (int ax = 0; ax < d; ++ax) {
            double d2 = second(u, i, ax);
            double aeff = d2 >= 0 ? ellip.lambda : ellip.Lambda + core_coef;
            val -= aeff * d2;
        }
        double rt = 0;
        for (int ax = 0; ax < d; ++ax) rt = std::max({rt, bwd(u, i, ax), -fwd(u, i, ax)});
        val += ellip.C0 * r_scale * rt;
        val += cached_nl;
        return val - f_cache[s];
    }

    double node_residual_cached(const std::vector<double>& u,
                                const std::vector<std::vector<double>>& cache,
                                std::size_t s) const {
        if (extremal) return extremal_value_cached(u, s, cache[0][s]);
        double sup = -kInf;
        for (std::size_t ai = 0; ai < n_a; ++ai) {
            double inf = kInf;
            for (std::size_t bi = 0; bi < n_b; ++bi) {
                std::size_t p = ai * n_b + bi;
                inf = std::min(inf, pair_value_cached(u, p, s, cache[p][s]));
            }
            sup = std::max(sup, inf);
        }
        return sup;
    }
};

// ---------------------------------------------------------------------------

DiscreteOperator::DiscreteOperator(HJBIProblem prob, Lattice grid, QuadratureParams qp)
    : impl_(std::make_unique<Impl>()) {
    if (prob.pairs.size() != prob.n_a * prob.n_b || prob.pairs.empty())
        throw std::invalid_argument("discretize: control family size mismatch (or empty)");
    impl_->grid = std::move(grid);
    impl_->qp = qp;
    impl_->domain = prob.domain;
    impl_->kernel = prob.kernel;
    impl_->ellip = prob.ellip;
    impl_->dirichlet = prob.dirichlet;
    impl_->n_a = prob.n_a;
    impl_->n_b = prob.n_b;
    impl_->pairs = std::move(prob.pairs);
    impl_->require_nonneg_c = prob.require_nonneg_zero_order;
    impl_->build_offsets();
    impl_->pick_nodes();
    impl_->assemble_hjbi();
}

DiscreteOperator::DiscreteOperator(ExtremalMinusProblem prob, Lattice grid, QuadratureParams qp)
    : impl_(std::make_unique<Impl>()) {
    impl_->grid = std::move(grid);
    impl_->qp = qp;
    impl_->domain = prob.domain;
    impl_->kernel = prob.kernel;
    impl_->r_scale = prob.r_scale;
    impl_->ellip = prob.ellip;
    impl_->dirichlet = prob.dirichlet;
    impl_->forcing = prob.forcing;
    impl_->extremal = true;
    impl_->build_offsets();
    impl_->pick_nodes();
    impl_->assemble_extremal();
}

DiscreteOperator::~DiscreteOperator() = default;
DiscreteOperator::DiscreteOperator(DiscreteOperator&&) noexcept = default;

const Lattice& DiscreteOperator::grid() const { return impl_->grid; }
const std::vector<double>& DiscreteOperator::dirichlet_values() const { return impl_->g_values; }
bool DiscreteOperator::is_solve_node(std::size_t flat) const {
    return impl_->solve_index[flat] >= 0;
}

std::vector<double> DiscreteOperator::residual(const std::vector<double>& u) const {
    std::vector<double> r(u.size(), 0.0);
    parallel_for(impl_->solve_nodes.size(), impl_->threads, [&](std::size_t s) {
        r[impl_->solve_nodes[s]] = impl_->node_residual(u, s);
    });
    return r;
}

double DiscreteOperator::residual_norm(const std::vector<double>& u) const {
    auto r = residual(u);
    double m = 0;
    for (double v : r) m = std::max(m, std::abs(v));
    return m;
}

double DiscreteOperator::stability_dt() const { return impl_->dt_bound; }
double DiscreteOperator::default_tol() const { return 1e-8 * (1.0 + impl_->f_inf); }

GridFunction DiscreteOperator::wrap(std::vector<double> values) const {
    return GridFunction(impl_->grid, std::move(values), impl_->dirichlet);
}

// ---- drivers ----------------------------------------------------------------

namespace {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;
using Impl = DiscreteOperator::Impl;

void add_drift_entry(std::vector<Triplet>& T, double& diag, const Lattice& g, std::size_t i,
                     int ax, double coef, int side) {
    // side +1: backward difference, -1: forward difference
    double h = g.spacing(ax);
    std::size_t st = g.stride(ax);
    if (coef == 0) return;
    if (side > 0) {
        diag += coef / h;
        T.emplace_back(int(i), int(i - st), -coef / h);
    } else {
        diag += -coef / h;
        T.emplace_back(int(i), int(i + st), coef / h);
    }
}

void add_local_row(std::vector<Triplet>& T, const Lattice& g, std::size_t i, const PairCoef& pc,
                   int d, double mass) {
    double diag = pc.c + mass;
    for (int ax = 0; ax < d; ++ax) {
        double h = g.spacing(ax);
        double w = pc.a_diag[ax] / (h * h);
        std::size_t st = g.stride(ax);
        double up = -w, dn = -w;
        if (pc.central[ax]) {
            up += pc.b_central[ax] / (2 * h);
            dn += -pc.b_central[ax] / (2 * h);
            T.emplace_back(int(i), int(i + st), up);
            T.emplace_back(int(i), int(i - st), dn);
            diag += 2 * w;
        } else {
            T.emplace_back(int(i), int(i + st), up);
            T.emplace_back(int(i), int(i - st), dn);
            diag += 2 * w;
            double b = pc.b_raw[ax];
            add_drift_entry(T, diag, g, i, ax, b > 0 ? b : 0.0, +1);
            add_drift_entry(T, diag, g, i, ax, b < 0 ? b : 0.0, -1);
            add_drift_entry(T, diag, g, i, ax, pc.b_plus[ax], +1);
            add_drift_entry(T, diag, g, i, ax, pc.b_minus[ax], -1);
        }
    }
    if (d == 2 && pc.cross != 0) {
        std::size_t s0 = g.stride(0), s1 = g.stride(1);
        double w = std::abs(pc.cross) / (g.spacing(0) * g.spacing(1));
        if (pc.cross > 0) {
            T.emplace_back(int(i), int(i + s0 + s1), -w);
            T.emplace_back(int(i), int(i - s0 - s1), -w);
        } else {
            T.emplace_back(int(i), int(i + s0 - s1), -w);
            T.emplace_back(int(i), int(i - s0 + s1), -w);
        }
        diag += 2 * w;
    }
    T.emplace_back(int(i), int(i), diag);
}

// Frozen policy for one outer Howard step.
struct FrozenPolicy {
    std::vector<std::size_t> pair;  // HJBI
    std::vector<double> snapshot;   // extremal pattern source
};

// Extremal frozen row data derived from the snapshot at one node.
struct ExtremalRow {
    PairCoef pc;   // a_diag/b fields reused
    double mass;   // pattern mass
    double out_const;  // sum over exterior pattern offsets of wk * g
};

ExtremalRow extremal_frozen_row(const Impl& im, const std::vector<double>& snap, std::size_t s) {
    const int d = im.dim();
    std::size_t i = im.solve_nodes[s];
    ExtremalRow row{};
    PairCoef& pc = row.pc;
    for (int ax = 0; ax < d; ++ax) {
        double d2 = im.second(snap, i, ax);
        pc.a_diag[ax] = d2 >= 0 ? im.ellip.lambda : im.ellip.Lambda + im.core_coef;
        pc.central[ax] = false;
    }
    double rt = 0;
    int rt_ax = -1, rt_side = 0;
    for (int ax = 0; ax < d; ++ax) {
        double b = im.bwd(snap, i, ax), f = -im.fwd(snap, i, ax);
        if (b > rt) { rt = b; rt_ax = ax; rt_side = +1; }
        if (f > rt) { rt = f; rt_ax = ax; rt_side = -1; }
    }
    double c0r = im.ellip.C0 * im.r_scale;
    if (rt_ax >= 0 && c0r > 0) pc.b_raw[rt_ax] = rt_side * c0r;

    auto idx = im.grid.unflat(i);
    std::size_t gsi = 0;
    const auto& gs = im.out_g[s];
    for (const Offset& o : im.offsets) {
        double uv = im.gather(snap, idx, o);
        bool exterior = uv == kInf;
        if (exterior) uv = gs[gsi++];
        double inc = uv - snap[i];
        if (o.in_ball) inc -= im.split_compensator(snap, i, o.z);
        if (inc < 0) {
            row.mass += o.wk;
            if (exterior) row.out_const += o.wk * uv;
            if (o.in_ball) {
                for (int ax = 0; ax < d; ++ax) {
                    double bz = o.wk * o.z[ax];
                    if (bz > 0)
                        pc.b_plus[ax] += bz;
                    else
                        pc.b_minus[ax] += bz;
                }
            }
        }
    }
    return row;
}

// Right-hand accumulation of the lagged nonlocal gather for the frozen system.
void accumulate_gather(const Impl& im, const FrozenPolicy& pol, const std::vector<double>& u,
                       std::vector<double>& rhs) {
    parallel_for(im.solve_nodes.size(), im.threads, [&](std::size_t s) {
        std::size_t i = im.solve_nodes[s];
        auto idx = im.grid.unflat(i);
        double acc = 0;
        if (!im.extremal) {
            const MultiplierField& m = im.pairs[pol.pair[s]].multiplier;
            if (!m) {
                for (const Offset& o : im.offsets) {
                    double uv = im.gather(u, idx, o);
                    if (uv != kInf) acc += o.wk * uv;
                }
            } else {
                Vec x = im.grid.node(i);
                for (const Offset& o : im.offsets) {
                    double uv = im.gather(u, idx, o);
                    if (uv != kInf) acc += o.wk * m(x, o.z) * uv;
                }
            }
        } else {
            // pattern from the snapshot, values from the current iterate
            const auto& snap = pol.snapshot;
            std::size_t gsi = 0;
            const auto& gs = im.out_g[s];
            for (const Offset& o : im.offsets) {
                double sv = im.gather(snap, idx, o);
                bool exterior = sv == kInf;
                if (exterior) sv = gs[gsi];
                double inc = sv - snap[i];
                if (o.in_ball) inc -= im.split_compensator(snap, i, o.z);
                if (inc < 0 && !exterior) {
                    double uv = im.gather(u, idx, o);
                    acc += o.wk * uv;
                }
                if (exterior) ++gsi;
            }
        }
        rhs[i] += acc;
    });
}

}  // namespace

GridFunction solve_policy_iteration(const DiscreteOperator& op, const SolveOptions& opt,
                                    SolveStats* stats) {
    auto& im = op.impl();
    im.threads = opt.threads;
    const Lattice& g = im.grid;
    const int d = g.dim();
    const double tol = opt.tol > 0 ? opt.tol : op.default_tol();

    std::vector<double> u = im.g_values;
    double res = op.residual_norm(u);
    long total_inner = 0;
    int outer = 0;

    while (res > tol && outer < opt.max_outer) {
        ++outer;
        FrozenPolicy pol;
        std::vector<Triplet> T;
        std::vector<double> rhs(g.size(), 0.0);
        T.reserve(g.size() * (2 * d + 5));
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (im.solve_index[i] < 0) {
                T.emplace_back(int(i), int(i), 1.0);
                rhs[i] = im.g_values[i];
            }
        }

        if (!im.extremal) {
            pol.pair.resize(im.solve_nodes.size());
            parallel_for(im.solve_nodes.size(), opt.threads, [&](std::size_t s) {
                double best = -kInf;
                std::size_t best_pair = 0;
                for (std::size_t ai = 0; ai < im.n_a; ++ai) {
                    double inf = kInf;
                    std::size_t inf_pair = ai * im.n_b;
                    for (std::size_t bi = 0; bi < im.n_b; ++bi) {
                        double v = im.pair_value(u, ai * im.n_b + bi, s);
                        if (v < inf) {
                            inf = v;
                            inf_pair = ai * im.n_b + bi;
                        }
                    }
                    if (inf > best) {
                        best = inf;
                        best_pair = inf_pair;
                    }
                }
                pol.pair[s] = best_pair;
            });
            for (std::size_t s = 0; s < im.solve_nodes.size(); ++s) {
                std::size_t i = im.solve_nodes[s];
                const PairCoef& pc = im.coef[pol.pair[s]][s];
                add_local_row(T, g, i, pc, d, pc.mass);
                rhs[i] = -pc.f + pc.out_val;
            }
        } else {
            pol.snapshot = u;
            for (std::size_t s = 0; s < im.solve_nodes.size(); ++s) {
                std::size_t i = im.solve_nodes[s];
                ExtremalRow row = extremal_frozen_row(im, pol.snapshot, s);
                add_local_row(T, g, i, row.pc, d, row.mass);
                rhs[i] = im.f_cache[s] + row.out_const;
            }
        }

        SpMat L(int(g.size()), int(g.size()));
        L.setFromTriplets(T.begin(), T.end());
        Eigen::SparseLU<SpMat> lu;
        lu.compute(L);
        if (lu.info() != Eigen::Success)
            throw ConvergenceError("policy iteration: frozen-system factorization failed");

        for (int lag = 0; lag < 400; ++lag) {
            std::vector<double> rhs_total = rhs;
            accumulate_gather(im, pol, u, rhs_total);
            Eigen::Map<const Eigen::VectorXd> bvec(rhs_total.data(), long(rhs_total.size()));
            Eigen::VectorXd x = lu.solve(bvec);
            double diff = 0;
            for (std::size_t i = 0; i < g.size(); ++i)
                diff = std::max(diff, std::abs(x[long(i)] - u[i]));
            for (std::size_t i = 0; i < g.size(); ++i) u[i] = x[long(i)];
            ++total_inner;
            if (diff <= tol * 0.02) break;
        }
        res = op.residual_norm(u);
    }
    if (stats) {
        stats->outer_iters = outer;
        stats->sweeps = total_inner;
        stats->residual = res;
    }
    if (res > tol) {
        std::ostringstream os;
        os << "policy iteration did not converge: residual " << res << " > tol " << tol;
        throw ConvergenceError(os.str());
    }
    return op.wrap(std::move(u));
}

GridFunction solve_pseudo_time(const DiscreteOperator& op, double dt, const SolveOptions& opt,
                               SolveStats* stats) {
    auto& im = op.impl();
    im.threads = opt.threads;
    if (!(dt > 0) || dt > im.dt_bound * (1 + 1e-12))
        throw std::domain_error("solve_pseudo_time: dt above the stability bound");
    const double tol = opt.tol > 0 ? opt.tol : op.default_tol();

    std::vector<double> u = im.g_values;
    double res = op.residual_norm(u);
    long sweeps = 0;
    std::vector<double> rloc(im.solve_nodes.size());
    while (res > tol) {
        auto cache = im.nonlocal_cache(u);
        for (int k = 0; k < std::max(1, opt.nonlocal_refresh) && res > tol; ++k) {
            parallel_for(im.solve_nodes.size(), opt.threads, [&](std::size_t s) {
                rloc[s] = im.node_residual_cached(u, cache, s);
            });
            for (std::size_t s = 0; s < im.solve_nodes.size(); ++s)
                u[im.solve_nodes[s]] -= dt * rloc[s];
            ++sweeps;
            if (sweeps >= opt.max_steps)
                throw ConvergenceError("pseudo-time: step cap exceeded, residual " +
                                       std::to_string(res));
        }
        res = op.residual_norm(u);
    }
    if (stats) {
        stats->sweeps = sweeps;
        stats->residual = res;
        stats->dt = dt;
    }
    return op.wrap(std::move(u));
}

GridFunction perron_iterate(const DiscreteOperator& op, const GridFunction& lower,
                            const GridFunction& upper, const SolveOptions& opt,
                            SolveStats* stats) {
    auto& im = op.impl();
    im.threads = opt.threads;
    const Lattice& g = im.grid;
    const double tol = opt.tol > 0 ? opt.tol : op.default_tol();
    const std::vector<double>& lo = lower.values();
    const std::vector<double>& hi = upper.values();
    if (lo.size() != g.size() || hi.size() != g.size())
        throw std::invalid_argument("perron_iterate: grid mismatch");

    double scale = 1 + std::max(lower.max_abs(), upper.max_abs());
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (lo[i] > hi[i] + 1e-12 * scale)
            throw std::invalid_argument("perron_iterate: lower > upper nodewise");
        if (im.solve_index[i] < 0) {
            if (std::abs(lo[i] - im.g_values[i]) > 1e-9 * scale ||
                std::abs(hi[i] - im.g_values[i]) > 1e-9 * scale)
                throw std::invalid_argument("perron_iterate: barriers must equal g outside");
        }
    }
    double slack = 1e-6 * scale + 10 * tol;
    auto rl = op.residual(lo);
    auto rh = op.residual(hi);
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (rl[i] > slack)
            throw std::invalid_argument("perron_iterate: lower fails the subsolution check");
        if (rh[i] < -slack)
            throw std::invalid_argument("perron_iterate: upper fails the supersolution check");
    }

    double dt = 0.9 * im.dt_bound;
    std::vector<double> u = lo;
    double res = op.residual_norm(u);
    long sweeps = 0;
    std::vector<double> rloc(im.solve_nodes.size());
    while (res > tol) {
        auto cache = im.nonlocal_cache(u);
        for (int k = 0; k < std::max(1, opt.nonlocal_refresh) && res > tol; ++k) {
            parallel_for(im.solve_nodes.size(), opt.threads, [&](std::size_t s) {
                rloc[s] = im.node_residual_cached(u, cache, s);
            });
            // Ordering can only be asserted on fresh-cache sweeps; stale-cache
            // steps may jitter within the refresh window.
            bool bad = false;
            for (std::size_t s = 0; s < im.solve_nodes.size(); ++s) {
                std::size_t i = im.solve_nodes[s];
                double next = std::min(hi[i], u[i] - dt * rloc[s]);
                if (k == 0 && next < u[i] - 1e-10 * scale) bad = true;
                u[i] = next;
            }
            if (bad) throw ConvergenceError("perron_iterate: monotonicity violated mid-iteration");
            ++sweeps;
            if (sweeps >= opt.max_steps)
                throw ConvergenceError("perron_iterate: step cap exceeded");
        }
        res = op.residual_norm(u);
    }
    if (stats) {
        stats->sweeps = sweeps;
        stats->residual = res;
        stats->dt = dt;
    }
    return op.wrap(std::move(u));
}

// ---- manufactured solutions --------------------------------------------------

double levy_apply_closed(const SmoothFunction& u, const Vec& x, const QuadratureScheme& scheme,
                         const MultiplierField& multiplier) {
    if (scheme.kernel().is_zero()) return 0.0;
    double u0 = u.value(x);
    Vec grad = u.gradient(x);
    SymMat H = u.hessian(x);

    double core = 0;
    const auto& dirs = scheme.core_directions();
    double rep = 0.5 * scheme.inner_radius();
    for (const Vec& e : dirs) {
        double mult = multiplier ? multiplier(x, rep * e) : 1.0;
        core += 0.5 * H.quad(e) * mult;
    }
    core *= scheme.core_second_moment() / double(dirs.size());

    std::vector<double> terms;
    terms.reserve(scheme.nodes().size());
    for (const QuadNode& n : scheme.nodes()) {
        double inc = u.value(x + n.z) - u0;
        if (n.in_unit_ball) inc -= dot(grad, n.z);
        double mult = multiplier ? multiplier(x, n.z) : 1.0;
        terms.push_back(inc * mult * n.kernel * n.weight);
    }
    return core + compensated_sum(terms);
}

std::vector<std::function<double(const Vec&)>> manufactured_rhs(const HJBIProblem& prob,
                                                                const SmoothFunction& u_exact,
                                                                const QuadratureParams& qp) {
    QuadratureParams ref = qp;
    ref.inner_radius = qp.inner_radius > 0 ? qp.inner_radius : 1e-4;
    ref.shells_per_octave = std::max(8, qp.shells_per_octave * 2);
    ref.nodes_per_shell = std::max(32, qp.nodes_per_shell * 2);
    auto scheme = std::make_shared<QuadratureScheme>(prob.kernel, 1.0, ref, ref.inner_radius);

    std::vector<std::function<double(const Vec&)>> out;
    for (const ControlPair& cp : prob.pairs) {
        out.push_back([scheme, cp, u_exact](const Vec& x) {
            SymMat a = cp.diffusion(x);
            SymMat H = u_exact.hessian(x);
            double tr = 0;
            for (int i = 0; i < a.dim(); ++i)
                for (int j = 0; j < a.dim(); ++j) tr += a.at(i, j) * H.at(i, j);
            double I = levy_apply_closed(u_exact, x, *scheme, cp.multiplier);
            return tr + I - dot(cp.drift(x), u_exact.gradient(x)) -
                   cp.zero_order(x) * u_exact.value(x);
        });
    }
    return out;
}

}  // namespace ipde
