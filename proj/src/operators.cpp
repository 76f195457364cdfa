#include "ipde/operators.hpp"

#include <Eigen/Dense>

#include "ipde/solver.hpp"

namespace ipde {

std::vector<double> sym_eigenvalues(const SymMat& X) {
    int d = X.dim();
    if (d == 1) return {X.at(0, 0)};
    if (d == 2) {
        double m = 0.5 * (X.at(0, 0) + X.at(1, 1));
        double det = X.at(0, 0) * X.at(1, 1) - X.at(0, 1) * X.at(1, 0);
        double disc = std::sqrt(std::max(0.0, m * m - det));
        return {m - disc, m + disc};
    }
    Eigen::MatrixXd M(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) M(i, j) = X.at(i, j);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M);
    std::vector<double> out(d);
    for (int i = 0; i < d; ++i) out[i] = es.eigenvalues()[i];
    return out;
}

namespace {
double pucci_of_eigs(const std::vector<double>& eigs, double pos_w, double neg_w) {
    double s = 0;
    for (double e : eigs) s += e > 0 ? pos_w * e : neg_w * e;
    return s;
}
SymMat from_row_major(const double* m, int d) {
    SymMat X(d);
    double scale = 0;
    for (int i = 0; i < d * d; ++i) scale = std::max(scale, std::abs(m[i]));
    for (int i = 0; i < d; ++i)
        for (int j = i; j < d; ++j) {
            if (std::abs(m[i * d + j] - m[j * d + i]) > 1e-9 * std::max(scale, 1e-300))
                throw std::domain_error("pucci: non-symmetric input");
            X.set(i, j, 0.5 * (m[i * d + j] + m[j * d + i]));
        }
    return X;
}
}  // namespace

double pucci_plus(const SymMat& X, const EllipticityParams& P) {
    return pucci_of_eigs(sym_eigenvalues(X), P.Lambda, P.lambda);
}
double pucci_minus(const SymMat& X, const EllipticityParams& P) {
    return pucci_of_eigs(sym_eigenvalues(X), P.lambda, P.Lambda);
}
double pucci_plus(const double* m, int d, const EllipticityParams& P) {
    return pucci_plus(from_row_major(m, d), P);
}
double pucci_minus(const double* m, int d, const EllipticityParams& P) {
    return pucci_minus(from_row_major(m, d), P);
}

HessianEstimate hessian_estimate(const GridFunction& u, const Vec& x) {
    const Lattice& g = u.grid();
    int d = g.dim();
    double hmax = g.spacing_max();
    if (!g.box().strictly_inside(x, hmax * (1 - 1e-12)))
        throw std::domain_error("hessian_estimate: stencil leaves the box");

    HessianEstimate est{SymMat(d), Vec(d), hmax};
    double u0 = u(x);
    for (int i = 0; i < d; ++i) {
        double hi = g.spacing(i);
        Vec xp = x, xm = x;
        xp[i] += hi;
        xm[i] -= hi;
        double up = u(xp), um = u(xm);
        est.gradient[i] = (up - um) / (2 * hi);
        est.hessian.set(i, i, (up - 2 * u0 + um) / (hi * hi));
        for (int j = i + 1; j < d; ++j) {
            double hj = g.spacing(j);
            Vec a = x, b = x, c = x, e = x;
            a[i] += hi; a[j] += hj;
            b[i] -= hi; b[j] -= hj;
            c[i] += hi; c[j] -= hj;
            e[i] -= hi; e[j] += hj;
            est.hessian.set(i, j, (u(a) + u(b) - u(c) - u(e)) / (4 * hi * hj));
        }
    }
    return est;
}

namespace {

// Shared worker: accumulates core + shell contributions with a per-increment
// transform (identity, positive part, negative part).
enum class Part { Full, Pos, Neg };

double apply_part(double v, Part p) {
    switch (p) {
        case Part::Full: return v;
        case Part::Pos: return v > 0 ? v : 0.0;
        case Part::Neg: return v < 0 ? -v : 0.0;
    }
    return v;
}

double nonlocal_accumulate(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme,
                           const MultiplierField& m, Part part) {
    if (scheme.kernel().is_zero()) return 0.0;
    HessianEstimate est = hessian_estimate(u, x);
    double u0 = u(x);

    // Taylor core: radial integral exact in |z|, angular nodes carry the sign.
    double core = 0;
    const auto& dirs = scheme.core_directions();
    double m2 = scheme.core_second_moment();
    double rep = 0.5 * scheme.inner_radius();
    for (const Vec& e : dirs) {
        double q = 0.5 * est.hessian.quad(e);
        double mult = m ? m(x, rep * e) : 1.0;
        core += apply_part(q, part) * mult;
    }
    core *= m2 / double(dirs.size());

    std::vector<double> terms;
    terms.reserve(scheme.nodes().size());
    for (const QuadNode& n : scheme.nodes()) {
        double inc = u(x + n.z) - u0;
        if (n.in_unit_ball) inc -= dot(est.gradient, n.z);
        double mult = m ? m(x, n.z) : 1.0;
        terms.push_back(apply_part(inc, part) * mult * n.kernel * n.weight);
    }
    return core + compensated_sum(terms);
}

}  // namespace

double levy_apply(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme,
                  const MultiplierField& multiplier) {
    return nonlocal_accumulate(u, x, scheme, multiplier, Part::Full);
}

double nonlocal_pucci_plus(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme) {
    return nonlocal_accumulate(u, x, scheme, nullptr, Part::Pos);
}

double nonlocal_pucci_minus(const GridFunction& u, const Vec& x, const QuadratureScheme& scheme) {
    return -nonlocal_accumulate(u, x, scheme, nullptr, Part::Neg);
}

double extremal_residual_minus(const GridFunction& u, const Vec& x, const EllipticityParams& P,
                               const QuadratureScheme& scheme) {
    HessianEstimate est = hessian_estimate(u, x);
    double r = 1.0 / scheme.compensation_radius();
    return -pucci_minus(est.hessian, P) - nonlocal_pucci_minus(u, x, scheme) +
           P.C0 * r * est.gradient.norm();
}

QuadratureScheme make_scheme(const LevyKernel& K, double r_scale, const QuadratureParams& qp,
                             const Lattice& grid) {
    double rho = qp.inner_radius > 0 ? qp.inner_radius : 2.0 * grid.spacing_max();
    return QuadratureScheme(K, r_scale, qp, rho);
}

double hjbi_eval(const HJBIProblem& prob, const GridFunction& u, const Vec& x,
                 const QuadratureParams& qp) {
    if (prob.pairs.empty()) throw std::domain_error("hjbi_eval: empty control family");
    HessianEstimate est = hessian_estimate(u, x);
    QuadratureScheme scheme = make_scheme(prob.kernel, 1.0, qp, u.grid());

    double sup = -std::numeric_limits<double>::infinity();
    for (std::size_t ai = 0; ai < prob.n_a; ++ai) {
        double inf = std::numeric_limits<double>::infinity();
        for (std::size_t bi = 0; bi < prob.n_b; ++bi) {
            const ControlPair& cp = prob.pair(ai, bi);
            SymMat a = cp.diffusion(x);
            double val = 0;
            for (int i = 0; i < a.dim(); ++i)
                for (int j = 0; j < a.dim(); ++j) val -= a.at(i, j) * est.hessian.at(i, j);
            val -= levy_apply(u, x, scheme, cp.multiplier);
            val += dot(cp.drift(x), est.gradient);
            val += cp.zero_order(x) * u(x);
            val += cp.forcing(x);
            inf = std::min(inf, val);
        }
        sup = std::max(sup, inf);
    }
    return sup;
}

}  // namespace ipde
