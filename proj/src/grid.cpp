#include "ipde/grid.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>

namespace ipde {

BoxDomain::BoxDomain(Vec lo_, Vec hi_) : lo(lo_), hi(hi_) {
    if (lo.dim() != hi.dim()) throw std::invalid_argument("BoxDomain: dimension mismatch");
    for (int i = 0; i < lo.dim(); ++i)
        if (!(lo[i] < hi[i])) throw std::invalid_argument("BoxDomain: lo < hi required");
}

Lattice::Lattice(BoxDomain box, std::vector<int> n) : box_(box), n_(std::move(n)) {
    if (static_cast<int>(n_.size()) != box_.dim())
        throw std::invalid_argument("Lattice: axis count mismatch");
    h_.resize(n_.size());
    stride_.resize(n_.size());
    total_ = 1;
    for (std::size_t i = 0; i < n_.size(); ++i) {
        if (n_[i] < 2) throw std::invalid_argument("Lattice: need >= 2 nodes per axis");
        h_[i] = (box_.hi[int(i)] - box_.lo[int(i)]) / (n_[i] - 1);
    }
    for (int i = int(n_.size()) - 1; i >= 0; --i) {
        stride_[i] = total_;
        total_ *= n_[i];
    }
}

double Lattice::spacing_max() const {
    double h = 0;
    for (double hi : h_) h = std::max(h, hi);
    return h;
}

Vec Lattice::node(std::size_t flat) const {
    Vec x(dim());
    for (int i = 0; i < dim(); ++i) {
        std::size_t idx = (flat / stride_[i]) % n_[i];
        x[i] = box_.lo[i] + h_[i] * double(idx);
    }
    return x;
}

std::size_t Lattice::flat(const std::vector<int>& idx) const {
    std::size_t f = 0;
    for (std::size_t i = 0; i < idx.size(); ++i) f += stride_[i] * idx[i];
    return f;
}

std::vector<int> Lattice::unflat(std::size_t flat) const {
    std::vector<int> idx(dim());
    for (int i = 0; i < dim(); ++i) idx[i] = int((flat / stride_[i]) % n_[i]);
    return idx;
}

bool Lattice::is_face_node(std::size_t flat) const {
    for (int i = 0; i < dim(); ++i) {
        std::size_t idx = (flat / stride_[i]) % n_[i];
        if (idx == 0 || idx + 1 == std::size_t(n_[i])) return true;
    }
    return false;
}

double Lattice::cell_volume() const {
    double v = 1;
    for (double h : h_) v *= h;
    return v;
}

Region Region::ball(Vec center, double radius) {
    Region r;
    r.kind_ = Kind::Ball;
    r.center_ = center;
    r.r_outer_ = radius;
    return r;
}
Region Region::cube(Vec center, double half_width) {
    Region r;
    r.kind_ = Kind::Cube;
    r.center_ = center;
    r.half_width_ = half_width;
    return r;
}
Region Region::annulus(Vec center, double r_inner, double r_outer) {
    Region r;
    r.kind_ = Kind::Annulus;
    r.center_ = center;
    r.r_inner_ = r_inner;
    r.r_outer_ = r_outer;
    return r;
}
Region Region::box(BoxDomain b) {
    Region r;
    r.kind_ = Kind::Box;
    r.box_ = b;
    Vec c(b.dim());
    for (int i = 0; i < b.dim(); ++i) c[i] = 0.5 * (b.lo[i] + b.hi[i]);
    r.center_ = c;
    return r;
}
Region Region::custom(std::function<bool(const Vec&)> pred) {
    Region r;
    r.kind_ = Kind::Custom;
    r.pred_ = std::move(pred);
    return r;
}

bool Region::contains(const Vec& x) const {
    switch (kind_) {
        case Kind::Ball: return (x - center_).norm() < r_outer_;
        case Kind::Cube: {
            for (int i = 0; i < x.dim(); ++i)
                if (std::abs(x[i] - center_[i]) >= half_width_) return false;
            return true;
        }
        case Kind::Annulus: {
            double s = (x - center_).norm();
            return s > r_inner_ && s < r_outer_;
        }
        case Kind::Box: return box_.contains(x);
        case Kind::Custom: return pred_(x);
    }
    return false;
}

double Region::diam() const {
    switch (kind_) {
        case Kind::Ball: return 2 * r_outer_;
        case Kind::Cube: return 2 * half_width_ * std::sqrt(double(center_.dim()));
        case Kind::Annulus: return 2 * r_outer_;
        case Kind::Box: return box_.diam();
        case Kind::Custom: throw std::domain_error("Region::diam: custom region has no diameter");
    }
    return 0;
}

GridFunction::GridFunction(Lattice grid, std::vector<double> values,
                           std::function<double(const Vec&)> exterior)
    : grid_(std::make_shared<Lattice>(std::move(grid))),
      values_(std::move(values)),
      exterior_(std::move(exterior)) {
    if (values_.size() != grid_->size())
        throw std::invalid_argument("GridFunction: value count != node count");
    for (double v : values_)
        if (!std::isfinite(v)) throw std::invalid_argument("GridFunction: non-finite node value");
    if (!exterior_) exterior_ = [](const Vec&) { return 0.0; };
}

GridFunction GridFunction::sample(const Lattice& grid,
                                  const std::function<double(const Vec&)>& f) {
    std::vector<double> v(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) v[i] = f(grid.node(i));
    return GridFunction(grid, std::move(v), f);
}

GridFunction GridFunction::with_values(std::vector<double> v) const {
    GridFunction g;
    g.grid_ = grid_;
    g.values_ = std::move(v);
    g.exterior_ = exterior_;
    if (g.values_.size() != grid_->size())
        throw std::invalid_argument("GridFunction: value count != node count");
    return g;
}

double GridFunction::max_abs() const {
    double m = 0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

double GridFunction::operator()(const Vec& x) const { return interpolate(*this, x); }

double interpolate(const GridFunction& u, const Vec& x) {
    const Lattice& g = u.grid();
    const BoxDomain& box = g.box();
    const int d = g.dim();
    if (!box.contains(x)) return u.exterior(x);

    int base[kMaxDim];
    double w[kMaxDim];
    for (int i = 0; i < d; ++i) {
        double t = (x[i] - box.lo[i]) / g.spacing(i);
        int idx = int(std::floor(t));
        idx = std::clamp(idx, 0, g.extent(i) - 2);
        base[i] = idx;
        w[i] = std::clamp(t - idx, 0.0, 1.0);
    }
    // Multilinear: 2^d corner gather.
    double acc = 0;
    for (int corner = 0; corner < (1 << d); ++corner) {
        double weight = 1;
        std::size_t flat = 0;
        for (int i = 0; i < d; ++i) {
            int bit = (corner >> i) & 1;
            weight *= bit ? w[i] : 1.0 - w[i];
            flat += std::size_t(base[i] + bit) * g.stride(i);
        }
        if (weight != 0) acc += weight * u.value_at(flat);
    }
    return acc;
}

std::vector<std::size_t> region_nodes(const Lattice& g, const Region& r) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (r.contains(g.node(i))) out.push_back(i);
    return out;
}

double region_measure(const Lattice& g, const Region& r) {
    return double(region_nodes(g, r).size()) * g.cell_volume();
}

namespace {

// Trapezoid end-weight along each axis for nodes sitting on the face of an
// axis-aligned box/cube region; plain h^d elsewhere.
double node_weight(const Lattice& g, const Region& r, const Vec& x) {
    double w = g.cell_volume();
    if (r.kind() == Region::Kind::Box || r.kind() == Region::Kind::Cube) {
        for (int i = 0; i < g.dim(); ++i) {
            double lo, hi;
            if (r.kind() == Region::Kind::Box) {
                lo = r.as_box().lo[i];
                hi = r.as_box().hi[i];
            } else {
                lo = r.center()[i] - r.half_width();
                hi = r.center()[i] + r.half_width();
            }
            double h = g.spacing(i);
            if (std::abs(x[i] - lo) < 1e-12 * (1 + std::abs(lo)) ||
                std::abs(x[i] - hi) < 1e-12 * (1 + std::abs(hi)))
                w *= 0.5;
            (void)h;
        }
    }
    return w;
}

}  // namespace

double lp_norm(const GridFunction& u, double p, const Region& r) {
    if (!(p > 0)) throw std::domain_error("lp_norm: p must be > 0");
    const Lattice& g = u.grid();
    // Box/cube regions include their closure so face nodes carry trapezoid weights.
    bool closed = r.kind() == Region::Kind::Box || r.kind() == Region::Kind::Cube;
    std::vector<double> terms;
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec x = g.node(i);
        bool member = r.contains(x);
        if (!member && closed) {
            // closure test with face tolerance
            Vec y = x;
            member = true;
            for (int k = 0; k < g.dim() && member; ++k) {
                double lo = r.kind() == Region::Kind::Box ? r.as_box().lo[k]
                                                          : r.center()[k] - r.half_width();
                double hi = r.kind() == Region::Kind::Box ? r.as_box().hi[k]
                                                          : r.center()[k] + r.half_width();
                if (y[k] < lo - 1e-12 || y[k] > hi + 1e-12) member = false;
            }
        }
        if (member) terms.push_back(std::pow(std::abs(u.value_at(i)), p) * node_weight(g, r, x));
    }
    if (terms.empty()) throw std::domain_error("lp_norm: empty region");
    return std::pow(compensated_sum(terms), 1.0 / p);
}

double oscillation(const GridFunction& u, const Region& r) {
    auto nodes = region_nodes(u.grid(), r);
    if (nodes.empty()) throw std::domain_error("oscillation: empty region");
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto i : nodes) {
        lo = std::min(lo, u.value_at(i));
        hi = std::max(hi, u.value_at(i));
    }
    return hi - lo;
}

double superlevel_measure(const GridFunction& u, double t, const Region& r) {
    const Lattice& g = u.grid();
    std::size_t count = 0;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (r.contains(g.node(i)) && u.value_at(i) > t) ++count;
    return double(count) * g.cell_volume();
}

double inf_over_region(const GridFunction& u, const Region& r) {
    auto nodes = region_nodes(u.grid(), r);
    if (nodes.empty()) throw std::domain_error("inf_over_region: empty region");
    double lo = std::numeric_limits<double>::infinity();
    for (auto i : nodes) lo = std::min(lo, u.value_at(i));
    return lo;
}

double sup_over_region(const GridFunction& u, const Region& r) {
    auto nodes = region_nodes(u.grid(), r);
    if (nodes.empty()) throw std::domain_error("sup_over_region: empty region");
    double hi = -std::numeric_limits<double>::infinity();
    for (auto i : nodes) hi = std::max(hi, u.value_at(i));
    return hi;
}

void write_csv(const GridFunction& u, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_csv: cannot open " + path);
    const Lattice& g = u.grid();
    for (int i = 0; i < g.dim(); ++i) out << "x" << (i + 1) << ",";
    out << "value\n";
    char buf[64];
    for (std::size_t i = 0; i < g.size(); ++i) {
        Vec x = g.node(i);
        for (int k = 0; k < g.dim(); ++k) {
            std::snprintf(buf, sizeof buf, "%.17g", x[k]);
            out << buf << ",";
        }
        std::snprintf(buf, sizeof buf, "%.17g", u.value_at(i));
        out << buf << "\n";
    }
}

namespace {
constexpr std::uint32_t kBinMagic = 0x49504446;  // "IPDF"
void put_u32(std::ofstream& o, std::uint32_t v) { o.write(reinterpret_cast<char*>(&v), 4); }
void put_f64(std::ofstream& o, double v) { o.write(reinterpret_cast<char*>(&v), 8); }
std::uint32_t get_u32(std::ifstream& in) {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
double get_f64(std::ifstream& in) {
    double v;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
}
}  // namespace

void write_binary(const GridFunction& u, const std::string& path) {
    static_assert(std::endian::native == std::endian::little,
                  "binary grid layout is little-endian");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_binary: cannot open " + path);
    const Lattice& g = u.grid();
    put_u32(out, kBinMagic);
    put_u32(out, std::uint32_t(g.dim()));
    for (int i = 0; i < g.dim(); ++i) put_u32(out, std::uint32_t(g.extent(i)));
    for (int i = 0; i < g.dim(); ++i) {
        put_f64(out, g.box().lo[i]);
        put_f64(out, g.box().hi[i]);
    }
    for (double v : u.values()) put_f64(out, v);
}

GridFunction read_binary(const std::string& path, std::function<double(const Vec&)> exterior) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_binary: cannot open " + path);
    if (get_u32(in) != kBinMagic) throw std::runtime_error("read_binary: bad magic");
    int d = int(get_u32(in));
    std::vector<int> n(d);
    for (int i = 0; i < d; ++i) n[i] = int(get_u32(in));
    Vec lo(d), hi(d);
    for (int i = 0; i < d; ++i) {
        lo[i] = get_f64(in);
        hi[i] = get_f64(in);
    }
    Lattice g(BoxDomain(lo, hi), n);
    std::vector<double> v(g.size());
    for (auto& x : v) x = get_f64(in);
    if (!in) throw std::runtime_error("read_binary: truncated payload");
    return GridFunction(std::move(g), std::move(v), std::move(exterior));
}

}  // namespace ipde
