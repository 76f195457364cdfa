// Uniform box grids, grid functions with exterior data on all of R^d,
// predicate regions, and the norms/measures the estimates use.
#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ipde/common.hpp"

namespace ipde {

/// Axis-aligned box [lo, hi] in R^d.
struct BoxDomain {
    Vec lo, hi;

    BoxDomain() = default;
    BoxDomain(Vec lo_, Vec hi_);

    int dim() const { return lo.dim(); }
    double diam() const { return (hi - lo).norm(); }
    bool contains(const Vec& x) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] || x[i] > hi[i]) return false;
        return true;
    }
    bool strictly_inside(const Vec& x, double margin) const {
        for (int i = 0; i < dim(); ++i)
            if (x[i] < lo[i] + margin || x[i] > hi[i] - margin) return false;
        return true;
    }
};

/// Uniform lattice over a box: n[i] nodes per axis including both faces.
class Lattice {
public:
    Lattice() = default;
    Lattice(BoxDomain box, std::vector<int> n);

    const BoxDomain& box() const { return box_; }
    int dim() const { return box_.dim(); }
    int extent(int axis) const { return n_[axis]; }
    std::size_t stride(int axis) const { return stride_[axis]; }
    double spacing(int axis) const { return h_[axis]; }
    double spacing_max() const;
    std::size_t size() const { return total_; }

    Vec node(std::size_t flat) const;
    std::size_t flat(const std::vector<int>& idx) const;
    std::vector<int> unflat(std::size_t flat) const;
    bool is_face_node(std::size_t flat) const;

    /// Cell volume h_1 * ... * h_d.
    double cell_volume() const;

private:
    BoxDomain box_;
    std::vector<int> n_;
    std::vector<double> h_;
    std::vector<std::size_t> stride_;
    std::size_t total_ = 0;
};

/// Node-predicate region over a lattice.
class Region {
public:
    enum class Kind { Ball, Cube, Annulus, Box, Custom };

    static Region ball(Vec center, double radius);
    static Region cube(Vec center, double half_width);
    static Region annulus(Vec center, double r_inner, double r_outer);
    static Region box(BoxDomain b);
    static Region custom(std::function<bool(const Vec&)> pred);

    Kind kind() const { return kind_; }
    bool contains(const Vec& x) const;
    const Vec& center() const { return center_; }
    double radius() const { return r_outer_; }
    double half_width() const { return half_width_; }
    const BoxDomain& as_box() const { return box_; }

    /// Euclidean diameter of the region's bounding shape.
    double diam() const;

private:
    Kind kind_ = Kind::Custom;
    Vec center_;
    double r_inner_ = 0, r_outer_ = 0, half_width_ = 0;
    BoxDomain box_;
    std::function<bool(const Vec&)> pred_;
};

/// Values on a lattice plus an exterior rule covering R^d \ box.
/// Evaluation is total on R^d; instances are treated as immutable values.
class GridFunction {
public:
    GridFunction() = default;
    GridFunction(Lattice grid, std::vector<double> values,
                 std::function<double(const Vec&)> exterior);
    /// Sample a closed-form function on the lattice; it doubles as the exterior rule.
    static GridFunction sample(const Lattice& grid, const std::function<double(const Vec&)>& f);

    const Lattice& grid() const { return *grid_; }
    const std::vector<double>& values() const { return values_; }
    std::vector<double>& mutable_values() { return values_; }
    double exterior(const Vec& x) const { return exterior_(x); }
    const std::function<double(const Vec&)>& exterior_rule() const { return exterior_; }

    double value_at(std::size_t flat) const { return values_[flat]; }

    /// Multilinear interpolation inside the box, exterior rule outside.
    double operator()(const Vec& x) const;

    GridFunction with_values(std::vector<double> v) const;

    double max_abs() const;

private:
    std::shared_ptr<const Lattice> grid_;
    std::vector<double> values_;
    std::function<double(const Vec&)> exterior_;
};

double interpolate(const GridFunction& u, const Vec& x);

/// (sum |u|^p w)^{1/p} over region nodes; p in (0,1) gives the quasi-norm.
/// Axis-aligned box/cube regions get trapezoid end-weights; empty region is a
/// domain error.
double lp_norm(const GridFunction& u, double p, const Region& r);

/// sup - inf over region nodes.
double oscillation(const GridFunction& u, const Region& r);

/// h^d * #{nodes in region with u > t}.
double superlevel_measure(const GridFunction& u, double t, const Region& r);

/// h^d * #{nodes in region}.
double region_measure(const Lattice& g, const Region& r);

double inf_over_region(const GridFunction& u, const Region& r);
double sup_over_region(const GridFunction& u, const Region& r);

/// Flat indices of lattice nodes inside the region.
std::vector<std::size_t> region_nodes(const Lattice& g, const Region& r);

// Serialization: CSV (coordinates + value per row) and a compact binary layout
// (magic, d, shape, bounds, little-endian float64 payload).
void write_csv(const GridFunction& u, const std::string& path);
void write_binary(const GridFunction& u, const std::string& path);
/// Reads the binary layout; exterior rule must be supplied by the caller.
GridFunction read_binary(const std::string& path, std::function<double(const Vec&)> exterior);

}  // namespace ipde
