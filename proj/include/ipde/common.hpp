// Small value types and utilities shared across the library.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ipde {

inline constexpr int kMaxDim = 4;

/// A point/vector in R^d, d <= kMaxDim. Value semantics, no heap.
class Vec {
public:
    Vec() : d_(0), v_{} {}
    explicit Vec(int d, double fill = 0.0) : d_(d), v_{} {
        if (d < 0 || d > kMaxDim) throw std::invalid_argument("Vec: dimension out of range");
        for (int i = 0; i < d; ++i) v_[i] = fill;
    }
    Vec(std::initializer_list<double> xs) : d_(static_cast<int>(xs.size())), v_{} {
        if (d_ > kMaxDim) throw std::invalid_argument("Vec: dimension out of range");
        int i = 0;
        for (double x : xs) v_[i++] = x;
    }

    int dim() const { return d_; }
    double& operator[](int i) { return v_[i]; }
    double operator[](int i) const { return v_[i]; }

    double norm2() const {
        double s = 0;
        for (int i = 0; i < d_; ++i) s += v_[i] * v_[i];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }

    Vec& operator+=(const Vec& o) {
        for (int i = 0; i < d_; ++i) v_[i] += o.v_[i];
        return *this;
    }
    Vec& operator-=(const Vec& o) {
        for (int i = 0; i < d_; ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Vec& operator*=(double a) {
        for (int i = 0; i < d_; ++i) v_[i] *= a;
        return *this;
    }
    friend Vec operator+(Vec a, const Vec& b) { return a += b; }
    friend Vec operator-(Vec a, const Vec& b) { return a -= b; }
    friend Vec operator*(double a, Vec b) { return b *= a; }
    friend double dot(const Vec& a, const Vec& b) {
        double s = 0;
        for (int i = 0; i < a.d_; ++i) s += a.v_[i] * b.v_[i];
        return s;
    }

private:
    int d_;
    std::array<double, kMaxDim> v_;
};

/// Symmetric d x d matrix stored dense; built symmetrized.
class SymMat {
public:
    SymMat() : d_(0), m_{} {}
    explicit SymMat(int d) : d_(d), m_{} {
        if (d < 0 || d > kMaxDim) throw std::invalid_argument("SymMat: dimension out of range");
    }
    int dim() const { return d_; }
    double& at(int i, int j) { return m_[i * kMaxDim + j]; }
    double at(int i, int j) const { return m_[i * kMaxDim + j]; }
    void set(int i, int j, double v) { at(i, j) = v; at(j, i) = v; }
    double quad(const Vec& z) const {  // z^T M z
        double s = 0;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) s += at(i, j) * z[i] * z[j];
        return s;
    }
    double max_abs() const {
        double s = 0;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) s = std::max(s, std::abs(at(i, j)));
        return s;
    }
    double asymmetry() const {
        double s = 0;
        for (int i = 0; i < d_; ++i)
            for (int j = 0; j < d_; ++j) s = std::max(s, std::abs(at(i, j) - at(j, i)));
        return s;
    }

private:
    int d_;
    std::array<double, kMaxDim * kMaxDim> m_;
};

// Error taxonomy. Domain errors are precondition violations; the rest signal
// numerical failure modes the spec treats as loud errors.
struct NonIntegrableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConstructionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// splitmix64: the fixed seeded generator used for every randomized batch.
/// Keeping the algorithm pinned makes reports byte-reproducible across builds.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : s_(seed) {}
    std::uint64_t next_u64() {
        std::uint64_t z = (s_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }
    /// Uniform in [0,1).
    double next_double() { return (next_u64() >> 11) * 0x1.0p-53; }
    /// Uniform in [a,b).
    double uniform(double a, double b) { return a + (b - a) * next_double(); }
    /// Independent child stream.
    SplitMix64 split() { return SplitMix64(next_u64() ^ 0x5851f42d4c957f2dULL); }

private:
    std::uint64_t s_;
};

/// Static-partition parallel map over [0,n). Each index writes only its own
/// outputs, so results are identical for any thread count.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& body);

/// Kahan-compensated serial sum (deterministic reduction).
inline double compensated_sum(const std::vector<double>& xs) {
    double s = 0, c = 0;
    for (double x : xs) {
        double y = x - c;
        double t = s + y;
        c = (t - s) - y;
        s = t;
    }
    return s;
}

inline double sqr(double x) { return x * x; }

/// Surface measure of the unit sphere in R^d (2, 2*pi, 4*pi, ...).
double unit_sphere_area(int d);

}  // namespace ipde
