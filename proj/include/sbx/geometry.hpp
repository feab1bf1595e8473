#pragma once

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "sbx/rng.hpp"

namespace sbx {

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;

/// A point in R^d, d <= 3.  Fixed storage keeps the particle loops flat.
struct Vec {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    int d = 2;

    Vec() = default;
    Vec(double x, double y) : c{x, y, 0.0}, d(2) {}
    Vec(double x, double y, double z) : c{x, y, z}, d(3) {}

    double& operator[](int i) { return c[static_cast<std::size_t>(i)]; }
    double operator[](int i) const { return c[static_cast<std::size_t>(i)]; }

    double norm2() const {
        double s = 0.0;
        for (int i = 0; i < d; ++i) s += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(i)];
        return s;
    }
    double norm() const { return std::sqrt(norm2()); }
};

inline double dot(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.d; ++i) s += a[i] * b[i];
    return s;
}

inline double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (int i = 0; i < a.d; ++i) {
        const double t = a[i] - b[i];
        s += t * t;
    }
    return std::sqrt(s);
}

/// The open unit ball in R^d (d >= 2), the only domain handled here.
struct Domain {
    int d = 2;

    explicit Domain(int dim = 2) : d(dim) {
        if (d < 2) throw std::invalid_argument("Domain: dimension must be >= 2");
        if (d > 3) throw std::invalid_argument("Domain: only d = 2, 3 are implemented");
    }

    bool contains(const Vec& x) const { return x.norm2() < 1.0; }

    /// Surface measure of the unit sphere S^{d-1}.
    double boundary_area() const { return d == 2 ? kTwoPi : 4.0 * kPi; }
    double volume() const { return d == 2 ? kPi : 4.0 * kPi / 3.0; }
};

/// Point of the boundary sphere.  For d = 2 the angle is the canonical
/// parametrization; for d = 3 the unit vector is primary.
struct BoundaryPoint {
    Vec u;

    static BoundaryPoint from_angle(double theta) {
        BoundaryPoint b;
        b.u = Vec(std::cos(theta), std::sin(theta));
        return b;
    }
    static BoundaryPoint from_unit(const Vec& v) {
        BoundaryPoint b;
        b.u = v;
        const double n = v.norm();
        for (int i = 0; i < v.d; ++i) b.u[i] = v[i] / n;
        return b;
    }

    double angle() const { return std::atan2(u[1], u[0]); }
    const Vec& embed() const { return u; }
};

/// Distance of x to the complement of the ball.
inline double rho(const Vec& x) { return 1.0 - x.norm(); }

/// Poisson kernel of the unit ball (density of harmonic measure seen
/// from x).  Integrates to 1 over the boundary for every interior x.
inline double poisson_kernel(const Domain& dom, const Vec& x, const Vec& z) {
    const double xx = x.norm2();
    if (xx >= 1.0) throw std::domain_error("poisson_kernel: x must be interior");
    double r2 = 0.0;
    for (int i = 0; i < dom.d; ++i) {
        const double t = z[i] - x[i];
        r2 += t * t;
    }
    if (dom.d == 2) return (1.0 - xx) / (kTwoPi * r2);
    return (1.0 - xx) / (4.0 * kPi * r2 * std::sqrt(r2));
}

inline double poisson_kernel(const Domain& dom, const Vec& x, const BoundaryPoint& z) {
    return poisson_kernel(dom, x, z.embed());
}

/// Green function of the unit ball for the generator (1/2)Laplacian:
/// integral of G(x,.) over the ball is the expected exit time
/// (1 - |x|^2)/d of Brownian motion from x.
inline double green_function(const Domain& dom, const Vec& x, const Vec& y) {
    const double rxy2 = [&] {
        double s = 0.0;
        for (int i = 0; i < dom.d; ++i) {
            const double t = x[i] - y[i];
            s += t * t;
        }
        return s;
    }();
    if (rxy2 == 0.0) throw std::domain_error("green_function: x == y");
    // |x| |x* - y| with x* the inversion of x through the sphere.
    const double q2 = x.norm2() * y.norm2() - 2.0 * dot(x, y) + 1.0;
    if (dom.d == 2) return 0.5 * std::log(q2 / rxy2) / kPi;
    return (1.0 / std::sqrt(rxy2) - 1.0 / std::sqrt(q2)) / kTwoPi;
}

/// Uniform sample from the boundary sphere.
inline BoundaryPoint boundary_measure_sample(const Domain& dom, Rng& rng) {
    if (dom.d == 2) return BoundaryPoint::from_angle(kTwoPi * rng.uniform_co());
    Vec v(rng.normal(), rng.normal(), rng.normal());
    double n = v.norm();
    while (n < 1e-12) {
        v = Vec(rng.normal(), rng.normal(), rng.normal());
        n = v.norm();
    }
    for (int i = 0; i < 3; ++i) v[i] /= n;
    BoundaryPoint b;
    b.u = v;
    return b;
}

/// Chordal (ambient) distance between boundary points.
inline double boundary_distance(const BoundaryPoint& a, const BoundaryPoint& b) {
    return dist(a.embed(), b.embed());
}

/// Geodesic distance on the sphere, used by the smoothing kernels.
inline double boundary_geodesic(const BoundaryPoint& a, const BoundaryPoint& b) {
    double c = dot(a.embed(), b.embed());
    if (c > 1.0) c = 1.0;
    if (c < -1.0) c = -1.0;
    return std::acos(c);
}

} // namespace sbx
