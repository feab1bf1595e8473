#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sbx/geometry.hpp"

namespace sbx {

struct QuadRule {
    std::vector<double> nodes;   ///< on [-1,1]
    std::vector<double> weights;
};

/// Gauss-Legendre rule by Newton iteration on the Legendre recurrence.
inline QuadRule gauss_legendre(int n) {
    QuadRule q;
    q.nodes.resize(static_cast<std::size_t>(n));
    q.weights.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(kPi * (static_cast<double>(i) + 0.75) / (static_cast<double>(n) + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / static_cast<double>(k);
                p0 = p1;
                p1 = p2;
            }
            dp = static_cast<double>(n) * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        q.nodes[static_cast<std::size_t>(i)] = x;
        q.weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    return q;
}

/// Map a [-1,1] rule to [a,b].
inline QuadRule gauss_legendre_on(int n, double a, double b) {
    QuadRule q = gauss_legendre(n);
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        q.nodes[i] = 0.5 * (a + b) + 0.5 * (b - a) * q.nodes[i];
        q.weights[i] *= 0.5 * (b - a);
    }
    return q;
}

/// Complete elliptic integral K(k) via the arithmetic-geometric mean.
inline double elliptic_k(double k) {
    double a = 1.0, b = std::sqrt(1.0 - k * k);
    for (int i = 0; i < 60 && std::abs(a - b) > 1e-15 * a; ++i) {
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
    }
    return kPi / (2.0 * a);
}

/// Product quadrature grid on the unit disc/ball: Gauss-Legendre radially,
/// uniform midpoint in each angle.  Weights sum to |D|.
struct InteriorGrid {
    Domain dom{2};
    std::vector<Vec> nodes;
    std::vector<double> weights;
    int n_r = 0, n_ang = 0;

    static InteriorGrid disc(int n_r, int n_theta) {
        InteriorGrid g;
        g.dom = Domain(2);
        g.n_r = n_r;
        g.n_ang = n_theta;
        const QuadRule rr = gauss_legendre_on(n_r, 0.0, 1.0);
        const double dth = kTwoPi / n_theta;
        g.nodes.reserve(static_cast<std::size_t>(n_r * n_theta));
        g.weights.reserve(static_cast<std::size_t>(n_r * n_theta));
        for (int i = 0; i < n_r; ++i) {
            const double r = rr.nodes[static_cast<std::size_t>(i)];
            const double wr = rr.weights[static_cast<std::size_t>(i)] * r;
            for (int j = 0; j < n_theta; ++j) {
                const double th = dth * (static_cast<double>(j) + 0.5);
                g.nodes.emplace_back(r * std::cos(th), r * std::sin(th));
                g.weights.push_back(wr * dth);
            }
        }
        return g;
    }

    static InteriorGrid ball(int n_r, int n_u, int n_phi) {
        InteriorGrid g;
        g.dom = Domain(3);
        g.n_r = n_r;
        g.n_ang = n_u * n_phi;
        const QuadRule rr = gauss_legendre_on(n_r, 0.0, 1.0);
        const QuadRule uu = gauss_legendre_on(n_u, -1.0, 1.0);
        const double dphi = kTwoPi / n_phi;
        for (int i = 0; i < n_r; ++i) {
            const double r = rr.nodes[static_cast<std::size_t>(i)];
            const double wr = rr.weights[static_cast<std::size_t>(i)] * r * r;
            for (int j = 0; j < n_u; ++j) {
                const double u = uu.nodes[static_cast<std::size_t>(j)];
                const double su = std::sqrt(1.0 - u * u);
                const double wu = uu.weights[static_cast<std::size_t>(j)];
                for (int k = 0; k < n_phi; ++k) {
                    const double ph = dphi * (static_cast<double>(k) + 0.5);
                    g.nodes.emplace_back(r * su * std::cos(ph), r * su * std::sin(ph), r * u);
                    g.weights.push_back(wr * wu * dphi);
                }
            }
        }
        return g;
    }

    double integrate(const std::function<double(const Vec&)>& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

/// Quadrature grid on the boundary sphere.
struct BoundaryGrid {
    Domain dom{2};
    std::vector<BoundaryPoint> nodes;
    std::vector<double> weights;

    static BoundaryGrid circle(int n) {
        BoundaryGrid g;
        g.dom = Domain(2);
        const double dth = kTwoPi / n;
        for (int j = 0; j < n; ++j) {
            g.nodes.push_back(BoundaryPoint::from_angle(dth * (static_cast<double>(j) + 0.5)));
            g.weights.push_back(dth);
        }
        return g;
    }

    static BoundaryGrid sphere(int n_u, int n_phi) {
        BoundaryGrid g;
        g.dom = Domain(3);
        const QuadRule uu = gauss_legendre_on(n_u, -1.0, 1.0);
        const double dphi = kTwoPi / n_phi;
        for (int j = 0; j < n_u; ++j) {
            const double u = uu.nodes[static_cast<std::size_t>(j)];
            const double su = std::sqrt(1.0 - u * u);
            for (int k = 0; k < n_phi; ++k) {
                const double ph = dphi * (static_cast<double>(k) + 0.5);
                g.nodes.push_back(BoundaryPoint::from_unit(
                    Vec(su * std::cos(ph), su * std::sin(ph), u)));
                g.weights.push_back(uu.weights[static_cast<std::size_t>(j)] * dphi);
            }
        }
        return g;
    }

    double integrate(const std::function<double(const BoundaryPoint&)>& f) const {
        double s = 0.0;
        for (std::size_t i = 0; i < nodes.size(); ++i) s += weights[i] * f(nodes[i]);
        return s;
    }
};

/// Harmonic extension of boundary data, with the kernel row renormalized
/// so constants are reproduced exactly (hence min g <= result <= max g).
inline double apply_poisson(const BoundaryGrid& bg, const std::vector<double>& g, const Vec& x) {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < bg.nodes.size(); ++j) {
        const double k = bg.weights[j] * poisson_kernel(bg.dom, x, bg.nodes[j]);
        num += k * g[j];
        den += k;
    }
    return num / den;
}

inline double apply_poisson(const BoundaryGrid& bg,
                            const std::function<double(const BoundaryPoint&)>& g, const Vec& x) {
    std::vector<double> gv(bg.nodes.size());
    for (std::size_t j = 0; j < bg.nodes.size(); ++j) gv[j] = g(bg.nodes[j]);
    return apply_poisson(bg, gv, x);
}

/// Green potential of a gridded density.  The kernel singularity at y = x
/// is removed by splitting f = f(x) + (f - f(x)): the constant part has the
/// closed form (1-|x|^2)/d (expected exit time), the remainder is bounded.
inline double apply_green(const InteriorGrid& grid, const std::function<double(const Vec&)>& f,
                          const Vec& x) {
    const double fx = f(x);
    double s = fx * (1.0 - x.norm2()) / grid.dom.d;
    for (std::size_t j = 0; j < grid.nodes.size(); ++j) {
        const double d2 = [&] {
            double t = 0.0;
            for (int i = 0; i < grid.dom.d; ++i) {
                const double u = grid.nodes[j][i] - x[i];
                t += u * u;
            }
            return t;
        }();
        if (d2 < 1e-24) continue;
        s += grid.weights[j] * green_function(grid.dom, x, grid.nodes[j]) * (f(grid.nodes[j]) - fx);
    }
    return s;
}

/// Dense Green operator on a fixed grid, cached for iterative solvers.
/// Row i applies the singularity-subtracted rule at node i.
class GreenOperator {
  public:
    explicit GreenOperator(const InteriorGrid& grid) : grid_(&grid) {
        const std::size_t n = grid.nodes.size();
        a_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double offdiag = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double g =
                    grid.weights[j] * green_function(grid.dom, grid.nodes[i], grid.nodes[j]);
                a_[i * n + j] = g;
                offdiag += g;
            }
            a_[i * n + i] = (1.0 - grid.nodes[i].norm2()) / grid.dom.d - offdiag;
        }
    }

    const InteriorGrid& grid() const { return *grid_; }

    void apply(const std::vector<double>& f, std::vector<double>& out) const {
        const std::size_t n = grid_->nodes.size();
        out.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &a_[i * n];
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * f[j];
            out[i] = s;
        }
    }

  private:
    const InteriorGrid* grid_;
    std::vector<double> a_;
};

/// Axisymmetric reduction of the 3-ball: nodes (r, cos theta), weights
/// carrying the 2 pi azimuthal factor.  The Green kernel is averaged over
/// the azimuth in closed form (complete elliptic integrals), which keeps
/// dense-solver costs at the meridian-plane size.
struct AxisymGrid {
    std::vector<double> r, u; ///< per node: radius and cos(polar angle)
    std::vector<double> weights;
    int n_r = 0, n_u = 0;

    static AxisymGrid make(int n_r, int n_u) {
        AxisymGrid g;
        g.n_r = n_r;
        g.n_u = n_u;
        const QuadRule rr = gauss_legendre_on(n_r, 0.0, 1.0);
        const QuadRule uu = gauss_legendre_on(n_u, -1.0, 1.0);
        for (int i = 0; i < n_r; ++i)
            for (int j = 0; j < n_u; ++j) {
                g.r.push_back(rr.nodes[static_cast<std::size_t>(i)]);
                g.u.push_back(uu.nodes[static_cast<std::size_t>(j)]);
                g.weights.push_back(rr.weights[static_cast<std::size_t>(i)] *
                                    rr.nodes[static_cast<std::size_t>(i)] *
                                    rr.nodes[static_cast<std::size_t>(i)] *
                                    uu.weights[static_cast<std::size_t>(j)] * kTwoPi);
            }
        return g;
    }

    Vec embed(std::size_t i, double phi = 0.0) const {
        const double su = std::sqrt(1.0 - u[i] * u[i]);
        return Vec(r[i] * su * std::cos(phi), r[i] * su * std::sin(phi), r[i] * u[i]);
    }
};

/// Azimuth-averaged Green kernel of the 3-ball between rings
/// (r1,u1) and (r2,u2):  (1/2pi) int_0^{2pi} G(x, y(phi)) dphi.
inline double green_ring_average(double r1, double u1, double r2, double u2) {
    const double s1 = std::sqrt(1.0 - u1 * u1), s2 = std::sqrt(1.0 - u2 * u2);
    const double a = r1 * r1 + r2 * r2 - 2.0 * r1 * r2 * u1 * u2;
    const double q = r1 * r1 * r2 * r2 + 1.0 - 2.0 * r1 * r2 * u1 * u2;
    const double b = 2.0 * r1 * r2 * s1 * s2;
    // int dphi / sqrt(A - B cos phi) = 4 K(k) / sqrt(A + B), k^2 = 2B/(A+B)
    auto ring = [](double A, double B) {
        if (B <= 0.0) return kTwoPi / std::sqrt(A);
        const double k2 = 2.0 * B / (A + B);
        return 4.0 * elliptic_k(std::sqrt(k2)) / std::sqrt(A + B);
    };
    return (ring(a, b) - ring(q, b)) / (kTwoPi * kTwoPi);
}

class AxisymGreenOperator {
  public:
    explicit AxisymGreenOperator(const AxisymGrid& grid) : grid_(&grid) {
        const std::size_t n = grid.r.size();
        a_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            double offdiag = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                const double g = grid.weights[j] *
                                 green_ring_average(grid.r[i], grid.u[i], grid.r[j], grid.u[j]);
                a_[i * n + j] = g;
                offdiag += g;
            }
            a_[i * n + i] = (1.0 - grid.r[i] * grid.r[i]) / 3.0 - offdiag;
        }
    }

    const AxisymGrid& grid() const { return *grid_; }

    void apply(const std::vector<double>& f, std::vector<double>& out) const {
        const std::size_t n = grid_->r.size();
        out.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &a_[i * n];
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * f[j];
            out[i] = s;
        }
    }

  private:
    const AxisymGrid* grid_;
    std::vector<double> a_;
};

/// Gridded interior field together with the integral-equation defect of the
/// solver that produced it.
struct SemilinearField {
    std::vector<double> values;
    double residual = 0.0;
};

struct LpResult {
    double value = 0.0;
    bool diverged = false;      ///< quadrature failed to stabilize under refinement
    double refinement_change = 0.0;
};

namespace detail {

/// Angles near which |f| blows up on the boundary, found by scanning a
/// ring at rho = 2e-3 and zooming on each ridge.
inline std::vector<double> boundary_peak_angles(const std::function<double(const Vec&)>& f) {
    const int n = 720;
    std::vector<double> v(static_cast<std::size_t>(n));
    const double r0 = 1.0 - 2e-3;
    std::vector<double> sorted;
    for (int i = 0; i < n; ++i) {
        const double th = kTwoPi * i / n;
        v[static_cast<std::size_t>(i)] = std::abs(f(Vec(r0 * std::cos(th), r0 * std::sin(th))));
    }
    sorted = v;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double med = sorted[static_cast<std::size_t>(n) / 2];
    std::vector<double> peaks;
    for (int i = 0; i < n; ++i) {
        const double c = v[static_cast<std::size_t>(i)];
        if (c <= 1e3 * (med + 1e-300)) continue;
        if (c < v[static_cast<std::size_t>((i + n - 1) % n)] ||
            c < v[static_cast<std::size_t>((i + 1) % n)])
            continue;
        // zoom the ridge toward the boundary to pin the angle
        double th = kTwoPi * i / n, half = kPi / n;
        for (int round = 0; round < 9; ++round) {
            const double rr = 1.0 - std::max(2e-4 * std::pow(0.2, round), 1e-9);
            double best = -1.0, best_th = th;
            for (int j = -16; j <= 16; ++j) {
                const double a = th + half * j / 16.0;
                const double val = std::abs(f(Vec(rr * std::cos(a), rr * std::sin(a))));
                if (val > best) {
                    best = val;
                    best_th = a;
                }
            }
            th = best_th;
            half /= 12.0;
        }
        bool dup = false;
        for (double q : peaks)
            if (std::abs(std::remainder(q - th, kTwoPi)) < 0.05) dup = true;
        if (!dup && peaks.size() < 8) peaks.push_back(th);
    }
    return peaks;
}

/// Geometric midpoint mesh on (0, top] down to `floor`, about `per_decade`
/// cells per decade.
inline void graded_cells(double top, double floor, int per_decade,
                         std::vector<std::pair<double, double>>& out) {
    out.clear();
    const double ratio = std::pow(10.0, 1.0 / per_decade);
    double hi = top;
    while (hi > floor) {
        const double lo = std::max(hi / ratio, floor);
        out.push_back({0.5 * (hi + lo), hi - lo});
        hi = lo;
    }
}

} // namespace detail

/// Weighted norm ( int |f|^p G_D mu )^{1/p} for an atomic measure mu.
///
/// Boundary singularities of f (Poisson-kernel powers and the like) are
/// located by probing and integrated on locally graded (depth, angle)
/// meshes; everything else uses the product grid.  The divergence flag is
/// raised when deepening the graded mesh moves the integral by more than
/// 20%, which is the signature of f outside L^p.  Near the critical
/// exponent the value carries a few-percent defect from the double-
/// precision boundary floor.
inline LpResult lp_norm(const Domain& dom, const std::function<double(const Vec&)>& f, double p,
                        const std::vector<std::pair<Vec, double>>& mu, int base_res = 96) {
    if (p < 1.0) throw std::invalid_argument("lp_norm: p must be >= 1");
    auto weight = [&](const Vec& x) {
        double s = 0.0;
        for (const auto& [pos, mass] : mu) s += mass * green_function(dom, pos, x);
        return s;
    };
    auto integrand = [&](const Vec& x) {
        const double fv = std::abs(f(x));
        return fv == 0.0 ? 0.0 : std::pow(fv, p) * weight(x);
    };

    LpResult r;
    if (dom.d == 3) {
        auto value_at = [&](int res) {
            InteriorGrid g = InteriorGrid::ball(res, res, 2 * res);
            double s = 0.0;
            for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * integrand(g.nodes[i]);
            return s;
        };
        const double c = value_at(base_res / 2);
        const double fine = value_at(base_res);
        r.refinement_change = fine > 0.0 ? std::abs(fine - c) / std::max(fine, c) : 0.0;
        r.diverged = r.refinement_change > 0.20;
        r.value = std::pow(fine, 1.0 / p);
        return r;
    }

    const std::vector<double> peaks = detail::boundary_peak_angles(f);
    const double patch_depth = 0.25, patch_halfwidth = 0.08;

    auto global_part = [&](int res) {
        InteriorGrid g = InteriorGrid::disc(res, 2 * res);
        double s = 0.0;
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            const Vec& x = g.nodes[i];
            if (!peaks.empty() && rho(x) < patch_depth) {
                const double th = std::atan2(x[1], x[0]);
                bool inside = false;
                for (double q : peaks)
                    if (std::abs(std::remainder(th - q, kTwoPi)) < patch_halfwidth) inside = true;
                if (inside) continue;
            }
            s += g.weights[i] * integrand(x);
        }
        return s;
    };

    auto patch_part = [&](double theta, double floor, int per_decade) {
        std::vector<std::pair<double, double>> depth, off;
        detail::graded_cells(patch_depth, floor, per_decade, depth);
        detail::graded_cells(patch_halfwidth, floor, per_decade, off);
        double s = 0.0;
        for (const auto& [t, dt] : depth)
            for (const auto& [w, dw] : off)
                for (int side = -1; side <= 1; side += 2) {
                    const double a = theta + side * w;
                    const Vec x((1.0 - t) * std::cos(a), (1.0 - t) * std::sin(a));
                    s += dt * dw * (1.0 - t) * integrand(x);
                }
        return s;
    };

    if (peaks.empty()) {
        const double c = global_part(base_res);
        const double fine = global_part(2 * base_res);
        r.refinement_change = fine > 0.0 ? std::abs(fine - c) / std::max(fine, c) : 0.0;
        r.diverged = r.refinement_change > 0.20;
        r.value = std::pow(fine, 1.0 / p);
        return r;
    }

    const double bulk = global_part(base_res);
    double shallow = bulk, deep = bulk;
    for (double q : peaks) {
        shallow += patch_part(q, 1e-9, 14);
        deep += patch_part(q, 1e-13, 14);
    }
    r.refinement_change = deep > 0.0 ? std::abs(deep - shallow) / std::max(deep, shallow) : 0.0;
    r.diverged = r.refinement_change > 0.20;
    r.value = std::pow(deep, 1.0 / p);
    return r;
}

} // namespace sbx
