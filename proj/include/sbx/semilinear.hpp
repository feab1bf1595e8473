#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbx/branching.hpp"
#include "sbx/density.hpp"
#include "sbx/geometry.hpp"
#include "sbx/parallel.hpp"
#include "sbx/quadrature.hpp"
#include "sbx/rng.hpp"
#include "sbx/stats.hpp"

namespace sbx {

struct SolveError : std::runtime_error {
    double residual;
    explicit SolveError(const std::string& what, double res)
        : std::runtime_error(what), residual(res) {}
};

struct BvProblem {
    double beta = 0.5;
    std::vector<double> g;   ///< boundary data on the solver's boundary grid, >= 0
    std::vector<double> phi; ///< interior source on the solver's grid, >= 0 (empty = 0)
    double tol = 1e-9;
    int max_iters = 5000;
};

struct SolveTrace {
    std::vector<double> residuals;
    double omega_final = 0.0;
};

inline double signed_power(double w, double beta) {
    return w >= 0.0 ? std::pow(w, 1.0 + beta) : -std::pow(-w, 1.0 + beta);
}

namespace detail {

/// Damped Picard iteration for w + G[w^{1+beta}] = h, started from w = h,
/// iterates clamped to [0, h].  The step shrinks whenever the defect grows
/// (large data turns the plain map expansive), and recovers afterwards.
inline std::vector<double> picard_solve(
    const std::function<void(const std::vector<double>&, std::vector<double>&)>& apply_green_op,
    const std::vector<double>& h, double beta, double tol, int max_iters, SolveTrace* trace) {
    const std::size_t n = h.size();
    std::vector<double> w = h, psi(n), gw(n), cand(n);
    double omega = 0.5;
    double best_res = 1e300;
    std::vector<double> best_w = w;

    auto residual_of = [&](const std::vector<double>& v) {
        for (std::size_t i = 0; i < n; ++i) psi[i] = signed_power(v[i], beta);
        apply_green_op(psi, gw);
        double r = 0.0;
        for (std::size_t i = 0; i < n; ++i) r = std::max(r, std::abs(v[i] + gw[i] - h[i]));
        return r; // gw left holding G[psi(v)]
    };

    double res = residual_of(w);
    if (trace) trace->residuals.push_back(res);
    for (int it = 0; it < max_iters; ++it) {
        if (res < tol) break;
        if (res < best_res) {
            best_res = res;
            best_w = w;
        }
        for (std::size_t i = 0; i < n; ++i) {
            double v = (1.0 - omega) * w[i] + omega * (h[i] - gw[i]);
            if (v < 0.0) v = 0.0;
            if (v > h[i]) v = h[i];
            cand[i] = v;
        }
        const double cres = residual_of(cand);
        if (cres <= res * 1.0000001) {
            w.swap(cand);
            res = cres;
            omega = std::min(0.5, omega * 1.05);
        } else {
            omega *= 0.5;
            if (omega < 1e-4) {
                w = best_w;
                res = residual_of(w);
                omega = 1e-4;
            }
            // gw currently holds G[psi(cand)]; restore it for w
            res = residual_of(w);
        }
        if (trace) {
            trace->residuals.push_back(res);
            trace->omega_final = omega;
        }
    }
    if (res >= tol) {
        if (res < best_res) best_w = w;
        throw SolveError("semilinear solve did not reach tolerance", std::min(res, best_res));
    }
    return w;
}

} // namespace detail

/// Integral-equation solver on the product disc/ball grid.
class DiscSolver {
  public:
    DiscSolver(int n_r, int n_theta, int n_boundary)
        : grid_(InteriorGrid::disc(n_r, n_theta)),
          bgrid_(BoundaryGrid::circle(n_boundary)),
          gop_(grid_) {}

    const InteriorGrid& grid() const { return grid_; }
    const BoundaryGrid& boundary_grid() const { return bgrid_; }

    std::vector<double> harmonic_part(const BvProblem& prob) const {
        const std::size_t n = grid_.nodes.size();
        std::vector<double> h(n, 0.0);
        if (!prob.phi.empty()) {
            if (prob.phi.size() != n) throw std::invalid_argument("phi size mismatch");
            gop_.apply(prob.phi, h);
        }
        if (!prob.g.empty()) {
            if (prob.g.size() != bgrid_.nodes.size())
                throw std::invalid_argument("g size mismatch");
            for (std::size_t i = 0; i < n; ++i)
                h[i] += apply_poisson(bgrid_, prob.g, grid_.nodes[i]);
        }
        return h;
    }

    SemilinearField solve(const BvProblem& prob, SolveTrace* trace = nullptr) const {
        validate(prob);
        const std::vector<double> h = harmonic_part(prob);
        SemilinearField f;
        f.values = detail::picard_solve(
            [this](const std::vector<double>& v, std::vector<double>& out) { gop_.apply(v, out); },
            h, prob.beta, prob.tol, prob.max_iters, trace);
        std::vector<double> psi(f.values.size()), gw;
        for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = signed_power(f.values[i], prob.beta);
        gop_.apply(psi, gw);
        f.residual = 0.0;
        for (std::size_t i = 0; i < psi.size(); ++i)
            f.residual = std::max(f.residual, std::abs(f.values[i] + gw[i] - h[i]));
        return f;
    }

    /// Field value off the grid nodes, through the integral equation
    /// itself (no interpolation).
    double value_at(const BvProblem& prob, const SemilinearField& f, const Vec& x) const {
        double h = 0.0;
        if (!prob.phi.empty()) {
            h += apply_green(grid_, [&](const Vec& y) { return phi_at(prob, y); }, x);
        }
        if (!prob.g.empty()) h += apply_poisson(bgrid_, prob.g, x);
        double green_term = 0.0;
        for (std::size_t j = 0; j < grid_.nodes.size(); ++j) {
            const double d2 = [&] {
                double s = 0.0;
                for (int i = 0; i < 2; ++i) {
                    const double t = grid_.nodes[j][i] - x[i];
                    s += t * t;
                }
                return s;
            }();
            if (d2 < 1e-20) continue;
            green_term += grid_.weights[j] * green_function(grid_.dom, x, grid_.nodes[j]) *
                          signed_power(f.values[j], prob.beta);
        }
        return h - green_term;
    }

  private:
    void validate(const BvProblem& prob) const {
        if (!(prob.beta > 0.0) || prob.beta > 1.0)
            throw std::invalid_argument("BvProblem: beta must be in (0,1]");
        if (!(prob.tol > 0.0)) throw std::invalid_argument("BvProblem: tol must be > 0");
        for (double v : prob.g)
            if (v < 0.0) throw std::invalid_argument("BvProblem: g must be >= 0");
        for (double v : prob.phi)
            if (v < 0.0) throw std::invalid_argument("BvProblem: phi must be >= 0");
    }
    double phi_at(const BvProblem& prob, const Vec& y) const {
        // nearest-node lookup; the source enters through one smoothing
        // integral so this resolution is enough
        std::size_t best = 0;
        double bd = 1e300;
        for (std::size_t j = 0; j < grid_.nodes.size(); ++j) {
            const double d = dist(grid_.nodes[j], y);
            if (d < bd) {
                bd = d;
                best = j;
            }
        }
        return prob.phi[best];
    }

    InteriorGrid grid_;
    BoundaryGrid bgrid_;
    GreenOperator gop_;
};

/// Radially reduced solver for rotation-invariant data on the disc.  The
/// angle-averaged Green kernel has the closed form (1/pi) ln(1/max(r,s)),
/// so the reduced operator is exact in the angular direction.
class RadialDiscSolver {
  public:
    explicit RadialDiscSolver(int n_r = 400) {
        const QuadRule q = gauss_legendre_on(n_r, 0.0, 1.0);
        r_ = q.nodes;
        w_ = q.weights;
        const std::size_t n = r_.size();
        a_.assign(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                a_[i * n + j] = 2.0 * w_[j] * r_[j] * std::log(1.0 / std::max(r_[i], r_[j]));
    }

    /// Solve w + G[w^{1+beta}] = lambda (constant boundary data).
    SemilinearField solve_constant_data(double lambda, double beta, double tol = 1e-11,
                                        SolveTrace* trace = nullptr) const {
        const std::size_t n = r_.size();
        std::vector<double> h(n, lambda);
        SemilinearField f;
        f.values = detail::picard_solve(
            [this](const std::vector<double>& v, std::vector<double>& out) { apply(v, out); }, h,
            beta, tol, 20000, trace);
        std::vector<double> psi(n), gw;
        for (std::size_t i = 0; i < n; ++i) psi[i] = signed_power(f.values[i], beta);
        apply(psi, gw);
        f.residual = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            f.residual = std::max(f.residual, std::abs(f.values[i] + gw[i] - h[i]));
        return f;
    }

    /// Center value through the integral equation.
    double center_value(double lambda, double beta, const SemilinearField& f) const {
        double green_term = 0.0;
        for (std::size_t j = 0; j < r_.size(); ++j)
            green_term +=
                2.0 * w_[j] * r_[j] * std::log(1.0 / r_[j]) * signed_power(f.values[j], beta);
        return lambda - green_term;
    }

    const std::vector<double>& radii() const { return r_; }

  private:
    void apply(const std::vector<double>& v, std::vector<double>& out) const {
        const std::size_t n = r_.size();
        out.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = &a_[i * n];
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += row[j] * v[j];
            out[i] = s;
        }
    }
    std::vector<double> r_, w_, a_;
};

/// Radial two-point boundary-value oracle for constant boundary data:
///   v'' + (d-1)/r v' = 2 v^{1+beta},  v'(0) = 0,  v(1) = lambda,
/// solved by bisection on v(0) with an RK4 march.  Entirely independent
/// of the quadrature machinery.
inline double radial_shoot(double lambda, double beta, int d, double* v_at_1 = nullptr) {
    if (lambda < 0.0) throw std::invalid_argument("radial_shoot: lambda must be >= 0");
    if (lambda == 0.0) return 0.0;
    const int steps = 4000;
    const double r0 = 1e-8;
    auto march = [&](double a) {
        // series start: v = a + a^{1+beta} r^2 / d
        double v = a + std::pow(a, 1.0 + beta) * r0 * r0 / d;
        double vp = 2.0 * std::pow(a, 1.0 + beta) * r0 / d;
        const double hstep = (1.0 - r0) / steps;
        auto f2 = [&](double r, double vv, double pp) {
            return 2.0 * std::pow(std::max(vv, 0.0), 1.0 + beta) - (d - 1.0) / r * pp;
        };
        double r = r0;
        for (int i = 0; i < steps; ++i) {
            const double k1v = vp, k1p = f2(r, v, vp);
            const double k2v = vp + 0.5 * hstep * k1p,
                         k2p = f2(r + 0.5 * hstep, v + 0.5 * hstep * k1v, vp + 0.5 * hstep * k1p);
            const double k3v = vp + 0.5 * hstep * k2p,
                         k3p = f2(r + 0.5 * hstep, v + 0.5 * hstep * k2v, vp + 0.5 * hstep * k2p);
            const double k4v = vp + hstep * k3p,
                         k4p = f2(r + hstep, v + hstep * k3v, vp + hstep * k3p);
            v += hstep / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
            vp += hstep / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            r += hstep;
        }
        return v;
    };
    double lo = 0.0, hi = lambda;
    if (march(lo) - lambda >= 0.0 || march(hi) - lambda < 0.0)
        throw std::runtime_error("radial_shoot: bisection bracket failed");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (march(mid) - lambda < 0.0)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-14 * std::max(1.0, lambda)) break;
    }
    const double a = 0.5 * (lo + hi);
    if (v_at_1) *v_at_1 = march(a);
    return a;
}

/// Complete elliptic integral of the second kind via the AGM scheme.
inline double elliptic_e(double k) {
    double a = 1.0, b = std::sqrt(1.0 - k * k), c = k;
    double sum = 1.0 - 0.5 * c * c;
    double pow2 = 0.5;
    for (int i = 0; i < 60 && std::abs(c) > 1e-16; ++i) {
        c = 0.5 * (a - b);
        const double an = 0.5 * (a + b);
        b = std::sqrt(a * b);
        a = an;
        pow2 *= 2.0;
        sum -= pow2 * c * c;
    }
    return kPi / (2.0 * a) * sum;
}

/// Azimuth-averaged Poisson mass of a polar cap of the 3-ball seen from
/// the ring (r, u):  int_{cap(theta_cap)} P(x, z) sigma(dz) with edge
/// smoothing over `edge` radians.
inline double cap_poisson_axisym(double r, double u, double theta_cap, double edge,
                                 int quad_n = 256) {
    // (1/2pi) int dphi (A - B cos phi)^{-3/2} = E(k) / (pi (A-B) sqrt(A+B))
    auto pbar = [&](double cz, double sz) {
        const double a = r * r + 1.0 - 2.0 * r * u * cz;
        const double b = 2.0 * r * std::sqrt(std::max(0.0, 1.0 - u * u)) * sz;
        const double one_m_r2 = 1.0 - r * r;
        if (b <= 1e-14 * a)
            return one_m_r2 / (4.0 * kPi) * std::pow(a, -1.5);
        const double k2 = 2.0 * b / (a + b);
        return one_m_r2 / (4.0 * kPi) * elliptic_e(std::sqrt(k2)) * 2.0 /
               (kPi * (a - b) * std::sqrt(a + b));
    };
    const QuadRule q = gauss_legendre_on(quad_n, 0.0, std::min(theta_cap + edge, kPi));
    double s = 0.0;
    for (std::size_t i = 0; i < q.nodes.size(); ++i) {
        const double th = q.nodes[i];
        double ind = 1.0;
        if (th > theta_cap - edge)
            ind = std::max(0.0, std::min(1.0, (theta_cap + edge - th) / (2.0 * edge)));
        if (ind == 0.0) continue;
        s += q.weights[i] * ind * pbar(std::cos(th), std::sin(th)) * kTwoPi * std::sin(th);
    }
    return s;
}

struct VnResult {
    SemilinearField field;
    double v_at_x0 = 0.0;
    double scaled = 0.0;       ///< eps^alpha * v(x0)
    double cap_mass_at_x0 = 0.0;
};

/// Cap problem of the blow-up diagnostic: solve
///   v + G[v^{1+beta}] = eps^{1-d} * P[1_{cap(y0, 2 eps)}]
/// on the axisymmetric 3-ball grid, and evaluate eps^alpha v(x0) at the
/// interior point x0 = (1 - eps/2) y0.
inline VnResult solve_vn(double eps, double beta, double alpha, int n_r = 48, int n_u = 48,
                         SolveTrace* trace = nullptr) {
    if (!(alpha > 2.0 / (beta + 1.0)) || !(alpha < 2.0))
        throw std::invalid_argument("solve_vn: alpha must lie in (2/(beta+1), 2)");
    const int d = 3;
    const AxisymGrid grid = AxisymGrid::make(n_r, n_u);
    const AxisymGreenOperator gop(grid);
    const double theta_cap = 2.0 * std::asin(std::min(1.0, eps));
    const double edge = kPi / 256.0;
    const double amp = std::pow(eps, 1.0 - d);

    const std::size_t n = grid.r.size();
    std::vector<double> h(n);
    for (std::size_t i = 0; i < n; ++i)
        h[i] = amp * cap_poisson_axisym(grid.r[i], grid.u[i], theta_cap, edge);

    VnResult out;
    out.field.values = detail::picard_solve(
        [&](const std::vector<double>& v, std::vector<double>& o) { gop.apply(v, o); }, h, beta,
        1e-7 * amp, 8000, trace);
    std::vector<double> psi(n), gw;
    for (std::size_t i = 0; i < n; ++i) psi[i] = signed_power(out.field.values[i], beta);
    gop.apply(psi, gw);
    out.field.residual = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        out.field.residual =
            std::max(out.field.residual, std::abs(out.field.values[i] + gw[i] - h[i]));

    // evaluate at x0 on the cap axis through the integral equation
    const double r0 = 1.0 - 0.5 * eps;
    out.cap_mass_at_x0 = cap_poisson_axisym(r0, 1.0, theta_cap, edge);
    double green_term = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        green_term +=
            grid.weights[j] * green_ring_average(r0, 1.0, grid.r[j], grid.u[j]) * psi[j];
    out.v_at_x0 = amp * out.cap_mass_at_x0 - green_term;
    out.scaled = std::pow(eps, alpha) * out.v_at_x0;
    return out;
}

struct McValue {
    double value = 0.0;
    double se = 0.0;
    int replicas_used = 0;
    int truncated = 0;
    bool degenerate = false; ///< all weight vanished (no surviving replica weight)
};

/// -log E[exp(-<X^D, g> - int <X_t, phi> dt)] by replica averaging with a
/// jackknife standard error.
inline McValue laplace_mc(const SimConfig& cfg, int replica_count,
                          const std::function<double(const BoundaryPoint&)>& g,
                          const std::function<double(const Vec&)>& phi, int workers = 1) {
    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    RecordOptions opt;
    opt.store_exits = static_cast<bool>(g);
    if (phi) opt.occupation_fn = phi;
    std::vector<double> weights = run_replicas<double>(
        replica_count, workers, [&](int r) {
            const Trajectory traj =
                run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), opt, law);
            if (traj.truncated) return -1.0;
            double s = traj.occupation_integral;
            if (g) {
                double ge = 0.0;
                for (const auto& e : traj.exits) {
                    BoundaryPoint b;
                    b.u = e.pos;
                    ge += g(b);
                }
                s += ge / static_cast<double>(cfg.n);
            }
            return std::exp(-s);
        });
    McValue out;
    std::vector<double> valid;
    for (double w : weights) {
        if (w < 0.0)
            ++out.truncated;
        else
            valid.push_back(w);
    }
    if (valid.empty()) throw std::runtime_error("laplace_mc: every replica was truncated");
    out.replicas_used = static_cast<int>(valid.size());
    double mean = 0.0;
    for (double w : valid) mean += w;
    mean /= static_cast<double>(valid.size());
    out.value = -std::log(mean);
    out.se = jackknife_se_neglogmean(valid);
    return out;
}

/// Boundary compact set given as a union of caps (chordal radius).
struct BoundarySet {
    std::vector<std::pair<BoundaryPoint, double>> caps;
    bool empty() const { return caps.empty(); }
    double dist_chordal(const Vec& z) const {
        double best = 1e300;
        for (const auto& [c, rad] : caps) best = std::min(best, dist(z, c.embed()) - rad);
        return best;
    }
};

/// Radon measure on the boundary: either a density against sigma or a
/// finite atom list.
struct BoundaryMeasure {
    std::function<double(const BoundaryPoint&)> density; ///< may be empty
    std::vector<std::pair<BoundaryPoint, double>> atoms; ///< may be empty
};

/// -log E[ 1{R cap K = empty} exp(-int Xbar dnu) ]: the avoidance event is
/// detected through exit atoms within delta_hit of K; a density nu
/// integrates against the exit measure directly, atoms evaluate the
/// representation density.
inline McValue trace_functional(const SimConfig& cfg, int replica_count, const BoundarySet& K,
                                const BoundaryMeasure& nu, double delta_hit, int workers = 1) {
    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    RecordOptions opt;
    opt.store_exits = true;
    opt.store_events = !nu.atoms.empty();
    std::vector<double> weights = run_replicas<double>(
        replica_count, workers, [&](int r) {
            const Trajectory traj =
                run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), opt, law);
            if (traj.truncated) return -1.0;
            if (!K.empty()) {
                for (const auto& e : traj.exits)
                    if (K.dist_chordal(e.pos) <= delta_hit) return 0.0;
            }
            double s = 0.0;
            if (nu.density) {
                double ge = 0.0;
                for (const auto& e : traj.exits) {
                    BoundaryPoint b;
                    b.u = e.pos;
                    ge += nu.density(b);
                }
                s += ge / static_cast<double>(cfg.n);
            }
            for (const auto& [y, wgt] : nu.atoms)
                s += wgt * representation_density(cfg, traj, y);
            return std::exp(-s);
        });
    McValue out;
    std::vector<double> valid;
    for (double w : weights) {
        if (w < 0.0)
            ++out.truncated;
        else
            valid.push_back(w);
    }
    if (valid.empty()) throw std::runtime_error("trace_functional: every replica was truncated");
    out.replicas_used = static_cast<int>(valid.size());
    double mean = 0.0;
    for (double w : valid) mean += w;
    mean /= static_cast<double>(valid.size());
    if (mean <= 0.0) {
        out.degenerate = true;
        out.value = std::numeric_limits<double>::infinity();
        return out;
    }
    out.value = -std::log(mean);
    out.se = jackknife_se_neglogmean(valid);
    return out;
}

} // namespace sbx
