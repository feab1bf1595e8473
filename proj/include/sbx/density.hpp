#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbx/branching.hpp"
#include "sbx/exit_measure.hpp"
#include "sbx/geometry.hpp"
#include "sbx/quadrature.hpp"
#include "sbx/rng.hpp"
#include "sbx/stats.hpp"

namespace sbx {

struct BoundaryDensityEstimate {
    std::vector<BoundaryPoint> grid;
    std::vector<double> grid_weights;
    std::vector<double> value;
    std::vector<double> stderr_; ///< across replicas
    std::string estimator;       ///< "smoothed" | "representation"
    double bandwidth = 0.0;
};

struct IncrementMomentTable {
    double q = 0.0;
    std::vector<double> distances;
    std::vector<double> moments;
};

/// Smoothing kernels on the boundary, as functions of geodesic distance:
/// wrapped triangular for the circle, spherical-cap Epanechnikov for the
/// sphere.  Both are normalized discretely against the grid so each atom
/// deposits exactly its mass.
inline double boundary_kernel(int d, double geo_dist, double h) {
    const double u = geo_dist / h;
    if (u >= 1.0) return 0.0;
    return d == 2 ? 1.0 - u : 1.0 - u * u;
}

/// Kernel-density estimate of the exit measure on a boundary grid,
/// averaged over replicas with per-point standard errors.
inline BoundaryDensityEstimate smoothed_density(const Domain& dom,
                                                const std::vector<ExitMeasure>& replicas,
                                                double bandwidth, const BoundaryGrid& grid) {
    if (!(bandwidth > 0.0)) throw std::invalid_argument("smoothed_density: bandwidth must be > 0");
    BoundaryDensityEstimate est;
    est.grid = grid.nodes;
    est.grid_weights = grid.weights;
    est.estimator = "smoothed";
    est.bandwidth = bandwidth;
    const std::size_t g = grid.nodes.size();
    std::vector<double> sum(g, 0.0), sum2(g, 0.0);
    std::vector<double> field(g);
    for (const auto& m : replicas) {
        std::fill(field.begin(), field.end(), 0.0);
        for (std::size_t a = 0; a < m.atoms.size(); ++a) {
            double norm = 0.0;
            for (std::size_t i = 0; i < g; ++i)
                norm += grid.weights[i] *
                        boundary_kernel(dom.d, boundary_geodesic(grid.nodes[i], m.atoms[a]),
                                        bandwidth);
            if (norm <= 0.0)
                throw std::invalid_argument(
                    "smoothed_density: grid too coarse for this bandwidth");
            const double scale = m.masses[a] / norm;
            for (std::size_t i = 0; i < g; ++i) {
                const double k =
                    boundary_kernel(dom.d, boundary_geodesic(grid.nodes[i], m.atoms[a]),
                                    bandwidth);
                if (k > 0.0) field[i] += scale * k;
            }
        }
        for (std::size_t i = 0; i < g; ++i) {
            sum[i] += field[i];
            sum2[i] += field[i] * field[i];
        }
    }
    const double r = static_cast<double>(replicas.size());
    est.value.resize(g);
    est.stderr_.resize(g);
    for (std::size_t i = 0; i < g; ++i) {
        est.value[i] = sum[i] / r;
        const double var = std::max(0.0, (sum2[i] - sum[i] * sum[i] / r) / std::max(1.0, r - 1));
        est.stderr_[i] = std::sqrt(var / r);
    }
    return est;
}

/// Mass carried by the smoothed field of one replica (equals the exit mass
/// exactly, by the discrete normalization).
inline double smoothed_total_mass(const Domain& dom, const ExitMeasure& m, double bandwidth,
                                  const BoundaryGrid& grid) {
    double tot = 0.0;
    for (std::size_t a = 0; a < m.atoms.size(); ++a) {
        double norm = 0.0, mass = 0.0;
        for (std::size_t i = 0; i < grid.nodes.size(); ++i) {
            const double k = boundary_kernel(
                dom.d, boundary_geodesic(grid.nodes[i], m.atoms[a]), bandwidth);
            norm += grid.weights[i] * k;
            mass += grid.weights[i] * k;
        }
        tot += m.masses[a] * mass / norm;
    }
    return tot;
}

/// Density value at y from the jump representation: the Poisson potential
/// of the initial measure plus the compensated-jump sum over the branch
/// log (the compensator vanishes because offspring are critical).  Events
/// sitting closer than 1e-6 to the sphere are pulled back to that depth
/// before the kernel blows up.
inline double representation_density(const SimConfig& cfg, const Trajectory& traj,
                                     const BoundaryPoint& y) {
    const Domain dom(cfg.d);
    double v = 0.0;
    for (const auto& [pos, mass] : cfg.mu) v += mass * poisson_kernel(dom, pos, y);
    const double inv_n = 1.0 / static_cast<double>(cfg.n);
    for (const auto& e : traj.events) {
        Vec x = e.pos;
        const double r = x.norm();
        if (r > 1.0 - 1e-6) {
            const double s = (1.0 - 1e-6) / r;
            for (int i = 0; i < cfg.d; ++i) x[i] *= s;
        }
        v += static_cast<double>(e.k - 1) * inv_n * poisson_kernel(dom, x, y);
    }
    return v;
}

/// Jump-martingale part alone (the density minus its deterministic mean).
inline double representation_fluctuation(const SimConfig& cfg, const Trajectory& traj,
                                         const BoundaryPoint& y) {
    const Domain dom(cfg.d);
    double v = representation_density(cfg, traj, y);
    for (const auto& [pos, mass] : cfg.mu) v -= mass * poisson_kernel(dom, pos, y);
    return v;
}

struct HolderDiagnostic {
    IncrementMomentTable table;
    LineFit fit; ///< log moment vs log distance
};

/// Empirical q-th moments of representation-density increments across
/// dyadic boundary distances, with the log-log slope.  Distances are
/// chordal; pair centers are spread around the circle.
inline HolderDiagnostic holder_diagnostic(const SimConfig& cfg, int replica_count, double q,
                                          int n_scales = 7) {
    if (cfg.d != 2) throw std::invalid_argument("holder_diagnostic: requires d = 2");
    if (!(q > 1.0) || q >= 1.0 + cfg.beta)
        throw std::invalid_argument("holder_diagnostic: q must lie in (1, 1+beta)");
    if (n_scales < 5) throw std::invalid_argument("holder_diagnostic: need at least 5 scales");

    std::vector<std::pair<BoundaryPoint, BoundaryPoint>> pairs;
    std::vector<double> dist_list;
    for (int k = 0; k < n_scales; ++k) {
        const double dist = std::pow(2.0, -(k + 2));
        const double half_angle = std::asin(0.5 * dist);
        const double center = kTwoPi * (static_cast<double>(k) + 0.37) /
                              static_cast<double>(n_scales);
        pairs.emplace_back(BoundaryPoint::from_angle(center - half_angle),
                           BoundaryPoint::from_angle(center + half_angle));
        dist_list.push_back(dist);
    }

    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    RecordOptions opt;
    opt.store_events = true;
    opt.store_exits = false;
    std::vector<double> acc(static_cast<std::size_t>(n_scales), 0.0);
    int used = 0;
    for (int r = 0; r < replica_count; ++r) {
        const Trajectory traj =
            run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), opt, law);
        if (traj.truncated) continue;
        ++used;
        for (int k = 0; k < n_scales; ++k) {
            const double z1 = representation_fluctuation(cfg, traj, pairs[static_cast<std::size_t>(k)].first);
            const double z2 = representation_fluctuation(cfg, traj, pairs[static_cast<std::size_t>(k)].second);
            acc[static_cast<std::size_t>(k)] += std::pow(std::abs(z1 - z2), q);
        }
    }
    HolderDiagnostic out;
    out.table.q = q;
    std::vector<double> lx, ly;
    for (int k = 0; k < n_scales; ++k) {
        const double m = acc[static_cast<std::size_t>(k)] / std::max(1, used);
        out.table.distances.push_back(dist_list[static_cast<std::size_t>(k)]);
        out.table.moments.push_back(m);
        lx.push_back(std::log(dist_list[static_cast<std::size_t>(k)]));
        ly.push_back(std::log(m));
    }
    out.fit = fit_line(lx, ly);
    return out;
}

struct SupGrowthResult {
    std::vector<double> bandwidths;
    std::vector<double> median_sup;               ///< over replicas charging the cap
    std::vector<std::vector<double>> replica_sups; ///< [bandwidth][replica]
    int charged_replicas = 0;
};

/// Sup of the smoothed density over a boundary cap, per bandwidth, on the
/// replicas whose exit measure charges the cap.  In the regime where the
/// density is continuous the sups stabilize as the bandwidth shrinks; in
/// the blow-up regime the medians keep growing.
inline SupGrowthResult sup_growth_diagnostic(const SimConfig& cfg, int replica_count,
                                             const std::vector<double>& bandwidths,
                                             const BoundaryPoint& cap_center, double cap_radius,
                                             const BoundaryGrid& grid) {
    std::vector<double> bw = bandwidths;
    for (std::size_t i = 1; i < bw.size(); ++i)
        if (bw[i] >= bw[i - 1])
            throw std::invalid_argument("sup_growth_diagnostic: schedule must decrease");
    const Domain dom(cfg.d);
    SupGrowthResult out;
    out.bandwidths = bw;
    out.replica_sups.assign(bw.size(), {});

    std::vector<std::size_t> cap_nodes;
    for (std::size_t i = 0; i < grid.nodes.size(); ++i)
        if (boundary_geodesic(grid.nodes[i], cap_center) <= cap_radius) cap_nodes.push_back(i);
    if (cap_nodes.empty()) throw std::invalid_argument("sup_growth_diagnostic: empty cap");

    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    for (int r = 0; r < replica_count; ++r) {
        const Trajectory traj =
            run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), {}, law);
        if (traj.truncated) continue;
        const ExitMeasure m = direct_exit_measure(cfg, traj);
        bool charged = false;
        for (const auto& a : m.atoms)
            if (boundary_geodesic(a, cap_center) <= cap_radius) {
                charged = true;
                break;
            }
        if (!charged) {
            // uncharged caps have zero density: record zero sups
            for (std::size_t b = 0; b < bw.size(); ++b) out.replica_sups[b].push_back(0.0);
            continue;
        }
        ++out.charged_replicas;
        for (std::size_t b = 0; b < bw.size(); ++b) {
            const double h = bw[b];
            double sup = 0.0;
            // per-atom discrete normalization, then sup over cap nodes
            std::vector<double> field(cap_nodes.size(), 0.0);
            for (std::size_t a = 0; a < m.atoms.size(); ++a) {
                if (boundary_geodesic(m.atoms[a], cap_center) > cap_radius + h) continue;
                double norm = 0.0;
                for (std::size_t i = 0; i < grid.nodes.size(); ++i)
                    norm += grid.weights[i] *
                            boundary_kernel(dom.d, boundary_geodesic(grid.nodes[i], m.atoms[a]), h);
                if (norm <= 0.0) continue;
                const double scale = m.masses[a] / norm;
                for (std::size_t ci = 0; ci < cap_nodes.size(); ++ci) {
                    const double k = boundary_kernel(
                        dom.d, boundary_geodesic(grid.nodes[cap_nodes[ci]], m.atoms[a]), h);
                    if (k > 0.0) field[ci] += scale * k;
                }
            }
            for (double v : field) sup = std::max(sup, v);
            out.replica_sups[b].push_back(sup);
        }
    }

    for (std::size_t b = 0; b < bw.size(); ++b) {
        std::vector<double> charged_sups;
        for (double v : out.replica_sups[b])
            if (v > 0.0) charged_sups.push_back(v);
        out.median_sup.push_back(charged_sups.empty() ? 0.0 : median(charged_sups));
    }
    return out;
}

/// Exit measures of fresh replicas (truncated ones skipped).
inline std::vector<ExitMeasure> collect_exit_measures(const SimConfig& cfg, int replica_count) {
    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    std::vector<ExitMeasure> out;
    out.reserve(static_cast<std::size_t>(replica_count));
    for (int r = 0; r < replica_count; ++r) {
        const Trajectory traj =
            run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), {}, law);
        if (!traj.truncated) out.push_back(direct_exit_measure(cfg, traj));
    }
    return out;
}

} // namespace sbx
