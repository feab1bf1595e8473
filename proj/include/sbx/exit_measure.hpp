#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sbx/branching.hpp"
#include "sbx/geometry.hpp"
#include "sbx/quadrature.hpp"
#include "sbx/rng.hpp"
#include "sbx/stats.hpp"

namespace sbx {

/// Atomic measure on the boundary sphere.
struct ExitMeasure {
    std::vector<BoundaryPoint> atoms;
    std::vector<double> masses;
    double total_mass = 0.0;

    double integrate(const std::function<double(const BoundaryPoint&)>& phi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) s += masses[i] * phi(atoms[i]);
        return s;
    }
};

/// Occupation measure of the boundary shell of width eps, scaled by
/// eps^-2; its atoms live strictly inside the ball.
struct ShellMeasure {
    double eps = 0.0;
    std::vector<Vec> atoms;
    std::vector<double> weights; ///< mass * dt * eps^-2 per dwell segment
    double total_weight = 0.0;

    double integrate(const std::function<double(const Vec&)>& phi) const {
        double s = 0.0;
        for (std::size_t i = 0; i < atoms.size(); ++i) s += weights[i] * phi(atoms[i]);
        return s;
    }
};

/// Exit measure by direct deposition: each killed particle leaves its
/// mass at its boundary crossing point.
inline ExitMeasure direct_exit_measure(const SimConfig& cfg, const Trajectory& traj) {
    if (traj.truncated)
        throw std::invalid_argument("direct_exit_measure: truncated trajectory");
    ExitMeasure m;
    const double unit = 1.0 / static_cast<double>(cfg.n);
    m.atoms.reserve(traj.exits.size());
    m.masses.reserve(traj.exits.size());
    for (const auto& e : traj.exits) {
        BoundaryPoint b;
        b.u = e.pos;
        m.atoms.push_back(b);
        m.masses.push_back(unit);
        m.total_mass += unit;
    }
    return m;
}

/// Exit measure by the occupation-shell route: time spent in the width-eps
/// boundary shell, scaled by eps^-2.
inline ShellMeasure shell_measure(const SimConfig& cfg, const Trajectory& traj, double eps) {
    bool listed = false;
    for (double e : cfg.eps_list) listed = listed || e == eps;
    if (!listed) throw std::invalid_argument("shell_measure: eps not in config eps_list");
    if (!traj.shell_visits_recorded)
        throw std::invalid_argument("shell_measure: trajectory recorded no shell visits");
    ShellMeasure m;
    m.eps = eps;
    const double scale = 1.0 / (static_cast<double>(cfg.n) * eps * eps);
    const float r_min2 = static_cast<float>((1.0 - eps) * (1.0 - eps));
    for (const auto& v : traj.shell_visits) {
        const float r2 = v.x * v.x + v.y * v.y + v.z * v.z;
        if (r2 < r_min2) continue;
        Vec p(static_cast<double>(v.x), static_cast<double>(v.y));
        p.d = cfg.d;
        p[2] = static_cast<double>(v.z);
        m.atoms.push_back(p);
        m.weights.push_back(static_cast<double>(v.dur) * scale);
        m.total_weight += m.weights.back();
    }
    return m;
}

struct PairGapRow {
    double eps = 0.0;
    std::size_t phi_index = 0;
    double rms_gap = 0.0;        ///< across replicas
    double mean_abs_gap = 0.0;
};

struct PairTestResult {
    std::vector<PairGapRow> rows;                        ///< eps-major
    std::vector<std::vector<std::vector<double>>> gaps;  ///< [phi][replica][eps]
    std::vector<TrendTest> trend;                        ///< per phi: gap vs eps
};

/// Per-replica paired gaps |<X_eps, phi> - <X^D, phi>| for every shell
/// width of the config, one row per eps (ascending).
inline std::vector<std::vector<double>> pair_gaps(
    const SimConfig& cfg, const Trajectory& traj,
    const std::vector<std::function<double(const Vec&)>>& phi_list) {
    std::vector<double> eps_sorted = cfg.eps_list;
    std::sort(eps_sorted.begin(), eps_sorted.end());
    const ExitMeasure exit = direct_exit_measure(cfg, traj);
    std::vector<std::vector<double>> gaps(eps_sorted.size(),
                                          std::vector<double>(phi_list.size()));
    std::vector<double> exit_vals(phi_list.size());
    for (std::size_t f = 0; f < phi_list.size(); ++f)
        exit_vals[f] =
            exit.integrate([&](const BoundaryPoint& b) { return phi_list[f](b.embed()); });
    for (std::size_t e = 0; e < eps_sorted.size(); ++e) {
        const ShellMeasure shell = shell_measure(cfg, traj, eps_sorted[e]);
        for (std::size_t f = 0; f < phi_list.size(); ++f)
            gaps[e][f] = std::abs(shell.integrate(phi_list[f]) - exit_vals[f]);
    }
    return gaps;
}

/// Paired comparison of the two exit-measure constructions across fresh
/// replicas.  Trajectories are processed one at a time and discarded; only
/// the gap table survives.  Truncated replicas are skipped and counted.
inline PairTestResult pair_test(const SimConfig& cfg, int replica_count,
                                const std::vector<std::function<double(const Vec&)>>& phi_list,
                                int* truncated_count = nullptr) {
    std::vector<double> eps_sorted = cfg.eps_list;
    std::sort(eps_sorted.begin(), eps_sorted.end());
    PairTestResult out;
    out.gaps.assign(phi_list.size(), {});
    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    RecordOptions opt;
    opt.store_shell_visits = true;
    int truncated = 0;
    for (int r = 0; r < replica_count; ++r) {
        const Trajectory traj =
            run_replica(cfg, replica_seed(cfg.seed, static_cast<std::uint64_t>(r)), opt, law);
        if (traj.truncated) {
            ++truncated;
            continue;
        }
        const auto gaps = pair_gaps(cfg, traj, phi_list);
        for (std::size_t f = 0; f < phi_list.size(); ++f) {
            out.gaps[f].push_back({});
            for (std::size_t e = 0; e < eps_sorted.size(); ++e)
                out.gaps[f].back().push_back(gaps[e][f]);
        }
    }
    if (truncated_count) *truncated_count = truncated;

    for (std::size_t e = 0; e < eps_sorted.size(); ++e)
        for (std::size_t f = 0; f < phi_list.size(); ++f) {
            PairGapRow row;
            row.eps = eps_sorted[e];
            row.phi_index = f;
            double s2 = 0.0, s1 = 0.0;
            for (const auto& g : out.gaps[f]) {
                s2 += g[e] * g[e];
                s1 += std::abs(g[e]);
            }
            const double cnt = std::max<double>(1.0, static_cast<double>(out.gaps[f].size()));
            row.rms_gap = std::sqrt(s2 / cnt);
            row.mean_abs_gap = s1 / cnt;
            out.rows.push_back(row);
        }

    for (std::size_t f = 0; f < phi_list.size(); ++f)
        out.trend.push_back(spearman_trend(out.gaps[f], eps_sorted));
    return out;
}

/// Deterministic counterpart of the shell identity: the expected shell
/// occupation eps^-2 int_{F_eps} G_D mu equals <mu, 1> in the eps -> 0
/// limit.  Returned for a list of widths so the trend is visible.
inline std::vector<double> shell_first_moment(const Domain& dom,
                                              const std::vector<std::pair<Vec, double>>& mu,
                                              const std::vector<double>& eps_list,
                                              int n_r = 256, int n_ang = 128) {
    std::vector<double> out;
    for (double eps : eps_list) {
        const QuadRule rr = gauss_legendre_on(n_r, 1.0 - eps, 1.0);
        double s = 0.0;
        if (dom.d == 2) {
            const double dth = kTwoPi / n_ang;
            for (std::size_t i = 0; i < rr.nodes.size(); ++i)
                for (int j = 0; j < n_ang; ++j) {
                    const double th = dth * (j + 0.5);
                    const Vec y(rr.nodes[i] * std::cos(th), rr.nodes[i] * std::sin(th));
                    double g = 0.0;
                    for (const auto& [pos, mass] : mu) g += mass * green_function(dom, pos, y);
                    s += rr.weights[i] * rr.nodes[i] * dth * g;
                }
        } else {
            const QuadRule uu = gauss_legendre_on(n_ang / 2, -1.0, 1.0);
            const double dphi = kTwoPi / n_ang;
            for (std::size_t i = 0; i < rr.nodes.size(); ++i)
                for (std::size_t j = 0; j < uu.nodes.size(); ++j)
                    for (int k = 0; k < n_ang; ++k) {
                        const double u = uu.nodes[j];
                        const double su = std::sqrt(1.0 - u * u);
                        const double ph = dphi * (k + 0.5);
                        const Vec y(rr.nodes[i] * su * std::cos(ph),
                                    rr.nodes[i] * su * std::sin(ph), rr.nodes[i] * u);
                        double g = 0.0;
                        for (const auto& [pos, mass] : mu) g += mass * green_function(dom, pos, y);
                        s += rr.weights[i] * rr.nodes[i] * rr.nodes[i] * uu.weights[j] * dphi * g;
                    }
        }
        out.push_back(s / (eps * eps));
    }
    return out;
}

} // namespace sbx
