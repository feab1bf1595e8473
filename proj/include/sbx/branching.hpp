#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "sbx/geometry.hpp"
#include "sbx/offspring.hpp"
#include "sbx/rng.hpp"

namespace sbx {

/// Parameters of one particle-system run.  Particles carry mass 1/n, move
/// as Brownian paths killed on the sphere, and branch at rate
/// (1+beta) n^beta with the critical stable offspring law.
struct SimConfig {
    int d = 2;
    double beta = 0.5;
    std::int64_t n = 1000;  ///< particles per unit mass
    double dt = 1e-4;
    std::vector<std::pair<Vec, double>> mu = {{Vec(0.0, 0.0), 1.0}};
    std::uint64_t seed = 1;
    int replicas = 1;
    std::vector<double> eps_list;       ///< boundary-shell widths
    std::int64_t max_events = 10000000; ///< branch-event safety cap
    /// Steps taken within the boundary zone (the widest shell plus a few
    /// step lengths) shrink to dt / boundary_refine.  Brownian increments
    /// are exact at any step size; only boundary-crossing detection and
    /// shell dwell times carry the O(sqrt(dt)) discretization, so refining
    /// near the sphere buys accuracy at a few percent of the cost of a
    /// globally finer dt.
    int boundary_refine = 16;

    double branch_rate() const { return (1.0 + beta) * std::pow(static_cast<double>(n), beta); }

    void validate() const {
        if (d < 2 || d > 3) throw std::invalid_argument("config: d must be 2 or 3");
        if (!(beta > 0.0) || beta > 1.0)
            throw std::invalid_argument("config: beta must be in (0,1]");
        if (n < 1) throw std::invalid_argument("config: n must be >= 1");
        if (!(dt > 0.0)) throw std::invalid_argument("config: dt must be > 0");
        if (mu.empty()) throw std::invalid_argument("config: mu must have at least one atom");
        for (const auto& [pos, mass] : mu) {
            if (pos.d != d) throw std::invalid_argument("config: mu atom dimension mismatch");
            if (!(rho(pos) > 0.0))
                throw std::invalid_argument("config: mu atoms must lie strictly inside the ball");
            if (!(mass > 0.0)) throw std::invalid_argument("config: mu atom masses must be > 0");
        }
        for (double e : eps_list)
            if (!(e > 0.0) || e >= 1.0)
                throw std::invalid_argument("config: shell widths must lie in (0,1)");
        if (max_events < 1) throw std::invalid_argument("config: max_events must be >= 1");
        if (boundary_refine < 1)
            throw std::invalid_argument("config: boundary_refine must be >= 1");
    }
};

struct BranchEvent {
    double time;
    Vec pos;
    std::int64_t k; ///< offspring count, never 1
};

struct ExitAtom {
    double time;
    Vec pos; ///< on the sphere
};

/// One dwell segment in the outermost requested shell; ShellMeasure atoms
/// for any smaller width are filtered from these.
struct ShellVisit {
    float x, y, z;
    float dur;
};

struct Trajectory {
    bool truncated = false;
    bool shell_visits_recorded = false;
    std::int64_t initial_units = 0;  ///< round(mass * n) summed over atoms
    std::int64_t exit_units = 0;     ///< exited particles
    std::int64_t jump_units = 0;     ///< sum of (k - 1) over branch events
    std::int64_t alive_units = 0;    ///< nonzero only for truncated runs
    std::int64_t event_count = 0;
    double extinction_time = 0.0;
    std::vector<BranchEvent> events;
    std::vector<ExitAtom> exits;
    std::vector<ShellVisit> shell_visits;
    std::vector<double> shell_tally;               ///< per eps: sum mass*dt in the shell
    std::vector<std::vector<double>> snapshots;    ///< [time][fn] of <X_t, fn>
    double occupation_integral = 0.0;              ///< int <X_t, occupation_fn> dt

    /// Exact bookkeeping in 1/n units: initial + jumps - exits - alive = 0.
    std::int64_t mass_defect_units() const {
        return initial_units + jump_units - exit_units - alive_units;
    }

    /// Range-meets-boundary-set flag: some exit point within chordal
    /// distance `radius` of `center`.
    bool hits(const BoundaryPoint& center, double radius) const {
        for (const auto& e : exits)
            if (dist(e.pos, center.embed()) <= radius) return true;
        return false;
    }
};

struct RecordOptions {
    bool store_events = false;
    bool store_exits = true;
    bool store_shell_visits = false;
    std::vector<double> snapshot_times;                           ///< sorted ascending
    std::vector<std::function<double(const Vec&)>> snapshot_fns;
    std::function<double(const Vec&)> occupation_fn;              ///< optional
};

namespace detail {

struct Particle {
    double x[3];
    double t;        ///< current time
    double t_branch; ///< scheduled branch time
    std::uint32_t snap_idx;
};

} // namespace detail

/// Run one replica to extinction (or the event cap).  Deterministic in
/// (config, seed): a fixed-order depth-first walk of the branching tree
/// with one private RNG stream.
inline Trajectory run_replica(const SimConfig& cfg, std::uint64_t seed, const RecordOptions& opt,
                              const OffspringLaw& law) {
    cfg.validate();
    const int d = cfg.d;
    const double gamma = cfg.branch_rate();
    const double dt = cfg.dt;
    const double dt_fine = dt / cfg.boundary_refine;
    const double sqrt_dt = std::sqrt(dt);
    const double sqrt_dt_fine = std::sqrt(dt_fine);
    const double inv_n = 1.0 / static_cast<double>(cfg.n);
    Rng rng(seed);

    std::vector<double> eps_sorted = cfg.eps_list;
    std::sort(eps_sorted.begin(), eps_sorted.end());
    std::vector<double> shell_r2(eps_sorted.size()); // |x|^2 >= shell_r2[i] <=> rho <= eps[i]
    for (std::size_t i = 0; i < eps_sorted.size(); ++i)
        shell_r2[i] = (1.0 - eps_sorted[i]) * (1.0 - eps_sorted[i]);
    const double outer_r2 = shell_r2.empty() ? 2.0 : shell_r2.back();

    // fine-step zone: widest shell plus enough coarse-step lengths that
    // jumping over it is a > 6 sigma event
    const double zone =
        std::min(std::max(eps_sorted.empty() ? 0.0 : eps_sorted.back(), 0.0) + 6.0 * sqrt_dt,
                 0.9);
    const double zone_r2 = (1.0 - zone) * (1.0 - zone);

    Trajectory traj;
    traj.shell_visits_recorded = opt.store_shell_visits;
    traj.shell_tally.assign(eps_sorted.size(), 0.0);
    traj.snapshots.assign(opt.snapshot_times.size(),
                          std::vector<double>(opt.snapshot_fns.size(), 0.0));
    const std::uint32_t n_snap = static_cast<std::uint32_t>(opt.snapshot_times.size());

    std::vector<detail::Particle> stack;
    for (const auto& [pos, mass] : cfg.mu) {
        const std::int64_t count = std::llround(mass * static_cast<double>(cfg.n));
        traj.initial_units += count;
        detail::Particle p{};
        for (int i = 0; i < d; ++i) p.x[i] = pos[i];
        p.t = 0.0;
        p.snap_idx = 0;
        for (std::int64_t c = 0; c < count; ++c) {
            p.t_branch = rng.exponential() / gamma;
            stack.push_back(p);
        }
    }

    // Dwell runs: consecutive steps of one particle inside the same
    // sub-shell coalesce into a single visit record (memory stays flat at
    // fine step sizes).  A run flushes when the particle changes sub-shell,
    // drifts, or ends.
    struct DwellRun {
        double x[3]{};
        double dur = 0.0;
        int bin = -1; ///< index of the narrowest shell containing the run
    } run;
    auto flush_run = [&] {
        if (run.bin >= 0 && run.dur > 0.0)
            traj.shell_visits.push_back({static_cast<float>(run.x[0]),
                                         static_cast<float>(run.x[1]),
                                         static_cast<float>(run.x[2]),
                                         static_cast<float>(run.dur)});
        run.bin = -1;
        run.dur = 0.0;
    };

    auto tally_segment = [&](const detail::Particle& p, double r2, double h) {
        if (r2 >= outer_r2) {
            int bin = -1;
            for (std::size_t i = eps_sorted.size(); i-- > 0;) {
                if (r2 >= shell_r2[i]) {
                    traj.shell_tally[i] += h;
                    bin = static_cast<int>(i);
                } else
                    break;
            }
            if (opt.store_shell_visits) {
                const double drift2 = [&] {
                    double s = 0.0;
                    for (int i = 0; i < 3; ++i) s += (p.x[i] - run.x[i]) * (p.x[i] - run.x[i]);
                    return s;
                }();
                if (bin != run.bin || drift2 > 1e-3) {
                    flush_run();
                    run.bin = bin;
                    for (int i = 0; i < 3; ++i) run.x[i] = p.x[i];
                }
                run.dur += h;
            }
        } else if (opt.store_shell_visits && run.bin >= 0) {
            flush_run();
        }
        if (opt.occupation_fn) {
            Vec v(p.x[0], p.x[1]);
            v.d = d;
            v[2] = p.x[2];
            traj.occupation_integral += h * opt.occupation_fn(v);
        }
    };

    auto cross_snapshots = [&](detail::Particle& p, double t_new) {
        while (p.snap_idx < n_snap && opt.snapshot_times[p.snap_idx] <= t_new) {
            Vec v(p.x[0], p.x[1]);
            v.d = d;
            v[2] = p.x[2];
            auto& row = traj.snapshots[p.snap_idx];
            for (std::size_t f = 0; f < opt.snapshot_fns.size(); ++f)
                row[f] += opt.snapshot_fns[f](v);
            ++p.snap_idx;
        }
    };

    while (!stack.empty() && !traj.truncated) {
        detail::Particle p = stack.back();
        stack.pop_back();

        bool alive = true;
        double r2_cur = 0.0;
        for (int i = 0; i < d; ++i) r2_cur += p.x[i] * p.x[i];
        while (alive) {
            const bool fine = r2_cur >= zone_r2;
            const double step = fine ? dt_fine : dt;
            const bool branch_now = p.t_branch <= p.t + step;
            const double h = branch_now ? p.t_branch - p.t : step;
            const double sh = branch_now ? std::sqrt(h) : (fine ? sqrt_dt_fine : sqrt_dt);

            double old_x[3] = {p.x[0], p.x[1], p.x[2]};
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) {
                p.x[i] += sh * rng.normal();
                r2 += p.x[i] * p.x[i];
            }
            const double t_new = p.t + h;

            if (r2 >= 1.0) {
                // exit at the segment's sphere crossing
                double a = 0.0, b = 0.0, c0 = 0.0;
                for (int i = 0; i < d; ++i) {
                    const double dx = p.x[i] - old_x[i];
                    a += dx * dx;
                    b += 2.0 * old_x[i] * dx;
                    c0 += old_x[i] * old_x[i];
                }
                c0 -= 1.0;
                const double disc = std::max(b * b - 4.0 * a * c0, 0.0);
                const double s = a > 0.0 ? (-b + std::sqrt(disc)) / (2.0 * a) : 1.0;
                double e[3];
                double en = 0.0;
                for (int i = 0; i < d; ++i) {
                    e[i] = old_x[i] + s * (p.x[i] - old_x[i]);
                    en += e[i] * e[i];
                }
                en = std::sqrt(en);
                const double t_exit = p.t + s * h;
                ++traj.exit_units;
                traj.extinction_time = std::max(traj.extinction_time, t_exit);
                if (opt.store_exits) {
                    ExitAtom atom;
                    atom.time = t_exit;
                    atom.pos = Vec(e[0] / en, e[1] / en);
                    atom.pos.d = d;
                    atom.pos[2] = d == 3 ? e[2] / en : 0.0;
                    traj.exits.push_back(atom);
                }
                alive = false;
                break;
            }

            cross_snapshots(p, t_new);
            tally_segment(p, r2, h);
            p.t = t_new;
            r2_cur = r2;

            if (branch_now) {
                if (traj.event_count >= cfg.max_events) {
                    traj.truncated = true;
                    traj.alive_units += 1; // current particle still alive
                    break;
                }
                ++traj.event_count;
                const std::int64_t k = law.sample(rng);
                traj.jump_units += k - 1;
                if (opt.store_events) {
                    BranchEvent ev;
                    ev.time = p.t;
                    ev.pos = Vec(p.x[0], p.x[1]);
                    ev.pos.d = d;
                    ev.pos[2] = p.x[2];
                    ev.k = k;
                    traj.events.push_back(ev);
                }
                if (k == 0) {
                    traj.extinction_time = std::max(traj.extinction_time, p.t);
                    alive = false;
                } else {
                    // continue as the first child, push the other k-1
                    p.t_branch = p.t + rng.exponential() / gamma;
                    detail::Particle child = p;
                    for (std::int64_t c = 1; c < k; ++c) {
                        child.t_branch = p.t + rng.exponential() / gamma;
                        stack.push_back(child);
                    }
                }
            }
        }
    }

    flush_run();
    if (traj.truncated) traj.alive_units += static_cast<std::int64_t>(stack.size());

    // the depth-first walk emits events out of order; the log is a jump
    // record and carries nondecreasing times
    std::stable_sort(traj.events.begin(), traj.events.end(),
                     [](const BranchEvent& a, const BranchEvent& b) { return a.time < b.time; });
    std::stable_sort(traj.exits.begin(), traj.exits.end(),
                     [](const ExitAtom& a, const ExitAtom& b) { return a.time < b.time; });

    // convert per-step tallies from particle units to mass units
    for (double& v : traj.shell_tally) v *= inv_n;
    for (auto& row : traj.snapshots)
        for (double& v : row) v *= inv_n;
    traj.occupation_integral *= inv_n;
    return traj;
}

inline Trajectory run_replica(const SimConfig& cfg, std::uint64_t seed,
                              const RecordOptions& opt = {}) {
    const OffspringLaw law = OffspringLaw::make(cfg.beta);
    return run_replica(cfg, seed, opt, law);
}

struct CsbpResult {
    bool survived = false;
    double mass = 0.0; ///< at time t (0 if extinct); undefined when early_stopped
    bool early_stopped = false;
    std::int64_t events = 0;
};

/// Total-mass branching process: spatial motion and killing disabled.
/// With survival_only, a replica stops as soon as extinction before t has
/// probability below 1e-12 given the current count (exact per-particle
/// extinction probabilities from the offspring generating function).
inline CsbpResult run_csbp(double beta, double initial_mass, double t, std::int64_t n,
                           std::uint64_t seed, const OffspringLaw& law,
                           bool survival_only = false) {
    Rng rng(seed);
    const double gamma = (1.0 + beta) * std::pow(static_cast<double>(n), beta);
    std::int64_t z = std::llround(initial_mass * static_cast<double>(n));
    double tau = 0.0;
    CsbpResult res;
    const double nn = static_cast<double>(n);
    int check_countdown = 0;
    while (z > 0) {
        const double rate = gamma * static_cast<double>(z);
        tau += rng.exponential() / rate;
        if (tau >= t) break;
        z += law.sample(rng) - 1;
        ++res.events;
        if (survival_only && --check_countdown <= 0) {
            check_countdown = 64;
            // u*(s) = (n^-beta + beta s)^(-1/beta); extinct-by-t probability
            // from count z is (1 - u*(t - tau)/n)^z
            const double ustar =
                std::pow(std::pow(nn, -beta) + beta * (t - tau), -1.0 / beta);
            if (-static_cast<double>(z) * std::log1p(-ustar / nn) > 27.6) {
                res.survived = true;
                res.early_stopped = true;
                res.mass = static_cast<double>(z) / nn;
                return res;
            }
        }
    }
    res.survived = z > 0;
    res.mass = static_cast<double>(z) / nn;
    return res;
}

} // namespace sbx
