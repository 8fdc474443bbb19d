#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dpo/core_model.hpp"
#include "dpo/rng.hpp"

namespace dpo {

/// Diffusion constants of the two real surrogate processes.
///
/// The complex noise F splits into a cavity part F_C with <F_C F_C> = epsilon
/// and <F_C* F_C> = 0, and a reservoir part F_R with <F_R F_R> = kappa M and
/// <F_R* F_R> = kappa N. For F_pm = F* +/- F this gives four independent real
/// white noises with the diffusions below, all nonnegative for r >= 0.
struct NoiseModel {
    double cavity_plus = 0.0;     ///< 2 epsilon
    double cavity_minus = 0.0;    ///< 2 epsilon
    double reservoir_plus = 0.0;  ///< 2 kappa (M + N)
    double reservoir_minus = 0.0; ///< 2 kappa (M - N)
    double lambda_plus = 0.0;
    double lambda_minus = 0.0;

    double total_plus() const { return cavity_plus + reservoir_plus; }
    double total_minus() const { return cavity_minus + reservoir_minus; }
};

inline NoiseModel noise_model(const DpoParams& p) {
    const auto d = derive(p);
    const double n = d.reservoir.n_res, m = d.reservoir.m_res;
    // M - N = sinh(r) e^{-r}, written without cancellation.
    const double m_minus_n = std::sinh(p.r) * std::exp(-p.r);
    NoiseModel nm;
    nm.cavity_plus = nm.cavity_minus = 2.0 * p.epsilon;
    nm.reservoir_plus = 2.0 * p.kappa * (m + n);
    nm.reservoir_minus = 2.0 * p.kappa * m_minus_n;
    nm.lambda_plus = d.critical ? 0.0 : p.kappa - 2.0 * p.epsilon;
    nm.lambda_minus = d.rates.lambda_minus;
    return nm;
}

/// Exact transition of dx = -(lambda/2) x dt + sqrt(D) dW over one step:
/// decay factor e^{-lambda dt/2} and noise standard deviation
/// sqrt((D/lambda)(1 - e^{-lambda dt})), which tends to sqrt(D dt) as lambda -> 0.
struct OuTransition {
    double decay = 1.0;
    double noise_sd = 0.0;

    OuTransition(double lambda, double diffusion, double dt) {
        if (diffusion < 0.0) throw std::invalid_argument("OU step: diffusion must be >= 0");
        if (!(dt > 0.0)) throw std::invalid_argument("OU step: dt must be > 0");
        decay = std::exp(-0.5 * lambda * dt);
        noise_sd = std::sqrt(diffusion * dt * variance_factor(lambda * dt));
    }

    /// (1 - e^{-x}) / x, with its series near zero.
    static double variance_factor(double x) {
        if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x;
        return -std::expm1(-x) / x;
    }

    double operator()(double x, double xi) const { return x * decay + noise_sd * xi; }
};

inline double exact_ou_step(double x, double lambda, double diffusion, double dt, double xi) {
    return OuTransition(lambda, diffusion, dt)(x, xi);
}

struct EngineOptions {
    std::size_t n_traj = 1000;
    double dt = 0.0;             ///< 0: 0.01 / kappa
    double t_end = 50.0;
    std::uint64_t seed = 1;
    /// Longest t_end accepted above threshold, where only transients exist.
    double transient_window = 0.0;
    std::size_t groups = 0;      ///< trajectory groups for jackknife; 0: min(n_traj, 100)
    unsigned threads = 0;        ///< 0: hardware concurrency

    double step(const DpoParams& p) const { return dt > 0.0 ? dt : 0.01 / p.kappa; }
    std::size_t n_steps(const DpoParams& p) const {
        return static_cast<std::size_t>(std::llround(t_end / step(p)));
    }
    std::size_t group_count() const {
        return groups > 0 ? std::min(groups, n_traj) : std::min<std::size_t>(n_traj, 100);
    }
};

/// One trajectory: states u_k, v_k at t_k = k dt for k = 0..n_steps and the
/// reservoir increments over [t_k, t_{k+1}) for k = 0..n_steps-1.
struct TrajectoryRecord {
    std::vector<double> u;
    std::vector<double> v;
    std::vector<double> dw_res_plus;
    std::vector<double> dw_res_minus;

    std::size_t n_steps() const { return dw_res_plus.size(); }
};

struct TrajectoryEnsemble {
    DpoParams params;
    EngineOptions options;
    double dt = 0.0;
    std::size_t n_steps = 0;
    std::vector<TrajectoryRecord> records;
};

inline void check_engine_inputs(const DpoParams& p, const EngineOptions& o) {
    validate(p);
    if (o.n_traj == 0) throw std::invalid_argument("ensemble: n_traj must be > 0");
    if (!(o.step(p) > 0.0) || !(o.t_end > 0.0))
        throw std::invalid_argument("ensemble: dt and t_end must be > 0");
    if (classify_regime(p) == Regime::above_threshold && o.t_end > o.transient_window)
        throw DivergenceError("ensemble: above threshold, t_end " + std::to_string(o.t_end) +
                              " exceeds the confirmed transient window " +
                              std::to_string(o.transient_window));
}

/// Integrates one trajectory from the vacuum (u = v = 0). The stream of
/// trajectory `index` depends only on (seed, index, step).
inline void simulate_trajectory(const DpoParams& p, const EngineOptions& o, std::size_t index,
                                TrajectoryRecord& rec) {
    const NoiseModel nm = noise_model(p);
    const double dt = o.step(p);
    const std::size_t steps = o.n_steps(p);
    const OuTransition plus(nm.lambda_plus, nm.total_plus(), dt);
    const OuTransition minus(nm.lambda_minus, nm.total_minus(), dt);
    const double sd_cp = std::sqrt(nm.cavity_plus * dt), sd_cm = std::sqrt(nm.cavity_minus * dt);
    const double sd_rp = std::sqrt(nm.reservoir_plus * dt), sd_rm = std::sqrt(nm.reservoir_minus * dt);
    const double tot_p = std::sqrt(nm.total_plus() * dt), tot_m = std::sqrt(nm.total_minus() * dt);

    rec.u.assign(steps + 1, 0.0);
    rec.v.assign(steps + 1, 0.0);
    rec.dw_res_plus.assign(steps, 0.0);
    rec.dw_res_minus.assign(steps, 0.0);
    if (tot_p == 0.0 && tot_m == 0.0) return;

    double u = 0.0, v = 0.0;
    for (std::size_t k = 0; k < steps; ++k) {
        const auto z = rng::normals4(o.seed, index, k);
        const double wcp = sd_cp * z[0], wcm = sd_cm * z[1];
        const double wrp = sd_rp * z[2], wrm = sd_rm * z[3];
        // The combined increment, normalized, drives the exact transition.
        u = plus(u, tot_p > 0.0 ? (wcp + wrp) / tot_p : 0.0);
        v = minus(v, tot_m > 0.0 ? (wcm + wrm) / tot_m : 0.0);
        rec.dw_res_plus[k] = wrp;
        rec.dw_res_minus[k] = wrm;
        rec.u[k + 1] = u;
        rec.v[k + 1] = v;
    }
}

/// Runs `work(group)` for every group on a pool of threads. Each group is
/// handled by exactly one thread, so per-group results are scheduling independent.
inline void parallel_groups(std::size_t groups, unsigned threads,
                            const std::function<void(std::size_t)>& work) {
    unsigned n = threads > 0 ? threads : std::max(1u, std::thread::hardware_concurrency());
    n = static_cast<unsigned>(std::min<std::size_t>(n, groups));
    if (n <= 1) {
        for (std::size_t g = 0; g < groups; ++g) work(g);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    std::exception_ptr failure;
    std::atomic<bool> failed{false};
    for (unsigned t = 0; t < n; ++t)
        pool.emplace_back([&] {
            for (std::size_t g; (g = next.fetch_add(1)) < groups;) {
                try {
                    work(g);
                } catch (...) {
                    if (!failed.exchange(true)) failure = std::current_exception();
                }
            }
        });
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

/// Trajectory index range [first, last) of group g.
inline std::pair<std::size_t, std::size_t> group_range(std::size_t g, std::size_t groups,
                                                       std::size_t n_traj) {
    return {g * n_traj / groups, (g + 1) * n_traj / groups};
}

/// Streams the ensemble through `visit(group, index, record)` without keeping
/// records alive. Trajectories of one group are visited in index order.
template <class Visitor>
void for_each_trajectory(const DpoParams& p, const EngineOptions& o, Visitor&& visit) {
    check_engine_inputs(p, o);
    const std::size_t groups = o.group_count();
    parallel_groups(groups, o.threads, [&](std::size_t g) {
        TrajectoryRecord rec;
        const auto [first, last] = group_range(g, groups, o.n_traj);
        for (std::size_t i = first; i < last; ++i) {
            simulate_trajectory(p, o, i, rec);
            visit(g, i, rec);
        }
    });
}

/// Materialized ensemble; memory grows as n_traj * n_steps.
inline TrajectoryEnsemble simulate_ensemble(const DpoParams& p, const EngineOptions& o) {
    TrajectoryEnsemble ens;
    ens.params = p;
    ens.options = o;
    ens.dt = o.step(p);
    ens.n_steps = o.n_steps(p);
    ens.records.resize(o.n_traj);
    for_each_trajectory(p, o, [&](std::size_t, std::size_t i, const TrajectoryRecord& rec) {
        ens.records[i] = rec;
    });
    return ens;
}

/// Output-field quadrature record u_out,k = sqrt(kappa) u_k - dW_R,k / (sqrt(kappa) dt),
/// k = 0..n_steps-1. The reservoir term is a white-noise density per step.
struct OutputRecord {
    std::vector<double> u_out;
    std::vector<double> v_out;
};

inline void output_record(const TrajectoryRecord& rec, double kappa, double dt, OutputRecord& out) {
    const std::size_t n = rec.n_steps();
    const double sk = std::sqrt(kappa);
    const double scale = 1.0 / (sk * dt);
    out.u_out.resize(n);
    out.v_out.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        out.u_out[k] = sk * rec.u[k] - scale * rec.dw_res_plus[k];
        out.v_out[k] = sk * rec.v[k] - scale * rec.dw_res_minus[k];
    }
}

inline std::vector<OutputRecord> output_records(const TrajectoryEnsemble& ens) {
    std::vector<OutputRecord> out(ens.records.size());
    for (std::size_t i = 0; i < ens.records.size(); ++i)
        output_record(ens.records[i], ens.params.kappa, ens.dt, out[i]);
    return out;
}

}  // namespace dpo
