#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "dpo/analytic.hpp"
#include "dpo/sde_engine.hpp"

namespace dpo {

/// An estimator could not produce a trustworthy result (short window,
/// undecayed correlation, poor exponential fit).
class EstimationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class CorrelationKind {
    cavity_plus,
    cavity_minus,
    output_plus,
    output_minus,
    cavity_power,
    output_power,
};

inline const char* to_string(CorrelationKind k) {
    switch (k) {
    case CorrelationKind::cavity_plus: return "cavity-quadrature-plus";
    case CorrelationKind::cavity_minus: return "cavity-quadrature-minus";
    case CorrelationKind::output_plus: return "output-quadrature-plus";
    case CorrelationKind::output_minus: return "output-quadrature-minus";
    case CorrelationKind::cavity_power: return "cavity-power";
    case CorrelationKind::output_power: return "output-power";
    }
    return "unknown";
}

inline bool is_output(CorrelationKind k) {
    return k == CorrelationKind::output_plus || k == CorrelationKind::output_minus ||
           k == CorrelationKind::output_power;
}

inline bool is_minus(CorrelationKind k) {
    return k == CorrelationKind::cavity_minus || k == CorrelationKind::output_minus;
}

// ---------------------------------------------------------------------------
// Jackknife

/// Standard error from leave-one-group-out replicates.
inline double jackknife_error(std::span<const double> replicates) {
    const double g = static_cast<double>(replicates.size());
    if (replicates.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mean = std::accumulate(replicates.begin(), replicates.end(), 0.0) / g;
    double ss = 0.0;
    for (double r : replicates) ss += (r - mean) * (r - mean);
    return std::sqrt((g - 1.0) / g * ss);
}

struct Estimate {
    double value = 0.0;
    double std_err = 0.0;

    /// |value - target| <= k * std_err
    bool within(double target, double k = 3.0) const { return std::abs(value - target) <= k * std_err; }
};

// ---------------------------------------------------------------------------
// Lagged correlations

struct CorrelationEstimate {
    CorrelationKind kind = CorrelationKind::cavity_plus;
    double dt = 0.0;
    std::vector<std::size_t> lag_steps;
    std::vector<double> lags;
    std::vector<double> values;
    std::vector<double> std_errs;
    /// replicates[g][l]: the estimate with trajectory group g left out.
    std::vector<std::vector<double>> replicates;

    std::size_t size() const { return values.size(); }

    /// Applies a scalar functional to the estimate and to every replicate.
    Estimate apply(const std::function<double(std::span<const double>)>& f) const {
        std::vector<double> reps(replicates.size());
        for (std::size_t g = 0; g < replicates.size(); ++g) reps[g] = f(replicates[g]);
        return {f(values), jackknife_error(reps)};
    }
};

/// Positive lag grid in steps: every step up to `dense`, then every `stride`
/// steps, always ending at max_steps.
inline std::vector<std::size_t> make_lag_grid(std::size_t max_steps, std::size_t dense = 16,
                                              std::size_t stride = 1) {
    std::vector<std::size_t> lags;
    stride = std::max<std::size_t>(stride, 1);
    for (std::size_t j = 1; j <= max_steps; j = j < dense ? j + 1 : j + stride) lags.push_back(j);
    if (lags.empty() || lags.back() != max_steps) lags.push_back(max_steps);
    return lags;
}

struct AccumulatorConfig {
    /// Basic series to accumulate; power kinds are formed from plus/minus pairs.
    std::vector<CorrelationKind> series{CorrelationKind::cavity_plus, CorrelationKind::cavity_minus,
                                        CorrelationKind::output_plus, CorrelationKind::output_minus};
    double max_lag = 0.0;     ///< time; 0: 20 / lambda_plus
    double window = 0.0;      ///< stationary tail of each trajectory; 0: 100 / lambda_plus
    std::size_t dense_lags = 16;
    std::size_t lag_stride = 1;
    std::size_t origin_stride = 1;
};

/// Accumulates time-and-ensemble averaged lag products per trajectory group.
/// Cavity series include lag 0; output series start at lag dt, since their
/// equal-time value carries the white-noise floor of the record.
class CorrelationAccumulator {
public:
    CorrelationAccumulator(const DpoParams& p, const EngineOptions& engine, AccumulatorConfig cfg)
        : cfg_(std::move(cfg)), kappa_(p.kappa), dt_(engine.step(p)), n_steps_(engine.n_steps(p)),
          groups_(engine.group_count()) {
        if (groups_ < 2) throw EstimationError("correlation: need at least two trajectory groups");
        const NoiseModel nm = noise_model(p);
        const double slow = std::min(nm.lambda_plus, nm.lambda_minus);
        if (cfg_.max_lag <= 0.0) {
            if (!(slow > 0.0)) throw EstimationError("correlation: max_lag required at critical point");
            cfg_.max_lag = 20.0 / slow;
        }
        if (cfg_.window <= 0.0) {
            if (!(slow > 0.0)) throw EstimationError("correlation: window required at critical point");
            cfg_.window = 100.0 / slow;
        }
        if (cfg_.window < cfg_.max_lag)
            throw EstimationError("correlation: stationarity window shorter than max_lag");
        const double t_end = static_cast<double>(n_steps_) * dt_;
        if (cfg_.window > t_end + 1e-9 * t_end)
            throw EstimationError("correlation: window longer than the simulated time");
        const auto max_steps = static_cast<std::size_t>(std::llround(cfg_.max_lag / dt_));
        const auto win_steps = static_cast<std::size_t>(std::llround(cfg_.window / dt_));
        if (max_steps == 0) throw EstimationError("correlation: max_lag shorter than dt");
        lags_ = make_lag_grid(max_steps, cfg_.dense_lags, cfg_.lag_stride);
        start_ = n_steps_ - std::min(win_steps, n_steps_);
        for (auto k : cfg_.series) {
            if (k == CorrelationKind::cavity_power || k == CorrelationKind::output_power)
                throw EstimationError("correlation: power kinds are combined from plus/minus series");
        }
        slots_.assign(groups_, Slot(cfg_.series.size(), lags_.size() + 1));
        buffers_.resize(groups_);
    }

    const AccumulatorConfig& config() const { return cfg_; }
    std::size_t groups() const { return groups_; }

    /// Adds one trajectory to group g. Safe to call concurrently for distinct groups.
    void add(std::size_t g, const TrajectoryRecord& rec) {
        Slot& slot = slots_.at(g);
        auto& buf = buffers_.at(g);
        for (std::size_t s = 0; s < cfg_.series.size(); ++s) {
            const CorrelationKind kind = cfg_.series[s];
            std::span<const double> x;
            if (kind == CorrelationKind::cavity_plus) x = rec.u;
            else if (kind == CorrelationKind::cavity_minus) x = rec.v;
            else {
                const auto& dw = kind == CorrelationKind::output_plus ? rec.dw_res_plus : rec.dw_res_minus;
                const auto& c = kind == CorrelationKind::output_plus ? rec.u : rec.v;
                const double sk = std::sqrt(kappa_), scale = 1.0 / (sk * dt_);
                buf.resize(dw.size());
                for (std::size_t k = 0; k < dw.size(); ++k) buf[k] = sk * c[k] - scale * dw[k];
                x = buf;
            }
            accumulate(slot, s, x, is_output(kind));
        }
    }

    CorrelationEstimate estimate(CorrelationKind kind) const {
        if (kind == CorrelationKind::cavity_power || kind == CorrelationKind::output_power) {
            const bool out = kind == CorrelationKind::output_power;
            auto plus = estimate(out ? CorrelationKind::output_plus : CorrelationKind::cavity_plus);
            auto minus = estimate(out ? CorrelationKind::output_minus : CorrelationKind::cavity_minus);
            return combine_power(plus, minus);
        }
        const auto it = std::find(cfg_.series.begin(), cfg_.series.end(), kind);
        if (it == cfg_.series.end())
            throw EstimationError(std::string("correlation: series not accumulated: ") + to_string(kind));
        const std::size_t s = static_cast<std::size_t>(it - cfg_.series.begin());
        const bool out = is_output(kind);

        CorrelationEstimate est;
        est.kind = kind;
        est.dt = dt_;
        const std::size_t first = out ? 1 : 0;
        for (std::size_t l = first; l <= lags_.size(); ++l) {
            const std::size_t steps = l == 0 ? 0 : lags_[l - 1];
            est.lag_steps.push_back(steps);
            est.lags.push_back(static_cast<double>(steps) * dt_);
        }
        Totals tot = totals(s);
        est.values = covariances(tot);
        est.replicates.resize(groups_);
        for (std::size_t g = 0; g < groups_; ++g) {
            Totals minus_g = tot;
            const auto& sl = slots_[g];
            minus_g.sum -= sl.sum[s];
            minus_g.n -= sl.n[s];
            for (std::size_t l = 0; l < minus_g.prod.size(); ++l) {
                minus_g.prod[l] -= sl.prod[s][l];
                minus_g.count[l] -= sl.count[s][l];
            }
            est.replicates[g] = covariances(minus_g);
        }
        if (out) {
            est.values.erase(est.values.begin());
            for (auto& r : est.replicates) r.erase(r.begin());
        }
        fill_errors(est);
        return est;
    }

    /// Power correlation <alpha*(t) alpha(t + tau)> = (c_plus - c_minus) / 4.
    static CorrelationEstimate combine_power(const CorrelationEstimate& plus,
                                             const CorrelationEstimate& minus) {
        if (plus.lag_steps != minus.lag_steps || plus.replicates.size() != minus.replicates.size())
            throw EstimationError("power correlation: plus/minus grids differ");
        CorrelationEstimate est = plus;
        est.kind = is_output(plus.kind) ? CorrelationKind::output_power : CorrelationKind::cavity_power;
        for (std::size_t l = 0; l < est.size(); ++l)
            est.values[l] = 0.25 * (plus.values[l] - minus.values[l]);
        for (std::size_t g = 0; g < est.replicates.size(); ++g)
            for (std::size_t l = 0; l < est.size(); ++l)
                est.replicates[g][l] = 0.25 * (plus.replicates[g][l] - minus.replicates[g][l]);
        fill_errors(est);
        return est;
    }

    static void fill_errors(CorrelationEstimate& est) {
        est.std_errs.assign(est.size(), 0.0);
        std::vector<double> column(est.replicates.size());
        for (std::size_t l = 0; l < est.size(); ++l) {
            for (std::size_t g = 0; g < est.replicates.size(); ++g) column[g] = est.replicates[g][l];
            est.std_errs[l] = jackknife_error(column);
        }
    }

private:
    struct Slot {
        Slot(std::size_t series, std::size_t lags)
            : sum(series), n(series), prod(series, std::vector<double>(lags)),
              count(series, std::vector<double>(lags)) {}
        std::vector<double> sum;
        std::vector<double> n;
        std::vector<std::vector<double>> prod;   ///< [series][0 = lag zero, then grid]
        std::vector<std::vector<double>> count;
    };

    struct Totals {
        double sum = 0.0;
        double n = 0.0;
        std::vector<double> prod;
        std::vector<double> count;
    };

    Totals totals(std::size_t s) const {
        Totals t;
        t.prod.assign(lags_.size() + 1, 0.0);
        t.count.assign(lags_.size() + 1, 0.0);
        for (const auto& sl : slots_) {
            t.sum += sl.sum[s];
            t.n += sl.n[s];
            for (std::size_t l = 0; l <= lags_.size(); ++l) {
                t.prod[l] += sl.prod[s][l];
                t.count[l] += sl.count[s][l];
            }
        }
        return t;
    }

    static std::vector<double> covariances(const Totals& t) {
        const double mean = t.n > 0.0 ? t.sum / t.n : 0.0;
        std::vector<double> out(t.prod.size());
        for (std::size_t l = 0; l < out.size(); ++l)
            out[l] = t.count[l] > 0.0 ? t.prod[l] / t.count[l] - mean * mean : 0.0;
        return out;
    }

    void accumulate(Slot& slot, std::size_t s, std::span<const double> x, bool output) const {
        if (x.empty() || start_ >= x.size()) return;
        const std::size_t last = x.size() - 1;
        for (std::size_t k = start_; k <= last; ++k) slot.sum[s] += x[k];
        slot.n[s] += static_cast<double>(last - start_ + 1);
        const std::size_t stride = std::max<std::size_t>(cfg_.origin_stride, 1);
        for (std::size_t l = output ? 1 : 0; l <= lags_.size(); ++l) {
            const std::size_t j = l == 0 ? 0 : lags_[l - 1];
            if (start_ + j > last) continue;
            double acc = 0.0;
            std::size_t cnt = 0;
            for (std::size_t k = start_; k + j <= last; k += stride, ++cnt) acc += x[k + j] * x[k];
            slot.prod[s][l] += acc;
            slot.count[s][l] += static_cast<double>(cnt);
        }
    }

    AccumulatorConfig cfg_;
    double kappa_;
    double dt_;
    std::size_t n_steps_;
    std::size_t groups_;
    std::vector<std::size_t> lags_;
    std::size_t start_ = 0;
    std::vector<Slot> slots_;
    std::vector<std::vector<double>> buffers_;  ///< per-group scratch for output records
};

/// Simulates the ensemble and streams every trajectory into an accumulator.
inline CorrelationAccumulator run_correlations(const DpoParams& p, const EngineOptions& engine,
                                               AccumulatorConfig cfg = {}) {
    CorrelationAccumulator acc(p, engine, std::move(cfg));
    for_each_trajectory(p, engine, [&](std::size_t g, std::size_t, const TrajectoryRecord& rec) {
        acc.add(g, rec);
    });
    return acc;
}

/// Lagged autocorrelation of one series from a materialized ensemble. The
/// last `window` time units of each trajectory are treated as stationary.
inline CorrelationEstimate lagged_autocorrelation(const TrajectoryEnsemble& ens, CorrelationKind kind,
                                                  double max_lag, double window,
                                                  std::size_t lag_stride = 1) {
    AccumulatorConfig cfg;
    cfg.max_lag = max_lag;
    cfg.window = window;
    cfg.lag_stride = lag_stride;
    if (kind == CorrelationKind::cavity_power) cfg.series = {CorrelationKind::cavity_plus, CorrelationKind::cavity_minus};
    else if (kind == CorrelationKind::output_power) cfg.series = {CorrelationKind::output_plus, CorrelationKind::output_minus};
    else cfg.series = {kind};
    CorrelationAccumulator acc(ens.params, ens.options, cfg);
    const std::size_t groups = acc.groups();
    for (std::size_t g = 0; g < groups; ++g) {
        const auto [first, last] = group_range(g, groups, ens.records.size());
        for (std::size_t i = first; i < last; ++i) acc.add(g, ens.records[i]);
    }
    return acc.estimate(kind);
}

// ---------------------------------------------------------------------------
// Exponential fits

struct ExponentialFit {
    double amplitude = 0.0;
    double rate = 0.0;       ///< c(tau) = amplitude * exp(-rate * tau)
    double r_squared = 1.0;
    double ss_res = 0.0;
    double ss_noise = 0.0;   ///< sum of squared standard errors over the fitted lags
};

/// Least-squares fit of A exp(-g tau) over the first `points` entries: the
/// amplitude is solved in closed form for each trial rate and the rate is
/// found by Brent minimization over log g.
inline ExponentialFit fit_exponential(std::span<const double> taus, std::span<const double> ys,
                                      std::size_t points) {
    points = std::min(points, std::min(taus.size(), ys.size()));
    if (points < 3) throw EstimationError("exponential fit: need at least three lags");
    ExponentialFit fit;
    if (std::all_of(ys.begin(), ys.begin() + points, [](double y) { return y == 0.0; })) return fit;

    const double span = taus[points - 1] - taus[0];
    const double step = taus[1] - taus[0];
    auto amplitude = [&](double g) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < points; ++i) {
            const double e = std::exp(-g * taus[i]);
            num += ys[i] * e;
            den += e * e;
        }
        return num / den;
    };
    auto residual = [&](double log_g) {
        const double g = std::exp(log_g);
        const double a = amplitude(g);
        double ss = 0.0;
        for (std::size_t i = 0; i < points; ++i) {
            const double d = ys[i] - a * std::exp(-g * taus[i]);
            ss += d * d;
        }
        return ss;
    };
    const double lo = std::log(1e-3 / span), hi = std::log(2.0 / step);
    const auto [log_g, ss] = boost::math::tools::brent_find_minima(residual, lo, hi, 40);
    fit.rate = std::exp(log_g);
    fit.amplitude = amplitude(fit.rate);
    fit.ss_res = ss;
    const double mean = std::accumulate(ys.begin(), ys.begin() + points, 0.0) / double(points);
    double ss_tot = 0.0;
    for (std::size_t i = 0; i < points; ++i) ss_tot += (ys[i] - mean) * (ys[i] - mean);
    fit.r_squared = ss_tot > 0.0 ? 1.0 - ss / ss_tot : 1.0;
    return fit;
}

/// Number of leading lags with tau <= tau_max (all when tau_max <= 0).
inline std::size_t lags_within(const CorrelationEstimate& c, double tau_max) {
    if (tau_max <= 0.0) return c.size();
    std::size_t n = 0;
    while (n < c.size() && c.lags[n] <= tau_max * (1.0 + 1e-12)) ++n;
    return n;
}

struct FitEstimate {
    ExponentialFit fit;
    Estimate amplitude;
    Estimate rate;
};

inline constexpr double kMinRSquared = 0.99;

/// Exponential fit of a correlation estimate with jackknife errors. The fit is
/// accepted when R^2 >= 0.99, or when the residuals are no larger than four
/// times the summed sampling variance (the lags are noise dominated).
inline FitEstimate fit_correlation(const CorrelationEstimate& c, double tau_max) {
    const std::size_t points = lags_within(c, tau_max);
    FitEstimate out;
    out.fit = fit_exponential(c.lags, c.values, points);
    for (std::size_t i = 0; i < points; ++i) out.fit.ss_noise += c.std_errs[i] * c.std_errs[i];
    if (out.fit.r_squared < kMinRSquared && out.fit.ss_res > 4.0 * out.fit.ss_noise)
        throw EstimationError("exponential fit: R^2 = " + std::to_string(out.fit.r_squared) +
                              " and residuals exceed sampling noise (" + to_string(c.kind) + ")");
    std::vector<double> amps(c.replicates.size()), rates(c.replicates.size());
    for (std::size_t g = 0; g < c.replicates.size(); ++g) {
        const auto f = fit_exponential(c.lags, c.replicates[g], points);
        amps[g] = f.amplitude;
        rates[g] = f.rate;
    }
    out.amplitude = {out.fit.amplitude, jackknife_error(amps)};
    out.rate = {out.fit.rate, jackknife_error(rates)};
    return out;
}

// ---------------------------------------------------------------------------
// Equal-time quantities

struct MomentEstimate {
    Estimate mean_photon;
    Estimate anomalous;
    Field field = Field::cavity;
};

/// Cavity moments from the lag-zero quadrature covariances:
/// <a* a> = (<u^2> - <v^2>) / 4 and <a^2> = (<u^2> + <v^2>) / 4.
inline MomentEstimate cavity_moments_estimate(const CorrelationEstimate& plus,
                                              const CorrelationEstimate& minus) {
    if (plus.kind != CorrelationKind::cavity_plus || minus.kind != CorrelationKind::cavity_minus ||
        plus.lag_steps.empty() || plus.lag_steps[0] != 0 || minus.lag_steps[0] != 0)
        throw EstimationError("cavity moments: need cavity plus/minus series with lag 0");
    auto combine = [&](double sign) {
        std::vector<double> reps(plus.replicates.size());
        for (std::size_t g = 0; g < reps.size(); ++g)
            reps[g] = 0.25 * (plus.replicates[g][0] + sign * minus.replicates[g][0]);
        return Estimate{0.25 * (plus.values[0] + sign * minus.values[0]), jackknife_error(reps)};
    };
    return {combine(-1.0), combine(+1.0), Field::cavity};
}

struct OutputMomentOptions {
    double fit_tau_max_plus = 0.0;   ///< 0: every lag
    double fit_tau_max_minus = 0.0;
};

/// Equal-time output moments. The continuous part of each output quadrature
/// correlation is extrapolated to tau = 0 by an exponential fit; the
/// equal-time reservoir terms then add N to <a_out* a_out> and M to <a_out^2>.
inline MomentEstimate equal_time_output_moments(const CorrelationEstimate& plus,
                                                const CorrelationEstimate& minus,
                                                const ReservoirMoments& res,
                                                const OutputMomentOptions& opt = {}) {
    if (plus.kind != CorrelationKind::output_plus || minus.kind != CorrelationKind::output_minus)
        throw EstimationError("output moments: need output plus/minus correlations");
    const auto fp = fit_correlation(plus, opt.fit_tau_max_plus);
    const auto fm = fit_correlation(minus, opt.fit_tau_max_minus);
    const std::size_t pp = lags_within(plus, opt.fit_tau_max_plus);
    const std::size_t pm = lags_within(minus, opt.fit_tau_max_minus);
    std::vector<double> reps_n(plus.replicates.size()), reps_m(plus.replicates.size());
    for (std::size_t g = 0; g < plus.replicates.size(); ++g) {
        const double ap = fit_exponential(plus.lags, plus.replicates[g], pp).amplitude;
        const double am = fit_exponential(minus.lags, minus.replicates[g], pm).amplitude;
        reps_n[g] = 0.25 * (ap - am);
        reps_m[g] = 0.25 * (ap + am);
    }
    const double ap = fp.amplitude.value, am = fm.amplitude.value;
    return {{0.25 * (ap - am) + res.n_res, jackknife_error(reps_n)},
            {0.25 * (ap + am) + res.m_res, jackknife_error(reps_m)},
            Field::output};
}

/// Output quadrature variance e^{+-2r} +/- A, with A the tau -> 0 intercept of
/// the continuous part of the output correlation.
inline Estimate equal_time_output_variance(const CorrelationEstimate& c, double floor,
                                           double fit_tau_max = 0.0) {
    if (c.kind != CorrelationKind::output_plus && c.kind != CorrelationKind::output_minus)
        throw EstimationError("output variance: need an output quadrature correlation");
    const double sign = is_minus(c.kind) ? -1.0 : 1.0;
    const auto f = fit_correlation(c, fit_tau_max);
    return {floor + sign * f.amplitude.value, f.amplitude.std_err};
}

// ---------------------------------------------------------------------------
// Spectra

struct SpectrumOptions {
    std::size_t tail_lags = 5;       ///< lags averaged in the decay check
    double gap_fit_tau = 0.0;        ///< fit range for the [0, dt) continuation; 0: 32 lags
};

struct SpectrumEstimate {
    SpectrumCurve curve;
    std::vector<double> std_errs;
};

namespace detail {

/// 2 Re int e^{i w tau} c(tau) dtau over the lag grid (trapezoid), plus the
/// analytic [0, first lag) piece of the fitted exponential when the grid does
/// not start at zero.
inline double fourier_integral(std::span<const double> lags, std::span<const double> values,
                               double omega, double gap_amp, double gap_rate) {
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < lags.size(); ++i) {
        const double h = lags[i + 1] - lags[i];
        acc += 0.5 * h * (values[i] * std::cos(omega * lags[i]) + values[i + 1] * std::cos(omega * lags[i + 1]));
    }
    if (lags[0] > 0.0) {
        const std::complex<double> z(-gap_rate, omega);
        acc += (gap_amp * (std::exp(z * lags[0]) - 1.0) / z).real();
    }
    return 2.0 * acc;
}

}  // namespace detail

/// Spectrum floor +/- 2 Re int_0^inf e^{i w tau} c(tau) dtau from a
/// correlation estimate (minus sign for the squeezed quadrature kinds).
inline SpectrumEstimate spectrum_from_correlation(const CorrelationEstimate& c,
                                                  std::span<const double> omegas, double floor,
                                                  const SpectrumOptions& opt = {}) {
    if (c.size() < 3) throw EstimationError("spectrum: too few lags");
    {
        const std::size_t tail = std::min(opt.tail_lags, c.size());
        const std::size_t from = c.size() - tail;
        auto tail_mean = [&](std::span<const double> v) {
            return std::accumulate(v.begin() + from, v.end(), 0.0) / double(tail);
        };
        const Estimate t = c.apply(tail_mean);
        if (std::abs(t.value) >= 2.0 * t.std_err && t.value != 0.0)
            throw EstimationError("spectrum: correlation not decayed by max_lag " +
                                  std::to_string(c.lags.back()) + " (tail " + std::to_string(t.value) +
                                  " +/- " + std::to_string(t.std_err) + "); use a longer max_lag");
    }
    const double sign = is_minus(c.kind) ? -1.0 : 1.0;
    const bool gap = c.lags[0] > 0.0;
    const double gap_tau = opt.gap_fit_tau > 0.0 ? opt.gap_fit_tau : c.lags[std::min<std::size_t>(31, c.size() - 1)];
    const std::size_t gap_points = lags_within(c, gap_tau);

    auto fit_gap = [&](std::span<const double> v) -> std::pair<double, double> {
        if (!gap) return {0.0, 0.0};
        const auto f = fit_exponential(c.lags, v, gap_points);
        return {f.amplitude, f.rate};
    };
    if (gap) (void)fit_correlation(c, gap_tau);

    SpectrumEstimate out;
    out.curve.omegas.assign(omegas.begin(), omegas.end());
    out.curve.floor = floor;
    switch (c.kind) {
    case CorrelationKind::cavity_plus:
    case CorrelationKind::output_plus: out.curve.kind = SpectrumKind::squeezing_plus; break;
    case CorrelationKind::cavity_minus:
    case CorrelationKind::output_minus: out.curve.kind = SpectrumKind::squeezing_minus; break;
    case CorrelationKind::cavity_power: out.curve.kind = SpectrumKind::power_cavity; break;
    case CorrelationKind::output_power: out.curve.kind = SpectrumKind::power_output; break;
    }
    const auto [amp, rate] = fit_gap(c.values);
    std::vector<std::pair<double, double>> rep_gap(c.replicates.size());
    for (std::size_t g = 0; g < c.replicates.size(); ++g) rep_gap[g] = fit_gap(c.replicates[g]);

    std::vector<double> reps(c.replicates.size());
    for (double w : omegas) {
        out.curve.values.push_back(floor + sign * detail::fourier_integral(c.lags, c.values, w, amp, rate));
        for (std::size_t g = 0; g < reps.size(); ++g)
            reps[g] = floor + sign * detail::fourier_integral(c.lags, c.replicates[g], w,
                                                              rep_gap[g].first, rep_gap[g].second);
        out.std_errs.push_back(jackknife_error(reps));
    }
    return out;
}

}  // namespace dpo
