#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpo/analytic.hpp"
#include "dpo/estimators.hpp"
#include "dpo/fock_oracle.hpp"
#include "dpo/photon_statistics.hpp"
#include "dpo/sde_engine.hpp"

namespace dpo::validation {

/// Deliberate corruption of one reference formula, for negative controls.
enum class Fault { none, cavity_moments, output_moments, photon_distribution, sum_rule };

inline Fault parse_fault(const std::string& s) {
    if (s.empty() || s == "none") return Fault::none;
    if (s == "cavity-moments") return Fault::cavity_moments;
    if (s == "output-moments") return Fault::output_moments;
    if (s == "photon-distribution") return Fault::photon_distribution;
    if (s == "sum-rule") return Fault::sum_rule;
    throw std::invalid_argument("unknown fault '" + s + "'");
}

enum class Status { pass, fail, documented_violation };

inline const char* to_string(Status s) {
    switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::documented_violation: return "VIOLATED(documented)";
    }
    return "?";
}

struct Check {
    std::string name;
    double measured = 0.0;
    double reference = 0.0;
    double deviation = 0.0;
    double tolerance = 0.0;  ///< absolute, or a multiple of std_err when std_err > 0
    double std_err = 0.0;
    Status status = Status::pass;
};

struct CampaignOptions {
    DpoParams params{0.8, 0.2, 0.0};
    std::size_t n_traj = 2000;
    double dt = 0.0;
    std::uint64_t seed = 1;
    unsigned threads = 0;
    Fault fault = Fault::none;
};

namespace detail {

inline Check absolute(std::string name, double measured, double reference, double tol) {
    Check c{std::move(name), measured, reference, std::abs(measured - reference), tol, 0.0, Status::pass};
    c.status = c.deviation <= tol ? Status::pass : Status::fail;
    return c;
}

inline Check statistical(std::string name, const Estimate& e, double reference, double k = 3.0) {
    Check c{std::move(name), e.value, reference, std::abs(e.value - reference), k, e.std_err, Status::pass};
    c.status = std::isfinite(e.std_err) && c.deviation <= k * e.std_err ? Status::pass : Status::fail;
    return c;
}

inline double corrupt(double x, bool on) { return on ? x * 1.01 + 1e-3 : x; }

}  // namespace detail

/// Cross-checks every route against the closed forms at one parameter point:
/// Fock oracle vs cavity moments, Monte Carlo vs cavity and output moments and
/// spectra, P(n) vs its series oracle, and the spectral sum rules.
inline std::vector<Check> run_campaign(const CampaignOptions& opt) {
    const DpoParams& p = opt.params;
    const auto d = require_below_threshold(p, "validation");
    const Fault f = opt.fault;
    std::vector<Check> out;

    const auto cav = cavity_moments_ss(p);
    const auto outm = output_moments_ss(p);
    const auto res = d.reservoir;

    {
        FockOptions fo;
        fo.auto_step = true;
        const auto rho = evolve_to_steady(p, fo);
        const auto m = moments_from_rho(rho.rho);
        out.push_back(detail::absolute("fock cavity mean photon", m.moments.mean_photon,
                                       detail::corrupt(cav.mean_photon, f == Fault::cavity_moments), 1e-4));
        out.push_back(detail::absolute("fock cavity anomalous", m.moments.anomalous,
                                       detail::corrupt(cav.anomalous, f == Fault::cavity_moments), 1e-4));
        const auto gauss = photon_number_distribution(gaussian_state(cav), 15);
        double worst = 0.0;
        for (std::size_t n = 0; n <= 15 && n < m.diagonal.probs.size(); ++n)
            worst = std::max(worst, std::abs(m.diagonal.probs[n] - gauss.probs[n]));
        out.push_back(detail::absolute("fock diagonal vs gaussian P(n), n<=15", worst, 0.0, 1e-4));
    }

    {
        EngineOptions eo;
        eo.n_traj = opt.n_traj;
        eo.dt = opt.dt;
        eo.seed = opt.seed;
        eo.threads = opt.threads;
        const double slow = d.rates.lambda_plus;
        AccumulatorConfig cfg;
        cfg.max_lag = 20.0 / slow;
        cfg.window = 1.5 * cfg.max_lag;
        cfg.lag_stride = 10;
        cfg.origin_stride = 4;
        eo.t_end = 10.0 / slow + cfg.window;
        const auto acc = run_correlations(p, eo, cfg);
        const auto cm = cavity_moments_estimate(acc.estimate(CorrelationKind::cavity_plus),
                                                acc.estimate(CorrelationKind::cavity_minus));
        out.push_back(detail::statistical("mc cavity mean photon", cm.mean_photon,
                                          detail::corrupt(cav.mean_photon, f == Fault::cavity_moments)));
        out.push_back(detail::statistical("mc cavity anomalous", cm.anomalous,
                                          detail::corrupt(cav.anomalous, f == Fault::cavity_moments)));
        const auto om = equal_time_output_moments(acc.estimate(CorrelationKind::output_plus),
                                                  acc.estimate(CorrelationKind::output_minus), res);
        out.push_back(detail::statistical("mc output mean photon", om.mean_photon,
                                          detail::corrupt(outm.mean_photon, f == Fault::output_moments)));
        out.push_back(detail::statistical("mc output anomalous", om.anomalous,
                                          detail::corrupt(outm.anomalous, f == Fault::output_moments)));
        const std::vector<double> zero{0.0};
        const auto sq = squeeze_factors(p.r);
        const auto sm = spectrum_from_correlation(acc.estimate(CorrelationKind::output_minus), zero, sq.second);
        out.push_back(detail::statistical("mc output squeezing spectrum S-(0)",
                                          {sm.curve.values[0], sm.std_errs[0]},
                                          squeezing_spectrum_out(p, zero, Branch::minus).values[0]));
        const auto sp = spectrum_from_correlation(acc.estimate(CorrelationKind::output_power), zero, res.n_res);
        out.push_back(detail::statistical("mc output power spectrum S(0)", {sp.curve.values[0], sp.std_errs[0]},
                                          power_spectrum(p, zero, Field::output).values[0]));
    }

    {
        const auto state = gaussian_state(outm);
        const auto pnd = adaptive_photon_distribution(state);
        out.push_back(detail::absolute("P(n) tail bound", pnd.tail_bound, 0.0, 1e-10));
        const double nref = detail::corrupt(outm.mean_photon, f == Fault::photon_distribution);
        out.push_back(detail::absolute("P(n) mean vs output mean photon (relative)",
                                       nref > 0.0 ? pnd.mean() / nref - 1.0 : pnd.mean(), 0.0, 1e-6));
        const auto a = photon_number_distribution(state, 20);
        const auto b = pnd_oracle(state, 20);
        double worst = 0.0;
        for (std::size_t n = 0; n <= 20; ++n)
            if (a.probs[n] > 0.0) worst = std::max(worst, std::abs(a.probs[n] - b.probs[n]) / a.probs[n]);
        out.push_back(detail::absolute("P(n) closed form vs series oracle (relative, n<=20)", worst, 0.0, 1e-10));
    }

    {
        const std::vector<double> zero{0.0};
        const double cw = spectral_weight(power_spectrum(p, zero, Field::cavity));
        out.push_back(detail::absolute("sum rule cavity power spectrum", cw,
                                       detail::corrupt(cav.mean_photon, f == Fault::sum_rule), 1e-10));
        const double ow = spectral_weight(power_spectrum(p, zero, Field::output));
        out.push_back(detail::absolute(
            "sum rule output power spectrum (derived)", ow,
            detail::corrupt(outm.mean_photon, f == Fault::output_moments) - res.n_res, 1e-10));
        const double pw = spectral_weight(power_spectrum(p, zero, Field::output, PowerVariant::as_printed));
        Check printed = detail::absolute("sum rule output power spectrum (printed)", pw,
                                         outm.mean_photon - res.n_res, 1e-10);
        if (printed.status == Status::fail) printed.status = Status::documented_violation;
        out.push_back(printed);
    }
    return out;
}

inline bool all_passed(const std::vector<Check>& checks) {
    for (const auto& c : checks)
        if (c.status == Status::fail) return false;
    return true;
}

}  // namespace dpo::validation
