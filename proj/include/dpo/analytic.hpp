#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "dpo/core_model.hpp"

namespace dpo {

enum class Field { cavity, output };

inline const char* to_string(Field f) { return f == Field::cavity ? "cavity" : "output"; }

/// Quadrature branch: plus is the amplified quadrature a^dagger + a, minus the
/// squeezed one i(a^dagger - a).
enum class Branch { plus, minus };

inline const char* to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }

/// Placeholder written wherever a closed form diverges at the critical point.
inline constexpr double kDivergent = std::numeric_limits<double>::infinity();

/// Second-order normally ordered moments <a^dagger a> and <a^2> of a zero-mean field.
struct SteadyMoments {
    double mean_photon = 0.0;
    double anomalous = 0.0;
    Field field = Field::cavity;
};

struct QuadratureVariances {
    double var_plus = 0.0;  ///< kDivergent at the critical point
    double var_minus = 0.0;
    Field field = Field::cavity;
    bool plus_divergent = false;

    bool squeezed() const { return var_minus < 1.0; }
};

enum class SpectrumKind { squeezing_plus, squeezing_minus, power_cavity, power_output };

inline const char* to_string(SpectrumKind k) {
    switch (k) {
    case SpectrumKind::squeezing_plus: return "squeezing-plus";
    case SpectrumKind::squeezing_minus: return "squeezing-minus";
    case SpectrumKind::power_cavity: return "power-cavity";
    case SpectrumKind::power_output: return "power-output";
    }
    return "unknown";
}

/// Which form of the output power spectrum to evaluate. `as_printed` keeps the
/// second numerator as 1 - 2N + 2M; `derived_consistent` uses 2M - 2N - 1, the
/// term-by-term transform of the output field correlation.
enum class PowerVariant { as_printed, derived_consistent };

inline const char* to_string(PowerVariant v) {
    return v == PowerVariant::as_printed ? "printed" : "derived";
}

/// weight / (width^2 + 4 omega^2)
struct LorentzianTerm {
    double weight = 0.0;
    double width = 0.0;

    double operator()(double omega) const { return weight / (width * width + 4.0 * omega * omega); }
    /// Integral over the whole real line: pi weight / (2 width).
    double integral() const { return weight * std::numbers::pi / (2.0 * width); }
    /// Half width at half maximum in omega.
    double half_width() const { return width / 2.0; }
};

struct SpectrumCurve {
    std::vector<double> omegas;
    std::vector<double> values;
    double floor = 0.0;
    SpectrumKind kind = SpectrumKind::squeezing_minus;
    std::vector<LorentzianTerm> terms;
    std::vector<std::size_t> divergent;  ///< grid indices holding kDivergent
};

// ---------------------------------------------------------------------------
// Steady-state moments

inline SteadyMoments cavity_moments_ss(const DpoParams& p) {
    const auto d = require_below_threshold(p, "cavity moments");
    const double k = p.kappa, e = p.epsilon;
    const double n = d.reservoir.n_res, m = d.reservoir.m_res;
    const double den = k * k - 4.0 * e * e;
    return {(2.0 * e * e + k * (n * k + 2.0 * e * m)) / den,
            k * (2.0 * e * n + e + k * m) / den, Field::cavity};
}

inline SteadyMoments output_moments_ss(const DpoParams& p) {
    const auto d = require_below_threshold(p, "output moments");
    const double k = p.kappa, e = p.epsilon;
    const double n = d.reservoir.n_res, m = d.reservoir.m_res;
    const double den = k * k - 4.0 * e * e;
    const double mean = n + 2.0 * k * e * e / den + 2.0 * e * k * (2.0 * n * e + k * m) / den;
    const double anom = m + k * k * e / den + 2.0 * k * e * (k * n + 2.0 * e * m) / den;
    return {mean, anom, Field::output};
}

inline SteadyMoments moments_ss(const DpoParams& p, Field f) {
    return f == Field::cavity ? cavity_moments_ss(p) : output_moments_ss(p);
}

/// 1 + 2 nbar +/- 2 <a^2>, valid for any zero-mean field with real <a^2>.
inline QuadratureVariances variances_from_moments(const SteadyMoments& m) {
    return {1.0 + 2.0 * m.mean_photon + 2.0 * m.anomalous,
            1.0 + 2.0 * m.mean_photon - 2.0 * m.anomalous, m.field, false};
}

/// Closed-form quadrature variances. At the critical point the plus branch is
/// reported as kDivergent and the minus branch takes its finite limit.
inline QuadratureVariances quadrature_variances(const DpoParams& p, Field f) {
    const auto d = derive(p);
    const Regime regime = classify_regime(p);
    if (regime == Regime::above_threshold)
        throw DivergenceError("quadrature variances: above threshold");
    const auto [up, down] = squeeze_factors(p.r);
    const double k = p.kappa, e = p.epsilon;
    const double lp = d.rates.lambda_plus, lm = d.rates.lambda_minus;

    QuadratureVariances v;
    v.field = f;
    if (f == Field::output) {
        v.var_minus = down * (1.0 - 2.0 * e * k / lm);
        if (regime == Regime::critical) {
            v.var_plus = kDivergent;
            v.plus_divergent = true;
        } else {
            v.var_plus = up * (1.0 + 2.0 * e * k / lp);
        }
    } else {
        v.var_minus = down * k / lm;
        if (regime == Regime::critical) {
            v.var_plus = kDivergent;
            v.plus_divergent = true;
        } else {
            v.var_plus = up * k / lp;
        }
    }
    return v;
}

// ---------------------------------------------------------------------------
// Two-time correlations and spectra

/// Stationary <alpha_pm(t + tau) alpha_pm(t)> of the cavity quadrature variables.
inline double two_time_quadrature_corr(const DpoParams& p, double tau, Branch b) {
    if (!(tau >= 0.0)) throw ParameterError("tau must be >= 0");
    const auto d = derive(p);
    const Regime regime = classify_regime(p);
    if (regime == Regime::above_threshold || (regime == Regime::critical && b == Branch::plus))
        throw DivergenceError("two-time correlation diverges");
    const double n = d.reservoir.n_res, m = d.reservoir.m_res;
    const double lambda = b == Branch::plus ? d.rates.lambda_plus : d.rates.lambda_minus;
    const double diffusion = 2.0 * (p.kappa * (b == Branch::plus ? m + n : m - n) + p.epsilon);
    return diffusion / lambda * std::exp(-0.5 * lambda * tau);
}

namespace detail {

inline SpectrumCurve evaluate(std::span<const double> omegas, double floor, SpectrumKind kind,
                              std::vector<LorentzianTerm> terms) {
    SpectrumCurve c;
    c.omegas.assign(omegas.begin(), omegas.end());
    c.floor = floor;
    c.kind = kind;
    c.terms = std::move(terms);
    c.values.reserve(omegas.size());
    for (std::size_t i = 0; i < omegas.size(); ++i) {
        const double w = omegas[i];
        double s = floor;
        bool diverges = false;
        for (const auto& t : c.terms) {
            if (t.width == 0.0 && w == 0.0) {
                diverges = true;
                break;
            }
            s += t(w);
        }
        if (diverges) {
            c.values.push_back(kDivergent);
            c.divergent.push_back(i);
        } else {
            c.values.push_back(s);
        }
    }
    return c;
}

}  // namespace detail

/// Output squeezing spectrum for one quadrature branch. Defined below and at
/// the critical point; there only the plus branch at omega = 0 diverges.
inline SpectrumCurve squeezing_spectrum_out(const DpoParams& p, std::span<const double> omegas,
                                            Branch b) {
    const auto d = derive(p);
    if (classify_regime(p) == Regime::above_threshold)
        throw DivergenceError("squeezing spectrum: above threshold");
    const auto [up, down] = squeeze_factors(p.r);
    const double amp = 8.0 * p.epsilon * p.kappa;
    if (b == Branch::plus)
        return detail::evaluate(omegas, up, SpectrumKind::squeezing_plus,
                                {{up * amp, d.rates.lambda_plus}});
    return detail::evaluate(omegas, down, SpectrumKind::squeezing_minus,
                            {{-down * amp, d.rates.lambda_minus}});
}

/// Lorentzian decomposition of the cavity or output power spectrum.
inline std::vector<LorentzianTerm> power_spectrum_terms(const DpoParams& p, Field f,
                                                        PowerVariant variant) {
    const auto d = require_below_threshold(p, "power spectrum");
    const double k = p.kappa, e = p.epsilon;
    const double n = d.reservoir.n_res, m = d.reservoir.m_res;
    const double lp = d.rates.lambda_plus, lm = d.rates.lambda_minus;
    if (f == Field::cavity)
        return {{2.0 * (k * (n + m) + e), lp}, {2.0 * (k * (n - m) - e), lm}};
    const double second =
        variant == PowerVariant::as_printed ? 1.0 - 2.0 * n + 2.0 * m : 2.0 * m - 2.0 * n - 1.0;
    return {{2.0 * k * e * (1.0 + 2.0 * n + 2.0 * m), lp}, {2.0 * k * e * second, lm}};
}

inline SpectrumCurve power_spectrum(const DpoParams& p, std::span<const double> omegas, Field f,
                                    PowerVariant variant = PowerVariant::derived_consistent) {
    const auto d = require_below_threshold(p, "power spectrum");
    const double floor = f == Field::cavity ? 0.0 : d.reservoir.n_res;
    return detail::evaluate(
        omegas, floor, f == Field::cavity ? SpectrumKind::power_cavity : SpectrumKind::power_output,
        power_spectrum_terms(p, f, variant));
}

/// (1/2pi) * integral of (S(omega) - floor) over the real line, from the
/// closed-form Lorentzian integrals.
inline double spectral_weight(const SpectrumCurve& c) {
    double total = 0.0;
    for (const auto& t : c.terms) total += t.integral();
    return total / (2.0 * std::numbers::pi);
}

/// Uniform grid of `count` points over [lo, hi].
inline std::vector<double> uniform_grid(double lo, double hi, std::size_t count) {
    std::vector<double> g(count);
    if (count == 1) {
        g[0] = lo;
        return g;
    }
    for (std::size_t i = 0; i < count; ++i)
        g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
    return g;
}

/// Default figure grid: omega in [-2, 2], 801 points.
inline std::vector<double> default_omega_grid() { return uniform_grid(-2.0, 2.0, 801); }

}  // namespace dpo
