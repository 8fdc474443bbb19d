#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dpo {

/// Parameters outside the model's domain (non-finite, negative, kappa <= 0).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A steady-state quantity was requested at or above threshold.
class DivergenceError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Physical parameter set of the oscillator.
///
/// kappa is the cavity damping constant, epsilon the (real) pump amplitude and
/// r the squeeze parameter of the reservoir. kappa and epsilon share the same
/// inverse-time unit.
struct DpoParams {
    double kappa = 0.8;
    double epsilon = 0.2;
    double r = 0.0;

    friend bool operator==(const DpoParams&, const DpoParams&) = default;
};

struct ReservoirMoments {
    double n_res = 0.0;  ///< N = sinh^2 r
    double m_res = 0.0;  ///< M = sinh r cosh r
};

struct DecayRates {
    double lambda_plus = 0.0;   ///< kappa - 2 epsilon (amplified quadrature)
    double lambda_minus = 0.0;  ///< kappa + 2 epsilon (squeezed quadrature)
};

enum class Regime { below_threshold, critical, above_threshold };

inline const char* to_string(Regime regime) {
    switch (regime) {
    case Regime::below_threshold: return "below-threshold";
    case Regime::critical: return "critical";
    case Regime::above_threshold: return "above-threshold";
    }
    return "unknown";
}

struct Derived {
    ReservoirMoments reservoir;
    DecayRates rates;
    bool critical = false;
};

inline void validate(const DpoParams& p) {
    if (!std::isfinite(p.kappa) || !std::isfinite(p.epsilon) || !std::isfinite(p.r))
        throw ParameterError("parameters must be finite");
    if (p.kappa <= 0.0) throw ParameterError("kappa must be > 0");
    if (p.epsilon < 0.0) throw ParameterError("epsilon must be >= 0");
    if (p.r < 0.0) throw ParameterError("r must be >= 0");
}

/// Non-fatal diagnostics. The output uncertainty product is only guaranteed
/// for kappa in (0, 1].
inline std::vector<std::string> warnings(const DpoParams& p) {
    std::vector<std::string> out;
    if (p.kappa > 1.0)
        out.emplace_back("kappa > 1: output-field uncertainty product is not guaranteed >= 1");
    return out;
}

inline bool is_critical(const DpoParams& p) {
    return std::abs(p.kappa - 2.0 * p.epsilon) <= 1e-12 * std::max(p.kappa, 1.0);
}

inline Regime classify_regime(const DpoParams& p) {
    if (is_critical(p)) return Regime::critical;
    return p.kappa > 2.0 * p.epsilon ? Regime::below_threshold : Regime::above_threshold;
}

inline ReservoirMoments reservoir_moments(double r) {
    const double s = std::sinh(r);
    const double c = std::cosh(r);
    return {s * s, s * c};
}

inline Derived derive(const DpoParams& p) {
    validate(p);
    Derived d;
    d.reservoir = reservoir_moments(p.r);
    d.critical = is_critical(p);
    d.rates.lambda_plus = d.critical ? 0.0 : p.kappa - 2.0 * p.epsilon;
    d.rates.lambda_minus = p.kappa + 2.0 * p.epsilon;
    return d;
}

/// Throws unless strictly below threshold.
inline Derived require_below_threshold(const DpoParams& p, const char* what) {
    Derived d = derive(p);
    const Regime regime = classify_regime(p);
    if (regime != Regime::below_threshold)
        throw DivergenceError(std::string(what) + ": steady state does not exist (" +
                              to_string(regime) + ")");
    return d;
}

/// e^{2r} and e^{-2r}, i.e. 1 + 2N + 2M and 1 + 2N - 2M.
inline std::pair<double, double> squeeze_factors(double r) {
    return {std::exp(2.0 * r), std::exp(-2.0 * r)};
}

}  // namespace dpo
