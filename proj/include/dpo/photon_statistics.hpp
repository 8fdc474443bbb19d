#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpo/analytic.hpp"

namespace dpo {

/// Moments that do not describe a normalizable (or physical) Gaussian state.
class UnphysicalStateError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Zero-mean Gaussian single-mode state, parameterized through its
/// antinormally ordered characteristic function exp[-a|z|^2 + (b/2)(z^2 + z*^2)].
struct GaussianFieldState {
    double a_param = 1.0;  ///< 1 + nbar
    double b_param = 0.0;  ///< <alpha^2>
    double u_param = 1.0;  ///< a / (a^2 - b^2)
    double v_param = 0.0;  ///< b / (a^2 - b^2)

    double determinant() const { return a_param * a_param - b_param * b_param; }
    double mean_photon() const { return a_param - 1.0; }
};

struct PhotonDistribution {
    std::vector<double> probs;  ///< P(0..n_max)
    std::size_t n_max = 0;
    double tail_bound = 0.0;    ///< 1 - sum(probs)

    double mean() const {
        double s = 0.0;
        for (std::size_t n = 0; n < probs.size(); ++n) s += static_cast<double>(n) * probs[n];
        return s;
    }
    double second_moment() const {
        double s = 0.0;
        for (std::size_t n = 0; n < probs.size(); ++n)
            s += static_cast<double>(n * n) * probs[n];
        return s;
    }
    double odd_mass() const {
        double s = 0.0;
        for (std::size_t n = 1; n < probs.size(); n += 2) s += probs[n];
        return s;
    }
};

inline GaussianFieldState gaussian_state(const SteadyMoments& m) {
    if (!std::isfinite(m.mean_photon) || !std::isfinite(m.anomalous) || m.mean_photon < 0.0)
        throw UnphysicalStateError("gaussian state: moments must be finite with nbar >= 0");
    GaussianFieldState s;
    s.a_param = 1.0 + m.mean_photon;
    s.b_param = m.anomalous;
    const double det = s.determinant();
    if (!(det > 0.0))
        throw UnphysicalStateError("gaussian state: (1 + nbar)^2 <= <a^2>^2, Q-function not normalizable");
    s.u_param = s.a_param / det;
    s.v_param = s.b_param / det;
    return s;
}

/// <(a^dagger a)^2> of a zero-mean Gaussian state, from <a^dagger^2 a^2> = 2 nbar^2 + |b|^2.
inline double gaussian_second_moment(double nbar, double b) {
    return 2.0 * nbar * nbar + b * b + nbar;
}

namespace detail {

inline double pairwise_sum(const double* x, std::size_t n) {
    if (n <= 8) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += x[i];
        return s;
    }
    const std::size_t h = n / 2;
    return pairwise_sum(x, h) + pairwise_sum(x + h, n - h);
}

/// n^2 + n - b^2 = a^2 - a - b^2, clamped to zero when it only differs from
/// zero by round-off (the squeezed-vacuum case).
inline double photon_radicand(const GaussianFieldState& s) {
    const double a = s.a_param, b = s.b_param;
    const double rad = a * a - a - b * b;
    const double scale = 64.0 * std::numeric_limits<double>::epsilon() * (a * a + b * b);
    if (std::abs(rad) <= scale) return 0.0;
    if (rad < 0.0)
        throw UnphysicalStateError("photon distribution: nbar(nbar + 1) < <a^2>^2 (radicand " +
                                   std::to_string(rad) + ")");
    return rad;
}

/// P(n) from the closed-form single sum; the inner index runs over i = n, n-2, ...
inline double photon_probability(const GaussianFieldState& s, double radicand, std::size_t n) {
    const double det = s.determinant();
    const double b = std::abs(s.b_param);
    const double log_r = radicand > 0.0 ? std::log(radicand) : 0.0;
    const double log_b = b > 0.0 ? std::log(b) : 0.0;

    std::vector<double> logs;
    logs.reserve(n / 2 + 1);
    for (std::size_t i = n % 2; i <= n; i += 2) {
        const std::size_t pairs = (n - i) / 2;
        if (i > 0 && radicand == 0.0) continue;
        if (pairs > 0 && b == 0.0) continue;
        const double di = static_cast<double>(i);
        const double dp = static_cast<double>(n - i);
        logs.push_back((i > 0 ? di * log_r : 0.0) + (pairs > 0 ? dp * (log_b - std::log(2.0)) : 0.0) -
                       std::lgamma(di + 1.0) - 2.0 * std::lgamma(static_cast<double>(pairs) + 1.0));
    }
    if (logs.empty()) return 0.0;
    const double top = *std::max_element(logs.begin(), logs.end());
    for (auto& l : logs) l = std::exp(l - top);
    const double sum = pairwise_sum(logs.data(), logs.size());
    const double dn = static_cast<double>(n);
    return std::exp(std::lgamma(dn + 1.0) - (dn + 0.5) * std::log(det) + top + std::log(sum));
}

inline PhotonDistribution finish(std::vector<double> probs) {
    PhotonDistribution d;
    d.n_max = probs.empty() ? 0 : probs.size() - 1;
    d.probs = std::move(probs);
    d.tail_bound = 1.0 - pairwise_sum(d.probs.data(), d.probs.size());
    return d;
}

}  // namespace detail

/// Photon-number distribution P(0..n_max) of a zero-mean Gaussian state,
/// evaluated in log space.
inline PhotonDistribution photon_number_distribution(const GaussianFieldState& s, std::size_t n_max) {
    const double rad = detail::photon_radicand(s);
    std::vector<double> probs(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) probs[n] = detail::photon_probability(s, rad, n);
    return detail::finish(std::move(probs));
}

inline constexpr std::size_t kPhotonCap = 400;

/// Adaptive truncation: stops at the smallest n for which the geometric tail
/// estimate (ratio P(n)/P(n-2)) and 1 - sum are both below `tail_target`,
/// capped at kPhotonCap.
inline PhotonDistribution adaptive_photon_distribution(const GaussianFieldState& s,
                                                       double tail_target = 1e-10) {
    const double rad = detail::photon_radicand(s);
    std::vector<double> probs;
    double sum = 0.0;
    for (std::size_t n = 0; n <= kPhotonCap; ++n) {
        probs.push_back(detail::photon_probability(s, rad, n));
        sum += probs.back();
        if (n < 3) continue;
        auto ratio = [&](std::size_t k) {
            return probs[k - 2] > 0.0 ? probs[k] / probs[k - 2] : 0.0;
        };
        const double rho = std::max(ratio(n), ratio(n - 1));
        const double geometric =
            rho < 1.0 ? (probs[n] + probs[n - 1]) * rho / (1.0 - rho)
                      : std::numeric_limits<double>::infinity();
        if (geometric < tail_target && 1.0 - sum < tail_target) break;
    }
    return detail::finish(std::move(probs));
}

inline constexpr std::size_t kOracleCap = 30;

/// Independent route: P(n) = sqrt(u^2 - v^2) n! [x^n y^n] exp[(1-u)xy + (v/2)(x^2 + y^2)],
/// with the bivariate Taylor coefficients of the exponential generated by the
/// power-series recurrence p e_{p,q} = sum_{s,t} s f_{s,t} e_{p-s,q-t}.
inline PhotonDistribution pnd_oracle(const GaussianFieldState& s, std::size_t n_max) {
    if (n_max > kOracleCap)
        throw std::invalid_argument("pnd oracle: n_max > " + std::to_string(kOracleCap));
    using real = long double;
    const real c11 = 1.0L - static_cast<real>(s.u_param);
    const real c20 = static_cast<real>(s.v_param) / 2.0L;
    const real c02 = c20;
    const std::size_t dim = n_max + 1;
    std::vector<real> e(dim * dim, 0.0L);
    auto at = [&](std::size_t p, std::size_t q) -> real& { return e[p * dim + q]; };
    at(0, 0) = 1.0L;
    for (std::size_t q = 1; q < dim; ++q)
        at(0, q) = q >= 2 ? 2.0L * c02 * at(0, q - 2) / static_cast<real>(q) : 0.0L;
    for (std::size_t p = 1; p < dim; ++p)
        for (std::size_t q = 0; q < dim; ++q) {
            real acc = 0.0L;
            if (q >= 1) acc += c11 * at(p - 1, q - 1);
            if (p >= 2) acc += 2.0L * c20 * at(p - 2, q);
            at(p, q) = acc / static_cast<real>(p);
        }

    const real norm = std::sqrt(static_cast<real>(s.u_param) * s.u_param -
                                static_cast<real>(s.v_param) * s.v_param);
    std::vector<double> probs(dim);
    unsigned __int128 factorial = 1;
    for (std::size_t n = 0; n < dim; ++n) {
        if (n > 0) factorial *= n;
        probs[n] = static_cast<double>(norm * static_cast<real>(factorial) * at(n, n));
    }
    return detail::finish(std::move(probs));
}

}  // namespace dpo
