#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpo/analytic.hpp"
#include "dpo/photon_statistics.hpp"

namespace dpo {

/// Population reached the top Fock level: the truncation is too small.
class TruncationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Integration ended before the residual dropped below tolerance.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, double residual)
        : std::runtime_error(what), residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

using complex = std::complex<double>;

/// Dense dim x dim operator on the truncated Fock space |0>..|dim-1>, row major.
class DensityMatrix {
public:
    DensityMatrix() = default;
    explicit DensityMatrix(std::size_t dim) : dim_(dim), data_(dim * dim) {}

    static DensityMatrix vacuum(std::size_t dim) {
        DensityMatrix rho(dim);
        rho(0, 0) = 1.0;
        return rho;
    }

    std::size_t dim() const { return dim_; }
    complex& operator()(std::size_t m, std::size_t n) { return data_[m * dim_ + n]; }
    const complex& operator()(std::size_t m, std::size_t n) const { return data_[m * dim_ + n]; }
    std::vector<complex>& data() { return data_; }
    const std::vector<complex>& data() const { return data_; }

    complex trace() const {
        complex t = 0.0;
        for (std::size_t m = 0; m < dim_; ++m) t += (*this)(m, m);
        return t;
    }
    /// Infinity if any entry is not finite.
    double max_abs() const {
        double mx = 0.0;
        for (const auto& z : data_) {
            const double a = std::abs(z);
            if (!std::isfinite(a)) return std::numeric_limits<double>::infinity();
            mx = std::max(mx, a);
        }
        return mx;
    }
    double hermiticity_error() const {
        double mx = 0.0;
        for (std::size_t m = 0; m < dim_; ++m)
            for (std::size_t n = 0; n < dim_; ++n)
                mx = std::max(mx, std::abs((*this)(m, n) - std::conj((*this)(n, m))));
        return mx;
    }
    double top_occupation() const { return dim_ == 0 ? 0.0 : (*this)(dim_ - 1, dim_ - 1).real(); }

private:
    std::size_t dim_ = 0;
    std::vector<complex> data_;
};

// Expectations Tr(X O) for the truncated ladder operators; X need not be a state.
inline complex expect_a(const DensityMatrix& x) {
    complex s = 0.0;
    for (std::size_t m = 1; m < x.dim(); ++m) s += std::sqrt(double(m)) * x(m, m - 1);
    return s;
}
inline complex expect_number(const DensityMatrix& x) {
    complex s = 0.0;
    for (std::size_t m = 1; m < x.dim(); ++m) s += double(m) * x(m, m);
    return s;
}
inline complex expect_a2(const DensityMatrix& x) {
    complex s = 0.0;
    for (std::size_t m = 2; m < x.dim(); ++m)
        s += std::sqrt(double(m) * double(m - 1)) * x(m, m - 2);
    return s;
}

namespace detail {

struct RhsCoefficients {
    double c_ad2, c_a2, c_rad2, c_ra2, g_loss, g_gain, g_sq;

    RhsCoefficients(const DpoParams& p, double n_res, double m_res) {
        const double e = p.epsilon, k = p.kappa;
        c_ad2 = 0.5 * (e + k * m_res);   // a^dagger^2 rho
        c_a2 = 0.5 * (-e + k * m_res);   // a^2 rho
        c_rad2 = 0.5 * (-e + k * m_res); // rho a^dagger^2
        c_ra2 = 0.5 * (e + k * m_res);   // rho a^2
        g_loss = 0.5 * k * (n_res + 1.0);
        g_gain = 0.5 * k * n_res;
        g_sq = k * m_res;                // 2 * (kappa M / 2)
    }
};

template <class T>
inline T rhs_entry(const T* rho, std::size_t d, std::size_t m, std::size_t n, const RhsCoefficients& c,
                   const double* sq) {
    const double tm = m + 1 < d ? double(m + 1) : 0.0;
    const double tn = n + 1 < d ? double(n + 1) : 0.0;
    auto at = [&](std::size_t i, std::size_t j) { return rho[i * d + j]; };
    T acc = -(c.g_loss * (double(m) + double(n)) + c.g_gain * (tm + tn)) * at(m, n);
    if (m >= 2) acc += c.c_ad2 * sq[m] * sq[m - 1] * at(m - 2, n);
    if (m + 2 < d) acc += c.c_a2 * sq[m + 1] * sq[m + 2] * at(m + 2, n);
    if (n + 2 < d) acc += c.c_rad2 * sq[n + 1] * sq[n + 2] * at(m, n + 2);
    if (n >= 2) acc += c.c_ra2 * sq[n] * sq[n - 1] * at(m, n - 2);
    if (m + 1 < d && n + 1 < d) acc += 2.0 * c.g_loss * sq[m + 1] * sq[n + 1] * at(m + 1, n + 1);
    if (m >= 1 && n >= 1) acc += 2.0 * c.g_gain * sq[m] * sq[n] * at(m - 1, n - 1);
    if (c.g_sq != 0.0) {
        if (m + 1 < d && n >= 1) acc -= c.g_sq * sq[m + 1] * sq[n] * at(m + 1, n - 1);
        if (m >= 1 && n + 1 < d) acc -= c.g_sq * sq[m] * sq[n + 1] * at(m - 1, n + 1);
    }
    return acc;
}

/// Master-equation right-hand side. With `even_symmetric` the input is
/// assumed real symmetric with rho(m, n) = 0 for odd m - n, a structure the
/// dynamics preserves; only those entries are computed and entries of odd
/// m - n in `out` are left untouched.
template <class T>
inline void rhs_kernel(const T* rho, std::size_t d, const RhsCoefficients& c, const double* sq, T* out,
                       bool even_symmetric) {
    if (!even_symmetric) {
        for (std::size_t m = 0; m < d; ++m)
            for (std::size_t n = 0; n < d; ++n) out[m * d + n] = rhs_entry(rho, d, m, n, c, sq);
        return;
    }
    for (std::size_t m = 0; m < d; ++m)
        for (std::size_t n = m; n < d; n += 2) {
            const T v = rhs_entry(rho, d, m, n, c, sq);
            out[m * d + n] = v;
            out[n * d + m] = v;
        }
}

/// Fused evaluation of the master-equation right-hand side into `out`.
inline void lindblad_rhs_into(const DensityMatrix& rho, const DpoParams& p, double n_res,
                              double m_res, const std::vector<double>& sq, DensityMatrix& out) {
    rhs_kernel(rho.data().data(), rho.dim(), RhsCoefficients(p, n_res, m_res), sq.data(),
               out.data().data(), false);
}

inline std::vector<double> sqrt_table(std::size_t d) {
    std::vector<double> sq(d + 2);
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = std::sqrt(double(i));
    return sq;
}

template <class T>
inline double max_abs(const std::vector<T>& x) {
    double mx = 0.0;
    for (const auto& z : x) {
        const double a = std::abs(z);
        if (!std::isfinite(a)) return std::numeric_limits<double>::infinity();
        mx = std::max(mx, a);
    }
    return mx;
}

inline bool is_real_even_symmetric(const DensityMatrix& rho) {
    const std::size_t d = rho.dim();
    for (std::size_t m = 0; m < d; ++m)
        for (std::size_t n = 0; n < d; ++n) {
            const complex z = rho(m, n);
            if (z.imag() != 0.0) return false;
            if ((m + n) % 2 == 1 && z.real() != 0.0) return false;
            if (z != rho(n, m)) return false;
        }
    return true;
}

}  // namespace detail

/// d rho / dt of the squeezed-reservoir oscillator master equation on the
/// truncated space: the parametric gain term plus the (N + 1), N and M
/// dissipators, with all ladder operators truncated at dim.
inline DensityMatrix lindblad_rhs(const DensityMatrix& rho, const DpoParams& p) {
    if (rho.dim() < 2) throw std::invalid_argument("lindblad_rhs: dim must be >= 2");
    validate(p);
    const auto res = reservoir_moments(p.r);
    DensityMatrix out(rho.dim());
    detail::lindblad_rhs_into(rho, p, res.n_res, res.m_res, detail::sqrt_table(rho.dim()), out);
    return out;
}

/// Step size inside the RK4 stability region: 2 over the largest Gershgorin
/// row bound of the truncated generator.
inline double stable_step(const DpoParams& p, std::size_t dim) {
    const auto res = reservoir_moments(p.r);
    const detail::RhsCoefficients c(p, res.n_res, res.m_res);
    const auto sq = detail::sqrt_table(dim);
    double bound = 0.0;
    for (std::size_t m = 0; m < dim; ++m)
        for (std::size_t n = 0; n < dim; ++n) {
            const double tm = m + 1 < dim ? double(m + 1) : 0.0, tn = n + 1 < dim ? double(n + 1) : 0.0;
            double row = c.g_loss * double(m + n) + c.g_gain * (tm + tn);
            if (m >= 2) row += std::abs(c.c_ad2) * sq[m] * sq[m - 1];
            if (m + 2 < dim) row += std::abs(c.c_a2) * sq[m + 1] * sq[m + 2];
            if (n + 2 < dim) row += std::abs(c.c_rad2) * sq[n + 1] * sq[n + 2];
            if (n >= 2) row += std::abs(c.c_ra2) * sq[n] * sq[n - 1];
            if (m + 1 < dim && n + 1 < dim) row += 2.0 * c.g_loss * sq[m + 1] * sq[n + 1];
            if (m >= 1 && n >= 1) row += 2.0 * c.g_gain * sq[m] * sq[n];
            if (m + 1 < dim && n >= 1) row += c.g_sq * sq[m + 1] * sq[n];
            if (m >= 1 && n + 1 < dim) row += c.g_sq * sq[m] * sq[n + 1];
            bound = std::max(bound, row);
        }
    return bound > 0.0 ? 2.0 / bound : 1.0 / p.kappa;
}

struct FockOptions {
    std::size_t dim = 0;          ///< 0: adaptive, starting at 30 and doubling
    std::size_t max_dim = 320;
    double dt = 0.0;              ///< 0: 1e-3 / kappa
    bool auto_step = false;       ///< use stable_step(p, dim) for each truncation instead of dt
    double t_end = 0.0;           ///< 0: 60 / lambda_plus
    double tolerance = 1e-10;     ///< on max |d rho / dt|
    double leak_threshold = 1e-8; ///< on rho_{dim-1, dim-1}
    std::size_t check_every = 50;
};

struct EvolutionResult {
    DensityMatrix rho;
    double time = 0.0;
    double residual = 0.0;        ///< max |d rho / dt| at the last check
    double top_occupation = 0.0;
    std::size_t steps = 0;
    bool converged = false;
    bool leaked = false;
    bool unstable = false;        ///< non-finite entries, dt beyond the stability limit
};

namespace detail {

template <class T>
inline void integrate(const DpoParams& p, std::vector<T>& y, std::size_t d, bool even_symmetric,
                      double t_end, double dt, const FockOptions& opt, EvolutionResult& out) {
    const auto res = reservoir_moments(p.r);
    const RhsCoefficients c(p, res.n_res, res.m_res);
    const auto sq = sqrt_table(d);
    std::vector<T> k1(y.size()), k2(y.size()), k3(y.size()), k4(y.size()), tmp(y.size());
    auto rhs = [&](const std::vector<T>& x, std::vector<T>& dst) {
        rhs_kernel(x.data(), d, c, sq.data(), dst.data(), even_symmetric);
    };
    auto check = [&] {
        out.residual = max_abs(k1);
        out.top_occupation = std::real(y[d * d - 1]);
        out.unstable = !std::isfinite(out.residual);
        out.leaked = out.top_occupation > opt.leak_threshold;
        out.converged = !out.unstable && !out.leaked && out.residual < opt.tolerance;
        return out.unstable || out.leaked || out.converged;
    };
    const std::size_t total = static_cast<std::size_t>(std::ceil(t_end / dt - 1e-9));
    const std::size_t every = std::max<std::size_t>(opt.check_every, 1);

    for (std::size_t step = 0; step < total; ++step) {
        rhs(y, k1);
        if (step % every == 0 && check()) return;
        auto stage = [&](const std::vector<T>& k, double h, std::vector<T>& dst) {
            for (std::size_t i = 0; i < y.size(); ++i) tmp[i] = y[i] + h * k[i];
            rhs(tmp, dst);
        };
        stage(k1, 0.5 * dt, k2);
        stage(k2, 0.5 * dt, k3);
        stage(k3, dt, k4);
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] += dt / 6.0 * (k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i]);
        out.time += dt;
        ++out.steps;
    }
    rhs(y, k1);
    check();
}

}  // namespace detail

/// Fixed-step classical RK4 from `rho0` until the residual falls below
/// options.tolerance, t_end is reached, or the top level exceeds the leak
/// threshold. Never throws on non-convergence; the flags report the outcome.
/// Real symmetric states of even parity (the vacuum among them) are evolved
/// in real arithmetic on the even entries only.
inline EvolutionResult evolve(const DpoParams& p, DensityMatrix rho0, double t_end, double dt,
                              const FockOptions& opt = {}) {
    validate(p);
    if (!(dt > 0.0)) throw std::invalid_argument("evolve: dt must be > 0");
    const std::size_t d = rho0.dim();
    if (d < 2) throw std::invalid_argument("evolve: dim must be >= 2");

    EvolutionResult out;
    if (detail::is_real_even_symmetric(rho0)) {
        std::vector<double> y(d * d);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] = rho0.data()[i].real();
        detail::integrate(p, y, d, true, t_end, dt, opt, out);
        out.rho = DensityMatrix(d);
        for (std::size_t i = 0; i < y.size(); ++i) out.rho.data()[i] = y[i];
    } else {
        detail::integrate(p, rho0.data(), d, false, t_end, dt, opt, out);
        out.rho = std::move(rho0);
    }
    return out;
}

/// Long-time integration from the vacuum to the stationary state. With
/// options.dim == 0 the truncation starts at 30 and doubles until the top
/// level stays below the leak threshold.
inline EvolutionResult evolve_to_steady(const DpoParams& p, const FockOptions& opt = {}) {
    const auto d = require_below_threshold(p, "fock steady state");
    const double t_end = opt.t_end > 0.0 ? opt.t_end : 60.0 / d.rates.lambda_plus;
    std::size_t dim = opt.dim > 0 ? opt.dim : 30;
    for (;;) {
        const double dt = opt.auto_step ? stable_step(p, dim) : opt.dt > 0.0 ? opt.dt : 1e-3 / p.kappa;
        auto result = evolve(p, DensityMatrix::vacuum(dim), t_end, dt, opt);
        if (result.unstable)
            throw ConvergenceError("fock steady state: non-finite density matrix at t = " +
                                       std::to_string(result.time) + ", dt " + std::to_string(dt) +
                                       " exceeds the stability limit",
                                   result.residual);
        if (result.leaked) {
            if (opt.dim > 0 || dim * 2 > opt.max_dim)
                throw TruncationError("fock steady state: top occupation " +
                                      std::to_string(result.top_occupation) + " at dim " +
                                      std::to_string(dim));
            dim *= 2;
            continue;
        }
        if (!result.converged)
            throw ConvergenceError("fock steady state: residual " + std::to_string(result.residual) +
                                       " after t = " + std::to_string(result.time),
                                   result.residual);
        return result;
    }
}

struct RhoMoments {
    SteadyMoments moments;      ///< cavity label
    PhotonDistribution diagonal;
};

inline RhoMoments moments_from_rho(const DensityMatrix& rho) {
    RhoMoments out;
    out.moments = {expect_number(rho).real(), expect_a2(rho).real(), Field::cavity};
    std::vector<double> probs(rho.dim());
    for (std::size_t n = 0; n < rho.dim(); ++n) probs[n] = rho(n, n).real();
    out.diagonal = detail::finish(std::move(probs));
    return out;
}

}  // namespace dpo
