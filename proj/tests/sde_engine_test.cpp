#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "dpo/analytic.hpp"
#include "dpo/sde_engine.hpp"

namespace {

using dpo::DpoParams;
using dpo::EngineOptions;

TEST(ExactOuStep, DeterministicDecay) {
    EXPECT_DOUBLE_EQ(dpo::exact_ou_step(1.0, 1.2, 0.0, 0.3, 5.0), std::exp(-0.6 * 0.3));
}

TEST(ExactOuStep, PureDiffusionIncrement) {
    const dpo::OuTransition t(0.0, 0.4, 0.01);
    EXPECT_DOUBLE_EQ(t.decay, 1.0);
    EXPECT_NEAR(t.noise_sd * t.noise_sd, 0.004, 1e-15);
}

TEST(ExactOuStep, ExactVariance) {
    const double lambda = 0.4, d = 0.4, dt = 0.7;
    const dpo::OuTransition t(lambda, d, dt);
    EXPECT_NEAR(t.noise_sd * t.noise_sd, d / lambda * (1 - std::exp(-lambda * dt)), 1e-15);
    EXPECT_THROW(dpo::exact_ou_step(0.0, 1.0, -0.1, 0.1, 0.0), std::invalid_argument);
    EXPECT_THROW(dpo::exact_ou_step(0.0, 1.0, 0.1, 0.0, 0.0), std::invalid_argument);
}

TEST(ExactOuStep, StationaryVariance) {
    // lambda = 0.4, D = 0.4: stationary variance D / lambda = 1
    const dpo::OuTransition t(0.4, 0.4, 0.5);
    const std::size_t n = 4000, steps = 100;
    double s2 = 0.0, s4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = 0.0;
        for (std::size_t k = 0; k < steps; ++k) x = t(x, dpo::rng::normals4(3, i, k)[0]);
        s2 += x * x;
        s4 += x * x * x * x;
    }
    const double mean = s2 / n;
    const double se = std::sqrt((s4 / n - mean * mean) / n);
    const double expected = 1.0 - std::exp(-0.4 * 0.5 * steps);
    EXPECT_LE(std::abs(mean - expected), 3 * se);
}

TEST(NoiseModel, DiffusionsNonNegative) {
    for (double r : {0.0, 0.3, 1.0, 2.5})
        for (double e : {0.0, 0.1, 0.39}) {
            const auto nm = dpo::noise_model({0.8, e, r});
            EXPECT_GE(nm.reservoir_minus, 0.0);
            EXPECT_GE(nm.total_minus(), 0.0);
            const auto res = dpo::reservoir_moments(r);
            EXPECT_NEAR(nm.total_plus(), 2 * (0.8 * (res.m_res + res.n_res) + e), 1e-12);
            EXPECT_NEAR(nm.total_minus(), 2 * (0.8 * (res.m_res - res.n_res) + e), 1e-12);
        }
}

TEST(Ensemble, NoNoiseStaysAtVacuum) {
    EngineOptions o;
    o.n_traj = 4;
    o.t_end = 2.0;
    const auto ens = dpo::simulate_ensemble({0.8, 0.0, 0.0}, o);
    for (const auto& rec : ens.records) {
        for (double x : rec.u) EXPECT_EQ(x, 0.0);
        for (double x : rec.v) EXPECT_EQ(x, 0.0);
    }
    for (const auto& out : dpo::output_records(ens)) {
        for (double x : out.u_out) EXPECT_EQ(x, 0.0);
        for (double x : out.v_out) EXPECT_EQ(x, 0.0);
    }
}

TEST(Ensemble, Deterministic) {
    EngineOptions o;
    o.n_traj = 16;
    o.t_end = 3.0;
    o.seed = 77;
    o.threads = 1;
    const auto a = dpo::simulate_ensemble({0.8, 0.2, 0.4}, o);
    o.threads = 4;
    const auto b = dpo::simulate_ensemble({0.8, 0.2, 0.4}, o);
    ASSERT_EQ(a.records.size(), b.records.size());
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& x = a.records[i];
        const auto& y = b.records[i];
        ASSERT_EQ(x.u.size(), y.u.size());
        EXPECT_EQ(std::memcmp(x.u.data(), y.u.data(), x.u.size() * sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(x.v.data(), y.v.data(), x.v.size() * sizeof(double)), 0);
        EXPECT_EQ(std::memcmp(x.dw_res_plus.data(), y.dw_res_plus.data(), x.dw_res_plus.size() * sizeof(double)), 0);
    }
    o.seed = 78;
    const auto c = dpo::simulate_ensemble({0.8, 0.2, 0.4}, o);
    EXPECT_NE(c.records[0].u.back(), a.records[0].u.back());
}

TEST(Ensemble, RefusesAboveThreshold) {
    EngineOptions o;
    o.n_traj = 2;
    o.t_end = 5.0;
    EXPECT_THROW(dpo::simulate_ensemble({0.8, 0.5, 0.0}, o), dpo::DivergenceError);
    o.transient_window = 10.0;
    EXPECT_NO_THROW(dpo::simulate_ensemble({0.8, 0.5, 0.0}, o));
    o.n_traj = 0;
    EXPECT_THROW(dpo::simulate_ensemble({0.8, 0.2, 0.0}, o), std::invalid_argument);
}

struct EndpointStats {
    double uu = 0, vv = 0, uv = 0, uu2 = 0, vv2 = 0, uv2 = 0, nn = 0, nn2 = 0, mm = 0, mm2 = 0;
    std::size_t n = 0;
    void add(double u, double v) {
        uu += u * u; vv += v * v; uv += u * v;
        uu2 += u * u * u * u; vv2 += v * v * v * v; uv2 += u * u * v * v;
        const double nv = (u * u - v * v) / 4, mv = (u * u + v * v) / 4;
        nn += nv; nn2 += nv * nv; mm += mv; mm2 += mv * mv;
        ++n;
    }
    static double se(double s, double s2, std::size_t n) {
        const double m = s / n;
        return std::sqrt((s2 / n - m * m) / n);
    }
};

TEST(Ensemble, EndpointMomentsMatchClosedForms) {
    const DpoParams p{0.8, 0.2, 0.0};
    EngineOptions o;
    o.n_traj = 10000;
    o.dt = 0.01;
    o.t_end = 50.0;
    EndpointStats st;
    std::vector<std::pair<double, double>> end(o.n_traj);
    dpo::for_each_trajectory(p, o, [&](std::size_t, std::size_t i, const dpo::TrajectoryRecord& rec) {
        end[i] = {rec.u.back(), rec.v.back()};
    });
    for (auto [u, v] : end) st.add(u, v);
    const double n = double(st.n);
    // <u^2> -> 1 up to the residual transient e^{-lambda t} = e^{-20}
    EXPECT_LE(std::abs(st.uu / n - 1.0), 3 * EndpointStats::se(st.uu, st.uu2, st.n));
    EXPECT_LE(std::abs(st.vv / n - 1.0 / 3.0), 3 * EndpointStats::se(st.vv, st.vv2, st.n));
    EXPECT_LE(std::abs(st.nn / n - 1.0 / 6.0), 3 * EndpointStats::se(st.nn, st.nn2, st.n));
    EXPECT_LE(std::abs(st.mm / n - 1.0 / 3.0), 3 * EndpointStats::se(st.mm, st.mm2, st.n));
    // independence of the two branches
    EXPECT_LE(std::abs(st.uv / n), 3 * EndpointStats::se(st.uv, st.uv2, st.n));
}

TEST(Ensemble, CriticalPlusBranchDiffuses) {
    const DpoParams p{0.8, 0.4, 0.3};
    const auto nm = dpo::noise_model(p);
    EngineOptions o;
    o.n_traj = 4000;
    o.dt = 0.05;
    o.t_end = 10.0;
    std::vector<double> at5(o.n_traj), at10(o.n_traj);
    dpo::for_each_trajectory(p, o, [&](std::size_t, std::size_t i, const dpo::TrajectoryRecord& rec) {
        at5[i] = rec.u[100];
        at10[i] = rec.u[200];
    });
    // <u^2>(t) = D+ t; slope from the two time points
    double s = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < o.n_traj; ++i) {
        const double x = (at10[i] * at10[i] - at5[i] * at5[i]) / 5.0;
        s += x;
        s2 += x * x;
    }
    const double n = double(o.n_traj);
    const double slope = s / n, se = std::sqrt((s2 / n - slope * slope) / n);
    EXPECT_LE(std::abs(slope - nm.total_plus()), 3 * se) << slope << " vs " << nm.total_plus();
}

TEST(OutputRecord, WhiteNoiseFloorScaling) {
    const DpoParams p{0.8, 0.2, 0.5};
    const auto nm = dpo::noise_model(p);
    EngineOptions o;
    o.n_traj = 200;
    o.dt = 0.01;
    o.t_end = 40.0;
    const auto ens = dpo::simulate_ensemble(p, o);
    const auto outs = dpo::output_records(ens);
    double s = 0.0;
    std::size_t cnt = 0;
    for (const auto& out : outs)
        for (std::size_t k = 2000; k < out.u_out.size(); ++k, ++cnt) s += out.u_out[k] * out.u_out[k];
    const double raw = s / double(cnt);
    const double floor = nm.reservoir_plus / (p.kappa * o.dt);
    // raw = floor + O(1)
    EXPECT_NEAR(raw / floor, 1.0, 0.05);
    EXPECT_GT(raw, floor * 0.9);
}

}  // namespace
