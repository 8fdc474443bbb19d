#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dpo/analytic.hpp"
#include "dpo/estimators.hpp"
#include "dpo/fock_oracle.hpp"
#include "dpo/io.hpp"
#include "dpo/photon_statistics.hpp"
#include "dpo/sde_engine.hpp"
#include "dpo/validation.hpp"

namespace fs = std::filesystem;
using namespace dpo;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitUsage = 2;

/// Usage or configuration problem (exit code 2).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Sweep {
    std::string variable;  // epsilon, r or omega
    double from = 0.0;
    double to = 0.0;
    std::size_t count = 0;
};

struct Scenario {
    DpoParams params;
    std::size_t n_traj = 1000;
    double dt = 0.0;
    double t_end = 0.0;
    std::uint64_t seed = 1;
    std::string out = ".";
    std::string variant = "derived";
    std::optional<Sweep> sweep;
    double max_lag = 0.0;
    double window = 0.0;
    unsigned threads = 0;
};

/// Command-line values, applied over the config file.
struct Flags {
    std::string config;
    double kappa = 0, epsilon = 0, r = 0, dt = 0, tend = 0, max_lag = 0, window = 0;
    std::size_t ntraj = 0;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::string out, variant, sweep;
    double sweep_from = 0, sweep_to = 0;
    std::size_t sweep_count = 0;
    std::vector<CLI::Option*> given;
};

const std::set<std::string> kConfigKeys{"kappa",      "epsilon",  "r",           "ntraj",  "dt",
                                        "tend",       "seed",     "out",         "variant", "sweep",
                                        "sweep-from", "sweep-to", "sweep-count", "max-lag", "window",
                                        "threads"};

void add_scenario_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "key = value scenario file")->check(CLI::ExistingFile);
    cmd->add_option("--kappa", f.kappa, "cavity damping rate (default 0.8)");
    cmd->add_option("--epsilon", f.epsilon, "pump amplitude (default 0.2)");
    cmd->add_option("--r", f.r, "reservoir squeeze parameter (default 0)");
    cmd->add_option("--ntraj", f.ntraj, "trajectories (default 1000)");
    cmd->add_option("--dt", f.dt, "time step (default 0.01/kappa)");
    cmd->add_option("--tend", f.tend, "trajectory length (default from the relaxation time)");
    cmd->add_option("--seed", f.seed, "master seed (default 1)");
    cmd->add_option("--out", f.out, "output directory (default .)");
    cmd->add_option("--variant", f.variant, "output power spectrum variant")
        ->check(CLI::IsMember({"printed", "derived"}));
    cmd->add_option("--sweep", f.sweep, "swept variable")->check(CLI::IsMember({"epsilon", "r", "omega"}));
    cmd->add_option("--sweep-from", f.sweep_from, "sweep start");
    cmd->add_option("--sweep-to", f.sweep_to, "sweep end");
    cmd->add_option("--sweep-count", f.sweep_count, "sweep points");
    cmd->add_option("--max-lag", f.max_lag, "longest correlation lag (simulate)");
    cmd->add_option("--window", f.window, "stationary window per trajectory (simulate)");
    cmd->add_option("--threads", f.threads, "worker threads (default: all cores)");
}

bool given(const CLI::App* cmd, const std::string& name) { return cmd->get_option(name)->count() > 0; }

Scenario build_scenario(const CLI::App* cmd, const Flags& f) {
    io::ConfigMap cfg;
    if (!f.config.empty()) {
        std::ifstream is(f.config);
        if (!is) throw UsageError("cannot read config " + f.config);
        try {
            cfg = io::parse_config(is, kConfigKeys);
        } catch (const io::ConfigError& e) {
            throw UsageError(e.what());
        }
    }
    Scenario s;
    try {
        s.params.kappa = io::config_double(cfg, "kappa", 0.8);
        s.params.epsilon = io::config_double(cfg, "epsilon", 0.2);
        s.params.r = io::config_double(cfg, "r", 0.0);
        s.n_traj = io::config_uint(cfg, "ntraj", 1000);
        s.dt = io::config_double(cfg, "dt", 0.0);
        s.t_end = io::config_double(cfg, "tend", 0.0);
        s.seed = io::config_uint(cfg, "seed", 1);
        s.max_lag = io::config_double(cfg, "max-lag", 0.0);
        s.window = io::config_double(cfg, "window", 0.0);
        s.threads = static_cast<unsigned>(io::config_uint(cfg, "threads", 0));
        if (cfg.count("out")) s.out = cfg.at("out");
        if (cfg.count("variant")) s.variant = cfg.at("variant");
        if (cfg.count("sweep")) {
            s.sweep = Sweep{cfg.at("sweep"), io::config_double(cfg, "sweep-from", 0.0),
                            io::config_double(cfg, "sweep-to", 0.0), io::config_uint(cfg, "sweep-count", 0)};
        }
    } catch (const io::ConfigError& e) {
        throw UsageError(e.what());
    }
    if (given(cmd, "--kappa")) s.params.kappa = f.kappa;
    if (given(cmd, "--epsilon")) s.params.epsilon = f.epsilon;
    if (given(cmd, "--r")) s.params.r = f.r;
    if (given(cmd, "--ntraj")) s.n_traj = f.ntraj;
    if (given(cmd, "--dt")) s.dt = f.dt;
    if (given(cmd, "--tend")) s.t_end = f.tend;
    if (given(cmd, "--seed")) s.seed = f.seed;
    if (given(cmd, "--out")) s.out = f.out;
    if (given(cmd, "--variant")) s.variant = f.variant;
    if (given(cmd, "--max-lag")) s.max_lag = f.max_lag;
    if (given(cmd, "--window")) s.window = f.window;
    if (given(cmd, "--threads")) s.threads = f.threads;
    if (given(cmd, "--sweep")) {
        if (!s.sweep) s.sweep = Sweep{};
        s.sweep->variable = f.sweep;
    }
    if (s.sweep) {
        if (given(cmd, "--sweep-from")) s.sweep->from = f.sweep_from;
        if (given(cmd, "--sweep-to")) s.sweep->to = f.sweep_to;
        if (given(cmd, "--sweep-count")) s.sweep->count = f.sweep_count;
        if (s.sweep->variable != "epsilon" && s.sweep->variable != "r" && s.sweep->variable != "omega")
            throw UsageError("sweep variable must be epsilon, r or omega");
        if (s.sweep->count == 0) throw UsageError("--sweep-count must be > 0");
    } else if (given(cmd, "--sweep-from") || given(cmd, "--sweep-to") || given(cmd, "--sweep-count")) {
        throw UsageError("sweep range given without --sweep");
    }
    if (s.variant != "printed" && s.variant != "derived") throw UsageError("variant must be printed or derived");
    try {
        validate(s.params);
    } catch (const ParameterError& e) {
        throw UsageError(e.what());
    }
    for (const auto& w : warnings(s.params)) std::cerr << "warning: " << w << '\n';
    return s;
}

PowerVariant variant_of(const Scenario& s) {
    return s.variant == "printed" ? PowerVariant::as_printed : PowerVariant::derived_consistent;
}

io::Header header_of(const Scenario& s) { return io::Header(s.params); }

std::ofstream open_out(const Scenario& s, const std::string& name) {
    fs::create_directories(s.out);
    const fs::path path = fs::path(s.out) / name;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    std::cout << "wrote " << path.string() << '\n';
    return os;
}

/// Sweep values with points at or above threshold dropped (with a warning).
std::vector<double> sweep_values(const Scenario& s, const Sweep& sw) {
    const auto all = uniform_grid(sw.from, sw.to, sw.count);
    if (sw.variable != "epsilon") return all;
    std::vector<double> kept;
    for (double e : all) {
        if (classify_regime({s.params.kappa, e, s.params.r}) == Regime::below_threshold) kept.push_back(e);
    }
    if (kept.size() < all.size())
        std::cerr << "warning: sweep truncated at threshold epsilon = kappa/2 = " << s.params.kappa / 2 << " ("
                  << all.size() - kept.size() << " points dropped)\n";
    return kept;
}

std::vector<double> moment_row(const DpoParams& p) {
    const auto c = cavity_moments_ss(p);
    const auto o = output_moments_ss(p);
    const auto vc = quadrature_variances(p, Field::cavity);
    const auto vo = quadrature_variances(p, Field::output);
    return {p.kappa, p.epsilon, p.r, c.mean_photon, c.anomalous, o.mean_photon, o.anomalous,
            vc.var_plus, vc.var_minus, vo.var_plus, vo.var_minus};
}

const std::vector<std::string> kMomentColumns{
    "kappa", "epsilon", "r", "cavity_mean_photon", "cavity_anomalous", "output_mean_photon", "output_anomalous",
    "cavity_var_plus", "cavity_var_minus", "output_var_plus", "output_var_minus"};

int cmd_analytic(const Scenario& s) {
    std::vector<std::vector<double>> rows;
    io::Header h = header_of(s);
    if (!s.sweep) {
        require_below_threshold(s.params, "analytic");
        rows.push_back(moment_row(s.params));
    } else {
        const Sweep& sw = *s.sweep;
        if (sw.variable == "omega") throw UsageError("analytic: sweep over epsilon or r");
        h.add("sweep", sw.variable).add("sweep_from", sw.from).add("sweep_to", sw.to)
            .add("sweep_count", std::uint64_t{sw.count});
        for (double x : sweep_values(s, sw)) {
            DpoParams p = s.params;
            (sw.variable == "epsilon" ? p.epsilon : p.r) = x;
            if (classify_regime(p) != Regime::below_threshold) {
                std::cerr << "warning: skipping point at or above threshold\n";
                continue;
            }
            rows.push_back(moment_row(p));
        }
    }
    auto os = open_out(s, "analytic.csv");
    io::write_table(os, kMomentColumns, rows, h);
    return 0;
}

std::vector<double> omega_grid(const Scenario& s) {
    if (!s.sweep) return default_omega_grid();
    if (s.sweep->variable != "omega") throw UsageError("spectrum: only an omega sweep is supported");
    return uniform_grid(s.sweep->from, s.sweep->to, s.sweep->count);
}

int cmd_spectrum(const Scenario& s) {
    const auto grid = omega_grid(s);
    const auto regime = classify_regime(s.params);
    if (regime == Regime::above_threshold) throw DivergenceError("spectrum: above threshold");
    io::Header h = header_of(s);
    if (s.sweep) h.add("omega_from", s.sweep->from).add("omega_to", s.sweep->to);
    {
        auto os = open_out(s, "spectrum_squeezing_minus.csv");
        io::write_spectrum(os, squeezing_spectrum_out(s.params, grid, Branch::minus), h);
    }
    {
        auto os = open_out(s, "spectrum_squeezing_plus.csv");
        io::write_spectrum(os, squeezing_spectrum_out(s.params, grid, Branch::plus), h);
    }
    if (regime == Regime::critical) {
        std::cerr << "warning: power spectra diverge at the critical point; not written\n";
        return 0;
    }
    {
        auto os = open_out(s, "spectrum_power_cavity.csv");
        io::write_spectrum(os, power_spectrum(s.params, grid, Field::cavity), h);
    }
    {
        io::Header ho = h;
        ho.add("variant", to_string(variant_of(s)));
        auto os = open_out(s, "spectrum_power_output.csv");
        io::write_spectrum(os, power_spectrum(s.params, grid, Field::output, variant_of(s)), ho);
    }
    return 0;
}

int cmd_pnd(const Scenario& s, const std::string& field, bool rho_diagonal) {
    require_below_threshold(s.params, "pnd");
    const Field f = field == "cavity" ? Field::cavity : Field::output;
    const auto dist = adaptive_photon_distribution(gaussian_state(moments_ss(s.params, f)));
    {
        io::Header h = header_of(s);
        h.add("field", to_string(f));
        auto os = open_out(s, "pnd.csv");
        io::write_distribution(os, dist, h);
    }
    if (rho_diagonal) {
        FockOptions fo;
        fo.auto_step = true;
        const auto res = evolve_to_steady(s.params, fo);
        std::vector<double> diag(res.rho.dim());
        for (std::size_t n = 0; n < diag.size(); ++n) diag[n] = res.rho(n, n).real();
        io::Header h = header_of(s);
        h.add("field", "cavity").add("residual", res.residual).add("time", res.time);
        auto os = open_out(s, "rho_diagonal.csv");
        io::write_rho_diagonal(os, diag, h);
    }
    return 0;
}

int cmd_simulate(const Scenario& s, bool minus_only, const std::string& dump) {
    const auto d = derive(s.params);
    const auto regime = classify_regime(s.params);
    if (regime == Regime::above_threshold)
        throw DivergenceError("simulate: above threshold, no stationary state to estimate");
    const NoiseModel nm = noise_model(s.params);
    // near threshold the amplified quadrature relaxes too slowly to reach a stationary window
    if (!minus_only && (regime == Regime::critical || nm.lambda_plus < 0.01 * nm.lambda_minus ||
                        (s.t_end > 0.0 && s.t_end < 5.0 / nm.lambda_plus + s.window))) {
        std::cerr << "note: plus branch relaxation time " << 1.0 / nm.lambda_plus
                  << " too long for a stationary estimate; estimating the minus branch only\n";
        minus_only = true;
    }
    const double slow = minus_only ? nm.lambda_minus : nm.lambda_plus;

    EngineOptions eo;
    eo.n_traj = s.n_traj;
    eo.dt = s.dt;
    eo.seed = s.seed;
    eo.threads = s.threads;
    AccumulatorConfig cfg;
    cfg.max_lag = s.max_lag > 0.0 ? s.max_lag : 20.0 / slow;
    cfg.window = s.window > 0.0 ? s.window : std::max(1.5 * cfg.max_lag, cfg.max_lag);
    // resolve the fast (minus) decay with about ten lags per relaxation time
    cfg.lag_stride = std::max<std::size_t>(1, static_cast<std::size_t>(0.1 / (nm.lambda_minus * eo.step(s.params))));
    cfg.origin_stride = 4;
    if (minus_only) cfg.series = {CorrelationKind::cavity_minus, CorrelationKind::output_minus};
    eo.t_end = s.t_end > 0.0 ? s.t_end : 10.0 / slow + cfg.window;

    io::Header h = header_of(s);
    h.add("ntraj", std::uint64_t{eo.n_traj}).add("dt", eo.step(s.params)).add("tend", eo.t_end)
        .add("seed", eo.seed).add("max_lag", cfg.max_lag).add("window", cfg.window)
        .add("lag_stride", std::uint64_t{cfg.lag_stride}).add("origin_stride", std::uint64_t{cfg.origin_stride})
        .add("branches", minus_only ? "minus" : "both");

    CorrelationAccumulator acc(s.params, eo, cfg);
    std::ofstream records;
    if (!dump.empty()) {
        if (const auto dir = fs::path(dump).parent_path(); !dir.empty()) fs::create_directories(dir);
        records.open(dump, std::ios::binary);
        if (!records) throw std::runtime_error("cannot write " + dump);
        io::write_records_header(records, s.params, eo);
        // single thread so that records are written in trajectory order
        eo.threads = 1;
    }
    for_each_trajectory(s.params, eo, [&](std::size_t g, std::size_t, const TrajectoryRecord& rec) {
        acc.add(g, rec);
        if (records.is_open()) io::write_record(records, rec);
    });
    if (records.is_open()) std::cout << "wrote " << dump << '\n';

    std::vector<io::SummaryRow> rows;
    const std::vector<double> zero{0.0};
    const auto sq = squeeze_factors(s.params.r);
    const auto res = d.reservoir;
    const auto cav_minus = acc.estimate(CorrelationKind::cavity_minus);
    const auto out_minus = acc.estimate(CorrelationKind::output_minus);
    {
        auto os = open_out(s, "correlation_cavity_minus.csv");
        io::write_correlation(os, cav_minus, h);
        auto oo = open_out(s, "correlation_output_minus.csv");
        io::write_correlation(oo, out_minus, h);
    }
    // cavity minus variance is 1 - <v^2> in this representation
    rows.push_back({"cavity_var_minus", 1.0 - cav_minus.values[0], cav_minus.std_errs[0],
                    quadrature_variances(s.params, Field::cavity).var_minus});
    try {
        const auto v = equal_time_output_variance(out_minus, sq.second);
        rows.push_back({"output_var_minus", v.value, v.std_err,
                        quadrature_variances(s.params, Field::output).var_minus});
        const auto sm = spectrum_from_correlation(out_minus, zero, sq.second);
        rows.push_back({"output_squeezing_minus_0", sm.curve.values[0], sm.std_errs[0],
                        squeezing_spectrum_out(s.params, zero, Branch::minus).values[0]});
    } catch (const EstimationError& e) {
        std::cerr << "warning: " << e.what() << '\n';
    }

    if (!minus_only) {
        const auto cav_plus = acc.estimate(CorrelationKind::cavity_plus);
        const auto out_plus = acc.estimate(CorrelationKind::output_plus);
        auto os = open_out(s, "correlation_cavity_plus.csv");
        io::write_correlation(os, cav_plus, h);
        auto oo = open_out(s, "correlation_output_plus.csv");
        io::write_correlation(oo, out_plus, h);
        const auto cm = cavity_moments_estimate(cav_plus, cav_minus);
        const auto exact = cavity_moments_ss(s.params);
        const auto exact_out = output_moments_ss(s.params);
        rows.push_back({"cavity_mean_photon", cm.mean_photon.value, cm.mean_photon.std_err, exact.mean_photon});
        rows.push_back({"cavity_anomalous", cm.anomalous.value, cm.anomalous.std_err, exact.anomalous});
        try {
            const auto om = equal_time_output_moments(out_plus, out_minus, res);
            rows.push_back({"output_mean_photon", om.mean_photon.value, om.mean_photon.std_err, exact_out.mean_photon});
            rows.push_back({"output_anomalous", om.anomalous.value, om.anomalous.std_err, exact_out.anomalous});
            const auto power = acc.estimate(CorrelationKind::output_power);
            const auto grid = uniform_grid(-1.0, 1.0, 41);
            const auto sp = spectrum_from_correlation(power, grid, res.n_res);
            auto osp = open_out(s, "mc_spectrum_power_output.csv");
            io::write_spectrum(osp, sp, h);
            rows.push_back({"output_power_0", sp.curve.values[20], sp.std_errs[20],
                            power_spectrum(s.params, zero, Field::output).values[0]});
        } catch (const EstimationError& e) {
            std::cerr << "warning: " << e.what() << '\n';
        }
    }
    auto os = open_out(s, "simulate_summary.csv");
    io::write_summary(os, rows, h);
    for (const auto& r : rows)
        std::printf("%-26s %.6f +- %.6f  (closed form %.6f)\n", r.quantity.c_str(), r.estimate, r.std_err,
                    r.analytic);
    return 0;
}

int cmd_validate(const Scenario& s, const std::string& fault) {
    validation::CampaignOptions opt;
    opt.params = s.params;
    opt.n_traj = s.n_traj;
    opt.dt = s.dt;
    opt.seed = s.seed;
    opt.threads = s.threads;
    try {
        opt.fault = validation::parse_fault(fault);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const auto checks = validation::run_campaign(opt);
    io::Header h = header_of(s);
    h.add("ntraj", std::uint64_t{opt.n_traj}).add("seed", opt.seed);
    fs::create_directories(s.out);
    std::ofstream os(fs::path(s.out) / "validate.csv", std::ios::binary);
    h.write(os);
    os << "check,status,measured,reference,deviation,tolerance,stderr\n";
    for (const auto& c : checks) {
        std::printf("%-22s %-54s measured %.10g reference %.10g deviation %.3g", validation::to_string(c.status),
                    c.name.c_str(), c.measured, c.reference, c.deviation);
        if (c.std_err > 0.0)
            std::printf(" (%.2f SE, SE %.3g)\n", c.deviation / c.std_err, c.std_err);
        else
            std::printf(" (tolerance %.3g)\n", c.tolerance);
        os << '"' << c.name << "\"," << validation::to_string(c.status) << ',' << io::format_double(c.measured)
           << ',' << io::format_double(c.reference) << ',' << io::format_double(c.deviation) << ','
           << io::format_double(c.tolerance) << ',' << io::format_double(c.std_err) << '\n';
    }
    const bool ok = validation::all_passed(checks);
    std::printf("%s\n", ok ? "all checks passed" : "validation FAILED");
    return ok ? 0 : kExitValidation;
}

int cmd_figure(Scenario s, int number, std::size_t count) {
    s.params.kappa = 0.8;
    io::Header h;
    h.add("figure", std::uint64_t(number)).add("kappa", 0.8);
    std::vector<std::vector<double>> rows;
    std::vector<std::string> columns;
    if (number == 1 || number == 2 || number == 3) {
        const std::vector<double> rs = number == 2 ? std::vector<double>{0.0, 0.5, 0.75, 1.0}
                                                   : std::vector<double>{0.75};
        h.add("r_set", number == 2 ? "0,0.5,0.75,1" : "0.75");
        const double top = number == 3 ? 0.4 : 0.399;
        h.add("epsilon_from", 0.0).add("epsilon_to", top).add("count", std::uint64_t{count});
        columns = number == 3 ? std::vector<std::string>{"r", "epsilon", "cavity_var_minus", "output_var_minus"}
                              : std::vector<std::string>{"r", "epsilon", "cavity_mean_photon", "output_mean_photon"};
        for (double r : rs)
            for (double e : uniform_grid(0.0, top, count)) {
                const DpoParams p{0.8, e, r};
                if (number == 3) {
                    rows.push_back({r, e, quadrature_variances(p, Field::cavity).var_minus,
                                    quadrature_variances(p, Field::output).var_minus});
                } else {
                    rows.push_back({r, e, cavity_moments_ss(p).mean_photon, output_moments_ss(p).mean_photon});
                }
            }
    } else if (number == 4) {
        const std::vector<double> eps{0.1, 0.2, 0.3, 0.399};
        h.add("r", 0.75).add("epsilon_set", "0.1,0.2,0.3,0.399");
        const auto grid = default_omega_grid();
        columns = {"omega", "eps_0.1", "eps_0.2", "eps_0.3", "eps_0.399"};
        std::vector<SpectrumCurve> curves;
        for (double e : eps) curves.push_back(squeezing_spectrum_out({0.8, e, 0.75}, grid, Branch::minus));
        for (std::size_t i = 0; i < grid.size(); ++i)
            rows.push_back({grid[i], curves[0].values[i], curves[1].values[i], curves[2].values[i],
                            curves[3].values[i]});
    } else if (number == 5) {
        const DpoParams p{0.8, 0.2, 0.5};
        h.add("epsilon", 0.2).add("r", 0.5);
        const auto grid = default_omega_grid();
        columns = {"omega", "cavity", "output_derived", "output_printed"};
        const auto c = power_spectrum(p, grid, Field::cavity);
        const auto od = power_spectrum(p, grid, Field::output, PowerVariant::derived_consistent);
        const auto op = power_spectrum(p, grid, Field::output, PowerVariant::as_printed);
        for (std::size_t i = 0; i < grid.size(); ++i) rows.push_back({grid[i], c.values[i], od.values[i], op.values[i]});
    } else {
        throw UsageError("figure number must be 1..5");
    }
    auto os = open_out(s, "figure" + std::to_string(number) + ".csv");
    io::write_table(os, columns, rows, h);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Degenerate parametric oscillator with a squeezed reservoir: closed forms, "
                 "Fock-space oracle and Monte Carlo estimators"};
    app.set_version_flag("--version", std::string(io::kToolkitVersion));
    app.require_subcommand(1);

    Flags flags;
    auto* analytic = app.add_subcommand("analytic", "steady-state moments and quadrature variances");
    auto* spectrum = app.add_subcommand("spectrum", "squeezing and power spectra");
    auto* pnd = app.add_subcommand("pnd", "photon-number distribution");
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo ensemble with correlation estimates");
    auto* validate_cmd = app.add_subcommand("validate", "cross-check all routes against the closed forms");
    auto* figure = app.add_subcommand("figure", "plot data for the reference figures");
    for (auto* cmd : {analytic, spectrum, pnd, simulate, validate_cmd, figure}) add_scenario_options(cmd, flags);

    std::string field = "output";
    bool rho_diag = false;
    pnd->add_option("--field", field, "cavity or output")->check(CLI::IsMember({"cavity", "output"}));
    pnd->add_flag("--rho-diagonal", rho_diag, "also dump the Fock-oracle steady-state diagonal");

    bool minus_only = false;
    std::string dump;
    simulate->add_flag("--minus-only", minus_only, "only the fast (minus) branch, for near-critical runs");
    simulate->add_option("--dump-records", dump, "write raw trajectory records to this binary file");

    std::string fault;
    validate_cmd->add_option("--inject-fault", fault, "corrupt one reference formula")->group("");

    int figure_number = 0;
    std::size_t figure_count = 400;
    figure->add_option("number", figure_number, "1..5")->required()->check(CLI::Range(1, 5));
    figure->add_option("--count", figure_count, "points per sweep")->check(CLI::Range(2, 100000));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        CLI::App* cmd = app.get_subcommands().front();
        const Scenario s = build_scenario(cmd, flags);
        if (cmd == analytic) return cmd_analytic(s);
        if (cmd == spectrum) return cmd_spectrum(s);
        if (cmd == pnd) return cmd_pnd(s, field, rho_diag);
        if (cmd == simulate) return cmd_simulate(s, minus_only, dump);
        if (cmd == validate_cmd) return cmd_validate(s, fault);
        if (cmd == figure) return cmd_figure(s, figure_number, figure_count);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ParameterError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
