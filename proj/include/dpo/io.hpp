#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dpo/analytic.hpp"
#include "dpo/estimators.hpp"
#include "dpo/photon_statistics.hpp"
#include "dpo/sde_engine.hpp"

namespace dpo::io {

inline constexpr const char* kToolkitVersion = "0.1.0";

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Round-trippable decimal form of a double.
inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

/// Ordered "# key=value" lines written at the top of every CSV file.
class Header {
public:
    Header() { add("version", kToolkitVersion); }
    explicit Header(const DpoParams& p) : Header() {
        add("kappa", p.kappa);
        add("epsilon", p.epsilon);
        add("r", p.r);
    }

    Header& add(const std::string& key, const std::string& value) {
        entries_.emplace_back(key, value);
        return *this;
    }
    Header& add(const std::string& key, const char* value) { return add(key, std::string(value)); }
    Header& add(const std::string& key, double value) { return add(key, format_double(value)); }
    Header& add(const std::string& key, std::uint64_t value) { return add(key, std::to_string(value)); }

    const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

    void write(std::ostream& os) const {
        for (const auto& [k, v] : entries_) os << "# " << k << '=' << v << '\n';
    }

private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_row(std::ostream& os, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) os << ',';
        os << format_double(v);
        first = false;
    }
    os << '\n';
}

/// `omega,value`; the header also carries the spectrum kind and its floor.
inline void write_spectrum(std::ostream& os, const SpectrumCurve& c, Header h) {
    h.add("kind", to_string(c.kind)).add("floor", c.floor);
    h.write(os);
    os << "omega,value\n";
    for (std::size_t i = 0; i < c.omegas.size(); ++i) write_row(os, {c.omegas[i], c.values[i]});
}

/// `omega,value,stderr` for Monte Carlo spectra.
inline void write_spectrum(std::ostream& os, const SpectrumEstimate& s, Header h) {
    h.add("kind", to_string(s.curve.kind)).add("floor", s.curve.floor);
    h.write(os);
    os << "omega,value,stderr\n";
    for (std::size_t i = 0; i < s.curve.omegas.size(); ++i)
        write_row(os, {s.curve.omegas[i], s.curve.values[i], s.std_errs[i]});
}

/// `n,probability`
inline void write_distribution(std::ostream& os, const PhotonDistribution& d, Header h) {
    h.add("n_max", std::uint64_t{d.n_max}).add("tail_bound", d.tail_bound);
    h.write(os);
    os << "n,probability\n";
    for (std::size_t n = 0; n < d.probs.size(); ++n) write_row(os, {double(n), d.probs[n]});
}

/// `n,rho_nn`
inline void write_rho_diagonal(std::ostream& os, const std::vector<double>& diagonal, Header h) {
    h.add("dim", std::uint64_t{diagonal.size()});
    h.write(os);
    os << "n,rho_nn\n";
    for (std::size_t n = 0; n < diagonal.size(); ++n) write_row(os, {double(n), diagonal[n]});
}

/// `lag,value,stderr`
inline void write_correlation(std::ostream& os, const CorrelationEstimate& c, Header h) {
    h.add("kind", to_string(c.kind)).add("dt", c.dt);
    h.write(os);
    os << "lag,value,stderr\n";
    for (std::size_t l = 0; l < c.size(); ++l) write_row(os, {c.lags[l], c.values[l], c.std_errs[l]});
}

struct SummaryRow {
    std::string quantity;
    double estimate = 0.0;
    double std_err = 0.0;
    double analytic = 0.0;
};

/// `quantity,estimate,stderr,analytic`
inline void write_summary(std::ostream& os, const std::vector<SummaryRow>& rows, const Header& h) {
    h.write(os);
    os << "quantity,estimate,stderr,analytic\n";
    for (const auto& r : rows)
        os << r.quantity << ',' << format_double(r.estimate) << ',' << format_double(r.std_err) << ','
           << format_double(r.analytic) << '\n';
}

/// Generic table with named columns.
inline void write_table(std::ostream& os, const std::vector<std::string>& columns,
                        const std::vector<std::vector<double>>& rows, const Header& h) {
    h.write(os);
    for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
    os << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
}

// ---------------------------------------------------------------------------
// Raw trajectory records
//
// Layout, all little-endian:
//   bytes 0..7   magic "DPOREC1\0"
//   u64          n_traj
//   u64          n_steps
//   f64          dt
//   f64 x 3      kappa, epsilon, r
//   u64          seed
// then for each trajectory in index order and each step k = 0..n_steps-1 one
// row of four f64: u_k, v_k, dW_R+ over [t_k, t_k + dt), dW_R- over the same step.

inline constexpr char kRecordMagic[8] = {'D', 'P', 'O', 'R', 'E', 'C', '1', '\0'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t x) {
    if constexpr (std::endian::native == std::endian::big) x = __builtin_bswap64(x);
    os.write(reinterpret_cast<const char*>(&x), sizeof x);
}
inline void put_f64(std::ostream& os, double x) { put_u64(os, std::bit_cast<std::uint64_t>(x)); }

inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t x = 0;
    if (!is.read(reinterpret_cast<char*>(&x), sizeof x)) throw std::runtime_error("records: truncated file");
    if constexpr (std::endian::native == std::endian::big) x = __builtin_bswap64(x);
    return x;
}
inline double get_f64(std::istream& is) { return std::bit_cast<double>(get_u64(is)); }

}  // namespace detail

inline void write_records_header(std::ostream& os, const DpoParams& p, const EngineOptions& o) {
    os.write(kRecordMagic, sizeof kRecordMagic);
    detail::put_u64(os, o.n_traj);
    detail::put_u64(os, o.n_steps(p));
    detail::put_f64(os, o.step(p));
    detail::put_f64(os, p.kappa);
    detail::put_f64(os, p.epsilon);
    detail::put_f64(os, p.r);
    detail::put_u64(os, o.seed);
}

inline void write_record(std::ostream& os, const TrajectoryRecord& rec) {
    for (std::size_t k = 0; k < rec.n_steps(); ++k) {
        detail::put_f64(os, rec.u[k]);
        detail::put_f64(os, rec.v[k]);
        detail::put_f64(os, rec.dw_res_plus[k]);
        detail::put_f64(os, rec.dw_res_minus[k]);
    }
}

/// Reads a file written by write_records_header / write_record. The final
/// states u_{n_steps}, v_{n_steps} are not stored and come back as zero.
inline TrajectoryEnsemble read_records(std::istream& is) {
    char magic[8];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kRecordMagic, sizeof magic) != 0)
        throw std::runtime_error("records: bad magic");
    TrajectoryEnsemble ens;
    ens.options.n_traj = detail::get_u64(is);
    ens.n_steps = detail::get_u64(is);
    ens.dt = detail::get_f64(is);
    ens.params.kappa = detail::get_f64(is);
    ens.params.epsilon = detail::get_f64(is);
    ens.params.r = detail::get_f64(is);
    ens.options.seed = detail::get_u64(is);
    ens.options.dt = ens.dt;
    ens.options.t_end = ens.dt * static_cast<double>(ens.n_steps);
    ens.records.resize(ens.options.n_traj);
    for (auto& rec : ens.records) {
        rec.u.assign(ens.n_steps + 1, 0.0);
        rec.v.assign(ens.n_steps + 1, 0.0);
        rec.dw_res_plus.resize(ens.n_steps);
        rec.dw_res_minus.resize(ens.n_steps);
        for (std::size_t k = 0; k < ens.n_steps; ++k) {
            rec.u[k] = detail::get_f64(is);
            rec.v[k] = detail::get_f64(is);
            rec.dw_res_plus[k] = detail::get_f64(is);
            rec.dw_res_minus[k] = detail::get_f64(is);
        }
    }
    return ens;
}

// ---------------------------------------------------------------------------
// Configuration files: one "key = value" per line, '#' starts a comment.

using ConfigMap = std::map<std::string, std::string>;

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline ConfigMap parse_config(std::istream& is, const std::set<std::string>& allowed) {
    ConfigMap out;
    std::string line;
    for (std::size_t lineno = 1; std::getline(is, line); ++lineno) {
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (!allowed.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
        if (value.empty())
            throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
        if (out.count(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
        out[key] = value;
    }
    return out;
}

inline double config_double(const ConfigMap& m, const std::string& key, double fallback) {
    const auto it = m.find(key);
    if (it == m.end()) return fallback;
    std::size_t used = 0;
    double x = 0.0;
    try {
        x = std::stod(it->second, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != it->second.size()) throw ConfigError("config: '" + key + "' is not a number: " + it->second);
    return x;
}

inline std::uint64_t config_uint(const ConfigMap& m, const std::string& key, std::uint64_t fallback) {
    const auto it = m.find(key);
    if (it == m.end()) return fallback;
    std::size_t used = 0;
    std::uint64_t x = 0;
    try {
        if (!it->second.empty() && it->second[0] != '-') x = std::stoull(it->second, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != it->second.size())
        throw ConfigError("config: '" + key + "' is not a non-negative integer: " + it->second);
    return x;
}

}  // namespace dpo::io
