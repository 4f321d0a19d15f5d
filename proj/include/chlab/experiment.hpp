// experiment.hpp — sectioned key=value experiment configs, and the drivers
// behind the CLI subcommands: potential tables, single flow runs, the eps
// sweep, the audit battery, and data preparation.  Everything written to the
// output directory is deterministic for a fixed config and seed (the sweep's
// runtime column is the one documented exception).

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "chlab/analysis.hpp"
#include "chlab/dynamics.hpp"
#include "chlab/energy.hpp"
#include "chlab/field.hpp"
#include "chlab/potential.hpp"
#include "chlab/preparation.hpp"

namespace chlab {

inline constexpr int kConfigSchemaVersion = 1;

class ConfigError : public std::runtime_error {
  public:
    ConfigError(const std::string& file, int line, const std::string& what)
        : std::runtime_error(file + ":" + std::to_string(line) + ": " + what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

struct TargetSpec {
    enum class Kind { constant, sinusoid, piecewise, file };
    Kind kind = Kind::constant;
    double value = 0.0;  // constant
    double mean = 0.0;   // sinusoid
    double amplitude = 0.0;
    int wavenumber = 1;
    std::vector<std::array<double, 3>> pieces;  // lo, hi, value on T
    std::string path;                           // field csv
};

struct ExperimentConfig {
    // [potential]
    std::string potential_kind = "double_well";  // double_well | custom
    std::string potential_table;                 // csv of v,W,Wp,Wpp for custom
    double hull_lo = -3.0;
    double hull_hi = 3.0;
    int hull_samples = 4096;
    // [grid]
    int n = 512;
    // [time]
    double tau = 0.0;  // 0 = per-flow default
    double t_end = 0.01;
    int snapshot_stride = 100;
    double nonlinear_tol = 1e-10;
    int nonlinear_max_iter = 400;
    double stabilization = -1.0;
    // [sweep]
    std::vector<double> eps_list = {0.1, 0.05, 0.025};
    int checkpoints = 50;
    // [target]
    TargetSpec target;
    // [preparation]
    std::string preparation_mode = "none";  // none | recovery | wrinkle
    double region_lo = 0.0;
    double region_hi = 1.0;
    double lambda_exponent = 0.5;
    double delta_exponent = 0.75;
    double eps_prepare = 0.01;  // scale used by `prepare` and the audit data
    // [audit]
    bool audit_young = true;
    bool audit_support = true;
    bool audit_correlation = true;
    bool audit_oscillation = true;
    bool audit_neighborhood = true;
    int windows = 32;
    int bins = 64;
    double audit_tol = 0.05;
    double audit_e = 0.05;
    double audit_delta = 0.01;
    double audit_delta_prime = 0.01;
    // [output]
    std::string out_dir = "out";
    std::uint64_t seed = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline double parse_double(const std::string& file, int line, const std::string& key,
                           const std::string& v) {
    try {
        size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(file, line, key + ": '" + v + "' is not a number");
    }
}

inline int parse_int(const std::string& file, int line, const std::string& key,
                     const std::string& v) {
    try {
        size_t pos = 0;
        const int x = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError(file, line, key + ": '" + v + "' is not an integer");
    }
}

inline bool parse_bool(const std::string& file, int line, const std::string& key,
                       const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(file, line, key + ": '" + v + "' is not a boolean");
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(std::istream& in, const std::string& file) {
    ExperimentConfig cfg;
    std::string section;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw ConfigError(file, lineno, "unterminated section header");
            section = s.substr(1, s.size() - 2);
            if (section != "potential" && section != "grid" && section != "time" &&
                section != "sweep" && section != "target" && section != "preparation" &&
                section != "audit" && section != "output")
                throw ConfigError(file, lineno, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError(file, lineno, "expected key = value");
        const std::string key = detail::trim(s.substr(0, eq));
        const std::string value = detail::trim(s.substr(eq + 1));
        if (section.empty()) throw ConfigError(file, lineno, "key outside any section");

        auto unknown = [&]() -> ConfigError {
            return ConfigError(file, lineno, "unknown key '" + key + "' in [" + section + "]");
        };

        if (section == "potential") {
            if (key == "kind") {
                if (value != "double_well" && value != "custom")
                    throw ConfigError(file, lineno, "kind must be double_well or custom");
                cfg.potential_kind = value;
            } else if (key == "table")
                cfg.potential_table = value;
            else if (key == "hull_lo")
                cfg.hull_lo = detail::parse_double(file, lineno, key, value);
            else if (key == "hull_hi")
                cfg.hull_hi = detail::parse_double(file, lineno, key, value);
            else if (key == "hull_samples")
                cfg.hull_samples = detail::parse_int(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "grid") {
            if (key == "n")
                cfg.n = detail::parse_int(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "time") {
            if (key == "tau")
                cfg.tau = detail::parse_double(file, lineno, key, value);
            else if (key == "t_end")
                cfg.t_end = detail::parse_double(file, lineno, key, value);
            else if (key == "snapshot_stride")
                cfg.snapshot_stride = detail::parse_int(file, lineno, key, value);
            else if (key == "nonlinear_tol")
                cfg.nonlinear_tol = detail::parse_double(file, lineno, key, value);
            else if (key == "nonlinear_max_iter")
                cfg.nonlinear_max_iter = detail::parse_int(file, lineno, key, value);
            else if (key == "stabilization")
                cfg.stabilization = detail::parse_double(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "sweep") {
            if (key == "eps_list") {
                cfg.eps_list.clear();
                for (const auto& tok : detail::split(value, ','))
                    cfg.eps_list.push_back(detail::parse_double(file, lineno, key, tok));
            } else if (key == "checkpoints")
                cfg.checkpoints = detail::parse_int(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "target") {
            if (key == "kind") {
                if (value == "constant")
                    cfg.target.kind = TargetSpec::Kind::constant;
                else if (value == "sinusoid")
                    cfg.target.kind = TargetSpec::Kind::sinusoid;
                else if (value == "piecewise")
                    cfg.target.kind = TargetSpec::Kind::piecewise;
                else if (value == "file")
                    cfg.target.kind = TargetSpec::Kind::file;
                else
                    throw ConfigError(file, lineno,
                                      "kind must be constant|sinusoid|piecewise|file");
            } else if (key == "value")
                cfg.target.value = detail::parse_double(file, lineno, key, value);
            else if (key == "mean")
                cfg.target.mean = detail::parse_double(file, lineno, key, value);
            else if (key == "amplitude")
                cfg.target.amplitude = detail::parse_double(file, lineno, key, value);
            else if (key == "wavenumber")
                cfg.target.wavenumber = detail::parse_int(file, lineno, key, value);
            else if (key == "pieces") {
                cfg.target.pieces.clear();
                // lo:hi=value, comma separated
                for (const auto& tok : detail::split(value, ',')) {
                    const auto colon = tok.find(':');
                    const auto eq2 = tok.find('=');
                    if (colon == std::string::npos || eq2 == std::string::npos || eq2 < colon)
                        throw ConfigError(file, lineno, "pieces entries look like lo:hi=value");
                    cfg.target.pieces.push_back(
                        {detail::parse_double(file, lineno, key, detail::trim(tok.substr(0, colon))),
                         detail::parse_double(file, lineno, key,
                                              detail::trim(tok.substr(colon + 1, eq2 - colon - 1))),
                         detail::parse_double(file, lineno, key, detail::trim(tok.substr(eq2 + 1)))});
                }
            } else if (key == "path")
                cfg.target.path = value;
            else
                throw unknown();
        } else if (section == "preparation") {
            if (key == "mode") {
                if (value != "none" && value != "recovery" && value != "wrinkle")
                    throw ConfigError(file, lineno, "mode must be none|recovery|wrinkle");
                cfg.preparation_mode = value;
            } else if (key == "region_lo")
                cfg.region_lo = detail::parse_double(file, lineno, key, value);
            else if (key == "region_hi")
                cfg.region_hi = detail::parse_double(file, lineno, key, value);
            else if (key == "lambda_exponent")
                cfg.lambda_exponent = detail::parse_double(file, lineno, key, value);
            else if (key == "delta_exponent")
                cfg.delta_exponent = detail::parse_double(file, lineno, key, value);
            else if (key == "eps_prepare")
                cfg.eps_prepare = detail::parse_double(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "audit") {
            if (key == "young")
                cfg.audit_young = detail::parse_bool(file, lineno, key, value);
            else if (key == "support")
                cfg.audit_support = detail::parse_bool(file, lineno, key, value);
            else if (key == "correlation")
                cfg.audit_correlation = detail::parse_bool(file, lineno, key, value);
            else if (key == "oscillation")
                cfg.audit_oscillation = detail::parse_bool(file, lineno, key, value);
            else if (key == "neighborhood")
                cfg.audit_neighborhood = detail::parse_bool(file, lineno, key, value);
            else if (key == "windows")
                cfg.windows = detail::parse_int(file, lineno, key, value);
            else if (key == "bins")
                cfg.bins = detail::parse_int(file, lineno, key, value);
            else if (key == "tol")
                cfg.audit_tol = detail::parse_double(file, lineno, key, value);
            else if (key == "e")
                cfg.audit_e = detail::parse_double(file, lineno, key, value);
            else if (key == "delta")
                cfg.audit_delta = detail::parse_double(file, lineno, key, value);
            else if (key == "delta_prime")
                cfg.audit_delta_prime = detail::parse_double(file, lineno, key, value);
            else
                throw unknown();
        } else if (section == "output") {
            if (key == "dir")
                cfg.out_dir = value;
            else if (key == "seed")
                cfg.seed = static_cast<std::uint64_t>(
                    detail::parse_int(file, lineno, key, value));
            else
                throw unknown();
        }
    }

    // validation of the assembled config
    if (!is_power_of_two(cfg.n) || cfg.n < 16)
        throw ConfigError(file, 0, "grid n must be a power of two >= 16");
    if (cfg.eps_list.empty()) throw ConfigError(file, 0, "eps_list must be nonempty");
    for (size_t i = 0; i < cfg.eps_list.size(); ++i) {
        if (!(cfg.eps_list[i] > 0.0 && cfg.eps_list[i] <= 1.0))
            throw ConfigError(file, 0, "eps values must lie in (0,1]");
        if (i > 0 && cfg.eps_list[i] >= cfg.eps_list[i - 1])
            throw ConfigError(file, 0, "eps_list must be strictly decreasing");
    }
    if (!(cfg.t_end > 0.0)) throw ConfigError(file, 0, "t_end must be positive");
    if (cfg.tau < 0.0) throw ConfigError(file, 0, "tau must be nonnegative (0 = default)");
    if (!(cfg.nonlinear_tol > 0.0)) throw ConfigError(file, 0, "nonlinear_tol must be positive");
    if (cfg.potential_kind == "custom" && cfg.potential_table.empty())
        throw ConfigError(file, 0, "custom potential requires table=");
    if (cfg.windows < 1 || cfg.n % cfg.windows != 0)
        throw ConfigError(file, 0, "audit windows must divide n");
    if (!(cfg.eps_prepare > 0.0 && cfg.eps_prepare <= 1.0))
        throw ConfigError(file, 0, "eps_prepare must lie in (0,1]");
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path, 0, "cannot open config file");
    return parse_experiment_config(in, path);
}

inline void serialize_config(std::ostream& out, const ExperimentConfig& cfg) {
    out << "; chlab config schema " << kConfigSchemaVersion << "\n";
    out << "[potential]\n";
    out << "kind = " << cfg.potential_kind << "\n";
    if (!cfg.potential_table.empty()) out << "table = " << cfg.potential_table << "\n";
    out << "hull_lo = " << format_full(cfg.hull_lo) << "\n";
    out << "hull_hi = " << format_full(cfg.hull_hi) << "\n";
    out << "hull_samples = " << cfg.hull_samples << "\n";
    out << "[grid]\n";
    out << "n = " << cfg.n << "\n";
    out << "[time]\n";
    out << "tau = " << format_full(cfg.tau) << "\n";
    out << "t_end = " << format_full(cfg.t_end) << "\n";
    out << "snapshot_stride = " << cfg.snapshot_stride << "\n";
    out << "nonlinear_tol = " << format_full(cfg.nonlinear_tol) << "\n";
    out << "nonlinear_max_iter = " << cfg.nonlinear_max_iter << "\n";
    out << "stabilization = " << format_full(cfg.stabilization) << "\n";
    out << "[sweep]\n";
    out << "eps_list = ";
    for (size_t i = 0; i < cfg.eps_list.size(); ++i)
        out << (i ? "," : "") << format_full(cfg.eps_list[i]);
    out << "\n";
    out << "checkpoints = " << cfg.checkpoints << "\n";
    out << "[target]\n";
    switch (cfg.target.kind) {
        case TargetSpec::Kind::constant:
            out << "kind = constant\nvalue = " << format_full(cfg.target.value) << "\n";
            break;
        case TargetSpec::Kind::sinusoid:
            out << "kind = sinusoid\nmean = " << format_full(cfg.target.mean)
                << "\namplitude = " << format_full(cfg.target.amplitude)
                << "\nwavenumber = " << cfg.target.wavenumber << "\n";
            break;
        case TargetSpec::Kind::piecewise: {
            out << "kind = piecewise\npieces = ";
            for (size_t i = 0; i < cfg.target.pieces.size(); ++i) {
                const auto& p = cfg.target.pieces[i];
                out << (i ? "," : "") << format_full(p[0]) << ":" << format_full(p[1]) << "="
                    << format_full(p[2]);
            }
            out << "\n";
            break;
        }
        case TargetSpec::Kind::file:
            out << "kind = file\npath = " << cfg.target.path << "\n";
            break;
    }
    out << "[preparation]\n";
    out << "mode = " << cfg.preparation_mode << "\n";
    out << "region_lo = " << format_full(cfg.region_lo) << "\n";
    out << "region_hi = " << format_full(cfg.region_hi) << "\n";
    out << "lambda_exponent = " << format_full(cfg.lambda_exponent) << "\n";
    out << "delta_exponent = " << format_full(cfg.delta_exponent) << "\n";
    out << "eps_prepare = " << format_full(cfg.eps_prepare) << "\n";
    out << "[audit]\n";
    out << "young = " << (cfg.audit_young ? "true" : "false") << "\n";
    out << "support = " << (cfg.audit_support ? "true" : "false") << "\n";
    out << "correlation = " << (cfg.audit_correlation ? "true" : "false") << "\n";
    out << "oscillation = " << (cfg.audit_oscillation ? "true" : "false") << "\n";
    out << "neighborhood = " << (cfg.audit_neighborhood ? "true" : "false") << "\n";
    out << "windows = " << cfg.windows << "\n";
    out << "bins = " << cfg.bins << "\n";
    out << "tol = " << format_full(cfg.audit_tol) << "\n";
    out << "e = " << format_full(cfg.audit_e) << "\n";
    out << "delta = " << format_full(cfg.audit_delta) << "\n";
    out << "delta_prime = " << format_full(cfg.audit_delta_prime) << "\n";
    out << "[output]\n";
    out << "dir = " << cfg.out_dir << "\n";
    out << "seed = " << cfg.seed << "\n";
}

// --- building blocks shared by the subcommands ---

inline PotentialModel build_potential(const ExperimentConfig& cfg) {
    if (cfg.potential_kind == "double_well") return build_double_well(cfg.hull_samples);

    // custom: linear interpolation in a v,W,Wp,Wpp table
    std::ifstream in(cfg.potential_table);
    if (!in) throw ConfigError(cfg.potential_table, 0, "cannot open potential table");
    std::string line;
    std::getline(in, line);
    if (detail::trim(line) != "v,W,Wp,Wpp")
        throw ConfigError(cfg.potential_table, 1, "expected header v,W,Wp,Wpp");
    auto rows = std::make_shared<std::vector<std::array<double, 4>>>();
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        const auto toks = detail::split(line, ',');
        if (toks.size() != 4)
            throw ConfigError(cfg.potential_table, lineno, "expected 4 columns");
        std::array<double, 4> row;
        for (int c = 0; c < 4; ++c)
            row[c] = detail::parse_double(cfg.potential_table, lineno, "column", toks[c]);
        if (!rows->empty() && row[0] <= rows->back()[0])
            throw ConfigError(cfg.potential_table, lineno, "v column must increase");
        rows->push_back(row);
    }
    if (rows->size() < 64) throw ConfigError(cfg.potential_table, lineno, "need >= 64 rows");

    auto interp = [rows](int col) {
        return [rows, col](double v) {
            const auto& t = *rows;
            if (v <= t.front()[0]) return t.front()[col];
            if (v >= t.back()[0]) return t.back()[col];
            size_t lo = 0, hi = t.size() - 1;
            while (hi - lo > 1) {
                const size_t mid = (lo + hi) / 2;
                if (t[mid][0] <= v)
                    lo = mid;
                else
                    hi = mid;
            }
            const double s = (v - t[lo][0]) / (t[hi][0] - t[lo][0]);
            return t[lo][col] + s * (t[hi][col] - t[lo][col]);
        };
    };
    return build_custom(interp(1), interp(2), interp(3), rows->front()[0], rows->back()[0],
                        cfg.hull_samples);
}

inline PeriodicField build_target(const ExperimentConfig& cfg) {
    switch (cfg.target.kind) {
        case TargetSpec::Kind::constant:
            return constant_field(cfg.n, cfg.target.value);
        case TargetSpec::Kind::sinusoid:
            return sinusoid_field(cfg.n, cfg.target.mean, cfg.target.amplitude,
                                  cfg.target.wavenumber);
        case TargetSpec::Kind::piecewise: {
            PeriodicField f = constant_field(cfg.n, 0.0);
            for (int j = 0; j < cfg.n; ++j) {
                const double x = f.x(j);
                for (const auto& p : cfg.target.pieces)
                    if (x >= p[0] && x < p[1]) f.v[j] = p[2];
            }
            return f;
        }
        case TargetSpec::Kind::file: {
            std::ifstream in(cfg.target.path);
            if (!in) throw ConfigError(cfg.target.path, 0, "cannot open target field file");
            auto f = read_field_csv(in);
            if (f.n != cfg.n)
                throw ConfigError(cfg.target.path, 0, "target field grid does not match n");
            return f;
        }
    }
    throw std::logic_error("unreachable");
}

inline PeriodicField build_prepared(const ExperimentConfig& cfg, const PotentialModel& m,
                                    const PeriodicField& target, double eps) {
    PreparationOptions opt;
    opt.lambda_exponent = cfg.lambda_exponent;
    opt.delta_exponent = cfg.delta_exponent;
    if (cfg.preparation_mode == "recovery") return prepare_recovery(m, target, eps, opt);
    if (cfg.preparation_mode == "wrinkle")
        return wrinkle(m, target, cfg.region_lo, cfg.region_hi, eps, opt);
    return target;
}

inline SolverConfig solver_config(const ExperimentConfig& cfg) {
    SolverConfig s;
    s.n = cfg.n;
    s.tau = cfg.tau;
    s.T_end = cfg.t_end;
    s.stabilization = cfg.stabilization;
    s.snapshot_stride = cfg.snapshot_stride;
    s.nonlinear_tol = cfg.nonlinear_tol;
    s.nonlinear_max_iter = cfg.nonlinear_max_iter;
    return s;
}

// Creates the output directory, refusing to reuse a nonempty one without
// force, and drops the resolved config + schema stamp into it.
inline std::filesystem::path prepare_output_dir(const ExperimentConfig& cfg,
                                                const std::string& override_dir, bool force) {
    namespace fs = std::filesystem;
    const fs::path dir = override_dir.empty() ? fs::path(cfg.out_dir) : fs::path(override_dir);
    if (fs::exists(dir) && !fs::is_empty(dir) && !force)
        throw ConfigError(dir.string(), 0,
                          "output directory exists and is not empty (use --force to overwrite)");
    fs::create_directories(dir);
    std::ofstream out(dir / "config.resolved.ini");
    serialize_config(out, cfg);
    return dir;
}

// --- subcommands; return process exit codes (0 pass, 1 audit fail) ---

inline int cmd_potential(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    const auto dir = prepare_output_dir(cfg, out_dir, force);
    const auto m = build_potential(cfg);
    {
        std::ofstream out(dir / "envelope.csv");
        write_envelope_csv(out, m);
    }
    std::ofstream out(dir / "sigma.txt");
    out << "sigma_G components: " << m.sigma_G.size() << "\n";
    for (const auto& s : m.sigma_G)
        out << "sigma_G " << format_full(s.lo) << " " << format_full(s.hi) << "\n";
    out << "sigma_L components: " << m.sigma_L.size() << "\n";
    for (const auto& s : m.sigma_L)
        out << "sigma_L " << format_full(s.lo) << " " << format_full(s.hi) << "\n";
    if (m.growth_warning)
        out << "warning: growth constant " << format_full(m.growth_constant) << " exceeds cap\n";
    return 0;
}

inline int cmd_run(const ExperimentConfig& cfg, const std::string& out_dir, bool force,
                   bool stefan) {
    const auto dir = prepare_output_dir(cfg, out_dir, force);
    const auto m = build_potential(cfg);
    const auto target = build_target(cfg);
    const double eps = cfg.eps_list.front();
    const auto u0 = build_prepared(cfg, m, target, stefan ? cfg.eps_prepare : eps);
    const auto traj =
        stefan ? run_stefan(m, u0, solver_config(cfg)) : run_cahn_hilliard(m, u0, eps, solver_config(cfg));
    {
        std::ofstream out(dir / "ledger.csv");
        write_ledger_csv(out, traj);
    }
    for (size_t i = 0; i < traj.snapshots.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "snapshot_%04zu.csv", i);
        std::ofstream out(dir / name);
        out << "# t=" << format_full(traj.times[i]) << "\n";
        write_field_csv(out, traj.snapshots[i]);
    }
    if (!stefan) {
        SpectralWorkspace ws(cfg.n);
        std::ofstream out(dir / "energy_reports.csv");
        for (size_t i = 0; i < traj.snapshots.size(); ++i)
            write_energy_report_csv(out, make_energy_report(m, ws, traj.snapshots[i], eps), i == 0);
    }
    std::ofstream out(dir / "status.txt");
    out << to_string(traj.status) << "\n";
    if (!traj.message.empty()) out << traj.message << "\n";
    return traj.status == RunStatus::ok ? 0 : 1;
}

inline int cmd_sweep(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    const auto dir = prepare_output_dir(cfg, out_dir, force);
    const auto m = build_potential(cfg);
    const auto target = build_target(cfg);
    PreparationOptions opt;
    opt.lambda_exponent = cfg.lambda_exponent;
    opt.delta_exponent = cfg.delta_exponent;
    const auto table =
        convergence_study(m, target, cfg.eps_list, solver_config(cfg), cfg.t_end, cfg.checkpoints, opt);
    {
        std::ofstream out(dir / "convergence.csv");
        write_convergence_csv(out, table);
    }
    const bool pass = table.hminus1_ok && table.slope_ok && table.energy_ok;
    std::ofstream out(dir / "summary.txt");
    out << "sup_hminus1 column decreasing (<= one 10% inversion): "
        << (table.hminus1_ok ? "PASS" : "FAIL") << "\n";
    out << "slope time-integral column decreasing: " << (table.slope_ok ? "PASS" : "FAIL") << "\n";
    out << "energy checkpoint errors decreasing (max over checkpoints): "
        << (table.energy_ok ? "PASS" : "FAIL") << "\n";
    out << (pass ? "PASS" : "FAIL") << "\n";
    return pass ? 0 : 1;
}

inline int cmd_prepare(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    const auto dir = prepare_output_dir(cfg, out_dir, force);
    const auto m = build_potential(cfg);
    const auto target = build_target(cfg);
    PreparationOptions opt;
    opt.lambda_exponent = cfg.lambda_exponent;
    opt.delta_exponent = cfg.delta_exponent;
    RecoveryResult res;
    if (cfg.preparation_mode == "wrinkle")
        res = wrinkle_full(m, target, cfg.region_lo, cfg.region_hi, cfg.eps_prepare, opt);
    else
        res = prepare_recovery_full(m, target, cfg.eps_prepare, opt);
    {
        std::ofstream out(dir / "prepared.csv");
        write_field_csv(out, res.field);
    }
    std::ofstream out(dir / "plan.txt");
    write_plan_text(out, res.plan);
    return 0;
}

inline int cmd_audit(const ExperimentConfig& cfg, const std::string& out_dir, bool force) {
    const auto dir = prepare_output_dir(cfg, out_dir, force);
    const auto m = build_potential(cfg);
    const auto target = build_target(cfg);
    PreparationOptions opt;
    opt.lambda_exponent = cfg.lambda_exponent;
    opt.delta_exponent = cfg.delta_exponent;

    // audited sequence: prepared data per eps, coarse -> fine
    std::vector<PeriodicField> fields;
    for (double eps : cfg.eps_list) fields.push_back(build_prepared(cfg, m, target, eps));
    const auto finest = fields.back();

    std::ofstream summary(dir / "summary.txt");
    bool all_pass = true;

    EmpiricalYoungMeasure eym;
    const double lambda_finest = std::pow(cfg.eps_list.back(), cfg.lambda_exponent);
    if (cfg.audit_young || cfg.audit_support || cfg.audit_correlation) {
        eym = young_measure(fields, cfg.windows, cfg.bins,
                            cfg.preparation_mode == "none" ? 0.0 : lambda_finest);
        if (cfg.audit_young) {
            std::ofstream out(dir / "young_hist.csv");
            out << "window";
            for (int b = 0; b < cfg.bins; ++b) out << ",bin" << b;
            out << "\n";
            for (int w = 0; w < cfg.windows; ++w) {
                out << w;
                for (int b = 0; b < cfg.bins; ++b) out << "," << format_full(eym.hist[w][b]);
                out << "\n";
            }
            std::ofstream sup(dir / "young_support.csv");
            sup << "window,lo,hi,mean,variance\n";
            for (int w = 0; w < cfg.windows; ++w)
                sup << w << "," << format_full(eym.support[w].lo) << ","
                    << format_full(eym.support[w].hi) << "," << format_full(eym.window_mean(w))
                    << "," << format_full(eym.window_variance(w)) << "\n";
            summary << "young: PASS" << (eym.window_warning ? " (warning: windows hold < 8 periods)" : "")
                    << "\n";
        }
    }

    if (cfg.audit_support) {
        const auto rep = audit_support_dichotomy(m, eym, target, cfg.audit_tol);
        std::ofstream out(dir / "dichotomy.txt");
        out << "windows: " << cfg.windows << "\n";
        for (int w = 0; w < cfg.windows; ++w) {
            const char* c = rep.classes[w] == WindowClass::near_dirac        ? "near_dirac"
                            : rep.classes[w] == WindowClass::sigma_supported ? "sigma_supported"
                                                                             : "violation";
            out << "window " << w << ": " << c << "\n";
        }
        out << "max_moment_gap: " << format_full(rep.max_moment_gap) << "\n";
        out << "mass_within_dilated: " << format_full(eym.mass_within_dilated(m, cfg.audit_tol))
            << "\n";
        summary << "support_dichotomy: " << (rep.pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && rep.pass;
    }

    if (cfg.audit_correlation) {
        const auto rep = audit_correlation(m, eym, [](double v) { return v; });
        std::ofstream out(dir / "correlation.csv");
        out << "window,excess\n";
        for (size_t w = 0; w < rep.excess.size(); ++w)
            out << w << "," << format_full(rep.excess[w]) << "\n";
        out << "# max_positive_excess=" << format_full(rep.max_positive_excess) << "\n";
        summary << "correlation: reported max_positive_excess="
                << format_full(rep.max_positive_excess) << "\n";
    }

    if (cfg.audit_oscillation) {
        const auto rep = oscillation_audit(m, finest, cfg.eps_list.back(), cfg.audit_e, cfg.audit_delta);
        std::ofstream out(dir / "oscillation.txt");
        out << "critical_points: " << rep.critical_count << "\n";
        out << "violations: " << rep.violations.size() << "\n";
        for (const auto& v : rep.violations)
            out << "pair x=" << format_full(v.x) << " y=" << format_full(v.y)
                << " excursion=" << format_full(v.excursion) << "\n";
        summary << "oscillation: " << (rep.pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && rep.pass;
    }

    if (cfg.audit_neighborhood) {
        const auto rep = neighborhood_audit(m, finest, cfg.audit_e, cfg.audit_delta_prime);
        std::ofstream out(dir / "neighborhood.txt");
        out << "qualifying: " << rep.qualifying_count << "\n";
        out << "empirical_delta_prime: " << format_full(rep.empirical_delta_prime) << "\n";
        out << "violations: " << rep.violations.size() << "\n";
        summary << "neighborhood: " << (rep.pass ? "PASS" : "FAIL") << "\n";
        all_pass = all_pass && rep.pass;
    }

    summary << (all_pass ? "PASS" : "FAIL") << "\n";
    return all_pass ? 0 : 1;
}

}  // namespace chlab
