// analysis.hpp — numerical audits of what the theory constrains: windowed
// empirical Young measures and their support/correlation properties,
// oscillation-localization checks between critical points, the Gamma-liminf
// probe for the slopes, and the eps -> 0 trajectory convergence study.

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <ostream>
#include <string>
#include <vector>

#include "chlab/dynamics.hpp"
#include "chlab/energy.hpp"
#include "chlab/field.hpp"
#include "chlab/potential.hpp"
#include "chlab/preparation.hpp"

namespace chlab {

// ---------------------------------------------------------------------------
// Windowed empirical Young measure.  The histogram serves support and mass
// queries; moments are evaluated on the raw samples of the finest field so
// that exact atoms (e.g. W' vanishing at the envelope endpoints) are not
// smeared by binning.
// ---------------------------------------------------------------------------

struct EmpiricalYoungMeasure {
    int windows = 0;
    int bins = 0;
    double M = 0.0;                          // supports lie in [-M, M]
    std::vector<Interval> support;           // per-window sample range
    std::vector<std::vector<double>> hist;   // row-stochastic, windows x bins
    PeriodicField finest;
    std::vector<double> sequence_linf;       // per input field, coarse -> fine
    bool window_warning = false;             // < 8 microstructure periods per window

    int window_size() const { return finest.n / windows; }

    template <class F>
    double moment(int w, F&& f) const {
        const int ws = window_size();
        double s = 0.0;
        for (int c = 0; c < ws; ++c) s += f(finest.v[w * ws + c]);
        return s / ws;
    }

    double window_mean(int w) const {
        return moment(w, [](double v) { return v; });
    }

    double window_variance(int w) const {
        const double mu = window_mean(w);
        return moment(w, [&](double v) { return (v - mu) * (v - mu); });
    }

    // Fraction of all samples within the rho-dilated closure of Sigma_G.
    double mass_within_dilated(const PotentialModel& m, double rho) const {
        int in = 0;
        for (double v : finest.v)
            if (m.dist_to_sigma_G(v) <= rho) ++in;
        return static_cast<double>(in) / finest.n;
    }
};

inline EmpiricalYoungMeasure young_measure(const std::vector<PeriodicField>& fields, int windows,
                                           int bins, double microstructure_wavelength = 0.0) {
    if (fields.empty()) throw std::invalid_argument("young_measure needs at least one field");
    const int n = fields.front().n;
    for (const auto& f : fields)
        if (f.n != n) throw std::invalid_argument("young_measure fields must share the grid");
    if (windows < 1 || n % windows != 0)
        throw std::invalid_argument("window count must divide the grid size");
    if (bins < 2) throw std::invalid_argument("need at least 2 bins");

    EmpiricalYoungMeasure eym;
    eym.windows = windows;
    eym.bins = bins;
    eym.finest = fields.back();
    for (const auto& f : fields) eym.sequence_linf.push_back(linf_norm(f));
    eym.M = 0.0;
    for (double a : eym.sequence_linf) eym.M = std::max(eym.M, a);
    if (eym.M == 0.0) eym.M = 1.0;
    if (microstructure_wavelength > 0.0)
        eym.window_warning = (1.0 / windows) < 8.0 * microstructure_wavelength;

    const int ws = n / windows;
    eym.support.resize(static_cast<size_t>(windows));
    eym.hist.assign(static_cast<size_t>(windows), std::vector<double>(static_cast<size_t>(bins), 0.0));
    for (int w = 0; w < windows; ++w) {
        double lo = eym.finest.v[w * ws], hi = lo;
        for (int c = 0; c < ws; ++c) {
            const double v = eym.finest.v[w * ws + c];
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            int b = static_cast<int>(std::floor((v + eym.M) / (2.0 * eym.M) * bins));
            b = std::clamp(b, 0, bins - 1);
            eym.hist[w][b] += 1.0;
        }
        for (double& h : eym.hist[w]) h /= ws;
        eym.support[w] = {lo, hi};
    }
    return eym;
}

// ---------------------------------------------------------------------------
// Support dichotomy (either near-Dirac or supported in Sigma_G), plus the
// moment identity mu(W**') = W**'(u) window-averaged.
// ---------------------------------------------------------------------------

enum class WindowClass { near_dirac, sigma_supported, violation };

struct SupportDichotomyReport {
    std::vector<WindowClass> classes;
    std::vector<int> violating_windows;
    std::vector<double> violation_magnitudes;  // distance beyond the dilated set
    double max_moment_gap = 0.0;               // worst |mu(W**') - avg W**'(limit)|
    std::vector<int> moment_violations;
    bool pass = true;
};

inline SupportDichotomyReport audit_support_dichotomy(const PotentialModel& m,
                                                      const EmpiricalYoungMeasure& eym,
                                                      const PeriodicField& limit, double tol) {
    if (limit.n % eym.windows != 0)
        throw std::invalid_argument("limit field grid incompatible with window count");
    SupportDichotomyReport rep;
    const int wsz = eym.window_size();
    const int limit_ws = limit.n / eym.windows;
    for (int w = 0; w < eym.windows; ++w) {
        if (eym.window_variance(w) <= tol) {
            rep.classes.push_back(WindowClass::near_dirac);
        } else {
            double worst = 0.0;
            for (int c = 0; c < wsz; ++c)
                worst = std::max(worst, m.dist_to_sigma_G(eym.finest.v[w * wsz + c]));
            if (worst <= tol) {
                rep.classes.push_back(WindowClass::sigma_supported);
            } else {
                rep.classes.push_back(WindowClass::violation);
                rep.violating_windows.push_back(w);
                rep.violation_magnitudes.push_back(worst - tol);
                rep.pass = false;
            }
        }

        const double mu_wss = eym.moment(w, [&](double v) {
            return m.envelope_derivative(std::clamp(v, m.hull_lo, m.hull_hi));
        });
        double ref = 0.0;
        for (int c = 0; c < limit_ws; ++c)
            ref += m.envelope_derivative(std::clamp(limit.v[w * limit_ws + c], m.hull_lo, m.hull_hi));
        ref /= limit_ws;
        const double gap = std::fabs(mu_wss - ref);
        rep.max_moment_gap = std::max(rep.max_moment_gap, gap);
        if (gap > tol) {
            rep.moment_violations.push_back(w);
            rep.pass = false;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Correlation inequality mu(l W') <= mu(l) mu(W') for nondecreasing l.
// Finite-eps data carry discretization excess, so the audit reports rather
// than asserts.
// ---------------------------------------------------------------------------

struct CorrelationReport {
    std::vector<double> excess;  // per window
    double max_positive_excess = 0.0;
};

inline CorrelationReport audit_correlation(const PotentialModel& m,
                                           const EmpiricalYoungMeasure& eym,
                                           const std::function<double(double)>& l) {
    // l must be nondecreasing on the attained range (checked by sampling)
    const int probes = 256;
    double prev = l(-eym.M);
    for (int i = 1; i <= probes; ++i) {
        const double v = -eym.M + 2.0 * eym.M * i / probes;
        const double cur = l(v);
        if (cur < prev - 1e-12 * (1.0 + std::fabs(prev)))
            throw std::invalid_argument("l is not nondecreasing on the attained range");
        prev = cur;
    }

    CorrelationReport rep;
    for (int w = 0; w < eym.windows; ++w) {
        const double lw = eym.moment(w, [&](double v) { return l(v) * m.d1(v); });
        const double lm = eym.moment(w, l);
        const double wm = eym.moment(w, [&](double v) { return m.d1(v); });
        const double ex = lw - lm * wm;
        rep.excess.push_back(ex);
        rep.max_positive_excess = std::max(rep.max_positive_excess, ex);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Oscillation localization: pairs of discrete critical points at distance
// <= delta satisfy either "values stay in the dilated Sigma_G" or "the
// excursion is below e".
// ---------------------------------------------------------------------------

// Discrete critical points: sign changes of the centered difference, with
// zero-plateaus collapsed to their midpoint cell.
inline std::vector<int> critical_points(const PeriodicField& f) {
    const int n = f.n;
    std::vector<int> sign(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double d = f.v[(j + 1) % n] - f.v[(j + n - 1) % n];
        sign[j] = (d > 0.0) - (d < 0.0);
    }
    std::vector<int> crit;
    int last_sign = 0, last_idx = -1;
    int first_sign = 0, first_idx = -1;
    for (int j = 0; j < n; ++j) {
        if (sign[j] == 0) continue;
        if (first_idx < 0) {
            first_sign = sign[j];
            first_idx = j;
        }
        if (last_sign != 0 && sign[j] != last_sign) crit.push_back((last_idx + j) / 2);
        last_sign = sign[j];
        last_idx = j;
    }
    // close the loop across the seam
    if (last_sign != 0 && first_sign != 0 && last_sign != first_sign)
        crit.push_back(((last_idx + first_idx + n) / 2) % n);
    return crit;
}

struct OscillationViolation {
    double x = 0.0;
    double y = 0.0;
    double excursion = 0.0;
};

struct OscillationReport {
    int critical_count = 0;
    std::vector<OscillationViolation> violations;
    bool pass = true;
};

inline OscillationReport oscillation_audit(const PotentialModel& m, const PeriodicField& f,
                                           double eps, double e, double delta) {
    (void)eps;  // the audit itself is eps-free; eps labels the data
    if (!(e > 0.0) || !(delta > 0.0)) throw std::invalid_argument("e and delta must be positive");
    OscillationReport rep;
    const auto crit = critical_points(f);
    rep.critical_count = static_cast<int>(crit.size());
    const int n = f.n;
    const int delta_cells = static_cast<int>(std::floor(delta * n));
    const int mcrit = static_cast<int>(crit.size());

    for (int a = 0; a < mcrit; ++a) {
        for (int boff = 1; boff < mcrit; ++boff) {
            const int b = (a + boff) % mcrit;
            int gap = crit[b] - crit[a];
            if (gap < 0) gap += n;
            if (gap == 0 || gap > delta_cells) break;  // criticals are cyclically ordered

            const double fx = f.v[crit[a]], fy = f.v[crit[b]];
            if (std::fabs(fy - fx) < e) continue;  // small excursion
            bool inside = true;
            for (int c = 0; c <= gap && inside; ++c)
                if (!m.in_sigma_G_dilated(f.v[(crit[a] + c) % n], e)) inside = false;
            if (inside) continue;  // localized in the dilated unstable set

            rep.violations.push_back(
                {static_cast<double>(crit[a]) / n, static_cast<double>(crit[b]) / n,
                 std::fabs(fy - fx)});
            rep.pass = false;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Neighborhood audit: around points far from Sigma_G (distance >= 2e), the
// field stays at distance >= e on a delta'-neighborhood.  Reports the
// largest delta' that holds empirically.
// ---------------------------------------------------------------------------

struct NeighborhoodReport {
    int qualifying_count = 0;
    std::vector<double> violations;      // x positions violating at the configured delta'
    double empirical_delta_prime = 0.5;  // 0.5 = the condition holds on the whole torus
    bool pass = true;
};

inline NeighborhoodReport neighborhood_audit(const PotentialModel& m, const PeriodicField& f,
                                             double e, double delta_prime) {
    if (!(e > 0.0)) throw std::invalid_argument("e must be positive");
    NeighborhoodReport rep;
    const int n = f.n;
    const int cfg_cells = static_cast<int>(std::floor(delta_prime * n));
    const int half = n / 2;

    for (int j = 0; j < n; ++j) {
        if (m.dist_to_sigma_G(f.v[j]) < 2.0 * e) continue;
        ++rep.qualifying_count;
        int ok_radius = half;
        for (int r = 1; r <= half; ++r) {
            if (m.dist_to_sigma_G(f.v[(j + r) % n]) < e ||
                m.dist_to_sigma_G(f.v[(j + n - r) % n]) < e) {
                ok_radius = r - 1;
                break;
            }
        }
        if (ok_radius < cfg_cells) {
            rep.violations.push_back(static_cast<double>(j) / n);
            rep.pass = false;
        }
        rep.empirical_delta_prime =
            std::min(rep.empirical_delta_prime, static_cast<double>(ok_radius) / n);
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Gamma-liminf probe for the slopes: along recovery sequences,
// min_eps slope_eps(u0_eps) >= slope_star(target) - tol_discretization.
// ---------------------------------------------------------------------------

struct GammaProbeRow {
    double eps = 0.0;
    double slope = 0.0;
};

struct GammaProbeTable {
    std::vector<GammaProbeRow> rows;
    double slope_star_target = 0.0;
    double tol_discretization = 0.0;
    bool ok = false;
};

inline GammaProbeTable gamma_liminf_probe(const PotentialModel& m, const PeriodicField& target,
                                          const std::vector<double>& eps_list,
                                          const PreparationOptions& opt = {}) {
    if (eps_list.empty()) throw std::invalid_argument("empty eps list");
    SpectralWorkspace ws(target.n);
    GammaProbeTable table;
    table.slope_star_target = slope_star(m, target);

    double eps_max = 0.0;
    for (double e : eps_list) eps_max = std::max(eps_max, e);
    const double target_xxx = l2_norm(derivative(ws, target, 3));
    table.tol_discretization = 2.0 * eps_max * eps_max * target_xxx +
                               m.cell() * m.envelope_derivative_lipschitz(m.hull_lo, m.hull_hi);

    double min_slope = std::numeric_limits<double>::infinity();
    for (double eps : eps_list) {
        auto u = prepare_recovery(m, target, eps, opt);
        const double s = slope_eps(m, ws, u, eps);
        table.rows.push_back({eps, s});
        min_slope = std::min(min_slope, s);
    }
    table.ok = min_slope >= table.slope_star_target - table.tol_discretization;
    return table;
}

inline void write_gamma_probe_csv(std::ostream& out, const GammaProbeTable& t) {
    out << "eps,slope_eps\n";
    for (const auto& r : t.rows) out << format_full(r.eps) << "," << format_full(r.slope) << "\n";
    out << "# slope_star=" << format_full(t.slope_star_target)
        << " tol_discretization=" << format_full(t.tol_discretization)
        << " ok=" << (t.ok ? 1 : 0) << "\n";
}

// ---------------------------------------------------------------------------
// eps -> 0 convergence study: CH per eps against the single Stefan limit
// run, compared on a shared checkpoint grid.
// ---------------------------------------------------------------------------

struct ConvergenceRow {
    double eps = 0.0;
    double sup_hminus1 = 0.0;
    double slope_l2t = 0.0;
    double energy_err[5] = {0, 0, 0, 0, 0};
    double runtime_s = 0.0;
};

struct ConvergenceTable {
    std::vector<ConvergenceRow> rows;
    bool hminus1_ok = false;   // decreasing, at most one inversion of <= 10%
    bool slope_ok = false;     // nonincreasing column
    bool energy_ok = false;    // nonincreasing at every checkpoint
};

namespace detail {

// Largest step <= tau_wanted that divides the checkpoint interval exactly.
inline double fit_tau(double interval, double tau_wanted) {
    const int k = std::max(1, static_cast<int>(std::ceil(interval / tau_wanted - 1e-12)));
    return interval / k;
}

inline void check_table(ConvergenceTable& table) {
    const auto& rows = table.rows;
    int inversions = 0;
    bool inversion_small = true;
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].sup_hminus1 >= rows[i - 1].sup_hminus1) {
            ++inversions;
            if (rows[i].sup_hminus1 > 1.1 * rows[i - 1].sup_hminus1) inversion_small = false;
        }
    }
    table.hminus1_ok = inversions <= 1 && inversion_small;
    table.slope_ok = true;
    // Individual checkpoint errors can invert where the signed energy gap
    // crosses zero (the eps^2 gradient term against the faster decay of the
    // potential part), so the per-eps summary is their maximum.
    table.energy_ok = true;
    auto max_energy = [](const ConvergenceRow& r) {
        double m = 0.0;
        for (int c = 0; c < 5; ++c) m = std::max(m, r.energy_err[c]);
        return m;
    };
    for (size_t i = 1; i < rows.size(); ++i) {
        if (rows[i].slope_l2t > rows[i - 1].slope_l2t) table.slope_ok = false;
        if (max_energy(rows[i]) >= max_energy(rows[i - 1])) table.energy_ok = false;
    }
}

}  // namespace detail

inline ConvergenceTable convergence_study(const PotentialModel& m, const PeriodicField& target,
                                          const std::vector<double>& eps_list,
                                          const SolverConfig& cfg_in, double T_end,
                                          int checkpoints = 50,
                                          const PreparationOptions& opt = {}) {
    for (size_t i = 1; i < eps_list.size(); ++i)
        if (eps_list[i] >= eps_list[i - 1])
            throw std::invalid_argument("eps_list must be strictly decreasing");
    if (eps_list.empty()) throw std::invalid_argument("empty eps list");

    const double dt_check = T_end / checkpoints;

    // One Stefan run from the target itself.
    SolverConfig scfg = cfg_in;
    scfg.T_end = T_end;
    scfg.tau = detail::fit_tau(dt_check, cfg_in.tau > 0.0 ? cfg_in.tau : default_tau_stefan());
    scfg.snapshot_stride = static_cast<int>(std::lround(dt_check / scfg.tau));
    auto stefan = run_stefan(m, target, scfg);
    if (stefan.status != RunStatus::ok)
        throw std::runtime_error(std::string("stefan run failed: ") + stefan.message);

    std::vector<double> slope_star_t(stefan.snapshots.size());
    std::vector<double> fstar_t(stefan.snapshots.size());
    for (size_t i = 0; i < stefan.snapshots.size(); ++i) {
        slope_star_t[i] = slope_star(m, stefan.snapshots[i]);
        fstar_t[i] = energy_star(m, stefan.snapshots[i]);
    }

    auto run_one = [&](double eps) {
        const auto tick = std::chrono::steady_clock::now();
        SpectralWorkspace ws(target.n);
        auto u0 = prepare_recovery(m, target, eps, opt);
        SolverConfig ccfg = cfg_in;
        ccfg.T_end = T_end;
        ccfg.tau = detail::fit_tau(dt_check, cfg_in.tau > 0.0 ? cfg_in.tau : default_tau_ch(eps));
        ccfg.snapshot_stride = static_cast<int>(std::lround(dt_check / ccfg.tau));
        auto ch = run_cahn_hilliard(m, u0, eps, ccfg);
        if (ch.status != RunStatus::ok)
            throw std::runtime_error(std::string("cahn-hilliard run failed: ") + ch.message);
        if (ch.snapshots.size() != stefan.snapshots.size())
            throw std::runtime_error("snapshot grids out of step");

        ConvergenceRow row;
        row.eps = eps;
        std::vector<double> slope_err2(ch.snapshots.size());
        for (size_t i = 0; i < ch.snapshots.size(); ++i) {
            row.sup_hminus1 = std::max(
                row.sup_hminus1, h_minus1_distance(ws, ch.snapshots[i], stefan.snapshots[i]));
            const double se = slope_eps(m, ws, ch.snapshots[i], eps) - slope_star_t[i];
            slope_err2[i] = se * se;
        }
        for (size_t i = 1; i < slope_err2.size(); ++i)
            row.slope_l2t += 0.5 * dt_check * (slope_err2[i - 1] + slope_err2[i]);
        for (int c = 0; c < 5; ++c) {
            const size_t idx = (c + 1) * (ch.snapshots.size() - 1) / 5;
            row.energy_err[c] =
                std::fabs(energy_eps(m, ws, ch.snapshots[idx], eps) - fstar_t[idx]);
        }
        row.runtime_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - tick).count();
        return row;
    };

    // eps runs are independent; fan out and collect in order.
    std::vector<std::future<ConvergenceRow>> jobs;
    for (double eps : eps_list)
        jobs.push_back(std::async(std::launch::async, run_one, eps));
    ConvergenceTable table;
    for (auto& j : jobs) table.rows.push_back(j.get());
    detail::check_table(table);
    return table;
}

inline void write_convergence_csv(std::ostream& out, const ConvergenceTable& t,
                                  bool with_runtime = true) {
    out << "eps,sup_hminus1,slope_l2t,energy_err_t1,energy_err_t2,energy_err_t3,energy_err_t4,"
           "energy_err_t5";
    if (with_runtime) out << ",runtime_s";
    out << "\n";
    for (const auto& r : t.rows) {
        out << format_full(r.eps) << "," << format_full(r.sup_hminus1) << ","
            << format_full(r.slope_l2t);
        for (int c = 0; c < 5; ++c) out << "," << format_full(r.energy_err[c]);
        if (with_runtime) out << "," << format_full(r.runtime_s);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Sweep-level audits: uniform L-infinity bound and chemical-potential
// compactness along a decreasing-eps sequence.
// ---------------------------------------------------------------------------

struct LinfAudit {
    std::vector<double> linf;  // coarse -> fine
    double max = 0.0;
    double median = 0.0;
    bool no_growth_trend = false;  // last <= 1.1 * median
};

inline LinfAudit linf_audit(const std::vector<PeriodicField>& fields) {
    if (fields.empty()) throw std::invalid_argument("empty sweep");
    LinfAudit a;
    for (const auto& f : fields) a.linf.push_back(linf_norm(f));
    a.max = *std::max_element(a.linf.begin(), a.linf.end());
    std::vector<double> sorted = a.linf;
    std::sort(sorted.begin(), sorted.end());
    a.median = sorted[sorted.size() / 2];
    a.no_growth_trend = a.linf.back() <= 1.1 * a.median;
    return a;
}

struct CompactnessAudit {
    std::vector<double> h1_norms;       // per field, coarse -> fine
    std::vector<double> l2_increments;  // distance to the windowed mu(W') reference
    bool h1_bounded = false;
    bool cauchy_decreasing = false;  // increments decrease over the last three
};

inline CompactnessAudit chem_compactness_audit(const PotentialModel& m,
                                               const std::vector<PeriodicField>& fields,
                                               const std::vector<double>& eps_list,
                                               int windows = 32) {
    if (fields.size() != eps_list.size() || fields.empty())
        throw std::invalid_argument("fields/eps size mismatch");
    SpectralWorkspace ws(fields.front().n);
    CompactnessAudit a;

    // reference: windowed mu(W') from the finest field
    const auto eym = young_measure(fields, windows, 64);
    PeriodicField ref;
    ref.n = fields.back().n;
    ref.v.resize(static_cast<size_t>(ref.n));
    const int wsz = eym.window_size();
    for (int w = 0; w < windows; ++w) {
        const double mu = eym.moment(w, [&](double v) { return m.d1(v); });
        for (int c = 0; c < wsz; ++c) ref.v[w * wsz + c] = mu;
    }

    for (size_t i = 0; i < fields.size(); ++i) {
        auto w = chemical_potential(m, ws, fields[i], eps_list[i]);
        const double l2 = l2_norm(w);
        const double h1 = std::sqrt(l2 * l2 + std::pow(l2_norm(derivative(ws, w, 1)), 2));
        a.h1_norms.push_back(h1);
        PeriodicField d;
        d.n = w.n;
        d.v.resize(w.v.size());
        for (int j = 0; j < w.n; ++j) d.v[j] = w.v[j] - ref.v[j];
        a.l2_increments.push_back(l2_norm(d));
    }

    double h1_max = *std::max_element(a.h1_norms.begin(), a.h1_norms.end());
    a.h1_bounded = std::isfinite(h1_max);
    a.cauchy_decreasing = true;
    const size_t k = a.l2_increments.size();
    if (k >= 3) {
        for (size_t i = k - 3; i + 1 < k; ++i)
            if (a.l2_increments[i + 1] > a.l2_increments[i]) a.cauchy_decreasing = false;
    }
    return a;
}

}  // namespace chlab
