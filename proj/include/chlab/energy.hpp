// energy.hpp — the functionals of the flow: F_eps (gradient term plus W),
// its relaxation F** (W** alone), the chemical potential w = W'(u) - eps^2
// u_xx, and the metric slopes |grad F_eps| = ||w_x||_L2 and |grad F**| =
// ||(W**'(u))_x||_L2.

#pragma once

#include <cmath>
#include <ostream>

#include "chlab/field.hpp"
#include "chlab/potential.hpp"

namespace chlab {

// F_eps(f) = int ( eps^2 f_x^2 / 2 + W(f) ) dx, spectral derivative and
// trapezoid quadrature.
inline double energy_eps(const PotentialModel& m, SpectralWorkspace& ws, const PeriodicField& f,
                         double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must be in (0,1]");
    auto fx = derivative(ws, f, 1);
    double s = 0.0;
    for (int j = 0; j < f.n; ++j) s += 0.5 * eps * eps * fx.v[j] * fx.v[j] + m.eval(f.v[j]);
    return s / f.n;
}

// F**(f) = int W**(f) dx.  Values are clamped to the hull domain inside
// envelope_value; use range_excursion to detect and report clamping.
inline double energy_star(const PotentialModel& m, const PeriodicField& f) {
    double s = 0.0;
    for (double a : f.v) s += m.envelope_value(a);
    return s / f.n;
}

// w = W'(f) - eps^2 f_xx on the grid.
inline PeriodicField chemical_potential(const PotentialModel& m, SpectralWorkspace& ws,
                                        const PeriodicField& f, double eps) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must be in (0,1]");
    auto fxx = derivative(ws, f, 2);
    PeriodicField w;
    w.n = f.n;
    w.v.resize(f.v.size());
    for (int j = 0; j < f.n; ++j) w.v[j] = m.d1(f.v[j]) - eps * eps * fxx.v[j];
    return w;
}

// |grad F_eps|(f) = || w_x ||_L2, computed from the real-space samples of
// the spectral derivative of w.
inline double slope_eps(const PotentialModel& m, SpectralWorkspace& ws, const PeriodicField& f,
                        double eps) {
    auto w = chemical_potential(m, ws, f, eps);
    return l2_norm(derivative(ws, w, 1));
}

// Dual route for the same slope: || w_xx ||_{-1} summed mode by mode in
// Fourier space.  Keeps an independent algebraic path for cross-validation;
// equal to slope_eps up to transform roundoff.
inline double slope_eps_dual(const PotentialModel& m, SpectralWorkspace& ws,
                             const PeriodicField& f, double eps) {
    auto w = chemical_potential(m, ws, f, eps);
    auto c = ws.forward(w);
    const int nyq = ws.size() / 2;
    double s = 0.0;
    for (int k = 1; k <= nyq; ++k) {
        const double kk = ws.wavenumber(k);
        const double weight = (k == nyq) ? 1.0 : 2.0;
        // |(w_xx)^_k|^2 / k^2 = k^2 |w^_k|^2
        s += weight * kk * kk * std::norm(c[k]);
    }
    return std::sqrt(s);
}

// |grad F**|(f) = || (W**'(f))_x ||_L2 by second-order centered differences:
// W**' is only Lipschitz, and spectral differentiation of the kinked
// composition rings.
inline double slope_star(const PotentialModel& m, const PeriodicField& f) {
    const int n = f.n;
    const double h = 1.0 / n;
    std::vector<double> g(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) g[j] = m.envelope_derivative(std::clamp(f.v[j], m.hull_lo, m.hull_hi));
    double s = 0.0;
    for (int j = 0; j < n; ++j) {
        const double d = (g[(j + 1) % n] - g[(j + n - 1) % n]) / (2.0 * h);
        s += d * d;
    }
    return std::sqrt(s / n);
}

struct EnergyReport {
    double eps = 0.0;
    double F_eps = 0.0;
    double F_star = 0.0;
    double slope_eps = 0.0;
    double slope_star = 0.0;
    PeriodicField chem_pot;
    double mass = 0.0;
    double highmode_fraction = 0.0;  // resolution indicator, not serialized
    bool excursion = false;          // values clamped to the hull domain
};

inline EnergyReport make_energy_report(const PotentialModel& m, SpectralWorkspace& ws,
                                       const PeriodicField& f, double eps) {
    EnergyReport r;
    r.eps = eps;
    r.F_eps = energy_eps(m, ws, f, eps);
    r.F_star = energy_star(m, f);
    r.slope_eps = slope_eps(m, ws, f, eps);
    r.slope_star = slope_star(m, f);
    r.chem_pot = chemical_potential(m, ws, f, eps);
    r.mass = f.mean();
    r.highmode_fraction = highmode_fraction(ws, f);
    r.excursion = range_excursion(m, f);
    return r;
}

inline void write_energy_report_csv(std::ostream& out, const EnergyReport& r, bool header = false) {
    if (header) out << "eps,F_eps,F_star,slope_eps,slope_star,mass\n";
    out << format_full(r.eps) << "," << format_full(r.F_eps) << "," << format_full(r.F_star) << ","
        << format_full(r.slope_eps) << "," << format_full(r.slope_star) << ","
        << format_full(r.mass) << "\n";
}

}  // namespace chlab
