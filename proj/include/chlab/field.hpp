// field.hpp — periodic grid fields on the unit torus T = R/Z and their
// spectral calculus: derivatives, L2 / Linf norms and the H^{-1} norm of
// the mean-zero part, all diagonal in Fourier space.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <istream>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace chlab {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

// Uniform samples of a function on T at x_j = j/n.  Plain value type:
// fields are copied freely and never mutated in place by the library.
struct PeriodicField {
    int n = 0;
    std::vector<double> v;

    double operator[](int j) const { return v[static_cast<size_t>(j)]; }
    double& operator[](int j) { return v[static_cast<size_t>(j)]; }

    double x(int j) const { return static_cast<double>(j) / n; }

    double mean() const {
        double s = 0.0;
        for (double a : v) s += a;
        return s / n;
    }
};

inline bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

inline void validate_grid_size(int n) {
    if (n < 16 || !is_power_of_two(n))
        throw std::invalid_argument("grid size must be a power of two >= 16, got " +
                                    std::to_string(n));
}

inline PeriodicField constant_field(int n, double c) {
    validate_grid_size(n);
    PeriodicField f;
    f.n = n;
    f.v.assign(static_cast<size_t>(n), c);
    return f;
}

inline PeriodicField sampled_field(int n, const std::function<double(double)>& fn) {
    validate_grid_size(n);
    PeriodicField f;
    f.n = n;
    f.v.resize(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) f.v[j] = fn(static_cast<double>(j) / n);
    return f;
}

inline PeriodicField sinusoid_field(int n, double mean, double amplitude, int wavenumber) {
    return sampled_field(n, [=](double x) { return mean + amplitude * std::sin(kTwoPi * wavenumber * x); });
}

// Real-to-complex transform plans for one grid size.  The planner in FFTW is
// not thread-safe, so plan creation/destruction is serialized; execution on
// a workspace's own buffers is not.  Use one workspace per thread.
class SpectralWorkspace {
  public:
    explicit SpectralWorkspace(int n) : n_(n) {
        validate_grid_size(n);
        real_ = fftw_alloc_real(static_cast<size_t>(n_));
        spec_ = fftw_alloc_complex(static_cast<size_t>(n_ / 2 + 1));
        std::lock_guard<std::mutex> lock(planner_mutex());
        fwd_ = fftw_plan_dft_r2c_1d(n_, real_, spec_, FFTW_ESTIMATE);
        bwd_ = fftw_plan_dft_c2r_1d(n_, spec_, real_, FFTW_ESTIMATE);
    }

    ~SpectralWorkspace() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(fwd_);
        fftw_destroy_plan(bwd_);
        fftw_free(real_);
        fftw_free(spec_);
    }

    SpectralWorkspace(const SpectralWorkspace&) = delete;
    SpectralWorkspace& operator=(const SpectralWorkspace&) = delete;

    int size() const { return n_; }
    int modes() const { return n_ / 2 + 1; }

    // Physical wavenumber of mode kappa on the unit torus.
    double wavenumber(int kappa) const { return kTwoPi * kappa; }

    // Normalized coefficients c_k = (1/n) sum_j f_j e^{-2 pi i j k / n}, k = 0 .. n/2.
    std::vector<std::complex<double>> forward(const PeriodicField& f) {
        if (f.n != n_) throw std::invalid_argument("workspace/field size mismatch");
        std::copy(f.v.begin(), f.v.end(), real_);
        fftw_execute(fwd_);
        std::vector<std::complex<double>> c(static_cast<size_t>(modes()));
        const double inv = 1.0 / n_;
        for (int k = 0; k < modes(); ++k)
            c[k] = std::complex<double>(spec_[k][0] * inv, spec_[k][1] * inv);
        return c;
    }

    PeriodicField backward(const std::vector<std::complex<double>>& c) {
        if (static_cast<int>(c.size()) != modes())
            throw std::invalid_argument("workspace/spectrum size mismatch");
        for (int k = 0; k < modes(); ++k) {
            spec_[k][0] = c[k].real();
            spec_[k][1] = c[k].imag();
        }
        fftw_execute(bwd_);
        PeriodicField f;
        f.n = n_;
        f.v.assign(real_, real_ + n_);
        return f;
    }

  private:
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }

    int n_;
    double* real_;
    fftw_complex* spec_;
    fftw_plan fwd_;
    fftw_plan bwd_;
};

// || f - mean(f) ||_{-1} = ( sum_{k != 0} |c_k|^2 / (2 pi k)^2 )^{1/2}.
// The mean part is projected out; this is the homogeneous H^{-1} norm.
inline double h_minus1_norm(SpectralWorkspace& ws, const PeriodicField& f) {
    auto c = ws.forward(f);
    double s = 0.0;
    const int nyq = ws.size() / 2;
    for (int k = 1; k <= nyq; ++k) {
        const double w = (k == nyq) ? 1.0 : 2.0;
        s += w * std::norm(c[k]) / (ws.wavenumber(k) * ws.wavenumber(k));
    }
    return std::sqrt(s);
}

inline double h_minus1_distance(SpectralWorkspace& ws, const PeriodicField& f,
                                const PeriodicField& g) {
    if (f.n != g.n) throw std::invalid_argument("field size mismatch");
    PeriodicField d;
    d.n = f.n;
    d.v.resize(f.v.size());
    for (size_t j = 0; j < f.v.size(); ++j) d.v[j] = f.v[j] - g.v[j];
    return h_minus1_norm(ws, d);
}

// Spectral derivative d^order/dx^order.  The Nyquist mode is zeroed for odd
// orders (its sampled derivative sign is ambiguous); the k=0 mode always
// vanishes, so derivatives have exact zero mean.
inline PeriodicField derivative(SpectralWorkspace& ws, const PeriodicField& f, int order) {
    if (order < 1 || order > 4) throw std::invalid_argument("derivative order must be in 1..4");
    auto c = ws.forward(f);
    const int nyq = ws.size() / 2;
    c[0] = 0.0;
    for (int k = 1; k <= nyq; ++k) {
        std::complex<double> mult(0.0, ws.wavenumber(k));
        std::complex<double> m = 1.0;
        for (int p = 0; p < order; ++p) m *= mult;
        c[k] *= m;
    }
    if (order % 2 == 1) c[nyq] = 0.0;
    PeriodicField d = ws.backward(c);
    // The k=0 coefficient is zero, so any residual sample mean is transform
    // roundoff; remove it so derivatives have exact zero mean downstream.
    const double m = d.mean();
    for (double& a : d.v) a -= m;
    return d;
}

// L2 norm with |T| = 1: trapezoid quadrature on the periodic grid reduces to
// the mean of squares.
inline double l2_norm(const PeriodicField& f) {
    double s = 0.0;
    for (double a : f.v) s += a * a;
    return std::sqrt(s / f.n);
}

inline double l2_inner(const PeriodicField& f, const PeriodicField& g) {
    if (f.n != g.n) throw std::invalid_argument("field size mismatch");
    double s = 0.0;
    for (size_t j = 0; j < f.v.size(); ++j) s += f.v[j] * g.v[j];
    return s / f.n;
}

inline double linf_norm(const PeriodicField& f) {
    double m = 0.0;
    for (double a : f.v) m = std::max(m, std::fabs(a));
    return m;
}

inline PeriodicField set_mean(const PeriodicField& f, double m) {
    PeriodicField g = f;
    const double shift = m - f.mean();
    for (double& a : g.v) a += shift;
    return g;
}

// phi with -phi_xx = f - mean(f), mean(phi) = 0.  Realizes the supremum in
// the variational form of the H^{-1} norm: <f - mean, phi> = ||f||_{-1}^2.
inline PeriodicField solve_poisson(SpectralWorkspace& ws, const PeriodicField& f) {
    auto c = ws.forward(f);
    c[0] = 0.0;
    const int nyq = ws.size() / 2;
    for (int k = 1; k <= nyq; ++k) c[k] /= ws.wavenumber(k) * ws.wavenumber(k);
    return ws.backward(c);
}

// Fraction of mean-zero L2 energy carried by modes above n/4; crude
// resolution indicator for slope reports.
inline double highmode_fraction(SpectralWorkspace& ws, const PeriodicField& f) {
    auto c = ws.forward(f);
    const int nyq = ws.size() / 2;
    double total = 0.0, high = 0.0;
    for (int k = 1; k <= nyq; ++k) {
        const double w = (k == nyq) ? 1.0 : 2.0;
        const double e = w * std::norm(c[k]);
        total += e;
        if (k > ws.size() / 4) high += e;
    }
    return total > 0.0 ? high / total : 0.0;
}

inline bool all_finite(const PeriodicField& f) {
    for (double a : f.v)
        if (!std::isfinite(a)) return false;
    return true;
}

// 17-significant-digit decimal: enough to round-trip an IEEE double.
inline std::string format_full(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// Dump format: header "# n=<n> m=<m>", then one "x,value" row per sample.
inline void write_field_csv(std::ostream& out, const PeriodicField& f) {
    out << "# n=" << f.n << " m=" << format_full(f.mean()) << "\n";
    for (int j = 0; j < f.n; ++j)
        out << format_full(f.x(j)) << "," << format_full(f.v[j]) << "\n";
}

inline PeriodicField read_field_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# n=", 0) != 0)
        throw std::runtime_error("field csv: missing '# n=' header");
    int n = std::stoi(line.substr(4));
    validate_grid_size(n);
    PeriodicField f;
    f.n = n;
    f.v.reserve(static_cast<size_t>(n));
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("field csv: malformed row '" + line + "'");
        f.v.push_back(std::stod(line.substr(comma + 1)));
    }
    if (static_cast<int>(f.v.size()) != n)
        throw std::runtime_error("field csv: row count does not match header n");
    return f;
}

}  // namespace chlab
