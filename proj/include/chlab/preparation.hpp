// preparation.hpp — energetically well-prepared initial data.  Inside each
// region where the target takes values in a component (a, b) of Sigma_G, the
// target is replaced by a two-phase square wave between the envelope
// endpoints: wavelength eps^{1/2}, piecewise-linear transitions of width
// eps^{3/4}, volume fraction by the lever rule, global mean corrected in the
// largest oscillation region.  Along eps -> 0 this realizes
// F_eps(u0_eps) -> F**(target) and u0_eps -> target in H^{-1}.

#pragma once

#include <cmath>
#include <ostream>
#include <vector>

#include "chlab/field.hpp"
#include "chlab/potential.hpp"

namespace chlab {

struct PreparationOptions {
    double lambda_exponent = 0.5;  // oscillation wavelength = eps^lambda_exponent
    double delta_exponent = 0.75;  // transition width = eps^delta_exponent
};

struct RecoveryRegion {
    int start = 0;       // first cell index (regions may wrap)
    int length = 0;      // cells
    int component = -1;  // Sigma_G component hosting the region's values
    double endpoint_lo = 0.0;  // a: lower end of the affine segment
    double endpoint_hi = 0.0;  // b: upper end
    double fraction = 0.0;     // lever fraction of endpoint_lo
    bool too_short = false;    // shorter than one wavelength; left unmodified
};

struct RecoveryPlan {
    double eps = 0.0;
    double lambda_osc = 0.0;
    double delta_trans = 0.0;
    std::vector<RecoveryRegion> regions;
    bool short_region_warning = false;
    bool empty_region_flag = false;  // wrinkle: effective region was empty
};

struct RecoveryResult {
    PeriodicField field;
    RecoveryPlan plan;
};

namespace detail {

// Two-phase waveform of one period in phase units: value a on the first
// `fraction` of the period, b on the rest, switches replaced by linear ramps
// of width `ramp` centered at phase 0 and phase `fraction`.  The period mean
// is a*fraction + b*(1-fraction) exactly.
inline double two_phase_wave(double phase, double a, double b, double fraction, double ramp) {
    if (fraction <= 0.0) return b;
    if (fraction >= 1.0) return a;
    const double r = std::min(ramp, std::min(fraction, 1.0 - fraction));
    const double half = r / 2.0;
    double p = phase - std::floor(phase);
    if (p < half) {  // ramp b -> a through phase 0
        const double t = (p + half) / r;
        return b + (a - b) * t;
    }
    if (p < fraction - half) return a;
    if (p < fraction + half) {  // ramp a -> b
        const double t = (p - (fraction - half)) / r;
        return a + (b - a) * t;
    }
    if (p < 1.0 - half) return b;
    const double t = (p - (1.0 - half)) / r;  // ramp b -> a toward phase 1
    return b + (a - b) * t;
}

struct CellRun {
    int start = 0;
    int length = 0;
    int component = -1;
};

// Group eligible cells (component >= 0) into maximal runs, merging across
// the torus seam.
inline std::vector<CellRun> group_runs(const std::vector<int>& comp) {
    const int n = static_cast<int>(comp.size());
    std::vector<CellRun> runs;
    int j = 0;
    while (j < n) {
        if (comp[j] < 0) {
            ++j;
            continue;
        }
        CellRun r;
        r.start = j;
        r.component = comp[j];
        while (j < n && comp[j] == r.component) ++j;
        r.length = j - r.start;
        runs.push_back(r);
    }
    if (runs.size() >= 2 && runs.front().start == 0 &&
        runs.back().start + runs.back().length == n &&
        runs.front().component == runs.back().component) {
        runs.front().start = runs.back().start;
        runs.front().length += runs.back().length;
        runs.pop_back();
    }
    return runs;
}

// Build the oscillation into `field` over one region; per-period lever
// fractions come from the target's period means, shifted by `offset` (the
// mean-correction knob).  Returns the base fraction of the region.
inline double build_region(PeriodicField& field, const PeriodicField& target, const CellRun& run,
                           double a, double b, int period_cells, double ramp, double offset) {
    const int n = field.n;
    const int periods = std::max(1, run.length / period_cells);
    double region_mean = 0.0;
    for (int c = 0; c < run.length; ++c) region_mean += target.v[(run.start + c) % n];
    region_mean /= run.length;
    const double base_fraction = std::clamp((b - region_mean) / (b - a), 0.0, 1.0);

    for (int p = 0; p < periods; ++p) {
        const int c0 = p * period_cells;
        const int c1 = (p + 1 == periods) ? run.length : (p + 1) * period_cells;
        double mu = 0.0;
        for (int c = c0; c < c1; ++c) mu += target.v[(run.start + c) % n];
        mu /= (c1 - c0);
        const double fr = std::clamp((b - mu) / (b - a) + offset, 0.0, 1.0);
        for (int c = c0; c < c1; ++c) {
            const double phase = static_cast<double>(c - c0) / period_cells;
            field.v[(run.start + c) % n] = two_phase_wave(phase, a, b, fr, ramp);
        }
    }
    return base_fraction;
}

// Linear blend from the outside value into the waveform over `cells` cells
// at the region ends (skipped when the region covers the whole torus).
inline void smooth_region_ends(PeriodicField& field, const PeriodicField& target,
                               const CellRun& run, int cells) {
    const int n = field.n;
    if (run.length >= n) return;
    cells = std::min(cells, run.length / 4);
    if (cells < 1) return;
    const double left_out = target.v[(run.start + n - 1) % n];
    for (int c = 0; c < cells; ++c) {
        const double t = static_cast<double>(c + 1) / (cells + 1);
        double& v = field.v[(run.start + c) % n];
        v = left_out + (v - left_out) * t;
    }
    const double right_out = target.v[(run.start + run.length) % n];
    for (int c = 0; c < cells; ++c) {
        const double t = static_cast<double>(c + 1) / (cells + 1);
        double& v = field.v[(run.start + run.length - 1 - c) % n];
        v = right_out + (v - right_out) * t;
    }
}

inline RecoveryResult oscillate(const PotentialModel& m, const PeriodicField& target,
                                const std::vector<int>& comp, double eps,
                                const PreparationOptions& opt) {
    const int n = target.n;
    RecoveryResult out;
    out.field = target;
    out.plan.eps = eps;
    out.plan.lambda_osc = std::pow(eps, opt.lambda_exponent);
    out.plan.delta_trans = std::pow(eps, opt.delta_exponent);

    const int period_cells = std::max(4, static_cast<int>(std::lround(out.plan.lambda_osc * n)));
    const double ramp = out.plan.delta_trans / out.plan.lambda_osc;
    const int smooth_cells = std::max(1, static_cast<int>(std::lround(out.plan.delta_trans * n)));

    auto runs = detail::group_runs(comp);
    std::vector<size_t> oscillated;  // indices of built regions, largest first
    for (size_t ri = 0; ri < runs.size(); ++ri) {
        const auto& run = runs[ri];
        RecoveryRegion region;
        region.start = run.start;
        region.length = run.length;
        region.component = run.component;
        const auto& host = m.sigma_G[run.component];
        region.endpoint_lo = host.lo;
        region.endpoint_hi = host.hi;
        if (run.length < period_cells) {
            region.too_short = true;
            out.plan.short_region_warning = true;
            out.plan.regions.push_back(region);
            continue;
        }
        region.fraction =
            detail::build_region(out.field, target, run, host.lo, host.hi, period_cells, ramp, 0.0);
        detail::smooth_region_ends(out.field, target, run, smooth_cells);
        out.plan.regions.push_back(region);
        oscillated.push_back(ri);
    }
    std::sort(oscillated.begin(), oscillated.end(),
              [&](size_t a, size_t b) { return runs[a].length > runs[b].length; });

    // Mean correction by duty offset, largest region first: the discrete
    // mean is continuous and monotone nonincreasing in the offset (a < b),
    // so bisection is reliable even when some periods clamp.  Regions past
    // the first only absorb what the previous ones could not.
    const double want = target.mean();
    for (size_t ri : oscillated) {
        if (std::fabs(out.field.mean() - want) <= 1e-13) break;
        const auto& run = runs[ri];
        const auto& host = m.sigma_G[run.component];
        auto mean_at = [&](double offset) {
            detail::build_region(out.field, target, run, host.lo, host.hi, period_cells, ramp,
                                 offset);
            detail::smooth_region_ends(out.field, target, run, smooth_cells);
            return out.field.mean();
        };
        double lo = -1.0, hi = 1.0;
        double f_lo = mean_at(lo) - want;  // offset -1: all-b, largest mean
        double f_hi = mean_at(hi) - want;  // offset +1: all-a, smallest mean
        if (f_lo < 0.0 || f_hi > 0.0) {
            // target mean outside this region's capacity: saturate and move on
            mean_at(f_lo < 0.0 ? -1.0 : 1.0);
            continue;
        }
        double mid = 0.0;
        for (int it = 0; it < 200; ++it) {
            mid = 0.5 * (lo + hi);
            const double f_mid = mean_at(mid) - want;
            if (std::fabs(f_mid) <= 1e-14) break;
            if (f_mid > 0.0)
                lo = mid;
            else
                hi = mid;
        }
    }
    return out;
}

}  // namespace detail

// Recovery datum for the target at scale eps.  Values outside Sigma_G are
// kept; Sigma_G-valued regions oscillate between the envelope endpoints.
inline RecoveryResult prepare_recovery_full(const PotentialModel& m, const PeriodicField& target,
                                            double eps, const PreparationOptions& opt = {}) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must be in (0,1]");
    if (range_excursion(m, target))
        throw std::invalid_argument("target range exits the hull domain");
    std::vector<int> comp(static_cast<size_t>(target.n), -1);
    for (int j = 0; j < target.n; ++j)
        if (m.in_sigma_G(target.v[j])) comp[j] = m.sigma_component(target.v[j]);
    return detail::oscillate(m, target, comp, eps, opt);
}

inline PeriodicField prepare_recovery(const PotentialModel& m, const PeriodicField& target,
                                      double eps, const PreparationOptions& opt = {}) {
    return prepare_recovery_full(m, target, eps, opt).field;
}

// Mean-preserving oscillation superimposed on `base` inside
// region ∩ {base ∈ Sigma_G}.  The empty_region_flag reports a vacuous call.
inline RecoveryResult wrinkle_full(const PotentialModel& m, const PeriodicField& base,
                                   double region_lo, double region_hi, double eps,
                                   const PreparationOptions& opt = {}) {
    if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("eps must be in (0,1]");
    if (range_excursion(m, base))
        throw std::invalid_argument("base range exits the hull domain");
    std::vector<int> comp(static_cast<size_t>(base.n), -1);
    bool any = false;
    for (int j = 0; j < base.n; ++j) {
        const double x = base.x(j);
        const bool in_region = region_lo <= region_hi
                                   ? (x >= region_lo && x < region_hi)
                                   : (x >= region_lo || x < region_hi);  // wrapping interval
        if (in_region && m.in_sigma_G(base.v[j])) {
            comp[j] = m.sigma_component(base.v[j]);
            any = true;
        }
    }
    auto out = detail::oscillate(m, base, comp, eps, opt);
    out.plan.empty_region_flag = !any;
    return out;
}

inline PeriodicField wrinkle(const PotentialModel& m, const PeriodicField& base, double region_lo,
                             double region_hi, double eps, const PreparationOptions& opt = {}) {
    return wrinkle_full(m, base, region_lo, region_hi, eps, opt).field;
}

// --- region classification (Omega and the C_i) ---

struct IndexRun {
    int start = 0;
    int length = 0;
};

struct RegionClassification {
    std::vector<IndexRun> omega;                    // {x : f(x) outside closure(Sigma_G)}
    std::vector<std::vector<IndexRun>> components;  // C_i = {x : f(x) in closure(Sigma_i)}
    std::vector<std::vector<double>> pairwise_distance;  // between the C_i, +inf if empty
};

namespace detail {

inline std::vector<IndexRun> mask_runs(const std::vector<bool>& mask) {
    const int n = static_cast<int>(mask.size());
    std::vector<IndexRun> runs;
    int j = 0;
    while (j < n) {
        if (!mask[j]) {
            ++j;
            continue;
        }
        IndexRun r;
        r.start = j;
        while (j < n && mask[j]) ++j;
        r.length = j - r.start;
        runs.push_back(r);
    }
    if (runs.size() >= 2 && runs.front().start == 0 && runs.back().start + runs.back().length == n) {
        runs.front().start = runs.back().start;
        runs.front().length += runs.back().length;
        runs.pop_back();
    }
    return runs;
}

// Minimal periodic distance between the closest sample points of two
// disjoint cell-index runs, in x units.
inline double run_distance(const IndexRun& a, const IndexRun& b, int n) {
    auto fwd = [&](const IndexRun& p, const IndexRun& q) {
        // from the last sample of p forward to the first sample of q
        const int last_p = (p.start + p.length - 1) % n;
        int g = q.start - last_p;
        if (g < 0) g += n;
        return g;
    };
    return static_cast<double>(std::min(fwd(a, b), fwd(b, a))) / n;
}

}  // namespace detail

// Partition of the torus by closure membership: boundary cells go to the
// C_i, the rest to Omega.
inline RegionClassification classify_regions(const PotentialModel& m, const PeriodicField& f) {
    const int n = f.n;
    const size_t ell = m.sigma_G.size();
    RegionClassification out;
    out.components.resize(ell);
    std::vector<bool> omega_mask(static_cast<size_t>(n), false);
    std::vector<std::vector<bool>> comp_mask(ell, std::vector<bool>(static_cast<size_t>(n), false));
    for (int j = 0; j < n; ++j) {
        const int c = m.sigma_component(f.v[j]);
        if (c >= 0)
            comp_mask[c][j] = true;
        else
            omega_mask[j] = true;
    }
    out.omega = detail::mask_runs(omega_mask);
    for (size_t i = 0; i < ell; ++i) out.components[i] = detail::mask_runs(comp_mask[i]);

    out.pairwise_distance.assign(ell, std::vector<double>(ell, 0.0));
    for (size_t i = 0; i < ell; ++i) {
        for (size_t j = 0; j < ell; ++j) {
            if (i == j) continue;
            if (out.components[i].empty() || out.components[j].empty()) {
                out.pairwise_distance[i][j] = std::numeric_limits<double>::infinity();
                continue;
            }
            double d = std::numeric_limits<double>::infinity();
            for (const auto& a : out.components[i])
                for (const auto& b : out.components[j])
                    d = std::min(d, detail::run_distance(a, b, n));
            out.pairwise_distance[i][j] = d;
        }
    }
    return out;
}

inline void write_plan_text(std::ostream& out, const RecoveryPlan& plan) {
    out << "eps=" << format_full(plan.eps) << "\n";
    out << "lambda_osc=" << format_full(plan.lambda_osc) << "\n";
    out << "delta_trans=" << format_full(plan.delta_trans) << "\n";
    out << "short_region_warning=" << (plan.short_region_warning ? 1 : 0) << "\n";
    out << "regions=" << plan.regions.size() << "\n";
    for (const auto& r : plan.regions)
        out << "region start=" << r.start << " length=" << r.length << " component=" << r.component
            << " a=" << format_full(r.endpoint_lo) << " b=" << format_full(r.endpoint_hi)
            << " fraction=" << format_full(r.fraction) << " too_short=" << (r.too_short ? 1 : 0)
            << "\n";
}

}  // namespace chlab
