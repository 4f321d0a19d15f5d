// potential.hpp — the nonconvex potential W, its convex envelope W**, the
// unstable sets Sigma_G (where W > W**) and Sigma_L (where W'' < 0), and the
// concavity-defect functions psi(a,b) and omega(rho) used by the
// oscillation-localization audits.

#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "chlab/field.hpp"

namespace chlab {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    double length() const { return hi - lo; }
    bool contains(double v) const { return v > lo && v < hi; }
    bool contains_closed(double v) const { return v >= lo && v <= hi; }
};

struct AffineSegment {
    double lo = 0.0;
    double hi = 0.0;
    double slope = 0.0;
    double value_lo = 0.0;  // W** at lo
};

// W with derivatives plus everything tabulated from it.  Immutable after
// construction; all queries are const and thread-safe.
struct PotentialModel {
    std::function<double(double)> eval;  // W
    std::function<double(double)> d1;    // W'
    std::function<double(double)> d2;    // W''

    double hull_lo = 0.0;
    double hull_hi = 0.0;
    std::vector<double> hull_v;                     // tabulation grid
    std::vector<double> hull_w;                     // W on the grid
    std::vector<std::pair<double, double>> hull_nodes;  // lower hull vertices (v, W**)
    std::vector<AffineSegment> affine_segments;     // hull edges strictly below W
    std::vector<Interval> sigma_G;                  // open components of {W > W**}
    std::vector<Interval> sigma_L;                  // open components of {W'' < 0}

    double max_w_sampled = 0.0;
    bool growth_warning = false;   // |W'| <= C (1 + W) violated on the sample range
    double growth_constant = 0.0;  // max |W'| / (1 + W) observed

    double cell() const { return (hull_hi - hull_lo) / (static_cast<int>(hull_v.size()) - 1); }

    bool in_hull(double v) const { return v >= hull_lo && v <= hull_hi; }

    void require_in_hull(double v) const {
        if (!in_hull(v))
            throw std::domain_error("value " + std::to_string(v) + " outside hull domain [" +
                                    std::to_string(hull_lo) + "," + std::to_string(hull_hi) + "]");
    }

    // W** by linear interpolation between hull vertices, capped by W itself:
    // between samples of a strictly convex stretch the chord lies above W by
    // O(h^2), and the cap restores the exact envelope inequality W** <= W.
    // Clamps to the hull domain.
    double envelope_value(double v) const {
        const double vc = std::clamp(v, hull_lo, hull_hi);
        auto it = std::upper_bound(hull_nodes.begin(), hull_nodes.end(), vc,
                                   [](double a, const std::pair<double, double>& p) { return a < p.first; });
        double interp;
        if (it == hull_nodes.begin())
            interp = hull_nodes.front().second;
        else if (it == hull_nodes.end())
            interp = hull_nodes.back().second;
        else {
            const auto& right = *it;
            const auto& left = *(it - 1);
            const double t = (vc - left.first) / (right.first - left.first);
            interp = left.second + t * (right.second - left.second);
        }
        return std::min(interp, eval(vc));
    }

    // W**'(v): the affine segment's slope inside Sigma_G, W'(v) outside,
    // clamped between neighboring segment slopes so the result is
    // nondecreasing across tabulation noise at segment endpoints.
    double envelope_derivative(double v) const {
        require_in_hull(v);
        double lo_slope = -std::numeric_limits<double>::infinity();
        double hi_slope = std::numeric_limits<double>::infinity();
        for (const auto& seg : affine_segments) {
            if (v >= seg.lo && v <= seg.hi) return seg.slope;
            if (seg.hi < v) lo_slope = std::max(lo_slope, seg.slope);
            if (seg.lo > v) hi_slope = std::min(hi_slope, seg.slope);
        }
        return std::clamp(d1(v), lo_slope, hi_slope);
    }

    bool in_sigma_G(double v) const {
        for (const auto& s : sigma_G)
            if (s.contains(v)) return true;
        return false;
    }

    // Membership in Sigma_G dilated by rho (closure included for rho = 0).
    bool in_sigma_G_dilated(double v, double rho) const {
        for (const auto& s : sigma_G)
            if (v >= s.lo - rho && v <= s.hi + rho) return true;
        return false;
    }

    double dist_to_sigma_G(double v) const {
        double d = std::numeric_limits<double>::infinity();
        for (const auto& s : sigma_G) {
            if (s.contains_closed(v)) return 0.0;
            d = std::min(d, std::min(std::fabs(v - s.lo), std::fabs(v - s.hi)));
        }
        return d;
    }

    // Index of the component whose closure contains v, or -1.
    int sigma_component(double v) const {
        for (size_t i = 0; i < sigma_G.size(); ++i)
            if (sigma_G[i].contains_closed(v)) return static_cast<int>(i);
        return -1;
    }

    // Upper bound for the Lipschitz constant of W**' on [lo, hi]: W**'' = 0
    // on the affine segments and = W'' elsewhere, and W'' >= 0 off Sigma_L.
    double envelope_derivative_lipschitz(double lo, double hi) const {
        lo = std::clamp(lo, hull_lo, hull_hi);
        hi = std::clamp(hi, hull_lo, hull_hi);
        double L = 0.0;
        for (double v : hull_v) {
            if (v < lo || v > hi) continue;
            if (in_sigma_G(v)) continue;
            L = std::max(L, d2(v));
        }
        return L;
    }
};

inline bool range_excursion(const PotentialModel& m, const PeriodicField& f) {
    for (double a : f.v)
        if (!m.in_hull(a)) return true;
    return false;
}

// Lower convex hull of sorted samples by monotone chain.  Returns the hull
// vertices and the maximal hull edges lying strictly below the sampled
// function in their interior (these edges bound the Sigma_i).
inline std::pair<std::vector<std::pair<double, double>>, std::vector<AffineSegment>>
convex_envelope(const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 3) throw std::invalid_argument("convex_envelope needs at least 3 samples");
    std::vector<std::pair<double, double>> hull;
    hull.reserve(samples.size());
    for (const auto& p : samples) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull[hull.size() - 1];
            // keep b only if it lies strictly below chord a--p
            const double cross = (b.first - a.first) * (p.second - a.second) -
                                 (p.first - a.first) * (b.second - a.second);
            if (cross > 0.0) break;
            hull.pop_back();
        }
        hull.push_back(p);
    }

    // A hull edge spanning more than one sample cell has interior samples
    // strictly above it: that is an affine stretch of the envelope.
    std::vector<AffineSegment> segments;
    size_t si = 0;
    for (size_t e = 0; e + 1 < hull.size(); ++e) {
        while (si < samples.size() && samples[si].first < hull[e].first) ++si;
        size_t sj = si;
        while (sj < samples.size() && samples[sj].first < hull[e + 1].first) ++sj;
        if (sj > si + 1) {
            AffineSegment seg;
            seg.lo = hull[e].first;
            seg.hi = hull[e + 1].first;
            seg.slope = (hull[e + 1].second - hull[e].second) / (hull[e + 1].first - hull[e].first);
            seg.value_lo = hull[e].second;
            segments.push_back(seg);
        }
    }
    return {std::move(hull), std::move(segments)};
}

namespace detail {

// Tabulate envelope, Sigma_G and Sigma_L from the model's W / W'' samples.
inline void tabulate(PotentialModel& m, int n_hull) {
    m.hull_v.resize(static_cast<size_t>(n_hull));
    m.hull_w.resize(static_cast<size_t>(n_hull));
    const double span = m.hull_hi - m.hull_lo;
    for (int i = 0; i < n_hull; ++i) {
        m.hull_v[i] = m.hull_lo + span * i / (n_hull - 1);
        m.hull_w[i] = m.eval(m.hull_v[i]);
        m.max_w_sampled = std::max(m.max_w_sampled, m.hull_w[i]);
    }

    std::vector<std::pair<double, double>> samples(static_cast<size_t>(n_hull));
    for (int i = 0; i < n_hull; ++i) samples[i] = {m.hull_v[i], m.hull_w[i]};
    auto [nodes, segments] = convex_envelope(samples);
    m.hull_nodes = std::move(nodes);
    m.affine_segments = std::move(segments);

    // Sigma_G: maximal runs of {W - W** > eta} on the grid, with endpoints
    // snapped to the bracketing contact points.  A hull edge can span
    // interior touch points (the envelope grazing W inside an affine
    // stretch), and those split the components.
    const double eta = 1e-10 * (1.0 + m.max_w_sampled);
    int gi = 0;
    while (gi < n_hull) {
        if (m.hull_w[gi] - m.envelope_value(m.hull_v[gi]) <= eta) {
            ++gi;
            continue;
        }
        const int run_start = gi;
        while (gi < n_hull && m.hull_w[gi] - m.envelope_value(m.hull_v[gi]) > eta) ++gi;
        const int lo_idx = run_start > 0 ? run_start - 1 : run_start;
        const int hi_idx = gi < n_hull ? gi : gi - 1;
        m.sigma_G.push_back({m.hull_v[lo_idx], m.hull_v[hi_idx]});
    }

    // Sigma_L by sign scan of W'' on the grid.
    bool inside = false;
    double start = 0.0;
    for (int i = 0; i < n_hull; ++i) {
        const bool neg = m.d2(m.hull_v[i]) < 0.0;
        if (neg && !inside) {
            inside = true;
            start = m.hull_v[i];
        } else if (!neg && inside) {
            inside = false;
            m.sigma_L.push_back({start, m.hull_v[i - 1]});
        }
    }
    if (inside) m.sigma_L.push_back({start, m.hull_v[n_hull - 1]});

    // Growth check |W'| <= C (1 + W) on the sampled range.
    const double growth_cap = 100.0;
    for (double v : m.hull_v)
        m.growth_constant = std::max(m.growth_constant, std::fabs(m.d1(v)) / (1.0 + m.eval(v)));
    m.growth_warning = m.growth_constant > growth_cap;
}

inline void reject_affine_stretches(const PotentialModel& m) {
    // Assumption: W is not affine in any interval.  Reject 8+ consecutive
    // collinear samples (second differences below 1e-13 of the local scale).
    const int n = static_cast<int>(m.hull_v.size());
    int run = 0;
    for (int i = 1; i + 1 < n; ++i) {
        const double d2f = m.hull_w[i - 1] - 2.0 * m.hull_w[i] + m.hull_w[i + 1];
        const double scale = 1.0 + std::fabs(m.hull_w[i]);
        if (std::fabs(d2f) <= 1e-13 * scale) {
            if (++run >= 6) // 6 interior second differences = 8 collinear points
                throw std::invalid_argument("potential is affine on a sampled stretch near v = " +
                                            std::to_string(m.hull_v[i]));
        } else {
            run = 0;
        }
    }
}

}  // namespace detail

// Custom potential from callables.  W must be C^2, >= 0 and coercive on the
// tabulation domain.
inline PotentialModel build_custom(std::function<double(double)> W,
                                   std::function<double(double)> d1,
                                   std::function<double(double)> d2,
                                   double hull_lo, double hull_hi, int n_hull) {
    if (n_hull < 64) throw std::invalid_argument("n_hull must be >= 64");
    if (!(hull_hi > hull_lo) || hull_hi - hull_lo < 1e-8)
        throw std::invalid_argument("degenerate hull domain");
    PotentialModel m;
    m.eval = std::move(W);
    m.d1 = std::move(d1);
    m.d2 = std::move(d2);
    m.hull_lo = hull_lo;
    m.hull_hi = hull_hi;
    // Coercivity on the sampled window: W must decrease into the domain at
    // the left end and increase at the right end.
    const double h = (hull_hi - hull_lo) / (n_hull - 1);
    if (m.eval(hull_lo) < m.eval(hull_lo + h) || m.eval(hull_hi) < m.eval(hull_hi - h))
        throw std::invalid_argument("potential is not coercive on the hull domain");
    detail::tabulate(m, n_hull);
    detail::reject_affine_stretches(m);
    return m;
}

// The standard double-well W(v) = (1 - v^2)^2 / 4, tabulated on [-3, 3].
inline PotentialModel build_double_well(int n_hull = 4096) {
    return build_custom([](double v) { return (1.0 - v * v) * (1.0 - v * v) / 4.0; },
                        [](double v) { return v * v * v - v; },
                        [](double v) { return 3.0 * v * v - 1.0; },
                        -3.0, 3.0, n_hull);
}

// Secant slope of W over [a, b].
inline double chord_slope(const PotentialModel& m, double a, double b) {
    return (m.eval(b) - m.eval(a)) / (b - a);
}

// psi(a, b) = max_{c in [a,b]} [ W(a) - W(c) + s (c - a) ], s the chord
// slope; nonnegative, zero iff W is concave between a and b.  Coarse scan
// plus golden-section refinement of the best bracket.
inline double psi(const PotentialModel& m, double a, double b, int scan_points = 1024) {
    if (!(a < b)) throw std::invalid_argument("psi requires a < b");
    const double s = chord_slope(m, a, b);
    const double wa = m.eval(a);
    auto bracket = [&](double c) { return wa - m.eval(c) + s * (c - a); };

    double best = 0.0;  // value at c = a is exactly 0
    int best_i = 0;
    for (int i = 0; i <= scan_points; ++i) {
        const double c = a + (b - a) * i / scan_points;
        const double val = bracket(c);
        if (val > best) {
            best = val;
            best_i = i;
        }
    }

    // Golden-section on the cell pair around the best sample.
    double lo = a + (b - a) * std::max(0, best_i - 1) / scan_points;
    double hi = a + (b - a) * std::min(scan_points, best_i + 1) / scan_points;
    const double gr = 0.6180339887498949;
    double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
    double f1 = bracket(x1), f2 = bracket(x2);
    while (hi - lo > 1e-12) {
        if (f1 < f2) {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + gr * (hi - lo);
            f2 = bracket(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - gr * (hi - lo);
            f1 = bracket(x1);
        }
    }
    best = std::max({best, f1, f2});
    return std::max(best, 0.0);
}

// Precomputed psi on a (a, b) pair grid over [-M, M], so that omega can be
// swept over many rho values without re-maximizing.  The admissible family
// I_rho shrinks as rho grows on this fixed candidate set, which makes the
// tabulated omega exactly nondecreasing.
class OmegaTable {
  public:
    OmegaTable(const PotentialModel& m, double M, int resolution = 512, int psi_scan = 256)
        : M_(M), res_(resolution) {
        if (!(M > 0.0)) throw std::invalid_argument("omega requires M > 0");
        grid_.resize(static_cast<size_t>(res_));
        for (int i = 0; i < res_; ++i)
            grid_[i] = -M + 2.0 * M * i / (res_ - 1);
        psi_.assign(static_cast<size_t>(res_) * res_, 0.0);
        for (int i = 0; i < res_; ++i)
            for (int j = i + 1; j < res_; ++j)
                psi_[static_cast<size_t>(i) * res_ + j] = psi(m, grid_[i], grid_[j], psi_scan);
        model_ = &m;
    }

    // inf psi(a,b) over [a,b] in [-M,M] with b - a >= rho and [a,b] not
    // contained in the rho-dilation of Sigma_G; +infinity if empty.
    double omega(double rho) const {
        if (!(rho > 0.0)) throw std::invalid_argument("omega requires rho > 0");
        double best = std::numeric_limits<double>::infinity();
        for (int i = 0; i < res_; ++i) {
            for (int j = i + 1; j < res_; ++j) {
                const double a = grid_[i], b = grid_[j];
                if (b - a < rho) continue;
                if (contained_in_dilation(a, b, rho)) continue;
                best = std::min(best, psi_[static_cast<size_t>(i) * res_ + j]);
            }
        }
        return best;
    }

  private:
    // [a,b] contained in the open dilated set Sigma_G^rho; dilated components
    // may merge, so test against the merged interval list.
    bool contained_in_dilation(double a, double b, double rho) const {
        std::vector<Interval> dil;
        for (const auto& s : model_->sigma_G) dil.push_back({s.lo - rho, s.hi + rho});
        std::sort(dil.begin(), dil.end(), [](const Interval& x, const Interval& y) { return x.lo < y.lo; });
        std::vector<Interval> merged;
        for (const auto& d : dil) {
            if (!merged.empty() && d.lo <= merged.back().hi)
                merged.back().hi = std::max(merged.back().hi, d.hi);
            else
                merged.push_back(d);
        }
        for (const auto& d : merged)
            if (a > d.lo && b < d.hi) return true;
        return false;
    }

    const PotentialModel* model_ = nullptr;
    double M_;
    int res_;
    std::vector<double> grid_;
    std::vector<double> psi_;
};

// One-off omega evaluation; builds the pair table internally.  Prefer
// OmegaTable when sweeping rho.
inline double omega(const PotentialModel& m, double rho, double M) {
    return OmegaTable(m, M).omega(rho);
}

// Envelope table as CSV: v, W, W**, W**', in_sigma_G.
inline void write_envelope_csv(std::ostream& out, const PotentialModel& m) {
    out << "v,W,Wss,Wss_prime,in_sigma_G\n";
    for (size_t i = 0; i < m.hull_v.size(); ++i) {
        const double v = m.hull_v[i];
        out << format_full(v) << "," << format_full(m.hull_w[i]) << ","
            << format_full(m.envelope_value(v)) << "," << format_full(m.envelope_derivative(v))
            << "," << (m.in_sigma_G(v) ? 1 : 0) << "\n";
    }
}

}  // namespace chlab
