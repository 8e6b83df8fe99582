#include "zspacing/inference.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "zspacing/parallel.hpp"

namespace zspacing {

void EstimateOptions::validate() const {
    if (iterations < 1)
        throw data_error("options: iterations must be at least 1");
    if (!(shift_damping > 0.0) || shift_damping > 1.0)
        throw data_error("options: shift damping must be in (0, 1]");
    if (wf_sigma && !(*wf_sigma > 0.0))
        throw data_error("options: wf-sigma must be positive");
    if (ws_sigma && !(*ws_sigma > 0.0))
        throw data_error("options: ws-sigma must be positive");
    if (m_max < 1.0)
        throw data_error("options: m-max must be at least 1");
    if (lambda_m < 0.0)
        throw data_error("options: lambda-m must be non-negative");
}

namespace {

[[nodiscard]] double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Gaussian window weight for coordinate offset dc.
[[nodiscard]] double window(double dc, double sigma) {
    return std::exp(-(dc * dc) / (2.0 * sigma * sigma));
}

// Inclusive index band [lo, hi] of candidate partners for section z; cells
// outside it are never computed.
struct Band {
    int lo, hi;
};

[[nodiscard]] Band band(int z, int n, int range) {
    return {std::max(0, z - range), std::min(n - 1, z + range)};
}

} // namespace

// ---------------------------------------------------------------------------
// Monotone projection
// ---------------------------------------------------------------------------

Eigen::ArrayXd isotonic_nonincreasing(const Eigen::ArrayXd& values, const Eigen::ArrayXd& weights) {
    const auto n = values.size();
    std::vector<double> val, wgt;
    std::vector<Eigen::Index> cnt;
    val.reserve(n);
    wgt.reserve(n);
    cnt.reserve(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        val.push_back(values[i]);
        wgt.push_back(weights[i]);
        cnt.push_back(1);
        while (val.size() >= 2 && val[val.size() - 1] > val[val.size() - 2]) {
            const double x2 = val.back(), w2 = wgt.back();
            const Eigen::Index c2 = cnt.back();
            val.pop_back();
            wgt.pop_back();
            cnt.pop_back();
            const double x1 = val.back(), w1 = wgt.back();
            const Eigen::Index c1 = cnt.back();
            val.pop_back();
            wgt.pop_back();
            cnt.pop_back();
            const double tw = w1 + w2;
            val.push_back(tw > 0.0 ? (x1 * w1 + x2 * w2) / tw : 0.5 * (x1 + x2));
            wgt.push_back(tw);
            cnt.push_back(c1 + c2);
        }
    }
    Eigen::ArrayXd out(n);
    Eigen::Index k = 0;
    for (std::size_t blk = 0; blk < val.size(); ++blk)
        for (Eigen::Index rep = 0; rep < cnt[blk]; ++rep) out[k++] = val[blk];
    return out;
}

// ---------------------------------------------------------------------------
// Curve fitting and evaluation
// ---------------------------------------------------------------------------

DecayCurve fit_decay_curve(const Psm& psm, const Eigen::VectorXd& c, const Eigen::VectorXd& m,
                           int zref, double wf_sigma) {
    const int n = psm.n();
    const int r = psm.range;
    if (c.size() != n || m.size() != n)
        throw data_error("fit_decay_curve: coordinate/quality length does not match the PSM");

    Eigen::ArrayXd bin_weight = Eigen::ArrayXd::Zero(r + 1);
    Eigen::ArrayXd bin_sum = Eigen::ArrayXd::Zero(r + 1);
    for (int a = 0; a < n; ++a) {
        const double wa = zref >= 0 ? window(c[a] - c[zref], wf_sigma) : 1.0;
        const Band bd = band(a, n, r);
        for (int b = bd.lo; b <= bd.hi; ++b) {
            if (b == a || !psm.computed(a, b)) continue;
            const double v = clamp01(m[a] * m[b] * psm.values(a, b));
            const double d = std::abs(c[a] - c[b]);
            const int f = static_cast<int>(std::floor(d));
            if (f > r) continue;
            const double t = d - f;
            if (t == 0.0) {
                bin_weight[f] += wa;
                bin_sum[f] += wa * v;
            } else {
                bin_weight[f] += wa * (1.0 - t);
                bin_sum[f] += wa * (1.0 - t) * v;
                if (f + 1 <= r) {
                    bin_weight[f + 1] += wa * t;
                    bin_sum[f + 1] += wa * t * v;
                }
            }
        }
    }

    Eigen::ArrayXd bins = Eigen::ArrayXd::Constant(r + 1, Psm::not_computed);
    int first = -1, last = -1;
    for (int k = 0; k <= r; ++k) {
        if (bin_weight[k] > 0.0) {
            bins[k] = bin_sum[k] / bin_weight[k];
            if (first < 0) first = k;
            last = k;
        }
    }
    if (first < 0)
        throw data_error("fit_decay_curve: all distance bins are empty");

    for (int k = 0; k < first; ++k) bins[k] = bins[first];
    for (int k = last + 1; k <= r; ++k) bins[k] = bins[last];
    for (int k = first + 1; k < last; ++k) {
        if (!std::isnan(bins[k])) continue;
        int prev = k - 1;
        while (std::isnan(bins[prev])) --prev;
        int next = k + 1;
        while (std::isnan(bins[next])) ++next;
        const double t = static_cast<double>(k - prev) / static_cast<double>(next - prev);
        bins[k] = bins[prev] * (1.0 - t) + bins[next] * t;
    }
    bins[0] = 1.0;

    DecayCurve curve{isotonic_nonincreasing(bins, bin_weight)};
    curve.samples[0] = 1.0;
    return curve;
}

double curve_value(const DecayCurve& curve, double d) {
    const int r = curve.range();
    if (d <= 0.0) return curve.samples[0];
    if (d >= r) return curve.samples[r];
    const int f = static_cast<int>(std::floor(d));
    const double t = d - f;
    return curve.samples[f] * (1.0 - t) + curve.samples[f + 1] * t;
}

double invert_curve(const DecayCurve& curve, double value) {
    const int r = curve.range();
    if (value >= 1.0) return 0.0;
    if (value < curve.samples[r]) return static_cast<double>(r);
    // hi = last sample still at or above the value
    int hi = 0;
    for (int k = 0; k <= r; ++k)
        if (curve.samples[k] >= value) hi = k;
    if (curve.samples[hi] == value) {
        int first = hi;
        while (first > 0 && curve.samples[first - 1] == value) --first;
        return 0.5 * (first + hi);  // flat segment -> midpoint
    }
    return hi + (curve.samples[hi] - value) / (curve.samples[hi] - curve.samples[hi + 1]);
}

CurveSet fit_curves(const Psm& psm, const Eigen::VectorXd& c, const Eigen::VectorXd& m,
                    const EstimateOptions& opts, int threads) {
    CurveSet set;
    set.mode = opts.curve_mode;
    if (opts.curve_mode == CurveMode::Global) {
        set.curves.push_back(fit_decay_curve(psm, c, m, -1, 0.0));
        return set;
    }
    const int n = psm.n();
    const double wf = resolved_wf_sigma(opts, n);
    set.curves.resize(n);
    parallel_for(n, threads, [&](std::int64_t zref) {
        set.curves[zref] = fit_decay_curve(psm, c, m, static_cast<int>(zref), wf);
    });
    return set;
}

// ---------------------------------------------------------------------------
// Quality and shift updates
// ---------------------------------------------------------------------------

Eigen::VectorXd estimate_quality(const Psm& psm, const CurveSet& curves, const Eigen::VectorXd& c,
                                 const Eigen::VectorXd& m_prev, const EstimateOptions& opts,
                                 int threads) {
    const int n = psm.n();
    const double ws = resolved_ws_sigma(opts, psm.range);
    Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
    parallel_for(n, threads, [&](std::int64_t zi) {
        const int z = static_cast<int>(zi);
        double sum_ab = 0.0, sum_bb = 0.0;
        bool any = false;
        const Band bd = band(z, n, psm.range);
        for (int zref = bd.lo; zref <= bd.hi; ++zref) {
            if (zref == z || !psm.computed(z, zref)) continue;
            any = true;
            const double a = curve_value(curves.for_reference(zref), std::abs(c[z] - c[zref]));
            const double b = m_prev[zref] * psm.values(z, zref);
            const double w = window(c[z] - c[zref], ws);
            sum_ab += w * a * b;
            sum_bb += w * b * b;
        }
        if (!any)
            throw data_error("estimate_quality: section " + std::to_string(z) +
                             " has no computed pairs");
        m[z] = std::clamp((sum_ab + opts.lambda_m) / (sum_bb + opts.lambda_m), 1.0, opts.m_max);
    });
    return m;
}

Eigen::VectorXd compute_shifts(const Psm& psm, const CurveSet& curves, const Eigen::VectorXd& c,
                               const Eigen::VectorXd& m, const EstimateOptions& opts,
                               int threads) {
    const int n = psm.n();
    const double ws = resolved_ws_sigma(opts, psm.range);
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    parallel_for(n, threads, [&](std::int64_t zi) {
        const int z = static_cast<int>(zi);
        double weight_sum = 0.0, vote_sum = 0.0;
        const Band bd = band(z, n, psm.range);
        for (int zref = bd.lo; zref <= bd.hi; ++zref) {
            if (zref == z || !psm.computed(z, zref)) continue;
            const DecayCurve& curve = curves.for_reference(zref);
            const double v = clamp01(m[z] * m[zref] * psm.values(z, zref));
            if (v < curve.floor_value()) continue;  // distance only bounded from below
            const double dist = invert_curve(curve, v);
            const double dc = c[z] - c[zref];
            const double sign = dc > 0.0 ? 1.0 : (dc < 0.0 ? -1.0 : (z > zref ? 1.0 : -1.0));
            const double candidate = c[zref] + sign * dist;
            const double w = window(dc, ws);
            weight_sum += w;
            vote_sum += w * (candidate - c[z]);
        }
        if (weight_sum > 0.0) s[z] = vote_sum / weight_sum;
    });
    return s;
}

Eigen::VectorXd apply_shifts(const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                             const EstimateOptions& opts) {
    if (c.size() != s.size())
        throw data_error("apply_shifts: coordinate/shift length mismatch");
    const auto n = c.size();
    Eigen::VectorXd cp = c + opts.shift_damping * s;
    if (!opts.allow_reorder) {
        for (Eigen::Index k = 1; k < n; ++k)
            cp[k] = std::max(cp[k], cp[k - 1] + 1e-4);
    }
    const double lo = cp.minCoeff();
    const double hi = cp.maxCoeff();
    if (hi - lo < 1e-9)
        throw numeric_error("apply_shifts: degenerate collapse of the coordinate range");
    const double span = static_cast<double>(n - 1);
    return (((cp.array() - lo) * span) / (hi - lo)).matrix();
}

// ---------------------------------------------------------------------------
// Objective
// ---------------------------------------------------------------------------

double objective(const Psm& psm, const CurveSet& curves, const Eigen::VectorXd& c,
                 const Eigen::VectorXd& m, const Eigen::VectorXd& s,
                 const EstimateOptions& opts) {
    const int n = psm.n();
    const double ws = resolved_ws_sigma(opts, psm.range);
    const double wf = resolved_wf_sigma(opts, n);

    // Curve-fit residuals, weighted by the curve-fit window of each curve's
    // reference section (uniform in Global mode).
    double fit_term = 0.0;
    const int n_refs = curves.mode == CurveMode::Local ? n : 1;
    for (int ref = 0; ref < n_refs; ++ref) {
        const DecayCurve& curve = curves.mode == CurveMode::Local ? curves.curves[ref]
                                                                  : curves.curves[0];
        for (int a = 0; a < n; ++a) {
            const double wa =
                curves.mode == CurveMode::Local ? window(c[a] - c[ref], wf) : 1.0;
            const Band bd = band(a, n, psm.range);
            for (int b = bd.lo; b <= bd.hi; ++b) {
                if (b == a || !psm.computed(a, b)) continue;
                const double v = clamp01(m[a] * m[b] * psm.values(a, b));
                const double res = v - curve_value(curve, std::abs(c[a] - c[b]));
                fit_term += wa * res * res;
            }
        }
    }

    // Quality and shift residuals, weighted by the vote window.
    double quality_term = 0.0, shift_term = 0.0;
    for (int z = 0; z < n; ++z) {
        const Band bd = band(z, n, psm.range);
        for (int zref = bd.lo; zref <= bd.hi; ++zref) {
            if (zref == z || !psm.computed(z, zref)) continue;
            const DecayCurve& curve = curves.for_reference(zref);
            const double dc = c[z] - c[zref];
            const double w = window(dc, ws);
            const double v = clamp01(m[z] * m[zref] * psm.values(z, zref));
            const double res_q = v - curve_value(curve, std::abs(dc));
            quality_term += w * res_q * res_q;
            if (v < curve.floor_value()) continue;  // no distance vote from this pair
            const double dist = invert_curve(curve, v);
            const double sign = dc > 0.0 ? 1.0 : (dc < 0.0 ? -1.0 : (z > zref ? 1.0 : -1.0));
            const double vote = c[zref] + sign * dist - c[z];
            const double res_s = s[z] - vote;
            shift_term += w * res_s * res_s;
        }
    }
    return fit_term + quality_term + shift_term;
}

// ---------------------------------------------------------------------------
// Solver loop
// ---------------------------------------------------------------------------

SolverResult estimate_positions(const Psm& psm, const EstimateOptions& opts, int threads,
                                const IterationObserver& observer) {
    opts.validate();
    const int n = psm.n();
    if (n < 3)
        throw data_error("estimate_positions: need at least 3 sections, got " +
                         std::to_string(n));
    if (psm.range < 1)
        throw data_error("estimate_positions: the PSM has no computed off-diagonal pairs");
    validate_psm(psm);

    Eigen::VectorXd c = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
    Eigen::VectorXd m = Eigen::VectorXd::Ones(n);
    SolverResult result;
    result.objective_history.reserve(static_cast<std::size_t>(opts.iterations));

    for (int it = 0; it < opts.iterations; ++it) {
        try {
            result.curves = fit_curves(psm, c, m, opts, threads);
            m = estimate_quality(psm, result.curves, c, m, opts, threads);
            const Eigen::VectorXd s = compute_shifts(psm, result.curves, c, m, opts, threads);
            result.objective_history.push_back(objective(psm, result.curves, c, m, s, opts));
            c = apply_shifts(c, s, opts);
        } catch (const data_error& e) {
            throw data_error("iteration " + std::to_string(it) + ": " + e.what());
        } catch (const numeric_error& e) {
            throw numeric_error("iteration " + std::to_string(it) + ": " + e.what());
        }
        if (observer)
            observer(IterationState{it, c, m, result.curves, result.objective_history.back()});
    }

    result.coordinates = std::move(c);
    result.quality = std::move(m);
    result.iterations_run = opts.iterations;
    return result;
}

} // namespace zspacing
