#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "zspacing/errors.hpp"
#include "zspacing/similarity.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

// Similarity as a function of z-distance, sampled at integer distances
// 0..range.  Invariants: samples[0] == 1, monotone non-increasing, all
// samples in [0, 1].
struct DecayCurve {
    Eigen::ArrayXd samples;

    [[nodiscard]] int range() const { return static_cast<int>(samples.size()) - 1; }
    [[nodiscard]] double floor_value() const { return samples[samples.size() - 1]; }
};

enum class CurveMode { Global, Local };

// One decay curve (Global) or one per reference section (Local).
struct CurveSet {
    CurveMode mode = CurveMode::Global;
    std::vector<DecayCurve> curves;

    [[nodiscard]] const DecayCurve& for_reference(int zref) const {
        return curves[mode == CurveMode::Local ? static_cast<std::size_t>(zref) : 0];
    }
};

// All solver hyperparameters.  Window widths left unset resolve to their
// data-dependent defaults: wf_sigma = N/4, ws_sigma = comparison range.
// Both windows are Gaussian in coordinate distance.
struct EstimateOptions {
    int iterations = 100;
    double shift_damping = 0.1;  // step fraction applied to the shifts
    CurveMode curve_mode = CurveMode::Global;
    std::optional<double> wf_sigma;  // curve-fit window width
    std::optional<double> ws_sigma;  // shift/quality vote window width
    double m_max = 4.0;              // quality clamp upper bound
    double lambda_m = 0.1;           // quality regularization toward 1
    bool allow_reorder = true;
    std::uint64_t seed = 0;

    void validate() const;
};

[[nodiscard]] inline double resolved_wf_sigma(const EstimateOptions& o, int n) {
    return o.wf_sigma ? *o.wf_sigma : n / 4.0;
}

[[nodiscard]] inline double resolved_ws_sigma(const EstimateOptions& o, int range) {
    return o.ws_sigma ? *o.ws_sigma : static_cast<double>(range);
}

struct SolverResult {
    Eigen::VectorXd coordinates;
    Eigen::VectorXd quality;
    CurveSet curves;
    std::vector<double> objective_history;  // one value per iteration
    int iterations_run = 0;
};

// Snapshot passed to the per-iteration observer (diagnostics/progress).
struct IterationState {
    int iteration;
    const Eigen::VectorXd& coordinates;
    const Eigen::VectorXd& quality;
    const CurveSet& curves;
    double objective;
};

using IterationObserver = std::function<void(const IterationState&)>;

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Weighted least-squares projection onto monotone non-increasing sequences
// (pool-adjacent-violators).  Zero-weight pools fall back to the plain mean.
[[nodiscard]] Eigen::ArrayXd isotonic_nonincreasing(const Eigen::ArrayXd& values,
                                                    const Eigen::ArrayXd& weights);

// Fits the decay curve from quality-corrected similarities sampled at
// continuous coordinate distances.  Every computed ordered pair (a, b)
// contributes v = clamp01(m[a]*m[b]*R(a,b)) at d = |c[a]-c[b]|, split
// linearly between bins floor(d) and ceil(d) and weighted by the curve-fit
// window centered on section zref; zref < 0 selects uniform weights (the
// Global mode).  Empty bins are filled by linear interpolation (leading
// empties copy the first computed bin, trailing ones the last), samples[0]
// is pinned to 1, and the result is projected monotone non-increasing.
// Throws data_error when every bin is empty.
[[nodiscard]] DecayCurve fit_decay_curve(const Psm& psm, const Eigen::VectorXd& c,
                                         const Eigen::VectorXd& m, int zref, double wf_sigma);

// Piecewise-linear evaluation of the curve at continuous distance d,
// clamped to the sampled range.
[[nodiscard]] double curve_value(const DecayCurve& curve, double d);

// Piecewise-linear inverse: the d in [0, range] with curve(d) = value.
// Values >= 1 map to 0, values below the curve floor clamp to range, and
// values hitting a flat segment return the segment midpoint.
[[nodiscard]] double invert_curve(const DecayCurve& curve, double value);

// Fits the curve set for the current coordinates: a single uniformly
// weighted curve in Global mode, one windowed curve per reference section
// in Local mode.
[[nodiscard]] CurveSet fit_curves(const Psm& psm, const Eigen::VectorXd& c,
                                  const Eigen::VectorXd& m, const EstimateOptions& opts,
                                  int threads = 1);

// One damped least-squares update of the quality multipliers holding
// neighbors fixed:
//   m[z] = (sum w*a*b + lambda_m) / (sum w*b^2 + lambda_m)
// over computed pairs (z, zref) with a = rho_zref(|c[z]-c[zref]|),
// b = m_prev[zref]*R(z,zref) and w the vote window weight; clamped to
// [1, m_max].  Throws data_error for a section with no computed pairs.
[[nodiscard]] Eigen::VectorXd estimate_quality(const Psm& psm, const CurveSet& curves,
                                               const Eigen::VectorXd& c,
                                               const Eigen::VectorXd& m_prev,
                                               const EstimateOptions& opts, int threads = 1);

// Per-section position updates.  Every computed pair (z, zref) votes for
// the candidate c[zref] + sign(c[z]-c[zref]) * invert_curve(rho_zref, v)
// with v = clamp01(m[z]*m[zref]*R) and the vote window weight; ties in c
// take the sign of the index order.  Votes with v strictly below the curve
// floor are skipped: such a similarity only bounds the distance from below
// and would systematically compress the series.  s[z] is the weighted vote
// mean, 0 when no votes remain.
[[nodiscard]] Eigen::VectorXd compute_shifts(const Psm& psm, const CurveSet& curves,
                                             const Eigen::VectorXd& c, const Eigen::VectorXd& m,
                                             const EstimateOptions& opts, int threads = 1);

// Applies damped shifts and renormalizes so min(c') = 0 and
// max(c') = N-1.  With allow_reorder off, updates that would invert the
// order of adjacent sections are truncated to a minimum gap of 1e-4.
// Throws numeric_error when the series collapses (max - min < 1e-9 before
// renormalization).
[[nodiscard]] Eigen::VectorXd apply_shifts(const Eigen::VectorXd& c, const Eigen::VectorXd& s,
                                           const EstimateOptions& opts);

// Diagnostic value of the full objective: curve-fit residuals (curve-fit
// window), quality residuals and shift residuals (vote window), each summed
// as squares over computed pairs.  Zero at an exact-data fixed point.
[[nodiscard]] double objective(const Psm& psm, const CurveSet& curves, const Eigen::VectorXd& c,
                               const Eigen::VectorXd& m, const Eigen::VectorXd& s,
                               const EstimateOptions& opts);

// The alternating solver: starting from grid coordinates and unit quality,
// repeats fit_curves -> estimate_quality -> compute_shifts -> apply_shifts
// for opts.iterations rounds, recording the objective each round.
// Deterministic for identical inputs, options, and any thread count.
// Sub-operation errors are rethrown with the iteration index attached.
[[nodiscard]] SolverResult estimate_positions(const Psm& psm, const EstimateOptions& opts,
                                              int threads = 1,
                                              const IterationObserver& observer = {});

} // namespace zspacing
