#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "zspacing/similarity.hpp"
#include "zspacing/stack.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

// Analytic similarity-decay model used by the generators.
enum class DecayKind { Exponential, Gaussian };

struct DecayModel {
    DecayKind kind = DecayKind::Exponential;
    double param = 3.0;  // tau for Exponential, sigma for Gaussian

    // Similarity at distance d: exp(-d/tau) or exp(-d^2/(2 sigma^2)).
    [[nodiscard]] double operator()(double d) const;

    // Textual form "exp:<tau>" / "gauss:<sigma>", and its parser.
    [[nodiscard]] std::string str() const;
    [[nodiscard]] static DecayModel parse(const std::string& text);
};

// Known truth behind a synthetic instance.  positions/quality describe the
// sections of the instance in their current row order; kept_indices maps each
// row back to its original index (identity until sections are removed);
// permutation[new_index] = original index after a reorder (empty when the
// order was never disturbed).
struct GroundTruth {
    Eigen::VectorXd positions;
    Eigen::VectorXd quality;
    DecayModel decay;
    std::vector<int> kept_indices;
    std::vector<int> permutation;

    [[nodiscard]] int n() const { return static_cast<int>(positions.size()); }
};

// Grid positions with i.i.d. uniform jitter in [-jitter, jitter] per section
// and unit quality.  No RNG draws happen when jitter is 0, so the result is
// seed-independent in that case.
[[nodiscard]] GroundTruth make_jitter_truth(int n, double jitter, const DecayModel& decay,
                                            std::uint64_t seed);

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

// Inverse of the solver's similarity model: values(i,j) =
// g(|pos_i - pos_j|)/(q_i * q_j) + Gaussian(0, noise_sigma) within the band,
// clamped to [-1, 1], symmetric, unit diagonal.  One noise value is drawn
// per unordered pair in fixed (i, j) order, and none when noise_sigma is 0.
[[nodiscard]] Psm synthesize_psm(const GroundTruth& truth, double noise_sigma, int range,
                                 std::uint64_t seed);

// Smooth random volume: white Gaussian noise blurred by an isotropic
// Gaussian of width smooth_sigma (replicated borders), then rescaled to
// [0, 1] f32.
[[nodiscard]] ImageStack generate_volume(int width, int height, int depth, double smooth_sigma,
                                         std::uint64_t seed);

// Extracts sections at real-valued z positions by linear interpolation
// between the volume's integer slices.  Every position must lie in
// [0, depth-1].  Output sections are f32.
[[nodiscard]] ImageStack sample_sections(const ImageStack& volume,
                                         const std::vector<double>& positions);

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

// Drops the listed sections from the truth, recording the survivors'
// original indices.  Removing the first or last section is an error: the
// endpoints anchor the evaluation frame.
[[nodiscard]] GroundTruth perturb_remove(const GroundTruth& truth,
                                         const std::vector<int>& remove_indices);
[[nodiscard]] ImageStack apply_removal(const ImageStack& stack,
                                       const std::vector<int>& remove_indices);

// Random permutation with every section's new index within
// +-max_displacement of its original index, built from repeated bounded
// transpositions (10 n attempts).  perm[new_index] = original index.
[[nodiscard]] std::vector<int> bounded_permutation(int n, int max_displacement,
                                                   std::uint64_t seed);
[[nodiscard]] GroundTruth perturb_reorder(const GroundTruth& truth, int max_displacement,
                                          std::uint64_t seed);
[[nodiscard]] ImageStack apply_permutation(const ImageStack& stack,
                                           const std::vector<int>& permutation);

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct Deviation {
    double mean = 0.0;
    double max = 0.0;
};

// Least-squares affine map of `estimated` onto `reference` (fit over all
// entries), applied to `estimated`.
[[nodiscard]] Eigen::VectorXd affine_align_to(const Eigen::VectorXd& estimated,
                                              const Eigen::VectorXd& reference);

// Mean and max of |estimated - reference| over the kept rows (all rows when
// `kept` is empty), optionally affine-aligning estimated onto reference over
// those rows first.  Requires at least 2 kept rows.
[[nodiscard]] Deviation eval_deviation(const Eigen::VectorXd& estimated,
                                       const Eigen::VectorXd& reference,
                                       const std::vector<int>& kept, bool affine);

// Kendall rank correlation in [-1, 1]; 1 means identical ordering.
[[nodiscard]] double kendall_tau(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// ---------------------------------------------------------------------------
// Ground-truth files
// ---------------------------------------------------------------------------

// CSV rows "index,true_z,true_quality,kept" over the ORIGINAL instance:
// one row per original section, kept = 0 for sections a perturbation
// removed.  `kept` must have one flag per original row (empty = all kept).
void save_truth_csv(const Eigen::VectorXd& positions, const Eigen::VectorXd& quality,
                    const std::vector<char>& kept, const std::string& path);

struct TruthFile {
    Eigen::VectorXd positions;
    Eigen::VectorXd quality;
    std::vector<char> kept;
};

[[nodiscard]] TruthFile load_truth_csv(const std::string& path);

// CSV rows "new_index,original_index".
void save_permutation_csv(const std::vector<int>& permutation, const std::string& path);
[[nodiscard]] std::vector<int> load_permutation_csv(const std::string& path);

} // namespace zspacing
