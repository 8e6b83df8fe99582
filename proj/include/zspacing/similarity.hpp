#pragma once
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "zspacing/errors.hpp"
#include "zspacing/stack.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// PairwiseSimilarityMatrix
// ---------------------------------------------------------------------------

// N x N symmetric matrix of pairwise similarities, banded by a comparison
// range.  Pairs that were never computed are marked NaN.  Invariants:
// symmetric over computed pairs, unit diagonal, every computed value in
// [-1, 1].
struct Psm {
    Eigen::MatrixXd values;
    int range = 0;  // maximum |i - j| carrying a computed value

    [[nodiscard]] int n() const { return static_cast<int>(values.rows()); }

    [[nodiscard]] bool computed(int i, int j) const { return !std::isnan(values(i, j)); }

    static constexpr double not_computed = std::numeric_limits<double>::quiet_NaN();
};

// Checks the type invariants; throws data_error naming the offending cell.
void validate_psm(const Psm& psm);

// ---------------------------------------------------------------------------
// BlockGrid
// ---------------------------------------------------------------------------

// Per-block similarity matrices over a grid of pixel windows; hook for
// locally varying thickness (the inference itself always consumes one PSM).
struct BlockGrid {
    int blocks_x = 0;
    int blocks_y = 0;
    std::vector<Psm> blocks;  // indexed [by * blocks_x + bx]

    [[nodiscard]] const Psm& at(int bx, int by) const {
        return blocks[static_cast<std::size_t>(by) * blocks_x + bx];
    }
};

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

// Normalized cross-correlation of two equally-sized images:
//   sum((a - mean(a)) * (b - mean(b))) / (P * sigma_a * sigma_b)
// with population standard deviations, accumulated in double in a fixed
// left-to-right pixel order, clamped to [-1, 1] against rounding.
// Throws data_error on dimension mismatch or a zero-variance (constant)
// image.
template <class DA, class DB>
[[nodiscard]] double ncc(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw data_error("ncc: image dimensions differ (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + ")");
    const Eigen::Index rows = a.rows(), cols = a.cols();
    const double p = static_cast<double>(rows) * static_cast<double>(cols);
    if (p < 1.0) throw data_error("ncc: empty images");

    double sum_a = 0.0, sum_b = 0.0;
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) {
            sum_a += static_cast<double>(a(y, x));
            sum_b += static_cast<double>(b(y, x));
        }
    const double mean_a = sum_a / p, mean_b = sum_b / p;

    double var_a = 0.0, var_b = 0.0, cov = 0.0;
    for (Eigen::Index y = 0; y < rows; ++y)
        for (Eigen::Index x = 0; x < cols; ++x) {
            const double da = static_cast<double>(a(y, x)) - mean_a;
            const double db = static_cast<double>(b(y, x)) - mean_b;
            var_a += da * da;
            var_b += db * db;
            cov += da * db;
        }
    if (var_a == 0.0 || var_b == 0.0)
        throw data_error("ncc: zero-variance image");

    const double sigma_a = std::sqrt(var_a / p);
    const double sigma_b = std::sqrt(var_b / p);
    return std::clamp(cov / (p * sigma_a * sigma_b), -1.0, 1.0);
}

// Banded pairwise NCC matrix: values(i,j) = ncc(section i, section j) for
// |i - j| <= range, NaN outside the band, exactly 1 on the diagonal.
// Deterministic regardless of the thread count (parallel over pairs, fixed
// accumulation order within each pair).  A zero-variance section is an error
// naming the section unless substitute_zero_variance is set, in which case
// its pairs get similarity 0 and a warning is appended to *warnings.
[[nodiscard]] Psm compute_psm(const ImageStack& stack, int range, int threads = 1,
                              bool substitute_zero_variance = false,
                              std::vector<std::string>* warnings = nullptr);

// Same computation restricted to a grid of pixel windows.  Window spans are
// width/blocks_x (height/blocks_y) wide with the last block absorbing the
// remainder.
[[nodiscard]] BlockGrid compute_blockwise_psm(const ImageStack& stack, int blocks_x, int blocks_y,
                                              int range, int threads = 1,
                                              bool substitute_zero_variance = false,
                                              std::vector<std::string>* warnings = nullptr);

} // namespace zspacing
