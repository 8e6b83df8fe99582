#include "zspacing/similarity.hpp"

#include <utility>

#include "zspacing/parallel.hpp"

namespace zspacing {

void validate_psm(const Psm& psm) {
    const int n = psm.n();
    if (psm.values.cols() != n) throw data_error("psm: matrix is not square");
    for (int i = 0; i < n; ++i) {
        if (psm.values(i, i) != 1.0)
            throw data_error("psm: diagonal at section " + std::to_string(i) + " is not 1");
        for (int j = i + 1; j < n; ++j) {
            const bool cij = psm.computed(i, j), cji = psm.computed(j, i);
            if (cij != cji)
                throw data_error("psm: cell (" + std::to_string(i) + "," + std::to_string(j) +
                                 ") is computed on one side of the diagonal only");
            if (!cij) continue;
            const double v = psm.values(i, j);
            if (v != psm.values(j, i))
                throw data_error("psm: asymmetric value at (" + std::to_string(i) + "," +
                                 std::to_string(j) + ")");
            if (v < -1.0 || v > 1.0)
                throw data_error("psm: value " + std::to_string(v) + " at (" + std::to_string(i) +
                                 "," + std::to_string(j) + ") outside [-1, 1]");
            if (std::abs(i - j) > psm.range)
                throw data_error("psm: computed pair (" + std::to_string(i) + "," +
                                 std::to_string(j) + ") outside the declared range " +
                                 std::to_string(psm.range));
        }
    }
}

namespace {

// Pixel window of a section; full frame for compute_psm, sub-rectangle for
// the block-wise variant.
struct Window {
    int x0 = 0, y0 = 0, w = 0, h = 0;
};

struct SectionStats {
    double mean = 0.0;
    double sigma = 0.0;  // population standard deviation
    bool flat = false;   // zero variance
};

// Mean and population sigma over the window, accumulated in double in a
// fixed left-to-right pixel order.
template <class T>
SectionStats window_stats(const ImageStack& stack, int z, const Window& win) {
    const T* base = std::get<std::vector<T>>(stack.data).data() +
                    static_cast<std::size_t>(z) * stack.section_pixels();
    const double p = static_cast<double>(win.w) * static_cast<double>(win.h);
    double sum = 0.0;
    for (int y = 0; y < win.h; ++y) {
        const T* row = base + static_cast<std::size_t>(win.y0 + y) * stack.width + win.x0;
        for (int x = 0; x < win.w; ++x) sum += static_cast<double>(row[x]);
    }
    SectionStats st;
    st.mean = sum / p;
    double var = 0.0;
    for (int y = 0; y < win.h; ++y) {
        const T* row = base + static_cast<std::size_t>(win.y0 + y) * stack.width + win.x0;
        for (int x = 0; x < win.w; ++x) {
            const double d = static_cast<double>(row[x]) - st.mean;
            var += d * d;
        }
    }
    st.sigma = std::sqrt(var / p);
    st.flat = (var == 0.0);
    return st;
}

// sum((a - mean_a) * (b - mean_b)) over the window, fixed pixel order.
template <class T>
double centered_dot(const ImageStack& stack, int za, int zb, const Window& win, double mean_a,
                    double mean_b) {
    const T* data = std::get<std::vector<T>>(stack.data).data();
    const T* base_a = data + static_cast<std::size_t>(za) * stack.section_pixels();
    const T* base_b = data + static_cast<std::size_t>(zb) * stack.section_pixels();
    double acc = 0.0;
    for (int y = 0; y < win.h; ++y) {
        const T* ra = base_a + static_cast<std::size_t>(win.y0 + y) * stack.width + win.x0;
        const T* rb = base_b + static_cast<std::size_t>(win.y0 + y) * stack.width + win.x0;
        for (int x = 0; x < win.w; ++x)
            acc += (static_cast<double>(ra[x]) - mean_a) * (static_cast<double>(rb[x]) - mean_b);
    }
    return acc;
}

Psm compute_window_psm(const ImageStack& stack, const Window& win, int range, int threads,
                       bool substitute_zero_variance, std::vector<std::string>* warnings,
                       const std::string& where) {
    const int n = stack.depth;
    const double p = static_cast<double>(win.w) * static_cast<double>(win.h);

    std::vector<SectionStats> stats(n);
    parallel_for(n, threads, [&](std::int64_t z) {
        stats[z] = stack.is_u8() ? window_stats<std::uint8_t>(stack, static_cast<int>(z), win)
                                 : window_stats<float>(stack, static_cast<int>(z), win);
    });
    for (int z = 0; z < n; ++z) {
        if (!stats[z].flat) continue;
        if (!substitute_zero_variance)
            throw data_error("compute_psm: section " + std::to_string(z) +
                             " has zero intensity variance" + where);
        if (warnings)
            warnings->push_back("section " + std::to_string(z) + " has zero intensity variance" +
                                where + "; its similarities are set to 0");
    }

    Psm psm;
    psm.values = Eigen::MatrixXd::Constant(n, n, Psm::not_computed);
    psm.range = range;
    for (int i = 0; i < n; ++i) psm.values(i, i) = 1.0;

    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= std::min(n - 1, i + range); ++j) pairs.emplace_back(i, j);

    parallel_for(static_cast<std::int64_t>(pairs.size()), threads, [&](std::int64_t k) {
        const auto [i, j] = pairs[static_cast<std::size_t>(k)];
        double v = 0.0;
        if (!stats[i].flat && !stats[j].flat) {
            const double cov = stack.is_u8()
                                   ? centered_dot<std::uint8_t>(stack, i, j, win, stats[i].mean,
                                                                stats[j].mean)
                                   : centered_dot<float>(stack, i, j, win, stats[i].mean,
                                                         stats[j].mean);
            v = std::clamp(cov / (p * stats[i].sigma * stats[j].sigma), -1.0, 1.0);
        }
        psm.values(i, j) = v;
        psm.values(j, i) = v;
    });
    return psm;
}

} // namespace

Psm compute_psm(const ImageStack& stack, int range, int threads, bool substitute_zero_variance,
                std::vector<std::string>* warnings) {
    validate_stack(stack);
    if (range < 1 || range > stack.depth - 1)
        throw data_error("compute_psm: range " + std::to_string(range) +
                         " outside [1, depth-1] = [1, " + std::to_string(stack.depth - 1) + "]");
    return compute_window_psm(stack, Window{0, 0, stack.width, stack.height}, range, threads,
                              substitute_zero_variance, warnings, "");
}

BlockGrid compute_blockwise_psm(const ImageStack& stack, int blocks_x, int blocks_y, int range,
                                int threads, bool substitute_zero_variance,
                                std::vector<std::string>* warnings) {
    validate_stack(stack);
    if (range < 1 || range > stack.depth - 1)
        throw data_error("compute_blockwise_psm: range " + std::to_string(range) +
                         " outside [1, depth-1] = [1, " + std::to_string(stack.depth - 1) + "]");
    if (blocks_x < 1 || blocks_x > stack.width)
        throw data_error("compute_blockwise_psm: blocks_x " + std::to_string(blocks_x) +
                         " does not divide width " + std::to_string(stack.width) +
                         " into non-empty spans");
    if (blocks_y < 1 || blocks_y > stack.height)
        throw data_error("compute_blockwise_psm: blocks_y " + std::to_string(blocks_y) +
                         " does not divide height " + std::to_string(stack.height) +
                         " into non-empty spans");

    const int span_x = stack.width / blocks_x;
    const int span_y = stack.height / blocks_y;
    BlockGrid grid;
    grid.blocks_x = blocks_x;
    grid.blocks_y = blocks_y;
    grid.blocks.reserve(static_cast<std::size_t>(blocks_x) * blocks_y);
    for (int by = 0; by < blocks_y; ++by) {
        for (int bx = 0; bx < blocks_x; ++bx) {
            Window win;
            win.x0 = bx * span_x;
            win.y0 = by * span_y;
            win.w = (bx == blocks_x - 1) ? stack.width - win.x0 : span_x;   // last block absorbs
            win.h = (by == blocks_y - 1) ? stack.height - win.y0 : span_y;  // the remainder
            const std::string where =
                " in block (" + std::to_string(bx) + "," + std::to_string(by) + ")";
            grid.blocks.push_back(compute_window_psm(stack, win, range, threads,
                                                     substitute_zero_variance, warnings, where));
        }
    }
    return grid;
}

} // namespace zspacing
