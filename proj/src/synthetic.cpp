#include "zspacing/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "csv.hpp"
#include "zspacing/rng.hpp"
#include "zspacing/stackio.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// Decay model
// ---------------------------------------------------------------------------

double DecayModel::operator()(double d) const {
    return kind == DecayKind::Exponential ? std::exp(-d / param)
                                          : std::exp(-(d * d) / (2.0 * param * param));
}

std::string DecayModel::str() const {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s:%g", kind == DecayKind::Exponential ? "exp" : "gauss",
                  param);
    return buf;
}

DecayModel DecayModel::parse(const std::string& text) {
    const std::size_t colon = text.find(':');
    if (colon == std::string::npos)
        throw data_error("decay model '" + text + "' is not of the form exp:<tau>|gauss:<sigma>");
    const std::string name = text.substr(0, colon);
    DecayModel model;
    if (name == "exp")
        model.kind = DecayKind::Exponential;
    else if (name == "gauss")
        model.kind = DecayKind::Gaussian;
    else
        throw data_error("decay model '" + text + "' has unknown kind '" + name +
                         "' (expected exp or gauss)");
    model.param = csv::parse_double(text.substr(colon + 1), "decay model '" + text + "'");
    if (!(model.param > 0.0))
        throw data_error("decay model '" + text + "' needs a positive parameter");
    return model;
}

// ---------------------------------------------------------------------------
// Ground truth
// ---------------------------------------------------------------------------

GroundTruth make_jitter_truth(int n, double jitter, const DecayModel& decay,
                              std::uint64_t seed) {
    if (n < 2) throw data_error("make_jitter_truth: need at least 2 sections");
    if (jitter < 0.0) throw data_error("make_jitter_truth: jitter must be non-negative");
    GroundTruth truth;
    truth.positions = Eigen::VectorXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
    truth.quality = Eigen::VectorXd::Ones(n);
    truth.decay = decay;
    truth.kept_indices.resize(n);
    for (int i = 0; i < n; ++i) truth.kept_indices[i] = i;
    if (jitter > 0.0) {
        Rng rng(seed);
        for (int i = 0; i < n; ++i) truth.positions[i] += rng.uniform(-jitter, jitter);
    }
    return truth;
}

Psm synthesize_psm(const GroundTruth& truth, double noise_sigma, int range,
                   std::uint64_t seed) {
    const int n = truth.n();
    if (n < 2) throw data_error("synthesize_psm: need at least 2 sections");
    if (truth.quality.size() != n)
        throw data_error("synthesize_psm: positions/quality length mismatch");
    if (range < 1) throw data_error("synthesize_psm: range must be at least 1");
    if (noise_sigma < 0.0) throw data_error("synthesize_psm: noise sigma must be non-negative");

    Psm psm;
    psm.range = std::min(range, n - 1);
    psm.values = Eigen::MatrixXd::Constant(n, n, Psm::not_computed);
    psm.values.diagonal().setConstant(1.0);
    Rng rng(seed);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j <= std::min(n - 1, i + psm.range); ++j) {
            double v = truth.decay(std::abs(truth.positions[i] - truth.positions[j])) /
                       (truth.quality[i] * truth.quality[j]);
            if (noise_sigma > 0.0) v += noise_sigma * rng.gaussian();
            v = std::clamp(v, -1.0, 1.0);
            psm.values(i, j) = psm.values(j, i) = v;
        }
    return psm;
}

// ---------------------------------------------------------------------------
// Volume generation and sampling
// ---------------------------------------------------------------------------

namespace {

// In-place separable Gaussian pass along one axis with replicated borders.
// `stride` walks the axis, `count` is its extent, and (outer, inner) span the
// two other axes.
void blur_axis(std::vector<double>& src, std::vector<double>& tmp, int count,
               std::size_t stride, std::size_t outer_count, std::size_t outer_stride,
               std::size_t inner_count, std::size_t inner_stride,
               const std::vector<double>& kernel) {
    const int radius = static_cast<int>(kernel.size() / 2);
    for (std::size_t o = 0; o < outer_count; ++o)
        for (std::size_t i = 0; i < inner_count; ++i) {
            const std::size_t base = o * outer_stride + i * inner_stride;
            for (int k = 0; k < count; ++k) {
                double acc = 0.0;
                for (int t = -radius; t <= radius; ++t) {
                    const int src_k = std::clamp(k + t, 0, count - 1);
                    acc += kernel[static_cast<std::size_t>(t + radius)] *
                           src[base + static_cast<std::size_t>(src_k) * stride];
                }
                tmp[base + static_cast<std::size_t>(k) * stride] = acc;
            }
        }
    src.swap(tmp);
}

} // namespace

ImageStack generate_volume(int width, int height, int depth, double smooth_sigma,
                           std::uint64_t seed) {
    if (width < 1 || height < 1 || depth < 2)
        throw data_error("generate_volume: dimensions must be at least 1x1x2");
    if (!(smooth_sigma > 0.0))
        throw data_error("generate_volume: smoothing sigma must be positive");

    const std::size_t w = width, h = height, d = depth;
    const std::size_t total = w * h * d;
    std::vector<double> volume(total);
    Rng rng(seed);
    for (std::size_t i = 0; i < total; ++i) volume[i] = rng.gaussian();

    const int radius = static_cast<int>(4.0 * smooth_sigma + 0.5);
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double kernel_sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double k = std::exp(-(static_cast<double>(t) * t) /
                                  (2.0 * smooth_sigma * smooth_sigma));
        kernel[static_cast<std::size_t>(t + radius)] = k;
        kernel_sum += k;
    }
    for (auto& k : kernel) k /= kernel_sum;

    std::vector<double> tmp(total);
    blur_axis(volume, tmp, width, 1, d, w * h, h, w, kernel);        // along x
    blur_axis(volume, tmp, height, w, d, w * h, w, 1, kernel);       // along y
    blur_axis(volume, tmp, depth, w * h, h, w, w, 1, kernel);        // along z

    const auto [lo_it, hi_it] = std::minmax_element(volume.begin(), volume.end());
    const double lo = *lo_it, span = *hi_it - *lo_it;
    std::vector<float> samples(total);
    for (std::size_t i = 0; i < total; ++i)
        samples[i] = span > 0.0 ? static_cast<float>((volume[i] - lo) / span) : 0.0f;

    ImageStack stack;
    stack.width = width;
    stack.height = height;
    stack.depth = depth;
    stack.data = std::move(samples);
    return stack;
}

ImageStack sample_sections(const ImageStack& volume, const std::vector<double>& positions) {
    validate_stack(volume);
    if (positions.size() < 2)
        throw data_error("sample_sections: need at least 2 positions");
    for (std::size_t k = 0; k < positions.size(); ++k)
        if (!(positions[k] >= 0.0) || positions[k] > volume.depth - 1)
            throw data_error("sample_sections: position " + std::to_string(k) + " = " +
                             format_g9(positions[k]) + " is outside [0, " +
                             std::to_string(volume.depth - 1) + "]");

    const std::size_t plane = volume.section_pixels();
    std::vector<float> samples(plane * positions.size());
    const auto slice_value = [&](int z, std::size_t i) -> double {
        const std::size_t at = static_cast<std::size_t>(z) * plane + i;
        return volume.is_u8() ? static_cast<double>(std::get<0>(volume.data)[at])
                              : static_cast<double>(std::get<1>(volume.data)[at]);
    };
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const int f = static_cast<int>(std::floor(positions[k]));
        const double t = positions[k] - f;
        float* out = samples.data() + k * plane;
        if (t == 0.0 || f + 1 >= volume.depth) {
            for (std::size_t i = 0; i < plane; ++i)
                out[i] = static_cast<float>(slice_value(f, i));
        } else {
            for (std::size_t i = 0; i < plane; ++i)
                out[i] = static_cast<float>(slice_value(f, i) * (1.0 - t) +
                                            slice_value(f + 1, i) * t);
        }
    }

    ImageStack stack;
    stack.width = volume.width;
    stack.height = volume.height;
    stack.depth = static_cast<int>(positions.size());
    stack.pixel_size_xy_nm = volume.pixel_size_xy_nm;
    stack.nominal_spacing_z_nm = volume.nominal_spacing_z_nm;
    stack.data = std::move(samples);
    return stack;
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

namespace {

// Validates and dedupes the removal set against n sections.
[[nodiscard]] std::set<int> removal_set(int n, const std::vector<int>& remove_indices) {
    std::set<int> removed;
    for (const int idx : remove_indices) {
        if (idx < 0 || idx >= n)
            throw data_error("remove: section index " + std::to_string(idx) +
                             " is outside [0, " + std::to_string(n - 1) + "]");
        if (idx == 0 || idx == n - 1)
            throw data_error("remove: cannot remove endpoint section " + std::to_string(idx));
        removed.insert(idx);
    }
    return removed;
}

} // namespace

GroundTruth perturb_remove(const GroundTruth& truth, const std::vector<int>& remove_indices) {
    const int n = truth.n();
    const auto removed = removal_set(n, remove_indices);
    GroundTruth out;
    out.decay = truth.decay;
    const int kept = n - static_cast<int>(removed.size());
    out.positions.resize(kept);
    out.quality.resize(kept);
    out.kept_indices.reserve(kept);
    if (!truth.permutation.empty()) out.permutation.reserve(kept);
    int row = 0;
    for (int i = 0; i < n; ++i) {
        if (removed.count(i)) continue;
        out.positions[row] = truth.positions[i];
        out.quality[row] = truth.quality[i];
        out.kept_indices.push_back(truth.kept_indices[i]);
        if (!truth.permutation.empty()) out.permutation.push_back(truth.permutation[i]);
        ++row;
    }
    return out;
}

ImageStack apply_removal(const ImageStack& stack, const std::vector<int>& remove_indices) {
    validate_stack(stack);
    const auto removed = removal_set(stack.depth, remove_indices);
    std::vector<int> survivors;
    survivors.reserve(stack.depth - removed.size());
    for (int i = 0; i < stack.depth; ++i)
        if (!removed.count(i)) survivors.push_back(i);
    return apply_permutation(stack, survivors);  // survivors is injective, which is all it needs
}

std::vector<int> bounded_permutation(int n, int max_displacement, std::uint64_t seed) {
    if (n < 1) throw data_error("bounded_permutation: need at least 1 section");
    if (max_displacement < 1)
        throw data_error("bounded_permutation: max displacement must be at least 1");
    std::vector<int> perm(n);
    for (int i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    for (int attempt = 0; attempt < 10 * n; ++attempt) {
        const int p = static_cast<int>(rng.uniform_int(0, n - 1));
        const int d = static_cast<int>(rng.uniform_int(1, max_displacement));
        const int q = p + d;
        if (q >= n) continue;
        // swap only if both displaced entries stay within the bound
        if (std::abs(perm[q] - p) <= max_displacement &&
            std::abs(perm[p] - q) <= max_displacement)
            std::swap(perm[p], perm[q]);
    }
    return perm;
}

GroundTruth perturb_reorder(const GroundTruth& truth, int max_displacement,
                            std::uint64_t seed) {
    const int n = truth.n();
    const auto perm = bounded_permutation(n, max_displacement, seed);
    GroundTruth out;
    out.decay = truth.decay;
    out.positions.resize(n);
    out.quality.resize(n);
    out.kept_indices.resize(n);
    out.permutation.resize(n);
    for (int k = 0; k < n; ++k) {
        out.positions[k] = truth.positions[perm[k]];
        out.quality[k] = truth.quality[perm[k]];
        out.kept_indices[k] = truth.kept_indices[perm[k]];
        out.permutation[k] = truth.permutation.empty() ? perm[k] : truth.permutation[perm[k]];
    }
    return out;
}

ImageStack apply_permutation(const ImageStack& stack, const std::vector<int>& permutation) {
    validate_stack(stack);
    if (permutation.size() < 2)
        throw data_error("apply_permutation: need at least 2 sections");
    std::vector<char> seen(static_cast<std::size_t>(stack.depth), 0);
    for (const int src : permutation) {
        if (src < 0 || src >= stack.depth)
            throw data_error("apply_permutation: section index " + std::to_string(src) +
                             " is outside [0, " + std::to_string(stack.depth - 1) + "]");
        if (seen[static_cast<std::size_t>(src)]++)
            throw data_error("apply_permutation: section index " + std::to_string(src) +
                             " appears twice");
    }

    ImageStack out;
    out.width = stack.width;
    out.height = stack.height;
    out.depth = static_cast<int>(permutation.size());
    out.pixel_size_xy_nm = stack.pixel_size_xy_nm;
    out.nominal_spacing_z_nm = stack.nominal_spacing_z_nm;
    const std::size_t plane = stack.section_pixels();
    const auto copy_sections = [&](const auto& samples) {
        using Sample = typename std::decay_t<decltype(samples)>::value_type;
        std::vector<Sample> data(plane * permutation.size());
        for (std::size_t k = 0; k < permutation.size(); ++k)
            std::copy_n(samples.begin() + static_cast<std::size_t>(permutation[k]) * plane,
                        plane, data.begin() + k * plane);
        out.data = std::move(data);
    };
    if (stack.is_u8())
        copy_sections(std::get<0>(stack.data));
    else
        copy_sections(std::get<1>(stack.data));
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

Eigen::VectorXd affine_align_to(const Eigen::VectorXd& estimated,
                                const Eigen::VectorXd& reference) {
    if (estimated.size() != reference.size())
        throw data_error("affine_align_to: length mismatch");
    if (estimated.size() < 2)
        throw data_error("affine_align_to: need at least 2 entries");
    Eigen::MatrixXd design(estimated.size(), 2);
    design.col(0) = estimated;
    design.col(1).setOnes();
    const Eigen::Vector2d sol = design.colPivHouseholderQr().solve(reference);
    return design * sol;
}

Deviation eval_deviation(const Eigen::VectorXd& estimated, const Eigen::VectorXd& reference,
                         const std::vector<int>& kept, bool affine) {
    if (estimated.size() != reference.size())
        throw data_error("eval_deviation: estimated has " + std::to_string(estimated.size()) +
                         " entries but reference has " + std::to_string(reference.size()));
    Eigen::VectorXd est, ref;
    if (kept.empty()) {
        est = estimated;
        ref = reference;
    } else {
        est.resize(static_cast<Eigen::Index>(kept.size()));
        ref.resize(static_cast<Eigen::Index>(kept.size()));
        for (std::size_t k = 0; k < kept.size(); ++k) {
            if (kept[k] < 0 || kept[k] >= estimated.size())
                throw data_error("eval_deviation: kept index " + std::to_string(kept[k]) +
                                 " is outside [0, " + std::to_string(estimated.size() - 1) + "]");
            est[static_cast<Eigen::Index>(k)] = estimated[kept[k]];
            ref[static_cast<Eigen::Index>(k)] = reference[kept[k]];
        }
    }
    if (est.size() < 2) throw data_error("eval_deviation: fewer than 2 kept entries");
    if (affine) est = affine_align_to(est, ref);
    const Eigen::ArrayXd diff = (est - ref).array().abs();
    return {diff.mean(), diff.maxCoeff()};
}

double kendall_tau(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) throw data_error("kendall_tau: length mismatch");
    const Eigen::Index n = a.size();
    if (n < 2) throw data_error("kendall_tau: need at least 2 entries");
    std::int64_t concordant = 0, discordant = 0;
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double x = (a[i] - a[j]) * (b[i] - b[j]);
            if (x > 0.0)
                ++concordant;
            else if (x < 0.0)
                ++discordant;
        }
    return static_cast<double>(concordant - discordant) /
           (static_cast<double>(n) * (n - 1) / 2.0);
}

// ---------------------------------------------------------------------------
// Ground-truth files
// ---------------------------------------------------------------------------

void save_truth_csv(const Eigen::VectorXd& positions, const Eigen::VectorXd& quality,
                    const std::vector<char>& kept, const std::string& path) {
    const auto n = positions.size();
    if (quality.size() != n)
        throw data_error("save_truth_csv: positions/quality length mismatch");
    if (!kept.empty() && static_cast<Eigen::Index>(kept.size()) != n)
        throw data_error("save_truth_csv: kept flags length mismatch");
    std::ofstream out(path);
    if (!out) throw data_error("save_truth_csv: cannot write " + path);
    out << "index,true_z,true_quality,kept\n";
    for (Eigen::Index i = 0; i < n; ++i)
        out << i << ',' << format_g9(positions[i]) << ',' << format_g9(quality[i]) << ','
            << (kept.empty() || kept[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
    if (!out) throw data_error("save_truth_csv: write failed on " + path);
}

TruthFile load_truth_csv(const std::string& path) {
    const auto lines = csv::read_lines(path, "load_truth_csv");
    if (lines.empty() || csv::trim(lines[0]) != "index,true_z,true_quality,kept")
        throw data_error("load_truth_csv: " + path +
                         " does not start with the header 'index,true_z,true_quality,kept'");
    const int n = static_cast<int>(lines.size()) - 1;
    if (n < 1) throw data_error("load_truth_csv: " + path + " has no data rows");
    TruthFile result;
    result.positions.resize(n);
    result.quality.resize(n);
    result.kept.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const std::string where = "load_truth_csv: " + path + " row " + std::to_string(i);
        const auto fields = csv::split(lines[i + 1]);
        if (fields.size() != 4)
            throw data_error(where + " has " + std::to_string(fields.size()) +
                             " fields, expected 4");
        if (csv::parse_index(fields[0], where) != i)
            throw data_error(where + " is labeled index " + csv::trim(fields[0]));
        result.positions[i] = csv::parse_double(fields[1], where);
        result.quality[i] = csv::parse_double(fields[2], where);
        const long flag = csv::parse_index(fields[3], where);
        if (flag != 0 && flag != 1)
            throw data_error(where + " kept flag must be 0 or 1, got " + std::to_string(flag));
        result.kept[static_cast<std::size_t>(i)] = static_cast<char>(flag);
    }
    return result;
}

void save_permutation_csv(const std::vector<int>& permutation, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("save_permutation_csv: cannot write " + path);
    out << "new_index,original_index\n";
    for (std::size_t k = 0; k < permutation.size(); ++k)
        out << k << ',' << permutation[k] << "\n";
    if (!out) throw data_error("save_permutation_csv: write failed on " + path);
}

std::vector<int> load_permutation_csv(const std::string& path) {
    const auto lines = csv::read_lines(path, "load_permutation_csv");
    if (lines.empty() || csv::trim(lines[0]) != "new_index,original_index")
        throw data_error("load_permutation_csv: " + path +
                         " does not start with the header 'new_index,original_index'");
    std::vector<int> perm;
    perm.reserve(lines.size() - 1);
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = "load_permutation_csv: " + path + " row " +
                                  std::to_string(i - 1);
        const auto fields = csv::split(lines[i]);
        if (fields.size() != 2)
            throw data_error(where + " has " + std::to_string(fields.size()) +
                             " fields, expected 2");
        if (csv::parse_index(fields[0], where) != static_cast<long>(i - 1))
            throw data_error(where + " is labeled index " + csv::trim(fields[0]));
        perm.push_back(static_cast<int>(csv::parse_index(fields[1], where)));
    }
    return perm;
}

} // namespace zspacing
