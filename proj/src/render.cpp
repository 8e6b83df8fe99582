#include "zspacing/render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>

#include "csv.hpp"
#include "zspacing/parallel.hpp"
#include "zspacing/stackio.hpp"

namespace zspacing {

namespace {

// Section indices ordered by coordinate (ties by original index, so the
// ordering is total and deterministic).
[[nodiscard]] std::vector<int> order_by_coordinate(const Eigen::VectorXd& c) {
    std::vector<int> order(static_cast<std::size_t>(c.size()));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return c[a] != c[b] ? c[a] < c[b] : a < b;
    });
    return order;
}

// Greatest sorted slot whose coordinate is <= zq (clamped to the first slot).
[[nodiscard]] std::size_t floor_slot(const std::vector<double>& sorted_c, double zq) {
    const auto it = std::upper_bound(sorted_c.begin(), sorted_c.end(), zq);
    return it == sorted_c.begin() ? 0 : static_cast<std::size_t>(it - sorted_c.begin()) - 1;
}

[[nodiscard]] std::uint8_t quantize_unit(double v) {
    return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

} // namespace

// ---------------------------------------------------------------------------
// Volume resampling
// ---------------------------------------------------------------------------

ImageStack resample_volume(const ImageStack& stack, const Eigen::VectorXd& c,
                           ResampleMethod method, int out_depth, int threads) {
    validate_stack(stack);
    if (c.size() != stack.depth)
        throw data_error("resample_volume: stack has " + std::to_string(stack.depth) +
                         " sections but coordinates have " + std::to_string(c.size()) +
                         " entries");
    for (Eigen::Index i = 0; i < c.size(); ++i)
        if (!std::isfinite(c[i]))
            throw data_error("resample_volume: coordinate " + std::to_string(i) +
                             " is not finite");
    if (out_depth < 2)
        throw data_error("resample_volume: output depth must be at least 2, got " +
                         std::to_string(out_depth));

    const auto order = order_by_coordinate(c);
    std::vector<double> sorted_c(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted_c[i] = c[order[i]];
    if (method == ResampleMethod::Linear)
        for (std::size_t i = 1; i < sorted_c.size(); ++i)
            if (sorted_c[i] - sorted_c[i - 1] < 1e-9)
                throw data_error("resample_volume: sections " + std::to_string(order[i - 1]) +
                                 " and " + std::to_string(order[i]) +
                                 " coincide at z = " + format_g9(sorted_c[i]) +
                                 "; linear interpolation needs distinct coordinates");
    const double cmin = sorted_c.front(), cmax = sorted_c.back();
    const double pitch = (cmax - cmin) / (out_depth - 1);

    ImageStack out;
    out.width = stack.width;
    out.height = stack.height;
    out.depth = out_depth;
    out.pixel_size_xy_nm = stack.pixel_size_xy_nm;
    out.nominal_spacing_z_nm = stack.nominal_spacing_z_nm * pitch;

    const std::size_t plane = stack.section_pixels();
    const auto resample = [&](const auto& samples) {
        using Sample = typename std::decay_t<decltype(samples)>::value_type;
        std::vector<Sample> data(plane * static_cast<std::size_t>(out_depth));
        parallel_for(out_depth, threads, [&](std::int64_t k) {
            const double zq = cmin + (static_cast<double>(k) * (cmax - cmin)) / (out_depth - 1);
            const std::size_t slot = floor_slot(sorted_c, zq);
            Sample* dst = data.data() + static_cast<std::size_t>(k) * plane;
            const Sample* lo =
                samples.data() + static_cast<std::size_t>(order[slot]) * plane;
            if (method == ResampleMethod::Floor || slot + 1 >= sorted_c.size()) {
                std::copy_n(lo, plane, dst);
                return;
            }
            const double t =
                std::clamp((zq - sorted_c[slot]) / (sorted_c[slot + 1] - sorted_c[slot]),
                           0.0, 1.0);
            if (t == 0.0) {
                std::copy_n(lo, plane, dst);
                return;
            }
            const Sample* hi =
                samples.data() + static_cast<std::size_t>(order[slot + 1]) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
                const double v = static_cast<double>(lo[i]) * (1.0 - t) +
                                 static_cast<double>(hi[i]) * t;
                if constexpr (std::is_same_v<Sample, std::uint8_t>)
                    dst[i] = static_cast<std::uint8_t>(std::lround(v));
                else
                    dst[i] = static_cast<float>(v);
            }
        });
        out.data = std::move(data);
    };
    if (stack.is_u8())
        resample(std::get<0>(stack.data));
    else
        resample(std::get<1>(stack.data));
    return out;
}

// ---------------------------------------------------------------------------
// Figure surfaces
// ---------------------------------------------------------------------------

ImageU8 extract_xz_slice(const ImageStack& stack, int y) {
    validate_stack(stack);
    if (y < 0 || y >= stack.height)
        throw data_error("extract_xz_slice: row " + std::to_string(y) + " is outside [0, " +
                         std::to_string(stack.height - 1) + "]");
    ImageU8 image(stack.width, stack.depth);
    for (int z = 0; z < stack.depth; ++z) {
        if (stack.is_u8()) {
            const auto& samples = std::get<0>(stack.data);
            const std::size_t row = (static_cast<std::size_t>(z) * stack.height + y) *
                                    static_cast<std::size_t>(stack.width);
            for (int x = 0; x < stack.width; ++x) image.at(x, z) = samples[row + x];
        } else {
            const auto& samples = std::get<1>(stack.data);
            const std::size_t row = (static_cast<std::size_t>(z) * stack.height + y) *
                                    static_cast<std::size_t>(stack.width);
            for (int x = 0; x < stack.width; ++x)
                image.at(x, z) = quantize_unit(samples[row + x]);
        }
    }
    return image;
}

ImageU8 render_psm_image(const Psm& psm, const Eigen::VectorXd& c, int out_size) {
    validate_psm(psm);
    const int n = psm.n();
    if (c.size() != n)
        throw data_error("render_psm_image: matrix is " + std::to_string(n) + "x" +
                         std::to_string(n) + " but coordinates have " +
                         std::to_string(c.size()) + " entries");
    for (Eigen::Index i = 0; i < c.size(); ++i)
        if (!std::isfinite(c[i]))
            throw data_error("render_psm_image: coordinate " + std::to_string(i) +
                             " is not finite");
    if (out_size < 2)
        throw data_error("render_psm_image: output size must be at least 2, got " +
                         std::to_string(out_size));

    const auto order = order_by_coordinate(c);
    std::vector<double> sorted_c(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) sorted_c[i] = c[order[i]];
    const double cmin = sorted_c.front(), cmax = sorted_c.back();

    std::vector<int> section(static_cast<std::size_t>(out_size));
    for (int u = 0; u < out_size; ++u) {
        const double zq = cmin + (static_cast<double>(u) * (cmax - cmin)) / (out_size - 1);
        section[static_cast<std::size_t>(u)] = order[floor_slot(sorted_c, zq)];
    }

    ImageU8 image(out_size, out_size);
    for (int v = 0; v < out_size; ++v)
        for (int u = 0; u < out_size; ++u) {
            const int i = section[static_cast<std::size_t>(v)];
            const int j = section[static_cast<std::size_t>(u)];
            std::uint8_t px = 0;
            if (psm.computed(i, j) && psm.values(i, j) > 0.0)
                px = static_cast<std::uint8_t>(
                    std::lround(std::min(psm.values(i, j), 1.0) * 255.0));
            image.at(u, v) = px;
        }
    return image;
}

// ---------------------------------------------------------------------------
// Curve CSV
// ---------------------------------------------------------------------------

void export_curves_csv(const CurveSet& curves, const std::string& path) {
    if (curves.curves.empty()) throw data_error("export_curves_csv: empty curve set");
    std::ofstream out(path);
    if (!out) throw data_error("export_curves_csv: cannot write " + path);
    out << "ref_index,distance,rho\n";
    for (std::size_t ref = 0; ref < curves.curves.size(); ++ref) {
        const int ref_index = curves.mode == CurveMode::Global ? -1 : static_cast<int>(ref);
        const auto& samples = curves.curves[ref].samples;
        for (Eigen::Index d = 0; d < samples.size(); ++d)
            out << ref_index << ',' << d << ',' << format_g9(samples[d]) << "\n";
    }
    if (!out) throw data_error("export_curves_csv: write failed on " + path);
}

CurveSet load_curves_csv(const std::string& path) {
    const auto lines = csv::read_lines(path, "load_curves_csv");
    if (lines.empty() || csv::trim(lines[0]) != "ref_index,distance,rho")
        throw data_error("load_curves_csv: " + path +
                         " does not start with the header 'ref_index,distance,rho'");
    std::map<long, std::vector<double>> by_ref;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const std::string where = "load_curves_csv: " + path + " row " + std::to_string(i - 1);
        const auto fields = csv::split(lines[i]);
        if (fields.size() != 3)
            throw data_error(where + " has " + std::to_string(fields.size()) +
                             " fields, expected 3");
        const long ref = std::lround(csv::parse_double(fields[0], where));
        const long dist = csv::parse_index(fields[1], where);
        auto& samples = by_ref[ref];
        if (dist != static_cast<long>(samples.size()))
            throw data_error(where + ": distance " + std::to_string(dist) +
                             " breaks the 0,1,2,... sequence for reference " +
                             std::to_string(ref));
        samples.push_back(csv::parse_double(fields[2], where));
    }
    if (by_ref.empty()) throw data_error("load_curves_csv: " + path + " has no curves");

    CurveSet set;
    if (by_ref.size() == 1 && by_ref.begin()->first == -1) {
        set.mode = CurveMode::Global;
    } else {
        set.mode = CurveMode::Local;
        long expected = 0;
        for (const auto& [ref, samples] : by_ref)
            if (ref != expected++)
                throw data_error("load_curves_csv: " + path +
                                 " mixes reference indices; expected -1 alone or 0..N-1");
    }
    const std::size_t len = by_ref.begin()->second.size();
    for (auto& [ref, samples] : by_ref) {
        if (samples.size() != len)
            throw data_error("load_curves_csv: " + path + " curve " + std::to_string(ref) +
                             " has " + std::to_string(samples.size()) +
                             " samples, others have " + std::to_string(len));
        DecayCurve curve;
        curve.samples = Eigen::Map<const Eigen::ArrayXd>(samples.data(),
                                                         static_cast<Eigen::Index>(len));
        set.curves.push_back(std::move(curve));
    }
    return set;
}

// ---------------------------------------------------------------------------
// PGM
// ---------------------------------------------------------------------------

void write_pgm(const ImageU8& image, const std::string& path) {
    if (image.width < 1 || image.height < 1)
        throw data_error("write_pgm: empty image");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw data_error("write_pgm: cannot write " + path);
    out << "P5\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.pixels.data()),
              static_cast<std::streamsize>(image.pixels.size()));
    if (!out) throw data_error("write_pgm: write failed on " + path);
}

ImageU8 read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw data_error("read_pgm: cannot open " + path);
    // header tokens with '#' comments allowed between them
    const auto next_token = [&]() -> std::string {
        std::string token;
        char ch;
        while (in.get(ch)) {
            if (ch == '#') {
                while (in.get(ch) && ch != '\n') {}
                continue;
            }
            if (std::isspace(static_cast<unsigned char>(ch))) {
                if (!token.empty()) return token;
                continue;
            }
            token += ch;
        }
        if (token.empty()) throw data_error("read_pgm: truncated header in " + path);
        return token;
    };
    if (next_token() != "P5")
        throw data_error("read_pgm: " + path + " is not a binary (P5) PGM");
    ImageU8 image;
    try {
        image.width = std::stoi(next_token());
        image.height = std::stoi(next_token());
        if (std::stoi(next_token()) != 255)
            throw data_error("read_pgm: " + path + " must use maxval 255");
    } catch (const data_error&) {
        throw;
    } catch (const std::exception&) {
        throw data_error("read_pgm: malformed header in " + path);
    }
    if (image.width < 1 || image.height < 1)
        throw data_error("read_pgm: " + path + " declares an empty image");
    image.pixels.resize(static_cast<std::size_t>(image.width) * image.height);
    in.read(reinterpret_cast<char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
    if (!in) throw data_error("read_pgm: short pixel data in " + path);
    return image;
}

} // namespace zspacing
