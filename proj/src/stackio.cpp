#include "zspacing/stackio.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "csv.hpp"

namespace zspacing {

namespace fs = std::filesystem;

std::string format_g9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// Image stacks
// ---------------------------------------------------------------------------

ImageStack load_stack(const std::string& header_path) {
    std::ifstream in(header_path);
    if (!in) throw data_error("load_stack: cannot open " + header_path);
    nlohmann::json header;
    try {
        in >> header;
    } catch (const std::exception& e) {
        throw data_error("load_stack: malformed header " + header_path + ": " + e.what());
    }
    for (const char* key : {"width", "height", "depth", "dtype", "data"})
        if (!header.contains(key))
            throw data_error("load_stack: header " + header_path + " is missing key '" + key +
                             "'");
    if (header.contains("order") && header["order"] != "zyx")
        throw data_error("load_stack: header " + header_path + " declares unsupported order '" +
                         header["order"].get<std::string>() + "' (expected \"zyx\")");
    const std::string dtype = header["dtype"];
    if (dtype != "u8" && dtype != "f32")
        throw data_error("load_stack: header " + header_path + " declares unknown dtype '" +
                         dtype + "'");

    ImageStack stack;
    try {
        stack.width = header["width"].get<int>();
        stack.height = header["height"].get<int>();
        stack.depth = header["depth"].get<int>();
        stack.pixel_size_xy_nm = header.value("pixel_size_xy_nm", 1.0);
        stack.nominal_spacing_z_nm = header.value("nominal_spacing_z_nm", 1.0);
    } catch (const std::exception& e) {
        throw data_error("load_stack: header " + header_path + " has a malformed field: " +
                         e.what());
    }
    if (stack.width < 1 || stack.height < 1 || stack.depth < 2)
        throw data_error("load_stack: header " + header_path + " declares invalid dimensions " +
                         std::to_string(stack.width) + "x" + std::to_string(stack.height) + "x" +
                         std::to_string(stack.depth));

    const fs::path raw_path = fs::path(header_path).parent_path() /
                              header["data"].get<std::string>();
    std::ifstream raw(raw_path, std::ios::binary);
    if (!raw) throw data_error("load_stack: cannot open raw file " + raw_path.string());
    const std::size_t total = stack.total_pixels();
    const std::size_t expected = total * (dtype == "u8" ? 1 : 4);
    std::error_code ec;
    const auto actual = fs::file_size(raw_path, ec);
    if (ec) throw data_error("load_stack: cannot stat raw file " + raw_path.string());
    if (actual != expected)
        throw data_error("load_stack: raw file " + raw_path.string() + " holds " +
                         std::to_string(actual) + " bytes but the header declares " +
                         std::to_string(expected));

    if (dtype == "u8") {
        std::vector<std::uint8_t> samples(total);
        raw.read(reinterpret_cast<char*>(samples.data()), static_cast<std::streamsize>(total));
        if (!raw) throw data_error("load_stack: short read from " + raw_path.string());
        stack.data = std::move(samples);
    } else {
        std::vector<float> samples(total);
        std::vector<unsigned char> buf(static_cast<std::size_t>(stack.width) * stack.height * 4);
        for (int z = 0; z < stack.depth; ++z) {
            raw.read(reinterpret_cast<char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size()));
            if (!raw) throw data_error("load_stack: short read from " + raw_path.string());
            float* out = samples.data() + static_cast<std::size_t>(z) * stack.section_pixels();
            for (std::size_t i = 0; i < stack.section_pixels(); ++i) {
                const std::uint32_t bits = static_cast<std::uint32_t>(buf[4 * i]) |
                                           static_cast<std::uint32_t>(buf[4 * i + 1]) << 8 |
                                           static_cast<std::uint32_t>(buf[4 * i + 2]) << 16 |
                                           static_cast<std::uint32_t>(buf[4 * i + 3]) << 24;
                out[i] = std::bit_cast<float>(bits);
            }
        }
        stack.data = std::move(samples);
    }
    validate_stack(stack);
    return stack;
}

void save_stack(const ImageStack& stack, const std::string& header_path) {
    validate_stack(stack);
    const fs::path header_fs(header_path);
    const std::string raw_name = header_fs.stem().string() + ".raw";
    const fs::path raw_path = header_fs.parent_path() / raw_name;

    nlohmann::ordered_json header;
    header["width"] = stack.width;
    header["height"] = stack.height;
    header["depth"] = stack.depth;
    header["dtype"] = stack.is_u8() ? "u8" : "f32";
    header["order"] = "zyx";
    header["pixel_size_xy_nm"] = stack.pixel_size_xy_nm;
    header["nominal_spacing_z_nm"] = stack.nominal_spacing_z_nm;
    header["data"] = raw_name;

    std::ofstream out(header_path);
    if (!out) throw data_error("save_stack: cannot write " + header_path);
    out << header.dump(2) << "\n";
    if (!out) throw data_error("save_stack: write failed on " + header_path);

    std::ofstream raw(raw_path, std::ios::binary);
    if (!raw) throw data_error("save_stack: cannot write " + raw_path.string());
    if (stack.is_u8()) {
        const auto& samples = std::get<std::vector<std::uint8_t>>(stack.data);
        raw.write(reinterpret_cast<const char*>(samples.data()),
                  static_cast<std::streamsize>(samples.size()));
    } else {
        const auto& samples = std::get<std::vector<float>>(stack.data);
        std::vector<unsigned char> buf(stack.section_pixels() * 4);
        for (int z = 0; z < stack.depth; ++z) {
            const float* in = samples.data() + static_cast<std::size_t>(z) * stack.section_pixels();
            for (std::size_t i = 0; i < stack.section_pixels(); ++i) {
                const auto bits = std::bit_cast<std::uint32_t>(in[i]);
                buf[4 * i] = static_cast<unsigned char>(bits & 0xFF);
                buf[4 * i + 1] = static_cast<unsigned char>((bits >> 8) & 0xFF);
                buf[4 * i + 2] = static_cast<unsigned char>((bits >> 16) & 0xFF);
                buf[4 * i + 3] = static_cast<unsigned char>((bits >> 24) & 0xFF);
            }
            raw.write(reinterpret_cast<const char*>(buf.data()),
                      static_cast<std::streamsize>(buf.size()));
        }
    }
    if (!raw) throw data_error("save_stack: write failed on " + raw_path.string());
}

// ---------------------------------------------------------------------------
// Similarity matrices
// ---------------------------------------------------------------------------

namespace {

[[nodiscard]] bool is_nan_field(const std::string& trimmed) {
    return trimmed.empty() || trimmed == "nan" || trimmed == "NaN" || trimmed == "NAN";
}

[[nodiscard]] std::string cell_name(int i, int j) {
    return "cell (" + std::to_string(i) + "," + std::to_string(j) + ")";
}

} // namespace

Psm load_psm_csv(const std::string& path) {
    const auto lines = csv::read_lines(path, "load_psm_csv");
    const int n = static_cast<int>(lines.size());
    if (n < 1) throw data_error("load_psm_csv: " + path + " is empty");

    Psm psm;
    psm.values = Eigen::MatrixXd::Constant(n, n, Psm::not_computed);
    for (int i = 0; i < n; ++i) {
        const auto fields = csv::split(lines[i]);
        if (static_cast<int>(fields.size()) != n)
            throw data_error("load_psm_csv: " + path + " row " + std::to_string(i) + " has " +
                             std::to_string(fields.size()) + " fields, expected " +
                             std::to_string(n));
        for (int j = 0; j < n; ++j) {
            const std::string t = csv::trim(fields[j]);
            if (is_nan_field(t)) continue;
            psm.values(i, j) = csv::parse_double(t, "load_psm_csv: " + path + " " +
                                                        cell_name(i, j));
        }
    }

    for (int i = 0; i < n; ++i) {
        if (!psm.computed(i, i))
            throw data_error("load_psm_csv: " + path + " " + cell_name(i, i) +
                             " on the diagonal is missing");
        if (std::abs(psm.values(i, i) - 1.0) > 1e-6)
            throw data_error("load_psm_csv: " + path + " " + cell_name(i, i) + " is " +
                             format_g9(psm.values(i, i)) + ", diagonal values must be 1");
        psm.values(i, i) = 1.0;
    }
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const bool a = psm.computed(i, j), b = psm.computed(j, i);
            if (a != b)
                throw data_error("load_psm_csv: " + path + " " + cell_name(i, j) +
                                 " is computed but its mirror is not");
            if (!a) continue;
            if (std::abs(psm.values(i, j) - psm.values(j, i)) > 1e-6)
                throw data_error("load_psm_csv: " + path + " " + cell_name(i, j) + " = " +
                                 format_g9(psm.values(i, j)) + " conflicts with its mirror " +
                                 format_g9(psm.values(j, i)));
            const double avg = 0.5 * (psm.values(i, j) + psm.values(j, i));
            if (avg < -1.0 || avg > 1.0)
                throw data_error("load_psm_csv: " + path + " " + cell_name(i, j) + " = " +
                                 format_g9(avg) + " is outside [-1, 1]");
            psm.values(i, j) = psm.values(j, i) = avg;
            psm.range = std::max(psm.range, j - i);
        }
    return psm;
}

void save_psm_csv(const Psm& psm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw data_error("save_psm_csv: cannot write " + path);
    const int n = psm.n();
    std::string line;
    for (int i = 0; i < n; ++i) {
        line.clear();
        for (int j = 0; j < n; ++j) {
            if (j) line += ',';
            if (psm.computed(i, j)) line += format_g9(psm.values(i, j));
        }
        out << line << "\n";
    }
    if (!out) throw data_error("save_psm_csv: write failed on " + path);
}

// ---------------------------------------------------------------------------
// Position tables
// ---------------------------------------------------------------------------

void save_positions_csv(const Eigen::VectorXd& z, const Eigen::VectorXd& quality,
                        const std::string& path) {
    if (z.size() != quality.size())
        throw data_error("save_positions_csv: z and quality lengths differ");
    std::ofstream out(path);
    if (!out) throw data_error("save_positions_csv: cannot write " + path);
    out << "index,z,quality\n";
    for (Eigen::Index i = 0; i < z.size(); ++i)
        out << i << ',' << format_g9(z[i]) << ',' << format_g9(quality[i]) << "\n";
    if (!out) throw data_error("save_positions_csv: write failed on " + path);
}

PositionsFile load_positions_csv(const std::string& path) {
    const auto lines = csv::read_lines(path, "load_positions_csv");
    if (lines.empty() || csv::trim(lines[0]) != "index,z,quality")
        throw data_error("load_positions_csv: " + path +
                         " does not start with the header 'index,z,quality'");
    const int n = static_cast<int>(lines.size()) - 1;
    if (n < 1) throw data_error("load_positions_csv: " + path + " has no data rows");
    PositionsFile result;
    result.z.resize(n);
    result.quality.resize(n);
    for (int i = 0; i < n; ++i) {
        const std::string where = "load_positions_csv: " + path + " row " + std::to_string(i);
        const auto fields = csv::split(lines[i + 1]);
        if (fields.size() != 3)
            throw data_error(where + " has " + std::to_string(fields.size()) +
                             " fields, expected 3");
        if (csv::parse_index(fields[0], where) != i)
            throw data_error(where + " is labeled index " + csv::trim(fields[0]));
        result.z[i] = csv::parse_double(fields[1], where);
        result.quality[i] = csv::parse_double(fields[2], where);
    }
    return result;
}

} // namespace zspacing
