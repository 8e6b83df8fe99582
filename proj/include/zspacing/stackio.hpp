#pragma once
#include <Eigen/Dense>
#include <string>

#include "zspacing/similarity.hpp"
#include "zspacing/stack.hpp"

namespace zspacing {

// ---------------------------------------------------------------------------
// Image stacks: JSON sidecar header + little-endian raw samples
// ---------------------------------------------------------------------------

// Header fields as stored on disk.  `data` is the raw file's basename,
// resolved relative to the header's directory.
struct StackHeader {
    int width = 0;
    int height = 0;
    int depth = 0;
    std::string dtype;  // "u8" | "f32"
    double pixel_size_xy_nm = 1.0;
    double nominal_spacing_z_nm = 1.0;
    std::string data;
};

// Loads header + raw pair.  Errors name the file: missing/malformed header,
// unknown dtype, raw size not matching the declared dimensions, non-finite
// f32 sample.
[[nodiscard]] ImageStack load_stack(const std::string& header_path);

// Writes the header and its ".raw" sibling (same stem) such that load_stack
// reproduces every sample bit-exactly.
void save_stack(const ImageStack& stack, const std::string& header_path);

// ---------------------------------------------------------------------------
// Similarity matrices: plain CSV, no header row
// ---------------------------------------------------------------------------

// N x N comma-separated fields; empty field or "nan" marks a pair outside
// the comparison range.  Validates shape, value range, unit diagonal and
// symmetry (both within 1e-6, then pinned/averaged exactly); every error
// names the offending row/cell.
[[nodiscard]] Psm load_psm_csv(const std::string& path);

// "%.9g" per value, empty field for never-computed pairs; load_psm_csv
// reproduces the matrix within 1e-9 per cell.
void save_psm_csv(const Psm& psm, const std::string& path);

// ---------------------------------------------------------------------------
// Position tables: CSV with header "index,z,quality"
// ---------------------------------------------------------------------------

struct PositionsFile {
    Eigen::VectorXd z;
    Eigen::VectorXd quality;
};

void save_positions_csv(const Eigen::VectorXd& z, const Eigen::VectorXd& quality,
                        const std::string& path);
[[nodiscard]] PositionsFile load_positions_csv(const std::string& path);

// Shortest round-trippable-at-1e-9 decimal form used by every CSV writer.
[[nodiscard]] std::string format_g9(double v);

} // namespace zspacing
