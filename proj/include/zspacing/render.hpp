#pragma once
#include <Eigen/Dense>
#include <string>

#include "zspacing/inference.hpp"
#include "zspacing/similarity.hpp"
#include "zspacing/stack.hpp"

namespace zspacing {

// How an output slice samples the input sections.
enum class ResampleMethod { Floor, Linear };

// Resamples the stack onto out_depth equally spaced output slices spanning
// the coordinate range: slice k samples z* = min(c) + k*(max(c)-min(c))/
// (out_depth-1).  Floor copies the section with the greatest c <= z*
// (bit-exact, so gaps repeat the pre-gap section as thick slabs); Linear
// blends the two bracketing sections by distance.  Sections are ordered by
// c internally; under Linear, two sections closer than 1e-9 in c are an
// error.  The output keeps the input sample type and scales the nominal
// z-spacing by the output slice pitch.
[[nodiscard]] ImageStack resample_volume(const ImageStack& stack, const Eigen::VectorXd& c,
                                         ResampleMethod method, int out_depth, int threads = 1);

// Cross-section at row y: an image of width x depth with
// pixel (x, z) = stack(z, y, x).  f32 samples are assumed normalized to
// [0, 1] and quantize to 8 bits; u8 samples copy through.
[[nodiscard]] ImageU8 extract_xz_slice(const ImageStack& stack, int y);

// Renders the matrix in the transformed z-frame: axis position u maps to
// coordinate min(c) + u*(max(c)-min(c))/(out_size-1) and looks up the
// section with the greatest c at or below it.  Similarity in [0, 1] maps
// linearly to [0, 255]; negative values and never-computed cells render as
// 0.
[[nodiscard]] ImageU8 render_psm_image(const Psm& psm, const Eigen::VectorXd& c, int out_size);

// Decay curves as CSV rows "ref_index,distance,rho" (with that header);
// Global mode writes its single curve under ref_index -1.
void export_curves_csv(const CurveSet& curves, const std::string& path);
[[nodiscard]] CurveSet load_curves_csv(const std::string& path);

// Binary (P5) 8-bit PGM with maxval 255.
void write_pgm(const ImageU8& image, const std::string& path);
[[nodiscard]] ImageU8 read_pgm(const std::string& path);

} // namespace zspacing
