// Command-line front end for the z-spacing pipeline: psm, estimate, render,
// simulate, eval.  Exit codes: 0 success, 1 usage error, 2 data/validation
// error, 3 numeric failure.
#include <CLI11.hpp>

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "zspacing/inference.hpp"
#include "zspacing/parallel.hpp"
#include "zspacing/render.hpp"
#include "zspacing/rng.hpp"
#include "zspacing/similarity.hpp"
#include "zspacing/stackio.hpp"
#include "zspacing/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace zspacing;

namespace {

using Clock = std::chrono::steady_clock;

[[nodiscard]] double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

void emit_warnings(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

[[nodiscard]] std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
    std::vector<int> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t end = text.find(',', start);
        const std::string tok = text.substr(start, end == std::string::npos ? end : end - start);
        try {
            std::size_t used = 0;
            const int v = std::stoi(tok, &used);
            if (used != tok.size()) throw std::invalid_argument(tok);
            values.push_back(v);
        } catch (const std::exception&) {
            throw data_error(flag + ": cannot parse '" + tok + "' as an integer");
        }
        if (end == std::string::npos) break;
        start = end + 1;
    }
    return values;
}

void write_json_file(const json& j, const std::string& path, const std::string& op) {
    std::ofstream out(path);
    if (!out) throw data_error(op + ": cannot write " + path);
    out << j.dump(2) << "\n";
    if (!out) throw data_error(op + ": write failed on " + path);
}

// ---------------------------------------------------------------------------
// psm
// ---------------------------------------------------------------------------

struct PsmArgs {
    std::string stack_path, out_path, blocks;
    int range = 0;  // 0 = default min(20, depth-1)
    int threads = 0;
    bool allow_zero_variance = false;
    bool json_summary = false, verbose = false;
};

int run_psm(const PsmArgs& args) {
    const auto t_load = Clock::now();
    const ImageStack stack = load_stack(args.stack_path);
    if (args.verbose)
        std::cerr << "[psm] loaded " << stack.width << "x" << stack.height << "x" << stack.depth
                  << (stack.is_u8() ? " u8" : " f32") << " stack in " << seconds_since(t_load)
                  << " s\n";
    const int range = args.range > 0 ? args.range : std::min(20, stack.depth - 1);

    std::vector<std::string> warnings;
    json summary{{"n", stack.depth}, {"range", range}, {"out", args.out_path}};
    const auto t_psm = Clock::now();
    if (args.blocks.empty()) {
        const Psm psm = compute_psm(stack, range, args.threads, args.allow_zero_variance,
                                    &warnings);
        const double psm_seconds = seconds_since(t_psm);
        save_psm_csv(psm, args.out_path);
        summary["psm_seconds"] = psm_seconds;
        if (args.verbose)
            std::cerr << "[psm] computed " << stack.depth << "x" << stack.depth << " band r="
                      << range << " in " << psm_seconds << " s\n";
    } else {
        const auto dims = parse_int_list(args.blocks, "--blocks");
        if (dims.size() != 2 || dims[0] < 1 || dims[1] < 1)
            throw data_error("--blocks: expected BX,BY with two positive counts, got '" +
                             args.blocks + "'");
        const BlockGrid grid = compute_blockwise_psm(stack, dims[0], dims[1], range,
                                                     args.threads, args.allow_zero_variance,
                                                     &warnings);
        const double psm_seconds = seconds_since(t_psm);
        // --out names a directory: one CSV per block plus a manifest
        fs::create_directories(args.out_path);
        json manifest{{"blocks_x", grid.blocks_x},
                      {"blocks_y", grid.blocks_y},
                      {"n", stack.depth},
                      {"range", range}};
        json files = json::array();
        for (int by = 0; by < grid.blocks_y; ++by)
            for (int bx = 0; bx < grid.blocks_x; ++bx) {
                const std::string name = "psm_bx" + std::to_string(bx) + "_by" +
                                         std::to_string(by) + ".csv";
                save_psm_csv(grid.at(bx, by), (fs::path(args.out_path) / name).string());
                files.push_back(name);
            }
        manifest["files"] = files;
        write_json_file(manifest, (fs::path(args.out_path) / "manifest.json").string(), "psm");
        summary["blocks_x"] = grid.blocks_x;
        summary["blocks_y"] = grid.blocks_y;
        summary["psm_seconds"] = psm_seconds;
        if (args.verbose)
            std::cerr << "[psm] computed " << grid.blocks_x << "x" << grid.blocks_y
                      << " block grid r=" << range << " in " << psm_seconds << " s\n";
    }
    emit_warnings(warnings);
    summary["warnings"] = warnings;
    if (args.json_summary) std::cout << summary.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
    std::string psm_path, out_path, report_path, curves_path;
    EstimateOptions opts;
    int threads = 0;
    bool json_summary = false, verbose = false;
};

int run_estimate(const EstimateArgs& args) {
    const Psm psm = load_psm_csv(args.psm_path);
    if (args.verbose)
        std::cerr << "[estimate] loaded " << psm.n() << "x" << psm.n() << " matrix, range "
                  << psm.range << "\n";

    IterationObserver observer;
    if (args.verbose)
        observer = [](const IterationState& state) {
            std::cerr << "[estimate] iteration " << state.iteration << ": objective "
                      << format_g9(state.objective) << "\n";
        };
    const auto t_inf = Clock::now();
    const SolverResult result = estimate_positions(psm, args.opts, args.threads, observer);
    const double inference_seconds = seconds_since(t_inf);
    if (args.verbose)
        std::cerr << "[estimate] " << result.iterations_run << " iterations in "
                  << inference_seconds << " s\n";

    save_positions_csv(result.coordinates, result.quality, args.out_path);
    if (!args.curves_path.empty()) export_curves_csv(result.curves, args.curves_path);

    Eigen::VectorXd sorted = result.coordinates;
    std::sort(sorted.begin(), sorted.end());
    double min_spacing = std::numeric_limits<double>::infinity(), max_spacing = 0.0;
    for (Eigen::Index i = 1; i < sorted.size(); ++i) {
        min_spacing = std::min(min_spacing, sorted[i] - sorted[i - 1]);
        max_spacing = std::max(max_spacing, sorted[i] - sorted[i - 1]);
    }

    if (!args.report_path.empty()) {
        json report{
            {"options",
             {{"iterations", args.opts.iterations},
              {"damping", args.opts.shift_damping},
              {"curve", args.opts.curve_mode == CurveMode::Global ? "global" : "local"},
              {"wf_sigma", resolved_wf_sigma(args.opts, psm.n())},
              {"ws_sigma", resolved_ws_sigma(args.opts, psm.range)},
              {"wf_window", "gaussian"},
              {"ws_window", "gaussian"},
              {"m_max", args.opts.m_max},
              {"lambda_m", args.opts.lambda_m},
              {"allow_reorder", args.opts.allow_reorder},
              {"seed", args.opts.seed},
              {"threads", args.threads}}},
            {"n", psm.n()},
            {"iterations_run", result.iterations_run},
            {"objective_history", result.objective_history},
            {"min_spacing", min_spacing},
            {"max_spacing", max_spacing},
            {"psm_seconds", 0.0},  // no similarity computation in this subcommand
            {"inference_seconds", inference_seconds}};
        write_json_file(report, args.report_path, "estimate");
    }
    if (args.json_summary) {
        const json summary{{"n", psm.n()},
                           {"iterations_run", result.iterations_run},
                           {"objective_final", result.objective_history.back()},
                           {"min_spacing", min_spacing},
                           {"max_spacing", max_spacing},
                           {"inference_seconds", inference_seconds},
                           {"out", args.out_path}};
        std::cout << summary.dump() << "\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// render
// ---------------------------------------------------------------------------

struct RenderArgs {
    std::string stack_path, positions_path, method = "floor";
    std::string out_path;                    // corrected stack header
    std::string psm_path, psm_image_path;    // PSM re-rendering
    std::string xz_image_path;               // xz cross-section
    int xz_row = -1;
    int out_depth = 0;  // 0 = default round(max(c)) + 1
    int psm_size = 0;   // 0 = default n
    int threads = 0;
    bool json_summary = false, verbose = false;
};

int run_render(const RenderArgs& args) {
    const ResampleMethod method = args.method == "linear" ? ResampleMethod::Linear
                                                          : ResampleMethod::Floor;
    json outputs = json::array();
    std::optional<ImageStack> stack;
    std::optional<Eigen::VectorXd> coords;
    const auto need_stack = [&]() -> const ImageStack& {
        if (!stack) stack = load_stack(args.stack_path);
        return *stack;
    };
    const auto need_coords = [&]() -> const Eigen::VectorXd& {
        if (!coords) coords = load_positions_csv(args.positions_path).z;
        return *coords;
    };

    if (!args.out_path.empty() || !args.xz_image_path.empty()) {
        const Eigen::VectorXd& c = need_coords();
        const int out_depth = args.out_depth > 0
                                  ? args.out_depth
                                  : static_cast<int>(std::lround(c.maxCoeff())) + 1;
        const auto t0 = Clock::now();
        const ImageStack corrected = resample_volume(need_stack(), c, method, out_depth,
                                                     args.threads);
        if (args.verbose)
            std::cerr << "[render] resampled to " << out_depth << " slices ("
                      << args.method << ") in " << seconds_since(t0) << " s\n";
        if (!args.out_path.empty()) {
            save_stack(corrected, args.out_path);
            outputs.push_back(args.out_path);
        }
        if (!args.xz_image_path.empty()) {
            if (args.xz_row < 0)
                throw data_error("--out-image requires --xz with the row to extract");
            write_pgm(extract_xz_slice(corrected, args.xz_row), args.xz_image_path);
            outputs.push_back(args.xz_image_path);
        }
    }
    if (!args.psm_image_path.empty()) {
        if (args.psm_path.empty())
            throw data_error("--psm-image requires --psm with the matrix to render");
        const Psm psm = load_psm_csv(args.psm_path);
        const int out_size = args.psm_size > 0 ? args.psm_size : psm.n();
        write_pgm(render_psm_image(psm, need_coords(), out_size), args.psm_image_path);
        outputs.push_back(args.psm_image_path);
    }
    if (outputs.empty())
        throw data_error("render: nothing to do; pass --out, --out-image, or --psm-image");
    if (args.json_summary) std::cout << json{{"outputs", outputs}}.dump() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string out_dir, decay = "exp:3", remove, kind;
    int n = 64, range = 20, max_displacement = 4;
    int width = 256, height = 64, depth = 96;
    double jitter = 0.4, noise = 0.0, smooth_sigma = 2.0, spacing = 1.0;
    std::uint64_t seed = 7;
    bool json_summary = false, verbose = false;
};

int run_simulate(const SimulateArgs& args) {
    fs::create_directories(args.out_dir);
    const auto out = [&](const char* name) { return (fs::path(args.out_dir) / name).string(); };
    const DecayModel decay = DecayModel::parse(args.decay);
    json files = json::array();

    if (args.kind == "volume") {
        const double span = (args.n - 1) * args.spacing;
        const int z0 = static_cast<int>(std::floor((args.depth - 1 - span) / 2.0));
        if (z0 < 0)
            throw data_error("simulate volume: depth " + std::to_string(args.depth) +
                             " cannot hold " + std::to_string(args.n) +
                             " sections at spacing " + format_g9(args.spacing));
        Rng rng(args.seed);
        std::vector<double> positions(static_cast<std::size_t>(args.n));
        Eigen::VectorXd truth(args.n);
        for (int k = 0; k < args.n; ++k) {
            double p = z0 + k * args.spacing;
            if (args.jitter > 0.0) p += rng.uniform(-args.jitter, args.jitter);
            positions[static_cast<std::size_t>(k)] = p;
            truth[k] = (p - z0) / args.spacing;
        }
        const auto t0 = Clock::now();
        const ImageStack volume = generate_volume(args.width, args.height, args.depth,
                                                  args.smooth_sigma, args.seed + 100);
        if (args.verbose)
            std::cerr << "[simulate] generated " << args.width << "x" << args.height << "x"
                      << args.depth << " volume in " << seconds_since(t0) << " s\n";
        save_stack(sample_sections(volume, positions), out("stack.json"));
        save_truth_csv(truth, Eigen::VectorXd::Ones(args.n), {}, out("truth.csv"));
        files = {"stack.json", "stack.raw", "truth.csv"};
    } else {
        GroundTruth truth = make_jitter_truth(args.n, args.jitter, decay, args.seed);
        if (args.kind == "remove") {
            const auto removed = parse_int_list(args.remove, "--remove");
            if (removed.empty()) throw data_error("simulate remove: --remove list is empty");
            std::vector<char> kept(static_cast<std::size_t>(args.n), 1);
            const GroundTruth surviving = perturb_remove(truth, removed);
            for (const int idx : removed) kept[static_cast<std::size_t>(idx)] = 0;
            save_truth_csv(truth.positions, truth.quality, kept, out("truth.csv"));
            save_psm_csv(synthesize_psm(surviving, args.noise, args.range, args.seed + 1),
                         out("psm.csv"));
            files = {"psm.csv", "truth.csv"};
        } else if (args.kind == "reorder") {
            truth = perturb_reorder(truth, args.max_displacement, args.seed + 2);
            save_truth_csv(truth.positions, truth.quality, {}, out("truth.csv"));
            save_permutation_csv(truth.permutation, out("permutation.csv"));
            save_psm_csv(synthesize_psm(truth, args.noise, args.range, args.seed + 1),
                         out("psm.csv"));
            files = {"psm.csv", "truth.csv", "permutation.csv"};
        } else {  // plain psm instance
            save_truth_csv(truth.positions, truth.quality, {}, out("truth.csv"));
            save_psm_csv(synthesize_psm(truth, args.noise, args.range, args.seed + 1),
                         out("psm.csv"));
            files = {"psm.csv", "truth.csv"};
        }
    }
    if (args.json_summary)
        std::cout << json{{"out_dir", args.out_dir}, {"n", args.n}, {"files", files}}.dump()
                  << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string estimated_path, reference_path, kept_path, align = "none";
    bool json_summary = false;
};

// Reference rows: a positions CSV is taken as-is; a ground-truth CSV is
// compacted to its kept rows so it can be compared against an estimate over
// the surviving sections.
[[nodiscard]] Eigen::VectorXd load_reference_column(const std::string& path) {
    std::ifstream probe(path);
    if (!probe) throw data_error("eval: cannot open " + path);
    std::string header;
    std::getline(probe, header);
    if (!header.empty() && header.back() == '\r') header.pop_back();
    probe.close();
    if (header == "index,true_z,true_quality,kept") {
        const TruthFile truth = load_truth_csv(path);
        std::vector<double> kept_z;
        for (Eigen::Index i = 0; i < truth.positions.size(); ++i)
            if (truth.kept[static_cast<std::size_t>(i)]) kept_z.push_back(truth.positions[i]);
        return Eigen::Map<const Eigen::VectorXd>(kept_z.data(),
                                                 static_cast<Eigen::Index>(kept_z.size()));
    }
    return load_positions_csv(path).z;
}

int run_eval(const EvalArgs& args) {
    const Eigen::VectorXd estimated = load_positions_csv(args.estimated_path).z;
    const Eigen::VectorXd reference = load_reference_column(args.reference_path);
    if (estimated.size() != reference.size())
        throw data_error("eval: estimated has " + std::to_string(estimated.size()) +
                         " rows but the reference has " + std::to_string(reference.size()) +
                         " (kept) rows");
    std::vector<int> kept;
    if (!args.kept_path.empty()) {
        std::ifstream in(args.kept_path);
        if (!in) throw data_error("eval: cannot open " + args.kept_path);
        std::string line;
        for (std::size_t row = 0; std::getline(in, line); ++row) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || (row == 0 && line == "index")) continue;
            try {
                std::size_t used = 0;
                const int idx = std::stoi(line, &used);
                if (used != line.size() || idx < 0) throw std::invalid_argument(line);
                kept.push_back(idx);
            } catch (const std::exception&) {
                throw data_error("eval: " + args.kept_path + " row " + std::to_string(row) +
                                 ": cannot parse '" + line + "' as a section index");
            }
        }
    }
    const Deviation dev = eval_deviation(estimated, reference, kept, args.align == "affine");
    if (args.json_summary)
        std::cout << json{{"mean", dev.mean},
                          {"max", dev.max},
                          {"n", kept.empty() ? estimated.size()
                                             : static_cast<Eigen::Index>(kept.size())}}
                         .dump()
                  << "\n";
    else
        std::cout << "mean " << format_g9(dev.mean) << " max " << format_g9(dev.max) << "\n";
    return 0;
}

} // namespace

// ---------------------------------------------------------------------------
// Argument wiring
// ---------------------------------------------------------------------------

int main(int argc, char** argv) {
    CLI::App app{"z-spacing estimation for serial-section image stacks"};
    app.require_subcommand(1);

    PsmArgs psm_args;
    auto* psm_cmd = app.add_subcommand("psm", "Compute a pairwise similarity matrix");
    psm_cmd->add_option("--stack", psm_args.stack_path, "Stack header (JSON)")->required();
    psm_cmd->add_option("--range", psm_args.range,
                        "Comparison range r (default min(20, depth-1))");
    psm_cmd->add_option("--blocks", psm_args.blocks,
                        "BX,BY block grid; --out then names a directory");
    psm_cmd->add_option("--out", psm_args.out_path, "Output CSV (or directory with --blocks)")
        ->required();
    psm_cmd->add_option("--threads", psm_args.threads, "Worker count, 0 = all cores");
    psm_cmd->add_flag("--allow-zero-variance", psm_args.allow_zero_variance,
                      "Substitute similarity 0 for constant sections instead of failing");
    psm_cmd->add_flag("--json", psm_args.json_summary, "Print a JSON summary to stdout");
    psm_cmd->add_flag("--verbose", psm_args.verbose, "Progress and timings on stderr");

    EstimateArgs est_args;
    std::string est_curve_mode = "global";
    double est_wf_sigma = 0.0, est_ws_sigma = 0.0;
    auto* est_cmd = app.add_subcommand("estimate", "Estimate z-positions from a PSM");
    est_cmd->add_option("--psm", est_args.psm_path, "PSM CSV")->required();
    est_cmd->add_option("--iterations", est_args.opts.iterations, "Solver iterations");
    est_cmd->add_option("--damping", est_args.opts.shift_damping, "Shift damping in (0,1]");
    est_cmd->add_option("--curve", est_curve_mode, "Curve mode: global|local")
        ->check(CLI::IsMember({"global", "local"}));
    auto* wf_opt = est_cmd->add_option("--wf-sigma", est_wf_sigma,
                                       "Curve-fit window width (default N/4)");
    auto* ws_opt = est_cmd->add_option("--ws-sigma", est_ws_sigma,
                                       "Vote window width (default comparison range)");
    est_cmd->add_option("--m-max", est_args.opts.m_max, "Quality clamp upper bound");
    est_cmd->add_option("--lambda-m", est_args.opts.lambda_m, "Quality regularization");
    est_cmd->add_flag("--allow-reorder,!--no-allow-reorder", est_args.opts.allow_reorder,
                      "Allow section order changes (default on)");
    est_cmd->add_option("--seed", est_args.opts.seed, "RNG seed (recorded in the report)");
    est_cmd->add_option("--out", est_args.out_path, "Positions CSV")->required();
    est_cmd->add_option("--report", est_args.report_path, "Report JSON");
    est_cmd->add_option("--curves", est_args.curves_path, "Fitted decay curves CSV");
    est_cmd->add_option("--threads", est_args.threads, "Worker count, 0 = all cores");
    est_cmd->add_flag("--json", est_args.json_summary, "Print a JSON summary to stdout");
    est_cmd->add_flag("--verbose", est_args.verbose, "Per-iteration objective on stderr");

    RenderArgs render_args;
    auto* render_cmd = app.add_subcommand("render", "Resample stacks and draw figure surfaces");
    render_cmd->add_option("--stack", render_args.stack_path, "Stack header (JSON)");
    render_cmd->add_option("--positions", render_args.positions_path, "Positions CSV");
    render_cmd->add_option("--method", render_args.method, "Resampling: floor|linear")
        ->check(CLI::IsMember({"floor", "linear"}));
    render_cmd->add_option("--out", render_args.out_path, "Corrected stack header path");
    render_cmd->add_option("--out-depth", render_args.out_depth,
                           "Output slice count (default round(max(c))+1)");
    render_cmd->add_option("--xz", render_args.xz_row, "Row for the xz cross-section");
    render_cmd->add_option("--out-image", render_args.xz_image_path, "xz cross-section PGM");
    render_cmd->add_option("--psm", render_args.psm_path, "PSM CSV to re-render");
    render_cmd->add_option("--psm-image", render_args.psm_image_path, "PSM image PGM");
    render_cmd->add_option("--psm-size", render_args.psm_size, "PSM image size (default N)");
    render_cmd->add_option("--threads", render_args.threads, "Worker count, 0 = all cores");
    render_cmd->add_flag("--json", render_args.json_summary, "Print a JSON summary to stdout");
    render_cmd->add_flag("--verbose", render_args.verbose, "Progress and timings on stderr");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Generate synthetic instances with truth");
    sim_cmd->require_subcommand(1);
    const auto add_common = [&](CLI::App* sub, bool with_psm_params) {
        sub->add_option("--seed", sim_args.seed, "RNG seed");
        sub->add_option("--out-dir", sim_args.out_dir, "Output directory")->required();
        sub->add_option("--n", sim_args.n, "Section count");
        sub->add_option("--jitter", sim_args.jitter, "Uniform position jitter amplitude");
        if (with_psm_params) {
            sub->add_option("--decay", sim_args.decay, "Decay model exp:<tau>|gauss:<sigma>");
            sub->add_option("--noise", sim_args.noise, "Similarity noise std-dev");
            sub->add_option("--range", sim_args.range, "Comparison range");
        }
        sub->add_flag("--json", sim_args.json_summary, "Print a JSON summary to stdout");
        sub->add_flag("--verbose", sim_args.verbose, "Progress and timings on stderr");
    };
    auto* sim_psm = sim_cmd->add_subcommand("psm", "Jittered-positions PSM instance");
    add_common(sim_psm, true);
    auto* sim_volume = sim_cmd->add_subcommand("volume", "Smooth volume sampled at jittered z");
    add_common(sim_volume, false);
    sim_volume->add_option("--width", sim_args.width, "Volume width");
    sim_volume->add_option("--height", sim_args.height, "Volume height");
    sim_volume->add_option("--depth", sim_args.depth, "Volume depth");
    sim_volume->add_option("--smooth-sigma", sim_args.smooth_sigma, "Volume smoothing sigma");
    sim_volume->add_option("--spacing", sim_args.spacing, "Nominal section spacing in voxels");
    auto* sim_remove = sim_cmd->add_subcommand("remove", "PSM instance with sections removed");
    add_common(sim_remove, true);
    sim_remove->add_option("--remove", sim_args.remove, "Sections to drop, e.g. 20,21,22,46,47")
        ->required();
    auto* sim_reorder = sim_cmd->add_subcommand("reorder", "PSM instance with shuffled order");
    add_common(sim_reorder, true);
    sim_reorder->add_option("--max-displacement", sim_args.max_displacement,
                            "Reorder bound (new index within +-k of original)");

    EvalArgs eval_args;
    auto* eval_cmd = app.add_subcommand("eval", "Compare estimated positions against truth");
    eval_cmd->add_option("--estimated", eval_args.estimated_path, "Positions CSV")->required();
    eval_cmd->add_option("--reference", eval_args.reference_path,
                         "Positions CSV or ground-truth CSV")
        ->required();
    eval_cmd->add_option("--align", eval_args.align, "Alignment: none|affine")
        ->check(CLI::IsMember({"none", "affine"}));
    eval_cmd->add_option("--kept", eval_args.kept_path,
                         "Index list restricting the comparison (one row index per line)");
    eval_cmd->add_flag("--json", eval_args.json_summary, "Print a JSON summary to stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(psm_cmd)) return run_psm(psm_args);
        if (app.got_subcommand(est_cmd)) {
            est_args.opts.curve_mode = est_curve_mode == "local" ? CurveMode::Local
                                                                 : CurveMode::Global;
            if (wf_opt->count()) est_args.opts.wf_sigma = est_wf_sigma;
            if (ws_opt->count()) est_args.opts.ws_sigma = est_ws_sigma;
            return run_estimate(est_args);
        }
        if (app.got_subcommand(render_cmd)) return run_render(render_args);
        if (app.got_subcommand(sim_cmd)) {
            for (auto* sub : {sim_psm, sim_volume, sim_remove, sim_reorder})
                if (sim_cmd->got_subcommand(sub)) sim_args.kind = sub->get_name();
            return run_simulate(sim_args);
        }
        if (app.got_subcommand(eval_cmd)) return run_eval(eval_args);
    } catch (const data_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
