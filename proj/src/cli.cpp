#include "geowarp/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "geowarp/apps.hpp"
#include "geowarp/fitting.hpp"
#include "geowarp/io.hpp"
#include "geowarp/resampler.hpp"
#include "geowarp/synthesizer.hpp"

namespace geowarp::cli {

namespace {

using nlohmann::json;

DistortionType require_type(const std::string& name) {
    const auto t = parse_type(name);
    if (!t) throw InvalidInput("unknown distortion type '" + name + "'");
    return *t;
}

std::vector<DistortionType> parse_type_list(const std::string& list) {
    std::vector<DistortionType> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(require_type(item));
    }
    return out;
}

std::vector<double> parse_number_list(const std::string& list) {
    std::vector<double> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw InvalidInput("not a number: '" + item + "'");
        }
    }
    return out;
}

json fit_to_json(const FitResult& fit) {
    json rho = json::array();
    for (int c = 0; c < param_count(fit.params.type); ++c) rho.push_back(fit.params.rho[c]);
    return {{"type", std::string(type_name(fit.params.type))},
            {"rho", rho},
            {"votes", fit.votes},
            {"estimates", fit.estimates},
            {"inlier_fraction", fit.inlier_fraction},
            {"refit_epe", fit.refit_epe}};
}

json report_to_json(const ResampleReport& r, int max_iterations) {
    std::vector<std::uint64_t> by_iteration(static_cast<std::size_t>(max_iterations) + 1, 0);
    for (auto it : r.iterations) ++by_iteration[std::min<std::size_t>(it, by_iteration.size() - 1)];
    std::vector<double> edges(ResampleReport::kResidualEdges.begin(), ResampleReport::kResidualEdges.end());
    return {{"width", r.width},
            {"height", r.height},
            {"fraction_converged", r.fraction_converged},
            {"fraction_invalid", r.fraction_invalid},
            {"mean_iterations", r.mean_iterations},
            {"iteration_histogram", by_iteration},
            {"residual_edges", edges},
            {"residual_histogram", r.residual_histogram}};
}

// Options shared by subcommands that run the resampler.
struct SolverFlags {
    int max_iterations = ResampleOptions{}.max_iterations;
    double tolerance = ResampleOptions{}.tolerance;
    bool no_derivative_init = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--max-iter", max_iterations, "Fixed-point iteration cap")->check(CLI::PositiveNumber);
        cmd->add_option("--tol", tolerance, "Convergence tolerance in pixels")->check(CLI::PositiveNumber);
        cmd->add_flag("--no-deriv-init", no_derivative_init, "Start from q instead of the linearized estimate");
    }
    ResampleOptions options() const {
        ResampleOptions o;
        o.max_iterations = max_iterations;
        o.tolerance = tolerance;
        o.use_derivative_init = !no_derivative_init;
        return o;
    }
};

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Geometric distortion synthesis, model fitting and correction"};
    app.require_subcommand(1);

    // synth
    SynthConfig synth;
    std::string synth_types;
    auto* cmd_synth = app.add_subcommand("synth", "Generate a distorted image / flow dataset");
    cmd_synth->add_option("--src", synth.source_dir, "Directory of source PNG images")->required();
    cmd_synth->add_option("--out", synth.out_dir, "Output directory")->required();
    cmd_synth->add_option("--count", synth.per_type_count, "Records per distortion type")->check(CLI::NonNegativeNumber);
    cmd_synth->add_option("--types", synth_types, "Comma-separated types (default: all six)");
    cmd_synth->add_option("--seed", synth.seed, "Random seed");
    cmd_synth->add_option("--size", synth.output_size, "Output edge length in pixels");

    // fit
    std::string fit_flow, fit_type, fit_sidecar, fit_refined;
    bool fit_auto = false;
    int fit_cells = 100;
    auto* cmd_fit = app.add_subcommand("fit", "Fit a distortion model to a flow by Hough voting");
    cmd_fit->add_option("--flow", fit_flow, "Input flow file");
    auto* fit_type_opt = cmd_fit->add_option("--type", fit_type, "Distortion type");
    auto* fit_auto_opt = cmd_fit->add_flag("--auto", fit_auto, "Identify the type from the flow");
    auto* fit_side_opt = cmd_fit->add_option("--sidecar", fit_sidecar, "Prediction sidecar naming type and flow");
    fit_type_opt->excludes(fit_auto_opt)->excludes(fit_side_opt);
    fit_auto_opt->excludes(fit_side_opt);
    cmd_fit->add_option("--cells", fit_cells, "Hough cells per parameter")->check(CLI::PositiveNumber);
    cmd_fit->add_option("--refined", fit_refined, "Write the regenerated flow here");

    // correct
    std::string cor_image, cor_flow, cor_out, cor_type, cor_sidecar, cor_report;
    bool cor_refine = false;
    SolverFlags cor_solver;
    auto* cmd_correct = app.add_subcommand("correct", "Correct an image with a forward flow");
    cmd_correct->add_option("--image", cor_image, "Distorted image (PNG)")->required();
    cmd_correct->add_option("--flow", cor_flow, "Forward flow file");
    cmd_correct->add_option("--sidecar", cor_sidecar, "Prediction sidecar (implies --refine)");
    cmd_correct->add_option("--out", cor_out, "Corrected image (PNG)")->required();
    cmd_correct->add_flag("--refine", cor_refine, "Fit a model and correct with its smooth flow");
    cmd_correct->add_option("--type", cor_type, "Model type for --refine (default: identify)");
    cmd_correct->add_option("--report", cor_report, "Write the report JSON here instead of stderr");
    cor_solver.attach(cmd_correct);

    // resample-bench
    std::string bench_flow, bench_levels = "1", bench_out;
    int bench_iters = 15;
    auto* cmd_bench = app.add_subcommand("resample-bench", "Per-iteration convergence table (CSV)");
    cmd_bench->add_option("--flow", bench_flow, "Forward flow file")->required();
    cmd_bench->add_option("--levels", bench_levels, "Comma-separated flow gains (distortion levels)");
    cmd_bench->add_option("--max-iter", bench_iters, "Iterations to tabulate")->check(CLI::PositiveNumber);
    cmd_bench->add_option("--out", bench_out, "CSV path (default: stdout)");

    // transfer
    std::string tr_ref, tr_target, tr_out;
    auto* cmd_transfer = app.add_subcommand("transfer", "Apply a reference distortion flow to another image");
    cmd_transfer->add_option("--ref-flow", tr_ref, "Reference forward flow")->required();
    cmd_transfer->add_option("--target", tr_target, "Target image (PNG)")->required();
    cmd_transfer->add_option("--out", tr_out, "Output image (PNG)")->required();

    // exaggerate
    std::string ex_image, ex_flow, ex_out;
    double ex_gain = -1.0;
    auto* cmd_ex = app.add_subcommand("exaggerate", "Resample with a scaled flow (negative gain exaggerates)");
    cmd_ex->add_option("--image", ex_image, "Distorted image (PNG)")->required();
    cmd_ex->add_option("--flow", ex_flow, "Forward flow file")->required();
    cmd_ex->add_option("--gain", ex_gain, "Flow gain: 1 corrects, 0 is identity, <0 exaggerates");
    cmd_ex->add_option("--out", ex_out, "Output image (PNG)")->required();

    // epe
    std::string epe_a, epe_b;
    auto* cmd_epe = app.add_subcommand("epe", "Mean endpoint error between two flows");
    cmd_epe->add_option("--a", epe_a, "First flow")->required();
    cmd_epe->add_option("--b", epe_b, "Second flow")->required();

    // identify
    std::string id_flow;
    int id_cells = 100;
    auto* cmd_id = app.add_subcommand("identify", "Rank the six models by refit error");
    cmd_id->add_option("--flow", id_flow, "Flow file")->required();
    cmd_id->add_option("--cells", id_cells, "Hough cells per parameter")->check(CLI::PositiveNumber);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n" << "run with --help for usage\n";
        return kUsage;
    }

    out << std::setprecision(17);
    try {
        if (cmd_synth->parsed()) {
            if (!synth_types.empty()) synth.types = parse_type_list(synth_types);
            const DatasetManifest m = generate_dataset(synth);
            out << "wrote " << m.records.size() << " records to " << (synth.out_dir / "manifest.json").string() << "\n";
        } else if (cmd_fit->parsed()) {
            FitOptions fo;
            fo.cells = fit_cells;
            std::optional<DistortionType> type;
            std::string flow_path = fit_flow;
            if (!fit_sidecar.empty()) {
                const io::PredictionSidecar s = io::read_sidecar(fit_sidecar);
                type = s.type;
                if (flow_path.empty()) flow_path = s.flow_path(fit_sidecar).string();
            } else if (!fit_type.empty()) {
                type = require_type(fit_type);
            } else if (!fit_auto) {
                throw InvalidInput("fit: one of --type, --auto or --sidecar is required");
            }
            if (flow_path.empty()) throw InvalidInput("fit: --flow is required");
            const FlowField flow = io::read_flow(flow_path);
            const ParamRange ranges = ParamRange::defaults();
            if (type) {
                const FitResult fit = hough_fit(flow, *type, ranges, fo);
                if (!fit_refined.empty()) io::write_flow(fit_refined, refine_flow(fit, flow.width(), flow.height()));
                out << fit_to_json(fit).dump(2) << "\n";
            } else {
                const auto fits = identify_model(flow, ranges, fo);
                if (!fit_refined.empty()) io::write_flow(fit_refined, refine_flow(fits.front(), flow.width(), flow.height()));
                out << fit_to_json(fits.front()).dump(2) << "\n";
            }
        } else if (cmd_correct->parsed()) {
            const ImageBuffer image = io::read_png(cor_image);
            std::optional<DistortionType> type;
            std::string flow_path = cor_flow;
            if (!cor_sidecar.empty()) {
                const io::PredictionSidecar s = io::read_sidecar(cor_sidecar);
                type = s.type;
                cor_refine = true;
                if (flow_path.empty()) flow_path = s.flow_path(cor_sidecar).string();
            }
            if (!cor_type.empty()) type = require_type(cor_type);
            if (flow_path.empty()) throw InvalidInput("correct: --flow or --sidecar is required");
            FlowField flow = io::read_flow(flow_path);
            json fit_json;
            if (cor_refine) {
                const ParamRange ranges = ParamRange::defaults();
                const FitResult fit = type ? hough_fit(flow, *type, ranges) : identify_model(flow, ranges).front();
                fit_json = fit_to_json(fit);
                flow = refine_flow(fit, image.width(), image.height());
            }
            const ResampleOptions ro = cor_solver.options();
            const ResampleResult res = resample(image, flow, ro);
            io::write_png(cor_out, res.image);
            json report = report_to_json(res.report, ro.max_iterations);
            if (!fit_json.is_null()) report["fit"] = fit_json;
            if (cor_report.empty()) {
                err << report.dump(2) << "\n";
            } else {
                io::write_text_atomic(cor_report, report.dump(2) + "\n");
            }
        } else if (cmd_bench->parsed()) {
            const FlowField flow = io::read_flow(bench_flow);
            const std::vector<double> levels = parse_number_list(bench_levels);
            if (levels.empty()) throw InvalidInput("resample-bench: --levels is empty");
            std::ostringstream csv;
            csv << std::setprecision(9);
            csv << "level,method,iteration,mean_residual,fraction_below_0.2px,fraction_converged\n";
            for (double level : levels) {
                const FlowField scaled = scale_flow(flow, level);
                for (bool deriv : {true, false}) {
                    for (int k = 1; k <= bench_iters; ++k) {
                        ResampleOptions ro;
                        ro.max_iterations = k;
                        ro.use_derivative_init = deriv;
                        const BackwardMap map = solve_backward_map(scaled, ro);
                        double sum = 0.0;
                        std::size_t below = 0;
                        for (const auto& s : map.solutions) {
                            sum += s.residual;
                            if (s.residual < 0.2) ++below;
                        }
                        const double n = static_cast<double>(map.solutions.size());
                        csv << level << ',' << (deriv ? "derivative" : "plain") << ',' << k << ','
                            << sum / n << ',' << static_cast<double>(below) / n << ','
                            << map.report.fraction_converged << '\n';
                    }
                }
            }
            if (bench_out.empty()) out << csv.str(); else io::write_text_atomic(bench_out, csv.str());
        } else if (cmd_transfer->parsed()) {
            io::write_png(tr_out, transfer(io::read_flow(tr_ref), io::read_png(tr_target)));
        } else if (cmd_ex->parsed()) {
            io::write_png(ex_out, exaggerate(io::read_png(ex_image), io::read_flow(ex_flow), ex_gain));
        } else if (cmd_epe->parsed()) {
            out << epe(io::read_flow(epe_a), io::read_flow(epe_b)) << "\n";
        } else if (cmd_id->parsed()) {
            FitOptions fo;
            fo.cells = id_cells;
            const auto fits = identify_model(io::read_flow(id_flow), ParamRange::defaults(), fo);
            json ranked = json::array();
            for (const auto& f : fits) ranked.push_back(fit_to_json(f));
            out << ranked.dump(2) << "\n";
        }
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    } catch (const AlgorithmError& e) {
        err << "error: " << e.what() << "\n";
        return kAlgorithm;
    } catch (const InvalidInput& e) {
        err << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kIo;
    }
    return kOk;
}

}  // namespace geowarp::cli
