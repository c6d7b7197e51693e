#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/detector.hpp"
#include "bcp/enhance.hpp"
#include "bcp/enhance_net.hpp"
#include "bcp/errors.hpp"
#include "bcp/image.hpp"
#include "bcp/selftest.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using OrderedJson = nlohmann::ordered_json;
constexpr int kReportVersion = 1;

struct EnhanceArgs {
    std::string visible, thermal, out;
    std::string solver = "direct";
    double lambda = bcp::kDefaultLambda;
    double gamma = bcp::kDefaultGamma;
    int patch_radius = bcp::kDefaultPatchRadius;
    double t_min = bcp::kDefaultTMin;
    double beta = bcp::kDefaultBeta;
    std::string dump_dir;
    std::string report;
    std::uint64_t seed = 0;
    int steps = bcp::kDefaultTrainSteps;
    double learning_rate = bcp::kDefaultLearningRate;
    std::vector<double> ambient; // empty or 3 components
    bool timings = false;
};

struct TrainArgs {
    std::string visible, thermal, checkpoint, report;
    int steps = bcp::kDefaultTrainSteps;
    double learning_rate = bcp::kDefaultLearningRate;
    std::uint64_t seed = 0;
    double lambda = bcp::kDefaultLambda;
    double gamma = bcp::kDefaultGamma;
    int patch_radius = bcp::kDefaultPatchRadius;
    double t_min = bcp::kDefaultTMin;
    std::vector<double> ambient;
    bool timings = false;
};

struct SelftestArgs {
    std::uint64_t seed = 42;
    bool inject_fault = false;
};

OrderedJson loss_json(const bcp::LossBreakdown& l) {
    return {{"data", l.data_term},
            {"smoothness", l.smoothness_term},
            {"total", l.total},
            {"lambda", l.lambda}};
}

OrderedJson ambient_json(const bcp::AmbientLight& a) {
    return {a.value[0], a.value[1], a.value[2]};
}

void write_json(const OrderedJson& j, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw bcp::IoError("cannot write file: " + path);
    os << j.dump(2) << '\n';
    if (!os) throw bcp::IoError("cannot write file: " + path);
}

std::optional<bcp::AmbientLight> parse_ambient(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    for (double c : v)
        if (!(c >= 0.0 && c < 1.0))
            throw std::invalid_argument("ambient components must lie in [0, 1)");
    bcp::AmbientLight a;
    a.value = Eigen::Array3d(v[0], v[1], v[2]);
    return a;
}

// Affine rescale of a scalar field to span [0,1], for debug PNG dumps.
OrderedJson dump_scaled(const Eigen::ArrayXd& values, int w, int h, const std::string& path) {
    const double lo = values.minCoeff();
    const double hi = values.maxCoeff();
    Eigen::ArrayXd scaled = hi > lo ? ((values - lo) / (hi - lo)).eval()
                                    : Eigen::ArrayXd::Zero(values.size()).eval();
    bcp::save_image({w, h, 1, std::move(scaled)}, path);
    return {{"path", path}, {"min", lo}, {"max", hi}};
}

void print_timings(const std::vector<bcp::StageTime>& timings) {
    std::printf("stage times:");
    for (const auto& s : timings) std::printf(" %s %.1f ms", s.stage.c_str(), s.milliseconds);
    std::printf("\n");
}

OrderedJson timings_json(const std::vector<bcp::StageTime>& timings) {
    OrderedJson j = OrderedJson::object();
    for (const auto& s : timings) j[s.stage] = s.milliseconds;
    return j;
}

int cmd_enhance(const EnhanceArgs& args) {
    bcp::PipelineConfig cfg;
    cfg.patch.radius = args.patch_radius;
    cfg.lambda = args.lambda;
    cfg.gamma = args.gamma;
    cfg.t_min = args.t_min;
    cfg.solver = args.solver == "network" ? bcp::SolverChoice::LearnedNetwork
                                          : bcp::SolverChoice::DirectQuadratic;
    cfg.train_cfg.seed = args.seed;
    cfg.train_cfg.steps = args.steps;
    cfg.train_cfg.learning_rate = args.learning_rate;
    cfg.ambient_override = parse_ambient(args.ambient);

    OrderedJson report;
    report["report_version"] = kReportVersion;
    report["command"] = "enhance";
    report["config"] = {{"visible", args.visible},
                        {"thermal", args.thermal},
                        {"out", args.out},
                        {"solver", args.solver},
                        {"lambda", args.lambda},
                        {"gamma", args.gamma},
                        {"patch_radius", args.patch_radius},
                        {"t_min", args.t_min},
                        {"beta", args.beta},
                        {"seed", args.seed},
                        {"steps", args.steps},
                        {"learning_rate", args.learning_rate},
                        {"ambient_fraction", cfg.ambient_fraction},
                        {"matting_epsilon", cfg.matting_epsilon},
                        {"cg_tolerance", cfg.solver_cfg.tolerance},
                        {"cg_max_iterations", cfg.solver_cfg.max_iterations}};
    if (cfg.ambient_override) report["config"]["ambient_override"] = ambient_json(*cfg.ambient_override);

    const bcp::RasterImage visible = bcp::load_image(args.visible);
    const bcp::RasterImage thermal = bcp::load_image(args.thermal);
    report["image"] = {{"width", visible.width()},
                       {"height", visible.height()},
                       {"channels", visible.channels()}};

    bcp::EnhanceResult res;
    try {
        res = bcp::enhance_pair(visible, thermal, cfg);
    } catch (const bcp::SolverError& e) {
        report["error"] = {{"type", "solver"},
                           {"message", e.what()},
                           {"iterations", e.iterations()},
                           {"relative_residual", e.residual()}};
        if (!args.report.empty()) write_json(report, args.report);
        std::cerr << "error: " << e.what() << " (after " << e.iterations() << " iterations, residual "
                  << e.residual() << ")\n";
        return 3;
    } catch (const bcp::DivergenceError& e) {
        report["error"] = {{"type", "divergence"}, {"message", e.what()}, {"step", e.step()}};
        if (!args.report.empty()) write_json(report, args.report);
        std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
        return 3;
    }

    bcp::save_image(res.enhanced, args.out);

    report["ambient"] = ambient_json(res.ambient);
    report["losses"] = {{"initial", loss_json(res.loss_initial)},
                        {"solution", loss_json(res.loss_solution)},
                        {"final", loss_json(res.loss_final)}};
    report["solver"] = {{"iterations", res.solver_iterations},
                        {"relative_residual", res.solver_residual}};
    report["clamps"] = {{"t_tilde_floored", res.clamps.t_tilde_floored},
                        {"t_floored", res.clamps.t_floored},
                        {"t_capped", res.clamps.t_capped},
                        {"j_clamped_low", res.clamps.j_clamped_low},
                        {"j_clamped_high", res.clamps.j_clamped_high}};

    const bcp::StubDetectorResult det = bcp::stub_detector(res.enhanced, thermal);
    const bcp::TotalLoss combined = bcp::total_loss(res.loss_final, det.loss, args.beta);
    report["detector"] = {{"beta", combined.beta},
                          {"loss", combined.detector},
                          {"total", combined.total}};

    if (!res.train_history.empty()) {
        OrderedJson hist = OrderedJson::array();
        for (const auto& l : res.train_history) hist.push_back(l.total);
        report["train_loss_history"] = std::move(hist);
    }

    OrderedJson files = {{"out", args.out}};
    if (!args.dump_dir.empty()) {
        std::filesystem::create_directories(args.dump_dir);
        const auto at = [&](const char* name) {
            return (std::filesystem::path(args.dump_dir) / name).string();
        };
        const bcp::RasterImage bright = bcp::bright_channel(visible, cfg.patch);
        report["intermediates"] = {
            {"t", dump_scaled(res.t.values, res.t.width, res.t.height, at("t.png"))},
            {"t_tilde",
             dump_scaled(res.t_tilde.values, res.t_tilde.width, res.t_tilde.height, at("t_tilde.png"))},
            {"attention", dump_scaled(res.attention.values, res.attention.width,
                                      res.attention.height, at("attention.png"))},
            {"bright_channel",
             dump_scaled(bright.plane(0), bright.width(), bright.height(), at("bright_channel.png"))}};
    }
    if (!args.report.empty()) files["report"] = args.report;
    report["files"] = std::move(files);
    if (args.timings) report["timings_ms"] = timings_json(res.timings);
    if (!args.report.empty()) write_json(report, args.report);

    std::printf("wrote %s (%dx%d)\n", args.out.c_str(), res.enhanced.width(), res.enhanced.height());
    std::printf("solver %s: %d iterations, residual %.3e\n", args.solver.c_str(),
                res.solver_iterations, res.solver_residual);
    std::printf("loss: initial %.6g -> solution %.6g -> final %.6g; detector %.6g (beta %g, total %.6g)\n",
                res.loss_initial.total, res.loss_solution.total, res.loss_final.total,
                combined.detector, combined.beta, combined.total);
    print_timings(res.timings);
    return 0;
}

int cmd_train(const TrainArgs& args) {
    bcp::TrainConfig cfg;
    cfg.steps = args.steps;
    cfg.learning_rate = args.learning_rate;
    cfg.seed = args.seed;
    cfg.lambda = args.lambda;
    cfg.gamma = args.gamma;
    cfg.patch.radius = args.patch_radius;
    cfg.t_min = args.t_min;
    cfg.ambient_override = parse_ambient(args.ambient);

    OrderedJson report;
    report["report_version"] = kReportVersion;
    report["command"] = "train";
    report["config"] = {{"visible", args.visible},
                        {"thermal", args.thermal},
                        {"checkpoint", args.checkpoint},
                        {"steps", args.steps},
                        {"learning_rate", args.learning_rate},
                        {"seed", args.seed},
                        {"lambda", args.lambda},
                        {"gamma", args.gamma},
                        {"patch_radius", args.patch_radius},
                        {"t_min", args.t_min},
                        {"ambient_fraction", cfg.ambient_fraction},
                        {"matting_epsilon", cfg.matting_epsilon}};
    if (cfg.ambient_override) report["config"]["ambient_override"] = ambient_json(*cfg.ambient_override);

    const bcp::RasterImage visible = bcp::load_image(args.visible);
    const bcp::RasterImage thermal = bcp::load_image(args.thermal);
    report["image"] = {{"width", visible.width()},
                       {"height", visible.height()},
                       {"channels", visible.channels()}};

    const auto start = std::chrono::steady_clock::now();
    bcp::TrainResult res;
    try {
        res = bcp::train(visible, thermal, cfg);
    } catch (const bcp::DivergenceError& e) {
        report["error"] = {{"type", "divergence"}, {"message", e.what()}, {"step", e.step()}};
        if (!args.report.empty()) write_json(report, args.report);
        std::cerr << "error: " << e.what() << " (step " << e.step() << ")\n";
        return 3;
    }
    const double train_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();

    bcp::save_network_params(res.params, args.checkpoint);

    report["ambient"] = ambient_json(res.ambient);
    OrderedJson hist = OrderedJson::array();
    for (const auto& l : res.history) hist.push_back(l.total);
    report["loss_history"] = std::move(hist);
    report["initial_loss"] = loss_json(res.history.front());
    report["final_loss"] = loss_json(res.final_loss);
    OrderedJson files = {{"checkpoint", args.checkpoint}};
    if (!args.report.empty()) files["report"] = args.report;
    report["files"] = std::move(files);
    if (args.timings) report["timings_ms"] = {{"train", train_ms}};
    if (!args.report.empty()) write_json(report, args.report);

    std::printf("trained %d steps in %.1f ms: loss %.6g -> %.6g\n", args.steps, train_ms,
                res.history.front().total, res.final_loss.total);
    std::printf("wrote %s\n", args.checkpoint.c_str());
    return 0;
}

int cmd_selftest(const SelftestArgs& args) {
    const std::vector<bcp::PropertyResult> results =
        bcp::run_selftest(args.seed, args.inject_fault);
    size_t width = 0;
    for (const auto& r : results) width = std::max(width, r.name.size());

    bool all_ok = true;
    for (const auto& r : results) {
        all_ok = all_ok && r.passed;
        std::printf("%-4s %-*s %s\n", r.passed ? "ok" : "FAIL", static_cast<int>(width),
                    r.name.c_str(), r.detail.c_str());
    }
    std::printf("%zu/%zu properties passed\n",
                static_cast<size_t>(std::count_if(results.begin(), results.end(),
                                                  [](const auto& r) { return r.passed; })),
                results.size());
    return all_ok ? 0 : 4;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal low-light enhancement with the bright channel prior"};
    app.require_subcommand(1);

    EnhanceArgs ea;
    CLI::App* enhance = app.add_subcommand("enhance", "Enhance a visible/thermal pair");
    enhance->add_option("--visible", ea.visible, "Visible (low-light) image")->required();
    enhance->add_option("--thermal", ea.thermal, "Aligned thermal image")->required();
    enhance->add_option("--out", ea.out, "Output PNG path")->required();
    enhance->add_option("--solver", ea.solver, "Illumination solver")
        ->check(CLI::IsMember({"direct", "network"}))
        ->capture_default_str();
    enhance->add_option("--lambda", ea.lambda, "Smoothness weight")->capture_default_str();
    enhance->add_option("--gamma", ea.gamma, "Attention exponent")->capture_default_str();
    enhance->add_option("--patch-radius", ea.patch_radius, "Bright-channel window radius")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    enhance->add_option("--t-min", ea.t_min, "Illumination floor")->capture_default_str();
    enhance->add_option("--beta", ea.beta, "Detector loss weight in the report")
        ->capture_default_str();
    enhance->add_option("--dump-intermediates", ea.dump_dir,
                        "Directory for t/attention/bright-channel PNG dumps");
    enhance->add_option("--report", ea.report, "JSON report path");
    enhance->add_option("--seed", ea.seed, "Seed for the network solver")->capture_default_str();
    enhance->add_option("--steps", ea.steps, "Training steps (network solver)")
        ->capture_default_str();
    enhance->add_option("--lr", ea.learning_rate, "Learning rate (network solver)")
        ->capture_default_str();
    enhance->add_option("--ambient", ea.ambient, "Override ambient light as three components")
        ->expected(3);
    enhance->add_flag("--timings", ea.timings, "Include wall-clock stage times in the report");

    TrainArgs ta;
    CLI::App* train = app.add_subcommand("train", "Train the illumination network on one pair");
    train->add_option("--visible", ta.visible, "Visible (low-light) image")->required();
    train->add_option("--thermal", ta.thermal, "Aligned thermal image")->required();
    train->add_option("--checkpoint", ta.checkpoint, "Checkpoint output path")->required();
    train->add_option("--report", ta.report, "JSON report path");
    train->add_option("--steps", ta.steps, "Gradient steps")->capture_default_str();
    train->add_option("--lr", ta.learning_rate, "Learning rate")->capture_default_str();
    train->add_option("--seed", ta.seed, "Initialization seed")->capture_default_str();
    train->add_option("--lambda", ta.lambda, "Smoothness weight")->capture_default_str();
    train->add_option("--gamma", ta.gamma, "Attention exponent")->capture_default_str();
    train->add_option("--patch-radius", ta.patch_radius, "Bright-channel window radius")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    train->add_option("--t-min", ta.t_min, "Illumination floor")->capture_default_str();
    train->add_option("--ambient", ta.ambient, "Override ambient light as three components")
        ->expected(3);
    train->add_flag("--timings", ta.timings, "Include wall-clock training time in the report");

    SelftestArgs sa;
    CLI::App* selftest = app.add_subcommand("selftest", "Run the embedded property suite");
    selftest->add_option("--seed", sa.seed, "Instance generator seed")->capture_default_str();
    selftest->add_flag("--inject-fault", sa.inject_fault)->group(""); // hidden test hook

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (enhance->parsed()) return cmd_enhance(ea);
        if (train->parsed()) return cmd_train(ta);
        return cmd_selftest(sa);
    } catch (const bcp::SolverError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const bcp::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const bcp::IoError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
