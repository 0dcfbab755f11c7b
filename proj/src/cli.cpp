#include "edgetrace/cli.h"

#include "edgetrace/engine.h"
#include "edgetrace/optimize.h"
#include "edgetrace/parallel.h"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace edgetrace {

namespace {

struct CommonOptions {
    std::string scene;
    int spp = 16;
    int bounces = 0;
    std::uint64_t seed = 0;
    int threads = 0;
};

void add_common(CLI::App *cmd, CommonOptions &o, int default_spp) {
    o.spp = default_spp;
    cmd->add_option("scene", o.scene, "Scene JSON file")->required();
    cmd->add_option("--spp", o.spp, "Samples per pixel")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--bounces", o.bounces, "Indirect bounces (0 = direct only)")
        ->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    cmd->add_option("--threads", o.threads, "Worker threads (default: $EDGETRACE_THREADS or all cores)")
        ->check(CLI::NonNegativeNumber);
}

RenderConfig render_config(const CommonOptions &o) {
    RenderConfig c;
    c.spp = o.spp;
    c.max_bounces = o.bounces;
    c.seed = o.seed;
    c.threads = resolve_threads(o.threads);
    return c;
}

void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) {
        throw ImageError(path + ": cannot open for writing");
    }
    f << text;
    if (!f) {
        throw ImageError(path + ": write failed");
    }
}

// Thrown for user errors that are not load errors (unknown parameter names etc).
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
    CLI::App app{"Differentiable path tracer with edge-sampled visibility gradients", "edgetrace"};
    app.require_subcommand(1);

    CommonOptions render_opts;
    std::string render_out, render_png;
    auto *render_cmd = app.add_subcommand("render", "Render a scene to PFM");
    add_common(render_cmd, render_opts, 16);
    render_cmd->add_option("-o,--out", render_out, "Output PFM")->required();
    render_cmd->add_option("--png", render_png, "Optional PNG preview");

    CommonOptions grad_opts;
    std::string grad_param, grad_out, grad_png;
    int grad_edges = 100000, grad_secondary = 1;
    auto *grad_cmd = app.add_subcommand("grad-image", "Per-pixel derivative image w.r.t. one parameter scalar");
    add_common(grad_cmd, grad_opts, 16);
    grad_cmd->add_option("--param", grad_param, "Scalar name, e.g. mesh[0].translation.x or material[0].diffuse[1]")
        ->required();
    grad_cmd->add_option("-o,--out", grad_out, "Output PFM")->required();
    grad_cmd->add_option("--png", grad_png, "Signed preview (red +, blue -)");
    grad_cmd->add_option("--edge-samples", grad_edges, "Primary edge samples")->capture_default_str();
    grad_cmd->add_option("--secondary-samples", grad_secondary, "Secondary edge samples per shading point")
        ->capture_default_str();

    CommonOptions fd_opts;
    Real fd_h = 1e-3, fd_threshold = 0.01;
    int fd_spp = 0, fd_edges = 100000, fd_secondary = 1;
    bool fd_no_edges = false;
    std::string fd_report, fd_target, fd_loss = "l2";
    auto *fd_cmd = app.add_subcommand("fd-check", "Compare gradients with central finite differences");
    fd_cmd->set_help_flag("--help", "Print this help message and exit"); // frees -h for --h
    add_common(fd_cmd, fd_opts, 16);
    fd_cmd->add_option("--h", fd_h, "Finite-difference step")->capture_default_str()->check(CLI::PositiveNumber);
    fd_cmd->add_option("--fd-spp", fd_spp, "Samples per pixel for the FD renders (default: --spp)");
    fd_cmd->add_option("--edge-samples", fd_edges, "Primary edge samples")->capture_default_str();
    fd_cmd->add_option("--secondary-samples", fd_secondary, "Secondary edge samples per shading point")
        ->capture_default_str();
    fd_cmd->add_flag("--no-edges", fd_no_edges, "Disable both edge terms");
    fd_cmd->add_option("--report", fd_report, "Write the JSON report here");
    fd_cmd->add_option("--threshold", fd_threshold, "Pass threshold on the aggregate relative L1 error")
        ->capture_default_str();
    fd_cmd->add_option("--target", fd_target, "Target PFM (default: black)");
    fd_cmd->add_option("--loss", fd_loss, "l2 or l1")->check(CLI::IsMember({"l2", "l1"}))->capture_default_str();

    CommonOptions opt_opts;
    std::string opt_target, opt_out_dir, opt_method = "adam";
    int opt_iters = 100, opt_edges = 10000, opt_secondary = 1, opt_preview = 10;
    Real opt_lr = 1e-2;
    bool opt_bias = false;
    std::vector<std::string> opt_groups;
    auto *opt_cmd = app.add_subcommand("optimize", "Fit registered parameters to a target image");
    add_common(opt_cmd, opt_opts, 4);
    opt_cmd->add_option("target", opt_target, "Target PFM")->required();
    opt_cmd->add_option("--iters", opt_iters, "Iterations")->capture_default_str()->check(CLI::NonNegativeNumber);
    opt_cmd->add_option("--lr", opt_lr, "Learning rate")->capture_default_str();
    opt_cmd->add_option("--group-lr", opt_groups, "Per-parameter rate, path=rate (repeatable)");
    opt_cmd->add_option("--edge-samples", opt_edges, "Primary edge samples per iteration")->capture_default_str();
    opt_cmd->add_option("--secondary-samples", opt_secondary, "Secondary edge samples per shading point")
        ->capture_default_str();
    opt_cmd->add_option("--out-dir", opt_out_dir, "Output directory")->required();
    opt_cmd->add_option("--preview-every", opt_preview, "Write a preview every N iterations (0 = never)")
        ->capture_default_str();
    opt_cmd->add_option("--optimizer", opt_method, "adam or sgd")->check(CLI::IsMember({"adam", "sgd"}));
    opt_cmd->add_flag("--bias-correction", opt_bias, "Adam bias correction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp &e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError &e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (*render_cmd) {
            auto scene = load_scene_file(render_opts.scene);
            auto img = render(scene, render_config(render_opts));
            write_pfm(render_out, img);
            if (!render_png.empty()) {
                write_png(render_png, img);
            }
            return kExitOk;
        }

        if (*grad_cmd) {
            auto scene = load_scene_file(grad_opts.scene);
            auto index = scene.registry().scalar_index(grad_param);
            if (!index) {
                throw UsageError("--param: \"" + grad_param + "\" is not a registered parameter scalar");
            }
            GradConfig cfg;
            cfg.render = render_config(grad_opts);
            cfg.edge_budget = {grad_edges, grad_secondary};
            auto img = gradient_image(scene, *index, cfg);
            write_pfm(grad_out, img);
            if (!grad_png.empty()) {
                write_signed_png(grad_png, img);
            }
            return kExitOk;
        }

        if (*fd_cmd) {
            auto scene = load_scene_file(fd_opts.scene);
            if (scene.registry().total_dim() == 0) {
                throw UsageError(fd_opts.scene + ": \"differentiable\" declares no parameters");
            }
            const auto &cam = scene.camera();
            auto target = fd_target.empty() ? ImageBuffer(cam.width, cam.height) : read_pfm(fd_target);
            GradConfig cfg;
            cfg.render = render_config(fd_opts);
            cfg.edge_budget = fd_no_edges ? EdgeSampleBudget{0, 0} : EdgeSampleBudget{fd_edges, fd_secondary};
            cfg.loss = fd_loss == "l1" ? LossKind::L1 : LossKind::L2;
            cfg.fd_step = fd_h;
            auto fd_cfg = cfg;
            if (fd_spp > 0) {
                fd_cfg.render.spp = fd_spp;
            }
            auto report = fd_check(scene, target, cfg, fd_cfg, fd_threshold);
            auto json = to_json(report);
            if (!fd_report.empty()) {
                write_text(fd_report, json + "\n");
            }
            out << json << "\n";
            err << "fd-check: aggregate relative L1 error " << report.aggregate << " (threshold " << fd_threshold
                << "): " << (report.passed ? "PASS" : "FAIL") << "\n";
            return report.passed ? kExitOk : kExitCheckFailed;
        }

        if (*opt_cmd) {
            auto scene = load_scene_file(opt_opts.scene);
            auto target = read_pfm(opt_target);
            OptimizeConfig cfg;
            cfg.iterations = opt_iters;
            cfg.learning_rate = opt_lr;
            cfg.method = opt_method == "sgd" ? Optimizer::Sgd : Optimizer::Adam;
            cfg.bias_correction = opt_bias;
            cfg.grad.render = render_config(opt_opts);
            cfg.grad.edge_budget = {opt_edges, opt_secondary};
            for (const auto &g : opt_groups) {
                auto eq = g.find('=');
                if (eq == std::string::npos) {
                    throw UsageError("--group-lr: expected path=rate, got \"" + g + "\"");
                }
                cfg.group_learning_rates[g.substr(0, eq)] = std::stod(g.substr(eq + 1));
            }
            std::filesystem::create_directories(opt_out_dir);
            auto dir = std::filesystem::path(opt_out_dir);
            std::ofstream log(dir / "trajectory.ndjson", std::ios::binary);
            if (!log) {
                throw ImageError((dir / "trajectory.ndjson").string() + ": cannot open for writing");
            }
            auto preview_config = cfg.grad.render;
            auto callback = [&](const IterationRecord &rec, const Scene &current) {
                log << trajectory_line(rec) << "\n";
                log.flush();
                if (opt_preview > 0 && (rec.iter + 1) % opt_preview == 0) {
                    std::ostringstream name;
                    name << "preview_" << std::setw(5) << std::setfill('0') << rec.iter + 1 << ".png";
                    write_png((dir / name.str()).string(), render(current, preview_config));
                }
            };
            auto result = optimize(scene, target, cfg, callback);
            write_text((dir / "final_scene.json").string(), save_scene(result.final_scene) + "\n");
            if (!result.trajectory.empty()) {
                err << "optimize: loss " << result.trajectory.front().loss << " -> " << result.trajectory.back().loss
                    << "\n";
            }
            return kExitOk;
        }
    } catch (const SceneError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const ImageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const UsageError &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::invalid_argument &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception &e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}

} // namespace edgetrace
