// Command-line entry points: dataset generation, training, rendering,
// evaluation, and the gradient-check suite. Exit codes: 0 success, 1 runtime
// failure, 2 usage or config error.

#include "sgs/checkpoint.hpp"
#include "sgs/eval.hpp"
#include "sgs/gradcheck.hpp"
#include "sgs/parallel.hpp"
#include "sgs/png_io.hpp"
#include "sgs/trainer.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace sgs;

namespace {

int cmd_generate(const std::string& config_path, const std::string& out_dir, uint64_t seed) {
    TrajectoryConfig cfg =
        config_path.empty() ? TrajectoryConfig{} : TrajectoryConfig::from_file(config_path);
    TargetMesh mesh = make_satellite_mesh();
    generate_dataset(mesh, cfg, out_dir, seed);
    std::cout << "dataset written to " << out_dir << " (" << cfg.n_frames << " train + "
              << cfg.n_holdout << " holdout + " << cfg.n_eval << " eval frames)\n";
    return 0;
}

void write_checkpoint_from_trainer(const std::string& path, const Trainer& trainer,
                                   int frames_consumed) {
    Checkpoint ckpt;
    ckpt.cloud = trainer.cloud();
    ckpt.phi = trainer.phi();
    ckpt.psi = trainer.psi();
    ckpt.config = trainer.config();
    ckpt.rounds_done = trainer.rounds_done();
    ckpt.frames_consumed = frames_consumed;
    for (const auto& kf : trainer.window().frames()) ckpt.final_window_ids.push_back(kf.frame_id);
    ckpt.scene_radius = trainer.scene_radius();
    save_checkpoint(path, ckpt);
}

int cmd_train(const std::string& dataset_dir, const std::string& config_path,
              const std::string& out_dir, const std::string& resume_path) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
    Manifest manifest = load_manifest(dataset_dir);
    fs::create_directories(out_dir);

    std::ofstream log(fs::path(out_dir) / "train_log.ndjson");
    if (!log) fail("IoError", "cannot open training log");

    std::unique_ptr<Trainer> trainer;
    size_t start_index = 0;
    if (!resume_path.empty()) {
        Checkpoint ckpt = load_checkpoint(resume_path);
        cfg = ckpt.config;
        trainer = std::make_unique<Trainer>(cfg, manifest.intrinsics, GaussianCloud{});
        trainer->restore(std::move(ckpt.cloud), std::move(ckpt.phi), std::move(ckpt.psi),
                         ckpt.rounds_done);
        start_index = size_t(std::max(0, ckpt.frames_consumed));
    } else {
        Rng sample_rng = Rng::stream(cfg.seed, 1);
        Rng init_rng = Rng::stream(cfg.seed, 2);
        TargetMesh mesh = make_satellite_mesh();
        auto points = sample_surface(mesh, size_t(cfg.n_init), sample_rng);
        trainer = std::make_unique<Trainer>(cfg, manifest.intrinsics,
                                            initialize_cloud(points, init_rng));
    }

    int64_t steps = 0;
    trainer->on_step = [&](const StepRecord& rec) {
        ++steps;
        json j = {{"type", "step"},
                  {"round", rec.round},
                  {"frame_id", rec.frame_id},
                  {"loss_total", rec.loss_total},
                  {"loss_l1", rec.loss_l1},
                  {"loss_ssim", rec.loss_ssim},
                  {"loss_iso", rec.loss_iso},
                  {"gaussian_count", rec.gaussian_count},
                  {"lr", rec.lr}};
        log << j.dump() << "\n";
    };
    trainer->on_round = [&](int64_t round, const std::vector<KeyframeEntry>& frames) {
        json ids = json::array(), views = json::array();
        for (const auto& kf : frames) {
            ids.push_back(kf.frame_id);
            views.push_back({kf.view_dir.x(), kf.view_dir.y(), kf.view_dir.z()});
        }
        log << json{{"type", "round_window"}, {"round", round}, {"frame_ids", ids},
                    {"views", views}}
                   .dump()
            << "\n";
    };
    int frames_done = int(start_index);
    trainer->on_round_complete = [&](int64_t round) {
        if (cfg.checkpoint_interval_rounds > 0 && round % cfg.checkpoint_interval_rounds == 0) {
            write_checkpoint_from_trainer(
                (fs::path(out_dir) / ("checkpoint_" + std::to_string(round) + ".sgsc")).string(),
                *trainer, frames_done);
        }
    };

    const auto t0 = std::chrono::steady_clock::now();
    // Stream frames manually so the periodic checkpoints see the frame count.
    if (manifest.frames.empty()) fail("EmptyDataset", "manifest has no frames");
    bool any_train_frame = false;
    for (size_t i = start_index; i < manifest.frames.size(); ++i) {
        if (manifest.holdout_start >= 0 && manifest.frames[i].id >= manifest.holdout_start)
            continue;
        any_train_frame = true;
        CameraFrame frame = load_frame(dataset_dir, manifest, i);
        frames_done = int(i) + 1;
        trainer->ingest(frame);
    }
    if (!any_train_frame && resume_path.empty()) fail("EmptyDataset", "no training frames");
    double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    log << json{{"type", "summary"},
                {"rounds", trainer->rounds_done()},
                {"steps", steps},
                {"wall_seconds", wall},
                {"steps_per_sec", wall > 0 ? double(steps) / wall : 0.0},
                {"gaussian_count", trainer->cloud().size()}}
               .dump()
        << "\n";

    write_checkpoint_from_trainer((fs::path(out_dir) / "checkpoint_final.sgsc").string(), *trainer,
                                  frames_done);
    std::cout << "trained " << trainer->rounds_done() << " rounds (" << steps << " steps) in "
              << wall << " s; checkpoint at " << (fs::path(out_dir) / "checkpoint_final.sgsc")
              << "\n";
    return 0;
}

Image error_heat(const Image& a, const Image& b) {
    Image heat(a.height, a.width, 1);
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x) {
            double e = 0;
            for (int c = 0; c < a.channels; ++c) e += std::abs(a.at(y, x, c) - b.at(y, x, c));
            heat.at(y, x, 0) = std::min(1.0, e / a.channels * 4.0);
        }
    return heat;
}

int cmd_render(const std::string& ckpt_path, const std::string& dataset_dir,
               std::vector<int> frame_ids, const std::vector<double>& pose_spec,
               const std::vector<double>& sun_spec, const std::string& out_dir,
               bool side_by_side, bool dump_shadow) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    fs::create_directories(out_dir);

    PipelineOptions opts;
    opts.use_appearance_mlp = ckpt.config.use_appearance_mlp();
    opts.use_shadow = ckpt.config.use_shadow();
    opts.encoding_freqs = ckpt.config.encoding_freqs;
    opts.scene_radius = ckpt.scene_radius;

    struct Job {
        std::string name;
        RigidTransform pose;
        Vec3 sun;
        Image gt;
        bool has_gt = false;
    };
    std::vector<Job> jobs;
    Pinhole K{160, 160, 64, 64, 128, 128};

    if (!dataset_dir.empty()) {
        Manifest manifest = load_manifest(dataset_dir);
        K = manifest.intrinsics;
        for (size_t i = 0; i < manifest.frames.size(); ++i) {
            const auto& f = manifest.frames[i];
            if (!frame_ids.empty() &&
                std::find(frame_ids.begin(), frame_ids.end(), f.id) == frame_ids.end())
                continue;
            CameraFrame cf = load_frame(dataset_dir, manifest, i);
            Job job;
            char buf[32];
            std::snprintf(buf, sizeof(buf), "%06d", f.id);
            job.name = buf;
            job.pose = cf.pose;
            job.sun = cf.sun_obj;
            job.gt = cf.image;
            job.has_gt = true;
            jobs.push_back(std::move(job));
        }
        if (jobs.empty()) fail("ConfigError", "no frames matched the requested ids");
    } else {
        if (pose_spec.size() != 7 || sun_spec.size() != 3)
            fail("ConfigError", "--pose needs 7 numbers (qw qx qy qz tx ty tz), --sun needs 3");
        Job job;
        job.name = "render";
        job.pose = {Quat{pose_spec[0], pose_spec[1], pose_spec[2], pose_spec[3]}.normalized(),
                    Vec3(pose_spec[4], pose_spec[5], pose_spec[6])};
        job.sun = Vec3(sun_spec[0], sun_spec[1], sun_spec[2]).normalized();
        jobs.push_back(std::move(job));
    }

    for (const auto& job : jobs) {
        double d_sun = job.pose.center_in_object().norm();
        opts.d_sun = d_sun > 1e-9 ? d_sun : 1.0;
        ForwardPass fwd =
            pipeline_forward(ckpt.cloud, ckpt.phi, ckpt.psi, job.pose, job.sun, K, opts);
        write_png((fs::path(out_dir) / (job.name + ".png")).string(), fwd.final_image);
        if (side_by_side && job.has_gt) {
            write_png((fs::path(out_dir) / (job.name + "_gt.png")).string(), job.gt);
            write_png((fs::path(out_dir) / (job.name + "_err.png")).string(),
                      error_heat(fwd.final_image, job.gt));
        }
        if (dump_shadow && opts.use_shadow && fwd.frame.size() > 0) {
            MatXR raw(long(fwd.frame.size()), 1), refined(long(fwd.frame.size()), 1);
            for (size_t i = 0; i < fwd.frame.size(); ++i) {
                raw(long(i), 0) = fwd.vis_raw[i];
                refined(long(i), 0) = fwd.vis_refined[i];
            }
            write_png((fs::path(out_dir) / (job.name + "_v.png")).string(),
                      rasterize_forward(fwd.frame, raw, 1.0).color);
            write_png((fs::path(out_dir) / (job.name + "_vprime.png")).string(),
                      rasterize_forward(fwd.frame, refined, 1.0).color);
            write_png((fs::path(out_dir) / (job.name + "_shadow.png")).string(),
                      fwd.shadow_image);
        }
    }
    std::cout << "rendered " << jobs.size() << " view(s) into " << out_dir << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dataset_dir,
             const std::string& split, const std::string& out_dir) {
    Checkpoint ckpt = load_checkpoint(ckpt_path);
    EvalReport report = evaluate_checkpoint(ckpt, dataset_dir, split);
    std::cout << report.to_table();
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        std::ofstream j(fs::path(out_dir) / ("eval_" + split + ".json"));
        j << report.to_json() << "\n";
        std::ofstream t(fs::path(out_dir) / ("eval_" + split + ".txt"));
        t << report.to_table();
    }
    return 0;
}

int cmd_gradcheck(uint64_t seed, bool corrupt) {
    auto results = run_gradcheck(seed, corrupt);
    bool all_pass = true;
    for (const auto& r : results) {
        std::printf("%-22s %-5s max_rel_err=%.3e checked=%d skipped=%d\n", r.name.c_str(),
                    r.pass ? "PASS" : "FAIL", r.max_rel_err, r.checked, r.skipped);
        all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Sun-conditioned Gaussian splatting trainer for desk-scale RPO scenes"};
    app.require_subcommand(1);

    int threads = 0;
    app.add_option("--threads", threads, "Worker thread cap (default: hardware)");

    std::string config_path, out_dir, dataset_dir, ckpt_path, resume_path, split = "holdout";
    uint64_t seed = 1;
    std::vector<int> frame_ids;
    std::vector<double> pose_spec, sun_spec;
    bool side_by_side = false, dump_shadow = false, corrupt = false;

    auto* gen = app.add_subcommand("generate", "Render a synthetic dataset");
    gen->add_option("--config", config_path, "Trajectory config JSON");
    gen->add_option("--out", out_dir, "Output dataset directory")->required();
    gen->add_option("--seed", seed, "RNG seed");

    auto* train = app.add_subcommand("train", "Train on a dataset stream");
    train->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    train->add_option("--config", config_path, "Run config JSON");
    train->add_option("--out", out_dir, "Output directory")->required();
    train->add_option("--resume", resume_path, "Checkpoint to resume from");

    auto* render = app.add_subcommand("render", "Render views from a checkpoint");
    render->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    render->add_option("--dataset", dataset_dir, "Dataset dir (poses from its manifest)");
    render->add_option("--frame", frame_ids, "Frame id(s) to render (default: all)");
    render->add_option("--pose", pose_spec, "qw qx qy qz tx ty tz (object-to-camera)");
    render->add_option("--sun", sun_spec, "Sun direction, object frame");
    render->add_option("--out", out_dir, "Output directory")->required();
    render->add_flag("--side-by-side", side_by_side, "Also write ground truth + |error| images");
    render->add_flag("--dump-shadow", dump_shadow, "Dump V, V', and the shadow image");

    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
    eval->add_option("--checkpoint", ckpt_path, "Checkpoint file")->required();
    eval->add_option("--dataset", dataset_dir, "Dataset directory")->required();
    eval->add_option("--split", split, "train-window | holdout | random-pose");
    eval->add_option("--out", out_dir, "Report output directory");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient validation");
    gc->add_option("--seed", seed, "RNG seed");
    gc->add_flag("--corrupt", corrupt, "Inject a gradient error (negative control)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (threads > 0) set_max_threads(threads);

    try {
        if (gen->parsed()) return cmd_generate(config_path, out_dir, seed);
        if (train->parsed()) return cmd_train(dataset_dir, config_path, out_dir, resume_path);
        if (render->parsed())
            return cmd_render(ckpt_path, dataset_dir, frame_ids, pose_spec, sun_spec, out_dir,
                              side_by_side, dump_shadow);
        if (eval->parsed()) return cmd_eval(ckpt_path, dataset_dir, split, out_dir);
        if (gc->parsed()) return cmd_gradcheck(seed, corrupt);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.kind() == "ConfigError" ? 2 : 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
