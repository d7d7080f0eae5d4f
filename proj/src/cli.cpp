#include "clpc/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "clpc/error.hpp"
#include "clpc/io.hpp"
#include "clpc/metrics.hpp"
#include "clpc/model.hpp"
#include "clpc/shapes.hpp"
#include "clpc/train.hpp"
#include "clpc/view.hpp"

namespace clpc {

namespace {

void check_known_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                      const std::string& scope) {
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw UsageError("config: unknown key '" + scope + key + "'");
    }
}

template <typename T>
void take(const nlohmann::json& j, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(std::string("config: bad value for '") + key + "'");
    }
}

TrainConfig config_from_json(const std::string& path, TrainConfig cfg) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError("config: parse error: " + std::string(e.what()));
    }
    check_known_keys(j, {"epochs", "batch_size", "n_syn_views", "n_out", "lr0",
                         "decay_factor", "decay_every", "weights", "consistency_mode",
                         "grid_resolution", "seed", "threads", "checkpoint_every",
                         "widths"},
                     "");
    take(j, "epochs", cfg.epochs);
    take(j, "batch_size", cfg.batch_size);
    take(j, "n_syn_views", cfg.n_syn_views);
    take(j, "n_out", cfg.n_out);
    take(j, "lr0", cfg.lr0);
    take(j, "decay_factor", cfg.decay_factor);
    take(j, "decay_every", cfg.decay_every);
    take(j, "grid_resolution", cfg.grid_resolution);
    take(j, "seed", cfg.seed);
    take(j, "threads", cfg.threads);
    take(j, "checkpoint_every", cfg.checkpoint_every);
    if (j.contains("weights")) {
        const auto& w = j.at("weights");
        check_known_keys(w, {"alpha", "beta", "lambda_cons"}, "weights.");
        take(w, "alpha", cfg.weights.alpha);
        take(w, "beta", cfg.weights.beta);
        take(w, "lambda_cons", cfg.weights.lambda_cons);
    }
    if (j.contains("widths")) {
        const auto& w = j.at("widths");
        check_known_keys(w, {"encoder", "decoder_hidden"}, "widths.");
        take(w, "encoder", cfg.widths.encoder);
        take(w, "decoder_hidden", cfg.widths.decoder_hidden);
    }
    if (j.contains("consistency_mode")) {
        std::string mode;
        take(j, "consistency_mode", mode);
        if (mode == "mse")
            cfg.consistency_mode = ConsistencyMode::mse;
        else if (mode == "chamfer")
            cfg.consistency_mode = ConsistencyMode::chamfer;
        else
            throw UsageError("config: consistency_mode must be 'mse' or 'chamfer'");
    }
    return cfg;
}

// Shared train/adapt flag set; values land in cfg only when the flag is used.
struct TrainFlags {
    std::optional<int> epochs, batch_size, n_syn_views, n_out, decay_every;
    std::optional<int> grid_resolution, threads, checkpoint_every;
    std::optional<double> lr0, decay_factor, alpha, beta, lambda_cons;
    std::optional<std::string> mode;
    std::optional<std::uint64_t> seed;

    void attach(CLI::App* cmd) {
        cmd->add_option("--epochs", epochs, "Training epochs");
        cmd->add_option("--batch-size", batch_size, "Samples per optimizer step");
        cmd->add_option("--views", n_syn_views, "Synthesized views per sample");
        cmd->add_option("--n-out", n_out, "Completion point count");
        cmd->add_option("--lr0", lr0, "Initial learning rate");
        cmd->add_option("--decay-factor", decay_factor, "Learning-rate decay factor");
        cmd->add_option("--decay-every", decay_every, "Epochs between decays");
        cmd->add_option("--alpha", alpha, "Completion->input distance weight");
        cmd->add_option("--beta", beta, "Input->completion distance weight");
        cmd->add_option("--lambda", lambda_cons, "Consistency weight");
        cmd->add_option("--mode", mode, "Consistency mode: mse or chamfer");
        cmd->add_option("--grid-res", grid_resolution, "View synthesis grid resolution");
        cmd->add_option("--seed", seed, "Master seed");
        cmd->add_option("--threads", threads, "Worker threads");
        cmd->add_option("--checkpoint-every", checkpoint_every,
                        "Epochs between checkpoints (0 = final only)");
    }

    void apply(TrainConfig& cfg) const {
        if (epochs) cfg.epochs = *epochs;
        if (batch_size) cfg.batch_size = *batch_size;
        if (n_syn_views) cfg.n_syn_views = *n_syn_views;
        if (n_out) cfg.n_out = *n_out;
        if (lr0) cfg.lr0 = *lr0;
        if (decay_factor) cfg.decay_factor = *decay_factor;
        if (decay_every) cfg.decay_every = *decay_every;
        if (alpha) cfg.weights.alpha = *alpha;
        if (beta) cfg.weights.beta = *beta;
        if (lambda_cons) cfg.weights.lambda_cons = *lambda_cons;
        if (grid_resolution) cfg.grid_resolution = *grid_resolution;
        if (seed) cfg.seed = *seed;
        if (threads) cfg.threads = *threads;
        if (checkpoint_every) cfg.checkpoint_every = *checkpoint_every;
        if (mode) {
            if (*mode == "mse")
                cfg.consistency_mode = ConsistencyMode::mse;
            else if (*mode == "chamfer")
                cfg.consistency_mode = ConsistencyMode::chamfer;
            else
                throw UsageError("--mode must be 'mse' or 'chamfer'");
        }
    }
};

// --data accepts either the manifest file or the directory holding it.
std::string resolve_manifest(const std::string& path) {
    if (std::filesystem::is_directory(path))
        return (std::filesystem::path(path) / "manifest.json").string();
    return path;
}

std::vector<PointCloud> dataset_partials(const std::string& manifest) {
    std::vector<LoadedSample> samples = load_dataset(resolve_manifest(manifest));
    std::vector<PointCloud> partials;
    partials.reserve(samples.size());
    for (LoadedSample& s : samples) partials.push_back(std::move(s.partial));
    return partials;
}

std::ofstream open_loss_log(const std::string& path, bool append) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
    if (!os) throw DataError("cannot open for writing: " + path);
    return os;
}

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"Self-supervised point cloud completion"};
    app.require_subcommand(1);

    // ---- gen-data ----
    auto* gen = app.add_subcommand("gen-data", "Generate a procedural toy dataset");
    std::string gen_out;
    ToyDatasetOptions gen_opts;
    std::string gen_kinds;
    gen->add_option("--out", gen_out, "Output directory")->required();
    gen->add_option("--shapes", gen_opts.n_shapes, "Number of shapes");
    gen->add_option("--views", gen_opts.views_per_shape, "Partial views per shape");
    gen->add_option("--partial-points", gen_opts.n_partial_points, "Points per partial");
    gen->add_option("--gt-points", gen_opts.n_gt_points, "Points per ground truth");
    gen->add_option("--grid-res", gen_opts.grid_resolution, "Depth grid resolution");
    gen->add_option("--seed", gen_opts.seed, "Dataset seed");
    gen->add_option("--kinds", gen_kinds,
                    "Comma-separated shape kinds (sphere,cuboid,cylinder,capsule)");

    // ---- train ----
    auto* tr = app.add_subcommand("train", "Train a completion model");
    std::string tr_data, tr_config, tr_out, tr_log, tr_resume, tr_save;
    TrainFlags tr_flags;
    tr->add_option("--data", tr_data, "Dataset manifest or directory")->required();
    tr->add_option("--config", tr_config, "JSON config file");
    tr->add_option("--out", tr_out, "Checkpoint directory");
    tr->add_option("--loss-log", tr_log, "Per-epoch loss log file");
    tr->add_option("--resume", tr_resume, "Checkpoint to resume from");
    tr->add_option("--save-model", tr_save, "Write final weights to this file");
    tr_flags.attach(tr);

    // ---- complete ----
    auto* co = app.add_subcommand("complete", "Complete a partial cloud");
    std::string co_model, co_in, co_out;
    co->add_option("--model,--ckpt", co_model, "Model or checkpoint file")->required();
    co->add_option("--input", co_in, "Partial cloud (.xyz/.ply)")->required();
    co->add_option("--output", co_out, "Completion output (.xyz/.ply)")->required();

    // ---- synth-view ----
    auto* sv = app.add_subcommand("synth-view", "Synthesize a partial view of a cloud");
    std::string sv_in, sv_out;
    std::optional<double> sv_az, sv_el;
    int sv_res = 64;
    std::size_t sv_n = 1024;
    std::uint64_t sv_seed = 0;
    sv->add_option("--input", sv_in, "Input cloud")->required();
    sv->add_option("--output", sv_out, "Output partial")->required();
    sv->add_option("--azimuth", sv_az, "Azimuth degrees [0,360)");
    sv->add_option("--elevation", sv_el, "Elevation degrees [-20,40]");
    sv->add_option("--grid-res", sv_res, "Depth grid resolution");
    sv->add_option("--n-out", sv_n, "Output point count");
    sv->add_option("--seed", sv_seed, "Seed (samples the view if angles omitted)");

    // ---- ttadapt ----
    auto* ta = app.add_subcommand("ttadapt", "Adapt pretrained weights to new partials");
    std::string ta_model, ta_data, ta_out, ta_config, ta_log;
    TrainFlags ta_flags;
    ta->add_option("--model,--ckpt", ta_model, "Pretrained model or checkpoint")->required();
    ta->add_option("--data", ta_data, "Dataset manifest or directory")->required();
    ta->add_option("--out", ta_out, "Adapted model output file")->required();
    ta->add_option("--config", ta_config, "JSON config file");
    ta->add_option("--loss-log", ta_log, "Per-epoch loss log file");
    ta_flags.attach(ta);

    // ---- eval ----
    auto* ev = app.add_subcommand("eval", "Evaluate a model over a dataset");
    std::string ev_model, ev_data, ev_report, ev_format;
    double ev_scale = 1.0;
    ev->add_option("--model,--ckpt", ev_model, "Model or checkpoint file")->required();
    ev->add_option("--data", ev_data, "Dataset manifest or directory")->required();
    ev->add_option("--report", ev_report, "Report file (.csv or .json)");
    ev->add_option("--format", ev_format, "Report format: csv or json");
    ev->add_option("--scale", ev_scale, "Multiply reported distances");

    std::vector<const char*> argv;
    argv.push_back("clpc");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e); // prints help/diagnostic; 0 for --help
    }

    if (gen->parsed()) {
        if (!gen_kinds.empty()) {
            gen_opts.kinds.clear();
            std::stringstream ss(gen_kinds);
            std::string item;
            while (std::getline(ss, item, ',')) {
                if (!item.empty()) gen_opts.kinds.push_back(shape_kind_from_name(item));
            }
            if (gen_opts.kinds.empty()) throw UsageError("--kinds: no shape kinds given");
        }
        build_toy_dataset(gen_opts, gen_out);
        return 0;
    }

    if (tr->parsed()) {
        TrainConfig cfg;
        if (!tr_config.empty()) cfg = config_from_json(tr_config, cfg);
        tr_flags.apply(cfg);
        std::vector<PointCloud> partials = dataset_partials(tr_data);
        std::optional<std::ofstream> log;
        if (!tr_log.empty()) log = open_loss_log(tr_log, !tr_resume.empty());
        TrainHooks hooks;
        if (log) {
            hooks.on_epoch = [&](const EpochStats& s) {
                *log << format_epoch_line(s) << '\n';
                log->flush();
            };
        }
        TrainResult result =
            train(partials, cfg,
                  tr_resume.empty() ? std::nullopt : std::make_optional(tr_resume),
                  tr_out.empty() ? std::nullopt : std::make_optional(tr_out), hooks);
        if (!tr_save.empty()) save_params(result.params, tr_save);
        return 0;
    }

    if (co->parsed()) {
        const ModelParams params = load_params(co_model);
        const PointCloud input = read_cloud(co_in);
        write_cloud(forward_complete(params, input), co_out);
        return 0;
    }

    if (sv->parsed()) {
        if (static_cast<bool>(sv_az) != static_cast<bool>(sv_el))
            throw UsageError("give both --azimuth and --elevation, or neither");
        const PointCloud input = read_cloud(sv_in);
        SeededRng rng(sv_seed);
        ViewParams view;
        if (sv_az) {
            view.azimuth_deg = *sv_az;
            view.elevation_deg = *sv_el;
            view.grid_resolution = sv_res;
        } else {
            view = sample_view(rng, sv_res);
        }
        write_cloud(synthesize_partial(input, view, sv_n, rng), sv_out);
        return 0;
    }

    if (ta->parsed()) {
        TrainConfig cfg;
        cfg.epochs = 30; // adaptation default; override with --epochs
        if (!ta_config.empty()) cfg = config_from_json(ta_config, cfg);
        ta_flags.apply(cfg);
        const ModelParams pretrained = load_params(ta_model);
        cfg.n_out = pretrained.n_out;
        std::vector<PointCloud> partials = dataset_partials(ta_data);
        std::optional<std::ofstream> log;
        if (!ta_log.empty()) log = open_loss_log(ta_log, false);
        TrainHooks hooks;
        if (log) {
            hooks.on_epoch = [&](const EpochStats& s) {
                *log << format_epoch_line(s) << '\n';
                log->flush();
            };
        }
        TrainResult result = test_time_adapt(pretrained, partials, cfg, hooks);
        save_params(result.params, ta_out);
        return 0;
    }

    if (ev->parsed()) {
        const ModelParams params = load_params(ev_model);
        const std::vector<LoadedSample> loaded = load_dataset(resolve_manifest(ev_data));
        std::vector<EvalSample> samples;
        samples.reserve(loaded.size());
        for (const LoadedSample& s : loaded)
            samples.push_back({s.id, s.partial, s.ground_truth});
        const DatasetMetrics metrics = evaluate_dataset(params, samples, ev_scale);

        std::string format = ev_format;
        if (format.empty()) {
            if (ev_report.ends_with(".json"))
                format = "json";
            else
                format = "csv";
        }
        std::string body;
        if (format == "csv")
            body = metrics_csv(metrics);
        else if (format == "json")
            body = metrics_json(metrics);
        else
            throw UsageError("--format must be 'csv' or 'json'");
        if (ev_report.empty()) {
            std::cout << body;
        } else {
            std::ofstream os(ev_report);
            if (!os) throw DataError("cannot open for writing: " + ev_report);
            os << body;
            if (!os) throw DataError("write failed: " + ev_report);
        }
        return 0;
    }

    throw UsageError("no subcommand given");
}

} // namespace

int run_cli(const std::vector<std::string>& args) {
    try {
        return dispatch(args);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}

} // namespace clpc
