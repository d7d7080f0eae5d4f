// Acceptance gate: ten behavioral criteria, each printing one PASS/FAIL line.
// Heavy criteria cache their trained models under the work directory so a
// populated cache re-verifies in seconds; a clean tree retrains everything.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <limits>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "clpc/error.hpp"
#include "clpc/io.hpp"
#include "clpc/loss.hpp"
#include "clpc/metrics.hpp"
#include "clpc/model.hpp"
#include "clpc/rng.hpp"
#include "clpc/shapes.hpp"
#include "clpc/train.hpp"
#include "clpc/view.hpp"

using namespace clpc;
namespace fs = std::filesystem;

namespace {

// ---- pinned tolerances and scales ----
constexpr double kOracleTol = 1e-12;        // criterion 1
constexpr int kOraclePairs = 200;
constexpr double kFdStep = 1e-5;            // criterion 2
constexpr double kFdTol = 1e-4;
constexpr int kFdInstances = 20;
constexpr int kFdRedraws = 4;
constexpr int kPermPartials = 100;          // criterion 4
constexpr int kPermShuffles = 10;
constexpr double kFrontFacingMin = 0.95;    // criterion 5
constexpr double kCoverageRatioMax = 0.7;   // criterion 6
constexpr double kCollapseRatioMax = 0.10;  // criterion 7b
constexpr double kViewCountSpreadMax = 0.25; // criterion 8
constexpr double kAdaptImprovementMin = 0.10; // criterion 9

struct Ctx {
    fs::path work;
    bool verbose = false;
};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, ...) {
    va_list ap;
    va_start(ap, f);
    char buf[512];
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double now_sec() {
    return std::chrono::duration<double>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

PointCloud random_cloud(SeededRng& rng, std::size_t n, double half = 0.5) {
    PointCloud c(n);
    for (Point3& p : c)
        p = {rng.uniform(-half, half), rng.uniform(-half, half), rng.uniform(-half, half)};
    return c;
}

// ---- dataset / model cache ----

std::string ensure_dataset(const Ctx& ctx, const std::string& tag,
                           const ToyDatasetOptions& opts) {
    const fs::path dir = ctx.work / "data" / tag;
    const fs::path manifest = dir / "manifest.json";
    if (!fs::exists(manifest)) build_toy_dataset(opts, dir.string());
    return manifest.string();
}

ToyDatasetOptions desk_train_opts() {
    ToyDatasetOptions o;
    o.n_shapes = 40;
    o.views_per_shape = 5;
    o.n_partial_points = 1024;
    o.n_gt_points = 2048;
    o.seed = 101;
    return o;
}

ToyDatasetOptions desk_heldout_opts() {
    ToyDatasetOptions o;
    o.n_shapes = 10;
    o.views_per_shape = 1;
    o.n_partial_points = 1024;
    o.n_gt_points = 2048;
    o.seed = 202;
    return o;
}

TrainConfig desk_config() {
    TrainConfig cfg; // defaults carry the production hyperparameters
    cfg.epochs = 200;
    cfg.seed = 7;
    cfg.threads = 1;
    return cfg;
}

// Trains once per tag; later invocations reuse the saved weights.
ModelParams ensure_model(const Ctx& ctx, const std::string& tag, const TrainConfig& cfg,
                         const std::string& manifest, double* train_sec) {
    const fs::path path = ctx.work / "runs" / (tag + ".bin");
    const fs::path sec_path = ctx.work / "runs" / (tag + ".sec");
    if (fs::exists(path)) {
        if (train_sec) {
            *train_sec = -1.0;
            std::ifstream is(sec_path);
            if (is) is >> *train_sec;
        }
        return load_params(path.string());
    }
    std::vector<LoadedSample> samples = load_dataset(manifest);
    std::vector<PointCloud> partials;
    partials.reserve(samples.size());
    for (LoadedSample& s : samples) partials.push_back(std::move(s.partial));
    TrainHooks hooks;
    if (ctx.verbose) {
        hooks.on_epoch = [&](const EpochStats& s) {
            std::fprintf(stderr, "[%s] %s\n", tag.c_str(), format_epoch_line(s).c_str());
        };
    }
    const double t0 = now_sec();
    const TrainResult result = train(partials, cfg, std::nullopt, std::nullopt, hooks);
    const double sec = now_sec() - t0;
    save_params(result.params, path.string());
    std::ofstream(sec_path) << fmt("%.1f", sec);
    if (train_sec) *train_sec = sec;
    return result.params;
}

// ---- metric helpers over a held-out dataset ----

std::vector<LoadedSample> heldout_samples(const Ctx& ctx) {
    return load_dataset(ensure_dataset(ctx, "heldout10", desk_heldout_opts()));
}

double mean_coverage(const ModelParams& params, const std::vector<LoadedSample>& held) {
    double acc = 0.0;
    for (const LoadedSample& s : held)
        acc += *chamfer_eval(forward_complete(params, s.partial), *s.ground_truth).coverage;
    return acc / static_cast<double>(held.size());
}

double baseline_coverage(const std::vector<LoadedSample>& held, int n_out) {
    double acc = 0.0;
    for (std::size_t i = 0; i < held.size(); ++i) {
        SeededRng rng(5000 + i);
        PointCloud resampled(static_cast<std::size_t>(n_out));
        for (Point3& p : resampled) p = held[i].partial[rng.index(held[i].partial.size())];
        acc += *chamfer_eval(resampled, *held[i].ground_truth).coverage;
    }
    return acc / static_cast<double>(held.size());
}

double mean_cd(const ModelParams& params, const std::vector<LoadedSample>& held) {
    double acc = 0.0;
    for (const LoadedSample& s : held)
        acc += *chamfer_eval(forward_complete(params, s.partial), *s.ground_truth).cd;
    return acc / static_cast<double>(held.size());
}

double mean_wcd(const ModelParams& params, const std::vector<PointCloud>& partials,
                const LossWeights& w) {
    double acc = 0.0;
    for (const PointCloud& p : partials)
        acc += weighted_chamfer(forward_complete(params, p), p, w);
    return acc / static_cast<double>(partials.size());
}

double mean_pairwise_distance(const PointCloud& cloud) {
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (std::size_t j = i + 1; j < cloud.size(); ++j) {
            const double dx = cloud[i].x - cloud[j].x;
            const double dy = cloud[i].y - cloud[j].y;
            const double dz = cloud[i].z - cloud[j].z;
            acc += std::sqrt(dx * dx + dy * dy + dz * dz);
            ++n;
        }
    return acc / static_cast<double>(n);
}

// ---- criterion 1: kd-tree metrics vs brute-force double loops ----

void brute_min_dists(const PointCloud& from, const PointCloud& to,
                     std::vector<double>& out) {
    out.resize(from.size());
    for (std::size_t i = 0; i < from.size(); ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (const Point3& q : to) {
            const double dx = from[i].x - q.x;
            const double dy = from[i].y - q.y;
            const double dz = from[i].z - q.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
        }
        out[i] = std::sqrt(best);
    }
}

Outcome criterion_1(const Ctx&) {
    const double t0 = now_sec();
    SeededRng rng(11);
    LossWeights w;
    double max_diff = 0.0;
    std::vector<double> ab, ba;
    for (int k = 0; k < kOraclePairs; ++k) {
        const PointCloud a = random_cloud(rng, 1 + rng.index(512), rng.uniform(0.2, 2.0));
        const PointCloud b = random_cloud(rng, 1 + rng.index(512), rng.uniform(0.2, 2.0));
        brute_min_dists(a, b, ab);
        brute_min_dists(b, a, ba);
        double mean_ab = 0.0, mean_ba = 0.0, max_ba = 0.0;
        for (double d : ab) mean_ab += d;
        mean_ab /= static_cast<double>(ab.size());
        for (double d : ba) {
            mean_ba += d;
            max_ba = std::max(max_ba, d);
        }
        mean_ba /= static_cast<double>(ba.size());

        const MetricsReport ev = chamfer_eval(a, b);
        max_diff = std::max(max_diff, std::abs(*ev.precision - mean_ab));
        max_diff = std::max(max_diff, std::abs(*ev.coverage - mean_ba));
        max_diff = std::max(max_diff, std::abs(*ev.cd - (mean_ab + mean_ba)));
        max_diff = std::max(
            max_diff, std::abs(weighted_chamfer(a, b, w) -
                               (w.alpha * mean_ab + w.beta * mean_ba)));
        max_diff = std::max(max_diff, std::abs(unidirectional_chamfer(b, a) - mean_ba));
        max_diff = std::max(max_diff, std::abs(unidirectional_hausdorff(b, a) - max_ba));
    }
    const double sec = now_sec() - t0;
    const bool pass = max_diff < kOracleTol && sec < 30.0;
    return {pass, fmt("%d pairs, max |kd - brute| = %.3g (tol %.0e), %.1f s", kOraclePairs,
                      max_diff, kOracleTol, sec)};
}

// ---- criteria 2/3 shared: tiny instances and finite differences ----

struct TinyInstance {
    TrainConfig cfg;
    ModelParams params;
    PointCloud partial;
    std::uint64_t rng_seed = 0;
};

TinyInstance make_tiny(std::uint64_t salt) {
    TinyInstance t;
    t.cfg.epochs = 1;
    t.cfg.batch_size = 1;
    t.cfg.n_syn_views = 2;
    t.cfg.n_out = 8;
    t.cfg.grid_resolution = 8;
    t.cfg.widths.encoder = {6, 8};
    t.cfg.widths.decoder_hidden = {10};
    SeededRng init(mix64(salt, 0xACCE));
    t.params = init_model(t.cfg.n_out, init, t.cfg.widths);
    SeededRng crng(mix64(salt, 0xC10D));
    t.partial = random_cloud(crng, 6);
    t.rng_seed = mix64(salt, 0x5EED);
    return t;
}

// Re-synthesizes the fixed view inputs from the completion, replicating the
// per-view draw order (azimuth, elevation, resample indices).
std::vector<PointCloud> materialize_views(const PointCloud& completion,
                                          std::size_t n_partial, const TrainConfig& cfg,
                                          std::uint64_t rng_seed) {
    SeededRng rng(rng_seed);
    std::vector<PointCloud> views;
    for (int v = 0; v < cfg.n_syn_views; ++v) {
        const ViewParams view = sample_view(rng, cfg.grid_resolution);
        const auto idx = synthesize_partial_indices(completion, view, n_partial, rng);
        PointCloud pv(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) pv[i] = completion[idx[i]];
        views.push_back(std::move(pv));
    }
    return views;
}

enum class SweepVerdict { ok, kink, fail };

struct SweepResult {
    SweepVerdict verdict = SweepVerdict::ok;
    double max_rel = 0.0;
    int n_params = 0;
    std::string detail;
};

// Central differences over every parameter. A mismatch is re-estimated at two
// smaller steps: estimates that disagree with each other flag a kink or a
// nearest-neighbor switch straddling the step (instance gets redrawn);
// step-stable estimates that still disagree with the analytic value fail.
SweepResult fd_sweep(ModelParams& params, const ParamStack& grads,
                     const std::function<double(const ModelParams&)>& objective) {
    SweepResult res;
    auto sweep_tensor = [&](Eigen::MatrixXd& tensor, const Eigen::MatrixXd& grad,
                            const char* name) {
        for (Eigen::Index r = 0; r < tensor.rows(); ++r)
            for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
                ++res.n_params;
                const double saved = tensor(r, c);
                auto fd_at = [&](double h) {
                    tensor(r, c) = saved + h;
                    const double up = objective(params);
                    tensor(r, c) = saved - h;
                    const double dn = objective(params);
                    tensor(r, c) = saved;
                    return (up - dn) / (2.0 * h);
                };
                const double fd = fd_at(kFdStep);
                const double scale = std::max(1.0, std::max(std::abs(fd),
                                                            std::abs(grad(r, c))));
                const double rel = std::abs(grad(r, c) - fd) / scale;
                res.max_rel = std::max(res.max_rel, rel);
                if (rel <= kFdTol) continue;
                // Only a step-stable estimate can convict the analytic value; an
                // estimate that moves with the step straddles a kink or switch.
                const double fd2 = fd_at(3e-6);
                const double fd3 = fd_at(1e-6);
                if (std::max(std::abs(fd - fd2), std::abs(fd2 - fd3)) > kFdTol * scale) {
                    res.verdict = SweepVerdict::kink;
                    return false;
                }
                res.verdict = SweepVerdict::fail;
                res.detail = fmt("%s(%ld,%ld): analytic %.6g vs fd %.6g", name,
                                 static_cast<long>(r), static_cast<long>(c), grad(r, c),
                                 fd);
                return false;
            }
        return true;
    };
    auto sweep_vector = [&](Eigen::VectorXd& vec, const Eigen::VectorXd& grad,
                            const char* name) {
        for (Eigen::Index r = 0; r < vec.rows(); ++r) {
            ++res.n_params;
            const double saved = vec(r);
            auto fd_at = [&](double h) {
                vec(r) = saved + h;
                const double up = objective(params);
                vec(r) = saved - h;
                const double dn = objective(params);
                vec(r) = saved;
                return (up - dn) / (2.0 * h);
            };
            const double fd = fd_at(kFdStep);
            const double scale =
                std::max(1.0, std::max(std::abs(fd), std::abs(grad(r))));
            const double rel = std::abs(grad(r) - fd) / scale;
            res.max_rel = std::max(res.max_rel, rel);
            if (rel <= kFdTol) continue;
            const double fd2 = fd_at(3e-6);
            const double fd3 = fd_at(1e-6);
            if (std::max(std::abs(fd - fd2), std::abs(fd2 - fd3)) > kFdTol * scale) {
                res.verdict = SweepVerdict::kink;
                return false;
            }
            res.verdict = SweepVerdict::fail;
            res.detail = fmt("%s(%ld): analytic %.6g vs fd %.6g", name,
                             static_cast<long>(r), grad(r), fd);
            return false;
        }
        return true;
    };
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        if (!sweep_tensor(params.encoder[l].weight, grads.encoder[l].weight, "enc.w"))
            return res;
        if (!sweep_vector(params.encoder[l].bias, grads.encoder[l].bias, "enc.b"))
            return res;
    }
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        if (!sweep_tensor(params.decoder[l].weight, grads.decoder[l].weight, "dec.w"))
            return res;
        if (!sweep_vector(params.decoder[l].bias, grads.decoder[l].bias, "dec.b"))
            return res;
    }
    return res;
}

Outcome criterion_2(const Ctx&) {
    const double t0 = now_sec();
    double max_rel = 0.0;
    int redraws = 0;
    int n_params = 0;
    for (int inst = 0; inst < kFdInstances; ++inst) {
        bool accepted = false;
        for (int attempt = 0; attempt < kFdRedraws && !accepted; ++attempt) {
            TinyInstance t = make_tiny(mix64(static_cast<std::uint64_t>(inst),
                                             static_cast<std::uint64_t>(attempt)));
            SeededRng rng(t.rng_seed);
            ParamStack grads = zeros_like(t.params);
            const LoopSampleResult res = closed_loop_forward(t.params, t.partial, t.cfg, rng, &grads);
            const std::vector<PointCloud> views =
                materialize_views(res.completion, t.partial.size(), t.cfg, t.rng_seed);
            const PointCloud target = res.completion;
            auto objective = [&](const ModelParams& q) {
                std::vector<PointCloud> vc;
                vc.reserve(views.size());
                for (const PointCloud& pv : views) vc.push_back(forward_complete(q, pv));
                return t.cfg.weights.lambda_cons * consistency_mse(vc, target) +
                       weighted_chamfer(forward_complete(q, t.partial), t.partial,
                                        t.cfg.weights);
            };
            const SweepResult sw = fd_sweep(t.params, grads, objective);
            if (sw.verdict == SweepVerdict::fail)
                return {false, fmt("instance %d: %s", inst, sw.detail.c_str())};
            if (sw.verdict == SweepVerdict::kink) {
                ++redraws;
                continue;
            }
            accepted = true;
            max_rel = std::max(max_rel, sw.max_rel);
            n_params = sw.n_params;
        }
        if (!accepted)
            return {false, fmt("instance %d: nondifferentiable in %d consecutive draws",
                               inst, kFdRedraws)};
    }
    const double sec = now_sec() - t0;
    const bool pass = sec < 120.0;
    return {pass, fmt("%d instances x %d parameters, max relative error %.3g "
                      "(tol %.0e), %d redraws, %.1f s",
                      kFdInstances, n_params, max_rel, kFdTol, redraws, sec)};
}

Outcome criterion_3(const Ctx&) {
    for (int attempt = 0; attempt < kFdRedraws; ++attempt) {
        TinyInstance t = make_tiny(mix64(0xDE7A, static_cast<std::uint64_t>(attempt)));

        // (a) Freezing vs not freezing the consistency target changes gradients.
        SeededRng r1(t.rng_seed), r2(t.rng_seed);
        ParamStack g_frozen = zeros_like(t.params), g_live = zeros_like(t.params);
        const LoopSampleResult res = closed_loop_forward(t.params, t.partial, t.cfg, r1, &g_frozen);
        LoopOptions live_opts;
        live_opts.live_consistency_target = true;
        closed_loop_forward(t.params, t.partial, t.cfg, r2, &g_live, 1.0, nullptr, live_opts);
        double diff = 0.0;
        for (std::size_t l = 0; l < g_frozen.encoder.size(); ++l)
            diff = std::max(diff, (g_frozen.encoder[l].weight - g_live.encoder[l].weight)
                                      .cwiseAbs()
                                      .maxCoeff());
        if (diff <= 1e-9)
            return {false, fmt("frozen and live target gradients agree (max diff %.3g); "
                               "the target branch is contributing nothing either way",
                               diff)};

        const std::vector<PointCloud> views =
            materialize_views(res.completion, t.partial.size(), t.cfg, t.rng_seed);
        const PointCloud target = res.completion;

        // (b) With the input-distance term off, the default gradient must equal
        // finite differences of the objective in which the target is a constant:
        // zero flow through the target branch.
        TrainConfig cons_only = t.cfg;
        cons_only.weights.alpha = 0.0;
        cons_only.weights.beta = 0.0;
        SeededRng r3(t.rng_seed);
        ParamStack g_cons = zeros_like(t.params);
        closed_loop_forward(t.params, t.partial, cons_only, r3, &g_cons);
        auto frozen_objective = [&](const ModelParams& q) {
            std::vector<PointCloud> vc;
            for (const PointCloud& pv : views) vc.push_back(forward_complete(q, pv));
            return cons_only.weights.lambda_cons * consistency_mse(vc, target);
        };
        const SweepResult sw1 = fd_sweep(t.params, g_cons, frozen_objective);
        if (sw1.verdict == SweepVerdict::fail)
            return {false, "frozen-target mismatch: " + sw1.detail};
        if (sw1.verdict == SweepVerdict::kink) continue;

        // (c) The live gradient must equal finite differences of the objective
        // in which the target varies with the parameters.
        SeededRng r4(t.rng_seed);
        ParamStack g_live2 = zeros_like(t.params);
        closed_loop_forward(t.params, t.partial, cons_only, r4, &g_live2, 1.0, nullptr, live_opts);
        auto live_objective = [&](const ModelParams& q) {
            const PointCloud c0 = forward_complete(q, t.partial);
            std::vector<PointCloud> vc;
            for (const PointCloud& pv : views) vc.push_back(forward_complete(q, pv));
            return cons_only.weights.lambda_cons * consistency_mse(vc, c0);
        };
        const SweepResult sw2 = fd_sweep(t.params, g_live2, live_objective);
        if (sw2.verdict == SweepVerdict::fail)
            return {false, "live-target mismatch: " + sw2.detail};
        if (sw2.verdict == SweepVerdict::kink) continue;

        return {true, fmt("target-branch flow zero when frozen (fd agreement %.3g over "
                          "%d params), nonzero when live (max grad diff %.3g)",
                          sw1.max_rel, sw1.n_params, diff)};
    }
    return {false, "nondifferentiable configurations in every draw"};
}

Outcome criterion_4(const Ctx&) {
    SeededRng init(22);
    const ModelParams params = init_model(2048, init);
    SeededRng rng(21);
    for (int k = 0; k < kPermPartials; ++k) {
        const PointCloud partial = random_cloud(rng, 64 + rng.index(193));
        const PointCloud base = forward_complete(params, partial);
        for (int s = 0; s < kPermShuffles; ++s) {
            PointCloud shuffled = partial;
            rng.shuffle(shuffled);
            const PointCloud out = forward_complete(params, shuffled);
            if (out.size() != base.size())
                return {false, fmt("partial %d shuffle %d: size changed", k, s)};
            for (std::size_t i = 0; i < out.size(); ++i)
                if (!(out[i] == base[i]))
                    return {false, fmt("partial %d shuffle %d: point %zu differs", k, s, i)};
        }
    }
    return {true, fmt("%d partials x %d permutations, outputs bit-identical",
                      kPermPartials, kPermShuffles)};
}

Outcome criterion_5(const Ctx&) {
    ViewParams view;
    view.azimuth_deg = 25.0;
    view.elevation_deg = 15.0;
    view.grid_resolution = 64;
    const Point3 dir = view_direction(view);

    auto run_fixture = [&](const char* name, const ShapeSpec& spec,
                           const std::function<Point3(const Point3&)>& normal_of,
                           std::string& detail) {
        const PointCloud cloud = gen_procedural_shape(spec);
        std::unordered_set<std::string> members;
        for (const Point3& p : cloud) {
            std::string key(sizeof(double) * 3, '\0');
            std::memcpy(key.data(), &p.x, sizeof(double));
            std::memcpy(key.data() + 8, &p.y, sizeof(double));
            std::memcpy(key.data() + 16, &p.z, sizeof(double));
            members.insert(std::move(key));
        }
        SeededRng rng(33);
        const PointCloud out = synthesize_partial(cloud, view, 4096, rng);
        std::size_t front = 0;
        for (const Point3& p : out) {
            std::string key(sizeof(double) * 3, '\0');
            std::memcpy(key.data(), &p.x, sizeof(double));
            std::memcpy(key.data() + 8, &p.y, sizeof(double));
            std::memcpy(key.data() + 16, &p.z, sizeof(double));
            if (!members.count(key)) {
                detail = fmt("%s: output point not bit-identical to any input point", name);
                return false;
            }
            const Point3 n = normal_of(p);
            if (n.x * dir.x + n.y * dir.y + n.z * dir.z > 0.0) ++front;
        }
        const double frac = static_cast<double>(front) / static_cast<double>(out.size());
        detail = fmt("%s: exact subset, %.1f%% front-facing", name, 100.0 * frac);
        return frac >= kFrontFacingMin;
    };

    ShapeSpec sphere;
    sphere.kind = ShapeKind::sphere;
    sphere.sample_count = 65536;
    sphere.seed = 31;
    std::string sphere_detail;
    const bool sphere_ok = run_fixture(
        "sphere", sphere, [](const Point3& p) { return p; }, sphere_detail);

    ShapeSpec cube;
    cube.kind = ShapeKind::cuboid;
    cube.sample_count = 65536;
    cube.seed = 32;
    std::string cube_detail;
    const bool cube_ok = run_fixture(
        "cube", cube,
        [](const Point3& p) {
            const double ax = std::abs(p.x), ay = std::abs(p.y), az = std::abs(p.z);
            Point3 n{0, 0, 0};
            if (ax >= ay && ax >= az)
                n.x = p.x > 0 ? 1.0 : -1.0;
            else if (ay >= az)
                n.y = p.y > 0 ? 1.0 : -1.0;
            else
                n.z = p.z > 0 ? 1.0 : -1.0;
            return n;
        },
        cube_detail);

    return {sphere_ok && cube_ok,
            sphere_detail + "; " + cube_detail +
                fmt(" (threshold %.0f%%)", 100.0 * kFrontFacingMin)};
}

Outcome criterion_6(const Ctx& ctx) {
    const std::string manifest = ensure_dataset(ctx, "train40", desk_train_opts());
    double sec = 0.0;
    const ModelParams params = ensure_model(ctx, "full_ns8", desk_config(), manifest, &sec);
    const std::vector<LoadedSample> held = heldout_samples(ctx);
    const double cov_model = mean_coverage(params, held);
    const double cov_base = baseline_coverage(held, 2048);
    const double ratio = cov_model / cov_base;
    return {ratio < kCoverageRatioMax,
            fmt("held-out coverage %.5f vs resampled-partial baseline %.5f, ratio %.3f "
                "(< %.2f required); training %.0f s (30-min desktop target)",
                cov_model, cov_base, ratio, kCoverageRatioMax, sec)};
}

Outcome criterion_7(const Ctx& ctx) {
    const std::string manifest = ensure_dataset(ctx, "train40", desk_train_opts());
    const std::vector<LoadedSample> held = heldout_samples(ctx);
    const ModelParams full =
        ensure_model(ctx, "full_ns8", desk_config(), manifest, nullptr);
    const double cov_full = mean_coverage(full, held);

    TrainConfig no_cons = desk_config();
    no_cons.weights.lambda_cons = 0.0;
    const ModelParams lam0 = ensure_model(ctx, "lam0", no_cons, manifest, nullptr);
    const double cov_lam0 = mean_coverage(lam0, held);
    const bool ablation_worse = cov_lam0 > cov_full;

    TrainConfig no_wcd = desk_config();
    no_wcd.weights.alpha = 0.0;
    no_wcd.weights.beta = 0.0;
    const ModelParams collapse = ensure_model(ctx, "nowcd", no_wcd, manifest, nullptr);
    double spread_out = 0.0, spread_gt = 0.0;
    for (const LoadedSample& s : held) {
        spread_out += mean_pairwise_distance(forward_complete(collapse, s.partial));
        spread_gt += mean_pairwise_distance(*s.ground_truth);
    }
    const double spread_ratio = spread_out / spread_gt;
    const bool collapsed = spread_ratio < kCollapseRatioMax;

    return {ablation_worse && collapsed,
            fmt("coverage without consistency %.5f vs full %.5f (%s); output spread "
                "without input-distance term %.1f%% of ground truth's (< %.0f%% "
                "required, %s)",
                cov_lam0, cov_full, ablation_worse ? "worse, as required" : "NOT worse",
                100.0 * spread_ratio, 100.0 * kCollapseRatioMax,
                collapsed ? "collapsed" : "not collapsed")};
}

Outcome criterion_8(const Ctx& ctx) {
    const std::string manifest = ensure_dataset(ctx, "train40", desk_train_opts());
    const std::vector<LoadedSample> held = heldout_samples(ctx);
    std::vector<double> cds;
    for (int ns : {1, 4, 8}) {
        TrainConfig cfg = desk_config();
        cfg.n_syn_views = ns;
        const std::string tag = ns == 8 ? "full_ns8" : fmt("ns%d", ns);
        cds.push_back(mean_cd(ensure_model(ctx, tag, cfg, manifest, nullptr), held));
    }
    const double lo = *std::min_element(cds.begin(), cds.end());
    const double hi = *std::max_element(cds.begin(), cds.end());
    const double spread = (hi - lo) / lo;
    return {spread < kViewCountSpreadMax,
            fmt("held-out CD by view count {1,4,8} = {%.5f, %.5f, %.5f}, spread %.1f%% "
                "(< %.0f%% required)",
                cds[0], cds[1], cds[2], 100.0 * spread, 100.0 * kViewCountSpreadMax)};
}

Outcome criterion_9(const Ctx& ctx) {
    ToyDatasetOptions pre_opts = desk_train_opts();
    pre_opts.n_shapes = 24;
    pre_opts.seed = 303;
    pre_opts.kinds = {ShapeKind::sphere, ShapeKind::cuboid};
    const std::string pre_manifest = ensure_dataset(ctx, "tta_pre", pre_opts);

    ToyDatasetOptions cyl_opts = desk_heldout_opts();
    cyl_opts.seed = 404;
    cyl_opts.kinds = {ShapeKind::cylinder};
    const std::string cyl_manifest = ensure_dataset(ctx, "tta_cyl", cyl_opts);

    TrainConfig pre_cfg = desk_config();
    pre_cfg.epochs = 120;
    const ModelParams pretrained = ensure_model(ctx, "tta_pre", pre_cfg, pre_manifest,
                                                nullptr);

    std::vector<LoadedSample> cyl = load_dataset(cyl_manifest);
    std::vector<PointCloud> partials;
    for (LoadedSample& s : cyl) partials.push_back(std::move(s.partial));

    const fs::path adapted_path = ctx.work / "runs" / "tta_adapted.bin";
    ModelParams adapted = [&] {
        if (fs::exists(adapted_path)) return load_params(adapted_path.string());
        TrainConfig adapt_cfg = desk_config();
        adapt_cfg.epochs = 60;
        adapt_cfg.batch_size = 16;
        TrainHooks hooks;
        if (ctx.verbose)
            hooks.on_epoch = [](const EpochStats& s) {
                std::fprintf(stderr, "[tta_adapt] %s\n", format_epoch_line(s).c_str());
            };
        ModelParams out = test_time_adapt(pretrained, partials, adapt_cfg, hooks).params;
        save_params(out, adapted_path.string());
        return out;
    }();

    const LossWeights w;
    const double frozen = mean_wcd(pretrained, partials, w);
    const double after = mean_wcd(adapted, partials, w);
    const double improvement = (frozen - after) / frozen;
    return {improvement >= kAdaptImprovementMin,
            fmt("input-distance loss on new-category partials: frozen %.5f, adapted "
                "%.5f, improvement %.1f%% (>= %.0f%% required)",
                frozen, after, 100.0 * improvement, 100.0 * kAdaptImprovementMin)};
}

Outcome criterion_10(const Ctx& ctx) {
    const fs::path dir = ctx.work / "det";
    fs::remove_all(dir);
    fs::create_directories(dir);

    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.batch_size = 4;
    cfg.n_syn_views = 2;
    cfg.n_out = 64;
    cfg.grid_resolution = 16;
    cfg.checkpoint_every = 3;
    cfg.widths.encoder = {8, 16};
    cfg.widths.decoder_hidden = {32};
    cfg.seed = 9;
    SeededRng crng(41);
    std::vector<PointCloud> partials;
    for (int i = 0; i < 6; ++i) partials.push_back(random_cloud(crng, 64));

    auto run = [&](const TrainConfig& c, const std::optional<std::string>& resume,
                   const std::optional<std::string>& out_dir, std::string& log) {
        TrainHooks hooks;
        hooks.on_epoch = [&log](const EpochStats& s) {
            log += format_epoch_line(s) + "\n";
        };
        return train(partials, c, resume, out_dir, hooks);
    };
    auto serialized = [](const ModelParams& p) {
        std::ostringstream os;
        write_params_stream(p, os);
        return os.str();
    };

    std::string log_a, log_a2, log_b;
    const TrainResult a = run(cfg, std::nullopt, (dir / "a").string(), log_a);
    const TrainResult a2 = run(cfg, std::nullopt, std::nullopt, log_a2);
    if (log_a != log_a2) return {false, "same-seed reruns produced different loss logs"};
    if (serialized(a.params) != serialized(a2.params))
        return {false, "same-seed reruns produced different weights"};

    TrainConfig half = cfg;
    half.epochs = 3;
    half.checkpoint_every = 0;
    const TrainResult b1 = run(half, std::nullopt, (dir / "b").string(), log_b);
    (void)b1;
    const TrainResult b2 = run(cfg, (dir / "b" / "checkpoint_final.ckpt").string(),
                               std::nullopt, log_b);
    if (log_b != log_a)
        return {false, "interrupted+resumed loss log differs from the uninterrupted one"};
    if (serialized(b2.params) != serialized(a.params))
        return {false, "resumed weights differ from the uninterrupted run"};
    return {true, "same-seed logs byte-identical; checkpoint resume bit-exact"};
}

} // namespace

int main(int argc, char** argv) {
    Ctx ctx;
    ctx.work = "acceptance_work";
    std::vector<int> which;
    for (int i = 1; i < argc; ++i) {
        const std::string arg = argv[i];
        if (arg.rfind("--workdir=", 0) == 0)
            ctx.work = arg.substr(10);
        else if (arg == "--verbose")
            ctx.verbose = true;
        else
            which.push_back(std::atoi(arg.c_str()));
    }
    if (which.empty()) which = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::sort(which.begin(), which.end());
    fs::create_directories(ctx.work / "runs");
    fs::create_directories(ctx.work / "data");

    using Fn = Outcome (*)(const Ctx&);
    const Fn table[10] = {criterion_1, criterion_2, criterion_3, criterion_4,
                          criterion_5, criterion_6, criterion_7, criterion_8,
                          criterion_9, criterion_10};
    bool all_pass = true;
    for (int n : which) {
        if (n < 1 || n > 10) {
            std::printf("criterion %d: FAIL — no such criterion\n", n);
            all_pass = false;
            continue;
        }
        Outcome o;
        try {
            o = table[n - 1](ctx);
        } catch (const std::exception& e) {
            o = {false, fmt("exception: %s", e.what())};
        }
        std::printf("criterion %d: %s — %s\n", n, o.pass ? "PASS" : "FAIL",
                    o.detail.c_str());
        std::fflush(stdout);
        all_pass = all_pass && o.pass;
    }
    return all_pass ? 0 : 1;
}
