#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clpc/loss.hpp"
#include "clpc/model.hpp"
#include "clpc/rng.hpp"

namespace clpc {

enum class ConsistencyMode { mse, chamfer };

struct TrainConfig {
    int epochs = 1000;
    int batch_size = 32;
    int n_syn_views = 8;      // synthesized views per sample
    int n_out = 2048;         // completion size
    double lr0 = 0.001;
    double decay_factor = 0.5;
    int decay_every = 200;    // epochs per learning-rate halving
    LossWeights weights;
    ConsistencyMode consistency_mode = ConsistencyMode::mse;
    int grid_resolution = 64;
    std::uint64_t seed = 0;
    int threads = 1;
    int checkpoint_every = 0; // epochs between checkpoints; 0 = final only
    ModelWidths widths;

    void validate() const;
};

double lr_at_epoch(const TrainConfig& cfg, int epoch);

// Adam with standard bias correction; one step per minibatch.
struct AdamState {
    ParamStack m;
    ParamStack v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const ParamStack& shape);
void adam_step(ModelParams& params, const ParamStack& grads, AdamState& state, double lr);

// ---- closed-loop forward/backward ----

struct LoopOptions {
    bool live_consistency_target = false; // test hook: skip the detach (mse mode)
    // Diagnostic: per-sample hash of the discrete state (resample indices,
    // ReLU sign patterns, nearest-neighbor correspondences). Finite-difference
    // tests use it to detect kink/switch configurations.
    std::vector<std::uint64_t>* discrete_out = nullptr;
};

struct LoopSampleResult {
    LossBreakdown losses;
    PointCloud completion; // C_0
};

// One training sample: complete the partial, synthesize views of the
// (detached) completion, complete each view, and score consistency plus the
// weighted distance to the input. Per sample the generator draws, for each
// view in order: azimuth, elevation, then the resample indices. When grads is
// non-null the parameter gradients of total/batch_weight are accumulated into
// it (batch_weight lets a caller average over a minibatch).
LoopSampleResult closed_loop_forward(const ModelParams& params, const PointCloud& partial,
                            const TrainConfig& cfg, SeededRng& rng,
                            ParamStack* grads = nullptr, double batch_weight = 1.0,
                            const NearestNeighborIndex* partial_index = nullptr,
                            const LoopOptions& opts = {});

// Minibatch version: encoder runs per sample, decoder GEMMs are batched
// across samples and views. Per-sample results match closed_loop_forward run with the
// same per-sample rng. Gradients are accumulated as the batch mean.
std::vector<LoopSampleResult> closed_loop_forward_batch(
    const ModelParams& params, const std::vector<const PointCloud*>& partials,
    const TrainConfig& cfg, std::vector<SeededRng>& rngs, ParamStack* grads,
    const std::vector<const NearestNeighborIndex*>* partial_indices = nullptr,
    const LoopOptions& opts = {});

// ---- training loop ----

struct EpochStats {
    int epoch = 0;
    double lr = 0.0;
    double cons = 0.0; // epoch means over samples
    double wcd = 0.0;
    double total = 0.0;
};

// "epoch, lr, cons, wcd, total" with round-trip-exact doubles.
std::string format_epoch_line(const EpochStats& s);

struct TrainResult {
    ModelParams params;
    AdamState adam;
    std::vector<EpochStats> history;
};

struct TrainHooks {
    // Called after every epoch (logging, checkpoint cadence is internal).
    std::function<void(const EpochStats&)> on_epoch;
};

// Trains from scratch (params initialized from cfg.seed) or, when `resume_from`
// is set, continues a checkpoint: identical results to an uninterrupted run.
// checkpoint_dir, when set, receives checkpoint_epoch_NNNN.ckpt files per
// cfg.checkpoint_every and checkpoint_final.ckpt at the end.
TrainResult train(const std::vector<PointCloud>& partials, const TrainConfig& cfg,
                  const std::optional<std::string>& resume_from = std::nullopt,
                  const std::optional<std::string>& checkpoint_dir = std::nullopt,
                  const TrainHooks& hooks = {});

// Continues optimizing pretrained weights on new partials (fresh Adam state,
// cfg.epochs adaptation epochs). cfg.n_out must match the pretrained model.
TrainResult test_time_adapt(const ModelParams& pretrained,
                            const std::vector<PointCloud>& partials,
                            const TrainConfig& cfg, const TrainHooks& hooks = {});

// ---- checkpoints ----
// Model block (see model.hpp) + "TRN1", config fingerprint, epoch_next, Adam
// t/beta/eps and moment tensors. Resume requires a matching fingerprint.
void save_checkpoint(const ModelParams& params, const AdamState& adam, int epoch_next,
                     const TrainConfig& cfg, const std::string& path);

struct Checkpoint {
    ModelParams params;
    AdamState adam;
    int epoch_next = 0;
};

Checkpoint load_checkpoint(const std::string& path, const TrainConfig& cfg);

// FNV-1a over the trajectory-affecting config fields.
std::uint64_t config_fingerprint(const TrainConfig& cfg);

} // namespace clpc
