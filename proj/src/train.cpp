#include "clpc/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <thread>

#include "clpc/error.hpp"
#include "clpc/view.hpp"

namespace clpc {

namespace {

constexpr std::uint64_t kInitTag = 0x1A17;
constexpr std::uint64_t kShuffleTag = 0x5F03;
constexpr std::uint64_t kSampleTag = 0xAB5E;

// Contiguous static split; worker 0 runs inline when threads == 1.
void parallel_samples(int threads, std::size_t n,
                      const std::function<void(int, std::size_t, std::size_t)>& fn) {
    if (threads <= 1 || n <= 1) {
        fn(0, 0, n);
        return;
    }
    const int t = std::min<std::size_t>(threads, n);
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(t));
    const std::size_t chunk = (n + static_cast<std::size_t>(t) - 1) / t;
    for (int w = 0; w < t; ++w) {
        const std::size_t lo = static_cast<std::size_t>(w) * chunk;
        const std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&, w, lo, hi] { fn(w, lo, hi); });
    }
    for (std::thread& th : pool) th.join();
}

void add_into(ParamStack& dst, const ParamStack& src) {
    for (std::size_t l = 0; l < dst.encoder.size(); ++l) {
        dst.encoder[l].weight += src.encoder[l].weight;
        dst.encoder[l].bias += src.encoder[l].bias;
    }
    for (std::size_t l = 0; l < dst.decoder.size(); ++l) {
        dst.decoder[l].weight += src.decoder[l].weight;
        dst.decoder[l].bias += src.decoder[l].bias;
    }
}

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t fnv1a_str(std::uint64_t h, const std::string& s) {
    return fnv1a(h, s.data(), s.size());
}

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// FNV-1a mask/correspondence hashing for the discrete-state diagnostic.
std::uint64_t hash_mask(std::uint64_t h, const Eigen::MatrixXd& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            const unsigned char bit = m(r, c) > 0.0 ? 1 : 0;
            h = fnv1a(h, &bit, 1);
        }
    return h;
}

std::uint64_t hash_indices(std::uint64_t h, const std::vector<std::size_t>& v) {
    return fnv1a(h, v.data(), v.size() * sizeof(std::size_t));
}

// Per-sample state carried between the batched phases.
struct SampleWork {
    EncodeTrace enc0;          // encoder trace over the input partial
    PointCloud c0;             // completion of the partial
    EncodeTrace shared;        // encoder trace over view-visible points
    Eigen::MatrixXd view_mult; // used-groups x views multiplicities
    double np = 0.0;           // points per synthesized view
    std::uint64_t discrete = 0xcbf29ce484222325ull;
};

} // namespace

void TrainConfig::validate() const {
    if (epochs < 0) throw ComputeError("config: epochs < 0");
    if (batch_size < 1) throw ComputeError("config: batch_size < 1");
    if (n_syn_views < 1) throw ComputeError("config: n_syn_views < 1");
    if (n_out < 1) throw ComputeError("config: n_out < 1");
    if (!(lr0 > 0.0)) throw ComputeError("config: lr0 must be positive");
    if (!(decay_factor > 0.0 && decay_factor <= 1.0))
        throw ComputeError("config: decay_factor must be in (0,1]");
    if (decay_every < 1) throw ComputeError("config: decay_every < 1");
    if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.lambda_cons < 0.0)
        throw ComputeError("config: negative loss weight");
    if (grid_resolution < 2) throw ComputeError("config: grid_resolution < 2");
    if (threads < 1) throw ComputeError("config: threads < 1");
    if (checkpoint_every < 0) throw ComputeError("config: checkpoint_every < 0");
    if (widths.encoder.empty()) throw ComputeError("config: empty encoder widths");
    for (int w : widths.encoder)
        if (w < 1) throw ComputeError("config: encoder width < 1");
    for (int w : widths.decoder_hidden)
        if (w < 1) throw ComputeError("config: decoder width < 1");
}

double lr_at_epoch(const TrainConfig& cfg, int epoch) {
    if (epoch < 0) throw ComputeError("lr_at_epoch: negative epoch");
    return cfg.lr0 * std::pow(cfg.decay_factor, epoch / cfg.decay_every);
}

AdamState make_adam_state(const ParamStack& shape) {
    AdamState s;
    s.m = zeros_like(shape);
    s.v = zeros_like(shape);
    return s;
}

void adam_step(ModelParams& params, const ParamStack& grads, AdamState& state, double lr) {
    state.t += 1;
    const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    auto step = [&](Eigen::Ref<Eigen::MatrixXd> p, const Eigen::MatrixXd& g,
                    Eigen::MatrixXd& m, Eigen::MatrixXd& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.array().square().matrix();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    };
    auto step_vec = [&](Eigen::Ref<Eigen::VectorXd> p, const Eigen::VectorXd& g,
                        Eigen::VectorXd& m, Eigen::VectorXd& v) {
        m = state.beta1 * m + (1.0 - state.beta1) * g;
        v = state.beta2 * v + (1.0 - state.beta2) * g.array().square().matrix();
        p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + state.eps);
    };
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        step(params.encoder[l].weight, grads.encoder[l].weight, state.m.encoder[l].weight,
             state.v.encoder[l].weight);
        step_vec(params.encoder[l].bias, grads.encoder[l].bias, state.m.encoder[l].bias,
                 state.v.encoder[l].bias);
    }
    for (std::size_t l = 0; l < params.decoder.size(); ++l) {
        step(params.decoder[l].weight, grads.decoder[l].weight, state.m.decoder[l].weight,
             state.v.decoder[l].weight);
        step_vec(params.decoder[l].bias, grads.decoder[l].bias, state.m.decoder[l].bias,
                 state.v.decoder[l].bias);
    }
}

std::vector<LoopSampleResult> closed_loop_forward_batch(
    const ModelParams& params, const std::vector<const PointCloud*>& partials,
    const TrainConfig& cfg, std::vector<SeededRng>& rngs, ParamStack* grads,
    const std::vector<const NearestNeighborIndex*>* partial_indices,
    const LoopOptions& opts) {
    const std::size_t B = partials.size();
    if (B == 0) throw ComputeError("forward: empty batch");
    if (rngs.size() != B) throw ComputeError("forward: rng count != batch size");
    for (const PointCloud* p : partials)
        if (!p || p->empty()) throw ComputeError("forward: empty partial cloud");

    const int ns = cfg.n_syn_views;
    const int nc = params.n_out;
    const Eigen::Index fdim = params.feature_dim();
    const bool want_cons = cfg.weights.lambda_cons != 0.0;
    const bool want_wcd = cfg.weights.alpha != 0.0 || cfg.weights.beta != 0.0;
    const bool diag = opts.discrete_out != nullptr;
    if (opts.live_consistency_target && cfg.consistency_mode != ConsistencyMode::mse)
        throw ComputeError("forward: live consistency target is mse-only");

    std::vector<SampleWork> work(B);
    std::vector<LoopSampleResult> results(B);

    // Phase A: encode every input partial (per-sample GEMMs over unique points).
    Eigen::MatrixXd f0(static_cast<Eigen::Index>(B), fdim);
    parallel_samples(cfg.threads, B, [&](int, std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s)
            f0.row(static_cast<Eigen::Index>(s)) =
                encode(params, *partials[s], work[s].enc0).transpose();
    });

    // Phase B: decode the whole batch of features at once.
    DecodeTrace dec0;
    Eigen::MatrixXd y0 = decode_rows(params, f0, dec0);
    for (std::size_t s = 0; s < B; ++s)
        work[s].c0 = rows_to_cloud(y0, static_cast<Eigen::Index>(s), nc);

    // Phase C: synthesize views of the detached completion and encode their
    // visible points once per sample; per-view features pool the shared rows.
    // Per view the sample generator draws azimuth, elevation, then resample
    // indices. With lambda_cons == 0 the branch is skipped (each sample's
    // generator is dedicated, so the skipped draws perturb nothing else).
    Eigen::MatrixXd fv;
    if (want_cons) {
        fv.resize(static_cast<Eigen::Index>(B) * ns, fdim);
        parallel_samples(cfg.threads, B, [&](int, std::size_t lo, std::size_t hi) {
            for (std::size_t s = lo; s < hi; ++s) {
                SampleWork& w = work[s];
                const std::size_t np = partials[s]->size();
                w.np = static_cast<double>(np);
                const GroupedCloud groups = group_points(w.c0);
                const std::size_t g_total = groups.multiplicity.size();

                // Multiplicity of each completion value-group per view.
                Eigen::MatrixXd mult = Eigen::MatrixXd::Zero(
                    static_cast<Eigen::Index>(g_total), ns);
                for (int v = 0; v < ns; ++v) {
                    const ViewParams view = sample_view(rngs[s], cfg.grid_resolution);
                    const std::vector<std::size_t> idx =
                        synthesize_partial_indices(w.c0, view, np, rngs[s]);
                    if (diag) w.discrete = hash_indices(w.discrete, idx);
                    for (std::size_t i = 0; i < np; ++i)
                        mult(static_cast<Eigen::Index>(groups.group_of[idx[i]]), v) += 1.0;
                }

                // Keep only groups some view actually uses, in canonical order
                // (so each view pools the same terms in the same order as a
                // standalone encode of that view would).
                std::vector<Eigen::Index> used;
                for (Eigen::Index g = 0; g < mult.rows(); ++g)
                    if (mult.row(g).sum() > 0.0) used.push_back(g);
                w.shared.grouped.unique.resize(static_cast<Eigen::Index>(used.size()), 3);
                w.view_mult.resize(static_cast<Eigen::Index>(used.size()), ns);
                for (std::size_t u = 0; u < used.size(); ++u) {
                    w.shared.grouped.unique.row(static_cast<Eigen::Index>(u)) =
                        groups.unique.row(used[u]);
                    w.view_mult.row(static_cast<Eigen::Index>(u)) = mult.row(used[u]);
                }
                w.shared.grouped.total = np; // per-view divisor
                encode_rows(params, w.shared);
                if (diag)
                    for (const Eigen::MatrixXd& h : w.shared.h)
                        w.discrete = hash_mask(w.discrete, h);

                const Eigen::MatrixXd& last = w.shared.h.back();
                for (int v = 0; v < ns; ++v) {
                    Eigen::VectorXd acc = Eigen::VectorXd::Zero(fdim);
                    for (Eigen::Index u = 0; u < last.rows(); ++u) {
                        const double m = w.view_mult(u, v);
                        if (m != 0.0) acc += m * last.row(u).transpose();
                    }
                    fv.row(static_cast<Eigen::Index>(s) * ns + v) =
                        (acc / w.np).transpose();
                }
            }
        });
    }

    // Phase D: decode all view features at once.
    DecodeTrace decV;
    Eigen::MatrixXd yv;
    if (want_cons) yv = decode_rows(params, fv, decV);

    // Phase E: losses and output-side gradients. Gradients are scaled by 1/B
    // here so the accumulated result is the batch mean.
    Eigen::MatrixXd dy0, dyv;
    if (grads) {
        dy0 = Eigen::MatrixXd::Zero(y0.rows(), y0.cols());
        if (want_cons) dyv = Eigen::MatrixXd::Zero(yv.rows(), yv.cols());
    }
    const double inv_b = 1.0 / static_cast<double>(B);
    std::vector<std::unique_ptr<NearestNeighborIndex>> local_index(B);
    parallel_samples(cfg.threads, B, [&](int, std::size_t lo, std::size_t hi) {
        for (std::size_t s = lo; s < hi; ++s) {
            SampleWork& w = work[s];
            const Eigen::Index srow = static_cast<Eigen::Index>(s);
            double cons = 0.0;
            if (want_cons) {
                std::vector<PointCloud> view_completions;
                view_completions.reserve(static_cast<std::size_t>(ns));
                for (int v = 0; v < ns; ++v)
                    view_completions.push_back(rows_to_cloud(yv, srow * ns + v, nc));
                if (cfg.consistency_mode == ConsistencyMode::mse) {
                    cons = consistency_mse(view_completions, w.c0);
                    if (grads) {
                        // dL/dC_v = lambda * 2 (C_v - C_0) / (N_c N_s B)
                        const double sc =
                            cfg.weights.lambda_cons * 2.0 /
                            (static_cast<double>(nc) * ns * static_cast<double>(B));
                        for (int v = 0; v < ns; ++v) {
                            const Eigen::Index r = srow * ns + v;
                            dyv.row(r) = sc * (yv.row(r) - y0.row(srow));
                            if (opts.live_consistency_target)
                                dy0.row(srow) -= sc * (yv.row(r) - y0.row(srow));
                        }
                    }
                } else {
                    const NearestNeighborIndex target_index(w.c0);
                    double sum = 0.0;
                    const double sc = cfg.weights.lambda_cons /
                                      (static_cast<double>(ns) * static_cast<double>(B));
                    for (int v = 0; v < ns; ++v) {
                        const Eigen::Index r = srow * ns + v;
                        Eigen::MatrixXd dcv;
                        sum += consistency_chamfer_grad(
                            view_completions[static_cast<std::size_t>(v)], w.c0,
                            target_index, dcv);
                        if (grads)
                            for (int i = 0; i < nc; ++i)
                                for (int k = 0; k < 3; ++k)
                                    dyv(r, 3 * i + k) = sc * dcv(i, k);
                    }
                    cons = sum / ns;
                }
            }
            double wcd = 0.0;
            if (want_wcd) {
                const NearestNeighborIndex* pidx =
                    partial_indices ? (*partial_indices)[s] : nullptr;
                if (!pidx) {
                    local_index[s] = std::make_unique<NearestNeighborIndex>(*partials[s]);
                    pidx = local_index[s].get();
                }
                Eigen::MatrixXd dc0;
                wcd = weighted_chamfer_grad(w.c0, *partials[s], *pidx, cfg.weights, dc0);
                if (grads)
                    for (int i = 0; i < nc; ++i)
                        for (int k = 0; k < 3; ++k)
                            dy0(srow, 3 * i + k) += inv_b * dc0(i, k);
                if (diag) {
                    std::vector<std::size_t> corr;
                    corr.reserve(w.c0.size());
                    for (const Point3& p : w.c0) corr.push_back(pidx->nearest(p).index);
                    w.discrete = hash_indices(w.discrete, corr);
                }
            }
            results[s].losses = total_loss(cons, wcd, cfg.weights);
            results[s].completion = w.c0;
            if (diag) {
                for (const Eigen::MatrixXd& h : w.enc0.h)
                    w.discrete = hash_mask(w.discrete, h);
                for (const Eigen::MatrixXd& h : dec0.h) {
                    const Eigen::MatrixXd row = h.row(srow);
                    w.discrete = hash_mask(w.discrete, row);
                }
                if (want_cons)
                    for (const Eigen::MatrixXd& h : decV.h) {
                        const Eigen::MatrixXd rows = h.middleRows(srow * ns, ns);
                        w.discrete = hash_mask(w.discrete, rows);
                    }
            }
        }
    });

    // Phases F/G: backprop decoder batches, then each sample's encoder.
    if (grads) {
        Eigen::MatrixXd dfv, df0;
        if (want_cons) decode_backward(params, decV, dyv, *grads, &dfv);
        if (want_wcd || opts.live_consistency_target)
            decode_backward(params, dec0, dy0, *grads, &df0);

        const int nworkers = std::max(1, std::min<int>(cfg.threads,
                                                       static_cast<int>(B)));
        std::vector<ParamStack> worker_grads;
        for (int t = 1; t < nworkers; ++t) worker_grads.push_back(zeros_like(params));
        parallel_samples(cfg.threads, B, [&](int wid, std::size_t lo, std::size_t hi) {
            ParamStack& acc = wid == 0 ? *grads : worker_grads[static_cast<std::size_t>(wid - 1)];
            for (std::size_t s = lo; s < hi; ++s) {
                SampleWork& w = work[s];
                const Eigen::Index srow = static_cast<Eigen::Index>(s);
                if (want_cons) {
                    // All views chain through one shared encoder trace.
                    Eigen::MatrixXd d_last;
                    d_last.noalias() =
                        (w.view_mult / w.np) *
                        dfv.middleRows(srow * ns, ns);
                    encode_backward_rows(params, w.shared, d_last, acc);
                }
                if (want_wcd || opts.live_consistency_target)
                    encode_backward_pooled(params, w.enc0, df0.row(srow).transpose(), acc);
            }
        });
        for (const ParamStack& g : worker_grads) add_into(*grads, g);
    }

    if (diag)
        for (const SampleWork& w : work) opts.discrete_out->push_back(w.discrete);
    return results;
}

LoopSampleResult closed_loop_forward(const ModelParams& params, const PointCloud& partial,
                            const TrainConfig& cfg, SeededRng& rng, ParamStack* grads,
                            double batch_weight, const NearestNeighborIndex* partial_index,
                            const LoopOptions& opts) {
    // Run as a batch of one; batch_weight stands in for the minibatch size so
    // gradient scaling matches a larger batch when a caller sums manually.
    std::vector<const PointCloud*> partials{&partial};
    std::vector<SeededRng> rngs{rng};
    std::vector<const NearestNeighborIndex*> indices{partial_index};
    ParamStack scaled;
    std::vector<LoopSampleResult> r;
    if (grads && batch_weight != 1.0) {
        scaled = zeros_like(params);
        r = closed_loop_forward_batch(params, partials, cfg, rngs, &scaled, &indices, opts);
        const double f = 1.0 / batch_weight;
        for (std::size_t l = 0; l < scaled.encoder.size(); ++l) {
            grads->encoder[l].weight += f * scaled.encoder[l].weight;
            grads->encoder[l].bias += f * scaled.encoder[l].bias;
        }
        for (std::size_t l = 0; l < scaled.decoder.size(); ++l) {
            grads->decoder[l].weight += f * scaled.decoder[l].weight;
            grads->decoder[l].bias += f * scaled.decoder[l].bias;
        }
    } else {
        r = closed_loop_forward_batch(params, partials, cfg, rngs, grads, &indices, opts);
    }
    rng = rngs[0];
    return std::move(r[0]);
}

std::string format_epoch_line(const EpochStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%d, %.17g, %.17g, %.17g, %.17g", s.epoch, s.lr,
                  s.cons, s.wcd, s.total);
    return buf;
}

std::uint64_t config_fingerprint(const TrainConfig& cfg) {
    // Trajectory-affecting fields only: epoch count is deliberately excluded
    // (a shorter run is a prefix of a longer one), as is checkpoint cadence.
    std::string s;
    s += "batch=" + std::to_string(cfg.batch_size);
    s += ";views=" + std::to_string(cfg.n_syn_views);
    s += ";n_out=" + std::to_string(cfg.n_out);
    s += ";lr0=" + fmt17(cfg.lr0);
    s += ";decay=" + fmt17(cfg.decay_factor);
    s += ";decay_every=" + std::to_string(cfg.decay_every);
    s += ";alpha=" + fmt17(cfg.weights.alpha);
    s += ";beta=" + fmt17(cfg.weights.beta);
    s += ";lambda=" + fmt17(cfg.weights.lambda_cons);
    s += ";mode=" + std::string(cfg.consistency_mode == ConsistencyMode::mse ? "mse"
                                                                             : "chamfer");
    s += ";grid=" + std::to_string(cfg.grid_resolution);
    s += ";seed=" + std::to_string(cfg.seed);
    s += ";threads=" + std::to_string(cfg.threads);
    s += ";enc=";
    for (int w : cfg.widths.encoder) s += std::to_string(w) + ",";
    s += ";dec=";
    for (int w : cfg.widths.decoder_hidden) s += std::to_string(w) + ",";
    return fnv1a_str(0xcbf29ce484222325ull, s);
}

namespace {

constexpr char kTrainTag[4] = {'T', 'R', 'N', '1'};

void write_stack(std::ostream& os, const ParamStack& st) {
    auto w = [&](const std::vector<LayerParams>& layers) {
        for (const LayerParams& l : layers) {
            std::vector<double> buf;
            buf.reserve(static_cast<std::size_t>(l.weight.size()));
            for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
                for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
                    buf.push_back(l.weight(r, c));
            os.write(reinterpret_cast<const char*>(buf.data()),
                     static_cast<std::streamsize>(buf.size() * sizeof(double)));
            os.write(reinterpret_cast<const char*>(l.bias.data()),
                     static_cast<std::streamsize>(l.bias.size()) * sizeof(double));
        }
    };
    w(st.encoder);
    w(st.decoder);
}

void read_stack(std::istream& is, ParamStack& st) {
    auto r = [&](std::vector<LayerParams>& layers) {
        for (LayerParams& l : layers) {
            std::vector<double> buf(static_cast<std::size_t>(l.weight.size()));
            is.read(reinterpret_cast<char*>(buf.data()),
                    static_cast<std::streamsize>(buf.size() * sizeof(double)));
            std::size_t k = 0;
            for (Eigen::Index rr = 0; rr < l.weight.rows(); ++rr)
                for (Eigen::Index cc = 0; cc < l.weight.cols(); ++cc)
                    l.weight(rr, cc) = buf[k++];
            is.read(reinterpret_cast<char*>(l.bias.data()),
                    static_cast<std::streamsize>(l.bias.size()) * sizeof(double));
            if (!is) throw DataError("checkpoint: truncated");
        }
    };
    r(st.encoder);
    r(st.decoder);
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("checkpoint: truncated");
    return v;
}

} // namespace

void save_checkpoint(const ModelParams& params, const AdamState& adam, int epoch_next,
                     const TrainConfig& cfg, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_params_stream(params, os);
    os.write(kTrainTag, sizeof kTrainTag);
    write_pod(os, config_fingerprint(cfg));
    write_pod(os, static_cast<std::uint32_t>(epoch_next));
    write_pod(os, static_cast<std::uint64_t>(adam.t));
    write_pod(os, adam.beta1);
    write_pod(os, adam.beta2);
    write_pod(os, adam.eps);
    write_stack(os, adam.m);
    write_stack(os, adam.v);
    if (!os) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, const TrainConfig& cfg) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    Checkpoint ck;
    ck.params = read_params_stream(is);
    char tag[4];
    is.read(tag, sizeof tag);
    if (!is || !std::equal(tag, tag + 4, kTrainTag))
        throw DataError("checkpoint: missing training state");
    const std::uint64_t fp = read_pod<std::uint64_t>(is);
    if (fp != config_fingerprint(cfg))
        throw DataError("checkpoint: config mismatch (fingerprint differs)");
    ck.epoch_next = static_cast<int>(read_pod<std::uint32_t>(is));
    ck.adam = make_adam_state(ck.params);
    ck.adam.t = static_cast<std::int64_t>(read_pod<std::uint64_t>(is));
    ck.adam.beta1 = read_pod<double>(is);
    ck.adam.beta2 = read_pod<double>(is);
    ck.adam.eps = read_pod<double>(is);
    read_stack(is, ck.adam.m);
    read_stack(is, ck.adam.v);
    return ck;
}

namespace {

TrainResult run_epochs(ModelParams params, AdamState adam, int start_epoch,
                       const std::vector<PointCloud>& partials, const TrainConfig& cfg,
                       const std::optional<std::string>& checkpoint_dir,
                       const TrainHooks& hooks) {
    const std::size_t n = partials.size();

    // The input-side nearest-neighbor indexes never change; build them once.
    std::vector<std::unique_ptr<NearestNeighborIndex>> indices(n);
    std::vector<const NearestNeighborIndex*> index_ptrs(n, nullptr);
    if (cfg.weights.alpha != 0.0 || cfg.weights.beta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) {
            indices[i] = std::make_unique<NearestNeighborIndex>(partials[i]);
            index_ptrs[i] = indices[i].get();
        }
    }

    TrainResult out;
    out.history.reserve(static_cast<std::size_t>(std::max(0, cfg.epochs - start_epoch)));

    std::vector<std::size_t> order(n);
    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        const double lr = lr_at_epoch(cfg, epoch);
        std::iota(order.begin(), order.end(), std::size_t{0});
        SeededRng shuffle_rng(mix64(mix64(cfg.seed, kShuffleTag),
                                    static_cast<std::uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double sum_cons = 0.0, sum_wcd = 0.0, sum_total = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const PointCloud*> batch;
            std::vector<const NearestNeighborIndex*> batch_idx;
            std::vector<SeededRng> rngs;
            for (std::size_t k = start; k < stop; ++k) {
                const std::size_t ds = order[k];
                batch.push_back(&partials[ds]);
                batch_idx.push_back(index_ptrs[ds]);
                rngs.emplace_back(mix64(mix64(mix64(cfg.seed, kSampleTag),
                                              static_cast<std::uint64_t>(epoch)),
                                        static_cast<std::uint64_t>(ds)));
            }
            ParamStack grads = zeros_like(params);
            const std::vector<LoopSampleResult> res =
                closed_loop_forward_batch(params, batch, cfg, rngs, &grads, &batch_idx);
            adam_step(params, grads, adam, lr);
            for (const LoopSampleResult& r : res) {
                sum_cons += r.losses.cons;
                sum_wcd += r.losses.wcd;
                sum_total += r.losses.total;
            }
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.lr = lr;
        stats.cons = sum_cons / static_cast<double>(n);
        stats.wcd = sum_wcd / static_cast<double>(n);
        stats.total = sum_total / static_cast<double>(n);
        out.history.push_back(stats);
        if (hooks.on_epoch) hooks.on_epoch(stats);

        if (checkpoint_dir && cfg.checkpoint_every > 0 &&
            (epoch + 1) % cfg.checkpoint_every == 0 && epoch + 1 < cfg.epochs) {
            char name[64];
            std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.ckpt", epoch + 1);
            save_checkpoint(params, adam, epoch + 1, cfg,
                            (std::filesystem::path(*checkpoint_dir) / name).string());
        }
    }

    if (checkpoint_dir) {
        std::filesystem::create_directories(*checkpoint_dir);
        save_checkpoint(params, adam, cfg.epochs, cfg,
                        (std::filesystem::path(*checkpoint_dir) / "checkpoint_final.ckpt")
                            .string());
    }

    out.params = std::move(params);
    out.adam = std::move(adam);
    return out;
}

} // namespace

TrainResult train(const std::vector<PointCloud>& partials, const TrainConfig& cfg,
                  const std::optional<std::string>& resume_from,
                  const std::optional<std::string>& checkpoint_dir,
                  const TrainHooks& hooks) {
    cfg.validate();
    if (partials.empty()) throw ComputeError("train: no samples");
    for (const PointCloud& p : partials)
        if (p.empty()) throw ComputeError("train: empty partial cloud");
    if (checkpoint_dir) std::filesystem::create_directories(*checkpoint_dir);

    ModelParams params;
    AdamState adam;
    int start_epoch = 0;
    if (resume_from) {
        Checkpoint ck = load_checkpoint(*resume_from, cfg);
        params = std::move(ck.params);
        adam = std::move(ck.adam);
        start_epoch = ck.epoch_next;
    } else {
        SeededRng init_rng(mix64(cfg.seed, kInitTag));
        params = init_model(cfg.n_out, init_rng, cfg.widths);
        adam = make_adam_state(params);
    }
    return run_epochs(std::move(params), std::move(adam), start_epoch, partials, cfg,
                      checkpoint_dir, hooks);
}

TrainResult test_time_adapt(const ModelParams& pretrained,
                            const std::vector<PointCloud>& partials,
                            const TrainConfig& cfg, const TrainHooks& hooks) {
    cfg.validate();
    if (partials.empty()) throw ComputeError("adapt: no samples");
    for (const PointCloud& p : partials)
        if (p.empty()) throw ComputeError("adapt: empty partial cloud");
    if (pretrained.n_out != cfg.n_out)
        throw ComputeError("adapt: n_out differs from the pretrained model");
    return run_epochs(pretrained, make_adam_state(pretrained), 0, partials, cfg,
                      std::nullopt, hooks);
}

} // namespace clpc
