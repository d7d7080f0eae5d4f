#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "clpc/geometry.hpp"
#include "clpc/rng.hpp"

namespace clpc {

struct LayerParams {
    Eigen::MatrixXd weight; // out x in
    Eigen::VectorXd bias;   // out
};

// Encoder + decoder tensors; also reused as gradient / Adam moment storage.
struct ParamStack {
    std::vector<LayerParams> encoder;
    std::vector<LayerParams> decoder;
};

struct ModelWidths {
    std::vector<int> encoder = {64, 128, 256, 512};
    std::vector<int> decoder_hidden = {1024, 1024};
};

// Per-point encoder (affine stack, ReLU between layers, none after the last,
// average pooling over points) and a fully-connected decoder (ReLU after the
// hidden layers) emitting n_out xyz triples.
struct ModelParams : ParamStack {
    int n_out = 0;

    int feature_dim() const { return static_cast<int>(encoder.back().weight.rows()); }
};

// Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases.
// Draw order: encoder then decoder, each weight matrix row-major.
ModelParams init_model(int n_out, SeededRng& rng, const ModelWidths& widths = {});

ParamStack zeros_like(const ParamStack& shape);

// ---- forward ----

// Unique points of a cloud in canonical (lexicographic) order with
// multiplicities. Encoding through this representation makes pooled features
// exactly invariant to input permutation and to duplicating every point.
struct GroupedCloud {
    Eigen::MatrixXd unique;               // U x 3, lex-sorted rows
    std::vector<double> multiplicity;     // U
    std::vector<std::size_t> group_of;    // original index -> group row
    std::size_t total = 0;
};

GroupedCloud group_points(const PointCloud& cloud);

struct EncodeTrace {
    GroupedCloud grouped;
    std::vector<Eigen::MatrixXd> h; // per-layer post-activation, U x width
    Eigen::VectorXd feature;
};

Eigen::VectorXd encode(const ModelParams& params, const PointCloud& cloud);
Eigen::VectorXd encode(const ModelParams& params, const PointCloud& cloud,
                       EncodeTrace& trace);

// Row-wise encoder over pre-grouped unique points (no pooling); trace.grouped
// must be filled by the caller. Used to share per-point features across
// several pooled subsets of the same cloud.
void encode_rows(const ModelParams& params, EncodeTrace& trace);

// Average-pool rows of the last activation with the given multiplicities,
// accumulated in row order and divided by total.
Eigen::VectorXd pool_rows(const Eigen::MatrixXd& last, const std::vector<double>& mult,
                          double total);

struct DecodeTrace {
    Eigen::MatrixXd input; // R x feature_dim
    std::vector<Eigen::MatrixXd> h; // hidden post-activations, R x width
};

// Batched decode: one feature vector per row, one flattened xyz row out.
Eigen::MatrixXd decode_rows(const ModelParams& params, const Eigen::MatrixXd& features);
Eigen::MatrixXd decode_rows(const ModelParams& params, const Eigen::MatrixXd& features,
                            DecodeTrace& trace);

PointCloud decode(const ModelParams& params, const Eigen::VectorXd& feature);
PointCloud forward_complete(const ModelParams& params, const PointCloud& partial);

PointCloud rows_to_cloud(const Eigen::MatrixXd& rows, Eigen::Index row, int n_out);

// ---- backward ----

// d(loss)/d(flattened decoder output) -> parameter grads; optionally also
// d(loss)/d(feature rows).
void decode_backward(const ModelParams& params, const DecodeTrace& trace,
                     const Eigen::MatrixXd& d_out, ParamStack& grads,
                     Eigen::MatrixXd* d_features = nullptr);

// Upstream gradient on the last per-point activation rows -> parameter grads.
void encode_backward_rows(const ModelParams& params, const EncodeTrace& trace,
                          const Eigen::MatrixXd& d_last, ParamStack& grads);

// Upstream gradient on the pooled feature -> parameter grads (expands through
// the multiplicity-weighted average).
void encode_backward_pooled(const ModelParams& params, const EncodeTrace& trace,
                            const Eigen::VectorXd& d_feature, ParamStack& grads);

// ---- persistence ----
// Binary little-endian: magic "CLPCMD01", u32 n_out, u32 layer counts, a
// per-layer (out,in) shape table, then row-major weight + bias doubles,
// encoder first. load_params reads exactly this block and ignores trailing
// bytes, so it also accepts training checkpoints (which append optimizer
// state after the model block).
void save_params(const ModelParams& params, const std::string& path);
ModelParams load_params(const std::string& path);

// Same block as an inner stream segment (checkpoints append to it).
void write_params_stream(const ModelParams& params, std::ostream& os);
ModelParams read_params_stream(std::istream& is);

} // namespace clpc
