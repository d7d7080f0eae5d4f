#include "clpc/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>

#include "clpc/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "on-disk format is little-endian");

namespace clpc {

namespace {

LayerParams glorot_layer(int out, int in, SeededRng& rng) {
    LayerParams layer;
    layer.weight.resize(out, in);
    layer.bias = Eigen::VectorXd::Zero(out);
    const double bound = std::sqrt(6.0 / (in + out));
    for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) layer.weight(r, c) = rng.uniform(-bound, bound);
    return layer;
}

inline void relu_inplace(Eigen::MatrixXd& m) { m = m.array().max(0.0); }

// ReLU' from the post-activation: positive output <=> positive pre-activation
// (and the derivative at exactly zero is taken as zero).
inline Eigen::ArrayXXd relu_mask(const Eigen::MatrixXd& post) {
    return (post.array() > 0.0).cast<double>();
}

void affine_rows(const LayerParams& layer, const Eigen::MatrixXd& in,
                 Eigen::MatrixXd& out) {
    out.noalias() = in * layer.weight.transpose();
    out.rowwise() += layer.bias.transpose();
}

void check_dims(const ModelParams& p) {
    if (p.encoder.empty() || p.decoder.empty()) throw ComputeError("model: empty stack");
    if (p.encoder.front().weight.cols() != 3)
        throw ComputeError("model: encoder input dim != 3");
    if (p.decoder.back().weight.rows() != 3 * static_cast<Eigen::Index>(p.n_out))
        throw ComputeError("model: decoder output dim != 3*n_out");
}

} // namespace

ModelParams init_model(int n_out, SeededRng& rng, const ModelWidths& widths) {
    if (n_out < 1) throw ComputeError("model: n_out < 1");
    if (widths.encoder.empty()) throw ComputeError("model: empty encoder widths");
    ModelParams p;
    p.n_out = n_out;
    int in = 3;
    for (int w : widths.encoder) {
        p.encoder.push_back(glorot_layer(w, in, rng));
        in = w;
    }
    for (int w : widths.decoder_hidden) {
        p.decoder.push_back(glorot_layer(w, in, rng));
        in = w;
    }
    p.decoder.push_back(glorot_layer(3 * n_out, in, rng));
    return p;
}

ParamStack zeros_like(const ParamStack& shape) {
    ParamStack z;
    auto zero_layers = [](const std::vector<LayerParams>& src, std::vector<LayerParams>& dst) {
        dst.reserve(src.size());
        for (const LayerParams& l : src)
            dst.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                           Eigen::VectorXd::Zero(l.bias.size())});
    };
    zero_layers(shape.encoder, z.encoder);
    zero_layers(shape.decoder, z.decoder);
    return z;
}

GroupedCloud group_points(const PointCloud& cloud) {
    if (cloud.empty()) throw ComputeError("encode: empty cloud");
    std::vector<std::size_t> order(cloud.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (!(cloud[a] == cloud[b])) return lex_less(cloud[a], cloud[b]);
        return a < b;
    });

    GroupedCloud g;
    g.total = cloud.size();
    g.group_of.resize(cloud.size());
    std::vector<std::size_t> reps;
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (i == 0 || !(cloud[order[i]] == cloud[order[i - 1]])) {
            reps.push_back(order[i]);
            g.multiplicity.push_back(0.0);
        }
        g.multiplicity.back() += 1.0;
        g.group_of[order[i]] = reps.size() - 1;
    }
    g.unique.resize(static_cast<Eigen::Index>(reps.size()), 3);
    for (std::size_t u = 0; u < reps.size(); ++u) {
        g.unique(static_cast<Eigen::Index>(u), 0) = cloud[reps[u]].x;
        g.unique(static_cast<Eigen::Index>(u), 1) = cloud[reps[u]].y;
        g.unique(static_cast<Eigen::Index>(u), 2) = cloud[reps[u]].z;
    }
    return g;
}

void encode_rows(const ModelParams& params, EncodeTrace& trace) {
    check_dims(params);
    trace.h.assign(params.encoder.size(), {});
    const Eigen::MatrixXd* in = &trace.grouped.unique;
    for (std::size_t l = 0; l < params.encoder.size(); ++l) {
        affine_rows(params.encoder[l], *in, trace.h[l]);
        if (l + 1 < params.encoder.size()) relu_inplace(trace.h[l]);
        in = &trace.h[l];
    }
}

Eigen::VectorXd pool_rows(const Eigen::MatrixXd& last, const std::vector<double>& mult,
                          double total) {
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(last.cols());
    for (Eigen::Index u = 0; u < last.rows(); ++u)
        acc += mult[static_cast<std::size_t>(u)] * last.row(u).transpose();
    return acc / total;
}

Eigen::VectorXd encode(const ModelParams& params, const PointCloud& cloud,
                       EncodeTrace& trace) {
    trace.grouped = group_points(cloud);
    encode_rows(params, trace);
    trace.feature = pool_rows(trace.h.back(), trace.grouped.multiplicity,
                              static_cast<double>(trace.grouped.total));
    return trace.feature;
}

Eigen::VectorXd encode(const ModelParams& params, const PointCloud& cloud) {
    EncodeTrace trace;
    return encode(params, cloud, trace);
}

Eigen::MatrixXd decode_rows(const ModelParams& params, const Eigen::MatrixXd& features,
                            DecodeTrace& trace) {
    check_dims(params);
    trace.input = features;
    trace.h.assign(params.decoder.size() - 1, {});
    const Eigen::MatrixXd* in = &trace.input;
    for (std::size_t l = 0; l + 1 < params.decoder.size(); ++l) {
        affine_rows(params.decoder[l], *in, trace.h[l]);
        relu_inplace(trace.h[l]);
        in = &trace.h[l];
    }
    Eigen::MatrixXd out;
    affine_rows(params.decoder.back(), *in, out);
    return out;
}

Eigen::MatrixXd decode_rows(const ModelParams& params, const Eigen::MatrixXd& features) {
    DecodeTrace trace;
    return decode_rows(params, features, trace);
}

PointCloud rows_to_cloud(const Eigen::MatrixXd& rows, Eigen::Index row, int n_out) {
    PointCloud out(static_cast<std::size_t>(n_out));
    for (int i = 0; i < n_out; ++i)
        out[static_cast<std::size_t>(i)] = {rows(row, 3 * i), rows(row, 3 * i + 1),
                                            rows(row, 3 * i + 2)};
    return out;
}

PointCloud decode(const ModelParams& params, const Eigen::VectorXd& feature) {
    const Eigen::MatrixXd out = decode_rows(params, feature.transpose());
    return rows_to_cloud(out, 0, params.n_out);
}

PointCloud forward_complete(const ModelParams& params, const PointCloud& partial) {
    return decode(params, encode(params, partial));
}

void decode_backward(const ModelParams& params, const DecodeTrace& trace,
                     const Eigen::MatrixXd& d_out, ParamStack& grads,
                     Eigen::MatrixXd* d_features) {
    const std::size_t L = params.decoder.size();
    Eigen::MatrixXd dz = d_out; // last layer is linear
    for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd& in = (l == 0) ? trace.input : trace.h[l - 1];
        grads.decoder[l].weight.noalias() += dz.transpose() * in;
        grads.decoder[l].bias += dz.colwise().sum().transpose();
        if (l == 0) {
            if (d_features) d_features->noalias() = dz * params.decoder[0].weight;
            break;
        }
        Eigen::MatrixXd dh;
        dh.noalias() = dz * params.decoder[l].weight;
        dz = dh.array() * relu_mask(trace.h[l - 1]);
    }
}

void encode_backward_rows(const ModelParams& params, const EncodeTrace& trace,
                          const Eigen::MatrixXd& d_last, ParamStack& grads) {
    const std::size_t L = params.encoder.size();
    Eigen::MatrixXd dz = d_last; // last layer has no activation
    for (std::size_t l = L; l-- > 0;) {
        const Eigen::MatrixXd& in = (l == 0) ? trace.grouped.unique : trace.h[l - 1];
        grads.encoder[l].weight.noalias() += dz.transpose() * in;
        grads.encoder[l].bias += dz.colwise().sum().transpose();
        if (l == 0) break;
        Eigen::MatrixXd dh;
        dh.noalias() = dz * params.encoder[l].weight;
        dz = dh.array() * relu_mask(trace.h[l - 1]);
    }
}

void encode_backward_pooled(const ModelParams& params, const EncodeTrace& trace,
                            const Eigen::VectorXd& d_feature, ParamStack& grads) {
    const Eigen::Index U = trace.h.back().rows();
    const double n = static_cast<double>(trace.grouped.total);
    Eigen::MatrixXd d_last(U, d_feature.size());
    for (Eigen::Index u = 0; u < U; ++u)
        d_last.row(u) =
            (trace.grouped.multiplicity[static_cast<std::size_t>(u)] / n) *
            d_feature.transpose();
    encode_backward_rows(params, trace, d_last, grads);
}

// ---- persistence ----

namespace {

constexpr char kMagic[8] = {'C', 'L', 'P', 'C', 'M', 'D', '0', '1'};

void write_u32(std::ostream& os, std::uint32_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw DataError("model file: truncated");
    return v;
}

void write_layer(std::ostream& os, const LayerParams& l) {
    std::vector<double> buf;
    buf.reserve(static_cast<std::size_t>(l.weight.size()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) buf.push_back(l.weight(r, c));
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(double)));
    os.write(reinterpret_cast<const char*>(l.bias.data()),
             static_cast<std::streamsize>(l.bias.size()) * sizeof(double));
}

void read_layer(std::istream& is, LayerParams& l) {
    std::vector<double> buf(static_cast<std::size_t>(l.weight.size()));
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(double)));
    if (!is) throw DataError("model file: truncated");
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) l.weight(r, c) = buf[k++];
    is.read(reinterpret_cast<char*>(l.bias.data()),
            static_cast<std::streamsize>(l.bias.size()) * sizeof(double));
    if (!is) throw DataError("model file: truncated");
}

} // namespace

void save_params(const ModelParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot open for writing: " + path);
    write_params_stream(params, os);
    if (!os) throw DataError("write failed: " + path);
}

void write_params_stream(const ModelParams& params, std::ostream& os) {
    os.write(kMagic, sizeof kMagic);
    write_u32(os, static_cast<std::uint32_t>(params.n_out));
    write_u32(os, static_cast<std::uint32_t>(params.encoder.size()));
    write_u32(os, static_cast<std::uint32_t>(params.decoder.size()));
    auto shape = [&](const std::vector<LayerParams>& layers) {
        for (const LayerParams& l : layers) {
            write_u32(os, static_cast<std::uint32_t>(l.weight.rows()));
            write_u32(os, static_cast<std::uint32_t>(l.weight.cols()));
        }
    };
    shape(params.encoder);
    shape(params.decoder);
    for (const LayerParams& l : params.encoder) write_layer(os, l);
    for (const LayerParams& l : params.decoder) write_layer(os, l);
}

ModelParams load_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open: " + path);
    return read_params_stream(is);
}

ModelParams read_params_stream(std::istream& is) {
    char magic[8];
    is.read(magic, sizeof magic);
    if (!is) throw DataError("model file: truncated");
    if (!std::equal(magic, magic + 8, kMagic)) {
        if (std::equal(magic, magic + 6, kMagic)) throw DataError("model file: unsupported version");
        throw DataError("model file: bad magic");
    }
    ModelParams p;
    p.n_out = static_cast<int>(read_u32(is));
    const std::uint32_t n_enc = read_u32(is);
    const std::uint32_t n_dec = read_u32(is);
    constexpr std::uint32_t kMaxLayers = 64;
    constexpr std::uint32_t kMaxDim = 1u << 24;
    if (p.n_out < 1 || n_enc < 1 || n_dec < 1 || n_enc > kMaxLayers || n_dec > kMaxLayers)
        throw DataError("model file: implausible header");
    auto read_shapes = [&](std::uint32_t n, std::vector<LayerParams>& layers) {
        for (std::uint32_t i = 0; i < n; ++i) {
            const std::uint32_t out = read_u32(is);
            const std::uint32_t in = read_u32(is);
            if (out < 1 || in < 1 || out > kMaxDim || in > kMaxDim)
                throw DataError("model file: implausible layer shape");
            LayerParams l;
            l.weight.resize(out, in);
            l.bias.resize(out);
            layers.push_back(std::move(l));
        }
    };
    read_shapes(n_enc, p.encoder);
    read_shapes(n_dec, p.decoder);

    // Chain consistency before allocating/reading the big blocks.
    if (p.encoder.front().weight.cols() != 3) throw DataError("model file: encoder input dim != 3");
    for (std::size_t l = 1; l < p.encoder.size(); ++l)
        if (p.encoder[l].weight.cols() != p.encoder[l - 1].weight.rows())
            throw DataError("model file: encoder layer shape mismatch");
    if (p.decoder.front().weight.cols() != p.encoder.back().weight.rows())
        throw DataError("model file: decoder input dim mismatch");
    for (std::size_t l = 1; l < p.decoder.size(); ++l)
        if (p.decoder[l].weight.cols() != p.decoder[l - 1].weight.rows())
            throw DataError("model file: decoder layer shape mismatch");
    if (p.decoder.back().weight.rows() != 3 * static_cast<Eigen::Index>(p.n_out))
        throw DataError("model file: decoder output dim != 3*n_out");

    for (LayerParams& l : p.encoder) read_layer(is, l);
    for (LayerParams& l : p.decoder) read_layer(is, l);
    return p;
}

} // namespace clpc
