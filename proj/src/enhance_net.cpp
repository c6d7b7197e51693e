#include "bcp/enhance_net.hpp"

#include "bcp/errors.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace bcp {

const std::vector<ConvLayerSpec>& enhance_net_architecture() {
    static const std::vector<ConvLayerSpec> arch = {
        {3, 8, 2, Activation::Rectifier, false},
        {8, 16, 2, Activation::Rectifier, false},
        {16, 8, 1, Activation::Rectifier, true},
        {8, 1, 1, Activation::Sigmoid, true},
    };
    return arch;
}

NetworkParams init_network_params(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    NetworkParams params;
    params.seed = seed;
    for (const ConvLayerSpec& spec : enhance_net_architecture()) {
        const double s = std::sqrt(1.0 / (spec.in_channels * 9.0));
        std::uniform_real_distribution<double> dist(-s, s);
        NetworkParams::Layer layer;
        layer.weights.resize(spec.out_channels, spec.in_channels * 9);
        for (Eigen::Index o = 0; o < layer.weights.rows(); ++o)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) layer.weights(o, c) = dist(rng);
        layer.bias = Eigen::VectorXd::Zero(spec.out_channels);
        params.layers.push_back(std::move(layer));
    }
    return params;
}

namespace {

// Feature maps are (channels x pixels), pixels row-major over the grid.

Eigen::MatrixXd upsample2x(const Eigen::MatrixXd& in, int w, int h) {
    Eigen::MatrixXd out(in.rows(), static_cast<Eigen::Index>(4) * w * h);
    for (int r = 0; r < 2 * h; ++r)
        for (int c = 0; c < 2 * w; ++c)
            out.col(static_cast<Eigen::Index>(r) * 2 * w + c) =
                in.col(static_cast<Eigen::Index>(r / 2) * w + c / 2);
    return out;
}

Eigen::MatrixXd upsample2x_backward(const Eigen::MatrixXd& grad, int w, int h) {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grad.rows(), static_cast<Eigen::Index>(w) * h);
    for (int r = 0; r < 2 * h; ++r)
        for (int c = 0; c < 2 * w; ++c)
            out.col(static_cast<Eigen::Index>(r / 2) * w + c / 2) +=
                grad.col(static_cast<Eigen::Index>(r) * 2 * w + c);
    return out;
}

// 3x3 taps with zero padding 1; output pixel (r,c) reads input centered at
// (stride*r, stride*c). Taps past the input extent (the pad-1 ring, plus the
// implicit pad-to-even row/column under stride 2) contribute zero.
Eigen::MatrixXd im2col(const Eigen::MatrixXd& in, int in_w, int in_h, int stride, int out_w,
                       int out_h) {
    const Eigen::Index cin = in.rows();
    Eigen::MatrixXd patches =
        Eigen::MatrixXd::Zero(cin * 9, static_cast<Eigen::Index>(out_w) * out_h);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            const Eigen::Index p = static_cast<Eigen::Index>(r) * out_w + c;
            for (int k = 0; k < 9; ++k) {
                const int rr = stride * r + k / 3 - 1;
                const int cc = stride * c + k % 3 - 1;
                if (rr < 0 || rr >= in_h || cc < 0 || cc >= in_w) continue;
                const Eigen::Index q = static_cast<Eigen::Index>(rr) * in_w + cc;
                for (Eigen::Index ch = 0; ch < cin; ++ch) patches(ch * 9 + k, p) = in(ch, q);
            }
        }
    return patches;
}

Eigen::MatrixXd col2im(const Eigen::MatrixXd& dpatches, Eigen::Index cin, int in_w, int in_h,
                       int stride, int out_w, int out_h) {
    Eigen::MatrixXd din = Eigen::MatrixXd::Zero(cin, static_cast<Eigen::Index>(in_w) * in_h);
    for (int r = 0; r < out_h; ++r)
        for (int c = 0; c < out_w; ++c) {
            const Eigen::Index p = static_cast<Eigen::Index>(r) * out_w + c;
            for (int k = 0; k < 9; ++k) {
                const int rr = stride * r + k / 3 - 1;
                const int cc = stride * c + k % 3 - 1;
                if (rr < 0 || rr >= in_h || cc < 0 || cc >= in_w) continue;
                const Eigen::Index q = static_cast<Eigen::Index>(rr) * in_w + cc;
                for (Eigen::Index ch = 0; ch < cin; ++ch) din(ch, q) += dpatches(ch * 9 + k, p);
            }
        }
    return din;
}

struct LayerTrace {
    int in_w = 0, in_h = 0;   // post-upsample input extent
    int out_w = 0, out_h = 0; // conv output extent
    Eigen::MatrixXd patches;  // im2col of the convolved input
    Eigen::MatrixXd z;        // pre-activation
    Eigen::MatrixXd act;      // post-activation, pre-gate
    Eigen::ArrayXd gate;      // attention at the output extent (empty on the final layer)
};

struct ForwardTrace {
    std::vector<LayerTrace> layers;
    Eigen::ArrayXd t; // final output, cropped to the image extent and gated
};

ForwardTrace run_forward(const NetworkParams& params, const RasterImage& visible,
                         const AttentionMap& attention, bool gate_final) {
    const auto& arch = enhance_net_architecture();
    if (params.layers.size() != arch.size())
        throw std::invalid_argument("network parameters do not match the architecture");
    if (attention.width != visible.width() || attention.height != visible.height())
        throw std::invalid_argument("attention extent does not match the visible image");
    for (size_t l = 0; l < arch.size(); ++l) {
        if (params.layers[l].weights.rows() != arch[l].out_channels ||
            params.layers[l].weights.cols() != static_cast<Eigen::Index>(arch[l].in_channels) * 9 ||
            params.layers[l].bias.size() != arch[l].out_channels)
            throw std::invalid_argument("network parameters do not match the architecture");
        if (!params.layers[l].weights.allFinite() || !params.layers[l].bias.allFinite())
            throw std::invalid_argument("network parameters are not finite");
    }

    const int orig_w = visible.width();
    const int orig_h = visible.height();
    const Eigen::Index n = visible.pixel_count();

    Eigen::MatrixXd feat(arch.front().in_channels, n);
    for (int ch = 0; ch < arch.front().in_channels; ++ch)
        feat.row(ch) = visible.plane(ch % visible.channels()).transpose();

    ForwardTrace trace;
    trace.layers.resize(arch.size());
    int w = orig_w, h = orig_h;

    for (size_t l = 0; l < arch.size(); ++l) {
        const ConvLayerSpec& spec = arch[l];
        LayerTrace& lt = trace.layers[l];

        if (spec.upsample_before) {
            feat = upsample2x(feat, w, h);
            w *= 2;
            h *= 2;
        }
        lt.in_w = w;
        lt.in_h = h;

        const int grid_w = (spec.stride == 2 && w % 2) ? w + 1 : w;
        const int grid_h = (spec.stride == 2 && h % 2) ? h + 1 : h;
        lt.out_w = grid_w / spec.stride;
        lt.out_h = grid_h / spec.stride;

        lt.patches = im2col(feat, w, h, spec.stride, lt.out_w, lt.out_h);
        lt.z = params.layers[l].weights * lt.patches;
        lt.z.colwise() += params.layers[l].bias;
        if (spec.activation == Activation::Rectifier)
            lt.act = lt.z.cwiseMax(0.0);
        else
            lt.act = (1.0 / (1.0 + (-lt.z.array()).exp())).matrix();

        w = lt.out_w;
        h = lt.out_h;
        if (l + 1 < arch.size()) {
            lt.gate = attention_pyramid(attention, {{w, h}}).front().values;
            feat = lt.act * lt.gate.matrix().asDiagonal();
        }
    }

    // Crop the final map back to the image extent, then gate at full size.
    const LayerTrace& last = trace.layers.back();
    trace.t.resize(n);
    for (int r = 0; r < orig_h; ++r)
        for (int c = 0; c < orig_w; ++c)
            trace.t[static_cast<Eigen::Index>(r) * orig_w + c] =
                last.act(0, static_cast<Eigen::Index>(r) * last.out_w + c);
    if (gate_final) trace.t *= attention.values;
    return trace;
}

} // namespace

IlluminationMap net_forward(const NetworkParams& params, const RasterImage& visible,
                            const AttentionMap& attention, bool gate_final) {
    ForwardTrace trace = run_forward(params, visible, attention, gate_final);
    return {visible.width(), visible.height(), std::move(trace.t)};
}

BackwardResult net_backward(const NetworkParams& params, const RasterImage& visible,
                            const AttentionMap& attention, const IlluminationMap& t_tilde,
                            const SparseAffinity& lap, double lambda, bool gate_final) {
    const auto& arch = enhance_net_architecture();
    ForwardTrace trace = run_forward(params, visible, attention, gate_final);

    BackwardResult out;
    out.t = {visible.width(), visible.height(), trace.t};
    out.loss = bcp_loss(out.t, t_tilde, lap, lambda);

    // dL/dt of the unweighted loss, then back through the final gate + crop.
    Eigen::ArrayXd dt = bcp_loss_gradient(out.t, t_tilde, lap, lambda);
    if (gate_final) dt *= attention.values;

    const int orig_w = visible.width();
    const int orig_h = visible.height();
    const LayerTrace& last = trace.layers.back();
    Eigen::MatrixXd grad =
        Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(last.out_w) * last.out_h);
    for (int r = 0; r < orig_h; ++r)
        for (int c = 0; c < orig_w; ++c)
            grad(0, static_cast<Eigen::Index>(r) * last.out_w + c) =
                dt[static_cast<Eigen::Index>(r) * orig_w + c];

    out.grads.layers.resize(arch.size());
    for (size_t li = arch.size(); li-- > 0;) {
        const ConvLayerSpec& spec = arch[li];
        const LayerTrace& lt = trace.layers[li];

        // grad holds dL/d(layer output); fold in the gate for hidden layers.
        if (li + 1 < arch.size()) grad = grad * lt.gate.matrix().asDiagonal();

        Eigen::MatrixXd dz;
        if (spec.activation == Activation::Rectifier)
            dz = (lt.z.array() > 0.0).cast<double>() * grad.array();
        else
            dz = (lt.act.array() * (1.0 - lt.act.array()) * grad.array()).matrix();

        out.grads.layers[li].weights = dz * lt.patches.transpose();
        out.grads.layers[li].bias = dz.rowwise().sum();

        if (li > 0) {
            Eigen::MatrixXd dpatches = params.layers[li].weights.transpose() * dz;
            grad = col2im(dpatches, spec.in_channels, lt.in_w, lt.in_h, spec.stride, lt.out_w,
                          lt.out_h);
            if (spec.upsample_before) grad = upsample2x_backward(grad, lt.in_w / 2, lt.in_h / 2);
        }
    }
    return out;
}

TrainResult train(const RasterImage& visible, const RasterImage& thermal, const TrainConfig& cfg) {
    if (visible.width() != thermal.width() || visible.height() != thermal.height())
        throw std::invalid_argument("visible and thermal extents differ");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (cfg.steps < 1) throw std::invalid_argument("training needs at least one step");

    TrainResult res;
    res.attention = build_attention(thermal, cfg.gamma);
    res.ambient = cfg.ambient_override ? *cfg.ambient_override
                                       : estimate_ambient(visible, cfg.ambient_fraction);
    res.t_tilde = initial_illumination(visible, res.ambient, cfg.patch, cfg.t_min);
    const SparseAffinity lap = build_matting_laplacian(visible, cfg.matting_epsilon);

    res.params = init_network_params(cfg.seed);
    res.history.reserve(static_cast<size_t>(cfg.steps));
    for (int step = 0; step < cfg.steps; ++step) {
        BackwardResult back =
            net_backward(res.params, visible, res.attention, res.t_tilde, lap, cfg.lambda);
        if (!std::isfinite(back.loss.total))
            throw DivergenceError("training loss is not finite", step);
        res.history.push_back(back.loss);
        bool finite = true;
        for (size_t l = 0; l < res.params.layers.size(); ++l) {
            res.params.layers[l].weights -= cfg.learning_rate * back.grads.layers[l].weights;
            res.params.layers[l].bias -= cfg.learning_rate * back.grads.layers[l].bias;
            finite = finite && res.params.layers[l].weights.allFinite() &&
                     res.params.layers[l].bias.allFinite();
        }
        if (!finite) throw DivergenceError("network parameters diverged", step);
    }

    res.t = net_forward(res.params, visible, res.attention);
    res.final_loss = bcp_loss(res.t, res.t_tilde, lap, cfg.lambda);
    if (!std::isfinite(res.final_loss.total))
        throw DivergenceError("training loss is not finite", cfg.steps);
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoints: "BCPN", u32 version, u64 seed, u32 layer count, then per layer
// u32 rows / u32 cols / row-major f64 weights / f64 bias, all little-endian.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'B', 'C', 'P', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_bytes(std::ostream& os, std::uint64_t v, int nbytes) {
    for (int i = 0; i < nbytes; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_bytes(std::istream& is, int nbytes, const std::string& path) {
    std::uint64_t v = 0;
    for (int i = 0; i < nbytes; ++i) {
        const int ch = is.get();
        if (ch == EOF) throw IoError("truncated checkpoint: " + path);
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
    }
    return v;
}

} // namespace

void save_network_params(const NetworkParams& params, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot write file: " + path);
    os.write(kMagic, 4);
    put_bytes(os, kVersion, 4);
    put_bytes(os, params.seed, 8);
    put_bytes(os, params.layers.size(), 4);
    for (const auto& layer : params.layers) {
        put_bytes(os, static_cast<std::uint64_t>(layer.weights.rows()), 4);
        put_bytes(os, static_cast<std::uint64_t>(layer.weights.cols()), 4);
        for (Eigen::Index o = 0; o < layer.weights.rows(); ++o)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                put_bytes(os, std::bit_cast<std::uint64_t>(layer.weights(o, c)), 8);
        for (Eigen::Index o = 0; o < layer.bias.size(); ++o)
            put_bytes(os, std::bit_cast<std::uint64_t>(layer.bias[o]), 8);
    }
    if (!os) throw IoError("cannot write file: " + path);
}

NetworkParams load_network_params(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open file: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("not a network checkpoint: " + path);
    if (get_bytes(is, 4, path) != kVersion)
        throw IoError("unsupported checkpoint version: " + path);

    NetworkParams params;
    params.seed = get_bytes(is, 8, path);
    const auto& arch = enhance_net_architecture();
    const std::uint64_t nlayers = get_bytes(is, 4, path);
    if (nlayers != arch.size()) throw IoError("checkpoint layer count mismatch: " + path);
    for (size_t l = 0; l < nlayers; ++l) {
        const std::uint64_t rows = get_bytes(is, 4, path);
        const std::uint64_t cols = get_bytes(is, 4, path);
        if (rows != static_cast<std::uint64_t>(arch[l].out_channels) ||
            cols != static_cast<std::uint64_t>(arch[l].in_channels) * 9)
            throw IoError("checkpoint layer shape mismatch: " + path);
        NetworkParams::Layer layer;
        layer.weights.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index o = 0; o < layer.weights.rows(); ++o)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
                layer.weights(o, c) = std::bit_cast<double>(get_bytes(is, 8, path));
        layer.bias.resize(static_cast<Eigen::Index>(rows));
        for (Eigen::Index o = 0; o < layer.bias.size(); ++o)
            layer.bias[o] = std::bit_cast<double>(get_bytes(is, 8, path));
        params.layers.push_back(std::move(layer));
    }
    return params;
}

} // namespace bcp
