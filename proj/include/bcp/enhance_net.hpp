#pragma once

#include "bcp/attention.hpp"
#include "bcp/bright_channel.hpp"
#include "bcp/matting.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bcp {

inline constexpr double kDefaultLearningRate = 0.05;
inline constexpr int kDefaultTrainSteps = 500;

enum class Activation { Rectifier, Sigmoid };

// One 3x3 convolution layer. stride 2 halves the grid (odd extents are
// zero-padded to even first); upsample_before doubles it with nearest
// neighbor. Sigmoid appears only on the final layer.
struct ConvLayerSpec {
    int in_channels = 0;
    int out_channels = 0;
    int stride = 1;
    Activation activation = Activation::Rectifier;
    bool upsample_before = false;
};

// The fixed encoder-decoder: 3->8/s2, 8->16/s2, up+16->8, up+8->1(sigmoid).
// The attention map gates the activations of every layer at that layer's
// resolution.
const std::vector<ConvLayerSpec>& enhance_net_architecture();

struct NetworkParams {
    struct Layer {
        // weights(o, c*9 + k) with k = 3*kr + kc scanning the 3x3 taps.
        Eigen::MatrixXd weights;
        Eigen::VectorXd bias;
    };
    std::vector<Layer> layers;
    std::uint64_t seed = 0;
};

// Fan-in scaled uniform init in [-s, s], s = sqrt(1/(in_channels*9));
// biases start at zero. Deterministic per seed.
NetworkParams init_network_params(std::uint64_t seed);

// Same shapes as NetworkParams, holding d(loss)/d(parameter).
struct NetworkGradients {
    std::vector<NetworkParams::Layer> layers;
};

// Gated forward pass producing the illumination map (values in [0,1)).
// gate_final controls whether the sigmoid output itself is multiplied by
// the attention map ("all layers" read literally; on by default).
IlluminationMap net_forward(const NetworkParams& params, const RasterImage& visible,
                            const AttentionMap& attention, bool gate_final = true);

struct BackwardResult {
    NetworkGradients grads;
    LossBreakdown loss;
    IlluminationMap t;
};

// Reverse-mode gradient of bcp_loss(net_forward(...), t_tilde, lap, lambda)
// with respect to every weight and bias, through the gated
// conv/upsample/sigmoid graph and the Laplacian quadratic term.
BackwardResult net_backward(const NetworkParams& params, const RasterImage& visible,
                            const AttentionMap& attention, const IlluminationMap& t_tilde,
                            const SparseAffinity& lap, double lambda, bool gate_final = true);

struct TrainConfig {
    double learning_rate = kDefaultLearningRate;
    int steps = kDefaultTrainSteps;
    double lambda = kDefaultLambda;
    std::uint64_t seed = 0;
    double gamma = kDefaultGamma;
    PatchSpec patch = {};
    double ambient_fraction = kDefaultAmbientFraction;
    double t_min = kDefaultTMin;
    double matting_epsilon = kDefaultMattingEpsilon;
    // When set, skips estimation and uses this ambient light directly.
    std::optional<AmbientLight> ambient_override;
};

struct TrainResult {
    NetworkParams params;
    IlluminationMap t;                   // forward pass with the final params
    std::vector<LossBreakdown> history;  // loss before each update; length = steps
    LossBreakdown final_loss;            // loss after the last update
    AmbientLight ambient;
    IlluminationMap t_tilde;
    AttentionMap attention;
};

// Plain gradient descent on the unsupervised loss. Throws DivergenceError
// (with the step index) if the loss goes non-finite.
TrainResult train(const RasterImage& visible, const RasterImage& thermal,
                  const TrainConfig& cfg);

// Checkpoint file: magic "BCPN", version, layer count and shapes, then
// little-endian f64 weights and biases per layer.
void save_network_params(const NetworkParams& params, const std::string& path);
NetworkParams load_network_params(const std::string& path);

} // namespace bcp
