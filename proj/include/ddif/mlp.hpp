#pragma once

#include <string>
#include <vector>

#include "ddif/numerics.hpp"
#include "ddif/rng.hpp"

namespace ddif {

class Rng;

enum class Activation { relu, tanh };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected network. weights[l] is row-major [out x in] for layer l;
// hidden layers apply the activation, the final layer is linear.
struct MlpParams {
    std::vector<int> layer_dims;                 // [d_in, h1, ..., d_out]
    std::vector<std::vector<double>> weights;    // layer_dims.size() - 1 entries
    std::vector<std::vector<double>> biases;
    Activation activation = Activation::relu;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t layer_count() const { return weights.size(); }
};

// Throws ShapeError unless weight/bias shapes agree with layer_dims.
void validate_mlp(const MlpParams& p);

// Weights uniform in (-1/sqrt(fan_in), +1/sqrt(fan_in)), biases zero.
// Draw order: layer by layer, weights row-major.
MlpParams mlp_init(std::vector<int> layer_dims, Activation act, Rng& rng);

// All-zero parameters; a zeroed net outputs a constant 0 for any input.
MlpParams mlp_zeros(std::vector<int> layer_dims, Activation act);

Embedding mlp_forward(const MlpParams& p, const Embedding& input);

// Parameter-shaped gradient accumulator.
struct MlpGrads {
    std::vector<std::vector<double>> weights;
    std::vector<std::vector<double>> biases;
};

MlpGrads zero_grads_like(const MlpParams& p);
void accumulate(MlpGrads& into, const MlpGrads& delta);
void scale(MlpGrads& g, double factor);

struct BackwardResult {
    MlpGrads param_grads;
    Embedding input_grad;
};

// Analytic backprop of upstream_grad (dLoss/dOutput) through the net,
// recomputing the forward trace internally. relu'(0) is taken as 0.
BackwardResult mlp_backward(const MlpParams& p, const Embedding& input,
                            const Embedding& upstream_grad);

// Plain SGD: theta - lr * grad. Pure; inputs untouched.
MlpParams sgd_step(const MlpParams& p, const MlpGrads& grads, double lr);

// Checkpoint format:
//   line 1: "DDIF-MLP v1"
//   line 2: layer dims, space separated
//   line 3: activation name
//   one line per layer of row-major weights, then one line per layer of
//   biases; 17 significant digits so values round-trip bit-exactly.
void save_mlp(const MlpParams& p, const std::string& path);
MlpParams load_mlp(const std::string& path);

}  // namespace ddif
