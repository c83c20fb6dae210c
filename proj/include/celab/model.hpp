#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "celab/channel.hpp"
#include "celab/nn_ops.hpp"
#include "celab/tensor.hpp"

namespace celab {

enum class LayerType { Conv, TransposedConv, Relu, AddN, BilinearResize };

// One node of the layer graph. `inputs` are node indices into
// ModelSpec::nodes; -1 refers to the network input.
struct LayerNode {
    LayerType type;
    std::string name;
    std::vector<int> inputs;
    std::vector<int> kernel_shape;  // kh, kw, c_in, c_out (conv types only)
    int param_index = -1;           // index into the weight list (conv types only)
    std::array<int, 2> stride{1, 1};
    std::array<int, 2> target{0, 0};  // transposed conv / resize output extents
};

struct ModelSpec {
    std::string kind;  // interp-resnet | reesnet-a | reesnet-b
    int n_filter = 0;
    std::vector<int> input_shape;   // P_sc, P_sym, 2
    std::vector<int> output_shape;  // 72, 14, 2
    std::vector<LayerNode> nodes;   // topological order; last node is the output

    int n_param_tensors() const;
};

// Weights: per conv layer a kernel tensor followed by its bias tensor,
// ordered by param_index.
using Weights = std::vector<TensorPtr>;

ModelSpec build_interpolation_resnet(int n_filter, std::vector<int> in_shape,
                                     std::vector<int> out_shape = {72, 14, 2});

ModelSpec build_reesnet(char variant, std::vector<int> in_shape,
                        std::vector<int> out_shape = {72, 14, 2});

long count_parameters(const ModelSpec& model);
long count_nonzero_weights(const Weights& weights, const ModelSpec& model);

// Half-scale Glorot-uniform kernels (+-sqrt(1.5/(fan_in+fan_out))), zero
// biases, deterministic in seed.
Weights init_weights(const ModelSpec& model, std::uint64_t seed);

// Forward pass building an autodiff graph over `weights`.
TensorPtr forward(const ModelSpec& model, const Weights& weights, const TensorPtr& input);

// Inference without gradient bookkeeping on the result.
TensorPtr infer(const ModelSpec& model, const Weights& weights, const TensorPtr& pilot_grid);

// Per-kernel binary masks (1 = kept); biases are never pruned.
struct PruneMask {
    double rate = 0.0;
    std::vector<std::vector<std::uint8_t>> kept;  // parallel to kernel tensors, by param_index
    long n_zeroed = 0;
};

// Global magnitude pruning over all convolution kernels: the smallest
// floor(rate * W) weights by |w| are zeroed (ties broken by stable index
// order). Returns the mask; weights are modified in place.
PruneMask prune_magnitude(Weights& weights, const ModelSpec& model, double rate);

void apply_mask(Weights& weights, const ModelSpec& model, const PruneMask& mask);

// Checkpoint file: magic "CEWT0001", layer count, per layer name, shape and
// 32-bit little-endian floats; optional mask section as parallel bit arrays.
void save_checkpoint(const std::string& path, const ModelSpec& model, const Weights& weights,
                     const PruneMask* mask = nullptr);

struct Checkpoint {
    Weights weights;
    bool has_mask = false;
    PruneMask mask;
};

Checkpoint load_checkpoint(const std::string& path, const ModelSpec& model);

// Pack an LS pilot observation as a dense P_sc x P_sym x 2 real tensor in
// pilot-index order; real/imag as channels.
TensorPtr pack_pilot_observation(const std::vector<std::vector<cplx>>& h_ls);

TensorPtr pack_grid(const ComplexGrid& grid);
ComplexGrid unpack_grid(const Tensor& t);

}  // namespace celab
