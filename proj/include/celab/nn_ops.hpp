#pragma once

#include <array>

#include "celab/tensor.hpp"

namespace celab::ops {

// All spatial ops use the layout height x width x channels (row-major),
// kernels kh x kw x c_in x c_out. Convolutions are stride-1, same-padding:
// floor((k-1)/2) zeros before, ceil((k-1)/2) after, so even kernel extents
// pad asymmetrically.

TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias);

// Adjoint of a strided convolution evaluated on its full support
// (h-1)*s_h+kh x (w-1)*s_w+kw, then center-cropped or zero-padded to the
// requested target extents. Bias is added after cropping, on every output
// element.
TensorPtr transposed_conv2d(const TensorPtr& input, const TensorPtr& kernel,
                            const TensorPtr& bias, std::array<int, 2> stride,
                            std::array<int, 2> target);

TensorPtr relu(const TensorPtr& input);

TensorPtr add_n(const std::vector<TensorPtr>& inputs);

// Align-corners bilinear resize of the two leading (spatial) axes,
// per-channel. Linear in its input; the backward pass is the fixed adjoint.
TensorPtr bilinear_resize(const TensorPtr& input, std::array<int, 2> target);

// Mean of squared elementwise differences, as a scalar graph node.
TensorPtr mse_loss(const TensorPtr& prediction, const TensorPtr& label);

}  // namespace celab::ops
