#pragma once

#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "celab/errors.hpp"

namespace celab {

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major real tensor with an optional gradient buffer and the
// bookkeeping needed for reverse-mode differentiation. Values are produced
// once by an op and never mutated afterwards; only adam_step writes into
// leaf parameter data.
class Tensor : public std::enable_shared_from_this<Tensor> {
public:
    std::vector<int> shape;
    std::vector<double> data;
    bool requires_grad = false;
    std::vector<double> grad;  // empty until backward touches this node

    // autodiff graph wiring (empty for leaves)
    std::vector<TensorPtr> parents;
    std::function<void(Tensor&)> backward_fn;

    Tensor() = default;
    Tensor(std::vector<int> s, std::vector<double> d, bool req = false);

    std::size_t numel() const { return data.size(); }
    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    void ensure_grad();

    static TensorPtr zeros(std::vector<int> shape, bool requires_grad = false);
    static TensorPtr full(std::vector<int> shape, double value, bool requires_grad = false);
    static TensorPtr from_data(std::vector<int> shape, std::vector<double> data,
                               bool requires_grad = false);
};

std::size_t shape_numel(const std::vector<int>& shape);
std::string shape_str(const std::vector<int>& shape);

// Reverse-mode sweep from a scalar loss node. Fills `grad` on every tensor
// reachable from `loss` that requires a gradient (directly or through a
// parent chain). Throws ShapeError when loss is not a scalar.
void backward(const TensorPtr& loss);

}  // namespace celab
