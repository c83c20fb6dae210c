#include "celab/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace celab {

std::size_t shape_numel(const std::vector<int>& shape) {
    std::size_t n = 1;
    for (int e : shape) n *= static_cast<std::size_t>(e);
    return n;
}

std::string shape_str(const std::vector<int>& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

Tensor::Tensor(std::vector<int> s, std::vector<double> d, bool req)
    : shape(std::move(s)), data(std::move(d)), requires_grad(req) {
    for (int e : shape) {
        if (e <= 0) throw ShapeError("tensor extent must be positive, got shape " + shape_str(shape));
    }
    if (shape_numel(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_str(shape));
    }
}

void Tensor::ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
}

TensorPtr Tensor::zeros(std::vector<int> shape, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

TensorPtr Tensor::full(std::vector<int> shape, double value, bool requires_grad) {
    std::size_t n = shape_numel(shape);
    return std::make_shared<Tensor>(std::move(shape), std::vector<double>(n, value), requires_grad);
}

TensorPtr Tensor::from_data(std::vector<int> shape, std::vector<double> data, bool requires_grad) {
    return std::make_shared<Tensor>(std::move(shape), std::move(data), requires_grad);
}

namespace {

void topo_visit(const TensorPtr& node, std::unordered_set<Tensor*>& seen,
                std::vector<TensorPtr>& order) {
    if (seen.count(node.get())) return;
    seen.insert(node.get());
    for (const auto& p : node->parents) topo_visit(p, seen, order);
    order.push_back(node);
}

}  // namespace

void backward(const TensorPtr& loss) {
    if (!loss) throw ShapeError("backward: null loss node");
    if (loss->numel() != 1) {
        throw ShapeError("backward requires a scalar loss, got shape " + shape_str(loss->shape));
    }
    std::unordered_set<Tensor*> seen;
    std::vector<TensorPtr> order;
    topo_visit(loss, seen, order);

    loss->ensure_grad();
    loss->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor& node = **it;
        if (node.backward_fn && !node.grad.empty()) node.backward_fn(node);
    }
}

}  // namespace celab
