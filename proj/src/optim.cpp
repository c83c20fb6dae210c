#include "celab/optim.hpp"

namespace celab {

AdamState AdamState::init(const std::vector<TensorPtr>& params) {
    AdamState s;
    s.first_moment.reserve(params.size());
    s.second_moment.reserve(params.size());
    for (const auto& p : params) {
        s.first_moment.emplace_back(p->numel(), 0.0);
        s.second_moment.emplace_back(p->numel(), 0.0);
    }
    return s;
}

void adam_step(std::vector<TensorPtr>& params, AdamState& state, double rate, double l2) {
    if (rate <= 0.0) throw ParamError("adam_step: rate must be positive");
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: state holds " + std::to_string(state.first_moment.size()) +
                         " moment pairs for " + std::to_string(params.size()) + " parameters");
    }
    state.step_count += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));

    for (std::size_t t = 0; t < params.size(); ++t) {
        Tensor& p = *params[t];
        if (p.grad.size() != p.data.size()) {
            throw ShapeError("adam_step: parameter " + std::to_string(t) + " has no gradient");
        }
        auto& m = state.first_moment[t];
        auto& v = state.second_moment[t];
        for (std::size_t i = 0; i < p.data.size(); ++i) {
            const double g = p.grad[i] + l2 * p.data[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g;
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g * g;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p.data[i] -= rate * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

}  // namespace celab
