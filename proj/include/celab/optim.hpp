#pragma once

#include <cmath>
#include <vector>

#include "celab/tensor.hpp"

namespace celab {

// Adam moment buffers, one pair per parameter tensor.
struct AdamState {
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    long step_count = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    static AdamState init(const std::vector<TensorPtr>& params);
};

// One bias-corrected Adam update over `params`, reading each tensor's grad.
// L2 regularization enters as an extra gradient term l2 * theta before the
// moment updates (classic Adam-with-L2, not decoupled weight decay).
void adam_step(std::vector<TensorPtr>& params, AdamState& state, double rate, double l2);

// Step-decay learning rate: initial_rate * drop_factor^floor(epoch / drop_period).
struct LrSchedule {
    double initial_rate = 0.001;
    int drop_period = 20;
    double drop_factor = 0.5;

    double rate(int epoch) const {
        return initial_rate * std::pow(drop_factor, epoch / drop_period);
    }
};

}  // namespace celab
