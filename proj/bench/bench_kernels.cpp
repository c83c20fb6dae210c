// Timing comparison of the OpenMP convolution kernel against the serial
// reference, plus an end-to-end inference timing for the built-in models.

#include <chrono>
#include <cstdio>
#include <random>

#include "celab/model.hpp"
#include "celab/nn_ops.hpp"
#include "reference_ops.hpp"

using namespace celab;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = uni(rng);
    return v;
}

void bench_conv(int h, int w, int ci, int k, int co, int reps) {
    std::mt19937_64 rng(7);
    auto in = random_vec(static_cast<std::size_t>(h) * w * ci, rng);
    auto ker = random_vec(static_cast<std::size_t>(k) * k * ci * co, rng);
    auto bias = random_vec(static_cast<std::size_t>(co), rng);

    auto input = Tensor::from_data({h, w, ci}, in);
    auto kernel = Tensor::from_data({k, k, ci, co}, ker);
    auto b = Tensor::from_data({co}, bias);

    auto t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto out = ops::conv2d(input, kernel, b);
        sink += out->data[0];
    }
    const double parallel = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < reps; ++r) {
        auto out = celab_ref::conv2d_serial(in, h, w, ci, ker, k, k, co, bias);
        sink += out[0];
    }
    const double serial = seconds_since(t0);

    std::printf("conv2d %3dx%2dx%-2d k=%d co=%-2d reps=%-5d  omp %8.3f ms  serial %8.3f ms  speedup %.2fx  (%g)\n",
                h, w, ci, k, co, reps, parallel * 1e3, serial * 1e3, serial / parallel, sink);
}

void bench_infer(const char* name, const ModelSpec& model, int reps) {
    std::mt19937_64 rng(11);
    auto weights = init_weights(model, 3);
    auto input = Tensor::from_data(model.input_shape,
                                   random_vec(shape_numel(model.input_shape), rng));
    auto t0 = std::chrono::steady_clock::now();
    double sink = 0.0;
    for (int r = 0; r < reps; ++r) {
        auto out = infer(model, weights, input);
        sink += out->data[0];
    }
    const double dt = seconds_since(t0);
    std::printf("infer  %-16s reps=%-5d  %8.3f ms/run  (%g)\n", name, reps, dt * 1e3 / reps, sink);
}

}  // namespace

int main() {
    bench_conv(24, 2, 8, 3, 8, 2000);
    bench_conv(72, 14, 8, 3, 8, 500);
    bench_conv(72, 14, 4, 7, 2, 500);

    bench_infer("interp-resnet-8F", build_interpolation_resnet(8, {24, 2, 2}), 200);
    bench_infer("reesnet-a", build_reesnet('A', {24, 2, 2}), 200);
    bench_infer("reesnet-b", build_reesnet('B', {24, 2, 2}), 200);
    return 0;
}
