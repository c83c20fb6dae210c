#include "celab/nn_ops.hpp"

#include <algorithm>
#include <cmath>

namespace celab::ops {

namespace {

int floor_div2(int a) { return a >= 0 ? a / 2 : (a - 1) / 2; }

void check_conv_shapes(const Tensor& input, const Tensor& kernel, const Tensor& bias,
                       const char* op) {
    if (input.shape.size() != 3 || kernel.shape.size() != 4 || bias.shape.size() != 1) {
        throw ShapeError(std::string(op) + ": expected input rank 3, kernel rank 4, bias rank 1; got " +
                         shape_str(input.shape) + ", " + shape_str(kernel.shape) + ", " +
                         shape_str(bias.shape));
    }
    if (kernel.shape[2] != input.shape[2]) {
        throw ShapeError(std::string(op) + ": kernel input channels " + shape_str(kernel.shape) +
                         " do not match input " + shape_str(input.shape));
    }
    if (bias.shape[0] != kernel.shape[3]) {
        throw ShapeError(std::string(op) + ": bias " + shape_str(bias.shape) +
                         " does not match kernel output channels " + shape_str(kernel.shape));
    }
}

}  // namespace

TensorPtr conv2d(const TensorPtr& input, const TensorPtr& kernel, const TensorPtr& bias) {
    check_conv_shapes(*input, *kernel, *bias, "conv2d");
    const int h = input->shape[0], w = input->shape[1], ci = input->shape[2];
    const int kh = kernel->shape[0], kw = kernel->shape[1], co = kernel->shape[3];
    const int pbh = (kh - 1) / 2, pbw = (kw - 1) / 2;

    auto out = Tensor::zeros({h, w, co});
    const double* in = input->data.data();
    const double* ker = kernel->data.data();
    const double* b = bias->data.data();
    double* o = out->data.data();

#pragma omp parallel for schedule(static)
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            for (int oc = 0; oc < co; ++oc) {
                double acc = b[oc];
                for (int di = 0; di < kh; ++di) {
                    const int ii = i + di - pbh;
                    if (ii < 0 || ii >= h) continue;
                    for (int dj = 0; dj < kw; ++dj) {
                        const int jj = j + dj - pbw;
                        if (jj < 0 || jj >= w) continue;
                        const double* inp = in + (static_cast<std::size_t>(ii) * w + jj) * ci;
                        const double* kp = ker + ((static_cast<std::size_t>(di) * kw + dj) * ci) * co + oc;
                        for (int c = 0; c < ci; ++c) acc += inp[c] * kp[static_cast<std::size_t>(c) * co];
                    }
                }
                o[(static_cast<std::size_t>(i) * w + j) * co + oc] = acc;
            }
        }
    }

    out->parents = {input, kernel, bias};
    out->backward_fn = [input, kernel, bias, h, w, ci, kh, kw, co, pbh, pbw](Tensor& node) {
        const double* g = node.grad.data();
        const double* in = input->data.data();
        const double* ker = kernel->data.data();

        input->ensure_grad();
        double* din = input->grad.data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                for (int c = 0; c < ci; ++c) {
                    double acc = 0.0;
                    for (int di = 0; di < kh; ++di) {
                        const int oi = i - di + pbh;
                        if (oi < 0 || oi >= h) continue;
                        for (int dj = 0; dj < kw; ++dj) {
                            const int oj = j - dj + pbw;
                            if (oj < 0 || oj >= w) continue;
                            const double* gp = g + (static_cast<std::size_t>(oi) * w + oj) * co;
                            const double* kp = ker + ((static_cast<std::size_t>(di) * kw + dj) * ci + c) * co;
                            for (int oc = 0; oc < co; ++oc) acc += kp[oc] * gp[oc];
                        }
                    }
                    din[(static_cast<std::size_t>(i) * w + j) * ci + c] += acc;
                }
            }
        }

        kernel->ensure_grad();
        double* dk = kernel->grad.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int di = 0; di < kh; ++di) {
            for (int dj = 0; dj < kw; ++dj) {
                for (int c = 0; c < ci; ++c) {
                    for (int oc = 0; oc < co; ++oc) {
                        double acc = 0.0;
                        for (int i = 0; i < h; ++i) {
                            const int ii = i + di - pbh;
                            if (ii < 0 || ii >= h) continue;
                            for (int j = 0; j < w; ++j) {
                                const int jj = j + dj - pbw;
                                if (jj < 0 || jj >= w) continue;
                                acc += in[(static_cast<std::size_t>(ii) * w + jj) * ci + c] *
                                       g[(static_cast<std::size_t>(i) * w + j) * co + oc];
                            }
                        }
                        dk[((static_cast<std::size_t>(di) * kw + dj) * ci + c) * co + oc] += acc;
                    }
                }
            }
        }

        bias->ensure_grad();
        double* db = bias->grad.data();
        for (int i = 0; i < h * w; ++i)
            for (int oc = 0; oc < co; ++oc) db[oc] += g[static_cast<std::size_t>(i) * co + oc];
    };
    return out;
}

TensorPtr transposed_conv2d(const TensorPtr& input, const TensorPtr& kernel,
                            const TensorPtr& bias, std::array<int, 2> stride,
                            std::array<int, 2> target) {
    check_conv_shapes(*input, *kernel, *bias, "transposed_conv2d");
    if (stride[0] <= 0 || stride[1] <= 0) {
        throw ParamError("transposed_conv2d: stride must be positive, got (" +
                         std::to_string(stride[0]) + "," + std::to_string(stride[1]) + ")");
    }
    if (target[0] <= 0 || target[1] <= 0) throw ParamError("transposed_conv2d: target must be positive");

    const int h = input->shape[0], w = input->shape[1], ci = input->shape[2];
    const int kh = kernel->shape[0], kw = kernel->shape[1], co = kernel->shape[3];
    const int sh = stride[0], sw = stride[1];
    const int fh = (h - 1) * sh + kh, fw = (w - 1) * sw + kw;
    const int H = target[0], W = target[1];
    const int offh = floor_div2(fh - H), offw = floor_div2(fw - W);

    std::vector<double> full(static_cast<std::size_t>(fh) * fw * co, 0.0);
    const double* in = input->data.data();
    const double* ker = kernel->data.data();
#pragma omp parallel for schedule(static)
    for (int oc = 0; oc < co; ++oc) {
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                const double* inp = in + (static_cast<std::size_t>(i) * w + j) * ci;
                for (int di = 0; di < kh; ++di) {
                    for (int dj = 0; dj < kw; ++dj) {
                        double acc = 0.0;
                        const double* kp = ker + ((static_cast<std::size_t>(di) * kw + dj) * ci) * co + oc;
                        for (int c = 0; c < ci; ++c) acc += inp[c] * kp[static_cast<std::size_t>(c) * co];
                        full[(static_cast<std::size_t>(i * sh + di) * fw + (j * sw + dj)) * co + oc] += acc;
                    }
                }
            }
        }
    }

    auto out = Tensor::zeros({H, W, co});
    const double* b = bias->data.data();
    double* o = out->data.data();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const int fy = y + offh, fx = x + offw;
            const bool inside = fy >= 0 && fy < fh && fx >= 0 && fx < fw;
            for (int oc = 0; oc < co; ++oc) {
                o[(static_cast<std::size_t>(y) * W + x) * co + oc] =
                    b[oc] + (inside ? full[(static_cast<std::size_t>(fy) * fw + fx) * co + oc] : 0.0);
            }
        }
    }

    out->parents = {input, kernel, bias};
    out->backward_fn = [input, kernel, bias, h, w, ci, kh, kw, co, sh, sw, fh, fw, H, W, offh,
                        offw](Tensor& node) {
        const double* g = node.grad.data();
        // grad on the full support: inverse of the crop/pad
        std::vector<double> dfull(static_cast<std::size_t>(fh) * fw * co, 0.0);
        for (int y = 0; y < H; ++y) {
            const int fy = y + offh;
            if (fy < 0 || fy >= fh) continue;
            for (int x = 0; x < W; ++x) {
                const int fx = x + offw;
                if (fx < 0 || fx >= fw) continue;
                for (int oc = 0; oc < co; ++oc)
                    dfull[(static_cast<std::size_t>(fy) * fw + fx) * co + oc] =
                        g[(static_cast<std::size_t>(y) * W + x) * co + oc];
            }
        }

        const double* in = input->data.data();
        const double* ker = kernel->data.data();

        input->ensure_grad();
        double* din = input->grad.data();
#pragma omp parallel for schedule(static)
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                for (int c = 0; c < ci; ++c) {
                    double acc = 0.0;
                    for (int di = 0; di < kh; ++di) {
                        for (int dj = 0; dj < kw; ++dj) {
                            const double* dfp =
                                dfull.data() + (static_cast<std::size_t>(i * sh + di) * fw + (j * sw + dj)) * co;
                            const double* kp = ker + ((static_cast<std::size_t>(di) * kw + dj) * ci + c) * co;
                            for (int oc = 0; oc < co; ++oc) acc += kp[oc] * dfp[oc];
                        }
                    }
                    din[(static_cast<std::size_t>(i) * w + j) * ci + c] += acc;
                }
            }
        }

        kernel->ensure_grad();
        double* dk = kernel->grad.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (int di = 0; di < kh; ++di) {
            for (int dj = 0; dj < kw; ++dj) {
                for (int c = 0; c < ci; ++c) {
                    for (int oc = 0; oc < co; ++oc) {
                        double acc = 0.0;
                        for (int i = 0; i < h; ++i) {
                            for (int j = 0; j < w; ++j) {
                                acc += in[(static_cast<std::size_t>(i) * w + j) * ci + c] *
                                       dfull[(static_cast<std::size_t>(i * sh + di) * fw + (j * sw + dj)) * co + oc];
                            }
                        }
                        dk[((static_cast<std::size_t>(di) * kw + dj) * ci + c) * co + oc] += acc;
                    }
                }
            }
        }

        bias->ensure_grad();
        double* db = bias->grad.data();
        for (int i = 0; i < H * W; ++i)
            for (int oc = 0; oc < co; ++oc) db[oc] += g[static_cast<std::size_t>(i) * co + oc];
    };
    return out;
}

TensorPtr relu(const TensorPtr& input) {
    auto out = Tensor::zeros(input->shape);
    for (std::size_t i = 0; i < input->data.size(); ++i)
        out->data[i] = input->data[i] > 0.0 ? input->data[i] : 0.0;
    out->parents = {input};
    out->backward_fn = [input](Tensor& node) {
        input->ensure_grad();
        // subgradient 0 at exactly 0
        for (std::size_t i = 0; i < node.grad.size(); ++i)
            if (input->data[i] > 0.0) input->grad[i] += node.grad[i];
    };
    return out;
}

TensorPtr add_n(const std::vector<TensorPtr>& inputs) {
    if (inputs.size() < 2) throw ShapeError("add_n: need at least 2 inputs");
    for (const auto& t : inputs) {
        if (!t->same_shape(*inputs[0])) {
            throw ShapeError("add_n: shape mismatch " + shape_str(inputs[0]->shape) + " vs " +
                             shape_str(t->shape));
        }
    }
    auto out = Tensor::zeros(inputs[0]->shape);
    for (const auto& t : inputs)
        for (std::size_t i = 0; i < out->data.size(); ++i) out->data[i] += t->data[i];
    out->parents = inputs;
    out->backward_fn = [inputs](Tensor& node) {
        for (const auto& t : inputs) {
            t->ensure_grad();
            for (std::size_t i = 0; i < node.grad.size(); ++i) t->grad[i] += node.grad[i];
        }
    };
    return out;
}

TensorPtr bilinear_resize(const TensorPtr& input, std::array<int, 2> target) {
    if (input->shape.size() != 3) {
        throw ShapeError("bilinear_resize: expected rank-3 input, got " + shape_str(input->shape));
    }
    if (target[0] <= 0 || target[1] <= 0) throw ShapeError("bilinear_resize: target must be positive");
    const int h = input->shape[0], w = input->shape[1], c = input->shape[2];
    const int H = target[0], W = target[1];

    // align-corners source coordinates and corner weights, precomputed per axis
    struct Axis {
        int i0, i1;
        double w0, w1;
    };
    std::vector<Axis> rows(H), cols(W);
    for (int y = 0; y < H; ++y) {
        double src = (H == 1) ? 0.0 : static_cast<double>(y) * (h - 1) / (H - 1);
        int i0 = std::min(static_cast<int>(src), h - 1);
        int i1 = std::min(i0 + 1, h - 1);
        double f = src - i0;
        rows[y] = {i0, i1, 1.0 - f, f};
    }
    for (int x = 0; x < W; ++x) {
        double src = (W == 1) ? 0.0 : static_cast<double>(x) * (w - 1) / (W - 1);
        int j0 = std::min(static_cast<int>(src), w - 1);
        int j1 = std::min(j0 + 1, w - 1);
        double f = src - j0;
        cols[x] = {j0, j1, 1.0 - f, f};
    }

    auto out = Tensor::zeros({H, W, c});
    const double* in = input->data.data();
    double* o = out->data.data();
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const Axis& r = rows[y];
            const Axis& cl = cols[x];
            for (int ch = 0; ch < c; ++ch) {
                o[(static_cast<std::size_t>(y) * W + x) * c + ch] =
                    r.w0 * cl.w0 * in[(static_cast<std::size_t>(r.i0) * w + cl.i0) * c + ch] +
                    r.w0 * cl.w1 * in[(static_cast<std::size_t>(r.i0) * w + cl.i1) * c + ch] +
                    r.w1 * cl.w0 * in[(static_cast<std::size_t>(r.i1) * w + cl.i0) * c + ch] +
                    r.w1 * cl.w1 * in[(static_cast<std::size_t>(r.i1) * w + cl.i1) * c + ch];
            }
        }
    }

    out->parents = {input};
    out->backward_fn = [input, rows, cols, w, c, W, H](Tensor& node) {
        input->ensure_grad();
        double* din = input->grad.data();
        const double* g = node.grad.data();
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                const Axis& r = rows[y];
                const Axis& cl = cols[x];
                for (int ch = 0; ch < c; ++ch) {
                    const double gv = g[(static_cast<std::size_t>(y) * W + x) * c + ch];
                    din[(static_cast<std::size_t>(r.i0) * w + cl.i0) * c + ch] += r.w0 * cl.w0 * gv;
                    din[(static_cast<std::size_t>(r.i0) * w + cl.i1) * c + ch] += r.w0 * cl.w1 * gv;
                    din[(static_cast<std::size_t>(r.i1) * w + cl.i0) * c + ch] += r.w1 * cl.w0 * gv;
                    din[(static_cast<std::size_t>(r.i1) * w + cl.i1) * c + ch] += r.w1 * cl.w1 * gv;
                }
            }
        }
    };
    return out;
}

TensorPtr mse_loss(const TensorPtr& prediction, const TensorPtr& label) {
    if (!prediction->same_shape(*label)) {
        throw ShapeError("mse_loss: shape mismatch " + shape_str(prediction->shape) + " vs " +
                         shape_str(label->shape));
    }
    const std::size_t n = prediction->numel();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = prediction->data[i] - label->data[i];
        acc += d * d;
    }
    auto out = Tensor::from_data({1}, {acc / static_cast<double>(n)});
    out->parents = {prediction, label};
    out->backward_fn = [prediction, label, n](Tensor& node) {
        const double scale = 2.0 * node.grad[0] / static_cast<double>(n);
        prediction->ensure_grad();
        label->ensure_grad();
        for (std::size_t i = 0; i < n; ++i) {
            const double d = prediction->data[i] - label->data[i];
            prediction->grad[i] += scale * d;
            label->grad[i] -= scale * d;
        }
    };
    return out;
}

}  // namespace celab::ops
