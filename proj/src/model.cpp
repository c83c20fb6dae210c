#include "celab/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "celab/rng.hpp"

namespace celab {

namespace {

void check_io_shapes(const std::vector<int>& in_shape, const std::vector<int>& out_shape,
                     const char* builder) {
    if (in_shape.size() != 3 || in_shape[2] != 2) {
        throw ParamError(std::string(builder) + ": input shape must be (P_sc, P_sym, 2), got " +
                         shape_str(in_shape));
    }
    if (out_shape.size() != 3 || out_shape[2] != 2) {
        throw ParamError(std::string(builder) + ": output shape must be (N_f, N_t, 2), got " +
                         shape_str(out_shape));
    }
    for (int e : in_shape)
        if (e <= 0) throw ParamError(std::string(builder) + ": non-positive input extent");
}

int add_conv(ModelSpec& spec, std::string name, int input, std::vector<int> kernel, int& next_param) {
    LayerNode n;
    n.type = LayerType::Conv;
    n.name = std::move(name);
    n.inputs = {input};
    n.kernel_shape = std::move(kernel);
    n.param_index = next_param++;
    spec.nodes.push_back(std::move(n));
    return static_cast<int>(spec.nodes.size()) - 1;
}

int add_node(ModelSpec& spec, LayerType type, std::string name, std::vector<int> inputs) {
    LayerNode n;
    n.type = type;
    n.name = std::move(name);
    n.inputs = std::move(inputs);
    spec.nodes.push_back(std::move(n));
    return static_cast<int>(spec.nodes.size()) - 1;
}

}  // namespace

int ModelSpec::n_param_tensors() const {
    int count = 0;
    for (const auto& n : nodes)
        if (n.param_index >= 0) count = std::max(count, n.param_index + 1);
    return count * 2;
}

ModelSpec build_interpolation_resnet(int n_filter, std::vector<int> in_shape,
                                     std::vector<int> out_shape) {
    if (n_filter < 1) throw ParamError("build_interpolation_resnet: n_filter must be >= 1");
    check_io_shapes(in_shape, out_shape, "build_interpolation_resnet");

    ModelSpec spec;
    spec.kind = "interp-resnet";
    spec.n_filter = n_filter;
    spec.input_shape = in_shape;
    spec.output_shape = out_shape;

    int next_param = 0;
    const int nf = n_filter;
    const int conv0 = add_conv(spec, "conv0", -1, {3, 3, 2, nf}, next_param);

    std::vector<int> addends = {conv0};
    int block_in = conv0;
    for (int b = 0; b < 4; ++b) {
        const std::string base = "block" + std::to_string(b + 1);
        const int c1 = add_conv(spec, base + "/conv1", block_in, {3, 3, nf, nf}, next_param);
        const int r = add_node(spec, LayerType::Relu, base + "/relu", {c1});
        const int c2 = add_conv(spec, base + "/conv2", r, {3, 3, nf, nf}, next_param);
        const int skip = add_node(spec, LayerType::AddN, base + "/skip", {block_in, c2});
        addends.push_back(skip);
        block_in = skip;
    }
    const int conv5 = add_conv(spec, "conv5", block_in, {3, 3, nf, nf}, next_param);
    addends.push_back(conv5);

    const int sum = add_node(spec, LayerType::AddN, "sum", addends);
    const int resize = add_node(spec, LayerType::BilinearResize, "resize", {sum});
    spec.nodes[resize].target = {out_shape[0], out_shape[1]};
    add_conv(spec, "conv_final", resize, {36, 7, nf, 2}, next_param);
    return spec;
}

ModelSpec build_reesnet(char variant, std::vector<int> in_shape, std::vector<int> out_shape) {
    if (variant != 'A' && variant != 'B') {
        throw ParamError(std::string("build_reesnet: variant must be 'A' or 'B', got '") + variant + "'");
    }
    check_io_shapes(in_shape, out_shape, "build_reesnet");

    ModelSpec spec;
    spec.kind = variant == 'A' ? "reesnet-a" : "reesnet-b";
    spec.n_filter = 16;
    spec.input_shape = in_shape;
    spec.output_shape = out_shape;

    int next_param = 0;
    const int conv0 = add_conv(spec, "conv0", -1, {3, 3, 2, 16}, next_param);
    int block_in = conv0;
    for (int b = 0; b < 4; ++b) {
        const std::string base = "resblock" + std::to_string(b + 1);
        const int c1 = add_conv(spec, base + "/conv1", block_in, {3, 3, 16, 16}, next_param);
        const int r = add_node(spec, LayerType::Relu, base + "/relu", {c1});
        const int c2 = add_conv(spec, base + "/conv2", r, {3, 3, 16, 16}, next_param);
        block_in = add_node(spec, LayerType::AddN, base + "/skip", {block_in, c2});
    }
    const int conv5 = add_conv(spec, "conv5", block_in, {3, 3, 16, 16}, next_param);
    const int sum = add_node(spec, LayerType::AddN, "sum", {conv0, conv5});

    const int k = variant == 'A' ? 3 : 11;
    LayerNode up;
    up.type = LayerType::TransposedConv;
    up.name = "upsample";
    up.inputs = {sum};
    up.kernel_shape = {k, k, 16, 16};
    up.param_index = next_param++;
    up.stride = {(out_shape[0] + in_shape[0] - 1) / in_shape[0],
                 (out_shape[1] + in_shape[1] - 1) / in_shape[1]};
    up.target = {out_shape[0], out_shape[1]};
    spec.nodes.push_back(std::move(up));
    const int upsampled = static_cast<int>(spec.nodes.size()) - 1;

    add_conv(spec, "conv_final", upsampled, {3, 3, 16, 2}, next_param);
    return spec;
}

long count_parameters(const ModelSpec& model) {
    long total = 0;
    for (const auto& n : model.nodes) {
        if (n.param_index < 0) continue;
        long k = 1;
        for (int e : n.kernel_shape) k *= e;
        total += k + n.kernel_shape[3];  // weights + biases
    }
    return total;
}

long count_nonzero_weights(const Weights& weights, const ModelSpec& model) {
    long total = 0;
    for (const auto& n : model.nodes) {
        if (n.param_index < 0) continue;
        const auto& kernel = weights[static_cast<std::size_t>(n.param_index) * 2];
        const auto& bias = weights[static_cast<std::size_t>(n.param_index) * 2 + 1];
        for (double v : kernel->data)
            if (v != 0.0) ++total;
        for (double v : bias->data)
            if (v != 0.0) ++total;
    }
    return total;
}

Weights init_weights(const ModelSpec& model, std::uint64_t seed) {
    Weights weights(static_cast<std::size_t>(model.n_param_tensors()));
    auto rng = make_rng(seed);
    for (const auto& n : model.nodes) {
        if (n.param_index < 0) continue;
        // half-scale Glorot: most convolutions here are not followed by a
        // ReLU, and the multi-branch sums compound any per-layer gain, so a
        // conservatively small variance keeps the initial output near zero
        const int fan_in = n.kernel_shape[0] * n.kernel_shape[1] * n.kernel_shape[2];
        const int fan_out = n.kernel_shape[0] * n.kernel_shape[1] * n.kernel_shape[3];
        const double bound = std::sqrt(1.5 / (fan_in + fan_out));
        std::uniform_real_distribution<double> uni(-bound, bound);
        auto kernel = Tensor::zeros(n.kernel_shape, true);
        for (auto& v : kernel->data) v = uni(rng);
        auto bias = Tensor::zeros({n.kernel_shape[3]}, true);
        weights[static_cast<std::size_t>(n.param_index) * 2] = kernel;
        weights[static_cast<std::size_t>(n.param_index) * 2 + 1] = bias;
    }
    return weights;
}

TensorPtr forward(const ModelSpec& model, const Weights& weights, const TensorPtr& input) {
    if (input->shape != model.input_shape) {
        throw ShapeError("forward: input " + shape_str(input->shape) + " does not match model " +
                         shape_str(model.input_shape));
    }
    std::vector<TensorPtr> outs(model.nodes.size());
    auto resolve = [&](int id) { return id < 0 ? input : outs[static_cast<std::size_t>(id)]; };

    for (std::size_t i = 0; i < model.nodes.size(); ++i) {
        const LayerNode& n = model.nodes[i];
        switch (n.type) {
            case LayerType::Conv:
                outs[i] = ops::conv2d(resolve(n.inputs[0]),
                                      weights[static_cast<std::size_t>(n.param_index) * 2],
                                      weights[static_cast<std::size_t>(n.param_index) * 2 + 1]);
                break;
            case LayerType::TransposedConv:
                outs[i] = ops::transposed_conv2d(resolve(n.inputs[0]),
                                                 weights[static_cast<std::size_t>(n.param_index) * 2],
                                                 weights[static_cast<std::size_t>(n.param_index) * 2 + 1],
                                                 n.stride, n.target);
                break;
            case LayerType::Relu:
                outs[i] = ops::relu(resolve(n.inputs[0]));
                break;
            case LayerType::AddN: {
                std::vector<TensorPtr> ins;
                ins.reserve(n.inputs.size());
                for (int id : n.inputs) ins.push_back(resolve(id));
                outs[i] = ops::add_n(ins);
                break;
            }
            case LayerType::BilinearResize:
                outs[i] = ops::bilinear_resize(resolve(n.inputs[0]), n.target);
                break;
        }
    }
    return outs.back();
}

TensorPtr infer(const ModelSpec& model, const Weights& weights, const TensorPtr& pilot_grid) {
    auto out = forward(model, weights, pilot_grid);
    // detach: drop the graph, keep the values
    return Tensor::from_data(out->shape, out->data);
}

PruneMask prune_magnitude(Weights& weights, const ModelSpec& model, double rate) {
    if (rate < 0.0 || rate >= 1.0) throw ParamError("prune_magnitude: rate must be in [0, 1)");
    const int n_params = model.n_param_tensors() / 2;

    PruneMask mask;
    mask.rate = rate;
    mask.kept.resize(static_cast<std::size_t>(n_params));

    struct Entry {
        double magnitude;
        int param;
        std::size_t index;
    };
    std::vector<Entry> entries;
    for (int p = 0; p < n_params; ++p) {
        const auto& kernel = weights[static_cast<std::size_t>(p) * 2];
        mask.kept[static_cast<std::size_t>(p)].assign(kernel->numel(), 1);
        for (std::size_t i = 0; i < kernel->numel(); ++i) {
            entries.push_back({std::abs(kernel->data[i]), p, i});
        }
    }
    const long n_zero = static_cast<long>(rate * static_cast<double>(entries.size()));
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.magnitude < b.magnitude; });
    for (long i = 0; i < n_zero; ++i) {
        const Entry& e = entries[static_cast<std::size_t>(i)];
        weights[static_cast<std::size_t>(e.param) * 2]->data[e.index] = 0.0;
        mask.kept[static_cast<std::size_t>(e.param)][e.index] = 0;
    }
    mask.n_zeroed = n_zero;
    return mask;
}

void apply_mask(Weights& weights, const ModelSpec& model, const PruneMask& mask) {
    const int n_params = model.n_param_tensors() / 2;
    if (mask.kept.size() != static_cast<std::size_t>(n_params)) {
        throw ShapeError("apply_mask: mask does not match model");
    }
    for (int p = 0; p < n_params; ++p) {
        auto& kernel = weights[static_cast<std::size_t>(p) * 2];
        const auto& kept = mask.kept[static_cast<std::size_t>(p)];
        if (kept.size() != kernel->numel()) throw ShapeError("apply_mask: mask extent mismatch");
        for (std::size_t i = 0; i < kept.size(); ++i)
            if (!kept[i]) kernel->data[i] = 0.0;
    }
}

namespace {

constexpr char kCkptMagic[9] = "CEWT0001";

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

std::vector<std::string> tensor_names(const ModelSpec& model) {
    std::vector<std::string> names(static_cast<std::size_t>(model.n_param_tensors()));
    for (const auto& n : model.nodes) {
        if (n.param_index < 0) continue;
        names[static_cast<std::size_t>(n.param_index) * 2] = n.name + "/kernel";
        names[static_cast<std::size_t>(n.param_index) * 2 + 1] = n.name + "/bias";
    }
    return names;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelSpec& model, const Weights& weights,
                     const PruneMask* mask) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArtifactError("cannot write checkpoint '" + path + "'");
    os.write(kCkptMagic, 8);
    const auto names = tensor_names(model);
    write_pod(os, static_cast<std::uint32_t>(weights.size()));
    for (std::size_t t = 0; t < weights.size(); ++t) {
        const auto& w = *weights[t];
        write_pod(os, static_cast<std::uint32_t>(names[t].size()));
        os.write(names[t].data(), static_cast<std::streamsize>(names[t].size()));
        write_pod(os, static_cast<std::uint32_t>(w.shape.size()));
        for (int e : w.shape) write_pod(os, static_cast<std::uint32_t>(e));
        for (double v : w.data) write_pod(os, static_cast<float>(v));
    }
    const std::uint8_t has_mask = mask ? 1 : 0;
    write_pod(os, has_mask);
    if (mask) {
        write_pod(os, mask->rate);
        for (const auto& kept : mask->kept) {
            std::vector<std::uint8_t> bits((kept.size() + 7) / 8, 0);
            for (std::size_t i = 0; i < kept.size(); ++i)
                if (kept[i]) bits[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
            os.write(reinterpret_cast<const char*>(bits.data()),
                     static_cast<std::streamsize>(bits.size()));
        }
    }
    if (!os) throw ArtifactError("write failed for checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, const ModelSpec& model) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open checkpoint '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kCkptMagic, 8)) {
        throw ArtifactError("'" + path + "' is not a checkpoint file");
    }
    const auto names = tensor_names(model);
    std::uint32_t count = 0;
    read_pod(is, count);
    if (count != names.size()) {
        throw ArtifactError("checkpoint '" + path + "' holds " + std::to_string(count) +
                            " tensors, model expects " + std::to_string(names.size()));
    }
    Checkpoint ckpt;
    ckpt.weights.resize(count);
    for (std::uint32_t t = 0; t < count; ++t) {
        std::uint32_t name_len = 0;
        read_pod(is, name_len);
        std::string name(name_len, '\0');
        is.read(name.data(), name_len);
        if (name != names[t]) {
            throw ArtifactError("checkpoint '" + path + "' tensor '" + name +
                                "' does not match model tensor '" + names[t] + "'");
        }
        std::uint32_t rank = 0;
        read_pod(is, rank);
        std::vector<int> shape(rank);
        for (auto& e : shape) {
            std::uint32_t v = 0;
            read_pod(is, v);
            e = static_cast<int>(v);
        }
        std::vector<int> expected;
        for (const auto& node : model.nodes) {
            if (node.param_index != static_cast<int>(t / 2)) continue;
            expected = (t % 2 == 0) ? node.kernel_shape : std::vector<int>{node.kernel_shape[3]};
            break;
        }
        if (shape != expected) {
            throw ArtifactError("checkpoint '" + path + "' tensor '" + name + "' has shape " +
                                shape_str(shape) + ", model expects " + shape_str(expected));
        }
        std::vector<double> data(shape_numel(shape));
        for (auto& v : data) {
            float f = 0.0f;
            read_pod(is, f);
            v = static_cast<double>(f);
        }
        ckpt.weights[t] = Tensor::from_data(std::move(shape), std::move(data), true);
    }
    std::uint8_t has_mask = 0;
    read_pod(is, has_mask);
    if (is && has_mask) {
        ckpt.has_mask = true;
        read_pod(is, ckpt.mask.rate);
        ckpt.mask.kept.resize(count / 2);
        for (std::uint32_t p = 0; p < count / 2; ++p) {
            const std::size_t n = ckpt.weights[static_cast<std::size_t>(p) * 2]->numel();
            std::vector<std::uint8_t> bits((n + 7) / 8, 0);
            is.read(reinterpret_cast<char*>(bits.data()), static_cast<std::streamsize>(bits.size()));
            auto& kept = ckpt.mask.kept[p];
            kept.assign(n, 0);
            long zeroed = 0;
            for (std::size_t i = 0; i < n; ++i) {
                kept[i] = (bits[i / 8] >> (i % 8)) & 1u;
                if (!kept[i]) ++zeroed;
            }
            ckpt.mask.n_zeroed += zeroed;
        }
    }
    if (!is) throw ArtifactError("truncated checkpoint '" + path + "'");
    return ckpt;
}

TensorPtr pack_pilot_observation(const std::vector<std::vector<cplx>>& h_ls) {
    const int n_sym = static_cast<int>(h_ls.size());
    const int n_sc = static_cast<int>(h_ls.at(0).size());
    auto t = Tensor::zeros({n_sc, n_sym, 2});
    for (int s = 0; s < n_sym; ++s) {
        for (int p = 0; p < n_sc; ++p) {
            t->data[(static_cast<std::size_t>(p) * n_sym + s) * 2] = h_ls[s][p].real();
            t->data[(static_cast<std::size_t>(p) * n_sym + s) * 2 + 1] = h_ls[s][p].imag();
        }
    }
    return t;
}

TensorPtr pack_grid(const ComplexGrid& grid) {
    auto t = Tensor::zeros({grid.n_subcarriers, grid.n_symbols, 2});
    for (int s = 0; s < grid.n_symbols; ++s) {
        for (int f = 0; f < grid.n_subcarriers; ++f) {
            t->data[(static_cast<std::size_t>(f) * grid.n_symbols + s) * 2] = grid.at(f, s).real();
            t->data[(static_cast<std::size_t>(f) * grid.n_symbols + s) * 2 + 1] = grid.at(f, s).imag();
        }
    }
    return t;
}

ComplexGrid unpack_grid(const Tensor& t) {
    if (t.shape.size() != 3 || t.shape[2] != 2) {
        throw ShapeError("unpack_grid: expected (N_f, N_t, 2), got " + shape_str(t.shape));
    }
    ComplexGrid grid(t.shape[0], t.shape[1]);
    for (int s = 0; s < grid.n_symbols; ++s) {
        for (int f = 0; f < grid.n_subcarriers; ++f) {
            grid.at(f, s) = cplx(t.data[(static_cast<std::size_t>(f) * grid.n_symbols + s) * 2],
                                 t.data[(static_cast<std::size_t>(f) * grid.n_symbols + s) * 2 + 1]);
        }
    }
    return grid;
}

}  // namespace celab
