#include "celab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "celab/rng.hpp"

namespace celab {

namespace {

struct FrameResult {
    PilotObservation obs;
    ComplexGrid truth;
};

// one link simulation: channel draw, frame, time-domain link, LS observation
FrameResult run_link(const PowerDelayProfile& pdp, const PilotPattern& pattern,
                     const OfdmConfig& config, double doppler_hz, const NoiseConfig& noise,
                     std::uint64_t seed) {
    const auto ch = generate_channel(pdp, doppler_hz, config.n_symbols, config, derive_seed(seed, 1, 0));
    const auto x = build_frame(pattern, config, derive_seed(seed, 2, 0));
    auto tx = ofdm_modulate(x, config);
    auto rx = apply_channel(tx, ch, config);
    auto noisy = add_awgn(rx.samples, noise, derive_seed(seed, 3, 0));
    const auto y = ofdm_demodulate(noisy, config);
    FrameResult fr;
    fr.obs = ls_estimate(y, x, pattern);
    fr.truth = true_frequency_response(ch, config);
    return fr;
}

}  // namespace

Dataset generate_dataset(const DatasetParams& params, const OfdmConfig& config) {
    if (params.snr_max_db < params.snr_min_db) {
        throw ParamError("generate_dataset: snr_max below snr_min");
    }
    if (params.n_per_snr < 1) throw ParamError("generate_dataset: n_per_snr must be >= 1");

    const auto pdp = standard_pdp(params.channel);
    const auto pattern = pilot_pattern(params.pattern);
    const int n_snr = params.snr_max_db - params.snr_min_db + 1;
    const int total = n_snr * params.n_per_snr;

    Dataset ds;
    ds.pattern_name = params.pattern;
    ds.channel_name = params.channel;
    ds.input_shape = {pattern.pilots_per_symbol(), static_cast<int>(pattern.pilot_symbols.size()), 2};
    ds.label_shape = {config.n_subcarriers, config.n_symbols, 2};
    ds.records.resize(static_cast<std::size_t>(total));

#pragma omp parallel for schedule(dynamic, 16)
    for (int r = 0; r < total; ++r) {
        const int snr_db = params.snr_min_db + r / params.n_per_snr;
        const std::uint64_t rec_seed = derive_seed(params.seed, 20, static_cast<std::uint64_t>(r));
        auto rng = make_rng(derive_seed(rec_seed, 4, 0));
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const double doppler = uni(rng) * params.doppler_max_hz;

        NoiseConfig noise;
        noise.snr_db = snr_db;
        const auto fr = run_link(pdp, pattern, config, doppler, noise, rec_seed);

        DatasetRecord& rec = ds.records[static_cast<std::size_t>(r)];
        rec.snr_db = snr_db;
        rec.doppler_hz = doppler;
        rec.seed = rec_seed;
        const auto input = pack_pilot_observation(fr.obs.h_ls);
        const auto label = pack_grid(fr.truth);
        rec.input.assign(input->data.begin(), input->data.end());
        rec.label.assign(label->data.begin(), label->data.end());
    }
    return ds;
}

namespace {

constexpr char kDatasetMagic[9] = "CEDS0001";

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}

void write_string(std::ostream& os, const std::string& s) {
    write_pod(os, static_cast<std::uint32_t>(s.size()));
    os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& is) {
    std::uint32_t len = 0;
    read_pod(is, len);
    std::string s(len, '\0');
    is.read(s.data(), len);
    return s;
}

void write_shape(std::ostream& os, const std::vector<int>& shape) {
    write_pod(os, static_cast<std::uint32_t>(shape.size()));
    for (int e : shape) write_pod(os, static_cast<std::uint32_t>(e));
}

std::vector<int> read_shape(std::istream& is) {
    std::uint32_t rank = 0;
    read_pod(is, rank);
    std::vector<int> shape(rank);
    for (auto& e : shape) {
        std::uint32_t v = 0;
        read_pod(is, v);
        e = static_cast<int>(v);
    }
    return shape;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArtifactError("cannot write dataset '" + path + "'");
    os.write(kDatasetMagic, 8);
    write_string(os, ds.pattern_name);
    write_string(os, ds.channel_name);
    write_pod(os, static_cast<std::uint64_t>(ds.records.size()));
    write_shape(os, ds.input_shape);
    write_shape(os, ds.label_shape);
    write_pod(os, static_cast<std::uint8_t>(1));  // float32 payload
    for (const auto& rec : ds.records) {
        write_pod(os, rec.snr_db);
        write_pod(os, rec.doppler_hz);
        write_pod(os, rec.seed);
        os.write(reinterpret_cast<const char*>(rec.input.data()),
                 static_cast<std::streamsize>(rec.input.size() * sizeof(float)));
        os.write(reinterpret_cast<const char*>(rec.label.data()),
                 static_cast<std::streamsize>(rec.label.size() * sizeof(float)));
    }
    if (!os) throw ArtifactError("write failed for dataset '" + path + "'");
}

Dataset load_dataset(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open dataset '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kDatasetMagic, 8)) {
        throw ArtifactError("'" + path + "' is not a dataset file");
    }
    Dataset ds;
    ds.pattern_name = read_string(is);
    ds.channel_name = read_string(is);
    std::uint64_t count = 0;
    read_pod(is, count);
    ds.input_shape = read_shape(is);
    ds.label_shape = read_shape(is);
    std::uint8_t f32 = 0;
    read_pod(is, f32);
    if (!f32) throw ArtifactError("dataset '" + path + "' has an unsupported payload precision");

    const std::size_t in_n = shape_numel(ds.input_shape);
    const std::size_t lb_n = shape_numel(ds.label_shape);
    ds.records.resize(count);
    for (auto& rec : ds.records) {
        read_pod(is, rec.snr_db);
        read_pod(is, rec.doppler_hz);
        read_pod(is, rec.seed);
        rec.input.resize(in_n);
        rec.label.resize(lb_n);
        is.read(reinterpret_cast<char*>(rec.input.data()),
                static_cast<std::streamsize>(in_n * sizeof(float)));
        is.read(reinterpret_cast<char*>(rec.label.data()),
                static_cast<std::streamsize>(lb_n * sizeof(float)));
    }
    if (!is) throw ArtifactError("truncated dataset '" + path + "'");
    return ds;
}

namespace {

TensorPtr record_input(const DatasetRecord& rec, const std::vector<int>& shape) {
    std::vector<double> d(rec.input.begin(), rec.input.end());
    return Tensor::from_data(shape, std::move(d));
}

TensorPtr record_label(const DatasetRecord& rec, const std::vector<int>& shape) {
    std::vector<double> d(rec.label.begin(), rec.label.end());
    return Tensor::from_data(shape, std::move(d));
}

Weights clone_leaves(const Weights& weights) {
    Weights out;
    out.reserve(weights.size());
    for (const auto& w : weights) out.push_back(Tensor::from_data(w->shape, w->data, true));
    return out;
}

double eval_mse(const ModelSpec& model, const Weights& weights, const Dataset& ds,
                const std::vector<int>& indices) {
    if (indices.empty()) return 0.0;
    std::vector<double> losses(indices.size(), 0.0);
#pragma omp parallel for schedule(static)
    for (long i = 0; i < static_cast<long>(indices.size()); ++i) {
        const auto& rec = ds.records[static_cast<std::size_t>(indices[static_cast<std::size_t>(i)])];
        auto out = forward(model, weights, record_input(rec, ds.input_shape));
        auto loss = ops::mse_loss(out, record_label(rec, ds.label_shape));
        losses[static_cast<std::size_t>(i)] = loss->data[0];
    }
    return std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
}

}  // namespace

TrainResult train(const ModelSpec& model, Weights& weights, const Dataset& dataset,
                  const TrainConfig& cfg) {
    if (dataset.records.empty()) throw ParamError("train: empty dataset");
    if (dataset.input_shape != model.input_shape) {
        throw ShapeError("train: dataset input " + shape_str(dataset.input_shape) +
                         " does not match model " + shape_str(model.input_shape));
    }

    const int total = static_cast<int>(dataset.records.size());
    std::vector<int> indices(static_cast<std::size_t>(total));
    std::iota(indices.begin(), indices.end(), 0);
    auto rng = make_rng(derive_seed(cfg.seed, 30, 0));
    std::shuffle(indices.begin(), indices.end(), rng);

    const int n_val = std::min(total - 1, static_cast<int>(cfg.validation_fraction * total));
    std::vector<int> val_idx(indices.end() - n_val, indices.end());
    std::vector<int> train_idx(indices.begin(), indices.end() - n_val);

    AdamState adam = AdamState::init(weights);
    TrainResult result;

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        const double lr = cfg.schedule.rate(epoch);
        std::shuffle(train_idx.begin(), train_idx.end(), rng);

        double epoch_loss = 0.0;
        int n_batches = 0;
        for (std::size_t start = 0; start < train_idx.size(); start += cfg.minibatch) {
            const std::size_t end = std::min(train_idx.size(), start + cfg.minibatch);
            const int bsz = static_cast<int>(end - start);

            // per-sample gradient slots keep the reduction order fixed
            std::vector<std::vector<std::vector<double>>> grads(static_cast<std::size_t>(bsz));
            std::vector<double> losses(static_cast<std::size_t>(bsz), 0.0);
#pragma omp parallel for schedule(dynamic)
            for (int b = 0; b < bsz; ++b) {
                const auto& rec = dataset.records[static_cast<std::size_t>(train_idx[start + b])];
                auto local = clone_leaves(weights);
                auto out = forward(model, local, record_input(rec, dataset.input_shape));
                auto loss = ops::mse_loss(out, record_label(rec, dataset.label_shape));
                backward(loss);
                losses[static_cast<std::size_t>(b)] = loss->data[0];
                auto& slot = grads[static_cast<std::size_t>(b)];
                slot.reserve(local.size());
                for (const auto& w : local) {
                    w->ensure_grad();
                    slot.push_back(std::move(w->grad));
                }
            }

            double batch_loss = 0.0;
            for (double l : losses) batch_loss += l;
            batch_loss /= bsz;
            if (!std::isfinite(batch_loss)) {
                throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                     ", batch " + std::to_string(n_batches));
            }

            const double inv = 1.0 / bsz;
            for (std::size_t t = 0; t < weights.size(); ++t) {
                auto& w = *weights[t];
                w.grad.assign(w.numel(), 0.0);
                for (int b = 0; b < bsz; ++b) {
                    const auto& g = grads[static_cast<std::size_t>(b)][t];
                    for (std::size_t i = 0; i < w.numel(); ++i) w.grad[i] += inv * g[i];
                }
            }
            adam_step(weights, adam, lr, cfg.l2);

            epoch_loss += batch_loss;
            ++n_batches;
            if (epoch == 0) result.first_epoch_batch_losses.push_back(batch_loss);
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.learning_rate = lr;
        stats.train_mse = epoch_loss / std::max(1, n_batches);
        stats.validation_mse = eval_mse(model, weights, dataset, val_idx);
        result.history.push_back(stats);
    }
    return result;
}

EvalEstimator make_ls_estimator() {
    EvalEstimator e;
    e.name = "ls";
    e.run = [](const PilotObservation& obs, const NoiseConfig&, const OfdmConfig& config) {
        return interpolate_full(obs, config);
    };
    return e;
}

EvalEstimator make_mmse_estimator(const CorrelationSet& corr) {
    EvalEstimator e;
    e.name = "mmse";
    e.run = [corr](const PilotObservation& obs, const NoiseConfig& noise, const OfdmConfig& config) {
        return mmse_estimate(obs, corr, noise, config);
    };
    return e;
}

EvalEstimator make_nn_estimator(std::string name, const ModelSpec& model, const Weights& weights) {
    EvalEstimator e;
    e.name = std::move(name);
    e.run = [&model, &weights](const PilotObservation& obs, const NoiseConfig&,
                               const OfdmConfig& config) {
        (void)config;
        auto out = infer(model, weights, pack_pilot_observation(obs.h_ls));
        return unpack_grid(*out);
    };
    return e;
}

EvalReport evaluate(const std::vector<EvalEstimator>& estimators, const EvalParams& params,
                    const OfdmConfig& config) {
    if (estimators.empty()) throw ParamError("evaluate: no estimators given");
    const auto pdp = standard_pdp(params.channel);
    const auto pattern = pilot_pattern(params.pattern);

    EvalReport report;
    for (std::size_t si = 0; si < params.snr_grid_db.size(); ++si) {
        NoiseConfig noise;
        noise.snr_db = params.snr_grid_db[si];
        noise.noiseless = params.noiseless;

        std::vector<std::vector<double>> mse(estimators.size(),
                                             std::vector<double>(static_cast<std::size_t>(params.n_frames)));
#pragma omp parallel for schedule(dynamic, 8)
        for (int fidx = 0; fidx < params.n_frames; ++fidx) {
            const std::uint64_t frame_seed =
                derive_seed(params.seed, 40 + si, static_cast<std::uint64_t>(fidx));
            auto rng = make_rng(derive_seed(frame_seed, 5, 0));
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            const double doppler = uni(rng) * params.doppler_max_hz;
            const auto fr = run_link(pdp, pattern, config, doppler, noise, frame_seed);
            for (std::size_t e = 0; e < estimators.size(); ++e) {
                const auto est = estimators[e].run(fr.obs, noise, config);
                mse[e][static_cast<std::size_t>(fidx)] = mse_metric(est, fr.truth);
            }
        }
        for (std::size_t e = 0; e < estimators.size(); ++e) {
            EvalRow row;
            row.estimator = estimators[e].name;
            row.channel = params.channel;
            row.pattern = params.pattern;
            row.snr_db = params.snr_grid_db[si];
            row.mse = std::accumulate(mse[e].begin(), mse[e].end(), 0.0) / params.n_frames;
            row.frames = params.n_frames;
            report.rows.push_back(row);
        }
    }
    return report;
}

std::vector<EvalReport> generalization_suite(const std::vector<EvalEstimator>& estimators,
                                             const std::vector<std::string>& channels,
                                             EvalParams params, const OfdmConfig& config) {
    std::vector<EvalReport> reports;
    for (const auto& channel : channels) {
        params.channel = channel;
        reports.push_back(evaluate(estimators, params, config));
    }
    return reports;
}

std::string report_to_csv(const EvalReport& report) {
    std::ostringstream os;
    os << "estimator,channel,pattern,snr_db,mse,frames\n";
    os.precision(12);
    for (const auto& r : report.rows) {
        os << r.estimator << "," << r.channel << "," << r.pattern << "," << r.snr_db << "," << r.mse
           << "," << r.frames << "\n";
    }
    return os.str();
}

void save_report_csv(const EvalReport& report, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw ArtifactError("cannot write report '" + path + "'");
    os << report_to_csv(report);
    if (!os) throw ArtifactError("write failed for report '" + path + "'");
}

}  // namespace celab
