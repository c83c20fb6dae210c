#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "celab/estimators.hpp"
#include "celab/model.hpp"
#include "celab/optim.hpp"

namespace celab {

struct DatasetRecord {
    std::vector<float> input;  // P_sc x P_sym x 2
    std::vector<float> label;  // 72 x 14 x 2, noise-free true response
    double snr_db = 0.0;
    double doppler_hz = 0.0;
    std::uint64_t seed = 0;
};

struct Dataset {
    std::string pattern_name;
    std::string channel_name;
    std::vector<int> input_shape;
    std::vector<int> label_shape;
    std::vector<DatasetRecord> records;
};

struct DatasetParams {
    std::string channel = "EPA";
    std::string pattern = "default";
    int snr_min_db = 0;
    int snr_max_db = 20;
    double doppler_max_hz = 97.0;
    int n_per_snr = 100;
    std::uint64_t seed = 1;
};

Dataset generate_dataset(const DatasetParams& params, const OfdmConfig& config);

// Dataset file, magic "CEDS0001": header then contiguous little-endian
// records (snr, doppler, seed, input floats, label floats).
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

struct TrainConfig {
    int max_epochs = 100;
    LrSchedule schedule{0.001, 20, 0.5};
    int minibatch = 128;
    double l2 = 0.001;
    double validation_fraction = 0.05;
    std::uint64_t seed = 1;
};

struct EpochStats {
    int epoch = 0;
    double learning_rate = 0.0;
    double train_mse = 0.0;
    double validation_mse = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    // per-batch training losses of the first epoch, for convergence checks
    std::vector<double> first_epoch_batch_losses;
};

TrainResult train(const ModelSpec& model, Weights& weights, const Dataset& dataset,
                  const TrainConfig& cfg);

// An estimator producing a full-grid estimate from one frame's observables.
struct EvalEstimator {
    std::string name;
    std::function<ComplexGrid(const PilotObservation&, const NoiseConfig&, const OfdmConfig&)> run;
};

EvalEstimator make_ls_estimator();
EvalEstimator make_mmse_estimator(const CorrelationSet& corr);
EvalEstimator make_nn_estimator(std::string name, const ModelSpec& model, const Weights& weights);

struct EvalRow {
    std::string estimator;
    std::string channel;
    std::string pattern;
    double snr_db = 0.0;
    double mse = 0.0;
    int frames = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
};

struct EvalParams {
    std::string channel = "EPA";
    std::string pattern = "default";
    std::vector<double> snr_grid_db = {-5, 0, 5, 10, 15, 20, 25};
    double doppler_max_hz = 97.0;
    int n_frames = 500;
    std::uint64_t seed = 1;
    bool noiseless = false;
};

// Paired evaluation: every estimator sees the identical channel and noise
// realization for each frame.
EvalReport evaluate(const std::vector<EvalEstimator>& estimators, const EvalParams& params,
                    const OfdmConfig& config);

// Same checkpoint evaluated across several channel models, no retraining.
std::vector<EvalReport> generalization_suite(const std::vector<EvalEstimator>& estimators,
                                             const std::vector<std::string>& channels,
                                             EvalParams params, const OfdmConfig& config);

std::string report_to_csv(const EvalReport& report);
void save_report_csv(const EvalReport& report, const std::string& path);

}  // namespace celab
