#pragma once

#include <cstdint>
#include <string>

#include "celab/pipeline.hpp"

namespace celab {

// Plain-text key=value experiment description. Unknown keys are rejected
// with the offending line number; defaults are the baseband and training
// tables' values.
struct RunConfig {
    std::string channel = "EPA";
    std::string pattern = "default";
    int snr_min = 0;
    int snr_max = 20;
    int snr_step = 5;          // evaluation grid step
    int eval_snr_min = -5;     // evaluation uses the extended range
    int eval_snr_max = 25;
    double doppler_max = 97.0;
    std::string model = "interp-resnet";  // interp-resnet | reesnet-a | reesnet-b
    int n_filter = 8;
    int n_per_snr = 100;
    int n_frames = 500;
    int corr_ensemble = 10000;
    int epochs = 100;
    double initial_lr = 0.001;
    int lr_drop_period = 20;
    double lr_drop_factor = 0.5;
    int minibatch = 128;
    double l2 = 0.001;
    double validation_fraction = 0.05;
    std::uint64_t seed = 1;
    std::string dataset_path = "dataset.ceds";
    std::string checkpoint_path = "model.cewt";
    std::string report_path = "report.csv";
    std::string estimators = "ls,mmse,nn";

    ModelSpec build_model() const;
    TrainConfig train_config() const;
    DatasetParams dataset_params() const;
    EvalParams eval_params() const;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

}  // namespace celab
