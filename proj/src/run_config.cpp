#include "celab/run_config.hpp"

#include <fstream>
#include <sstream>

namespace celab {

ModelSpec RunConfig::build_model() const {
    const auto pat = pilot_pattern(pattern);
    const std::vector<int> in_shape = {pat.pilots_per_symbol(),
                                       static_cast<int>(pat.pilot_symbols.size()), 2};
    if (model == "interp-resnet") return build_interpolation_resnet(n_filter, in_shape);
    if (model == "reesnet-a") return build_reesnet('A', in_shape);
    if (model == "reesnet-b") return build_reesnet('B', in_shape);
    throw ConfigError("unknown model '" + model +
                      "', valid values: interp-resnet, reesnet-a, reesnet-b");
}

TrainConfig RunConfig::train_config() const {
    TrainConfig cfg;
    cfg.max_epochs = epochs;
    cfg.schedule = {initial_lr, lr_drop_period, lr_drop_factor};
    cfg.minibatch = minibatch;
    cfg.l2 = l2;
    cfg.validation_fraction = validation_fraction;
    cfg.seed = seed;
    return cfg;
}

DatasetParams RunConfig::dataset_params() const {
    DatasetParams p;
    p.channel = channel;
    p.pattern = pattern;
    p.snr_min_db = snr_min;
    p.snr_max_db = snr_max;
    p.doppler_max_hz = doppler_max;
    p.n_per_snr = n_per_snr;
    p.seed = seed;
    return p;
}

EvalParams RunConfig::eval_params() const {
    EvalParams p;
    p.channel = channel;
    p.pattern = pattern;
    p.snr_grid_db.clear();
    for (int s = eval_snr_min; s <= eval_snr_max; s += snr_step) p.snr_grid_db.push_back(s);
    p.doppler_max_hz = doppler_max;
    p.n_frames = n_frames;
    p.seed = seed;
    return p;
}

RunConfig parse_run_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream is(text);
    std::string line;
    int line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value, got '" +
                              line + "'");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (value.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty value for key '" + key + "'");
        }
        try {
            if (key == "channel") cfg.channel = value;
            else if (key == "pattern") cfg.pattern = value;
            else if (key == "snr_min") cfg.snr_min = std::stoi(value);
            else if (key == "snr_max") cfg.snr_max = std::stoi(value);
            else if (key == "snr_step") cfg.snr_step = std::stoi(value);
            else if (key == "eval_snr_min") cfg.eval_snr_min = std::stoi(value);
            else if (key == "eval_snr_max") cfg.eval_snr_max = std::stoi(value);
            else if (key == "doppler_max") cfg.doppler_max = std::stod(value);
            else if (key == "model") cfg.model = value;
            else if (key == "n_filter") cfg.n_filter = std::stoi(value);
            else if (key == "n_per_snr") cfg.n_per_snr = std::stoi(value);
            else if (key == "n_frames") cfg.n_frames = std::stoi(value);
            else if (key == "corr_ensemble") cfg.corr_ensemble = std::stoi(value);
            else if (key == "epochs") cfg.epochs = std::stoi(value);
            else if (key == "initial_lr") cfg.initial_lr = std::stod(value);
            else if (key == "lr_drop_period") cfg.lr_drop_period = std::stoi(value);
            else if (key == "lr_drop_factor") cfg.lr_drop_factor = std::stod(value);
            else if (key == "minibatch") cfg.minibatch = std::stoi(value);
            else if (key == "l2") cfg.l2 = std::stod(value);
            else if (key == "validation_fraction") cfg.validation_fraction = std::stod(value);
            else if (key == "seed") cfg.seed = std::stoull(value);
            else if (key == "dataset") cfg.dataset_path = value;
            else if (key == "checkpoint") cfg.checkpoint_path = value;
            else if (key == "report") cfg.report_path = value;
            else if (key == "estimators") cfg.estimators = value;
            else {
                throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            throw ConfigError("line " + std::to_string(line_no) + ": bad value '" + value +
                              "' for key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_run_config(buf.str());
}

}  // namespace celab
