#include <CLI11.hpp>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "celab/run_config.hpp"

namespace {

using namespace celab;

std::uint64_t file_digest(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open '" + path + "' for digest");
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[1 << 16];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        for (std::streamsize i = 0; i < is.gcount(); ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 0x100000001b3ULL;
        }
        if (!is) break;
    }
    return h;
}

int cmd_gen_data(const std::string& config_path, const std::string& out_override) {
    const auto cfg = load_run_config(config_path);
    const std::string out = out_override.empty() ? cfg.dataset_path : out_override;
    OfdmConfig ofdm;
    const auto ds = generate_dataset(cfg.dataset_params(), ofdm);
    save_dataset(ds, out);
    std::ostringstream digest;
    digest << std::hex << file_digest(out);
    std::cout << "wrote " << ds.records.size() << " records to " << out << " (digest "
              << digest.str() << ")\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& data_override,
              const std::string& out_override, const std::string& loss_csv) {
    const auto cfg = load_run_config(config_path);
    const std::string data_path = data_override.empty() ? cfg.dataset_path : data_override;
    const std::string out = out_override.empty() ? cfg.checkpoint_path : out_override;

    const auto dataset = load_dataset(data_path);
    const auto model = cfg.build_model();
    auto weights = init_weights(model, cfg.seed);
    const auto result = train(model, weights, dataset, cfg.train_config());
    save_checkpoint(out, model, weights);

    if (!loss_csv.empty()) {
        std::ofstream os(loss_csv);
        if (!os) throw ArtifactError("cannot write loss history '" + loss_csv + "'");
        os << "epoch,learning_rate,train_mse,validation_mse\n";
        os.precision(12);
        for (const auto& e : result.history) {
            os << e.epoch << "," << e.learning_rate << "," << e.train_mse << ","
               << e.validation_mse << "\n";
        }
    }
    std::cout << "trained " << model.kind << " for " << result.history.size() << " epochs, final mse "
              << (result.history.empty() ? 0.0 : result.history.back().train_mse) << ", checkpoint "
              << out << "\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& ckpt_override,
             const std::string& out_override) {
    const auto cfg = load_run_config(config_path);
    const std::string out = out_override.empty() ? cfg.report_path : out_override;
    OfdmConfig ofdm;

    ModelSpec model;
    Weights weights;
    CorrelationSet corr;
    std::vector<EvalEstimator> estimators;
    std::stringstream names(cfg.estimators);
    std::string name;
    while (std::getline(names, name, ',')) {
        if (name == "ls") {
            estimators.push_back(make_ls_estimator());
        } else if (name == "mmse") {
            corr = estimate_correlations(standard_pdp(cfg.channel), cfg.doppler_max,
                                         pilot_pattern(cfg.pattern), ofdm, cfg.corr_ensemble,
                                         cfg.seed);
            estimators.push_back(make_mmse_estimator(corr));
        } else if (name == "nn") {
            const std::string ckpt = ckpt_override.empty() ? cfg.checkpoint_path : ckpt_override;
            model = cfg.build_model();
            weights = load_checkpoint(ckpt, model).weights;
            estimators.push_back(make_nn_estimator(cfg.model, model, weights));
        } else {
            throw ConfigError("unknown estimator '" + name + "', valid values: ls, mmse, nn");
        }
    }

    const auto report = evaluate(estimators, cfg.eval_params(), ofdm);
    save_report_csv(report, out);
    std::cout << "wrote " << report.rows.size() << " rows to " << out << "\n";
    return 0;
}

int cmd_prune(const std::string& config_path, double rate, const std::string& ckpt_override,
              const std::string& out_override) {
    const auto cfg = load_run_config(config_path);
    const std::string in = ckpt_override.empty() ? cfg.checkpoint_path : ckpt_override;
    const std::string out = out_override.empty() ? in + ".pruned" : out_override;
    const auto model = cfg.build_model();
    auto ckpt = load_checkpoint(in, model);
    const auto mask = prune_magnitude(ckpt.weights, model, rate);
    save_checkpoint(out, model, ckpt.weights, &mask);
    std::cout << "pruned " << mask.n_zeroed << " weights at rate " << rate << ", checkpoint " << out
              << "\n";
    return 0;
}

int cmd_params(const std::string& model_name, int n_filter, const std::string& pattern_name,
               bool nonzero, const std::string& ckpt_path) {
    RunConfig cfg;
    cfg.model = model_name;
    cfg.n_filter = n_filter;
    cfg.pattern = pattern_name;
    const auto model = cfg.build_model();
    if (nonzero) {
        if (ckpt_path.empty()) throw ConfigError("--nonzero requires --checkpoint");
        const auto ckpt = load_checkpoint(ckpt_path, model);
        std::cout << count_nonzero_weights(ckpt.weights, model) << "\n";
    } else {
        std::cout << count_parameters(model) << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
#ifdef _OPENMP
    if (const char* threads = std::getenv("CELAB_THREADS")) {
        const int n = std::atoi(threads);
        if (n > 0) omp_set_num_threads(n);
    }
#endif

    CLI::App app{"OFDM channel estimation laboratory"};
    app.require_subcommand(1);

    std::string config_path, out_path, data_path, ckpt_path, loss_csv;
    double rate = 0.0;
    std::string model_name = "interp-resnet", pattern_name = "default";
    int n_filter = 8;
    bool nonzero = false;

    auto* gen = app.add_subcommand("gen-data", "Generate a training/test dataset");
    gen->add_option("--config", config_path, "run config file")->required();
    gen->add_option("--out", out_path, "output dataset path (overrides config)");

    auto* tr = app.add_subcommand("train", "Train a model on a dataset");
    tr->add_option("--config", config_path, "run config file")->required();
    tr->add_option("--data", data_path, "dataset path (overrides config)");
    tr->add_option("--out", out_path, "checkpoint path (overrides config)");
    tr->add_option("--loss-csv", loss_csv, "write per-epoch loss history CSV");

    auto* ev = app.add_subcommand("eval", "Evaluate estimators over an SNR grid");
    ev->add_option("--config", config_path, "run config file")->required();
    ev->add_option("--checkpoint", ckpt_path, "checkpoint path (overrides config)");
    ev->add_option("--out", out_path, "report CSV path (overrides config)");

    auto* pr = app.add_subcommand("prune", "Magnitude-prune a checkpoint");
    pr->add_option("--config", config_path, "run config file")->required();
    pr->add_option("--rate", rate, "pruning rate in [0,1)")->required();
    pr->add_option("--checkpoint", ckpt_path, "input checkpoint (overrides config)");
    pr->add_option("--out", out_path, "output checkpoint");

    auto* pa = app.add_subcommand("params", "Print a model's parameter count");
    pa->add_option("--model", model_name, "interp-resnet | reesnet-a | reesnet-b");
    pa->add_option("--n-filter", n_filter, "filters per convolution (interp-resnet)");
    pa->add_option("--pattern", pattern_name, "pilot pattern");
    pa->add_flag("--nonzero", nonzero, "count nonzero parameters of a checkpoint");
    pa->add_option("--checkpoint", ckpt_path, "checkpoint for --nonzero");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen_data(config_path, out_path);
        if (tr->parsed()) return cmd_train(config_path, data_path, out_path, loss_csv);
        if (ev->parsed()) return cmd_eval(config_path, ckpt_path, out_path);
        if (pr->parsed()) return cmd_prune(config_path, rate, ckpt_path, out_path);
        if (pa->parsed()) return cmd_params(model_name, n_filter, pattern_name, nonzero, ckpt_path);
    } catch (const celab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const celab::ParamError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const celab::ArtifactError& e) {
        std::cerr << "artifact error: " << e.what() << "\n";
        return 3;
    } catch (const celab::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    } catch (const celab::ShapeError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return 4;
    }
    return 0;
}
