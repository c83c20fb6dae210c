#include "celab/estimators.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <fstream>

#include "celab/rng.hpp"

namespace celab {

namespace {

// linear interpolation of pilot-symbol columns across time, clamped at the
// frame edges
ComplexGrid time_interpolate(const std::vector<std::vector<cplx>>& columns,
                             const std::vector<int>& pilot_symbols, const OfdmConfig& config) {
    ComplexGrid out(config.n_subcarriers, config.n_symbols);
    const int n_pil = static_cast<int>(pilot_symbols.size());
    for (int t = 0; t < config.n_symbols; ++t) {
        if (t <= pilot_symbols.front()) {
            for (int f = 0; f < config.n_subcarriers; ++f) out.at(f, t) = columns.front()[f];
            continue;
        }
        if (t >= pilot_symbols.back()) {
            for (int f = 0; f < config.n_subcarriers; ++f) out.at(f, t) = columns.back()[f];
            continue;
        }
        int k = 0;
        while (pilot_symbols[k + 1] < t) ++k;
        const int t0 = pilot_symbols[k], t1 = pilot_symbols[k + 1];
        const double a = static_cast<double>(t - t0) / (t1 - t0);
        for (int f = 0; f < config.n_subcarriers; ++f) {
            out.at(f, t) = (1.0 - a) * columns[k][f] + a * columns[k + 1][f];
        }
        (void)n_pil;
    }
    return out;
}

}  // namespace

PilotObservation ls_estimate(const ComplexGrid& y, const ComplexGrid& x, const PilotPattern& pattern) {
    PilotObservation obs;
    obs.pattern = pattern;
    obs.h_ls.resize(pattern.pilot_symbols.size());
    for (std::size_t s = 0; s < pattern.pilot_symbols.size(); ++s) {
        const int t = pattern.pilot_symbols[s];
        for (int f : pattern.pilot_subcarriers[s]) {
            const cplx xv = x.at(f, t);
            if (xv == cplx(0.0)) {
                throw NumericalError("ls_estimate: zero pilot value at subcarrier " +
                                     std::to_string(f) + ", symbol " + std::to_string(t));
            }
            obs.h_ls[s].push_back(y.at(f, t) / xv);
        }
    }
    return obs;
}

ComplexGrid interpolate_full(const PilotObservation& obs, const OfdmConfig& config) {
    const auto& pattern = obs.pattern;
    if (pattern.pilot_symbols.size() < 2) {
        throw ParamError("interpolate_full: need at least 2 pilot symbols, pattern '" + pattern.name +
                         "' has " + std::to_string(pattern.pilot_symbols.size()));
    }
    std::vector<std::vector<cplx>> columns;
    for (std::size_t s = 0; s < pattern.pilot_symbols.size(); ++s) {
        const auto& sc = pattern.pilot_subcarriers[s];
        if (sc.size() < 2) throw ParamError("interpolate_full: need at least 2 pilot subcarriers");
        std::vector<cplx> col(config.n_subcarriers);
        for (int f = 0; f < config.n_subcarriers; ++f) {
            if (f <= sc.front()) {
                col[f] = obs.h_ls[s].front();
            } else if (f >= sc.back()) {
                col[f] = obs.h_ls[s].back();
            } else {
                std::size_t k = 0;
                while (sc[k + 1] < f) ++k;
                const double a = static_cast<double>(f - sc[k]) / (sc[k + 1] - sc[k]);
                col[f] = (1.0 - a) * obs.h_ls[s][k] + a * obs.h_ls[s][k + 1];
            }
        }
        columns.push_back(std::move(col));
    }
    return time_interpolate(columns, pattern.pilot_symbols, config);
}

CorrelationSet estimate_correlations(const PowerDelayProfile& pdp, double max_doppler_hz,
                                     const PilotPattern& pattern, const OfdmConfig& config,
                                     int ensemble_size, std::uint64_t seed) {
    if (ensemble_size < 100) throw ParamError("estimate_correlations: ensemble size must be >= 100");
    const int nf = config.n_subcarriers;
    const int np = pattern.pilots_per_symbol();
    const int ns = static_cast<int>(pattern.pilot_symbols.size());

    CorrelationSet corr;
    corr.n_subcarriers = nf;
    corr.n_pilots = np;
    corr.channel_name = pdp.name;
    corr.ensemble_size = ensemble_size;
    corr.r_hhp.assign(static_cast<std::size_t>(nf) * np, cplx(0.0));
    corr.r_hphp.assign(static_cast<std::size_t>(np) * np, cplx(0.0));

    constexpr int kChunk = 256;
    std::vector<std::vector<std::vector<cplx>>> cols(kChunk);  // [m][pilot symbol][subcarrier]
    for (int base = 0; base < ensemble_size; base += kChunk) {
        const int count = std::min(kChunk, ensemble_size - base);
#pragma omp parallel for schedule(static)
        for (int i = 0; i < count; ++i) {
            const int m = base + i;
            auto rng = make_rng(derive_seed(seed, 10, static_cast<std::uint64_t>(m)));
            std::uniform_real_distribution<double> uni(0.0, 1.0);
            const double doppler = uni(rng) * max_doppler_hz;
            const auto ch = generate_channel(pdp, doppler, config.n_symbols, config,
                                             derive_seed(seed, 11, static_cast<std::uint64_t>(m)));
            const auto h = true_frequency_response(ch, config);
            cols[i].assign(ns, std::vector<cplx>(nf));
            for (int s = 0; s < ns; ++s) {
                for (int f = 0; f < nf; ++f) cols[i][s][f] = h.at(f, pattern.pilot_symbols[s]);
            }
        }
        // ordered accumulation keeps the result thread-count independent
        for (int i = 0; i < count; ++i) {
            for (int s = 0; s < ns; ++s) {
                const auto& col = cols[i][s];
                const auto& sc = pattern.pilot_subcarriers[s];
                for (int p = 0; p < np; ++p) {
                    const cplx hp = std::conj(col[sc[p]]);
                    for (int f = 0; f < nf; ++f) corr.r_hhp[static_cast<std::size_t>(f) * np + p] += col[f] * hp;
                    for (int q = 0; q < np; ++q)
                        corr.r_hphp[static_cast<std::size_t>(q) * np + p] += col[sc[q]] * hp;
                }
            }
        }
    }
    const double scale = 1.0 / (static_cast<double>(ensemble_size) * ns);
    for (auto& v : corr.r_hhp) v *= scale;
    for (auto& v : corr.r_hphp) v *= scale;
    return corr;
}

ComplexGrid mmse_estimate(const PilotObservation& obs, const CorrelationSet& corr,
                          const NoiseConfig& noise, const OfdmConfig& config) {
    const int np = corr.n_pilots;
    const int nf = corr.n_subcarriers;
    if (obs.pattern.pilots_per_symbol() != np) {
        throw ShapeError("mmse_estimate: correlation set has " + std::to_string(np) +
                         " pilots, pattern '" + obs.pattern.name + "' has " +
                         std::to_string(obs.pattern.pilots_per_symbol()));
    }
    using Mat = Eigen::MatrixXcd;
    using Vec = Eigen::VectorXcd;
    Mat r_hphp(np, np), r_hhp(nf, np);
    for (int i = 0; i < np; ++i)
        for (int j = 0; j < np; ++j) r_hphp(i, j) = corr.r_hphp[static_cast<std::size_t>(i) * np + j];
    for (int i = 0; i < nf; ++i)
        for (int j = 0; j < np; ++j) r_hhp(i, j) = corr.r_hhp[static_cast<std::size_t>(i) * np + j];

    const double reg = noise.noiseless ? 0.0 : noise.noise_variance();
    Mat a = r_hphp + reg * Mat::Identity(np, np);
    // W = R_HHp A^-1 via A^T W^T = R_HHp^T
    Eigen::PartialPivLU<Mat> lu(a.transpose().eval());
    Mat weights = lu.solve(r_hhp.transpose()).transpose();
    if (!weights.allFinite()) throw NumericalError("mmse_estimate: singular regularized matrix");

    std::vector<std::vector<cplx>> columns;
    for (std::size_t s = 0; s < obs.pattern.pilot_symbols.size(); ++s) {
        Vec hls(np);
        for (int p = 0; p < np; ++p) hls(p) = obs.h_ls[s][p];
        Vec est = weights * hls;
        std::vector<cplx> col(nf);
        for (int f = 0; f < nf; ++f) col[f] = est(f);
        columns.push_back(std::move(col));
    }
    return time_interpolate(columns, obs.pattern.pilot_symbols, config);
}

double mse_metric(const ComplexGrid& estimate, const ComplexGrid& truth) {
    if (estimate.n_subcarriers != truth.n_subcarriers || estimate.n_symbols != truth.n_symbols) {
        throw ShapeError("mse_metric: grid shapes differ");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < estimate.values.size(); ++i) {
        acc += std::norm(estimate.values[i] - truth.values[i]);
    }
    return acc / static_cast<double>(estimate.values.size());
}

namespace {
constexpr char kCorrMagic[9] = "CECR0001";

template <typename T>
void write_pod(std::ostream& os, const T& v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v) {
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_correlations(const CorrelationSet& corr, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ArtifactError("cannot write correlation file '" + path + "'");
    os.write(kCorrMagic, 8);
    write_pod(os, static_cast<std::uint32_t>(corr.n_subcarriers));
    write_pod(os, static_cast<std::uint32_t>(corr.n_pilots));
    write_pod(os, static_cast<std::uint32_t>(corr.ensemble_size));
    write_pod(os, static_cast<std::uint32_t>(corr.channel_name.size()));
    os.write(corr.channel_name.data(), static_cast<std::streamsize>(corr.channel_name.size()));
    auto write_mat = [&](const std::vector<cplx>& m) {
        for (const auto& v : m) {
            write_pod(os, v.real());
            write_pod(os, v.imag());
        }
    };
    write_mat(corr.r_hhp);
    write_mat(corr.r_hphp);
    if (!os) throw ArtifactError("write failed for correlation file '" + path + "'");
}

CorrelationSet load_correlations(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ArtifactError("cannot open correlation file '" + path + "'");
    char magic[8];
    is.read(magic, 8);
    if (!is || std::string(magic, 8) != std::string(kCorrMagic, 8)) {
        throw ArtifactError("'" + path + "' is not a correlation artifact");
    }
    CorrelationSet corr;
    std::uint32_t nf = 0, np = 0, m = 0, name_len = 0;
    read_pod(is, nf);
    read_pod(is, np);
    read_pod(is, m);
    read_pod(is, name_len);
    corr.n_subcarriers = static_cast<int>(nf);
    corr.n_pilots = static_cast<int>(np);
    corr.ensemble_size = static_cast<int>(m);
    corr.channel_name.resize(name_len);
    is.read(corr.channel_name.data(), name_len);
    auto read_mat = [&](std::vector<cplx>& mat, std::size_t n) {
        mat.resize(n);
        for (auto& v : mat) {
            double re = 0, im = 0;
            read_pod(is, re);
            read_pod(is, im);
            v = cplx(re, im);
        }
    };
    read_mat(corr.r_hhp, static_cast<std::size_t>(nf) * np);
    read_mat(corr.r_hphp, static_cast<std::size_t>(np) * np);
    if (!is) throw ArtifactError("truncated correlation file '" + path + "'");
    return corr;
}

}  // namespace celab
