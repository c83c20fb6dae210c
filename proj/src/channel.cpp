#include "celab/channel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "celab/rng.hpp"

namespace celab {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kJakesSinusoids = 64;

PowerDelayProfile make_pdp(std::string name, std::vector<double> delays_ns,
                           std::vector<double> powers_db) {
    PowerDelayProfile pdp;
    pdp.name = std::move(name);
    pdp.tap_delays_s.reserve(delays_ns.size());
    for (double d : delays_ns) pdp.tap_delays_s.push_back(d * 1e-9);
    pdp.tap_powers_db = std::move(powers_db);
    double total = 0.0;
    for (double p : pdp.tap_powers_db) total += std::pow(10.0, p / 10.0);
    pdp.tap_powers_lin.reserve(pdp.tap_powers_db.size());
    for (double p : pdp.tap_powers_db) pdp.tap_powers_lin.push_back(std::pow(10.0, p / 10.0) / total);
    return pdp;
}

}  // namespace

std::vector<std::string> standard_pdp_names() { return {"EPA", "EVA", "ETU"}; }

PowerDelayProfile standard_pdp(const std::string& name) {
    // 3GPP TS 36.101 Annex B tapped-delay-line profiles
    if (name == "EPA") {
        return make_pdp("EPA", {0, 30, 70, 90, 110, 190, 410},
                        {0.0, -1.0, -2.0, -3.0, -8.0, -17.2, -20.8});
    }
    if (name == "EVA") {
        return make_pdp("EVA", {0, 30, 150, 310, 370, 710, 1090, 1730, 2510},
                        {0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9});
    }
    if (name == "ETU") {
        return make_pdp("ETU", {0, 50, 120, 200, 230, 500, 1600, 2300, 5000},
                        {-1.0, -1.0, -1.0, 0.0, 0.0, 0.0, -3.0, -5.0, -7.0});
    }
    throw ParamError("unknown power delay profile '" + name + "', valid names: EPA, EVA, ETU");
}

std::string pdp_to_text(const PowerDelayProfile& pdp) {
    std::ostringstream os;
    os << pdp.name;
    os << " delays_ns=";
    for (std::size_t i = 0; i < pdp.tap_delays_s.size(); ++i) {
        if (i) os << ",";
        os << pdp.tap_delays_s[i] * 1e9;
    }
    os << " powers_db=";
    for (std::size_t i = 0; i < pdp.tap_powers_db.size(); ++i) {
        if (i) os << ",";
        os << pdp.tap_powers_db[i];
    }
    return os.str();
}

PilotPattern pilot_pattern(const std::string& name) {
    PilotPattern p;
    p.name = name;
    if (name == "default") {
        // pilot symbols 1 and 13 (1-based); subcarriers spaced by 3,
        // starting at subcarrier 1 and 2 respectively
        p.pilot_symbols = {0, 12};
        for (int start : {0, 1}) {
            std::vector<int> sc;
            for (int k = start; k < 72; k += 3) sc.push_back(k);
            p.pilot_subcarriers.push_back(std::move(sc));
        }
    } else if (name == "alternate") {
        // pilot symbols 1, 5, 9, 13; subcarriers spaced by 6 starting at
        // subcarriers 1, 2, 4, 6
        p.pilot_symbols = {0, 4, 8, 12};
        for (int start : {0, 1, 3, 5}) {
            std::vector<int> sc;
            for (int k = start; k < 72; k += 6) sc.push_back(k);
            p.pilot_subcarriers.push_back(std::move(sc));
        }
    } else {
        throw ParamError("unknown pilot pattern '" + name + "', valid names: default, alternate");
    }
    return p;
}

PowerDelayProfile pdp_from_text(const std::string& line) {
    std::istringstream is(line);
    std::string name, delays_field, powers_field;
    is >> name >> delays_field >> powers_field;
    auto parse_list = [&](const std::string& field, const std::string& key) {
        if (field.rfind(key + "=", 0) != 0) {
            throw ParamError("pdp_from_text: expected '" + key + "=...' in '" + line + "'");
        }
        std::vector<double> out;
        std::istringstream vs(field.substr(key.size() + 1));
        std::string tok;
        while (std::getline(vs, tok, ',')) out.push_back(std::stod(tok));
        return out;
    };
    auto delays = parse_list(delays_field, "delays_ns");
    auto powers = parse_list(powers_field, "powers_db");
    if (name.empty() || delays.empty() || delays.size() != powers.size()) {
        throw ParamError("pdp_from_text: malformed registry line '" + line + "'");
    }
    for (std::size_t i = 1; i < delays.size(); ++i) {
        if (delays[i] <= delays[i - 1]) throw ParamError("pdp_from_text: delays must be strictly increasing");
    }
    return make_pdp(name, delays, powers);
}

int PilotPattern::total_pilots() const {
    int n = 0;
    for (const auto& sc : pilot_subcarriers) n += static_cast<int>(sc.size());
    return n;
}

double NoiseConfig::snr_linear() const {
    if (noiseless) return std::numeric_limits<double>::infinity();
    return std::pow(10.0, snr_db / 10.0);
}

ChannelRealization generate_channel(const PowerDelayProfile& pdp, double max_doppler_hz,
                                    int n_symbols, const OfdmConfig& config, std::uint64_t seed) {
    if (max_doppler_hz < 0.0) throw ParamError("generate_channel: doppler must be non-negative");
    if (n_symbols < 1) throw ParamError("generate_channel: need at least one symbol");

    ChannelRealization ch;
    ch.pdp = pdp;
    ch.max_doppler_hz = max_doppler_hz;
    ch.tap_gains.assign(n_symbols, std::vector<cplx>(pdp.n_taps()));

    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> uni(0.0, kTwoPi);
    const double t_sym = config.symbol_duration_s();

    for (std::size_t l = 0; l < pdp.n_taps(); ++l) {
        double alphas[kJakesSinusoids], phis[kJakesSinusoids];
        for (int n = 0; n < kJakesSinusoids; ++n) {
            alphas[n] = uni(rng);
            phis[n] = uni(rng);
        }
        const double amp = std::sqrt(pdp.tap_powers_lin[l] / kJakesSinusoids);
        for (int m = 0; m < n_symbols; ++m) {
            const double t = m * t_sym;
            cplx acc = 0.0;
            for (int n = 0; n < kJakesSinusoids; ++n) {
                const double phase = kTwoPi * max_doppler_hz * std::cos(alphas[n]) * t + phis[n];
                acc += cplx(std::cos(phase), std::sin(phase));
            }
            ch.tap_gains[m][l] = amp * acc;
        }
    }
    return ch;
}

ComplexGrid build_frame(const PilotPattern& pattern, const OfdmConfig& config, std::uint64_t seed) {
    ComplexGrid x(config.n_subcarriers, config.n_symbols);
    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> bit(0, 3);
    const double a = 1.0 / std::sqrt(2.0);
    const cplx qpsk[4] = {{a, a}, {a, -a}, {-a, a}, {-a, -a}};

    for (int t = 0; t < config.n_symbols; ++t) {
        auto it = std::find(pattern.pilot_symbols.begin(), pattern.pilot_symbols.end(), t);
        if (it == pattern.pilot_symbols.end()) {
            for (int f = 0; f < config.n_subcarriers; ++f) x.at(f, t) = qpsk[bit(rng)];
        } else {
            const auto& sc = pattern.pilot_subcarriers[it - pattern.pilot_symbols.begin()];
            for (int f : sc) x.at(f, t) = qpsk[bit(rng)];
        }
    }
    return x;
}

int bin_for_subcarrier(int k, const OfdmConfig& config) {
    // centered mapping, DC bin 0 unused: the lower half of the band lands on
    // the negative-frequency bins, the upper half on bins 1..n/2
    const int half = config.n_subcarriers / 2;
    if (k < half) return config.fft_size - half + k;
    return k - half + 1;
}

void fft_unitary(std::vector<cplx>& buf, bool inverse) {
    const std::size_t n = buf.size();
    if (n == 0 || (n & (n - 1)) != 0) throw ParamError("fft_unitary: size must be a power of two");
    // bit reversal
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(buf[i], buf[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = (inverse ? 1.0 : -1.0) * kTwoPi / static_cast<double>(len);
        const cplx wlen(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cplx w = 1.0;
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cplx u = buf[i + k];
                const cplx v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
        }
    }
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    for (auto& v : buf) v *= scale;
}

std::vector<cplx> ofdm_modulate(const ComplexGrid& x, const OfdmConfig& config) {
    if (x.n_subcarriers != config.n_subcarriers || x.n_symbols != config.n_symbols) {
        throw ShapeError("ofdm_modulate: grid does not match config");
    }
    std::vector<cplx> out;
    out.reserve(static_cast<std::size_t>(config.n_symbols) * config.samples_per_symbol());
    std::vector<cplx> buf(config.fft_size);
    for (int t = 0; t < config.n_symbols; ++t) {
        std::fill(buf.begin(), buf.end(), cplx(0.0));
        for (int f = 0; f < config.n_subcarriers; ++f) buf[bin_for_subcarrier(f, config)] = x.at(f, t);
        fft_unitary(buf, true);
        // cyclic prefix
        for (int n = config.fft_size - config.cp_length; n < config.fft_size; ++n) out.push_back(buf[n]);
        for (int n = 0; n < config.fft_size; ++n) out.push_back(buf[n]);
    }
    return out;
}

std::vector<int> quantized_tap_delays(const PowerDelayProfile& pdp, const OfdmConfig& config) {
    std::vector<int> delays;
    delays.reserve(pdp.n_taps());
    for (double d : pdp.tap_delays_s) {
        delays.push_back(static_cast<int>(std::lround(d * config.sample_rate_hz())));
    }
    return delays;
}

namespace {

// combined per-sample-delay gains for one symbol; colliding taps are summed
std::map<int, cplx> combined_taps(const ChannelRealization& ch, const std::vector<int>& delays,
                                  int symbol) {
    std::map<int, cplx> q;
    for (std::size_t l = 0; l < delays.size(); ++l) q[delays[l]] += ch.tap_gains[symbol][l];
    return q;
}

}  // namespace

ChannelOutput apply_channel(const std::vector<cplx>& samples, const ChannelRealization& realization,
                            const OfdmConfig& config) {
    const int sps = config.samples_per_symbol();
    const int n_sym = static_cast<int>(samples.size()) / sps;
    if (samples.size() != static_cast<std::size_t>(n_sym) * sps ||
        n_sym != static_cast<int>(realization.tap_gains.size())) {
        throw ShapeError("apply_channel: sample stream does not match realization");
    }
    const auto delays = quantized_tap_delays(realization.pdp, config);

    ChannelOutput out;
    out.samples.assign(samples.size(), cplx(0.0));
    for (int d : delays) {
        if (d >= config.cp_length) out.cp_violation = true;
    }
    for (int s = 0; s < n_sym; ++s) {
        const auto q = combined_taps(realization, delays, s);
        const cplx* in = samples.data() + static_cast<std::size_t>(s) * sps;
        cplx* o = out.samples.data() + static_cast<std::size_t>(s) * sps;
        for (int n = 0; n < sps; ++n) {
            cplx acc = 0.0;
            for (const auto& [d, g] : q) {
                if (n - d >= 0) acc += g * in[n - d];
            }
            o[n] = acc;
        }
    }
    return out;
}

std::vector<cplx> add_awgn(const std::vector<cplx>& samples, const NoiseConfig& noise,
                           std::uint64_t seed) {
    if (noise.noiseless) return samples;
    const double sigma = std::sqrt(noise.noise_variance() / 2.0);
    auto rng = make_rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<cplx> out(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        out[i] = samples[i] + cplx(re, im);
    }
    return out;
}

ComplexGrid ofdm_demodulate(const std::vector<cplx>& samples, const OfdmConfig& config) {
    const std::size_t expected =
        static_cast<std::size_t>(config.n_symbols) * config.samples_per_symbol();
    if (samples.size() != expected) {
        throw ShapeError("ofdm_demodulate: expected " + std::to_string(expected) + " samples, got " +
                         std::to_string(samples.size()));
    }
    ComplexGrid y(config.n_subcarriers, config.n_symbols);
    std::vector<cplx> buf(config.fft_size);
    for (int t = 0; t < config.n_symbols; ++t) {
        const cplx* sym = samples.data() + static_cast<std::size_t>(t) * config.samples_per_symbol();
        std::copy(sym + config.cp_length, sym + config.samples_per_symbol(), buf.begin());
        fft_unitary(buf, false);
        for (int f = 0; f < config.n_subcarriers; ++f) y.at(f, t) = buf[bin_for_subcarrier(f, config)];
    }
    return y;
}

ComplexGrid true_frequency_response(const ChannelRealization& realization, const OfdmConfig& config) {
    const int n_sym = static_cast<int>(realization.tap_gains.size());
    const auto delays = quantized_tap_delays(realization.pdp, config);
    ComplexGrid h(config.n_subcarriers, n_sym);
    for (int t = 0; t < n_sym; ++t) {
        const auto q = combined_taps(realization, delays, t);
        for (int f = 0; f < config.n_subcarriers; ++f) {
            const int bin = bin_for_subcarrier(f, config);
            cplx acc = 0.0;
            for (const auto& [d, g] : q) {
                const double ang = -kTwoPi * bin * d / static_cast<double>(config.fft_size);
                acc += g * cplx(std::cos(ang), std::sin(ang));
            }
            h.at(f, t) = acc;
        }
    }
    return h;
}

}  // namespace celab
