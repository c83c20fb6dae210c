#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

#include "celab/errors.hpp"

namespace celab {

using cplx = std::complex<double>;

// 3GPP tapped-delay-line profile; powers normalized so linear powers sum to 1.
struct PowerDelayProfile {
    std::string name;
    std::vector<double> tap_delays_s;
    std::vector<double> tap_powers_db;    // as tabulated, before normalization
    std::vector<double> tap_powers_lin;   // normalized to unit total

    std::size_t n_taps() const { return tap_delays_s.size(); }
};

PowerDelayProfile standard_pdp(const std::string& name);
std::vector<std::string> standard_pdp_names();

// Plain-text registry row: name, delays in ns, powers in dB.
std::string pdp_to_text(const PowerDelayProfile& pdp);
PowerDelayProfile pdp_from_text(const std::string& line);

struct OfdmConfig {
    int n_subcarriers = 72;
    int n_symbols = 14;
    int fft_size = 128;
    int cp_length = 16;
    double subcarrier_spacing_hz = 15e3;
    double carrier_frequency_hz = 2.1e9;

    double sample_rate_hz() const { return fft_size * subcarrier_spacing_hz; }
    int samples_per_symbol() const { return fft_size + cp_length; }
    double symbol_duration_s() const { return samples_per_symbol() / sample_rate_hz(); }
};

// Pilot placement: which OFDM symbols carry pilots and which subcarriers
// within each of them. Indices are stored 0-based.
struct PilotPattern {
    std::string name;
    std::vector<int> pilot_symbols;                   // 0-based symbol indices
    std::vector<std::vector<int>> pilot_subcarriers;  // per pilot symbol, 0-based

    int pilots_per_symbol() const { return static_cast<int>(pilot_subcarriers.at(0).size()); }
    int total_pilots() const;
};

PilotPattern pilot_pattern(const std::string& name);  // "default" or "alternate"

// Per-symbol complex tap gains; block-static within each OFDM symbol.
struct ChannelRealization {
    PowerDelayProfile pdp;
    double max_doppler_hz = 0.0;
    // tap_gains[symbol][tap]
    std::vector<std::vector<cplx>> tap_gains;
};

struct ComplexGrid {
    int n_subcarriers = 0;
    int n_symbols = 0;
    std::vector<cplx> values;  // column-major by symbol: values[t * n_subcarriers + f]

    ComplexGrid() = default;
    ComplexGrid(int nf, int nt) : n_subcarriers(nf), n_symbols(nt), values(static_cast<std::size_t>(nf) * nt) {}
    cplx& at(int f, int t) { return values[static_cast<std::size_t>(t) * n_subcarriers + f]; }
    const cplx& at(int f, int t) const { return values[static_cast<std::size_t>(t) * n_subcarriers + f]; }
};

struct NoiseConfig {
    double snr_db = 0.0;
    bool noiseless = false;  // skip noise entirely

    double snr_linear() const;
    double noise_variance() const { return 1.0 / snr_linear(); }  // sigma_X^2 == 1
};

// Jakes sum-of-sinusoids fading, one complex gain per tap per OFDM symbol.
// Deterministic in seed; doppler 0 freezes the gains across symbols.
ChannelRealization generate_channel(const PowerDelayProfile& pdp, double max_doppler_hz,
                                    int n_symbols, const OfdmConfig& config, std::uint64_t seed);

// Unit-power QPSK frame: data symbols filled on all subcarriers, pilot
// symbols nonzero only at pilot subcarriers.
ComplexGrid build_frame(const PilotPattern& pattern, const OfdmConfig& config, std::uint64_t seed);

// Centered subcarrier-to-FFT-bin map, DC bin unused.
int bin_for_subcarrier(int k, const OfdmConfig& config);

std::vector<cplx> ofdm_modulate(const ComplexGrid& x, const OfdmConfig& config);

struct ChannelOutput {
    std::vector<cplx> samples;
    bool cp_violation = false;  // quantized max delay reached the CP length
};

// Tap delays quantized to the sample grid (nearest sample, collisions summed).
std::vector<int> quantized_tap_delays(const PowerDelayProfile& pdp, const OfdmConfig& config);

ChannelOutput apply_channel(const std::vector<cplx>& samples, const ChannelRealization& realization,
                            const OfdmConfig& config);

std::vector<cplx> add_awgn(const std::vector<cplx>& samples, const NoiseConfig& noise,
                           std::uint64_t seed);

ComplexGrid ofdm_demodulate(const std::vector<cplx>& samples, const OfdmConfig& config);

// Ground-truth frequency response on the 72 used bins: per-symbol DFT of the
// quantized tap vector. Training label and MSE reference.
ComplexGrid true_frequency_response(const ChannelRealization& realization, const OfdmConfig& config);

// In-place radix-2 FFT, unitary scaling (1/sqrt(N) each direction).
void fft_unitary(std::vector<cplx>& buf, bool inverse);

}  // namespace celab
