#pragma once

#include <cstdint>

#include "celab/channel.hpp"

namespace celab {

// LS values at the pilot positions, one vector per pilot symbol.
struct PilotObservation {
    PilotPattern pattern;
    std::vector<std::vector<cplx>> h_ls;  // [pilot symbol][pilot subcarrier]
};

// Genie correlation matrices, averaged over the pattern's pilot symbol
// positions. r_hhp maps the P pilot subcarriers to all 72 subcarriers.
struct CorrelationSet {
    std::vector<cplx> r_hhp;   // 72 x P, row-major
    std::vector<cplx> r_hphp;  // P x P, row-major
    int n_subcarriers = 0;
    int n_pilots = 0;
    std::string channel_name;
    int ensemble_size = 0;
};

PilotObservation ls_estimate(const ComplexGrid& y, const ComplexGrid& x, const PilotPattern& pattern);

// Frequency-first linear interpolation at each pilot symbol (clamped beyond
// the first/last pilot subcarrier), then per-subcarrier linear interpolation
// across time between pilot symbols (clamped at the frame edges).
ComplexGrid interpolate_full(const PilotObservation& obs, const OfdmConfig& config);

CorrelationSet estimate_correlations(const PowerDelayProfile& pdp, double max_doppler_hz,
                                     const PilotPattern& pattern, const OfdmConfig& config,
                                     int ensemble_size, std::uint64_t seed);

// Per pilot symbol, H_mmse = R_HHp (R_HpHp + I/snr)^-1 h_ls, then linear time
// interpolation to the full grid.
ComplexGrid mmse_estimate(const PilotObservation& obs, const CorrelationSet& corr,
                          const NoiseConfig& noise, const OfdmConfig& config);

double mse_metric(const ComplexGrid& estimate, const ComplexGrid& truth);

// binary artifact round-trip for reuse across runs
void save_correlations(const CorrelationSet& corr, const std::string& path);
CorrelationSet load_correlations(const std::string& path);

}  // namespace celab
