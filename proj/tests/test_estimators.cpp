#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "celab/estimators.hpp"
#include "celab/rng.hpp"

using namespace celab;

namespace {

const OfdmConfig kConfig{};

// noise-free received grid for a known channel
struct LinkSample {
    ComplexGrid x, y, h;
};

LinkSample run_noise_free(const PowerDelayProfile& pdp, const PilotPattern& pattern,
                          double doppler, std::uint64_t seed) {
    LinkSample s;
    auto ch = generate_channel(pdp, doppler, kConfig.n_symbols, kConfig, seed);
    s.x = build_frame(pattern, kConfig, seed + 1);
    auto out = apply_channel(ofdm_modulate(s.x, kConfig), ch, kConfig);
    s.y = ofdm_demodulate(out.samples, kConfig);
    s.h = true_frequency_response(ch, kConfig);
    return s;
}

}  // namespace

TEST_CASE("ls_estimate") {
    auto pattern = pilot_pattern("default");

    SUBCASE("hand example: (2+2j)/(1+1j) = 2") {
        ComplexGrid x(72, 14), y(72, 14);
        for (std::size_t s = 0; s < pattern.pilot_symbols.size(); ++s) {
            for (int f : pattern.pilot_subcarriers[s]) {
                x.at(f, pattern.pilot_symbols[s]) = cplx(1.0, 1.0);
                y.at(f, pattern.pilot_symbols[s]) = cplx(2.0, 2.0);
            }
        }
        auto obs = ls_estimate(y, x, pattern);
        REQUIRE(obs.h_ls.size() == 2);
        for (const auto& col : obs.h_ls) {
            REQUIRE(col.size() == 24);
            for (const auto& v : col) CHECK(std::abs(v - cplx(2.0)) < 1e-15);
        }
    }
    SUBCASE("zero pilot symbol is rejected") {
        ComplexGrid x(72, 14), y(72, 14);
        CHECK_THROWS_AS(ls_estimate(y, x, pattern), NumericalError);
    }
    SUBCASE("noise-free LS recovers the channel at the pilots") {
        for (const auto& pname : {"default", "alternate"}) {
            auto pat = pilot_pattern(pname);
            auto s = run_noise_free(standard_pdp("EVA"), pat, 60.0, 2024);
            auto obs = ls_estimate(s.y, s.x, pat);
            for (std::size_t si = 0; si < pat.pilot_symbols.size(); ++si) {
                const int t = pat.pilot_symbols[si];
                for (std::size_t p = 0; p < obs.h_ls[si].size(); ++p) {
                    const int f = pat.pilot_subcarriers[si][p];
                    CHECK(std::abs(obs.h_ls[si][p] - s.h.at(f, t)) < 1e-9);
                }
            }
        }
    }
}

TEST_CASE("interpolate_full") {
    auto pattern = pilot_pattern("default");

    SUBCASE("constant pilots give a constant grid") {
        PilotObservation obs;
        obs.pattern = pattern;
        obs.h_ls.assign(2, std::vector<cplx>(24, cplx(3.0, -1.0)));
        auto grid = interpolate_full(obs, kConfig);
        for (const auto& v : grid.values) CHECK(std::abs(v - cplx(3.0, -1.0)) < 1e-14);
    }
    SUBCASE("linear field is reproduced exactly in the interior") {
        // h(f, t) = f + 2j*t is linear in both axes
        PilotObservation obs;
        obs.pattern = pattern;
        obs.h_ls.resize(2);
        for (std::size_t s = 0; s < 2; ++s) {
            const int t = pattern.pilot_symbols[s];
            for (int f : pattern.pilot_subcarriers[s]) {
                obs.h_ls[s].push_back(cplx(f, 2.0 * t));
            }
        }
        auto grid = interpolate_full(obs, kConfig);
        // exact where both pilot symbols bracket the subcarrier; the two
        // symbols use offset grids (0,3,... and 1,4,...), so the shared
        // interior is [1, 69]
        for (int t = pattern.pilot_symbols.front(); t <= pattern.pilot_symbols.back(); ++t) {
            for (int f = 1; f <= 69; ++f) {
                CHECK(std::abs(grid.at(f, t) - cplx(f, 2.0 * t)) < 1e-12);
            }
        }
        // clamped beyond the last pilot in both axes: symbol 12's last pilot
        // sits at subcarrier 70
        CHECK(std::abs(grid.at(71, 13) - cplx(70.0, 24.0)) < 1e-12);
    }
    SUBCASE("every value is a convex combination of the pilot values") {
        auto rng = make_rng(55);
        std::uniform_real_distribution<double> uni(-2.0, 2.0);
        PilotObservation obs;
        obs.pattern = pattern;
        obs.h_ls.resize(2);
        double lo = 1e30, hi = -1e30;
        for (auto& col : obs.h_ls) {
            for (int p = 0; p < 24; ++p) {
                double v = uni(rng);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
                col.push_back(cplx(v, 0.0));
            }
        }
        auto grid = interpolate_full(obs, kConfig);
        for (const auto& v : grid.values) {
            CHECK(v.imag() == 0.0);
            CHECK(v.real() >= lo - 1e-12);
            CHECK(v.real() <= hi + 1e-12);
        }
    }
    SUBCASE("a single pilot symbol is rejected") {
        PilotObservation obs;
        obs.pattern = pattern;
        obs.pattern.pilot_symbols = {0};
        obs.pattern.pilot_subcarriers = {pattern.pilot_subcarriers[0]};
        obs.h_ls.assign(1, std::vector<cplx>(24, cplx(1.0)));
        CHECK_THROWS_AS(interpolate_full(obs, kConfig), ParamError);
    }
}

TEST_CASE("correlation estimation") {
    auto pattern = pilot_pattern("default");

    SUBCASE("ensemble floor enforced") {
        CHECK_THROWS_AS(estimate_correlations(standard_pdp("EPA"), 50.0, pattern, kConfig, 99, 1), ParamError);
    }
    SUBCASE("pilot autocorrelation is Hermitian with unit-power diagonal") {
        auto corr = estimate_correlations(standard_pdp("EPA"), 97.0, pattern, kConfig, 1500, 31);
        const int np = corr.n_pilots;
        REQUIRE(np == 24);
        for (int p = 0; p < np; ++p) {
            const cplx diag = corr.r_hphp[static_cast<std::size_t>(p) * np + p];
            CHECK(std::abs(diag.imag()) < 1e-12);
            CHECK(diag.real() == doctest::Approx(1.0).epsilon(0.1));
            for (int q = 0; q < np; ++q) {
                const cplx a = corr.r_hphp[static_cast<std::size_t>(p) * np + q];
                const cplx b = corr.r_hphp[static_cast<std::size_t>(q) * np + p];
                CHECK(std::abs(a - std::conj(b)) < 1e-12);
            }
        }
        // positive semidefinite along random directions
        auto rng = make_rng(77);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<cplx> v(static_cast<std::size_t>(np));
            for (auto& x : v) x = cplx(uni(rng), uni(rng));
            cplx quad = 0.0;
            for (int p = 0; p < np; ++p)
                for (int q = 0; q < np; ++q)
                    quad += std::conj(v[static_cast<std::size_t>(p)]) *
                            corr.r_hphp[static_cast<std::size_t>(p) * np + q] *
                            v[static_cast<std::size_t>(q)];
            CHECK(quad.real() > -1e-10);
            CHECK(std::abs(quad.imag()) < 1e-10);
        }
    }
    SUBCASE("flat channel has all-equal correlation entries") {
        auto flat = pdp_from_text("FLAT delays_ns=0 powers_db=0");
        auto corr = estimate_correlations(flat, 50.0, pattern, kConfig, 1000, 5);
        const cplx first = corr.r_hhp[0];
        CHECK(first.real() == doctest::Approx(1.0).epsilon(0.1));
        for (const auto& v : corr.r_hhp) CHECK(std::abs(v - first) < 1e-9);
        for (const auto& v : corr.r_hphp) CHECK(std::abs(v - first) < 1e-9);
    }
    SUBCASE("deterministic in the seed") {
        auto a = estimate_correlations(standard_pdp("EPA"), 97.0, pattern, kConfig, 300, 9);
        auto b = estimate_correlations(standard_pdp("EPA"), 97.0, pattern, kConfig, 300, 9);
        CHECK(a.r_hhp == b.r_hhp);
        CHECK(a.r_hphp == b.r_hphp);
    }
}

TEST_CASE("mmse_estimate") {
    SUBCASE("scalar case matches the closed form r/(r + 1/snr)") {
        OfdmConfig cfg;
        cfg.n_subcarriers = 1;
        PilotPattern pat;
        pat.name = "single";
        pat.pilot_symbols = {0, 12};
        pat.pilot_subcarriers = {{0}, {0}};
        CorrelationSet corr;
        corr.n_subcarriers = 1;
        corr.n_pilots = 1;
        corr.r_hhp = {cplx(2.0)};
        corr.r_hphp = {cplx(2.0)};
        PilotObservation obs;
        obs.pattern = pat;
        obs.h_ls = {{cplx(1.0, 1.0)}, {cplx(1.0, 1.0)}};
        NoiseConfig noise;
        noise.snr_db = 10.0;  // snr = 10
        auto est = mmse_estimate(obs, corr, noise, cfg);
        const double gain = 2.0 / (2.0 + 0.1);
        for (int t = 0; t < cfg.n_symbols; ++t) {
            CHECK(std::abs(est.at(0, t) - gain * cplx(1.0, 1.0)) < 1e-12);
        }
    }
    SUBCASE("identity correlations pass the observation through unchanged") {
        OfdmConfig cfg;
        cfg.n_subcarriers = 2;
        PilotPattern pat;
        pat.name = "full2";
        pat.pilot_symbols = {0, 13};
        pat.pilot_subcarriers = {{0, 1}, {0, 1}};
        CorrelationSet corr;
        corr.n_subcarriers = 2;
        corr.n_pilots = 2;
        corr.r_hhp = {cplx(1.0), cplx(0.0), cplx(0.0), cplx(1.0)};
        corr.r_hphp = corr.r_hhp;
        PilotObservation obs;
        obs.pattern = pat;
        obs.h_ls = {{cplx(0.3, -0.2), cplx(1.5, 0.4)}, {cplx(-1.0, 0.0), cplx(0.0, 2.0)}};
        NoiseConfig noiseless;
        noiseless.noiseless = true;
        auto est = mmse_estimate(obs, corr, noiseless, cfg);
        CHECK(std::abs(est.at(0, 0) - obs.h_ls[0][0]) < 1e-12);
        CHECK(std::abs(est.at(1, 0) - obs.h_ls[0][1]) < 1e-12);
        CHECK(std::abs(est.at(0, 13) - obs.h_ls[1][0]) < 1e-12);
        CHECK(std::abs(est.at(1, 13) - obs.h_ls[1][1]) < 1e-12);
    }
    SUBCASE("linear in the observation") {
        auto pattern = pilot_pattern("default");
        auto corr = estimate_correlations(standard_pdp("EPA"), 97.0, pattern, kConfig, 400, 13);
        NoiseConfig noise;
        noise.snr_db = 5.0;
        auto rng = make_rng(21);
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        auto random_obs = [&]() {
            PilotObservation o;
            o.pattern = pattern;
            o.h_ls.resize(2);
            for (auto& col : o.h_ls)
                for (int p = 0; p < 24; ++p) col.push_back(cplx(uni(rng), uni(rng)));
            return o;
        };
        auto o1 = random_obs();
        auto o2 = random_obs();
        const cplx alpha(0.7, -0.3);
        PilotObservation combo;
        combo.pattern = pattern;
        combo.h_ls.resize(2);
        for (std::size_t s = 0; s < 2; ++s)
            for (int p = 0; p < 24; ++p)
                combo.h_ls[s].push_back(alpha * o1.h_ls[s][p] + o2.h_ls[s][p]);
        auto e1 = mmse_estimate(o1, corr, noise, kConfig);
        auto e2 = mmse_estimate(o2, corr, noise, kConfig);
        auto ec = mmse_estimate(combo, corr, noise, kConfig);
        for (std::size_t i = 0; i < ec.values.size(); ++i) {
            CHECK(std::abs(ec.values[i] - (alpha * e1.values[i] + e2.values[i])) < 1e-10);
        }
    }
    SUBCASE("pilot count mismatch is rejected") {
        auto corr = CorrelationSet{};
        corr.n_subcarriers = 72;
        corr.n_pilots = 12;
        PilotObservation obs;
        obs.pattern = pilot_pattern("default");
        CHECK_THROWS_AS(mmse_estimate(obs, corr, NoiseConfig{}, kConfig), ShapeError);
    }
    SUBCASE("beats plain interpolation on noisy frames") {
        auto pattern = pilot_pattern("default");
        auto pdp = standard_pdp("EPA");
        auto corr = estimate_correlations(pdp, 97.0, pattern, kConfig, 2000, 42);
        NoiseConfig noise;
        noise.snr_db = 5.0;
        double mse_interp = 0.0, mse_mmse = 0.0;
        const int n_frames = 40;
        for (int m = 0; m < n_frames; ++m) {
            const std::uint64_t seed = derive_seed(7, 3, static_cast<std::uint64_t>(m));
            auto ch = generate_channel(pdp, 60.0, kConfig.n_symbols, kConfig, seed);
            auto x = build_frame(pattern, kConfig, seed + 1);
            auto out = apply_channel(ofdm_modulate(x, kConfig), ch, kConfig);
            auto y = ofdm_demodulate(add_awgn(out.samples, noise, seed + 2), kConfig);
            auto h = true_frequency_response(ch, kConfig);
            auto obs = ls_estimate(y, x, pattern);
            mse_interp += mse_metric(interpolate_full(obs, kConfig), h);
            mse_mmse += mse_metric(mmse_estimate(obs, corr, noise, kConfig), h);
        }
        CHECK(mse_mmse < mse_interp);
    }
}

TEST_CASE("mse_metric") {
    ComplexGrid a(2, 1), b(2, 1);
    a.at(0, 0) = cplx(1.0, 1.0);
    a.at(1, 0) = cplx(2.0, 0.0);
    b.at(1, 0) = cplx(1.0, 1.0);
    // |1+1j|^2 = 2, |1-1j|^2 = 2, mean = 2
    CHECK(mse_metric(a, b) == doctest::Approx(2.0));
    CHECK(mse_metric(a, a) == 0.0);
    CHECK_THROWS_AS(mse_metric(a, ComplexGrid(3, 1)), ShapeError);
}

TEST_CASE("correlation file round-trip") {
    auto pattern = pilot_pattern("alternate");
    auto corr = estimate_correlations(standard_pdp("ETU"), 97.0, pattern, kConfig, 200, 3);
    const std::string path = "corr_rt.bin";
    save_correlations(corr, path);
    auto back = load_correlations(path);
    CHECK(back.n_subcarriers == corr.n_subcarriers);
    CHECK(back.n_pilots == corr.n_pilots);
    CHECK(back.ensemble_size == corr.ensemble_size);
    CHECK(back.channel_name == "ETU");
    CHECK(back.r_hhp == corr.r_hhp);
    CHECK(back.r_hphp == corr.r_hphp);

    CHECK_THROWS_AS(load_correlations("does_not_exist.bin"), ArtifactError);
    std::FILE* f = std::fopen("not_corr.bin", "wb");
    std::fputs("plainly not the right format", f);
    std::fclose(f);
    CHECK_THROWS_AS(load_correlations("not_corr.bin"), ArtifactError);
    std::remove(path.c_str());
    std::remove("not_corr.bin");
}
