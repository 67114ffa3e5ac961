#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <thread>

#include "xcorr/errors.hpp"
#include "xcorr/simulate.hpp"

using namespace xcorr;
using std::numbers::pi;

namespace {

struct Sample {
    double mean = 0, se = 0;
};

Sample mean_se(const std::vector<double>& v) {
    double m = 0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s = 0;
    for (double x : v) s += (x - m) * (x - m);
    return {m, std::sqrt(s / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()))};
}

void expect_within_4se(const std::vector<double>& draws, double target, const std::string& what) {
    const auto s = mean_se(draws);
    EXPECT_LE(std::abs(s.mean - target), 4 * s.se) << what << ": mean " << s.mean << " target " << target << " se " << s.se;
}

template <typename F>
long double simpson(F f, long double a, long double b, int n) {
    if (n % 2) ++n;
    const long double h = (b - a) / n;
    long double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0L : 2.0L) * f(a + k * h);
    return s * h / 3;
}

SpectralModel gauss(double c, double d) { return {SpectralFamily::GaussBell, c, d}; }

}  // namespace

TEST(Grid, Construction) {
    auto g = make_grid(-1.0, 1.0, 0.25);
    EXPECT_EQ(g.n_points, 9u);
    EXPECT_NEAR((g.n_points - 1) * g.h, 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(g.t_max(), 1.0);
    EXPECT_THROW(make_grid(0.0, 1.0, 0.3), ConfigError);
    EXPECT_THROW(make_grid(0.0, 1.0, -0.1), ConfigError);
}

TEST(Step, AliasingRule) {
    // Gaussian aliasing 2 exp(-(2 pi/h)^2 / delta) must stay below 1e-4
    for (double D : {4.0, 1e4, 1.6e5}) {
        const double h = default_step(gauss(1, D));
        EXPECT_LE(h, 0.05);
        EXPECT_EQ(std::exp2(std::round(std::log2(h))), h);
        EXPECT_LE(2 * std::exp(-std::pow(2 * pi / h, 2) / D), 1e-4);
        if (h < 1.0 / 32) EXPECT_GT(2 * std::exp(-std::pow(pi / h, 2) / D), 1e-4) << D;
    }
    // band-limited input: any step inside the Nyquist limit is exact
    const double h = default_step({SpectralFamily::Triangular, 1.0, 1e4});
    EXPECT_LT(h, pi / 100);
}

TEST(Truncation, TailMatchesSineIntegral) {
    // ||H 1_{|s|>R}||^2 for LowPass(1) = (1/pi^2)[1/R - cos(2R)/R + 2(pi/2 - Si(2R))]
    for (double R : {4.0, 16.0, 40.0}) {
        const long double si = simpson([](long double t) { return t == 0 ? 1.0L : std::sin(t) / t; }, 0.0L, 2 * R, 40000);
        const long double tail2 = (1 / R - std::cos(2 * R) / R + 2 * (pi / 2 - si)) / (pi * pi);
        EXPECT_NEAR(truncation_tail(low_pass(1.0), R), std::sqrt(static_cast<double>(tail2)), 1e-8) << R;
    }
}

TEST(Truncation, SmallestRadiusAndCap) {
    const auto t = default_truncation(low_pass(1.0), 1e4, 0.05);
    EXPECT_FALSE(t.capped);
    const double target = 0.05 * std::sqrt(1 / pi);
    EXPECT_LE(truncation_tail(low_pass(1.0), t.radius), target);
    EXPECT_GT(truncation_tail(low_pass(1.0), 0.99 * t.radius), target);
    const auto capped = default_truncation(power_tail(0.6), 64.0);
    EXPECT_TRUE(capped.capped);
    EXPECT_EQ(capped.radius, 64.0);
    EXPECT_GT(capped.rel_tail, 1e-3);
    EXPECT_EQ(default_truncation(zero_response()).radius, 0.0);
}

TEST(Synthesis, GaussBellVarianceAndLagOne) {
    const auto m = gauss(1, 4);
    const auto g = make_grid(0, 2, 1.0 / 32);
    CirculantSynth synth([&](double t) { return eval_K(m, t); }, g);
    EXPECT_LE(synth.clipped_mass(), 1e-12);
    std::vector<double> sq, lag1;
    for (int r = 0; r < 2000; ++r) {
        const auto p = synth.sample({7, static_cast<std::uint64_t>(r), "input"});
        sq.push_back(p.values[20] * p.values[20]);
        lag1.push_back(p.values[20] * p.values[21]);
    }
    expect_within_4se(sq, 1 / std::sqrt(pi), "variance");
    expect_within_4se(lag1, eval_K(m, g.h), "lag-h covariance");
}

TEST(Synthesis, ExactCovarianceEveryFamily) {
    for (auto fam : {SpectralFamily::GaussBell, SpectralFamily::CauchySpectrum, SpectralFamily::LaplaceSpectrum,
                     SpectralFamily::Triangular}) {
        const SpectralModel m{fam, 1.5, 4.0};
        const double h = default_step(m);
        // slowly decaying covariances need room on the circle; 1024 steps suffice for all four
        CirculantSynth synth([&](double t) { return eval_K(m, t); }, make_grid(0, 1024 * h, h));
        std::vector<std::vector<double>> prod(33);
        for (int r = 0; r < 2000; ++r) {
            const auto p = synth.sample({11, static_cast<std::uint64_t>(r), "input"});
            for (int k = 0; k <= 32; ++k) prod[k].push_back(p.values[5] * p.values[5 + k]);
        }
        for (int k = 0; k <= 32; ++k)
            expect_within_4se(prod[k], eval_K(m, k * h), "family " + std::to_string(static_cast<int>(fam)) + " lag " + std::to_string(k));
    }
}

TEST(Synthesis, NoiseFamiliesEmbed) {
    for (auto fam : {NoiseFamily::ExpAbs, NoiseFamily::GaussBell, NoiseFamily::Fejer, NoiseFamily::Cauchy}) {
        const NoiseModel n{fam, 1.0};
        const auto g = make_grid(0, 50, 1.0 / 32);
        CirculantSynth synth([&](double t) { return eval_noise_K(n, t); }, g);
        EXPECT_LE(synth.clipped_mass(), 1e-6);
        std::vector<double> sq;
        for (int r = 0; r < 1000; ++r) {
            const auto p = synth.sample({3, static_cast<std::uint64_t>(r), "noise"});
            sq.push_back(p.values[100] * p.values[100]);
        }
        expect_within_4se(sq, noise_l1_norm(n), "noise variance");
    }
}

TEST(Synthesis, SincCovarianceCannotBeEmbedded) {
    // 2 sin(t)/t: Gibbs dips of the truncated sequence keep the clipped mass above 1e-6 after six doublings
    const NoiseModel band{NoiseFamily::BandIndicator, 1.0};
    EXPECT_THROW(CirculantSynth([&](double t) { return eval_noise_K(band, t); }, make_grid(0, 50, 1.0 / 32)),
                 EmbeddingFailure);
}

TEST(Synthesis, StreamsAreIndependent) {
    const auto m = gauss(1, 4);
    const auto g = make_grid(0, 1, 1.0 / 32);
    CirculantSynth synth([&](double t) { return eval_K(m, t); }, g);
    std::vector<double> cross;
    for (int r = 0; r < 2000; ++r) {
        const auto a = synth.sample({5, static_cast<std::uint64_t>(r), "input"});
        const auto b = synth.sample({5, static_cast<std::uint64_t>(r), "noise"});
        cross.push_back(a.values[10] * b.values[10]);
    }
    expect_within_4se(cross, 0.0, "cross-correlation");
}

TEST(Synthesis, DeterministicAcrossThreads) {
    const auto m = gauss(1, 4);
    const auto g = make_grid(0, 20, 1.0 / 32);
    CirculantSynth synth([&](double t) { return eval_K(m, t); }, g);
    std::vector<std::vector<double>> seq(8), par(8);
    for (int r = 0; r < 8; ++r) seq[r] = synth.sample({99, static_cast<std::uint64_t>(r), "input"}).values;
    std::vector<std::thread> pool;
    for (int w = 0; w < 4; ++w)
        pool.emplace_back([&, w] {
            for (int r = w; r < 8; r += 4) par[r] = synth.sample({99, static_cast<std::uint64_t>(r), "input"}).values;
        });
    for (auto& t : pool) t.join();
    EXPECT_EQ(seq, par);
    EXPECT_NE(seq[0], seq[1]);
}

TEST(Synthesis, GaussianMarginalsAndStationarity) {
    const auto m = gauss(1, 4);
    const auto g = make_grid(0, 10, 1.0 / 32);
    CirculantSynth synth([&](double t) { return eval_K(m, t); }, g);
    const int R = 4000;
    std::vector<double> v, diff;
    const std::size_t mid = (g.n_points - 1) / 2;
    for (int r = 0; r < R; ++r) {
        const auto p = synth.sample({21, static_cast<std::uint64_t>(r), "input"});
        v.push_back(p.values[40]);
        diff.push_back(p.values[0] * p.values[0] - p.values[mid] * p.values[mid]);
    }
    const double s2 = 1 / std::sqrt(pi);
    double m3 = 0, m4 = 0;
    for (double x : v) {
        m3 += std::pow(x, 3);
        m4 += std::pow(x, 4);
    }
    const double skew = m3 / R / std::pow(s2, 1.5);
    const double kurt = m4 / R / (s2 * s2) - 3;
    EXPECT_LE(std::abs(skew), 4 * std::sqrt(6.0 / R));
    EXPECT_LE(std::abs(kurt), 4 * std::sqrt(24.0 / R));
    expect_within_4se(diff, 0.0, "variance at 0 vs T/2");
}

TEST(Response, FrequencyDomainMatchesLinearConvolution) {
    const auto m = gauss(1, 100);
    const double h = default_step(m);
    const auto out = make_grid(0, 5, h);
    for (const auto& tf : {low_pass(1.0), power_tail(0.7), odd_cauchy()}) {
        SystemSimulator sim(tf, m, {}, out, 4.0);
        const auto d = sim.draw(1, 0);
        const auto y = system_response(tf, d.x, nullptr, 4.0, out);
        ASSERT_EQ(y.values.size(), d.y.values.size());
        for (std::size_t i = 0; i < y.values.size(); ++i) EXPECT_NEAR(y.values[i], d.y.values[i], 1e-10);
    }
}

TEST(Response, VarianceMatchesResponseSpectrum) {
    const auto m = gauss(1, 100);
    const double h = default_step(m);
    const auto out = make_grid(0, 1, h);
    const NoiseModel noise{NoiseFamily::ExpAbs, 1.0};
    SystemSimulator clean(low_pass(1.0), m, {}, out, 32.0);
    SystemSimulator noisy(low_pass(1.0), m, noise, out, 32.0);
    std::vector<double> v0, v1;
    for (int r = 0; r < 2000; ++r) {
        v0.push_back(std::pow(clean.draw(4, r).y.values[10], 2));
        v1.push_back(std::pow(noisy.draw(4, r).y.values[10], 2));
    }
    // int |H*|^2 f = int_{-1}^{1} f
    const double body = static_cast<double>(simpson([&](long double l) { return eval_f(m, static_cast<double>(l)); }, -1.0L, 1.0L, 2000));
    expect_within_4se(v0, body, "clean response variance");
    expect_within_4se(v1, body + noise_l1_norm(noise), "noisy response variance");
}

TEST(Response, ZeroSystemPassesNoiseThrough) {
    const auto m = gauss(1, 4);
    const NoiseModel noise{NoiseFamily::ExpAbs, 1.0};
    const auto g = make_grid(-2, 6, 1.0 / 32);
    const auto x = synth_stationary_gaussian(m, g, {1, 0, "input"});
    const auto out = make_grid(0, 4, 1.0 / 32);
    const auto u = synth_stationary_gaussian(noise, out, {1, 0, "noise"});
    const auto y = system_response(zero_response(), x, &u, 1.0, out);
    EXPECT_EQ(y.values, u.values);
    SystemSimulator sim(zero_response(), m, noise, out, 1.0);
    const auto d = sim.draw(1, 0);
    CirculantSynth us([&](double t) { return eval_noise_K(noise, t); }, out);
    EXPECT_EQ(d.y.values, us.sample({1, 0, "noise"}).values);
}

TEST(Response, WindowErrors) {
    const auto m = gauss(1, 4);
    const auto x = synth_stationary_gaussian(m, make_grid(0, 4, 1.0 / 32), {1, 0, "input"});
    EXPECT_THROW(system_response(low_pass(1.0), x, nullptr, 1.0, make_grid(0, 3, 1.0 / 32)), InsufficientWindow);
    EXPECT_THROW(system_response(low_pass(1.0), x, nullptr, 3.0), InsufficientWindow);
    EXPECT_NO_THROW(system_response(low_pass(1.0), x, nullptr, 1.0, make_grid(1, 3, 1.0 / 32)));
    // half-line kernels need no right margin
    EXPECT_NO_THROW(system_response(power_tail(0.7), x, nullptr, 1.0, make_grid(1, 4, 1.0 / 32)));
}

TEST(Response, SquaredDriveIsSkewed) {
    const auto m = gauss(1, 4);
    const auto out = make_grid(0, 2, 1.0 / 32);
    SystemSimulator sim(low_pass(1.0), m, {}, out, 2.0, Drive::Squared);
    std::vector<double> sq, cube;
    for (int r = 0; r < 2000; ++r) {
        const auto d = sim.draw(8, r);
        const double x = d.x.values[70];
        sq.push_back(x * x);
        cube.push_back(x * x * x);
    }
    expect_within_4se(sq, eval_K(m, 0.0), "squared-drive variance");
    EXPECT_GT(mean_se(cube).mean, 4 * mean_se(cube).se);
}
