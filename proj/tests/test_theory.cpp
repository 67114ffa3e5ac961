#include <gtest/gtest.h>

#include <chrono>
#include <cmath>
#include <numbers>

#include "xcorr/errors.hpp"
#include "xcorr/theory.hpp"

using namespace xcorr;
using std::numbers::pi;

namespace {

template <typename F>
long double simpson(F f, long double a, long double b, int n) {
    if (n % 2) ++n;
    const long double h = (b - a) / n;
    long double s = f(a) + f(b);
    for (int k = 1; k < n; ++k) s += (k % 2 ? 4.0L : 2.0L) * f(a + k * h);
    return s * h / 3;
}

long double sine_integral(long double x) {
    return simpson([](long double t) { return t == 0 ? 1.0L : std::sin(t) / t; }, 0.0L, x,
                   std::max(2000, static_cast<int>(400 * x)));
}

SpectralModel gauss(double c, double delta) {
    return SpectralModel{SpectralFamily::GaussBell, c, delta};
}

NoiseModel exp_abs(double mu) { return NoiseModel{NoiseFamily::ExpAbs, mu}; }

// Time-domain form of the finite-T covariance:
// (1/c^2) int_{-T}^{T} (1 - |t|/T) [K_X(t) K_Y(t + d) + G(tau1 - t) G(tau2 + t)] dt,
// with G(x) = int e^{ix l} H*(l) f(l) dl and K_Y the response autocovariance.
struct TimeDomainOracle {
    std::function<long double(long double)> KX, KY, G;
    double c;

    long double operator()(double T, double tau1, double tau2, double reach) const {
        const double d = tau1 - tau2;
        const long double lim = std::min<long double>(T, reach);
        auto w = [&](long double t) {
            return (1 - std::abs(t) / T) * (KX(t) * KY(t + d) + G(tau1 - t) * G(tau2 + t));
        };
        return simpson(w, -lim, lim, 3000) / (c * c);
    }
};

TimeDomainOracle low_pass_oracle(const SpectralModel& m, std::optional<NoiseModel> noise) {
    auto f = [m](long double l) { return static_cast<long double>(eval_f(m, static_cast<double>(l))); };
    TimeDomainOracle o;
    o.c = m.c;
    o.KX = [m](long double t) { return static_cast<long double>(eval_K(m, static_cast<double>(t))); };
    o.G = [f](long double x) {
        return simpson([&](long double l) { return std::cos(x * l) * f(l); }, -1.0L, 1.0L, 400);
    };
    o.KY = [f, noise](long double x) {
        long double v = simpson([&](long double l) { return std::cos(x * l) * f(l); }, -1.0L, 1.0L, 400);
        if (noise) v += 2 * noise->mu / (noise->mu * noise->mu + x * x);  // exp(-mu|l|) transform
        return v;
    };
    return o;
}

// f is negligible beyond |l| = 14 for the Gaussian models used here
TimeDomainOracle odd_cauchy_oracle(const SpectralModel& m) {
    auto f = [m](long double l) { return static_cast<long double>(eval_f(m, static_cast<double>(l))); };
    TimeDomainOracle o;
    o.c = m.c;
    o.KX = [m](long double t) { return static_cast<long double>(eval_K(m, static_cast<double>(t))); };
    o.G = [f](long double x) {
        return 2 * pi * simpson([&](long double l) { return std::sin(x * l) * std::exp(-l) * f(l); }, 0.0L, 14.0L, 2000);
    };
    o.KY = [f](long double x) {
        return 2 * pi * pi * simpson([&](long double l) { return std::cos(x * l) * std::exp(-2 * l) * f(l); }, 0.0L, 14.0L, 2000);
    };
    return o;
}

double low_pass_limit(double mu, double t1, double t2) {
    auto part = [mu](double w) { return w == 0 ? mu : std::sin(w * mu) / w; };
    return (part(t1 - t2) + part(t1 + t2)) / pi;
}

// int H(t) H(t + d) dt + int H(t) H(s - t) dt for H(t) = (1 + t)^-gamma on t >= 0
double power_tail_limit(double g, double t1, double t2) {
    const long double d = std::abs(t1 - t2), s = t1 + t2;
    const long double p = 1 / (2 * static_cast<long double>(g) - 1);
    // x = 1/(1+t) = v^p flattens the algebraic tail
    long double auto_part =
        p * simpson([&](long double v) { return std::pow(1 + d * std::pow(v, p), -static_cast<long double>(g)); }, 0.0L, 1.0L, 4000);
    long double conv = 0;
    if (s > 0)
        conv = simpson([&](long double t) { return std::pow((1 + t) * (1 + s - t), -static_cast<long double>(g)); }, 0.0L, s, 4000);
    return static_cast<double>(auto_part + conv);
}

}  // namespace

TEST(Fejer, KernelExamples) {
    EXPECT_NEAR(fejer_kernel(2 * pi, 0.0), 1.0, 1e-15);
    EXPECT_NEAR(fejer_kernel(1.0, 2 * pi), 0.0, 1e-15);
    const double direct = std::pow(std::sin(0.5) / 0.05, 2) / (20 * pi);
    EXPECT_NEAR(fejer_kernel(10.0, 0.1), direct, 1e-14);
    EXPECT_NEAR(fejer_kernel(10.0, 0.1), 1.463263, 1e-6);
    // (1/2pi) int_{-T}^{T} e^{it l}(1 - |t|/T) dt
    const long double tri = simpson([](long double t) { return std::cos(0.1L * t) * (1 - std::abs(t) / 10); }, -10.0L, 10.0L, 4000);
    EXPECT_NEAR(fejer_kernel(10.0, 0.1), static_cast<double>(tri / (2 * pi)), 1e-10);
}

TEST(Fejer, UnitMassAndShrinkingTail) {
    double prev = kInf;
    for (double T : {1.0, 10.0, 1e3}) {
        const double tail = fejer_tail_mass(T);
        // int_{-1}^{1} Phi_T = (2/pi) Si(T) - 4 sin^2(T/2) / (pi T)
        const double body = static_cast<double>(2 / pi * sine_integral(T) - 4 * std::pow(std::sin(T / 2), 2) / (pi * T));
        EXPECT_NEAR(body + tail, 1.0, 1e-6) << T;
        const long double body_q = simpson([T](long double l) { return static_cast<long double>(fejer_kernel(T, static_cast<double>(l))); }, -1.0L, 1.0L, 200000);
        EXPECT_NEAR(static_cast<double>(body_q) + tail, 1.0, 1e-6) << T;
        EXPECT_LE(tail, 4 / (pi * T));
        EXPECT_LT(tail, prev);
        prev = tail;
    }
}

TEST(LimitCovariance, AnalyticExamples) {
    for (double mu : {1.0, 2.5}) EXPECT_NEAR(limit_covariance(low_pass(mu), {}, 0, 0).value, 2 * mu / pi, 1e-6);
    EXPECT_NEAR(limit_covariance(odd_cauchy(), {}, 1, 1).value, pi / 4, 1e-6);
    for (double t : {0.3, 2.0, 5.0})
        EXPECT_NEAR(limit_covariance(odd_cauchy(), {}, t, t).value, pi * t * t / (2 * (1 + t * t)), 1e-6) << t;
    EXPECT_NEAR(limit_covariance(odd_cauchy(), {}, 0, 0).value, 0.0, 1e-10);
    for (auto [a, b] : {std::pair{0.0, 0.5}, {0.5, 1.0}, {-1.0, 2.0}, {3.0, 3.0}})
        EXPECT_NEAR(limit_covariance(low_pass(1.5), {}, a, b).value, low_pass_limit(1.5, a, b), 1e-9);
}

TEST(LimitCovariance, ReducedFormMatchesGeneral) {
    const std::vector<TransferFunction> cases{odd_cauchy(), one_minus_cos(1.3), low_pass(1.0), band_pass(1.0, 3.0),
                                              multi_band_default()};
    for (const auto& tf : cases)
        for (auto [a, b] : {std::pair{0.0, 0.0}, {0.25, 1.0}, {1.0, 1.0}, {-0.7, 2.3}})
            EXPECT_NEAR(limit_covariance(tf, {}, a, b).value, limit_covariance_reduced(tf, {}, a, b).value, 1e-8)
                << to_string(tf.kind) << " " << a << " " << b;
    EXPECT_THROW(limit_covariance_reduced(power_tail(0.7), {}, 0, 1), ConfigError);
}

TEST(LimitCovariance, PowerTailTimeDomain) {
    for (double g : {0.6, 0.8})
        for (auto [a, b] : {std::pair{0.0, 0.0}, {0.5, 1.0}, {2.0, 0.3}, {1.5, 1.5}})
            EXPECT_NEAR(limit_covariance(power_tail(g), {}, a, b).value, power_tail_limit(g, a, b), 2e-6)
                << g << " " << a << " " << b;
}

TEST(LimitCovariance, SingularKindsSymmetricAndPsd) {
    const std::vector<double> grid{0.0, 0.5, 1.0, 1.5, 2.0};
    for (const auto& tf : {power_tail(0.7), resonant_cos(2.0, 0.7), resonant_sin(2.0, 0.7)}) {
        auto s = limit_surface(tf, {}, grid);
        EXPECT_TRUE(s.converged) << to_string(tf.kind);
        EXPECT_GE(min_eigenvalue(s), -1e-8) << to_string(tf.kind);
    }
}

TEST(LimitCovariance, NoiseShiftsDiagonal) {
    for (double c : {1.0, 2.0}) {
        const ScaledNoise n{exp_abs(1.0), c};
        for (const auto& tf : {low_pass(1.0), power_tail(0.7)})
            for (double t : {0.0, 0.8}) {
                const double shift = limit_covariance(tf, n, t, t).value - limit_covariance(tf, {}, t, t).value;
                EXPECT_NEAR(shift, 2.0 / c, 1e-9);
            }
        EXPECT_NEAR(limit_covariance_reduced(low_pass(1.0), n, 0.3, 0.3).value - low_pass_limit(1.0, 0.3, 0.3),
                    2.0 / c, 1e-9);
    }
}

TEST(FiniteTCovariance, MatchesTimeDomain) {
    const auto m = gauss(1.0, 4.0);
    const auto oracle = low_pass_oracle(m, {});
    for (auto [a, b] : {std::pair{0.0, 0.0}, {0.5, 1.0}, {1.0, -0.3}}) {
        auto r = finiteT_covariance(low_pass(1.0), m, {}, 10.0, a, b);
        EXPECT_TRUE(r.converged);
        EXPECT_NEAR(r.value, static_cast<double>(oracle(10.0, a, b, 12.0)), 1e-7) << a << " " << b;
    }
}

TEST(FiniteTCovariance, MatchesTimeDomainWithNoise) {
    const auto m = gauss(2.0, 9.0);
    const auto n = exp_abs(1.5);
    const auto oracle = low_pass_oracle(m, n);
    for (auto [a, b] : {std::pair{0.0, 0.0}, {0.4, 1.1}}) {
        auto r = finiteT_covariance(low_pass(1.0), m, n, 8.0, a, b);
        EXPECT_NEAR(r.value, static_cast<double>(oracle(8.0, a, b, 10.0)), 1e-7) << a << " " << b;
    }
}

TEST(FiniteTCovariance, OddCauchyMatchesTimeDomain) {
    const auto m = gauss(1.0, 4.0);
    const auto oracle = odd_cauchy_oracle(m);
    for (auto [a, b] : {std::pair{1.0, 1.0}, {0.5, 2.0}}) {
        auto r = finiteT_covariance(odd_cauchy(), m, {}, 10.0, a, b);
        EXPECT_NEAR(r.value, static_cast<double>(oracle(10.0, a, b, 12.0)), 1e-7) << a << " " << b;
    }
}

TEST(FiniteTCovariance, CloseToLimitAtLargeT) {
    auto r = finiteT_covariance(low_pass(1.0), gauss(1.0, 1e4), {}, 200.0, 0, 0);
    EXPECT_NEAR(r.value, 2 / pi, 0.02 * 2 / pi);
}

TEST(FiniteTCovariance, LadderApproachesLimit) {
    const std::vector<std::pair<double, double>> ladder{{50, 1e2}, {100, 1e3}, {200, 1e4}};
    for (double a : {0.0, 0.5, 1.0})
        for (double b : {0.0, 0.5, 1.0}) {
            const double lim = low_pass_limit(1.0, a, b);
            double prev = kInf;
            for (auto [T, D] : ladder) {
                const double gap = std::abs(finiteT_covariance(low_pass(1.0), gauss(1.0, D), {}, T, a, b).value - lim);
                EXPECT_LT(gap, prev) << a << " " << b << " T=" << T;
                prev = gap;
            }
        }
}

TEST(FiniteTCovariance, SymmetricAndBounded) {
    const auto m = gauss(1.0, 25.0);
    for (const auto& tf : {low_pass(1.0), odd_cauchy(), band_pass(1.0, 3.0)})
        for (auto noise : {std::optional<NoiseModel>{}, std::optional<NoiseModel>{exp_abs(1.0)}}) {
            const double ub = uniform_bound(tf, m, noise);
            for (auto [a, b] : {std::pair{0.2, 0.9}, {-0.5, 1.5}}) {
                const double ab = finiteT_covariance(tf, m, noise, 20.0, a, b).value;
                const double ba = finiteT_covariance(tf, m, noise, 20.0, b, a).value;
                EXPECT_NEAR(ab, ba, 1e-10);
                EXPECT_LE(std::abs(ab), ub);
                const double diag = finiteT_covariance(tf, m, noise, 20.0, a, a).value;
                EXPECT_GE(diag, -1e-10);
                EXPECT_LE(diag, ub);
            }
        }
}

TEST(FiniteTCovariance, PowerTailBounded) {
    const auto m = gauss(1.0, 25.0);
    const auto tf = power_tail(0.7);
    auto r = finiteT_covariance(tf, m, {}, 20.0, 0.5, 0.5);
    EXPECT_GE(r.value, -1e-10);
    EXPECT_LE(r.value, uniform_bound(tf, m, {}));
}

TEST(Bias, GaussBellHasNoFlatnessTerm) {
    const auto m = gauss(1.7, 50.0);
    const auto tf = low_pass(1.0);
    const std::vector<double> grid{0.0, 0.5, 1.3};
    auto b = bias_curve(tf, m, grid);
    for (std::size_t i = 0; i < grid.size(); ++i)
        EXPECT_NEAR(b.values[i], expected_estimate(tf, m, grid[i]).value - eval_H(tf, grid[i]), 1e-10);
}

TEST(Bias, ExpectationIsSmoothedResponse) {
    // (1/c) int K(s) H(tau - s) ds = (1/c) int_{-1}^{1} cos(tau l) f(l) dl for LowPass(1)
    const auto m = gauss(1.0, 9.0);
    for (double tau : {0.0, 0.5, 2.0}) {
        const long double oracle = simpson([&](long double l) { return std::cos(tau * l) * eval_f(m, static_cast<double>(l)); }, -1.0L, 1.0L, 2000);
        EXPECT_NEAR(expected_estimate(low_pass(1.0), m, tau).value, static_cast<double>(oracle), 1e-9) << tau;
    }
}

TEST(Bias, ShrinksWithDelta) {
    double prev = kInf;
    for (double D : {1e2, 1e3, 1e4}) {
        const double v = std::abs(bias_curve(low_pass(1.0), gauss(1.0, D), {0.5}).values[0]);
        EXPECT_LT(v, prev) << D;
        prev = v;
    }
}

TEST(Bias, SqrtTScaling) {
    const auto m = gauss(1.0, 100.0);
    const std::vector<double> grid{0.1, 0.9};
    auto plain = bias_curve(one_minus_cos(1.0), m, grid);
    auto scaled = bias_curve(one_minus_cos(1.0), m, grid, 64.0);
    ASSERT_TRUE(scaled.sqrtT_scale.has_value());
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_NEAR(scaled.values[i], 8 * plain.values[i], 1e-12);
}

TEST(Bias, LocallyConstantBound) {
    // PowerTail vanishes on [-2, 0]; tau = -1, delta = 1
    const double c = 1.0, D = 4.0, g = 0.7;
    const auto m = gauss(c, D);
    const double v = bias_curve(power_tail(g), m, {-1.0}).values[0];
    const double a = std::sqrt(D);
    // K = (c/2)(a/sqrt pi) exp(-D t^2 / 4)
    const double k_tail = c / 2 * std::erfc(a / 2);
    const double k2_tail = c * c * a / (4 * std::sqrt(2 * pi)) * std::erfc(a / std::sqrt(2.0));
    const double bound = 2 / c * std::sqrt(1 / (2 * g - 1)) * std::sqrt(k2_tail) + 2 / c * k_tail;
    EXPECT_LE(std::abs(v), bound);
    EXPECT_GT(std::abs(v), 0.0);
}

TEST(UniformBound, Examples) {
    EXPECT_NEAR(uniform_bound(low_pass(1.0), gauss(1.0, 1e4), {}), 2 / pi, 1e-9);
    EXPECT_NEAR(uniform_bound(low_pass(1.0), gauss(1.0, 1e4), exp_abs(1.0)), 2 / pi + 2, 1e-9);
    EXPECT_NEAR(uniform_bound(low_pass(2.0), gauss(2.0, 10.0), {}), 2 * 4 / (pi * 2), 1e-9);
}

TEST(PseudometricBound, Examples) {
    const auto m = gauss(1.0, 100.0);
    auto same = pseudometric_bound_check(low_pass(1.0), m, {}, 50.0, 0.3, 0.3);
    EXPECT_EQ(same.rho, 0.0);
    EXPECT_EQ(same.bound, 0.0);
    EXPECT_TRUE(same.ok);
    auto lp = pseudometric_bound_check(low_pass(1.0), m, {}, 50.0, 0.0, 0.5);
    EXPECT_TRUE(lp.ok) << lp.rho << " " << lp.bound;
    EXPECT_GT(lp.rho, 0.0);
    auto oc = pseudometric_bound_check(odd_cauchy(), m, {}, 50.0, 0.0, 1.0);
    EXPECT_TRUE(oc.ok) << oc.rho << " " << oc.bound;
    auto noisy = pseudometric_bound_check(low_pass(1.0), m, exp_abs(1.0), 50.0, 0.0, 0.5);
    EXPECT_TRUE(noisy.ok) << noisy.rho << " " << noisy.bound;
}

TEST(Covering, EuclideanExamples) {
    auto eu = [](double a, double b) { return std::abs(a - b); };
    EXPECT_EQ(covering_numbers(eu, 0, 1, {0.25})[0], 2);
    EXPECT_EQ(covering_numbers(eu, 0, 1, {1.0, 2.0}), (std::vector<int>{1, 1}));
    EXPECT_EQ(covering_numbers(eu, 0, 1, {0.11})[0], 5);
    // five balls tile [0, 1] with no slack, so the grid count may only overshoot
    EXPECT_GE(covering_numbers(eu, 0, 1, {0.1})[0], 5);
    EXPECT_EQ(covering_numbers(eu, 0, 2, {0.25})[0], 4);
}

TEST(Covering, MonotoneForLowPassSigma) {
    const int n = 2049;
    const double h = 1.0 / (n - 1);
    std::vector<double> q(n);
    for (int k = 0; k < n; ++k) q[k] = pseudometric_q(low_pass(1.0), {}, k * h);
    std::vector<double> eps;
    for (int k = 0; k < 30; ++k) eps.push_back(0.5 * std::pow(1e-3, k / 29.0));
    auto N = covering_numbers_indexed([&](int i, int j) { return q[std::abs(i - j)]; }, n, eps);
    for (std::size_t k = 1; k < N.size(); ++k) EXPECT_GE(N[k], N[k - 1]);
    EXPECT_EQ(N.front(), 1);
}

TEST(Dudley, LowPassFiniteAndGridStable) {
    auto coarse = dudley_entropy(low_pass(1.0), {}, 0, 1, 1025);
    auto fine = dudley_entropy(low_pass(1.0), {}, 0, 1, 2049);
    EXPECT_TRUE(std::isfinite(fine.entropy_integral));
    EXPECT_GT(fine.entropy_integral, 0.0);
    EXPECT_NEAR(fine.entropy_integral, coarse.entropy_integral, 0.02 * fine.entropy_integral);
    EXPECT_GE(fine.eps0, fine.diameter);
    EXPECT_NEAR(fine.max_std, std::sqrt(2 / pi), 1e-6);
}

TEST(Dudley, DistanceMatrixMatchesLimitCovariance) {
    Eigen::VectorXd diag;
    const ScaledNoise n{exp_abs(1.0), 1.0};
    auto d = limit_distance_matrix(power_tail(0.7), n, 0.0, 2.0, 5, &diag);
    auto C = [&](double a, double b) { return limit_covariance(power_tail(0.7), n, a, b).value; };
    for (int i = 0; i < 5; ++i) {
        EXPECT_NEAR(diag(i), C(0.5 * i, 0.5 * i), 1e-8);
        for (int j = 0; j < 5; ++j) {
            const double dz2 = C(0.5 * i, 0.5 * i) - 2 * C(0.5 * i, 0.5 * j) + C(0.5 * j, 0.5 * j);
            EXPECT_NEAR(d(i, j) * d(i, j), dz2, 1e-8);
        }
    }
}

TEST(Dudley, TailBoundValidityAndMonotone) {
    auto r = dudley_entropy(low_pass(1.0), {}, 0, 1, 1025);
    EXPECT_THROW(sup_tail_bound(r, 0.5 * 8 * r.entropy_integral), ValidityRegion);
    EXPECT_THROW(dudley_and_tail(low_pass(1.0), {}, 0, 1, 1e-6, 256), ValidityRegion);
    double prev = 1.0 + 1e-12;
    for (double x : {8 * r.entropy_integral, 10 * r.entropy_integral, 20.0, 50.0}) {
        const double b = sup_tail_bound(r, x);
        EXPECT_LE(b, prev);
        prev = b;
    }
    EXPECT_LT(sup_tail_bound(r, 200.0), 1e-100);
}
