#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "xcorr/spectral_models.hpp"

using namespace xcorr;
using std::numbers::pi;

namespace {

const SpectralFamily kAll[] = {SpectralFamily::GaussBell, SpectralFamily::CauchySpectrum,
                               SpectralFamily::LaplaceSpectrum, SpectralFamily::Triangular};

// Oracle: K(t) = int cos(t l) f(l) dl by plain composite Simpson on a wide window.
double numeric_K(const SpectralModel& m, double t) {
    const double a = std::sqrt(m.delta);
    const double L = m.family == SpectralFamily::Triangular ? a : 400 * a;
    const long n = 4000000;
    const double h = 2 * L / n;
    double s = 0;
    for (long k = 0; k <= n; ++k) {
        const double l = -L + k * h;
        const double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
        s += w * std::cos(t * l) * eval_f(m, l);
    }
    s *= h / 3;
    if (m.family == SpectralFamily::CauchySpectrum) {
        // f ~ (c/2pi) delta / l^2 beyond the window; leading term of its cosine transform.
        const double tail = t == 0 ? 1 / L : -std::sin(t * L) / (t * L * L);
        s += m.c / pi * m.delta * tail;
    }
    return s;
}

}  // namespace

TEST(EvalF, Examples) {
    EXPECT_NEAR(eval_f({SpectralFamily::GaussBell, 1, 4}, 0), 0.159155, 1e-6);
    EXPECT_NEAR(eval_f({SpectralFamily::CauchySpectrum, 1, 1}, 1), 0.0795775, 1e-7);
    EXPECT_EQ(eval_f({SpectralFamily::Triangular, 1, 4}, 3), 0.0);
}

TEST(EvalK, Examples) {
    EXPECT_NEAR(eval_K({SpectralFamily::GaussBell, 1, 4}, 0), 0.564190, 1e-6);
    EXPECT_NEAR(eval_K({SpectralFamily::LaplaceSpectrum, 1, 1}, 0), 0.318310, 1e-6);
    EXPECT_NEAR(eval_K({SpectralFamily::CauchySpectrum, 2, 9}, 1), 0.149361, 1e-6);
}

TEST(EvalK, MatchesFourierInversionOfF) {
    for (auto fam : kAll) {
        SpectralModel m{fam, 1.3, 2.0};
        for (double t : {0.0, 0.3, 1.0, 2.5}) {
            EXPECT_NEAR(eval_K(m, t), numeric_K(m, t), 2e-5) << to_string(fam) << " t=" << t;
        }
    }
}

TEST(SpectralModel, IntegralOfFEqualsKAtZero) {
    for (auto fam : kAll)
        for (double c : {0.5, 1.0, 3.0})
            for (double d : {1.0, 100.0, 1e4}) {
                SpectralModel m{fam, c, d};
                auto r = check_admissibility(m, 1.0, 1.0);
                EXPECT_NEAR(r.f_l1, r.K0, 1e-6 * r.K0) << to_string(fam) << " d=" << d;
                EXPECT_TRUE(r.l1_matches_K0);
                EXPECT_NEAR(r.f_linf, c / (2 * pi), 1e-12);
                EXPECT_NEAR(r.K_l1, c, 1e-6 * c) << to_string(fam) << " d=" << d;
            }
}

TEST(SpectralModel, EvennessAndBoundedness) {
    for (auto fam : kAll) {
        SpectralModel m{fam, 2.0, 7.0};
        for (double x = -20; x <= 20; x += 0.37) {
            EXPECT_EQ(eval_f(m, x), eval_f(m, -x));
            EXPECT_EQ(eval_K(m, x), eval_K(m, -x));
            EXPECT_GE(eval_f(m, x), 0.0);
            EXPECT_LE(eval_f(m, x), m.c / (2 * pi) + 1e-12);
        }
        EXPECT_EQ(sup_f(m), m.c / (2 * pi));
    }
}

TEST(CheckAdmissibility, Examples) {
    auto g = check_admissibility({SpectralFamily::GaussBell, 1, 100}, 1.0, 1e-2);
    EXPECT_NEAR(g.sup_deviation, (1 - std::exp(-0.01)) / (2 * pi), 1e-12);
    EXPECT_NEAR(g.sup_deviation, 1.5838e-3, 5e-7);
    EXPECT_TRUE(g.sup_pass);
    auto t = check_admissibility({SpectralFamily::Triangular, 1, 1}, 1.0, 1e-2);
    EXPECT_NEAR(t.sup_deviation, 1 / (2 * pi), 1e-12);
    EXPECT_FALSE(t.sup_pass);
    for (auto fam : kAll) EXPECT_EQ(check_admissibility({fam, 1, 5}, 0.0, 1e-9).sup_deviation, 0.0);
}

TEST(CheckAdmissibility, WhiteNoiseDegeneracy) {
    for (auto fam : {SpectralFamily::GaussBell, SpectralFamily::CauchySpectrum}) {
        double prev = kInf;
        for (double d : {10.0, 100.0, 1e3, 1e4, 1e5}) {
            double s = check_admissibility({fam, 1, d}, 2.0, 1.0).sup_deviation;
            EXPECT_LT(s, prev);
            prev = s;
        }
        EXPECT_LT(prev, 1e-4);
    }
}

TEST(BalanceIntegrals, Examples) {
    auto g = balance_integrals({SpectralFamily::GaussBell, 1, 4}, 1.0, 1.0);
    EXPECT_NEAR(g.tail, 0.0786496, 1e-7);
    auto c = balance_integrals({SpectralFamily::CauchySpectrum, 1, 4}, 1.0, 1.0);
    EXPECT_NEAR(c.tail, 0.067668, 1e-6);
    auto inf = balance_integrals({SpectralFamily::GaussBell, 1, 4}, kInf, 1.0);
    EXPECT_NEAR(inf.weighted, 0.564190, 1e-6);
}

TEST(BalanceIntegrals, ClosedFormsAgreeWithQuadrature) {
    // alpha = 1 closed forms versus the generic quadrature path at alpha just below 1.
    for (auto fam : {SpectralFamily::GaussBell, SpectralFamily::CauchySpectrum,
                     SpectralFamily::LaplaceSpectrum}) {
        SpectralModel m{fam, 1.0, 9.0};
        auto closed = balance_integrals(m, 0.7, 1.0);
        auto near = balance_integrals(m, 0.7, 1.0 - 1e-9);
        EXPECT_NEAR(closed.weighted, near.weighted, 1e-7) << to_string(fam);
        auto sq = integrate_1d([&](double t) { return std::pow(eval_K(m, t), 2); }, 0.7, kInf);
        EXPECT_NEAR(closed.square_tail, sq.value, 1e-9) << to_string(fam);
        auto tl = integrate_1d([&](double t) { return eval_K(m, t); }, 0.7, kInf);
        EXPECT_NEAR(closed.tail, tl.value, 1e-8) << to_string(fam);
    }
}

TEST(BalanceIntegrals, TriangularAgainstBruteForce) {
    SpectralModel m{SpectralFamily::Triangular, 1.0, 4.0};
    auto b = balance_integrals(m, 1.0, 1.0);
    // Simpson to t = 2e4 plus the mean of sin^2 over the remaining tail.
    auto simpson = [&](auto fn, double lo, double hi, long n) {
        const double h = (hi - lo) / n;
        double s = fn(lo) + fn(hi);
        for (long k = 1; k < n; ++k) s += fn(lo + k * h) * (k % 2 ? 4 : 2);
        return s * h / 3;
    };
    const double L = 2e4, p = 1 / (pi * 2);
    double tail = simpson([&](double t) { return eval_K(m, t); }, 1.0, L, 20000000) + p / L;
    EXPECT_NEAR(b.tail, tail, 1e-7);
    double sq = simpson([&](double t) { return std::pow(eval_K(m, t), 2); }, 1.0, 200.0, 2000000) +
                4 * p * p * (3.0 / 8.0) / (3 * std::pow(200.0, 3));
    EXPECT_NEAR(b.square_tail, sq, 1e-9);
    double w = 2 * simpson([&](double t) { return eval_K(m, t) * t; }, 0.0, 1.0, 20000);
    EXPECT_NEAR(b.weighted, w, 1e-10);
}

TEST(BalanceIntegrals, NonIncreasingInDelta) {
    for (auto fam : kAll) {
        BalanceReport prev{};
        bool first = true;
        for (double d : {10.0, 100.0, 1e3, 1e4}) {
            auto r = balance_integrals({fam, 1, d}, 1.0, 1.0);
            if (!first) {
                EXPECT_LE(r.tail, prev.tail + 1e-15) << to_string(fam);
                EXPECT_LE(r.square_tail, prev.square_tail + 1e-15) << to_string(fam);
                EXPECT_LE(r.weighted, prev.weighted + 1e-15) << to_string(fam);
            }
            prev = r;
            first = false;
        }
    }
}

TEST(ScaledBalance, Examples) {
    for (double T : {1.0, 50.0}) EXPECT_EQ(scaled_balance({SpectralFamily::GaussBell, 1, 33}, T, 1, 1).flatness, 0.0);
    auto r = scaled_balance({SpectralFamily::GaussBell, 1, 1e4}, 100, 1.0, 1.0);
    EXPECT_NEAR(r.weighted, 10 * 2 / (std::sqrt(pi) * 100), 1e-9);
    EXPECT_NEAR(r.weighted, 0.11284, 1e-5);
    auto r2 = scaled_balance({SpectralFamily::GaussBell, 1, 4e4}, 200, 1.0, 1.0);
    EXPECT_LT(r2.weighted, r.weighted);
    auto c = scaled_balance({SpectralFamily::CauchySpectrum, 1, 16}, 4, 1.0, 1.0);
    EXPECT_NEAR(c.tail, 0.018316, 1e-6);
}

TEST(EvalG, Examples) {
    EXPECT_EQ(eval_g({NoiseFamily::BandIndicator, 2}, 1), 1.0);
    EXPECT_EQ(eval_g({NoiseFamily::ExpAbs, 1}, 0), 1.0);
    EXPECT_NEAR(eval_g({NoiseFamily::Cauchy, 1}, 1), 0.159155, 1e-6);
}

TEST(NoiseModel, L1NormAndTransform) {
    for (auto fam : {NoiseFamily::BandIndicator, NoiseFamily::ExpAbs, NoiseFamily::GaussBell,
                     NoiseFamily::Fejer, NoiseFamily::Cauchy}) {
        NoiseModel m{fam, 1.7};
        QuadratureSpec s;
        s.abs_tol = 1e-12;
        s.rel_tol = 1e-12;
        s.max_panels = 20000;
        double l1;
        if (fam == NoiseFamily::Fejer) {
            // Fejer decays like l^-2 with oscillation; integrate to 2e3 plus the mean tail.
            auto body = integrate_1d([&](double l) { return eval_g(m, l); }, Domain{0, 2000, {}, {}}, s);
            l1 = 2 * (body.value + 1 / (pi * m.mu * 2000));
            EXPECT_NEAR(l1, noise_l1_norm(m), 1e-6);
        } else {
            auto r = integrate_1d([&](double l) { return eval_g(m, l); }, noise_domain(m), s);
            EXPECT_NEAR(r.value, noise_l1_norm(m), 1e-6 * noise_l1_norm(m)) << to_string(fam);
        }
        EXPECT_NEAR(eval_noise_K(m, 0), noise_l1_norm(m), 1e-12);
        for (double x = 0; x < 5; x += 0.4) EXPECT_EQ(eval_g(m, x), eval_g(m, -x));
    }
}

TEST(Ids, RoundTrip) {
    for (const auto& id : spectral_family_ids()) EXPECT_EQ(to_string(parse_spectral_family(id)), id);
    for (const auto& id : noise_family_ids()) EXPECT_EQ(to_string(parse_noise_family(id)), id);
    EXPECT_THROW(parse_spectral_family("nope"), std::exception);
}
