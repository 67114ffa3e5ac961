#include "xcorr/spectral_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xcorr/errors.hpp"

namespace xcorr {
namespace {

using std::numbers::pi;

double root_delta(const SpectralModel& m) { return std::sqrt(m.delta); }

QuadratureSpec tight() {
    QuadratureSpec s;
    s.abs_tol = 1e-12;
    s.rel_tol = 1e-11;
    return s;
}

}  // namespace

void validate(const SpectralModel& m) {
    if (!(m.c > 0) || !std::isfinite(m.c)) throw ConfigError("spectral model: c must be positive");
    if (!(m.delta > 0) || !std::isfinite(m.delta))
        throw ConfigError("spectral model: delta must be positive");
}

void validate(const NoiseModel& m) {
    if (!(m.mu > 0) || !std::isfinite(m.mu)) throw ConfigError("noise model: mu must be positive");
}

double eval_f(const SpectralModel& m, double l) {
    const double a = root_delta(m);
    const double base = m.c / (2 * pi);
    switch (m.family) {
        case SpectralFamily::GaussBell: return base * std::exp(-l * l / m.delta);
        case SpectralFamily::CauchySpectrum: return base * m.delta / (m.delta + l * l);
        case SpectralFamily::LaplaceSpectrum: return base * std::exp(-std::abs(l) / a);
        case SpectralFamily::Triangular:
            return std::abs(l) <= a ? base * (1 - std::abs(l) / a) : 0.0;
    }
    return 0.0;
}

double eval_K(const SpectralModel& m, double t) {
    const double a = root_delta(m);
    const double c = m.c;
    t = std::abs(t);
    switch (m.family) {
        case SpectralFamily::GaussBell:
            return 0.5 * c * a / std::sqrt(pi) * std::exp(-m.delta * t * t / 4);
        case SpectralFamily::CauchySpectrum: return 0.5 * c * a * std::exp(-a * t);
        case SpectralFamily::LaplaceSpectrum: return c / pi * a / (1 + m.delta * t * t);
        case SpectralFamily::Triangular: {
            if (a * t < 1e-8) return c * a / (2 * pi);
            const double s = std::sin(0.5 * a * t);
            return 2 * c / (pi * a) * s * s / (t * t);
        }
    }
    return 0.0;
}

double sup_f(const SpectralModel& m) { return m.c / (2 * pi); }

std::vector<double> spectral_kinks(const SpectralModel& m) {
    const double a = root_delta(m);
    switch (m.family) {
        case SpectralFamily::LaplaceSpectrum: return {0.0};
        case SpectralFamily::Triangular: return {-a, 0.0, a};
        default: return {};
    }
}

Domain spectral_domain(const SpectralModel& m) {
    if (m.family == SpectralFamily::Triangular) {
        const double a = root_delta(m);
        return Domain{-a, a, {0.0}, {}};
    }
    return Domain{-kInf, kInf, spectral_kinks(m), {}};
}

double eval_g(const NoiseModel& m, double l) {
    const double mu = m.mu;
    switch (m.family) {
        case NoiseFamily::BandIndicator: return std::abs(l) <= mu ? 1.0 : 0.0;
        case NoiseFamily::ExpAbs: return std::exp(-mu * std::abs(l));
        case NoiseFamily::GaussBell: return std::exp(-mu * l * l);
        case NoiseFamily::Fejer: {
            if (std::abs(mu * l) < 1e-8) return mu / (2 * pi);
            const double s = std::sin(0.5 * mu * l);
            return 4 * s * s / (2 * pi * mu * l * l);
        }
        case NoiseFamily::Cauchy: return mu / pi / (l * l + mu * mu);
    }
    return 0.0;
}

double eval_noise_K(const NoiseModel& m, double t) {
    const double mu = m.mu;
    t = std::abs(t);
    switch (m.family) {
        case NoiseFamily::BandIndicator: return t < 1e-12 ? 2 * mu : 2 * std::sin(mu * t) / t;
        case NoiseFamily::ExpAbs: return 2 * mu / (mu * mu + t * t);
        case NoiseFamily::GaussBell: return std::sqrt(pi / mu) * std::exp(-t * t / (4 * mu));
        case NoiseFamily::Fejer: return t < mu ? 1 - t / mu : 0.0;
        case NoiseFamily::Cauchy: return std::exp(-mu * t);
    }
    return 0.0;
}

double noise_l1_norm(const NoiseModel& m) {
    switch (m.family) {
        case NoiseFamily::BandIndicator: return 2 * m.mu;
        case NoiseFamily::ExpAbs: return 2 / m.mu;
        case NoiseFamily::GaussBell: return std::sqrt(pi / m.mu);
        case NoiseFamily::Fejer: return 1.0;
        case NoiseFamily::Cauchy: return 1.0;
    }
    return 0.0;
}

std::vector<double> noise_kinks(const NoiseModel& m) {
    switch (m.family) {
        case NoiseFamily::BandIndicator: return {-m.mu, m.mu};
        case NoiseFamily::ExpAbs: return {0.0};
        default: return {};
    }
}

Domain noise_domain(const NoiseModel& m) {
    if (m.family == NoiseFamily::BandIndicator) return Domain{-m.mu, m.mu, {}, {}};
    return Domain{-kInf, kInf, noise_kinks(m), {}};
}

ConditionReport check_admissibility(const SpectralModel& m, double a, double tol) {
    validate(m);
    ConditionReport r;
    const double white = m.c / (2 * pi);
    constexpr int n = 4096;
    for (int i = 0; i <= n; ++i) {
        const double l = a * i / n;
        r.sup_deviation = std::max(r.sup_deviation, std::abs(eval_f(m, l) - white));
    }
    // f is even and non-increasing in |lambda| for every family, but sample anyway.
    const double span = 8 * std::sqrt(m.delta);
    for (int i = 0; i <= n; ++i) r.f_linf = std::max(r.f_linf, eval_f(m, span * i / n));

    QuadratureSpec s = tight();
    if (m.family == SpectralFamily::CauchySpectrum || m.family == SpectralFamily::LaplaceSpectrum)
        s.tail = BoundDriven{m.family == SpectralFamily::LaplaceSpectrum ? BoundDriven::Decay::Exponential
                                                                         : BoundDriven::Decay::Algebraic,
                             m.family == SpectralFamily::LaplaceSpectrum ? 1 / std::sqrt(m.delta) : 2.0,
                             std::sqrt(m.delta)};
    else
        s.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0, std::sqrt(m.delta)};
    auto fl1 = integrate_1d([&](double l) { return eval_f(m, l); }, spectral_domain(m), s);
    r.f_l1 = fl1.value;

    // |K| = K for all four families; the triangular tail oscillates, so split it.
    const double rd = std::sqrt(m.delta);
    QuadratureResult<double> kl1;
    if (m.family == SpectralFamily::Triangular) {
        const double L = 64 / rd;
        auto body = integrate_1d([&](double t) { return eval_K(m, t); }, 0.0, L, tight());
        auto osc = integrate_oscillatory([](double t) { return 1 / (t * t); }, rd, L, tight());
        const double pref = m.c / (pi * rd);
        kl1.value = 2 * (body.value + pref * (1 / L - osc.value.real()));
        kl1.converged = body.converged && osc.converged;
    } else {
        QuadratureSpec ks = tight();
        ks.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0, 1 / rd};
        kl1 = integrate_1d([&](double t) { return eval_K(m, t); }, -kInf, kInf, ks);
    }
    r.K_l1 = kl1.value;
    r.K0 = eval_K(m, 0.0);
    r.sup_pass = r.sup_deviation <= tol;
    r.l1_matches_K0 = std::abs(r.f_l1 - r.K0) <= 1e-6 * r.K0;
    r.converged = fl1.converged && kl1.converged;
    return r;
}

BalanceReport balance_integrals(const SpectralModel& m, double dc, double alpha) {
    validate(m);
    if (!(dc > 0)) throw ConfigError("balance: delta_cut must be positive");
    if (!(alpha > 0 && alpha <= 1)) throw ConfigError("balance: alpha must lie in (0, 1]");
    BalanceReport r;
    const double a = root_delta(m);
    const double c = m.c;
    r.flatness = std::abs(1 - 2 * pi * eval_f(m, 0.0) / c);

    switch (m.family) {
        case SpectralFamily::GaussBell:
            r.tail = 0.5 * c * std::erfc(dc * a / 2);
            r.square_tail = c * c * a / (4 * std::sqrt(2 * pi)) * std::erfc(dc * a / std::sqrt(2.0));
            break;
        case SpectralFamily::CauchySpectrum:
            r.tail = 0.5 * c * std::exp(-dc * a);
            r.square_tail = c * c * a / 8 * std::exp(-2 * dc * a);
            break;
        case SpectralFamily::LaplaceSpectrum: {
            const double x = a * dc;
            const double rest = std::isfinite(x) ? pi / 2 - std::atan(x) : 0.0;
            r.tail = c / pi * rest;
            r.square_tail = c * c * a / (2 * pi * pi) * (std::isfinite(x) ? rest - x / (1 + x * x) : 0.0);
            break;
        }
        case SpectralFamily::Triangular: {
            if (!std::isfinite(dc)) break;
            // K = (c/(pi a)) (1 - cos(a t)) / t^2 and K^2 expanded into cosines.
            const double p = c / (pi * a);
            auto inv2 = [](double t) { return 1 / (t * t); };
            auto inv4 = [](double t) { return 1 / (t * t * t * t); };
            auto o1 = integrate_oscillatory(inv2, a, dc, tight());
            auto o2 = integrate_oscillatory(inv4, a, dc, tight());
            auto o3 = integrate_oscillatory(inv4, 2 * a, dc, tight());
            r.tail = p * (1 / dc - o1.value.real());
            r.square_tail = p * p * (0.5 / (dc * dc * dc) - 2 * o2.value.real() + 0.5 * o3.value.real());
            r.converged = o1.converged && o2.converged && o3.converged;
            break;
        }
    }

    const bool closed = alpha == 1.0 && m.family != SpectralFamily::Triangular;
    if (closed) {
        switch (m.family) {
            case SpectralFamily::GaussBell:
                r.weighted = 2 * c / (std::sqrt(pi) * a) * (1 - std::exp(-m.delta * dc * dc / 4));
                break;
            case SpectralFamily::CauchySpectrum:
                r.weighted = std::isfinite(dc) ? c / a * (1 - std::exp(-a * dc) * (1 + a * dc)) : c / a;
                break;
            case SpectralFamily::LaplaceSpectrum:
                r.weighted = c / (pi * a) * std::log1p(m.delta * dc * dc);
                break;
            default: break;
        }
    } else {
        QuadratureSpec s = tight();
        s.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0 - alpha, 1 / a};
        Domain d{0.0, dc, {}, {}};
        if (std::isfinite(dc)) d.breakpoints.push_back(std::min(dc, 1 / a));
        auto w = integrate_1d([&](double t) { return std::abs(eval_K(m, t)) * std::pow(t, alpha); }, d, s);
        r.weighted = 2 * w.value;
        r.converged = r.converged && w.converged;
    }
    return r;
}

BalanceReport scaled_balance(const SpectralModel& m, double T, double dc, double alpha) {
    if (!(T > 0)) throw ConfigError("balance: T must be positive");
    BalanceReport r = balance_integrals(m, dc, alpha);
    const double st = std::sqrt(T);
    r.flatness *= st;
    r.tail *= st;
    r.square_tail *= T;
    r.weighted *= st;
    return r;
}

namespace {
const std::vector<std::string> kSpectralIds = {"gauss-bell", "cauchy-spectrum", "laplace-spectrum",
                                               "triangular"};
const std::vector<std::string> kNoiseIds = {"band", "exp-abs", "gauss", "fejer", "cauchy"};
}  // namespace

const std::vector<std::string>& spectral_family_ids() { return kSpectralIds; }
const std::vector<std::string>& noise_family_ids() { return kNoiseIds; }

std::string to_string(SpectralFamily f) { return kSpectralIds[static_cast<int>(f)]; }
std::string to_string(NoiseFamily f) { return kNoiseIds[static_cast<int>(f)]; }

SpectralFamily parse_spectral_family(const std::string& id) {
    auto it = std::find(kSpectralIds.begin(), kSpectralIds.end(), id);
    if (it == kSpectralIds.end()) throw ConfigError("unknown spectral model '" + id + "'");
    return static_cast<SpectralFamily>(it - kSpectralIds.begin());
}

NoiseFamily parse_noise_family(const std::string& id) {
    auto it = std::find(kNoiseIds.begin(), kNoiseIds.end(), id);
    if (it == kNoiseIds.end()) throw ConfigError("unknown noise model '" + id + "'");
    return static_cast<NoiseFamily>(it - kNoiseIds.begin());
}

}  // namespace xcorr
