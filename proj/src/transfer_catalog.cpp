#include "xcorr/transfer_catalog.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <memory>

#include "xcorr/errors.hpp"

namespace xcorr {
namespace {

using std::numbers::pi;
constexpr double kExclusion = 1e-8;

QuadratureSpec tight() {
    QuadratureSpec s;
    s.abs_tol = 1e-12;
    s.rel_tol = 1e-11;
    s.max_panels = 8000;
    return s;
}

bool half_line(TransferKind k) {
    return k == TransferKind::PowerTail || k == TransferKind::ResonantCos ||
           k == TransferKind::ResonantSin;
}

// int_0^1 e^{-iws} s^{-g} ds; s = v^{1/(1-g)} makes the integrand smooth.
cplx finite_part(double g, double w) {
    const double e = 1.0 / (1.0 - g);
    auto r = integrate_1d([&](double v) { return std::exp(cplx(0.0, -w * std::pow(v, e))); }, 0.0, 1.0,
                          tight());
    return e * r.value;
}

// Chebyshev interpolant of finite_part over [0, kSeriesFrom), built once per exponent.
constexpr double kSeriesFrom = 40.0;
constexpr int kChunks = 16, kDegree = 16;

struct FinitePartTable {
    std::vector<cplx> coef;  // kChunks x (kDegree + 1)

    explicit FinitePartTable(double g) : coef(kChunks * (kDegree + 1)) {
        const double width = kSeriesFrom / kChunks;
        std::vector<cplx> vals(kDegree + 1);
        for (int c = 0; c < kChunks; ++c) {
            for (int j = 0; j <= kDegree; ++j) {
                const double x = std::cos(pi * (j + 0.5) / (kDegree + 1));
                vals[j] = finite_part(g, width * (c + 0.5 * (x + 1)));
            }
            for (int k = 0; k <= kDegree; ++k) {
                cplx sum = 0;
                for (int j = 0; j <= kDegree; ++j)
                    sum += vals[j] * std::cos(pi * k * (j + 0.5) / (kDegree + 1));
                coef[c * (kDegree + 1) + k] = sum * ((k == 0 ? 1.0 : 2.0) / (kDegree + 1));
            }
        }
    }

    cplx operator()(double w) const {
        const double width = kSeriesFrom / kChunks;
        const int c = std::min(kChunks - 1, static_cast<int>(w / width));
        const double x = 2 * (w - c * width) / width - 1;
        const cplx* a = &coef[c * (kDegree + 1)];
        // Clenshaw
        cplx b1 = 0, b2 = 0;
        for (int k = kDegree; k >= 1; --k) {
            const cplx b0 = 2 * x * b1 - b2 + a[k];
            b2 = b1;
            b1 = b0;
        }
        return x * b1 - b2 + a[0];
    }
};

const FinitePartTable& finite_part_table(double g) {
    static std::mutex mtx;
    static std::map<double, std::unique_ptr<FinitePartTable>> tables;
    std::lock_guard lock(mtx);
    auto& t = tables[g];
    if (!t) t = std::make_unique<FinitePartTable>(g);
    return *t;
}

// int_0^inf e^{-i w t} (1+t)^{-g} dt. The singular point w = 0 itself is returned as 0;
// callers never integrate across it with nonzero measure.
cplx half_line_transform(double g, double w) {
    if (w < 0) return std::conj(half_line_transform(g, -w));
    if (w == 0) return 0.0;
    if (w >= kSeriesFrom) {
        // integration by parts from t = 0: sum_k (-1)^k (g)_k / (iw)^{k+1}
        cplx sum = 0, term = 1.0 / cplx(0.0, w);
        for (int k = 0; k < 14; ++k) {
            sum += term;
            term *= -(g + k) / cplx(0.0, w);
        }
        return sum;
    }
    // Gamma(1-g)(iw)^{g-1} minus the part of the shifted integral over (0, 1)
    const cplx lead = std::tgamma(1.0 - g) * std::pow(w, g - 1.0) * std::exp(cplx(0.0, 0.5 * pi * (g - 1.0)));
    return std::exp(cplx(0.0, w)) * (lead - finite_part_table(g)(w));
}

double sinc_pi(double w, double t) {
    // sin(w t) / (pi t)
    if (std::abs(w * t) < 1e-6) return w / pi * (1 - w * w * t * t / 6);
    return std::sin(w * t) / (pi * t);
}

// pi t H(t) as c0 + sum a cos(w t) + sum b sin(w t), for the closed time-domain kinds.
struct TrigTerms {
    double c0 = 0;
    std::vector<std::pair<double, double>> cos_terms;  // (coef, freq)
    std::vector<std::pair<double, double>> sin_terms;
};

TrigTerms trig_terms(const TransferFunction& tf) {
    TrigTerms t;
    switch (tf.kind) {
        case TransferKind::OneMinusCosOverT:
            t.c0 = 1;
            t.cos_terms.push_back({-1, tf.mu});
            break;
        case TransferKind::LowPass: t.sin_terms.push_back({1, tf.mu}); break;
        case TransferKind::BandPass:
            t.sin_terms.push_back({1, tf.nu});
            t.sin_terms.push_back({-1, tf.mu});
            break;
        case TransferKind::MultiBand:
            for (const auto& b : tf.bands) {
                t.sin_terms.push_back({1, b.hi});
                t.sin_terms.push_back({-1, b.lo});
            }
            break;
        default: break;
    }
    return t;
}

// (pi t H(t))^2 as sum d cos(w t) with w >= 0, odd cross terms dropped.
std::map<double, double> square_as_cosines(const TrigTerms& t) {
    std::map<double, double> d;
    d[0.0] += t.c0 * t.c0;
    for (auto [a, w] : t.cos_terms) d[w] += 2 * t.c0 * a;
    for (auto [a1, w1] : t.cos_terms)
        for (auto [a2, w2] : t.cos_terms) {
            d[std::abs(w1 - w2)] += 0.5 * a1 * a2;
            d[w1 + w2] += 0.5 * a1 * a2;
        }
    for (auto [b1, w1] : t.sin_terms)
        for (auto [b2, w2] : t.sin_terms) {
            d[std::abs(w1 - w2)] += 0.5 * b1 * b2;
            d[w1 + w2] -= 0.5 * b1 * b2;
        }
    return d;
}

std::optional<double> closed_lipschitz(const TransferFunction& tf, double alpha) {
    const double g = tf.gamma, mu = tf.mu;
    const double x = 1 - alpha;
    switch (tf.kind) {
        case TransferKind::OddCauchy:
            if (alpha == 1) return 3.0;
            return std::nullopt;
        case TransferKind::OneMinusCosOverT:
            if (alpha == 1) return mu * mu / (2 * pi);
            return std::nullopt;
        case TransferKind::LowPass:
            if (alpha == 1) return mu * mu * mu / pi;
            return std::nullopt;
        case TransferKind::PowerTail:
            return g * std::pow(x / (alpha + g), x);
        case TransferKind::ResonantCos:
            if (alpha == 1) return mu + g;
            return mu * std::pow(x / (alpha + g - 1), x) + g * std::pow(x / (alpha + g), x);
        case TransferKind::ResonantSin:
            if (alpha == 1) return mu + g;
            return mu * std::pow(x / (alpha + g), x) + g * std::pow(x / (alpha + g - 1), x);
        default: return std::nullopt;
    }
}

}  // namespace

TransferFunction odd_cauchy() { return {TransferKind::OddCauchy, 1, 1, 0.6, {}}; }
TransferFunction one_minus_cos(double mu) { return {TransferKind::OneMinusCosOverT, mu, 1, 0.6, {}}; }
TransferFunction low_pass(double mu) { return {TransferKind::LowPass, mu, 1, 0.6, {}}; }
TransferFunction band_pass(double mu, double nu) { return {TransferKind::BandPass, mu, nu, 0.6, {}}; }
TransferFunction multi_band(std::vector<Band> bands) {
    return {TransferKind::MultiBand, 1, 1, 0.6, std::move(bands)};
}
TransferFunction multi_band_default() {
    std::vector<Band> b;
    for (int i = 1; i <= 5; ++i) b.push_back({2.0 * i - 1, 2.0 * i});
    return multi_band(std::move(b));
}
TransferFunction zero_response() { return multi_band({}); }
TransferFunction power_tail(double gamma) { return {TransferKind::PowerTail, 1, 1, gamma, {}}; }
TransferFunction resonant_cos(double mu, double gamma) {
    return {TransferKind::ResonantCos, mu, 1, gamma, {}};
}
TransferFunction resonant_sin(double mu, double gamma) {
    return {TransferKind::ResonantSin, mu, 1, gamma, {}};
}

void validate(const TransferFunction& tf) {
    auto positive = [](double v) { return v > 0 && std::isfinite(v); };
    switch (tf.kind) {
        case TransferKind::OddCauchy: return;
        case TransferKind::OneMinusCosOverT:
        case TransferKind::LowPass:
            if (!positive(tf.mu)) throw ConfigError("transfer: mu must be positive");
            return;
        case TransferKind::BandPass:
            if (!positive(tf.mu) || !(tf.nu > tf.mu) || !std::isfinite(tf.nu))
                throw ConfigError("transfer: band-pass needs 0 < mu < nu");
            return;
        case TransferKind::MultiBand: {
            double prev = 0;
            for (const auto& b : tf.bands) {
                if (!(b.lo > 0) || !(b.hi > b.lo) || b.lo < prev || !std::isfinite(b.hi))
                    throw ConfigError("transfer: bands must satisfy 0 < mu_k < nu_k <= mu_{k+1}");
                prev = b.hi;
            }
            return;
        }
        case TransferKind::PowerTail:
        case TransferKind::ResonantCos:
        case TransferKind::ResonantSin:
            if (!(tf.gamma > 0.5 && tf.gamma < 1))
                throw ConfigError("transfer: gamma must lie in (1/2, 1)");
            if (tf.kind != TransferKind::PowerTail && !positive(tf.mu))
                throw ConfigError("transfer: mu must be positive");
            return;
    }
}

Parity parity(const TransferFunction& tf) {
    switch (tf.kind) {
        case TransferKind::OddCauchy:
        case TransferKind::OneMinusCosOverT: return Parity::Odd;
        case TransferKind::LowPass:
        case TransferKind::BandPass:
        case TransferKind::MultiBand: return Parity::Even;
        default: return Parity::None;
    }
}

Support support(const TransferFunction& tf) {
    return half_line(tf.kind) ? Support::HalfLine : Support::WholeLine;
}

HstarForm hstar_form(const TransferFunction& tf) {
    return half_line(tf.kind) ? HstarForm::NumericWithAsymptote : HstarForm::Closed;
}

AlphaRange lipschitz_alpha_range(const TransferFunction& tf) {
    if (half_line(tf.kind)) return {0.5, 1.0, true};
    return {0.0, 1.0, true};
}

SpectralShape spectral_shape(const TransferFunction& tf) {
    SpectralShape s;
    using D = BoundDriven::Decay;
    switch (tf.kind) {
        case TransferKind::OddCauchy:
            s.kinks = {0.0};
            s.tail = BoundDriven{D::Exponential, 2.0, 1.0};
            break;
        case TransferKind::OneMinusCosOverT:
            s.radius = tf.mu;
            s.kinks = {-tf.mu, 0.0, tf.mu};
            break;
        case TransferKind::LowPass:
            s.radius = tf.mu;
            s.kinks = {-tf.mu, tf.mu};
            break;
        case TransferKind::BandPass:
            s.radius = tf.nu;
            s.kinks = {-tf.nu, -tf.mu, tf.mu, tf.nu};
            break;
        case TransferKind::MultiBand:
            s.radius = tf.bands.empty() ? 0.0 : tf.bands.back().hi;
            for (const auto& b : tf.bands) {
                s.kinks.insert(s.kinks.end(), {-b.hi, -b.lo, b.lo, b.hi});
            }
            std::sort(s.kinks.begin(), s.kinks.end());
            break;
        case TransferKind::PowerTail:
            s.singular_sq = {{0.0, 2 * tf.gamma - 2}};
            s.tail = BoundDriven{D::Algebraic, 2.0, 1.0};
            break;
        case TransferKind::ResonantCos:
        case TransferKind::ResonantSin:
            s.singular_sq = {{-tf.mu, 2 * tf.gamma - 2}, {tf.mu, 2 * tf.gamma - 2}};
            s.tail = BoundDriven{D::Algebraic, tf.kind == TransferKind::ResonantCos ? 2.0 : 4.0,
                                 std::max(1.0, tf.mu)};
            break;
    }
    return s;
}

double eval_H(const TransferFunction& tf, double t) {
    switch (tf.kind) {
        case TransferKind::OddCauchy: return t / (1 + t * t);
        case TransferKind::OneMinusCosOverT: {
            if (std::abs(tf.mu * t) < 1e-6) return tf.mu * tf.mu * t / (2 * pi);
            const double s = std::sin(0.5 * tf.mu * t);
            return 2 * s * s / (pi * t);
        }
        case TransferKind::LowPass: return sinc_pi(tf.mu, t);
        case TransferKind::BandPass: return sinc_pi(tf.nu, t) - sinc_pi(tf.mu, t);
        case TransferKind::MultiBand: {
            double v = 0;
            for (const auto& b : tf.bands) v += sinc_pi(b.hi, t) - sinc_pi(b.lo, t);
            return v;
        }
        case TransferKind::PowerTail: return t < 0 ? 0.0 : std::pow(1 + t, -tf.gamma);
        case TransferKind::ResonantCos:
            return t < 0 ? 0.0 : std::cos(tf.mu * t) * std::pow(1 + t, -tf.gamma);
        case TransferKind::ResonantSin:
            return t < 0 ? 0.0 : std::sin(tf.mu * t) * std::pow(1 + t, -tf.gamma);
    }
    return 0.0;
}

cplx hstar_regularized(const TransferFunction& tf, double l) {
    const double a = std::abs(l);
    const double sgn = l < 0 ? -1.0 : (l > 0 ? 1.0 : 0.0);
    switch (tf.kind) {
        case TransferKind::OddCauchy: return cplx(0.0, -sgn * pi * std::exp(-a));
        case TransferKind::OneMinusCosOverT: return a <= tf.mu ? cplx(0.0, -sgn) : cplx{};
        case TransferKind::LowPass: return a <= tf.mu ? 1.0 : 0.0;
        case TransferKind::BandPass: return (a > tf.mu && a <= tf.nu) ? 1.0 : 0.0;
        case TransferKind::MultiBand: {
            for (const auto& b : tf.bands)
                if (a > b.lo && a <= b.hi) return 1.0;
            return 0.0;
        }
        case TransferKind::PowerTail: return half_line_transform(tf.gamma, l);
        case TransferKind::ResonantCos:
            return 0.5 * (half_line_transform(tf.gamma, l - tf.mu) +
                          half_line_transform(tf.gamma, l + tf.mu));
        case TransferKind::ResonantSin:
            return (half_line_transform(tf.gamma, l - tf.mu) -
                    half_line_transform(tf.gamma, l + tf.mu)) /
                   cplx(0.0, 2.0);
    }
    return {};
}

cplx eval_Hstar(const TransferFunction& tf, double l) {
    if (tf.kind == TransferKind::PowerTail && std::abs(l) < kExclusion)
        throw SingularPoint("H* diverges at lambda = 0");
    if ((tf.kind == TransferKind::ResonantCos || tf.kind == TransferKind::ResonantSin) &&
        std::abs(std::abs(l) - tf.mu) < kExclusion)
        throw SingularPoint("H* diverges at lambda = +-mu");
    return hstar_regularized(tf, l);
}

double singular_amplitude(const TransferFunction& tf) {
    const double a = pi / (std::tgamma(tf.gamma) * std::sin(tf.gamma * pi));
    switch (tf.kind) {
        case TransferKind::PowerTail: return a;
        case TransferKind::ResonantCos:
        case TransferKind::ResonantSin: return 0.5 * a;
        default: return 0.0;
    }
}

namespace {

// H*(anchor + u) with the offsets from +-mu formed before adding u, so points
// hugging a singular anchor keep their full relative precision.
cplx hstar_at(const TransferFunction& tf, double anchor, double u) {
    if (tf.kind != TransferKind::ResonantCos && tf.kind != TransferKind::ResonantSin)
        return hstar_regularized(tf, anchor + u);
    const cplx lo = half_line_transform(tf.gamma, (anchor - tf.mu) + u);
    const cplx hi = half_line_transform(tf.gamma, (anchor + tf.mu) + u);
    return tf.kind == TransferKind::ResonantCos ? 0.5 * (lo + hi) : (lo - hi) / cplx(0.0, 2.0);
}

}  // namespace

QuadratureResult<double> integrate_spectral(const TransferFunction& tf, const SpectralIntegrand& fn,
                                            double lo, double hi, std::vector<double> breaks,
                                            const QuadratureSpec& spec) {
    const auto sh = spectral_shape(tf);
    hi = std::min(hi, sh.radius);
    QuadratureResult<double> out;
    if (!(hi > lo)) return out;
    for (double k : sh.kinks) breaks.push_back(k);
    std::vector<double> cuts{lo};
    double exponent = 0;
    for (const auto& sg : sh.singular_sq)
        if (sg.at > lo && sg.at < hi) cuts.push_back(sg.at);
    for (const auto& sg : sh.singular_sq) exponent = sg.exponent;
    cuts.push_back(hi);
    auto singular = [&](double x) {
        for (const auto& sg : sh.singular_sq)
            if (sg.at == x) return true;
        return false;
    };
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
        const double a = cuts[i], b = cuts[i + 1];
        const bool from_right = !singular(a) && singular(b);
        const double anchor = from_right ? b : a;
        const double dir = from_right ? -1.0 : 1.0;
        Domain d{0.0, b - a, {}, {}};
        if (singular(anchor)) d.singularities.push_back({0.0, exponent});
        for (double k : breaks) {
            const double u = dir * (k - anchor);
            if (u > 0 && u < d.hi) d.breakpoints.push_back(u);
        }
        std::sort(d.breakpoints.begin(), d.breakpoints.end());
        auto r = integrate_1d(
            [&](double u) { return fn(anchor + dir * u, hstar_at(tf, anchor, dir * u)); }, d, spec);
        out.value += r.value;
        out.error_estimate += r.error_estimate;
        out.panels_used += r.panels_used;
        out.converged = out.converged && r.converged;
    }
    return out;
}

namespace {

QuadratureResult<double> sq_integral(const TransferFunction& tf, const RealFn& weight, double lo,
                                     double hi, std::vector<double> breaks, const QuadratureSpec& spec) {
    return integrate_spectral(
        tf, [&](double l, cplx h) { return weight(l) * std::norm(h); }, lo, hi, std::move(breaks), spec);
}

QuadratureSpec with_tail(QuadratureSpec s, const SpectralShape& sh, double scale, bool log_weight) {
    const bool alg = sh.tail.decay == BoundDriven::Decay::Algebraic;
    s.tail = BoundDriven{sh.tail.decay, alg && log_weight ? 1.5 : sh.tail.rate, scale};
    return s;
}

}  // namespace

QuadratureResult<double> integrate_hstar_sq(const TransferFunction& tf, const RealFn& weight,
                                            const QuadratureSpec& spec) {
    // |H*|^2 is even for real H; weights passed here are even too.
    const auto sh = spectral_shape(tf);
    auto r = sq_integral(tf, weight, 0.0, kInf, {}, with_tail(spec, sh, sh.tail.scale, false));
    r.value *= 2;
    r.error_estimate *= 2;
    return r;
}

NormReport l2_norms(const TransferFunction& tf) {
    validate(tf);
    NormReport out;
    QuadratureSpec s = tight();
    s.rel_tol = 1e-9;
    switch (tf.kind) {
        case TransferKind::OddCauchy: {
            auto r = integrate_1d([](double t) { return std::pow(t / (1 + t * t), 2); }, 0.0, kInf, s);
            out.norm_H_sq = 2 * r.value;
            out.converged = r.converged;
            break;
        }
        case TransferKind::OneMinusCosOverT:
        case TransferKind::LowPass:
        case TransferKind::BandPass:
        case TransferKind::MultiBand: {
            // body on [0, L], then the 1/t^2 tail term by term
            constexpr double L = 64;
            Domain d{0.0, L, {}, {}};
            for (int k = 1; k < L; ++k) d.breakpoints.push_back(k);
            auto body = integrate_1d([&](double t) { return std::pow(eval_H(tf, t), 2); }, d, s);
            double tail = 0;
            for (auto [w, coef] : square_as_cosines(trig_terms(tf))) {
                if (coef == 0) continue;
                const double I =
                    w == 0 ? 1 / L
                           : integrate_oscillatory([](double t) { return 1 / (t * t); }, w, L, s).value.real();
                tail += coef * I;
            }
            out.norm_H_sq = 2 * (body.value + tail / (pi * pi));
            out.converged = body.converged;
            break;
        }
        case TransferKind::PowerTail: {
            QuadratureSpec p = s;
            p.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2 * tf.gamma, 1.0};
            auto r = integrate_1d([&](double t) { return std::pow(1 + t, -2 * tf.gamma); }, 0.0, kInf, p);
            out.norm_H_sq = r.value;
            out.converged = r.converged;
            break;
        }
        case TransferKind::ResonantCos:
        case TransferKind::ResonantSin: {
            QuadratureSpec p = s;
            p.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2 * tf.gamma, 1.0};
            auto base = integrate_1d([&](double t) { return std::pow(1 + t, -2 * tf.gamma); }, 0.0, kInf, p);
            auto osc = integrate_oscillatory([&](double t) { return std::pow(1 + t, -2 * tf.gamma); },
                                             2 * tf.mu, 0.0, s);
            const double sign = tf.kind == TransferKind::ResonantCos ? 1.0 : -1.0;
            out.norm_H_sq = 0.5 * (base.value + sign * osc.value.real());
            out.converged = base.converged && osc.converged;
            break;
        }
    }
    QuadratureSpec fs = tight();
    fs.rel_tol = hstar_form(tf) == HstarForm::Closed ? 1e-10 : 1e-7;
    fs.abs_tol = hstar_form(tf) == HstarForm::Closed ? 1e-12 : 1e-9;
    auto f = integrate_hstar_sq(tf, [](double) { return 1.0; }, fs);
    out.norm_Hstar_sq = f.value;
    out.converged = out.converged && f.converged;
    return out;
}

double pseudometric_q(const TransferFunction& tf, const std::optional<NoiseModel>& noise,
                      double tau) {
    validate(tf);
    if (!std::isfinite(tau)) throw ConfigError("pseudometric: tau must be finite");
    tau = std::abs(tau);
    if (tau == 0) return 0.0;
    double q2 = 0;
    if (noise) {
        // int sin^2(tau l / 2) g = (|g|_1 - K_U(tau)) / 2
        validate(*noise);
        q2 += 0.5 * (noise_l1_norm(*noise) - eval_noise_K(*noise, tau));
    }
    const auto sh = spectral_shape(tf);
    QuadratureSpec s = tight();
    s.max_panels = 20000;
    if (hstar_form(tf) == HstarForm::NumericWithAsymptote) {
        s.abs_tol = 1e-10;
        s.rel_tol = 1e-8;
    }
    auto sin2 = [tau](double l) {
        const double v = std::sin(0.5 * tau * l);
        return v * v;
    };
    const double period = pi / tau;
    auto lobes = [&](double hi) {
        std::vector<double> b;
        const int n = static_cast<int>(std::min(2000.0, std::floor(hi / period)));
        for (int k = 1; k <= n; ++k) b.push_back(k * period);
        return b;
    };
    if (std::isfinite(sh.radius) || sh.tail.decay == BoundDriven::Decay::Exponential) {
        // exponential decay leaves nothing measurable beyond 40 / rate
        const double hi = std::isfinite(sh.radius) ? sh.radius : 40.0 / sh.tail.rate;
        q2 += 2 * sq_integral(tf, sin2, 0.0, hi, lobes(hi), s).value;
        return std::sqrt(std::max(q2, 0.0));
    }
    // algebraic tail: body lobe by lobe, then sin^2 = (1 - cos)/2 against the smooth tail
    double lam = std::max(64.0, 40 * period);
    for (const auto& sg : sh.singular_sq) lam = std::max(lam, 4 * std::abs(sg.at));
    auto body = sq_integral(tf, sin2, 0.0, lam, lobes(lam), s);
    auto one = [](double) { return 1.0; };
    auto flat = sq_integral(tf, one, lam, kInf, {}, with_tail(s, sh, lam, false));
    auto osc = integrate_oscillatory([&](double l) { return std::norm(hstar_regularized(tf, l)); }, tau, lam, s);
    q2 += 2 * (body.value + 0.5 * flat.value - 0.5 * osc.value.real());
    return std::sqrt(std::max(q2, 0.0));
}

LogWeightReport log_weight_integral(const TransferFunction& tf,
                                    const std::optional<NoiseModel>& noise, double beta,
                                    LogPower power) {
    validate(tf);
    if (noise) validate(*noise);
    if (!(beta > 0)) throw ConfigError("log weight: beta must be positive");
    const double p = power == LogPower::OnePlusBeta ? 1 + beta : 4 + beta;
    const RealFn lw = [p](double l) { return std::pow(std::log1p(std::abs(l)), p); };
    const auto sh = spectral_shape(tf);
    QuadratureSpec s = tight();
    s.rel_tol = 1e-9;
    s.max_panels = 20000;
    if (hstar_form(tf) == HstarForm::NumericWithAsymptote) s.abs_tol = 1e-10;

    auto noise_part = [&](double lo) -> QuadratureResult<double> {
        Domain nd = noise_domain(*noise);
        if (nd.hi <= lo) return {};
        Domain d{lo, nd.hi, {}, {}};
        for (double k : nd.breakpoints)
            if (k > lo && k < nd.hi) d.breakpoints.push_back(k);
        QuadratureSpec ns = s;
        const bool expo = noise->family == NoiseFamily::ExpAbs || noise->family == NoiseFamily::GaussBell;
        ns.tail = BoundDriven{expo ? BoundDriven::Decay::Exponential : BoundDriven::Decay::Algebraic,
                              expo ? std::min(noise->mu, 1.0) : 1.5, std::max(lo, 1.0)};
        return integrate_1d([&](double l) { return lw(l) * eval_g(*noise, l); }, d, ns);
    };
    // mass of the integrand beyond `cut`
    auto beyond = [&](double cut) {
        double v = 2 * sq_integral(tf, lw, cut, kInf, {}, with_tail(s, sh, cut, true)).value;
        if (noise) v += 2 * noise_part(cut).value;
        return v;
    };

    LogWeightReport out;
    auto h = sq_integral(tf, lw, 0.0, kInf, {}, with_tail(s, sh, sh.tail.scale, true));
    out.value = 2 * h.value;
    out.converged = h.converged;
    if (noise) {
        auto r = noise_part(0.0);
        out.value += 2 * r.value;
        out.converged = out.converged && r.converged;
    }
    // the tail must shrink decade over decade
    const double t2 = beyond(1e2), t3 = beyond(1e3), t4 = beyond(1e4);
    out.tail_bound = t4;
    const bool shrinking = (t3 == 0 && t4 == 0) || (t3 < t2 && t4 < 0.9 * t3);
    out.finite = std::isfinite(out.value) && std::isfinite(t2) && shrinking && out.converged;
    return out;
}

double lipschitz_constant(const TransferFunction& tf, double alpha) {
    validate(tf);
    const auto r = lipschitz_alpha_range(tf);
    if (!(alpha > r.lo && alpha <= r.hi)) throw AlphaOutOfRange("alpha outside the admissible range");
    if (auto c = closed_lipschitz(tf, alpha)) return *c;
    // sup over a grid of |H(t) - H(s)| / |t - s|^alpha
    const bool half = support(tf) == Support::HalfLine;
    const double lo = half ? 0.0 : -20.0, hi = half ? 40.0 : 20.0;
    constexpr int nt = 8000, nd = 60;
    double best = 0;
    for (int j = 0; j < nd; ++j) {
        const double d = 1e-4 * std::pow(1e5, double(j) / (nd - 1));
        const double scale = std::pow(d, alpha);
        for (int i = 0; i <= nt; ++i) {
            const double t = lo + (hi - lo) * i / nt;
            best = std::max(best, std::abs(eval_H(tf, t + d) - eval_H(tf, t)) / scale);
        }
    }
    return best;
}

namespace {
const std::vector<std::pair<TransferKind, std::string>>& id_table() {
    static const std::vector<std::pair<TransferKind, std::string>> t{
        {TransferKind::OddCauchy, "odd-cauchy"},   {TransferKind::OneMinusCosOverT, "one-minus-cos"},
        {TransferKind::LowPass, "low-pass"},       {TransferKind::BandPass, "band-pass"},
        {TransferKind::MultiBand, "multi-band"},   {TransferKind::PowerTail, "power-tail"},
        {TransferKind::ResonantCos, "resonant-cos"}, {TransferKind::ResonantSin, "resonant-sin"}};
    return t;
}
}  // namespace

std::string to_string(TransferKind k) {
    for (const auto& [kind, id] : id_table())
        if (kind == k) return id;
    return "unknown";
}

TransferKind parse_transfer_kind(const std::string& id) {
    for (const auto& [kind, name] : id_table())
        if (name == id) return kind;
    throw ConfigError("unknown transfer function '" + id + "'");
}

const std::vector<std::string>& transfer_kind_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& [k, id] : id_table()) v.push_back(id);
        return v;
    }();
    return ids;
}

}  // namespace xcorr
