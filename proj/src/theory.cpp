#include "xcorr/theory.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "xcorr/errors.hpp"

namespace xcorr {
namespace {

using std::numbers::pi;

// int_0^inf Re[wA |H*|^2 e^{i dA l} + wB (H*)^2 e^{i sB l}] dl
QuadratureResult<double> spectral_fourier(const TransferFunction& tf, double wA, double dA, double wB,
                                          double sB, const QuadratureSpec& spec) {
    const auto sh = spectral_shape(tf);
    auto J = [=](double l, cplx h) {
        double v = 0;
        if (wA != 0) v += wA * std::norm(h) * std::cos(dA * l);
        if (wB != 0) v += wB * std::real(h * h * std::exp(cplx(0.0, sB * l)));
        return v;
    };
    const double wmax = std::max(wA != 0 ? std::abs(dA) : 0.0, wB != 0 ? std::abs(sB) : 0.0);
    auto lobes = [&](double hi) {
        std::vector<double> b;
        if (wmax == 0) return b;
        const double period = pi / wmax;
        const int n = static_cast<int>(std::min(2000.0, std::floor(hi / period)));
        for (int k = 1; k <= n; ++k) b.push_back(k * period);
        return b;
    };
    QuadratureSpec s = spec;
    s.max_panels = std::max(spec.max_panels, 20000);
    if (std::isfinite(sh.radius)) return integrate_spectral(tf, J, 0.0, sh.radius, lobes(sh.radius), s);
    if (sh.tail.decay == BoundDriven::Decay::Exponential) {
        const double hi = 40.0 / sh.tail.rate;
        return integrate_spectral(tf, J, 0.0, hi, lobes(hi), s);
    }
    // algebraic decay: lobes up to lam, then each term on its own beyond it
    double lam = 64.0;
    for (double w : {wA != 0 ? std::abs(dA) : 0.0, wB != 0 ? std::abs(sB) : 0.0})
        if (w > 0) lam = std::max(lam, 40 * pi / w);
    for (const auto& sg : sh.singular_sq) lam = std::max(lam, 4 * std::abs(sg.at));
    auto out = integrate_spectral(tf, J, 0.0, lam, lobes(lam), s);
    QuadratureSpec ts = s;
    ts.tail = BoundDriven{BoundDriven::Decay::Algebraic, sh.tail.rate, lam};
    auto add = [&](const QuadratureResult<double>& r) {
        out.value += r.value;
        out.error_estimate += r.error_estimate;
        out.converged = out.converged && r.converged;
    };
    auto add_c = [&](const QuadratureResult<cplx>& r) {
        out.value += r.value.real();
        out.error_estimate += r.error_estimate;
        out.converged = out.converged && r.converged;
    };
    if (wA != 0) {
        auto amp = [&](double l) { return wA * std::norm(hstar_regularized(tf, l)); };
        if (dA == 0) add(integrate_spectral(tf, [&](double, cplx h) { return wA * std::norm(h); }, lam, kInf, {}, ts));
        else add_c(integrate_oscillatory(amp, -dA, lam, s));
    }
    if (wB != 0) {
        auto amp = [&](double l) {
            const cplx h = hstar_regularized(tf, l);
            return wB * h * h;
        };
        if (sB == 0) add(integrate_spectral(tf, [&](double, cplx h) { return wB * std::real(h * h); }, lam, kInf, {}, ts));
        else add_c(integrate_oscillatory(amp, -sB, lam, s));
    }
    return out;
}

double noise_shift(const std::optional<ScaledNoise>& noise, double lag) {
    if (!noise) return 0.0;
    validate(noise->model);
    return eval_noise_K(noise->model, lag) / noise->c;
}

}  // namespace

double fejer_kernel(double T, double lambda) {
    if (lambda == 0.0) return T / (2 * pi);
    const double s = std::sin(0.5 * T * lambda);
    return 2 * s * s / (pi * T * lambda * lambda);
}

double fejer_tail_mass(double T) {
    // 2 int_1^inf (1 - cos T l) / (pi T l^2) dl
    QuadratureSpec s;
    s.abs_tol = 1e-14;
    s.rel_tol = 1e-12;
    auto osc = integrate_oscillatory([](double l) { return 1 / (l * l); }, T, 1.0, s);
    return 2 / (pi * T) * (1 - osc.value.real());
}

QuadratureSpec default_theory_spec() {
    QuadratureSpec s;
    s.abs_tol = 1e-11;
    s.rel_tol = 1e-10;
    s.max_panels = 4000;
    return s;
}

QuadratureResult<double> limit_covariance(const TransferFunction& tf,
                                          const std::optional<ScaledNoise>& noise, double tau1,
                                          double tau2, const QuadratureSpec& spec) {
    validate(tf);
    auto r = spectral_fourier(tf, 1.0, tau1 - tau2, 1.0, tau1 + tau2, spec);
    r.value = r.value / pi + noise_shift(noise, tau1 - tau2);
    r.error_estimate /= pi;
    return r;
}

QuadratureResult<double> limit_covariance_reduced(const TransferFunction& tf,
                                                  const std::optional<ScaledNoise>& noise,
                                                  double tau1, double tau2,
                                                  const QuadratureSpec& spec) {
    validate(tf);
    const auto p = parity(tf);
    if (p == Parity::None) throw ConfigError("reduced covariance needs an even or odd H");
    const auto sh = spectral_shape(tf);
    const double hi = std::isfinite(sh.radius) ? sh.radius : 40.0 / sh.tail.rate;
    const double wmax = std::abs(tau1) + std::abs(tau2);
    std::vector<double> lobes;
    if (wmax > 0)
        for (int k = 1; k * pi / wmax < hi && k <= 2000; ++k) lobes.push_back(k * pi / wmax);
    QuadratureSpec s = spec;
    s.max_panels = std::max(spec.max_panels, 20000);
    auto r = integrate_spectral(
        tf,
        [&](double l, cplx h) {
            const double w = p == Parity::Even ? std::cos(tau1 * l) * std::cos(tau2 * l)
                                               : std::sin(tau1 * l) * std::sin(tau2 * l);
            return std::norm(h) * w;
        },
        0.0, hi, lobes, s);
    r.value = 2 / pi * r.value + noise_shift(noise, tau1 - tau2);
    r.error_estimate *= 2 / pi;
    return r;
}

QuadratureResult<double> finiteT_covariance(const TransferFunction& tf, const SpectralModel& model,
                                            const std::optional<NoiseModel>& noise, double T,
                                            double tau1, double tau2, const QuadratureSpec& spec) {
    validate(tf);
    validate(model);
    if (noise) validate(*noise);
    if (!(T > 0)) throw ConfigError("covariance: T must be positive");
    const double c = model.c;
    const double d = tau1 - tau2;
    const auto sh = spectral_shape(tf);

    auto F = [&](double l1, double l2) -> cplx {
        const double f1 = eval_f(model, l1), f2 = eval_f(model, l2);
        if (f1 == 0) return 0.0;
        const cplx h2 = hstar_regularized(tf, l2);
        cplx v = std::exp(cplx(0.0, d * l2)) * (std::norm(h2) * f2 + (noise ? eval_g(*noise, l2) : 0.0));
        if (f2 != 0 && h2 != cplx{}) {
            const cplx h1 = hstar_regularized(tf, l1);
            v += std::exp(cplx(0.0, tau1 * l1 + tau2 * l2)) * h1 * h2 * f2;
        }
        return v * f1;
    };

    FejerLayout layout;
    double radius = sh.radius;
    if (noise) radius = std::max(radius, noise_domain(*noise).hi);
    layout.inner = Domain{-radius, radius, {}, {}};
    auto add_kinks = [&](const std::vector<double>& k) { layout.kinks.insert(layout.kinks.end(), k.begin(), k.end()); };
    add_kinks(sh.kinks);
    add_kinks(spectral_kinks(model));
    if (noise) add_kinks(noise_kinks(*noise));
    for (const auto& sg : sh.singular_sq) {
        layout.inner.singularities.push_back(sg);
        layout.moving.push_back({sg.at, 0.5 * sg.exponent});
    }
    std::sort(layout.kinks.begin(), layout.kinks.end());
    layout.kinks.erase(std::unique(layout.kinks.begin(), layout.kinks.end()), layout.kinks.end());

    QuadratureSpec s = spec;
    s.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0, std::max(1.0, std::sqrt(model.delta))};
    auto r = integrate_2d_fejer(F, T, layout, s);
    QuadratureResult<double> out;
    const double scale = 2 * pi / (c * c);
    out.value = scale * r.value.real();
    const double im = scale * std::abs(r.value.imag());
    out.error_estimate = scale * r.error_estimate + im;
    out.converged = r.converged && im <= std::max(1e-8, 10 * scale * r.error_estimate);
    out.panels_used = r.panels_used;
    return out;
}

namespace {
template <typename Cell>
CovarianceSurface fill_surface(const std::vector<double>& grid, Cell cell) {
    CovarianceSurface out;
    out.tau_grid = grid;
    const auto n = static_cast<Eigen::Index>(grid.size());
    out.values.resize(n, n);
    out.error_estimates.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            auto r = cell(grid[i], grid[j]);
            out.values(i, j) = out.values(j, i) = r.value;
            out.error_estimates(i, j) = out.error_estimates(j, i) = r.error_estimate;
            out.converged = out.converged && r.converged;
        }
    return out;
}
}  // namespace

CovarianceSurface limit_surface(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                                const std::vector<double>& tau_grid, const QuadratureSpec& spec) {
    return fill_surface(tau_grid, [&](double a, double b) { return limit_covariance(tf, noise, a, b, spec); });
}

CovarianceSurface finiteT_surface(const TransferFunction& tf, const SpectralModel& model,
                                  const std::optional<NoiseModel>& noise, double T,
                                  const std::vector<double>& tau_grid, const QuadratureSpec& spec) {
    auto s = fill_surface(tau_grid, [&](double a, double b) {
        return finiteT_covariance(tf, model, noise, T, a, b, spec);
    });
    s.finite_T = true;
    s.T = T;
    return s;
}

double min_eigenvalue(const CovarianceSurface& s) {
    if (s.values.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s.values, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

namespace {

// (1/c) int K(s) [H(tau - s) - H(tau)] ds
QuadratureResult<double> smoothing_defect(const TransferFunction& tf, const SpectralModel& model,
                                          double tau, const QuadratureSpec& spec) {
    const double w = 1 / std::sqrt(model.delta);
    const double htau = eval_H(tf, tau);
    Domain d{-kInf, kInf, {}, {}};
    for (int k = -16; k <= 16; ++k) d.breakpoints.push_back(k * w);
    if (support(tf) == Support::HalfLine) d.breakpoints.push_back(tau);
    std::sort(d.breakpoints.begin(), d.breakpoints.end());
    d.breakpoints.erase(std::unique(d.breakpoints.begin(), d.breakpoints.end()), d.breakpoints.end());
    QuadratureSpec s = spec;
    s.max_panels = std::max(spec.max_panels, 20000);
    s.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0, 16 * w};
    auto r = integrate_1d([&](double x) { return eval_K(model, x) * (eval_H(tf, tau - x) - htau); }, d, s);
    r.value /= model.c;
    r.error_estimate /= model.c;
    return r;
}

}  // namespace

QuadratureResult<double> expected_estimate(const TransferFunction& tf, const SpectralModel& model,
                                           double tau, const QuadratureSpec& spec) {
    validate(tf);
    validate(model);
    auto r = smoothing_defect(tf, model, tau, spec);
    r.value += 2 * pi * eval_f(model, 0.0) / model.c * eval_H(tf, tau);
    return r;
}

BiasCurve bias_curve(const TransferFunction& tf, const SpectralModel& model,
                     const std::vector<double>& tau_grid, std::optional<double> T,
                     const QuadratureSpec& spec) {
    validate(tf);
    validate(model);
    if (T && !(*T > 0)) throw ConfigError("bias: T must be positive");
    BiasCurve out;
    out.tau_grid = tau_grid;
    out.sqrtT_scale = T;
    const double flat = 2 * pi * eval_f(model, 0.0) / model.c - 1;
    for (double tau : tau_grid) {
        auto r = smoothing_defect(tf, model, tau, spec);
        double v = r.value + flat * eval_H(tf, tau);
        if (T) v *= std::sqrt(*T);
        out.values.push_back(v);
        out.converged = out.converged && r.converged;
    }
    return out;
}

double uniform_bound(const TransferFunction& tf, const SpectralModel& model,
                     const std::optional<NoiseModel>& noise) {
    validate(model);
    const double sf = sup_f(model);
    const double c = model.c;
    const double g1 = noise ? noise_l1_norm(*noise) : 0.0;
    return 2 * pi / (c * c) * sf * (2 * sf * l2_norms(tf).norm_Hstar_sq + g1);
}

PseudometricCheck pseudometric_bound_check(const TransferFunction& tf, const SpectralModel& model,
                                           const std::optional<NoiseModel>& noise, double T,
                                           double tau1, double tau2, const QuadratureSpec& spec) {
    PseudometricCheck out;
    if (tau1 == tau2) return out;
    const double c11 = finiteT_covariance(tf, model, noise, T, tau1, tau1, spec).value;
    const double c12 = finiteT_covariance(tf, model, noise, T, tau1, tau2, spec).value;
    const double c22 = finiteT_covariance(tf, model, noise, T, tau2, tau2, spec).value;
    out.rho = std::sqrt(std::max(0.0, c11 - 2 * c12 + c22));
    const double sf = sup_f(model);
    const double hs = l2_norms(tf).norm_Hstar_sq;
    const double sigma = pseudometric_q(tf, noise, std::abs(tau1 - tau2));
    if (noise)
        out.bound = 4 * std::sqrt(pi) * std::max(sf, 1.0) / model.c *
                    std::pow(hs + noise_l1_norm(*noise), 0.25) * std::sqrt(sigma);
    else
        out.bound = 4 * std::sqrt(pi) * sf / model.c * std::pow(hs, 0.25) * std::sqrt(sigma);
    out.ok = out.rho <= out.bound * (1 + 1e-6);
    return out;
}

std::vector<int> covering_numbers_indexed(const std::function<double(int, int)>& dist, int n,
                                          const std::vector<double>& eps_list) {
    std::vector<int> out;
    std::vector<char> covered(n);
    for (double eps : eps_list) {
        std::fill(covered.begin(), covered.end(), 0);
        const double reach = eps * (1 + 1e-12);  // closed balls, up to round-off
        int count = 0;
        for (int p = 0; p < n; ++p) {
            if (covered[p]) continue;
            // centre as far right as the leftmost uncovered point allows
            int centre = p;
            while (centre + 1 < n && dist(p, centre + 1) <= reach) ++centre;
            for (int j = 0; j < n; ++j)
                if (!covered[j] && dist(centre, j) <= reach) covered[j] = 1;
            covered[p] = 1;
            ++count;
        }
        out.push_back(count);
    }
    return out;
}

std::vector<int> covering_numbers(const Pseudometric& d, double a, double b,
                                  const std::vector<double>& eps_list, int grid_points) {
    if (grid_points < 2) throw ConfigError("covering: need at least two grid points");
    const double h = (b - a) / (grid_points - 1);
    return covering_numbers_indexed([&](int i, int j) { return d(a + i * h, a + j * h); }, grid_points,
                                    eps_list);
}

Eigen::MatrixXd limit_distance_matrix(const TransferFunction& tf,
                                      const std::optional<ScaledNoise>& noise, double a, double b,
                                      int n, Eigen::VectorXd* diag_cov) {
    validate(tf);
    const double h = (b - a) / (n - 1);
    QuadratureSpec spec = default_theory_spec();
    spec.abs_tol = 1e-12;
    // C(i, j) = diff(i - j) + sum(i + j)
    Eigen::VectorXd diff(n), sum(2 * n - 1);
    for (int k = 0; k < n; ++k)
        diff(k) = spectral_fourier(tf, 1.0, k * h, 0.0, 0.0, spec).value / pi + noise_shift(noise, k * h);
    for (int m = 0; m < 2 * n - 1; ++m)
        sum(m) = spectral_fourier(tf, 0.0, 0.0, 1.0, 2 * a + m * h, spec).value / pi;
    Eigen::VectorXd diag(n);
    for (int i = 0; i < n; ++i) diag(i) = diff(0) + sum(2 * i);
    Eigen::MatrixXd dist(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double cij = diff(std::abs(i - j)) + sum(i + j);
            dist(i, j) = std::sqrt(std::max(0.0, diag(i) + diag(j) - 2 * cij));
        }
    if (diag_cov) *diag_cov = diag;
    return dist;
}

DudleyReport dudley_entropy(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                            double a, double b, int n) {
    if (!(b > a)) throw ConfigError("dudley: empty interval");
    Eigen::VectorXd diag;
    const Eigen::MatrixXd dist = limit_distance_matrix(tf, noise, a, b, n, &diag);
    DudleyReport r;
    r.diameter = dist.maxCoeff();
    r.max_std = std::sqrt(std::max(0.0, diag.maxCoeff()));
    r.eps0 = std::max(r.diameter, r.max_std);
    if (r.diameter == 0) return r;
    constexpr int K = 48;
    for (int k = 0; k < K; ++k) r.eps_lattice.push_back(r.diameter * std::pow(1e-4, double(k) / (K - 1)));
    r.covering = covering_numbers_indexed([&](int i, int j) { return dist(i, j); }, n, r.eps_lattice);
    // N is non-increasing in eps, so each lattice cell takes its left-end entropy
    double I = 0;
    for (int k = 0; k + 1 < K; ++k)
        I += (r.eps_lattice[k] - r.eps_lattice[k + 1]) * std::sqrt(std::log(r.covering[k + 1]));
    I += r.eps_lattice.back() * std::sqrt(std::log(r.covering.back()));
    r.entropy_integral = I / std::sqrt(2.0);
    return r;
}

double sup_tail_bound(const DudleyReport& r, double x) {
    if (x < 8 * r.entropy_integral) throw ValidityRegion("tail bound needs x >= 8 I(eps0)");
    const double e = x - std::sqrt(8 * x * r.entropy_integral);
    return std::min(1.0, 2 * std::exp(-e * e / (2 * r.eps0 * r.eps0)));
}

DudleyReport dudley_and_tail(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                             double a, double b, double x, int n) {
    auto r = dudley_entropy(tf, noise, a, b, n);
    r.tail_bound = sup_tail_bound(r, x);
    return r;
}

}  // namespace xcorr
