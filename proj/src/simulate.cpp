#include "xcorr/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "xcorr/errors.hpp"

namespace xcorr {
namespace {

using std::numbers::pi;

bool same_step(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); }

// Offset of t on grid g, if t is a grid node.
std::optional<std::size_t> node_index(const GridSpec& g, double t) {
    const double k = (t - g.t_min) / g.h;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-6 || r < 0 || r >= static_cast<double>(g.n_points)) return std::nullopt;
    return static_cast<std::size_t>(r);
}

std::vector<double> circulant_eigenvalues(const std::function<double(double)>& cov, double h,
                                          std::size_t m) {
    fft::cvec row(m);
    for (std::size_t j = 0; j < m; ++j) row[j] = cov(static_cast<double>(std::min(j, m - j)) * h);
    fft::forward(row);
    std::vector<double> eig(m);
    for (std::size_t j = 0; j < m; ++j) eig[j] = row[j].real();
    return eig;
}

}  // namespace

GridSpec make_grid(double t_min, double t_max, double h) {
    if (!(h > 0) || !std::isfinite(h)) throw ConfigError("grid: step must be positive");
    if (!(t_max >= t_min)) throw ConfigError("grid: t_max must not precede t_min");
    const double k = (t_max - t_min) / h;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-9 * std::max(1.0, k))
        throw ConfigError("grid: span is not a multiple of the step");
    return GridSpec{t_min, h, static_cast<std::size_t>(r) + 1};
}

double default_step(const SpectralModel& m, double tol) {
    validate(m);
    auto aliasing = [&](double h) {
        const double w = 2 * pi / h;
        double s = 0;
        constexpr int J = 20000;
        for (int j = 1; j <= J; ++j) {
            const double v = eval_f(m, j * w);
            s += v;
            if (v < 1e-18 * m.c) break;
            if (j == J) s += v * J;  // algebraic spectra: tail of sum j^-2
        }
        return 2 * 2 * pi * s / m.c;
    };
    double h = 1.0 / 32;  // largest power of two below 0.05
    while (aliasing(h) > tol && h > 1e-9) h /= 2;
    return h;
}

double truncation_tail(const TransferFunction& tf, double radius) {
    validate(tf);
    const double total = l2_norms(tf).norm_H_sq;
    const bool half = support(tf) == Support::HalfLine;
    Domain d{0.0, radius, {}, {}};
    const double step = std::max(0.5, radius / 4000);
    for (double b = step; b < radius; b += step) d.breakpoints.push_back(b);
    QuadratureSpec s;
    s.abs_tol = 1e-14;
    s.rel_tol = 1e-12;
    s.max_panels = 100000;
    auto inner = integrate_1d([&](double t) { return std::pow(eval_H(tf, t), 2); }, d, s);
    const double kept = half ? inner.value : 2 * inner.value;
    return std::sqrt(std::max(0.0, total - kept));
}

Truncation default_truncation(const TransferFunction& tf, double cap, double rel) {
    if (!(cap > 0)) throw ConfigError("truncation: cap must be positive");
    const double target = rel * std::sqrt(l2_norms(tf).norm_H_sq);
    Truncation t;
    if (target == 0) return t;
    double hi = std::min(1.0, cap);
    while (truncation_tail(tf, hi) > target && hi < cap) hi = std::min(2 * hi, cap);
    if (truncation_tail(tf, hi) > target) {
        t.radius = cap;
        t.capped = true;
    } else {
        double lo = hi == std::min(1.0, cap) ? 0.0 : hi / 2;
        for (int it = 0; it < 30 && hi - lo > 1e-3 * hi; ++it) {
            const double mid = 0.5 * (lo + hi);
            (truncation_tail(tf, mid) > target ? lo : hi) = mid;
        }
        t.radius = hi;
    }
    t.tail_l2 = truncation_tail(tf, t.radius);
    t.rel_tail = t.tail_l2 / std::sqrt(l2_norms(tf).norm_H_sq);
    return t;
}

CirculantSynth::CirculantSynth(const std::function<double(double)>& cov, const GridSpec& grid)
    : grid_(grid) {
    const std::size_t n = grid.n_points;
    std::size_t m = fft::next_pow2(std::max<std::size_t>(2, 2 * (n - 1)));
    std::vector<double> eig = circulant_eigenvalues(cov, grid.h, m);
    for (;;) {
        const double top = *std::max_element(eig.begin(), eig.end());
        const double low = *std::min_element(eig.begin(), eig.end());
        if (low >= -1e-10 * top || doublings_ == 6) break;
        m *= 2;
        ++doublings_;
        eig = circulant_eigenvalues(cov, grid.h, m);
    }
    double neg = 0, all = 0;
    for (double& v : eig) {
        all += std::abs(v);
        if (v < 0) {
            neg -= v;
            v = 0;
        }
    }
    clipped_ = all > 0 ? neg / all : 0.0;
    if (clipped_ > 1e-6) throw EmbeddingFailure("circulant embedding: clipped mass above 1e-6");
    scale_.resize(m);
    for (std::size_t j = 0; j < m; ++j) scale_[j] = std::sqrt(eig[j] / static_cast<double>(m));
}

fft::cvec CirculantSynth::draw_spectrum(const SeedLineage& lineage) const {
    auto eng = make_engine(lineage);
    std::normal_distribution<double> normal;
    fft::cvec a(scale_.size());
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double re = normal(eng);
        const double im = normal(eng);
        a[j] = scale_[j] * std::complex<double>(re, im);
    }
    return a;
}

SampledPath CirculantSynth::sample(const SeedLineage& lineage) const {
    auto a = draw_spectrum(lineage);
    fft::forward(a);
    SampledPath p{grid_, std::vector<double>(grid_.n_points), lineage};
    for (std::size_t i = 0; i < grid_.n_points; ++i) p.values[i] = a[i].real();
    return p;
}

SampledPath synth_stationary_gaussian(const SpectralModel& m, const GridSpec& grid,
                                      const SeedLineage& lineage) {
    validate(m);
    return CirculantSynth([&](double t) { return eval_K(m, t); }, grid).sample(lineage);
}

SampledPath synth_stationary_gaussian(const NoiseModel& m, const GridSpec& grid,
                                      const SeedLineage& lineage) {
    validate(m);
    return CirculantSynth([&](double t) { return eval_noise_K(m, t); }, grid).sample(lineage);
}

ResponseTaps response_taps(const TransferFunction& tf, double h, double trunc_radius) {
    validate(tf);
    if (!(trunc_radius >= 0)) throw ConfigError("response: truncation radius must be nonnegative");
    ResponseTaps r;
    r.h = h;
    r.K = static_cast<int>(std::floor(trunc_radius / h + 1e-9));
    r.trunc_radius = r.K * h;
    r.tail_l2 = truncation_tail(tf, r.trunc_radius);
    r.taps.assign(2 * static_cast<std::size_t>(r.K) + 1, 0.0);
    const bool half = support(tf) == Support::HalfLine;
    for (int k = half ? 0 : -r.K; k <= r.K; ++k) r.taps[k + r.K] = h * eval_H(tf, k * h);
    if (half) r.taps[r.K] *= 0.5;
    return r;
}

SampledPath system_response(const TransferFunction& tf, const SampledPath& x, const SampledPath* noise,
                            double trunc_radius, std::optional<GridSpec> out, double* tail_l2) {
    const double h = x.grid.h;
    const auto taps = response_taps(tf, h, trunc_radius);
    const bool half = support(tf) == Support::HalfLine;
    const std::size_t lo_margin = taps.K, hi_margin = half ? 0 : taps.K;
    if (x.grid.n_points <= lo_margin + hi_margin) throw InsufficientWindow("response: input shorter than the kernel");
    if (!out) out = GridSpec{x.grid.at(lo_margin), h, x.grid.n_points - lo_margin - hi_margin};
    if (!same_step(out->h, h)) throw InsufficientWindow("response: output step differs from the input step");
    const auto start = node_index(x.grid, out->t_min);
    if (!start || *start < lo_margin || *start + out->n_points + hi_margin > x.grid.n_points)
        throw InsufficientWindow("response: input does not cover the output window plus the kernel reach");

    // linear convolution of the needed input segment with the taps
    const std::size_t seg0 = *start - lo_margin;
    const std::size_t seg_len = out->n_points + 2 * static_cast<std::size_t>(taps.K);
    const std::size_t L = fft::next_pow2(seg_len + taps.taps.size());
    fft::cvec xs(L), ws(L);
    for (std::size_t p = 0; p < seg_len && seg0 + p < x.grid.n_points; ++p) xs[p] = x.values[seg0 + p];
    for (std::size_t j = 0; j < taps.taps.size(); ++j) ws[j] = taps.taps[j];
    fft::forward(xs);
    fft::forward(ws);
    for (std::size_t j = 0; j < L; ++j) xs[j] *= ws[j];
    fft::inverse(xs);

    SampledPath y{*out, std::vector<double>(out->n_points), x.lineage};
    y.lineage.stream = "response";
    for (std::size_t i = 0; i < out->n_points; ++i)
        y.values[i] = xs[i + 2 * static_cast<std::size_t>(taps.K)].real() / static_cast<double>(L);
    if (noise) {
        const auto ns = node_index(noise->grid, out->t_min);
        if (!same_step(noise->grid.h, h) || !ns || *ns + out->n_points > noise->grid.n_points)
            throw InsufficientWindow("response: noise path does not cover the output window");
        for (std::size_t i = 0; i < out->n_points; ++i) y.values[i] += noise->values[*ns + i];
    }
    if (tail_l2) *tail_l2 = taps.tail_l2;
    return y;
}

SystemSimulator::SystemSimulator(const TransferFunction& tf, const SpectralModel& model,
                                 const std::optional<NoiseModel>& noise, const GridSpec& out,
                                 double trunc_radius, Drive drive)
    : out_(out),
      input_(
          [&] {
              validate(model);
              return std::function<double(double)>([model](double t) { return eval_K(model, t); });
          }(),
          [&] {
              const int K = static_cast<int>(std::floor(trunc_radius / out.h + 1e-9));
              const std::size_t lo = K, hi = support(tf) == Support::HalfLine ? 0 : K;
              return GridSpec{out.t_min - K * out.h, out.h, out.n_points + lo + hi};
          }()),
      taps_(response_taps(tf, out.h, trunc_radius)),
      offset_(static_cast<std::size_t>(taps_.K)),
      drive_(drive),
      var0_(eval_K(model, 0.0)) {
    if (noise) {
        validate(*noise);
        const NoiseModel nm = *noise;
        noise_.emplace([nm](double t) { return eval_noise_K(nm, t); }, out);
    }
    // taps laid on the circle at index k mod m, then inverse-transformed so that
    // Re F(a * kernel_hat) is the circular convolution of the taps with Re F(a)
    const std::size_t m = input_.embedding_size();
    kernel_hat_.assign(m, 0.0);
    for (int k = -taps_.K; k <= taps_.K; ++k) {
        const std::size_t idx = k >= 0 ? static_cast<std::size_t>(k) : m - static_cast<std::size_t>(-k);
        kernel_hat_[idx] += taps_.taps[k + taps_.K];
    }
    fft::inverse(kernel_hat_);
}

SystemSimulator::Draw SystemSimulator::draw(std::uint64_t master, std::uint64_t replicate) const {
    const SeedLineage in{master, replicate, "input"};
    const auto a = input_.draw_spectrum(in);
    const std::size_t m = a.size();
    const auto& ig = input_.grid();
    Draw d;
    d.x = SampledPath{ig, std::vector<double>(ig.n_points), in};
    d.y = SampledPath{out_, std::vector<double>(out_.n_points), SeedLineage{master, replicate, "response"}};

    fft::cvec xs = a;
    fft::forward(xs);
    if (drive_ == Drive::Gaussian) {
        fft::cvec ys(m);
        for (std::size_t j = 0; j < m; ++j) ys[j] = a[j] * kernel_hat_[j];
        fft::forward(ys);
        for (std::size_t i = 0; i < ig.n_points; ++i) d.x.values[i] = xs[i].real();
        for (std::size_t i = 0; i < out_.n_points; ++i) d.y.values[i] = ys[offset_ + i].real();
    } else {
        // centred square of the Gaussian path, rescaled to the same variance
        const double s = 1 / std::sqrt(2 * var0_);
        fft::cvec zs(m);
        for (std::size_t i = 0; i < m; ++i) zs[i] = (xs[i].real() * xs[i].real() - var0_) * s;
        for (std::size_t i = 0; i < ig.n_points; ++i) d.x.values[i] = zs[i].real();
        fft::forward(zs);
        // forward transform of the real taps is the conjugate of kernel_hat_
        for (std::size_t j = 0; j < m; ++j) zs[j] *= std::conj(kernel_hat_[j]);
        fft::inverse(zs);
        for (std::size_t i = 0; i < out_.n_points; ++i)
            d.y.values[i] = zs[offset_ + i].real() / static_cast<double>(m);
    }
    if (noise_) {
        const auto u = noise_->sample(SeedLineage{master, replicate, "noise"});
        for (std::size_t i = 0; i < out_.n_points; ++i) d.y.values[i] += u.values[i];
    }
    return d;
}

}  // namespace xcorr
