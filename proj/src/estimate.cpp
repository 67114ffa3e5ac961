#include "xcorr/estimate.hpp"

#include <cmath>
#include <sstream>

#include "xcorr/errors.hpp"
#include "xcorr/theory.hpp"

namespace xcorr {
namespace {

long long grid_offset(const GridSpec& g, double t) {
    const double k = (t - g.t_min) / g.h;
    const double r = std::round(k);
    if (std::abs(k - r) > 1e-6) throw WindowMismatch("correlogram: paths are not on a common lattice");
    return static_cast<long long>(r);
}

std::string cache_key(const TransferFunction& tf, const SpectralModel& m, const std::vector<double>& grid) {
    std::ostringstream os;
    os.precision(17);
    os << static_cast<int>(tf.kind) << ' ' << tf.mu << ' ' << tf.nu << ' ' << tf.gamma;
    for (const auto& b : tf.bands) os << ' ' << b.lo << ':' << b.hi;
    os << '|' << static_cast<int>(m.family) << ' ' << m.c << ' ' << m.delta << '|';
    for (double t : grid) os << t << ' ';
    return os.str();
}

}  // namespace

double snap_lag(double tau, double h) {
    if (!std::isfinite(tau)) throw TauOffGrid("lag is not finite");
    const double k = tau / h;
    const double r = std::round(k);
    if (std::abs(std::abs(k - r) - 0.5) < 1e-9) throw TauOffGrid("lag sits halfway between grid points");
    return r * h;
}

EstimationResult correlogram(const SampledPath& x, const SampledPath& y, double T, double c,
                             const std::vector<double>& tau_grid) {
    const double h = x.grid.h;
    if (std::abs(y.grid.h - h) > 1e-12 * h) throw WindowMismatch("correlogram: x and y steps differ");
    if (!(T > 0) || !(c > 0)) throw ConfigError("correlogram: T and c must be positive");
    const double nT = T / h;
    const long long N = std::llround(nT);
    if (std::abs(nT - static_cast<double>(N)) > 1e-9 * std::max(1.0, nT))
        throw WindowMismatch("correlogram: T is not a multiple of the grid step");
    const long long x0 = grid_offset(x.grid, 0.0);
    if (x0 < 0 || x0 + N > static_cast<long long>(x.grid.n_points))
        throw WindowMismatch("correlogram: x does not cover [0, T)");
    const long long y0 = grid_offset(y.grid, 0.0);

    EstimationResult r;
    r.T = T;
    r.c = c;
    for (double tau : tau_grid) {
        const double snapped = snap_lag(tau, h);
        const long long lag = std::llround(snapped / h);
        if (y0 + lag < 0 || y0 + lag + N > static_cast<long long>(y.grid.n_points))
            throw WindowMismatch("correlogram: y does not cover [tau, T + tau)");
        const double* xp = x.values.data() + x0;
        const double* yp = y.values.data() + y0 + lag;
        double s = 0;
        for (long long i = 0; i < N; ++i) s += yp[i] * xp[i];
        r.tau_grid.push_back(snapped);
        r.h_hat.push_back(s * h / (c * T));
    }
    return r;
}

std::vector<double> ExpectationCache::get(const TransferFunction& tf, const SpectralModel& model,
                                          const std::vector<double>& tau_grid, const QuadratureSpec& spec) {
    const auto key = cache_key(tf, model, tau_grid);
    {
        std::lock_guard lock(mutex_);
        if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    }
    std::vector<double> v;
    for (double t : tau_grid) v.push_back(expected_estimate(tf, model, t, spec).value);
    std::lock_guard lock(mutex_);
    cache_.emplace(key, v);
    return v;
}

EstimationResult center_and_scale(EstimationResult r, const TransferFunction& tf, const SpectralModel& model,
                                  CenterMode mode, const QuadratureSpec& spec, ExpectationCache* cache) {
    const double s = std::sqrt(r.T);
    std::vector<double> out(r.h_hat.size());
    if (mode == CenterMode::Z) {
        ExpectationCache local;
        const auto mean = (cache ? *cache : local).get(tf, model, r.tau_grid, spec);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * (r.h_hat[i] - mean[i]);
        r.z_values = std::move(out);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * (r.h_hat[i] - eval_H(tf, r.tau_grid[i]));
        r.w_values = std::move(out);
    }
    return r;
}

}  // namespace xcorr
