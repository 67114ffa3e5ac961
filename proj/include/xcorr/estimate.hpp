#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "xcorr/quadrature.hpp"
#include "xcorr/simulate.hpp"
#include "xcorr/spectral_models.hpp"
#include "xcorr/theory.hpp"
#include "xcorr/transfer_catalog.hpp"

namespace xcorr {

struct EstimationResult {
    std::vector<double> tau_grid;  // lags snapped to the sampling grid
    std::vector<double> h_hat;
    double T = 0.0;
    double c = 1.0;
    std::optional<std::vector<double>> z_values;  // sqrt(T) (H_hat - E H_hat)
    std::optional<std::vector<double>> w_values;  // sqrt(T) (H_hat - H)
};

// Snaps tau to the nearest multiple of h; throws TauOffGrid for non-finite tau or an
// exact half-step tie.
double snap_lag(double tau, double h);

// H_hat(tau) = (1 / (c T)) h sum_{t_i in [0, T)} Y(t_i + tau) X(t_i)
EstimationResult correlogram(const SampledPath& x, const SampledPath& y, double T, double c,
                             const std::vector<double>& tau_grid);

enum class CenterMode { Z, W };

// E H_hat on a lag grid, computed once per (transfer function, model, grid).
class ExpectationCache {
public:
    std::vector<double> get(const TransferFunction& tf, const SpectralModel& model,
                            const std::vector<double>& tau_grid, const QuadratureSpec& spec);

private:
    std::mutex mutex_;
    std::map<std::string, std::vector<double>> cache_;
};

EstimationResult center_and_scale(EstimationResult result, const TransferFunction& tf,
                                  const SpectralModel& model, CenterMode mode,
                                  const QuadratureSpec& spec = default_theory_spec(),
                                  ExpectationCache* cache = nullptr);

}  // namespace xcorr
