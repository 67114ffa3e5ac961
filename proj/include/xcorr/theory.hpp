#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "xcorr/quadrature.hpp"
#include "xcorr/spectral_models.hpp"
#include "xcorr/transfer_catalog.hpp"

namespace xcorr {

double fejer_kernel(double T, double lambda);
// mass of the Fejer kernel outside [-1, 1]
double fejer_tail_mass(double T);

// Observation noise together with the input intensity c it is measured against.
struct ScaledNoise {
    NoiseModel model;
    double c = 1.0;
};

QuadratureSpec default_theory_spec();

// Limit covariance in the general real form.
QuadratureResult<double> limit_covariance(const TransferFunction& tf,
                                          const std::optional<ScaledNoise>& noise, double tau1,
                                          double tau2, const QuadratureSpec& spec = default_theory_spec());
// cos-cos / sin-sin form for even / odd H; throws ConfigError for other kinds.
QuadratureResult<double> limit_covariance_reduced(const TransferFunction& tf,
                                                  const std::optional<ScaledNoise>& noise,
                                                  double tau1, double tau2,
                                                  const QuadratureSpec& spec = default_theory_spec());

QuadratureResult<double> finiteT_covariance(const TransferFunction& tf, const SpectralModel& model,
                                            const std::optional<NoiseModel>& noise, double T,
                                            double tau1, double tau2,
                                            const QuadratureSpec& spec = default_theory_spec());

struct CovarianceSurface {
    std::vector<double> tau_grid;
    Eigen::MatrixXd values;
    Eigen::MatrixXd error_estimates;
    bool finite_T = false;
    double T = 0.0;
    bool converged = true;
};

CovarianceSurface limit_surface(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                                const std::vector<double>& tau_grid,
                                const QuadratureSpec& spec = default_theory_spec());
CovarianceSurface finiteT_surface(const TransferFunction& tf, const SpectralModel& model,
                                  const std::optional<NoiseModel>& noise, double T,
                                  const std::vector<double>& tau_grid,
                                  const QuadratureSpec& spec = default_theory_spec());
double min_eigenvalue(const CovarianceSurface& s);

// E H_hat(tau) = (1/c) int K(s) H(tau - s) ds
QuadratureResult<double> expected_estimate(const TransferFunction& tf, const SpectralModel& model,
                                           double tau, const QuadratureSpec& spec = default_theory_spec());

struct BiasCurve {
    std::vector<double> tau_grid;
    std::vector<double> values;
    std::optional<double> sqrtT_scale;  // set when values are sqrt(T) * bias
    bool converged = true;
};

BiasCurve bias_curve(const TransferFunction& tf, const SpectralModel& model,
                     const std::vector<double>& tau_grid, std::optional<double> T = std::nullopt,
                     const QuadratureSpec& spec = default_theory_spec());

double uniform_bound(const TransferFunction& tf, const SpectralModel& model,
                     const std::optional<NoiseModel>& noise);

struct PseudometricCheck {
    double rho = 0.0;
    double bound = 0.0;
    bool ok = true;
};

PseudometricCheck pseudometric_bound_check(const TransferFunction& tf, const SpectralModel& model,
                                           const std::optional<NoiseModel>& noise, double T,
                                           double tau1, double tau2,
                                           const QuadratureSpec& spec = default_theory_spec());

using Pseudometric = std::function<double(double, double)>;

// Greedy covering of an equispaced grid on [a, b]; distances come from `dist_ij`
// evaluated on grid indices.
std::vector<int> covering_numbers_indexed(const std::function<double(int, int)>& dist_ij, int n,
                                          const std::vector<double>& eps_list);
std::vector<int> covering_numbers(const Pseudometric& d, double a, double b,
                                  const std::vector<double>& eps_list, int grid_points = 2049);

struct DudleyReport {
    double eps0 = 0.0;           // radius used in the tail bound
    double diameter = 0.0;       // max d_Z on the grid
    double max_std = 0.0;        // max sqrt(C(tau, tau)) on the grid
    double entropy_integral = 0.0;
    double tail_bound = 0.0;
    std::vector<double> eps_lattice;
    std::vector<int> covering;
};

// Limit-process distance d_Z on an equispaced grid; cheap because C depends only on
// tau1 - tau2 and tau1 + tau2.
Eigen::MatrixXd limit_distance_matrix(const TransferFunction& tf,
                                      const std::optional<ScaledNoise>& noise, double a, double b,
                                      int grid_points, Eigen::VectorXd* diag_cov = nullptr);

DudleyReport dudley_entropy(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                            double a, double b, int grid_points = 2049);
double sup_tail_bound(const DudleyReport& r, double x);
// Throws ValidityRegion when x < 8 I(eps0).
DudleyReport dudley_and_tail(const TransferFunction& tf, const std::optional<ScaledNoise>& noise,
                             double a, double b, double x, int grid_points = 2049);

}  // namespace xcorr
