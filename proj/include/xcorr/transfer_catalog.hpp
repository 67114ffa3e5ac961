#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xcorr/quadrature.hpp"
#include "xcorr/spectral_models.hpp"

namespace xcorr {

enum class TransferKind {
    OddCauchy,
    OneMinusCosOverT,
    LowPass,
    BandPass,
    MultiBand,
    PowerTail,
    ResonantCos,
    ResonantSin
};

struct Band {
    double lo;
    double hi;
};

struct TransferFunction {
    TransferKind kind = TransferKind::LowPass;
    double mu = 1.0;
    double nu = 3.0;
    double gamma = 0.6;
    std::vector<Band> bands;  // MultiBand only
};

TransferFunction odd_cauchy();
TransferFunction one_minus_cos(double mu);
TransferFunction low_pass(double mu);
TransferFunction band_pass(double mu, double nu);
TransferFunction multi_band(std::vector<Band> bands);
TransferFunction multi_band_default();  // bands (2i-1, 2i), i = 1..5
TransferFunction zero_response();       // multi-band with no bands: H = 0
TransferFunction power_tail(double gamma);
TransferFunction resonant_cos(double mu, double gamma);
TransferFunction resonant_sin(double mu, double gamma);

void validate(const TransferFunction& tf);

enum class Parity { Even, Odd, None };
enum class Support { WholeLine, HalfLine };
enum class HstarForm { Closed, NumericWithAsymptote };

struct AlphaRange {
    double lo;
    double hi;
    bool lo_open;
};

Parity parity(const TransferFunction& tf);
Support support(const TransferFunction& tf);
HstarForm hstar_form(const TransferFunction& tf);
AlphaRange lipschitz_alpha_range(const TransferFunction& tf);

// Where |H*|^2 is non-smooth or singular, and how it decays; used to lay out
// every frequency-domain integral over the catalog.
struct SpectralShape {
    double radius = kInf;                  // |H*| = 0 beyond this
    std::vector<double> kinks;             // jumps / kinks of H*
    std::vector<Singularity> singular_sq;  // exponents of |H*|^2 at singular points
    BoundDriven tail;
};
SpectralShape spectral_shape(const TransferFunction& tf);

double eval_H(const TransferFunction& tf, double t);
// Throws SingularPoint within 1e-8 of a listed singular point.
cplx eval_Hstar(const TransferFunction& tf, double lambda);
// Same as eval_Hstar, but inside the exclusion radius the value is continued
// along the singular power law; for use inside integrals only.
cplx hstar_regularized(const TransferFunction& tf, double lambda);
// Leading singular amplitude: |H*| ~ amplitude * dist^(gamma-1). Zero if none.
double singular_amplitude(const TransferFunction& tf);

struct NormReport {
    double norm_H_sq = 0.0;
    double norm_Hstar_sq = 0.0;
    bool converged = true;
};
NormReport l2_norms(const TransferFunction& tf);

double pseudometric_q(const TransferFunction& tf, const std::optional<NoiseModel>& noise,
                      double tau);

enum class LogPower { OnePlusBeta, FourPlusBeta };
struct LogWeightReport {
    double value = 0.0;
    double tail_bound = 0.0;  // mass beyond the last checked cutoff
    bool finite = true;
    bool converged = true;
};
LogWeightReport log_weight_integral(const TransferFunction& tf,
                                    const std::optional<NoiseModel>& noise, double beta,
                                    LogPower power);

double lipschitz_constant(const TransferFunction& tf, double alpha);

// int_lo^hi fn(lambda, H*(lambda)) over 0 <= lo < hi, split at the singular points of
// H* and integrated in coordinates local to them. `breaks` adds breakpoints; the tail
// strategy of `spec` applies when hi is infinite.
using SpectralIntegrand = std::function<double(double, cplx)>;
QuadratureResult<double> integrate_spectral(const TransferFunction& tf, const SpectralIntegrand& fn,
                                            double lo, double hi, std::vector<double> breaks,
                                            const QuadratureSpec& spec);

// int over the real line of w(lambda) |H*(lambda)|^2, laid out by spectral_shape.
QuadratureResult<double> integrate_hstar_sq(const TransferFunction& tf, const RealFn& weight,
                                            const QuadratureSpec& spec);

std::string to_string(TransferKind k);
TransferKind parse_transfer_kind(const std::string& id);
const std::vector<std::string>& transfer_kind_ids();

}  // namespace xcorr
