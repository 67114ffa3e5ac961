#pragma once

#include <string>
#include <vector>

#include "xcorr/quadrature.hpp"

namespace xcorr {

enum class SpectralFamily { GaussBell, CauchySpectrum, LaplaceSpectrum, Triangular };

struct SpectralModel {
    SpectralFamily family = SpectralFamily::GaussBell;
    double c = 1.0;
    double delta = 1.0;
};

enum class NoiseFamily { BandIndicator, ExpAbs, GaussBell, Fejer, Cauchy };

struct NoiseModel {
    NoiseFamily family = NoiseFamily::ExpAbs;
    double mu = 1.0;
};

void validate(const SpectralModel& m);
void validate(const NoiseModel& m);

double eval_f(const SpectralModel& m, double lambda);
double eval_K(const SpectralModel& m, double t);
double sup_f(const SpectralModel& m);
// Points where f is not smooth, and the domain outside which f vanishes.
std::vector<double> spectral_kinks(const SpectralModel& m);
Domain spectral_domain(const SpectralModel& m);

double eval_g(const NoiseModel& m, double lambda);
// int e^{i t lambda} g(lambda) d lambda
double eval_noise_K(const NoiseModel& m, double t);
double noise_l1_norm(const NoiseModel& m);
std::vector<double> noise_kinks(const NoiseModel& m);
Domain noise_domain(const NoiseModel& m);

struct ConditionReport {
    double sup_deviation = 0.0;  // sup_{|l|<=a} |f(l) - c/2pi|
    double f_l1 = 0.0;
    double f_linf = 0.0;
    double K_l1 = 0.0;
    double K0 = 0.0;
    bool sup_pass = false;
    bool l1_matches_K0 = false;
    bool converged = true;
};

ConditionReport check_admissibility(const SpectralModel& m, double a, double tol);

struct BalanceReport {
    double flatness = 0.0;     // |1 - 2 pi f(0)/c|
    double tail = 0.0;         // int_delta^inf K
    double square_tail = 0.0;  // int_delta^inf K^2
    double weighted = 0.0;     // int_{-delta}^{delta} |K(t)| |t|^alpha dt
    bool converged = true;
};

BalanceReport balance_integrals(const SpectralModel& m, double delta_cut, double alpha);
// (sqrt(T) flatness, sqrt(T) tail, T square_tail, sqrt(T) weighted)
BalanceReport scaled_balance(const SpectralModel& m, double T, double delta_cut, double alpha);

std::string to_string(SpectralFamily f);
std::string to_string(NoiseFamily f);
SpectralFamily parse_spectral_family(const std::string& id);
NoiseFamily parse_noise_family(const std::string& id);
const std::vector<std::string>& spectral_family_ids();
const std::vector<std::string>& noise_family_ids();

}  // namespace xcorr
