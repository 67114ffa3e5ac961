#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "xcorr/fft.hpp"
#include "xcorr/rng.hpp"
#include "xcorr/spectral_models.hpp"
#include "xcorr/transfer_catalog.hpp"

namespace xcorr {

struct GridSpec {
    double t_min = 0.0;
    double h = 0.05;
    std::size_t n_points = 1;

    double t_max() const { return t_min + static_cast<double>(n_points - 1) * h; }
    double at(std::size_t i) const { return t_min + static_cast<double>(i) * h; }
};

// Throws ConfigError unless (t_max - t_min) / h is an integer to 1e-9.
GridSpec make_grid(double t_min, double t_max, double h);

struct SampledPath {
    GridSpec grid;
    std::vector<double> values;
    SeedLineage lineage;
};

// Largest power-of-two step <= 0.05 whose lattice aliasing
// (2 pi / c) sum_{j != 0} f(2 pi j / h) stays below tol.
double default_step(const SpectralModel& m, double tol = 1e-4);

// ||H 1_{|s| > R}||_2
double truncation_tail(const TransferFunction& tf, double radius);

struct Truncation {
    double radius = 0.0;
    double tail_l2 = 0.0;
    double rel_tail = 0.0;  // tail_l2 / ||H||_2
    bool capped = false;    // the relative target was not reachable below the cap
};
// Smallest R with ||H 1_{|s|>R}||_2 <= rel ||H||_2, but no larger than cap.
Truncation default_truncation(const TransferFunction& tf, double cap = 64.0, double rel = 1e-3);

// Exact synthesis of a stationary Gaussian sequence with covariance cov(t_i - t_j)
// by circulant embedding. Immutable after construction.
class CirculantSynth {
public:
    CirculantSynth(const std::function<double(double)>& cov, const GridSpec& grid);

    SampledPath sample(const SeedLineage& lineage) const;
    // sqrt(lambda_j / m) * xi_j with complex standard normal xi; the real part of its
    // forward transform is the path on the first n_points of the circle.
    fft::cvec draw_spectrum(const SeedLineage& lineage) const;

    const GridSpec& grid() const { return grid_; }
    std::size_t embedding_size() const { return scale_.size(); }
    double clipped_mass() const { return clipped_; }
    int doublings() const { return doublings_; }

private:
    GridSpec grid_;
    std::vector<double> scale_;
    double clipped_ = 0.0;
    int doublings_ = 0;
};

SampledPath synth_stationary_gaussian(const SpectralModel& m, const GridSpec& grid,
                                      const SeedLineage& lineage);
SampledPath synth_stationary_gaussian(const NoiseModel& m, const GridSpec& grid,
                                      const SeedLineage& lineage);

// Tap weights h H(s_k) for s_k = k h, |k| <= K (k >= 0 for half-line kinds, where the
// jump at 0 gets half weight). taps[k + K] holds the weight for offset k.
struct ResponseTaps {
    double h = 0.0;
    int K = 0;
    std::vector<double> taps;
    double trunc_radius = 0.0;
    double tail_l2 = 0.0;
};
ResponseTaps response_taps(const TransferFunction& tf, double h, double trunc_radius);

// Y(t_i) = h sum_k H(s_k) X(t_i - s_k) (+ U(t_i)) on `out`, which defaults to the part of
// x's window with full kernel support. Throws InsufficientWindow when x is too short.
SampledPath system_response(const TransferFunction& tf, const SampledPath& x,
                            const SampledPath* noise, double trunc_radius,
                            std::optional<GridSpec> out = std::nullopt, double* tail_l2 = nullptr);

enum class Drive { Gaussian, Squared };

// Draws (X, Y) pairs for one experiment setting. X lives on the output window widened by
// the kernel reach; Y is the circular convolution on the embedding circle, which equals
// the truncated linear convolution on the output window.
class SystemSimulator {
public:
    SystemSimulator(const TransferFunction& tf, const SpectralModel& model,
                    const std::optional<NoiseModel>& noise, const GridSpec& out,
                    double trunc_radius, Drive drive = Drive::Gaussian);

    struct Draw {
        SampledPath x;
        SampledPath y;
    };
    Draw draw(std::uint64_t master, std::uint64_t replicate) const;

    const GridSpec& input_grid() const { return input_.grid(); }
    const GridSpec& output_grid() const { return out_; }
    double tail_l2() const { return taps_.tail_l2; }
    double clipped_mass() const { return input_.clipped_mass(); }

private:
    GridSpec out_;
    CirculantSynth input_;
    std::optional<CirculantSynth> noise_;
    ResponseTaps taps_;
    fft::cvec kernel_hat_;  // inverse transform of the taps laid on the circle
    std::size_t offset_ = 0;  // index of out.t_min on the input grid
    Drive drive_;
    double var0_;
};

}  // namespace xcorr
