#pragma once

#include <complex>
#include <functional>
#include <limits>
#include <type_traits>
#include <variant>
#include <vector>

namespace xcorr {

using cplx = std::complex<double>;
using RealFn = std::function<double(double)>;
using ComplexFn = std::function<cplx(double)>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Truncate an unbounded domain at |x| = lambda.
struct FixedCutoff {
    double lambda = 1e3;
};

// Map an unbounded tail onto a finite interval with a substitution matched to
// the decay class: exp(-rate x) or |x|^-rate. `scale` sets where the tail begins
// to be compressed.
struct BoundDriven {
    enum class Decay { Exponential, Algebraic };
    Decay decay = Decay::Algebraic;
    double rate = 2.0;
    double scale = 1.0;
};

using TailStrategy = std::variant<FixedCutoff, BoundDriven>;

struct QuadratureSpec {
    double abs_tol = 1e-10;
    double rel_tol = 1e-10;
    int max_panels = 4000;
    TailStrategy tail = BoundDriven{};
};

template <typename T>
struct QuadratureResult {
    T value{};
    double error_estimate = 0.0;
    bool converged = true;
    int panels_used = 0;
};

// Integrable power singularity |x - at|^exponent (exponent > -1).
struct Singularity {
    double at = 0.0;
    double exponent = 0.0;
};

struct Domain {
    double lo = -kInf;
    double hi = kInf;
    std::vector<double> breakpoints;
    std::vector<Singularity> singularities;
};

QuadratureResult<double> integrate_1d(const RealFn& f, const Domain& domain,
                                      const QuadratureSpec& spec = {});
QuadratureResult<cplx> integrate_1d(const ComplexFn& f, const Domain& domain,
                                    const QuadratureSpec& spec = {});

inline QuadratureResult<double> integrate_1d(const RealFn& f, double lo, double hi,
                                             const QuadratureSpec& spec = {}) {
    return integrate_1d(f, Domain{lo, hi, {}, {}}, spec);
}

// int_a^inf amplitude(t) exp(-i frequency t) dt. Panels of width pi/|frequency|,
// then an integration-by-parts tail once the amplitude is slowly varying.
QuadratureResult<cplx> integrate_oscillatory(const RealFn& amplitude, double frequency,
                                             double a, const QuadratureSpec& spec = {});
QuadratureResult<cplx> integrate_oscillatory(const ComplexFn& amplitude, double frequency,
                                             double a, const QuadratureSpec& spec = {});

namespace detail {
template <typename F>
inline constexpr bool returns_complex = std::is_same_v<std::decay_t<std::invoke_result_t<F, double>>, cplx>;
template <typename F>
concept Callable1d = std::is_invocable_v<F, double> && !std::is_same_v<std::decay_t<F>, RealFn> &&
                     !std::is_same_v<std::decay_t<F>, ComplexFn>;
}

// Lambdas dispatch on their return type.
template <detail::Callable1d F>
auto integrate_1d(F&& f, const Domain& domain, const QuadratureSpec& spec = {}) {
    if constexpr (detail::returns_complex<F>) return integrate_1d(ComplexFn(std::forward<F>(f)), domain, spec);
    else return integrate_1d(RealFn(std::forward<F>(f)), domain, spec);
}

template <detail::Callable1d F>
auto integrate_1d(F&& f, double lo, double hi, const QuadratureSpec& spec = {}) {
    return integrate_1d(std::forward<F>(f), Domain{lo, hi, {}, {}}, spec);
}

template <detail::Callable1d F>
auto integrate_oscillatory(F&& amplitude, double frequency, double a, const QuadratureSpec& spec = {}) {
    if constexpr (detail::returns_complex<F>)
        return integrate_oscillatory(ComplexFn(std::forward<F>(amplitude)), frequency, a, spec);
    else return integrate_oscillatory(RealFn(std::forward<F>(amplitude)), frequency, a, spec);
}

// Layout hints for the Fejer-weighted double integral.
struct FejerLayout {
    Domain inner;              // lambda2 domain
    std::vector<double> kinks; // non-smooth points of f in either argument
    // singular points of f in its first argument; they sit at lambda2 = at + u
    std::vector<Singularity> moving;
    double core_radius = 4.0;  // |u| below this is resolved lobe by lobe
};

// int int f(l1, l2) Phi_T(l2 - l1) dl1 dl2 with u = l2 - l1.
QuadratureResult<cplx> integrate_2d_fejer(const std::function<cplx(double, double)>& f,
                                          double T, const FejerLayout& layout,
                                          const QuadratureSpec& spec = {});

}  // namespace xcorr
