#include "xcorr/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <queue>

namespace xcorr {
namespace {

constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

double magnitude(double v) { return std::abs(v); }
double magnitude(const cplx& v) { return std::abs(v); }

template <typename T>
bool finite_value(const T& v) {
    if constexpr (std::is_same_v<T, double>) return std::isfinite(v);
    else return std::isfinite(v.real()) && std::isfinite(v.imag());
}

template <typename T>
struct Panel {
    int segment;
    double a, b;
    T value;
    double error;
};

// One GK15 application with the QUADPACK error heuristic.
template <typename T, typename G>
Panel<T> gk15(const G& g, int segment, double a, double b) {
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    T fc = g(c);
    T resk = fc * kWgk[7];
    T resg = fc * kWg[3];
    double resabs = magnitude(fc) * kWgk[7];
    std::array<T, 7> f1{}, f2{};
    for (int j = 0; j < 7; ++j) {
        const double dx = h * kXgk[j];
        f1[j] = g(c - dx);
        f2[j] = g(c + dx);
        resk += (f1[j] + f2[j]) * kWgk[j];
        resabs += (magnitude(f1[j]) + magnitude(f2[j])) * kWgk[j];
        if (j % 2 == 1) resg += (f1[j] + f2[j]) * kWg[j / 2];
    }
    const T mean = resk * 0.5;
    double resasc = magnitude(fc - mean) * kWgk[7];
    for (int j = 0; j < 7; ++j)
        resasc += (magnitude(f1[j] - mean) + magnitude(f2[j] - mean)) * kWgk[j];
    resk *= h;
    resabs *= std::abs(h);
    resasc *= std::abs(h);
    double err = magnitude((resk - resg * h));
    if (resasc != 0.0 && err != 0.0)
        err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
    constexpr double eps = std::numeric_limits<double>::epsilon();
    if (resabs > std::numeric_limits<double>::min() / (50 * eps))
        err = std::max(err, 50 * eps * resabs);
    if (!finite_value(resk)) err = kInf;
    return {segment, a, b, resk, err};
}

template <typename T>
using Integrand = std::function<T(double)>;

// A segment of the original domain expressed on a finite parameter interval.
template <typename T>
struct Segment {
    Integrand<T> g;
    double s0, s1;
};

template <typename T>
T guarded(const Integrand<T>& f, double x, double jac) {
    if (!std::isfinite(x) || !std::isfinite(jac)) return T{};
    T v = f(x);
    if (v == T{}) return T{};
    return v * jac;
}

double singular_power(double exponent) {
    if (exponent >= 0.0) return 1.0;
    return std::min(10.0, 1.0 / (1.0 + exponent));
}

template <typename T>
Segment<T> finite_segment(const Integrand<T>& f, double a, double b, double left_exp,
                          double right_exp) {
    const double pl = singular_power(left_exp);
    const double pr = singular_power(right_exp);
    const double w = b - a;
    if (pl > 1.0) {
        return {[=](double s) {
                    return guarded(f, a + w * std::pow(s, pl), pl * w * std::pow(s, pl - 1.0));
                },
                0.0, 1.0};
    }
    if (pr > 1.0) {
        return {[=](double s) {
                    return guarded(f, b - w * std::pow(s, pr), pr * w * std::pow(s, pr - 1.0));
                },
                0.0, 1.0};
    }
    return {f, a, b};
}

// Segment [p, inf) mapped according to the tail strategy; `sign` = -1 mirrors to (-inf, p].
template <typename T>
Segment<T> tail_segment(const Integrand<T>& f, double p, int sign, const TailStrategy& tail) {
    if (const auto* fc = std::get_if<FixedCutoff>(&tail)) {
        const double lim = fc->lambda;
        if (sign > 0) return {f, p, std::max(p, lim)};
        return {f, std::min(p, -lim), p};
    }
    const auto& bd = std::get<BoundDriven>(tail);
    if (bd.decay == BoundDriven::Decay::Exponential) {
        const double r = bd.rate;
        return {[=](double s) {
                    const double x = p + sign * (-std::log1p(-s) / r);
                    return guarded(f, x, 1.0 / (r * (1.0 - s)));
                },
                0.0, 1.0};
    }
    const double q = std::max(bd.rate, 1.1);
    const double L = bd.scale;
    return {[=](double s) {
                const double one_minus = 1.0 - s;
                const double x = p + sign * L * (std::pow(one_minus, -1.0 / (q - 1.0)) - 1.0);
                return guarded(f, x, L / (q - 1.0) * std::pow(one_minus, -q / (q - 1.0)));
            },
            0.0, 1.0};
}

// Strongest exponent listed at x.
double exponent_at(const std::vector<Singularity>& sing, double x) {
    double e = 0.0;
    for (const auto& s : sing)
        if (s.at == x) e = std::min(e, s.exponent);
    return e;
}

template <typename T>
QuadratureResult<T> integrate_impl(const Integrand<T>& f, const Domain& dom,
                                   const QuadratureSpec& spec) {
    QuadratureResult<T> out;
    if (dom.lo >= dom.hi) return out;

    std::vector<double> pts;
    for (double b : dom.breakpoints)
        if (b > dom.lo && b < dom.hi) pts.push_back(b);
    for (const auto& s : dom.singularities)
        if (s.at > dom.lo && s.at < dom.hi) pts.push_back(s.at);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    if (!std::isfinite(dom.lo) && !std::isfinite(dom.hi) && pts.empty()) pts.push_back(0.0);

    std::vector<double> nodes;
    nodes.push_back(dom.lo);
    nodes.insert(nodes.end(), pts.begin(), pts.end());
    nodes.push_back(dom.hi);

    // Both ends singular: split so each piece carries at most one singular end.
    std::vector<double> refined{nodes.front()};
    for (size_t i = 1; i < nodes.size(); ++i) {
        const double a = nodes[i - 1], b = nodes[i];
        if (std::isfinite(a) && std::isfinite(b) && exponent_at(dom.singularities, a) < 0 &&
            exponent_at(dom.singularities, b) < 0)
            refined.push_back(0.5 * (a + b));
        refined.push_back(b);
    }
    nodes.swap(refined);

    std::vector<Segment<T>> segs;
    for (size_t i = 1; i < nodes.size(); ++i) {
        const double a = nodes[i - 1], b = nodes[i];
        if (!std::isfinite(a) && !std::isfinite(b)) continue;
        if (!std::isfinite(b)) {
            if (exponent_at(dom.singularities, a) < 0) {
                segs.push_back(finite_segment(f, a, a + 1.0, exponent_at(dom.singularities, a), 0.0));
                segs.push_back(tail_segment(f, a + 1.0, +1, spec.tail));
            } else {
                segs.push_back(tail_segment(f, a, +1, spec.tail));
            }
        } else if (!std::isfinite(a)) {
            if (exponent_at(dom.singularities, b) < 0) {
                segs.push_back(finite_segment(f, b - 1.0, b, 0.0, exponent_at(dom.singularities, b)));
                segs.push_back(tail_segment(f, b - 1.0, -1, spec.tail));
            } else {
                segs.push_back(tail_segment(f, b, -1, spec.tail));
            }
        } else {
            segs.push_back(finite_segment(f, a, b, exponent_at(dom.singularities, a),
                                          exponent_at(dom.singularities, b)));
        }
    }

    auto cmp = [](const Panel<T>& x, const Panel<T>& y) {
        if (x.error != y.error) return x.error < y.error;
        if (x.segment != y.segment) return x.segment > y.segment;
        return x.a > y.a;
    };
    std::priority_queue<Panel<T>, std::vector<Panel<T>>, decltype(cmp)> heap(cmp);
    std::vector<Panel<T>> done;
    T total{};
    double err = 0.0;
    for (size_t i = 0; i < segs.size(); ++i) {
        if (segs[i].s0 >= segs[i].s1) continue;
        auto p = gk15<T>(segs[i].g, static_cast<int>(i), segs[i].s0, segs[i].s1);
        total += p.value;
        err += p.error;
        heap.push(p);
    }
    int panels = static_cast<int>(heap.size());
    while (!heap.empty()) {
        const double target = std::max(spec.abs_tol, spec.rel_tol * magnitude(total));
        if (err <= target) break;
        if (panels >= spec.max_panels) break;
        Panel<T> worst = heap.top();
        const double mid = 0.5 * (worst.a + worst.b);
        if (!(mid > worst.a && mid < worst.b)) {
            heap.pop();
            done.push_back(worst);
            continue;
        }
        heap.pop();
        const auto& g = segs[worst.segment].g;
        auto left = gk15<T>(g, worst.segment, worst.a, mid);
        auto right = gk15<T>(g, worst.segment, mid, worst.b);
        total += left.value + right.value - worst.value;
        err += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        ++panels;
    }
    while (!heap.empty()) {
        done.push_back(heap.top());
        heap.pop();
    }
    // Fixed-order reduction keeps the result independent of refinement history.
    std::sort(done.begin(), done.end(), [](const Panel<T>& x, const Panel<T>& y) {
        return x.segment != y.segment ? x.segment < y.segment : x.a < y.a;
    });
    T sum{};
    double esum = 0.0;
    for (const auto& p : done) {
        sum += p.value;
        esum += p.error;
    }
    out.value = sum;
    out.error_estimate = esum;
    out.panels_used = panels;
    out.converged = std::isfinite(esum) &&
                    esum <= std::max(spec.abs_tol, spec.rel_tol * magnitude(sum));
    return out;
}

double fejer(double T, double u) {
    if (u == 0.0) return T / (2.0 * std::numbers::pi);
    const double s = std::sin(0.5 * T * u);
    return 2.0 * s * s / (std::numbers::pi * T * u * u);
}

}  // namespace

QuadratureResult<double> integrate_1d(const RealFn& f, const Domain& domain,
                                      const QuadratureSpec& spec) {
    return integrate_impl<double>(f, domain, spec);
}

QuadratureResult<cplx> integrate_1d(const ComplexFn& f, const Domain& domain,
                                    const QuadratureSpec& spec) {
    return integrate_impl<cplx>(f, domain, spec);
}

QuadratureResult<cplx> integrate_oscillatory(const ComplexFn& amp, double omega, double a,
                                             const QuadratureSpec& spec) {
    QuadratureResult<cplx> out;
    if (omega == 0.0) {
        out.converged = false;
        return out;
    }
    const double P = std::numbers::pi / std::abs(omega);
    const cplx iw(0.0, omega);
    QuadratureSpec panel_spec = spec;
    panel_spec.abs_tol = spec.abs_tol / 16.0;
    panel_spec.max_panels = 200;
    constexpr int min_panels = 8;

    cplx sum{};
    double err = 0.0;
    int used = 0;
    const ComplexFn integrand = [&](double t) { return amp(t) * std::exp(cplx(0.0, -omega * t)); };
    for (int k = 0;; ++k) {
        const double lo = a + k * P, hi = a + (k + 1) * P;
        auto r = integrate_1d(integrand, Domain{lo, hi, {}, {}}, panel_spec);
        sum += r.value;
        err += r.error_estimate;
        used += r.panels_used;
        if (!r.converged) out.converged = false;
        if (k + 1 < min_panels) continue;

        const double B = hi;
        const double d = P / 8.0;
        const cplx am2 = amp(B - 2 * d), am1 = amp(B - d), a0 = amp(B), ap1 = amp(B + d),
                   ap2 = amp(B + 2 * d);
        const cplx d1 = (-ap2 + 8.0 * ap1 - 8.0 * am1 + am2) / (12.0 * d);
        const cplx d2 = (-ap2 + 16.0 * ap1 - 30.0 * a0 + 16.0 * am1 - am2) / (12.0 * d * d);
        const cplx d3 = (ap2 - 2.0 * ap1 + 2.0 * am1 - am2) / (2.0 * d * d * d);
        const cplx t0 = a0 / iw, t1 = d1 / (iw * iw), t2 = d2 / (iw * iw * iw),
                   t3 = d3 / (iw * iw * iw * iw);
        const double target = std::max(spec.abs_tol, spec.rel_tol * std::abs(sum));
        const bool asymptotic = std::abs(t1) <= 0.5 * std::abs(t0) || std::abs(t0) <= target;
        const bool small = std::abs(t3) <= target;
        const bool exhausted = used >= spec.max_panels * 50 || k > spec.max_panels;
        if ((asymptotic && small) || exhausted) {
            sum += std::exp(cplx(0.0, -omega * B)) * (t0 + t1 + t2 + t3);
            err += std::abs(t3);
            if (exhausted && !(asymptotic && small)) out.converged = false;
            out.panels_used = used;
            break;
        }
    }
    out.value = sum;
    out.error_estimate = err;
    return out;
}

QuadratureResult<cplx> integrate_oscillatory(const RealFn& amp, double omega, double a,
                                             const QuadratureSpec& spec) {
    return integrate_oscillatory(ComplexFn([&](double t) { return cplx(amp(t), 0.0); }), omega,
                                 a, spec);
}

QuadratureResult<cplx> integrate_2d_fejer(const std::function<cplx(double, double)>& f,
                                          double T, const FejerLayout& layout,
                                          const QuadratureSpec& spec) {
    QuadratureResult<cplx> out;
    QuadratureSpec inner_spec = spec;
    inner_spec.abs_tol = spec.abs_tol / 10.0;
    bool inner_ok = true;

    auto G = [&](double u) -> cplx {
        Domain d = layout.inner;
        for (double k : layout.kinks) {
            d.breakpoints.push_back(k);
            d.breakpoints.push_back(k + u);
        }
        for (const auto& m : layout.moving) {
            if (!(m.at + u > d.lo && m.at + u < d.hi)) continue;
            d.breakpoints.push_back(m.at + u);
            d.singularities.push_back({m.at + u, m.exponent});
        }
        auto r = integrate_1d(ComplexFn([&](double l2) { return f(l2 - u, l2); }), d, inner_spec);
        if (!r.converged) inner_ok = false;
        return r.value;
    };

    const double P = std::numbers::pi / T;
    const int N = static_cast<int>(std::ceil(std::max(layout.core_radius, 8.0 * P) / P));
    const double U = N * P;

    std::vector<double> diffs;
    for (double x : layout.kinks)
        for (double y : layout.kinks) diffs.push_back(y - x);

    Domain core{-U, U, {}, {}};
    for (int k = -N + 1; k < N; ++k) core.breakpoints.push_back(k * P);
    for (double d : diffs)
        if (std::abs(d) < U) core.breakpoints.push_back(d);
    QuadratureSpec core_spec = spec;
    core_spec.max_panels = std::max(spec.max_panels, 8 * (2 * N + static_cast<int>(diffs.size())));
    auto core_r = integrate_1d(ComplexFn([&](double u) { return fejer(T, u) * G(u); }), core,
                               core_spec);

    cplx tails{};
    double terr = 0.0;
    bool tails_ok = true;
    const double norm = 1.0 / (std::numbers::pi * T);
    for (int side : {+1, -1}) {
        auto amp = [&, side](double v) { return G(side * v) * (norm / (v * v)); };
        QuadratureSpec tspec = spec;
        tspec.tail = BoundDriven{BoundDriven::Decay::Algebraic, 2.0, U};
        Domain td{U, kInf, {}, {}};
        for (double d : diffs)
            if (side * d > U) td.breakpoints.push_back(side * d);
        auto smooth = integrate_1d(ComplexFn(amp), td, tspec);
        auto osc_p = integrate_oscillatory(ComplexFn(amp), T, U, spec);
        auto osc_m = integrate_oscillatory(ComplexFn(amp), -T, U, spec);
        tails += smooth.value - 0.5 * (osc_p.value + osc_m.value);
        terr += smooth.error_estimate + 0.5 * (osc_p.error_estimate + osc_m.error_estimate);
        tails_ok = tails_ok && smooth.converged && osc_p.converged && osc_m.converged;
    }

    out.value = core_r.value + tails;
    out.error_estimate = core_r.error_estimate + terr;
    out.panels_used = core_r.panels_used;
    out.converged = core_r.converged && tails_ok && inner_ok;
    return out;
}

}  // namespace xcorr
