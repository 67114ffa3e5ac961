#include "xcorr/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "xcorr/cumulants.hpp"
#include "xcorr/errors.hpp"
#include "xcorr/estimate.hpp"
#include "xcorr/rng.hpp"
#include "xcorr/theory.hpp"

namespace xcorr {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string fmt_tuple(const std::vector<int>& idx) {
    std::string s;
    for (std::size_t i = 0; i < idx.size(); ++i) s += (i ? ";" : "") + std::to_string(idx[i]);
    return s;
}

SpectralModel model_at(const ExperimentConfig& cfg, double delta) {
    SpectralModel m = cfg.model;
    m.delta = delta;
    return m;
}

std::optional<ScaledNoise> scaled_noise(const ExperimentConfig& cfg) {
    if (!cfg.noise) return std::nullopt;
    return ScaledNoise{*cfg.noise, cfg.model.c};
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

// Reproducibility key: everything except where results go and how many threads compute them.
std::string config_key(const ExperimentConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("output_dir");
    j.erase("workers");
    return j.dump();
}

void require_replicates(const ExperimentConfig& cfg, int at_least, const std::string& check) {
    if (cfg.replicates < at_least)
        throw TooFewReplicates(check + ": needs at least " + std::to_string(at_least) + " replicates, got " +
                               std::to_string(cfg.replicates));
}

bool strictly_decreasing_or_zero(const std::vector<double>& v) {
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) return true;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] < v[i - 1])) return false;
    return true;
}

std::string join(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " > " : "") + fmt(v[i]);
    return s;
}

CsvTable& table(VerificationReport& r, const std::string& name, std::vector<std::string> header) {
    auto& t = r.tables[name];
    if (t.header.empty()) t.header = std::move(header);
    return t;
}

// Rows of the lag vector that hold the configured tau grid.
std::vector<int> grid_rows(const ExperimentConfig& cfg) {
    std::vector<int> rows(cfg.tau_grid.size());
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<int>(i);
    return rows;
}

double quantile(std::vector<double> v, double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(v.size() - 1)));
    std::nth_element(v.begin(), v.begin() + static_cast<long>(k), v.end());
    return v[k];
}

const char* drive_name(Drive d) { return d == Drive::Gaussian ? "gaussian" : "squared"; }

template <class T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
    if (!j.contains(key) || j.at(key).is_null()) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config key '" + path + key + "' has the wrong type");
    }
}

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& path) {
    if (!j.is_object()) throw ConfigError("config key '" + path + "' must be an object");
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw ConfigError("unknown config key '" + path + k + "'");
}

LadderRung rung_from_json(const json& j, const std::string& path) {
    reject_unknown(j, {"T", "delta"}, path + ".");
    LadderRung r;
    r.T = get_or<double>(j, "T", path + ".", NAN);
    r.delta = get_or<double>(j, "delta", path + ".", r.T * r.T);
    return r;
}

json rung_to_json(const LadderRung& r) { return {{"T", r.T}, {"delta", r.delta}}; }

}  // namespace

std::vector<LadderRung> coupled_ladder(const std::vector<double>& Ts) {
    std::vector<LadderRung> out;
    for (double T : Ts) out.push_back({T, T * T});
    return out;
}

double step_for(const ExperimentConfig& cfg, const LadderRung& rung) {
    return cfg.h ? *cfg.h : default_step(model_at(cfg, rung.delta));
}

double trunc_radius_for(const ExperimentConfig& cfg) {
    return cfg.trunc_radius ? *cfg.trunc_radius : default_truncation(cfg.tf).radius;
}

std::vector<double> sup_lattice(const SupSettings& s) {
    std::vector<double> v(s.lags);
    for (int k = 0; k < s.lags; ++k) v[k] = s.a + (s.b - s.a) * k / (s.lags - 1);
    return v;
}

std::vector<double> lags_for(const ExperimentConfig& cfg, const LadderRung& rung) {
    std::vector<double> v = cfg.tau_grid;
    const auto& last = cfg.ladder.back();
    if (rung.T == last.T && rung.delta == last.delta) {
        const double h = step_for(cfg, rung);
        for (double t : sup_lattice(cfg.sup)) {
            const double snapped = snap_lag(t, h);
            if (std::none_of(v.begin(), v.end(), [&](double u) { return snap_lag(u, h) == snapped; })) v.push_back(t);
        }
    }
    return v;
}

void validate(const ExperimentConfig& cfg) {
    auto bad = [](const std::string& key, const std::string& why) {
        throw ConfigError("config key '" + key + "': " + why);
    };
    auto positive = [](double v) { return v > 0 && std::isfinite(v); };
    try {
        validate(cfg.tf);
    } catch (const ConfigError& e) {
        bad("transfer", e.what());
    }
    try {
        validate(cfg.model);
    } catch (const Error& e) {
        bad("model", e.what());
    }
    if (cfg.noise) {
        try {
            validate(*cfg.noise);
        } catch (const Error& e) {
            bad("noise", e.what());
        }
    }
    if (!positive(cfg.T)) bad("T", "must be positive");
    if (cfg.tau_grid.empty()) bad("tau_grid", "must not be empty");
    for (double t : cfg.tau_grid)
        if (!std::isfinite(t)) bad("tau_grid", "entries must be finite");
    if (cfg.h && !positive(*cfg.h)) bad("h", "must be positive");
    if (cfg.trunc_radius && !(*cfg.trunc_radius >= 0 && std::isfinite(*cfg.trunc_radius)))
        bad("trunc_radius", "must be nonnegative");
    if (cfg.replicates < 1) bad("replicates", "must be positive");
    if (cfg.ladder.empty()) bad("ladder", "must not be empty");
    for (const auto& r : cfg.ladder)
        if (!positive(r.T) || !positive(r.delta)) bad("ladder", "T and delta must be positive");
    if (cfg.bias_deltas.empty()) bad("bias_deltas", "must not be empty");
    for (double d : cfg.bias_deltas)
        if (!positive(d)) bad("bias_deltas", "entries must be positive");
    if (!(cfg.sup.b > cfg.sup.a)) bad("sup.b", "must exceed sup.a");
    if (cfg.sup.lags < 2) bad("sup.lags", "must be at least 2");
    if (cfg.normality_order < 3 || cfg.normality_order > 4) bad("normality_order", "must be 3 or 4");
    if (cfg.control_rung && (!positive(cfg.control_rung->T) || !positive(cfg.control_rung->delta)))
        bad("control_rung", "T and delta must be positive");
    if (cfg.workers < 0) bad("workers", "must be nonnegative");

    std::vector<LadderRung> rungs = cfg.ladder;
    rungs.push_back({cfg.T, cfg.model.delta});
    for (const auto& r : rungs) {
        const double h = step_for(cfg, r);
        const double n = r.T / h;
        if (std::abs(n - std::round(n)) > 1e-9 * std::max(1.0, n))
            bad("T", "T = " + fmt(r.T) + " is not a multiple of the step " + fmt(h));
        for (double t : cfg.tau_grid)
            if (std::abs(t / h - std::round(t / h)) > 1e-9)
                bad("tau_grid", fmt(t) + " is not on the step-" + fmt(h) + " grid");
    }
    const double h = step_for(cfg, cfg.ladder.back());
    for (double t : sup_lattice(cfg.sup))
        if (std::abs(t / h - std::round(t / h)) > 1e-9)
            bad("sup.lags", "lattice point " + fmt(t) + " is not on the step-" + fmt(h) + " grid of the final rung");
}

json to_json(const ExperimentConfig& cfg) {
    json tf{{"kind", to_string(cfg.tf.kind)}, {"mu", cfg.tf.mu}, {"nu", cfg.tf.nu}, {"gamma", cfg.tf.gamma}};
    json bands = json::array();
    for (const auto& b : cfg.tf.bands) bands.push_back({b.lo, b.hi});
    tf["bands"] = bands;
    json ladder = json::array();
    for (const auto& r : cfg.ladder) ladder.push_back(rung_to_json(r));
    return {
        {"transfer", tf},
        {"model", {{"family", to_string(cfg.model.family)}, {"c", cfg.model.c}, {"delta", cfg.model.delta}}},
        {"noise", cfg.noise ? json{{"family", to_string(cfg.noise->family)}, {"mu", cfg.noise->mu}} : json()},
        {"T", cfg.T},
        {"tau_grid", cfg.tau_grid},
        {"h", cfg.h ? json(*cfg.h) : json()},
        {"trunc_radius", cfg.trunc_radius ? json(*cfg.trunc_radius) : json()},
        {"replicates", cfg.replicates},
        {"seed", cfg.seed},
        {"ladder", ladder},
        {"bias_deltas", cfg.bias_deltas},
        {"sup", {{"a", cfg.sup.a}, {"b", cfg.sup.b}, {"lags", cfg.sup.lags}, {"x", cfg.sup.x}}},
        {"normality_order", cfg.normality_order},
        {"control_rung", cfg.control_rung ? rung_to_json(*cfg.control_rung) : json()},
        {"output_dir", cfg.output_dir},
        {"workers", cfg.workers},
    };
}

ExperimentConfig config_from_json(const json& j) {
    reject_unknown(j, {"transfer", "model", "noise", "T", "tau_grid", "h", "trunc_radius", "replicates", "seed",
                       "ladder", "bias_deltas", "sup", "normality_order", "control_rung", "output_dir", "workers"},
                   "");
    ExperimentConfig cfg;
    if (j.contains("transfer")) {
        const auto& t = j.at("transfer");
        reject_unknown(t, {"kind", "mu", "nu", "gamma", "bands"}, "transfer.");
        TransferFunction tf;
        tf.kind = parse_transfer_kind(get_or<std::string>(t, "kind", "transfer.", "low-pass"));
        tf.mu = get_or<double>(t, "mu", "transfer.", 1.0);
        tf.nu = get_or<double>(t, "nu", "transfer.", 3.0);
        tf.gamma = get_or<double>(t, "gamma", "transfer.", 0.6);
        if (t.contains("bands")) {
            for (const auto& b : t.at("bands")) {
                if (!b.is_array() || b.size() != 2) throw ConfigError("config key 'transfer.bands' needs [lo, hi] pairs");
                tf.bands.push_back({b[0].get<double>(), b[1].get<double>()});
            }
        } else if (tf.kind == TransferKind::MultiBand) {
            tf.bands = multi_band_default().bands;
        }
        cfg.tf = tf;
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        reject_unknown(m, {"family", "c", "delta"}, "model.");
        cfg.model.family = parse_spectral_family(get_or<std::string>(m, "family", "model.", "gauss-bell"));
        cfg.model.c = get_or<double>(m, "c", "model.", 1.0);
        cfg.model.delta = get_or<double>(m, "delta", "model.", 1e4);
    }
    if (j.contains("noise") && !j.at("noise").is_null()) {
        const auto& n = j.at("noise");
        reject_unknown(n, {"family", "mu"}, "noise.");
        cfg.noise = NoiseModel{parse_noise_family(get_or<std::string>(n, "family", "noise.", "exp-abs")),
                               get_or<double>(n, "mu", "noise.", 1.0)};
    }
    cfg.T = get_or<double>(j, "T", "", cfg.T);
    cfg.tau_grid = get_or<std::vector<double>>(j, "tau_grid", "", cfg.tau_grid);
    if (j.contains("h") && !j.at("h").is_null()) cfg.h = get_or<double>(j, "h", "", 0.0);
    if (j.contains("trunc_radius") && !j.at("trunc_radius").is_null())
        cfg.trunc_radius = get_or<double>(j, "trunc_radius", "", 0.0);
    cfg.replicates = get_or<int>(j, "replicates", "", cfg.replicates);
    cfg.seed = get_or<std::uint64_t>(j, "seed", "", cfg.seed);
    if (j.contains("ladder")) {
        if (!j.at("ladder").is_array()) throw ConfigError("config key 'ladder' must be an array");
        cfg.ladder.clear();
        for (std::size_t i = 0; i < j.at("ladder").size(); ++i)
            cfg.ladder.push_back(rung_from_json(j.at("ladder")[i], "ladder[" + std::to_string(i) + "]"));
    }
    cfg.bias_deltas = get_or<std::vector<double>>(j, "bias_deltas", "", cfg.bias_deltas);
    if (j.contains("sup")) {
        const auto& s = j.at("sup");
        reject_unknown(s, {"a", "b", "lags", "x"}, "sup.");
        cfg.sup.a = get_or<double>(s, "a", "sup.", cfg.sup.a);
        cfg.sup.b = get_or<double>(s, "b", "sup.", cfg.sup.b);
        cfg.sup.lags = get_or<int>(s, "lags", "sup.", cfg.sup.lags);
        cfg.sup.x = get_or<std::vector<double>>(s, "x", "sup.", cfg.sup.x);
    }
    cfg.normality_order = get_or<int>(j, "normality_order", "", cfg.normality_order);
    if (j.contains("control_rung") && !j.at("control_rung").is_null())
        cfg.control_rung = rung_from_json(j.at("control_rung"), "control_rung");
    cfg.output_dir = get_or<std::string>(j, "output_dir", "", cfg.output_dir);
    cfg.workers = get_or<int>(j, "workers", "", cfg.workers);
    return cfg;
}

void VerificationReport::finalize() {
    pass = !error;
    for (auto& s : sections) {
        s.finalize();
        pass = pass && s.pass;
    }
    for (const auto& c : checks)
        if (!c.informational) pass = pass && c.pass;
}

json to_json(const VerificationReport& r) {
    json checks = json::array();
    for (const auto& c : r.checks) {
        json j{{"name", c.name},          {"property", c.property},           {"empirical", c.empirical},
               {"theoretical", c.theoretical}, {"std_error", c.std_error}, {"pass", c.pass},
               {"informational", c.informational}};
        if (!c.note.empty()) j["note"] = c.note;
        checks.push_back(std::move(j));
    }
    json out{{"name", r.name}, {"property", r.property}, {"pass", r.pass}, {"checks", checks}};
    if (r.error) out["error"] = *r.error;
    if (!r.sections.empty()) {
        json s = json::array();
        for (const auto& sec : r.sections) s.push_back(to_json(sec));
        out["sections"] = s;
    }
    return out;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
    if (workers <= 0) workers = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    workers = std::min(workers, std::max(n, 1));
    if (workers == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += workers) fn(i);
            } catch (...) {
                std::lock_guard lock(mutex);
                if (!failure) failure = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

const RungSamples& SampleStore::get(const ExperimentConfig& cfg, const LadderRung& rung, Drive drive,
                                    const std::vector<double>& taus) {
    std::ostringstream key;
    key.precision(17);
    key << config_key(cfg) << '|' << rung.T << ' ' << rung.delta << ' ' << drive_name(drive) << '|';
    for (double t : taus) key << t << ' ';
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(key.str()); it != cache_.end()) return *it->second;

    auto s = std::make_unique<RungSamples>();
    s->rung = rung;
    s->h = step_for(cfg, rung);
    s->trunc_radius = trunc_radius_for(cfg);
    const auto model = model_at(cfg, rung.delta);
    double lo = 0, hi = rung.T;
    for (double t : taus) {
        lo = std::min(lo, snap_lag(t, s->h));
        hi = std::max(hi, rung.T + snap_lag(t, s->h));
    }
    const SystemSimulator sim(cfg.tf, model, cfg.noise, make_grid(lo, hi, s->h), s->trunc_radius, drive);
    s->tail_l2 = sim.tail_l2();
    const std::uint64_t master =
        fnv1a(std::to_string(cfg.seed) + "|" + fmt(rung.T) + "|" + fmt(rung.delta) + "|" + drive_name(drive));
    s->h_hat.resize(cfg.replicates, static_cast<Eigen::Index>(taus.size()));
    std::vector<double> snapped;
    for (double t : taus) snapped.push_back(snap_lag(t, s->h));
    s->taus = snapped;
    parallel_for(cfg.replicates, cfg.workers, [&](int r) {
        const auto d = sim.draw(master, static_cast<std::uint64_t>(r));
        const auto e = correlogram(d.x, d.y, rung.T, model.c, snapped);
        for (std::size_t k = 0; k < snapped.size(); ++k) s->h_hat(r, static_cast<Eigen::Index>(k)) = e.h_hat[k];
    });
    return *cache_.emplace(key.str(), std::move(s)).first->second;
}

VerificationReport run_covariance_check(const ExperimentConfig& cfg, SampleStore* store) {
    validate(cfg);
    require_replicates(cfg, 100, "covariance check");
    SampleStore local;
    SampleStore& st = store ? *store : local;
    VerificationReport rep;
    rep.name = "covariance";
    rep.property = "covariance of sqrt(T)(H_hat - E H_hat) against the finite-T and limit covariance";

    const LadderRung rung{cfg.T, cfg.model.delta};
    const auto model = model_at(cfg, rung.delta);
    const auto& s = st.get(cfg, rung, Drive::Gaussian, lags_for(cfg, rung));
    const auto rows = grid_rows(cfg);
    const std::vector<double> taus(s.taus.begin(), s.taus.begin() + static_cast<long>(rows.size()));

    ExpectationCache cache;
    const auto mean = cache.get(cfg.tf, model, taus, default_theory_spec());
    Eigen::MatrixXd z(s.h_hat.rows(), static_cast<Eigen::Index>(taus.size()));
    for (std::size_t k = 0; k < taus.size(); ++k)
        z.col(static_cast<Eigen::Index>(k)) =
            std::sqrt(cfg.T) * (s.h_hat.col(rows[k]).array() - mean[k]).matrix();
    const auto cum = sample_joint_cumulants(z, 2);
    const auto finite = finiteT_surface(cfg.tf, model, cfg.noise, cfg.T, taus);
    const auto limit = limit_surface(cfg.tf, scaled_noise(cfg), taus);

    auto& csv = table(rep, "covariance.csv",
                      {"T", "delta", "tau1", "tau2", "empirical", "std_error", "finite_T", "limit", "pass"});
    for (const auto& c : cum) {
        if (c.order != 2) continue;
        const int i = c.indices[0], j = c.indices[1];
        const double ft = finite.values(i, j), lim = limit.values(i, j);
        const bool ok = std::abs(c.estimate - ft) <= 4 * c.std_error;
        const std::string where = "(" + fmt(taus[i]) + ", " + fmt(taus[j]) + ")";
        rep.checks.push_back({"cov" + where + " vs finite T", "empirical covariance within 4 SE of the finite-T covariance",
                              c.estimate, ft, c.std_error, ok, false, ""});
        rep.checks.push_back({"cov" + where + " vs limit", "distance to the limit covariance (informational)",
                              c.estimate, lim, c.std_error, std::abs(c.estimate - lim) <= 4 * c.std_error, true, ""});
        csv.rows.push_back({fmt(cfg.T), fmt(rung.delta), fmt(taus[i]), fmt(taus[j]), fmt(c.estimate),
                            fmt(c.std_error), fmt(ft), fmt(lim), ok ? "1" : "0"});
    }

    std::vector<double> gaps;
    auto& plot = table(rep, "plotdata/covariance_ladder.csv", {"T", "delta", "max_abs_finite_T_minus_limit"});
    for (const auto& r : cfg.ladder) {
        const auto ft = finiteT_surface(cfg.tf, model_at(cfg, r.delta), cfg.noise, r.T, taus);
        gaps.push_back((ft.values - limit.values).cwiseAbs().maxCoeff());
        plot.rows.push_back({fmt(r.T), fmt(r.delta), fmt(gaps.back())});
    }
    rep.checks.push_back({"finite-T to limit gap along the ladder",
                          "max |C_T - C_inf| strictly decreases along the coupled ladder", gaps.back(), 0.0, 0.0,
                          strictly_decreasing_or_zero(gaps), false, join(gaps)});
    rep.finalize();
    return rep;
}

VerificationReport run_normality_check(const ExperimentConfig& cfg, int m, SampleStore* store) {
    if (m < 3 || m > 4) throw ConfigError("normality check: order must be 3 or 4");
    validate(cfg);
    require_replicates(cfg, 2000, "normality check");
    SampleStore local;
    SampleStore& st = store ? *store : local;
    VerificationReport rep;
    rep.name = "normality";
    rep.property = "joint cumulants of order 3.." + std::to_string(m) + " of the scaled estimator vanish";

    const std::size_t L = std::min<std::size_t>(3, cfg.tau_grid.size());
    auto cumulants_at = [&](const LadderRung& rung, Drive drive) {
        const auto& s = st.get(cfg, rung, drive, drive == Drive::Gaussian ? lags_for(cfg, rung) : cfg.tau_grid);
        Eigen::MatrixXd z = std::sqrt(rung.T) * s.h_hat.leftCols(static_cast<Eigen::Index>(L));
        std::vector<CumulantReport> out;
        for (auto& c : sample_joint_cumulants(z, m))
            if (c.order >= 3) out.push_back(c);
        return std::pair{s.taus, out};
    };

    auto& csv = table(rep, "cumulants.csv", {"drive", "T", "delta", "order", "indices", "estimate", "std_error"});
    auto& trend = table(rep, "plotdata/cumulant_trend.csv", {"T", "delta", "order", "max_abs_estimate"});
    std::map<int, std::vector<double>> max_abs;
    for (std::size_t r = 0; r < cfg.ladder.size(); ++r) {
        const auto& rung = cfg.ladder[r];
        const auto [taus, cum] = cumulants_at(rung, Drive::Gaussian);
        std::map<int, double> peak;
        for (const auto& c : cum) {
            csv.rows.push_back({"gaussian", fmt(rung.T), fmt(rung.delta), std::to_string(c.order), fmt_tuple(c.indices),
                                fmt(c.estimate), fmt(c.std_error)});
            peak[c.order] = std::max(peak[c.order], std::abs(c.estimate));
            if (r + 1 == cfg.ladder.size()) {
                std::string lags;
                for (int i : c.indices) lags += (lags.empty() ? "" : ", ") + fmt(taus[i]);
                rep.checks.push_back({"k" + std::to_string(c.order) + "(" + lags + ") at the final rung",
                                      "joint cumulant within 4 SE of 0", c.estimate, 0.0, c.std_error,
                                      std::abs(c.estimate) <= 4 * c.std_error, false, ""});
            }
        }
        for (const auto& [order, v] : peak) {
            max_abs[order].push_back(v);
            trend.rows.push_back({fmt(rung.T), fmt(rung.delta), std::to_string(order), fmt(v)});
        }
    }
    for (const auto& [order, v] : max_abs) {
        bool non_increasing = true;
        for (std::size_t i = 1; i < v.size(); ++i) non_increasing = non_increasing && v[i] <= v[i - 1];
        rep.checks.push_back({"max |k" + std::to_string(order) + "| along the ladder",
                              "cumulant magnitudes do not increase along the ladder (informational)", v.back(), 0.0,
                              0.0, non_increasing, true, join(v)});
    }

    const LadderRung control = cfg.control_rung ? *cfg.control_rung : cfg.ladder.front();
    const auto [ctaus, ccum] = cumulants_at(control, Drive::Squared);
    double worst = 0, worst_est = 0, worst_se = 0;
    for (const auto& c : ccum) {
        csv.rows.push_back({"squared", fmt(control.T), fmt(control.delta), std::to_string(c.order),
                            fmt_tuple(c.indices), fmt(c.estimate), fmt(c.std_error)});
        if (c.order != m || c.std_error <= 0) continue;
        const double ratio = std::abs(c.estimate) / c.std_error;
        if (ratio > worst) worst = ratio, worst_est = c.estimate, worst_se = c.std_error;
    }
    rep.checks.push_back({"squared-drive control", "a non-Gaussian drive is flagged: some |k" + std::to_string(m) +
                                                       "| exceeds 4 SE",
                          worst_est, 0.0, worst_se, worst > 4, false,
                          "T = " + fmt(control.T) + ", delta = " + fmt(control.delta) + ", max |k|/SE = " + fmt(worst)});
    rep.finalize();
    return rep;
}

VerificationReport run_bias_check(const ExperimentConfig& cfg, SampleStore* store) {
    validate(cfg);
    require_replicates(cfg, 100, "bias check");
    SampleStore local;
    SampleStore& st = store ? *store : local;
    VerificationReport rep;
    rep.name = "bias";
    rep.property = "bias of the estimator vanishes; its sqrt(T) scaling vanishes under the coupled ladder";

    auto& csv = table(rep, "bias.csv",
                      {"T", "delta", "tau", "mc_mean_bias", "std_error", "theory_bias", "pass"});
    auto& coupled = table(rep, "plotdata/bias_coupled_ladder.csv", {"T", "delta", "sup_abs_scaled_bias", "mse"});
    const auto rows = grid_rows(cfg);
    const double R = cfg.replicates;
    std::vector<double> scaled, mse;
    for (const auto& rung : cfg.ladder) {
        const auto& s = st.get(cfg, rung, Drive::Gaussian, lags_for(cfg, rung));
        const std::vector<double> taus(s.taus.begin(), s.taus.begin() + static_cast<long>(rows.size()));
        const auto theory = bias_curve(cfg.tf, model_at(cfg, rung.delta), taus);
        double sq = 0, sup = 0;
        for (std::size_t k = 0; k < taus.size(); ++k) {
            const double H = eval_H(cfg.tf, taus[k]);
            const Eigen::ArrayXd err = s.h_hat.col(rows[k]).array() - H;
            const double m = err.mean();
            const double var = (err - m).square().sum() / (R - 1);
            const double se = std::sqrt(var / R);
            const bool ok = std::abs(m - theory.values[k]) <= 4 * se;
            rep.checks.push_back({"mean bias at T = " + fmt(rung.T) + ", tau = " + fmt(taus[k]),
                                  "Monte Carlo mean of H_hat - H within 4 SE of the bias formula", m,
                                  theory.values[k], se, ok, false, ""});
            csv.rows.push_back({fmt(rung.T), fmt(rung.delta), fmt(taus[k]), fmt(m), fmt(se), fmt(theory.values[k]),
                                ok ? "1" : "0"});
            sq += err.square().mean() / static_cast<double>(taus.size());
            sup = std::max(sup, std::abs(theory.values[k]));
        }
        scaled.push_back(std::sqrt(rung.T) * sup);
        mse.push_back(sq);
        coupled.rows.push_back({fmt(rung.T), fmt(rung.delta), fmt(scaled.back()), fmt(sq)});
    }

    std::vector<double> by_delta;
    auto& dl = table(rep, "plotdata/bias_delta_ladder.csv", {"delta", "sup_abs_bias"});
    for (double d : cfg.bias_deltas) {
        const auto b = bias_curve(cfg.tf, model_at(cfg, d), cfg.tau_grid);
        double sup = 0;
        for (double v : b.values) sup = std::max(sup, std::abs(v));
        by_delta.push_back(sup);
        dl.rows.push_back({fmt(d), fmt(sup)});
    }
    rep.checks.push_back({"sup |bias| along delta", "sup |v_delta| strictly decreases as delta grows", by_delta.back(),
                          0.0, 0.0, strictly_decreasing_or_zero(by_delta), false, join(by_delta)});
    rep.checks.push_back({"sup |sqrt(T) bias| along the coupled ladder",
                          "sup |V_{T,delta}| strictly decreases along the coupled ladder", scaled.back(), 0.0, 0.0,
                          strictly_decreasing_or_zero(scaled), false, join(scaled)});
    rep.checks.push_back({"mean-square error along the coupled ladder",
                          "Monte Carlo mean-square error strictly decreases along the coupled ladder", mse.back(), 0.0,
                          0.0, strictly_decreasing_or_zero(mse), false, join(mse)});

    // delta = T keeps T delta^{-1} fixed: the scaled bias need not shrink
    std::vector<double> neg;
    auto& nc = table(rep, "plotdata/bias_negative_control.csv", {"T", "delta", "sup_abs_scaled_bias"});
    for (const auto& rung : cfg.ladder) {
        const auto b = bias_curve(cfg.tf, model_at(cfg, rung.T), cfg.tau_grid, rung.T);
        double sup = 0;
        for (double v : b.values) sup = std::max(sup, std::abs(v));
        neg.push_back(sup);
        nc.rows.push_back({fmt(rung.T), fmt(rung.T), fmt(sup)});
    }
    const bool shrinks = strictly_decreasing_or_zero(neg);
    rep.checks.push_back({"delta = T control", "scaled bias when delta grows only like T (informational)", neg.back(),
                          0.0, 0.0, !shrinks, true,
                          join(neg) + (shrinks ? "; decreasing for this transfer function" : "; not decreasing")});
    rep.finalize();
    return rep;
}

VerificationReport run_sup_check(const ExperimentConfig& cfg, const std::vector<double>& x_list, SampleStore* store) {
    validate(cfg);
    require_replicates(cfg, 2000, "supremum check");
    if (cfg.sup.lags < 64) throw ConfigError("config key 'sup.lags': the supremum check needs at least 64 lags");
    SampleStore local;
    SampleStore& st = store ? *store : local;
    VerificationReport rep;
    rep.name = "supremum";
    rep.property = "exceedance of sup |W| over [a, b] against the limit Gaussian process and the entropy tail bound";

    const auto& rung = cfg.ladder.back();
    const auto lags = lags_for(cfg, rung);
    const auto& s = st.get(cfg, rung, Drive::Gaussian, lags);
    const double h = s.h;
    const auto lattice = sup_lattice(cfg.sup);
    std::vector<int> cols;
    std::vector<double> taus;
    for (double t : lattice) {
        const double snapped = snap_lag(t, h);
        for (std::size_t k = 0; k < s.taus.size(); ++k)
            if (s.taus[k] == snapped) {
                cols.push_back(static_cast<int>(k));
                taus.push_back(snapped);
                break;
            }
    }
    const int n = static_cast<int>(taus.size());
    const int R = cfg.replicates;

    std::vector<double> sup_w(R), sup_w_half(R);
    for (int r = 0; r < R; ++r) {
        double full = 0, half = 0;
        for (int k = 0; k < n; ++k) {
            const double w = std::sqrt(rung.T) * std::abs(s.h_hat(r, cols[k]) - eval_H(cfg.tf, taus[k]));
            full = std::max(full, w);
            if (k % 2 == 0) half = std::max(half, w);
        }
        sup_w[r] = full;
        sup_w_half[r] = half;
    }

    const auto limit = limit_surface(cfg.tf, scaled_noise(cfg), taus);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(limit.values);
    if (eig.eigenvalues().minCoeff() < -1e-8)
        throw NonPSD("limit covariance on the supremum grid has eigenvalue " + fmt(eig.eigenvalues().minCoeff()));
    const Eigen::MatrixXd root =
        eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    std::vector<double> sup_z(R);
    parallel_for(R, cfg.workers, [&](int r) {
        auto gen = make_engine({cfg.seed, static_cast<std::uint64_t>(r), "limit-z"});
        std::normal_distribution<double> normal;
        Eigen::VectorXd xi(n);
        for (int k = 0; k < n; ++k) xi[k] = normal(gen);
        sup_z[r] = (root * xi).cwiseAbs().maxCoeff();
    });

    std::vector<double> xs = x_list;
    if (xs.empty()) {
        for (double q : {0.5, 0.75, 0.9, 0.95, 0.99}) xs.push_back(quantile(sup_z, q));
        const double top = std::max(*std::max_element(sup_z.begin(), sup_z.end()),
                                    *std::max_element(sup_w.begin(), sup_w.end()));
        xs.push_back(2 * top);
    }

    const auto dudley = dudley_entropy(cfg.tf, scaled_noise(cfg), cfg.sup.a, cfg.sup.b);
    auto& csv = table(rep, "sup.csv", {"x", "freq_W", "freq_Z", "std_error", "bound", "bound_valid", "pass"});
    auto& plot = table(rep, "plotdata/sup_exceedance.csv", {"x", "freq_W", "freq_Z", "bound"});
    for (double x : xs) {
        const double fw = std::count_if(sup_w.begin(), sup_w.end(), [&](double v) { return v > x; }) / double(R);
        const double fz = std::count_if(sup_z.begin(), sup_z.end(), [&](double v) { return v > x; }) / double(R);
        const double se = std::sqrt(fw * (1 - fw) / R + fz * (1 - fz) / R);
        const bool ok = std::abs(fw - fz) <= 4 * se;
        rep.checks.push_back({"P(sup |W| > " + fmt(x) + ")", "exceedance of W within 4 binomial SE of the limit process",
                              fw, fz, se, ok, false, ""});
        std::optional<double> bound;
        try {
            bound = sup_tail_bound(dudley, x);
        } catch (const ValidityRegion&) {
        }
        if (bound) {
            const bool dom = *bound >= fw && *bound >= fz;
            rep.checks.push_back({"tail bound at " + fmt(x), "entropy tail bound dominates both exceedance frequencies",
                                  std::max(fw, fz), *bound, 0.0, dom, false, ""});
        }
        csv.rows.push_back({fmt(x), fmt(fw), fmt(fz), fmt(se), bound ? fmt(*bound) : "nan", bound ? "1" : "0",
                            ok ? "1" : "0"});
        plot.rows.push_back({fmt(x), fmt(fw), fmt(fz), bound ? fmt(*bound) : "nan"});
    }

    double gap = 0;
    for (int r = 0; r < R; ++r) gap += (sup_w[r] - sup_w_half[r]) / R;
    rep.checks.push_back({"grid refinement", "mean gain of the grid supremum from halving the lag spacing (informational)",
                          gap, 0.0, 0.0, true, true,
                          "Dudley integral " + fmt(dudley.entropy_integral) + ", bound valid for x >= " +
                              fmt(8 * dudley.entropy_integral)});
    rep.finalize();
    return rep;
}

VerificationReport run_all(const ExperimentConfig& cfg) {
    validate(cfg);
    SampleStore store;
    VerificationReport all;
    all.name = "all";
    all.property = "covariance, normality, bias and supremum checks";
    auto guarded = [&](const std::string& name, const std::function<VerificationReport()>& run) {
        try {
            all.sections.push_back(run());
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            VerificationReport failed;
            failed.name = name;
            failed.error = e.what();
            all.sections.push_back(std::move(failed));
        }
    };
    guarded("covariance", [&] { return run_covariance_check(cfg, &store); });
    guarded("normality", [&] { return run_normality_check(cfg, cfg.normality_order, &store); });
    guarded("bias", [&] { return run_bias_check(cfg, &store); });
    guarded("supremum", [&] { return run_sup_check(cfg, cfg.sup.x, &store); });
    for (const auto& s : all.sections)
        for (const auto& [name, t] : s.tables) {
            auto& dst = all.tables[name];
            if (dst.header.empty()) dst.header = t.header;
            dst.rows.insert(dst.rows.end(), t.rows.begin(), t.rows.end());
        }
    all.finalize();
    return all;
}

void write_results(const VerificationReport& report, const ExperimentConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(dir) / "plotdata");
    auto put = [&](const std::string& name, const std::string& text) {
        const fs::path target = fs::path(dir) / name;
        const fs::path tmp = target.string() + ".tmp";
        {
            std::ofstream os(tmp, std::ios::binary);
            os << text;
            if (!os) throw Error("cannot write " + tmp.string());
        }
        fs::rename(tmp, target);
    };
    put("report.json", to_json(report).dump(2) + "\n");
    put("config.json", to_json(cfg).dump(2) + "\n");
    for (const auto& [name, t] : report.tables) {
        std::ostringstream os;
        for (std::size_t i = 0; i < t.header.size(); ++i) os << (i ? "," : "") << t.header[i];
        os << '\n';
        for (const auto& row : t.rows) {
            for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << row[i];
            os << '\n';
        }
        put(name, os.str());
    }
}

}  // namespace xcorr
