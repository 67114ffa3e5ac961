#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"
#include "xcorr/simulate.hpp"
#include "xcorr/spectral_models.hpp"
#include "xcorr/transfer_catalog.hpp"

namespace xcorr {

struct LadderRung {
    double T = 0.0;
    double delta = 0.0;
};

struct SupSettings {
    double a = 0.0;
    double b = 1.0;
    int lags = 65;
    std::vector<double> x;  // empty: quantiles of the simulated limit supremum
};

struct ExperimentConfig {
    TransferFunction tf = low_pass(1.0);
    SpectralModel model{SpectralFamily::GaussBell, 1.0, 1e4};
    std::optional<NoiseModel> noise;
    double T = 100.0;
    std::vector<double> tau_grid{0.0, 0.5, 1.0};
    std::optional<double> h;             // default: default_step per rung
    std::optional<double> trunc_radius;  // default: default_truncation
    int replicates = 4000;
    std::uint64_t seed = 1;
    std::vector<LadderRung> ladder{{25, 625}, {100, 1e4}, {400, 1.6e5}};
    std::vector<double> bias_deltas{1e2, 1e3, 1e4};
    SupSettings sup;
    int normality_order = 4;
    std::optional<LadderRung> control_rung;  // squared-drive control; default: first ladder rung
    std::string output_dir = "results";
    int workers = 0;  // 0: hardware concurrency
};

// Throws ConfigError naming the offending key.
void validate(const ExperimentConfig& cfg);
nlohmann::json to_json(const ExperimentConfig& cfg);
// Unknown keys are rejected with ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j);
// Ladder entries given as {"T": t} get delta = t^2.
std::vector<LadderRung> coupled_ladder(const std::vector<double>& Ts);

struct CheckResult {
    std::string name;
    std::string property;  // what the check instantiates
    double empirical = 0.0;
    double theoretical = 0.0;
    double std_error = 0.0;
    bool pass = true;
    bool informational = false;  // reported, never fails the section
    std::string note;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

struct VerificationReport {
    std::string name;
    std::string property;
    std::vector<CheckResult> checks;
    std::vector<VerificationReport> sections;
    std::optional<std::string> error;
    bool pass = true;
    // file name relative to the output directory -> rows
    std::map<std::string, CsvTable> tables;

    void finalize();  // pass = no error, every non-informational check and section passes
};

nlohmann::json to_json(const VerificationReport& r);

// Replicate correlograms for one (T, Delta, drive), shared between checks.
struct RungSamples {
    LadderRung rung;
    double h = 0.0;
    double trunc_radius = 0.0;
    double tail_l2 = 0.0;
    std::vector<double> taus;  // snapped
    Eigen::MatrixXd h_hat;     // replicates x lags
};

class SampleStore {
public:
    const RungSamples& get(const ExperimentConfig& cfg, const LadderRung& rung, Drive drive,
                           const std::vector<double>& taus);

private:
    std::mutex mutex_;
    std::map<std::string, std::unique_ptr<RungSamples>> cache_;
};

double step_for(const ExperimentConfig& cfg, const LadderRung& rung);
double trunc_radius_for(const ExperimentConfig& cfg);
// Lags simulated at a rung: the tau grid, plus the supremum lattice at the final ladder rung.
std::vector<double> lags_for(const ExperimentConfig& cfg, const LadderRung& rung);
std::vector<double> sup_lattice(const SupSettings& s);

VerificationReport run_covariance_check(const ExperimentConfig& cfg, SampleStore* store = nullptr);
VerificationReport run_normality_check(const ExperimentConfig& cfg, int m, SampleStore* store = nullptr);
VerificationReport run_bias_check(const ExperimentConfig& cfg, SampleStore* store = nullptr);
VerificationReport run_sup_check(const ExperimentConfig& cfg, const std::vector<double>& x_list,
                                 SampleStore* store = nullptr);
VerificationReport run_all(const ExperimentConfig& cfg);

// Writes report.json, config.json and every table; each file goes through a temporary
// name and a rename.
void write_results(const VerificationReport& report, const ExperimentConfig& cfg, const std::string& dir);

// Runs fn(i) for i in [0, n) on the configured number of threads.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace xcorr
