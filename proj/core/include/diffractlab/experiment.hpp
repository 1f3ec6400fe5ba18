#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "diffractlab/autocorr.hpp"
#include "diffractlab/diffraction.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

namespace dlab::experiment {

// Flat key=value configuration with dotted section prefixes
// (pointset.radius=200). Every field has a default and serialization
// round-trips losslessly.
struct ExperimentConfig {
    // pointset
    std::string pointset_kind = "lattice";  // lattice | fibonacci | silver
    std::string pointset_basis = "1";       // rows '|', columns ','
    double pointset_radius = 200.0;
    double window_offset = -0.5203;
    double window_length = 0.0;  // 0 = preset default

    // potential
    std::string potential_mode = "none";  // none | bernoulli | gibbs
    std::string species = "1,-1";         // complex entries as re or re:im
    std::string probabilities = "0.5,0.5";
    double beta = 0.1;
    std::string kernel = "finite_range";  // finite_range | exponential | algebraic
    double range = 1.0;
    double j0 = 1.0;
    double kappa = 1.0;
    double q_exponent = 3.0;
    std::string phi = "-1,1|1,-1";  // rows '|', columns ','

    // sampler
    std::size_t sweeps = 2000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 10;
    std::uint64_t seed = 1;
    std::size_t chains = 1;
    std::string boundary = "free";  // free | fixed:<species>

    // analysis
    double cutoff = 16.0;
    double k_spacing = 0.0;  // 0 = 1/(8r)
    double k_window = 1.5;
    double peak_threshold = 50.0;
    double peak_halfwidth = 0.0;  // 0 = 12/r
    double smoothing_bandwidth = 0.0;
    std::string metric = "scaled_euclidean";  // scaled_euclidean | capped
    double metric_t = 1.0;
    double metric_p = 2.0;
    std::string covariance_mode = "translation_average";  // | ensemble
    bool periodic_wrap = false;
    double cluster_range = 0.0;  // > 0: cluster-conditioned covariances (model sets)

    // report tolerances
    double report_l1_tol = 0.05;
    double report_l1_abs_tol = 1.0;  // used when the predicted density is identically zero
    double report_peak_tol = 0.10;

    std::string out_dir = "out";

    static ExperimentConfig from_string(const std::string& text);
    static ExperimentConfig from_file(const std::string& path);
    std::string serialize() const;
    std::uint64_t hash() const;
};

pointset::PointSetPatch build_patch(const ExperimentConfig& config);
gibbs::PotentialSpec build_potential(const ExperimentConfig& config);
gibbs::MetricSpec build_metric(const ExperimentConfig& config);
std::vector<double> build_probabilities(const ExperimentConfig& config);
diffraction::KGrid build_grid(const ExperimentConfig& config, int dim, double radius);

// Pipeline stages; each reads its inputs from out_dir and writes its
// outputs there. Missing upstream files raise an error naming the stage
// that produces them. Returns the process exit status (report: 2 on
// tolerance failure).
int run_stage(const ExperimentConfig& config, const std::string& stage, std::ostream& log);

// generate -> dobrushin -> sample -> autocorr -> diffract -> classify ->
// report, then the manifest.
int run_all(const ExperimentConfig& config, std::ostream& log);

void write_manifest(const ExperimentConfig& config, std::ostream& log);

inline const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {"generate", "dobrushin", "sample", "autocorr",
                                                   "diffract",  "classify",  "report"};
    return names;
}

}  // namespace dlab::experiment
