#pragma once

#include <map>
#include <span>
#include <vector>

#include "diffractlab/geometry.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

namespace dlab::autocorr {

enum class TableKind { unweighted_eta, weighted_eta, covariance };

struct TableEntry {
    Complex value{0.0, 0.0};
    Complex sem{0.0, 0.0};  // standard error of (Re, Im) across samples
};

// Coefficients on the difference set, keyed by quantized z. All estimators
// produce exactly Hermitian tables: entry(-z) == conj(entry(z)) bit for bit.
struct AutocorrelationTable {
    TableKind kind = TableKind::unweighted_eta;
    std::map<QKey, TableEntry> entries;
    double patch_radius = 0.0;
    std::size_t sample_count = 1;
    double cutoff = 0.0;

    bool contains(const Vec& z) const { return entries.count(QKey(z)) != 0; }
    Complex value_or_zero(const Vec& z) const {
        auto it = entries.find(QKey(z));
        return it == entries.end() ? Complex{0.0, 0.0} : it->second.value;
    }
    double sum_abs() const {
        double s = 0.0;
        for (const auto& [k, e] : entries) s += std::abs(e.value);
        return s;
    }
    // max |entry(-z) - conj(entry(z))|; 0 for every table built here
    double hermitian_defect() const;
    // coefficient-wise mean weighted by sample counts
    void merge(const AutocorrelationTable& other);
};

struct EstimatorOptions {
    // Wrap pairs around the patch like a torus (d=1 lattice patches only);
    // removes the O(1/r) boundary deficit of the plain estimator.
    bool periodic_wrap = false;
    // Restrict the left factor H_x to sites with ||x|| <= r - margin.
    double interior_margin = 0.0;
};

enum class CovarianceMode { ensemble, translation_average };

// eta(z) = card{x : x, x-z in patch} / vol(B_r) on the difference set.
AutocorrelationTable eta_unweighted(const pointset::PointSetPatch& patch, double cutoff);

// eta^(H)(z): mean over samples of (1/vol) sum_x H_x conj(H_{x-z}),
// H_x the species value at x.
AutocorrelationTable eta_weighted(const pointset::PointSetPatch& patch,
                                  std::span<const gibbs::Configuration> samples,
                                  std::span<const Complex> species_values, double cutoff,
                                  const EstimatorOptions& opts = {});

// cov(z) = mean(H_x conj(H_{x-z})) - mean_L(H) conj(mean_R(H)); the means
// run over samples only (ensemble, per-site) or samples and sites
// (translation_average, lattice patches only).
AutocorrelationTable covariance_estimate(const pointset::PointSetPatch& patch,
                                         std::span<const gibbs::Configuration> samples,
                                         std::span<const Complex> species_values, double cutoff,
                                         CovarianceMode mode, const EstimatorOptions& opts = {});

struct DecomposeResult {
    AutocorrelationTable weighted;  // eta^(H), the quantity being decomposed
    AutocorrelationTable pp;        // |mean H|^2 * eta(z)
    AutocorrelationTable cov_part;  // dens * cov(z)
    Complex mean_h{0.0, 0.0};
    double density = 0.0;
    double residual = 0.0;  // max_z |eta^H - pp - cov_part|
};

// Splits eta^(H) into the pure-point coefficient |mean|^2 eta and the
// covariance part dens*cov; the residual must be explainable by MC error
// (and is identically ~0 with periodic_wrap).
DecomposeResult decompose(const pointset::PointSetPatch& patch,
                          std::span<const gibbs::Configuration> samples,
                          std::span<const Complex> species_values, double cutoff,
                          const EstimatorOptions& opts = {});

// Exact i.i.d. prediction: |E H|^2 eta(z) + dens (E|H|^2 - |E H|^2) delta_{z,0}.
AutocorrelationTable bernoulli_exact(double dens, const AutocorrelationTable& eta,
                                     std::span<const double> probabilities,
                                     std::span<const Complex> species_values);

struct ClusterConditional {
    struct PerCluster {
        pointset::ClusterKey key;
        double frequency = 0.0;
        std::size_t site_count = 0;
        bool contains_minus_z = false;
        Complex mixed_mean{0.0, 0.0};       // E(H_x conj(H_{x-z}) | cluster)
        Complex left_mean{0.0, 0.0};        // E(H_x | cluster)
        Complex right_mean_conj{0.0, 0.0};  // E(conj(H_{x-z}) | cluster)
        Complex covariance{0.0, 0.0};       // mixed - left*right
    };
    std::vector<PerCluster> clusters;
    Complex aggregate{0.0, 0.0};  // sum_y f_y * cov_y
    Complex aggregate_sem{0.0, 0.0};
    Complex weighted_mixed{0.0, 0.0};  // sum_y f_y * mixed_y
    Vec z;
    double cluster_radius = 0.0;
};

// Groups interior sites by the cluster of radius ||z|| + R around them and
// returns the per-cluster conditional moments plus the frequency-weighted
// conditional covariance sum.
ClusterConditional conditional_by_cluster(const pointset::PointSetPatch& patch,
                                          std::span<const gibbs::Configuration> samples,
                                          std::span<const Complex> species_values,
                                          const pointset::ClusterTable& clusters, const Vec& z,
                                          double interaction_range);

struct SummabilityReport {
    bool is_summable_evidence = false;
    double fitted_exponent = 0.0;  // slope of log|g| vs log||z|| on the tail half
    double fitted_amplitude = 0.0;
    std::vector<double> partial_sums;  // cumulative sum of |g| over growing shells
    double tail_estimate = 0.0;        // extrapolated sum of |g| beyond the cutoff
};

// Decay diagnostics for a coefficient table: reported evidence, never proof.
SummabilityReport summability_check(const AutocorrelationTable& table, int dim);

}  // namespace dlab::autocorr
