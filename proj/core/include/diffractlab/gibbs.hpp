#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include "diffractlab/geometry.hpp"
#include "diffractlab/pointset.hpp"

namespace dlab::gibbs {

// Pair kernels J(x - y). Finite range is an indicator of ||x-y|| <= R;
// the decaying kernels are truncated with a certified tail bound wherever
// they enter a sum.
struct FiniteRangeKernel {
    double range = 1.0;
};
struct ExponentialKernel {
    double j0 = 1.0;
    double kappa = 1.0;
};
struct AlgebraicKernel {
    double j0 = 1.0;
    double exponent = 3.0;  // q; requires q > d+1
};
using Kernel = std::variant<FiniteRangeKernel, ExponentialKernel, AlgebraicKernel>;

// Interaction potential: pair term beta * phi(s,t) * J(x-y).
// phi must be symmetric; species values c_i are the (possibly complex)
// scattering strengths attached to each species.
struct PotentialSpec {
    std::vector<Complex> species_values;
    double beta = 0.0;
    Kernel kernel = FiniteRangeKernel{};
    std::vector<double> phi;  // n x n, row-major, symmetric

    std::size_t species_count() const { return species_values.size(); }
    double phi_at(std::size_t s, std::size_t t) const {  // 1-based species
        return phi[(s - 1) * species_count() + (t - 1)];
    }
    double kernel_value(double dist) const;
    // sup - inf of phi over all species pairs
    double phi_spread() const;
    // sup_{i,j} |c_i - c_j|
    double value_spread() const;
    void validate(int dim) const;
};

// Ising convenience: species (+1, -1), phi(s,t) = -sigma_s sigma_t,
// nearest-neighbour indicator of range R.
PotentialSpec ising_potential(double beta, double range = 1.0);

struct Configuration {
    std::vector<std::uint8_t> species;  // 1-based species index per patch point

    std::size_t size() const { return species.size(); }
};

// Site metric entering the exponential weight of the uniqueness criterion.
struct MetricSpec {
    enum class Kind { scaled_euclidean, capped };
    Kind kind = Kind::scaled_euclidean;
    double t = 1.0;
    double p = 2.0;  // capped only; requires p > 1

    double operator()(double euclidean_dist) const;
    void validate() const;
};

struct DobrushinReport {
    double criterion_value = 0.0;  // sup over interior sites of the weighted oscillation sum
    double alpha_bound = 0.0;      // criterion_value / 2
    bool satisfied = false;        // criterion_value < 2
    double covariance_sum_bound = std::numeric_limits<double>::infinity();
    double truncation_radius = 0.0;
    double truncation_error_bound = 0.0;
};

// Oscillation of the pair term {x,y}: beta * |J(x-y)| * (sup-inf of phi),
// by exact enumeration over species pairs.
double oscillation(const PotentialSpec& pot, const Vec& x, const Vec& y);

// Per-site interaction lists within the kernel truncation radius.
struct NeighborTable {
    std::vector<std::vector<std::pair<std::uint32_t, double>>> neighbors;  // (site, J value)
    double truncation_radius = 0.0;
    double tail_bound = 0.0;  // certified bound on sum_{||z||>R} |J(z)|
};
NeighborTable build_neighbor_table(const pointset::PointSetPatch& patch, const PotentialSpec& pot);

// Total energy of the pairs meeting F: sum over pairs {x,y} with
// {x,y} ∩ F nonempty (both endpoints in the patch), each pair once.
double total_energy(const pointset::PointSetPatch& patch, const Configuration& config,
                    std::span<const std::size_t> sites, const PotentialSpec& pot,
                    const NeighborTable& neighbors);
double total_energy(const pointset::PointSetPatch& patch, const Configuration& config,
                    std::span<const std::size_t> sites, const PotentialSpec& pot);

// Exact finite-subsystem conditional distribution: probabilities over
// species^F given the boundary configuration off F.
struct ConditionalTable {
    std::vector<std::size_t> sites;       // sorted patch indices
    std::size_t species_count = 0;
    std::vector<double> probabilities;    // size n^|F|, first site most significant

    std::size_t index_of(std::span<const std::uint8_t> assignment) const;
};
ConditionalTable gibbs_conditional(const pointset::PointSetPatch& patch,
                                   std::span<const std::size_t> sites,
                                   const Configuration& boundary, const PotentialSpec& pot);

struct Boundary {
    enum class Kind { free, fixed };
    Kind kind = Kind::free;
    Configuration values;   // used when fixed; one entry per patch point
    double margin = 0.0;    // frozen shell width; 0 = kernel truncation radius
};

struct SamplerParams {
    std::size_t sweeps = 2000;
    std::size_t burn_in = 1000;
    std::size_t thinning = 10;
    std::uint64_t seed = 1;
    Boundary boundary;
};

// Systematic-scan heat bath; the site update draws from the exact
// single-site conditional, in canonical point order. Returns
// floor(sweeps / thinning) configurations, deterministic given the seed.
std::vector<Configuration> sample_gibbs(const pointset::PointSetPatch& patch,
                                        const PotentialSpec& pot, const SamplerParams& params);

// i.i.d. species draws with probability vector p (the interaction-free,
// possibly biased particle gas).
std::vector<Configuration> sample_bernoulli(const pointset::PointSetPatch& patch,
                                            std::span<const double> probabilities,
                                            std::size_t count, std::uint64_t seed);

// Evaluates the exponentially weighted oscillation-sum criterion over the
// interior sites of the patch, with a certified tail bound for decaying
// kernels. satisfied = criterion < 2.
DobrushinReport dobrushin_check(const PotentialSpec& pot, const pointset::PointSetPatch& patch,
                                const MetricSpec& metric);

// Largest beta* such that the criterion holds strictly for beta < beta*;
// the criterion is linear in beta for every representable potential.
double high_temperature_threshold(const PotentialSpec& pot, const pointset::PointSetPatch& patch,
                                  const MetricSpec& metric);

}  // namespace dlab::gibbs
