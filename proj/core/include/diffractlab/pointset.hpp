#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "diffractlab/geometry.hpp"

namespace dlab::pointset {

// Cut-and-project data: an embedding lattice in d+m dimensions together
// with the physical and internal projections and a half-open window box.
struct CutProjectScheme {
    int phys_dim = 1;                 // d
    int internal_dim = 1;             // m
    SmallMat lattice_basis;           // (d+m)x(d+m), columns are basis vectors
    SmallMat physical_projection;     // d x (d+m)
    SmallMat internal_projection;     // m x (d+m)
    std::vector<double> window_lo;    // internal box, half-open [lo, hi)
    std::vector<double> window_hi;
    std::string name;                 // preset id, empty for custom schemes

    int total_dim() const { return phys_dim + internal_dim; }
    void validate() const;
};

// Fibonacci chain preset: Z^2 embedded with rows (1, tau) / (1, -1/tau),
// window a half-open interval of length tau at a generic irrational offset.
CutProjectScheme fibonacci_scheme(double window_offset = -0.5203, double window_length = 0.0);

// Silver-mean analogue with lambda = 1 + sqrt(2).
CutProjectScheme silver_scheme(double window_offset = -1.1839, double window_length = 0.0);

struct LatticeGenerator {
    SmallMat basis;  // d x d, columns generate the lattice
};

struct ModelSetGenerator {
    CutProjectScheme scheme;
};

using Generator = std::variant<LatticeGenerator, ModelSetGenerator>;

// Finite realization of a point set inside the closed ball B_r(0).
// Points are pairwise distinct and stored in lexicographic order.
class PointSetPatch {
public:
    PointSetPatch(std::vector<Vec> points, int dim, double radius, Generator generator);

    const std::vector<Vec>& points() const { return points_; }
    std::size_t size() const { return points_.size(); }
    int dim() const { return dim_; }
    double radius() const { return radius_; }
    const Generator& generator() const { return generator_; }

    bool is_lattice() const { return std::holds_alternative<LatticeGenerator>(generator_); }
    const SmallMat* lattice_basis() const;

    // Positive uniform-discreteness witness (min pairwise distance).
    double min_spacing() const { return min_spacing_; }

    // Index of a point by quantized position; nullopt if absent.
    std::optional<std::size_t> index_of(const Vec& x) const;
    bool contains(const Vec& x) const { return index_of(x).has_value(); }

    std::string generator_descriptor() const;

private:
    std::vector<Vec> points_;
    int dim_;
    double radius_;
    Generator generator_;
    double min_spacing_ = 0.0;
    std::map<QKey, std::size_t> index_;
};

// All lattice points B*n with ||B*n|| <= r, canonical order.
PointSetPatch generate_lattice_patch(const SmallMat& basis, double r);

// All physical projections of embedding-lattice points whose internal
// projection falls in the window and whose physical part lies in B_r(0).
// The integer search region is derived from projection norms, so it
// provably covers every admissible lattice point.
PointSetPatch generate_model_set_patch(const CutProjectScheme& scheme, double r);

// Visits every ordered pair (i, j) with ||points[i] - points[j]|| <= cutoff,
// including i == j, exactly once.
void for_close_pairs(const PointSetPatch& patch, double cutoff,
                     const std::function<void(std::size_t, std::size_t)>& fn);

// Distinct differences x - y with ||z|| <= cutoff and their pair counts.
// Symmetric in z; contains z = 0 with multiplicity = point count.
std::vector<std::pair<Vec, std::size_t>> difference_set(const PointSetPatch& patch, double cutoff);

// Index-pair catalogue behind difference_set: for each difference z the
// ordered pairs (i, j) with points[i] - points[j] = z. Shared by the
// autocorrelation estimators so every table joins on identical keys.
struct PairTable {
    std::map<QKey, std::vector<std::pair<std::uint32_t, std::uint32_t>>> pairs;
};
PairTable build_pair_table(const PointSetPatch& patch, double cutoff);

// Canonical key of a local cluster: relative positions in lexicographic
// order, quantized.
struct ClusterKey {
    std::vector<QKey> positions;
    auto operator<=>(const ClusterKey&) const = default;
};

struct ClusterStats {
    double frequency = 0.0;
    std::size_t count = 0;
};

struct ClusterTable {
    double radius = 0.0;  // R_c
    std::map<ClusterKey, ClusterStats> entries;
    std::size_t interior_points = 0;
};

// Tally of clusters (Gamma - x) ∩ B_{R_c} over interior points x
// (||x|| <= r - R_c). Frequencies sum to 1.
ClusterTable cluster_frequencies(const PointSetPatch& patch, double cluster_radius);

// Interior sites grouped by their cluster key; the grouping behind
// cluster_frequencies, exposed for the cluster-conditioned estimators.
std::map<ClusterKey, std::vector<std::size_t>> cluster_members(const PointSetPatch& patch,
                                                               double cluster_radius);

// card(patch) / vol(B_r); 0 for an empty patch.
double density_estimate(const PointSetPatch& patch);

}  // namespace dlab::pointset
