#pragma once

// Independent reference computations for the test suites. Everything here
// is deliberately brute force and shares no code path with the library
// estimators it checks.

#include <complex>
#include <cstdint>
#include <vector>

#include "diffractlab/geometry.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

namespace oracles {

using dlab::Complex;
using dlab::Vec;

// Exhaustive finite-volume Gibbs state: enumerates every configuration of
// a small patch and exposes exact expectations.
class BruteForceGibbs {
public:
    BruteForceGibbs(const dlab::pointset::PointSetPatch& patch, const dlab::gibbs::PotentialSpec& pot);

    double probability(std::size_t flat_config) const { return probs_[flat_config]; }
    std::size_t config_count() const { return probs_.size(); }

    // species of site `site` in configuration `flat_config` (1-based)
    std::uint8_t species_at(std::size_t flat_config, std::size_t site) const;

    Complex site_mean(std::size_t site) const;                       // E[H_site]
    Complex pair_moment(std::size_t site_a, std::size_t site_b) const;  // E[H_a conj(H_b)]
    Complex covariance(std::size_t site_a, std::size_t site_b) const;

    // exact conditional distribution of `sites` given the rest of `base`
    std::vector<double> conditional(const std::vector<std::size_t>& sites,
                                    const std::vector<std::uint8_t>& base) const;

private:
    std::size_t n_sites_;
    std::size_t n_species_;
    std::vector<Complex> values_;
    std::vector<double> probs_;
    double full_energy(const std::vector<std::uint8_t>& config) const;
    const dlab::pointset::PointSetPatch& patch_;
    const dlab::gibbs::PotentialSpec& pot_;
};

// Infinite-chain nearest-neighbour +/-1 correlation: tanh(beta)^{|z|}.
// (Also exact for any free-boundary finite chain; checked against the
// brute-force state in the oracle self-test.)
double ising_chain_correlation(double beta, long z);

// sum_z lambda^{|z|} e^{-2pi i k z} = (1-l^2)/(1-2l cos(2pi k)+l^2)
double geometric_series_density(double lambda, double k);

// Points of the integer-combination lattice basis*Z^2 inside the closed
// disk of radius r, counted by direct double loop.
std::size_t disk_lattice_count(double b00, double b01, double b10, double b11, double r);

// Fibonacci-type 1-d cut-and-project count: physical n + m*tau, internal
// n - m/tau accepted in [lo, hi), |physical| <= r.
std::size_t fibonacci_count(double lo, double hi, double r);

// Eigenvalues of a Hermitian matrix via the real symmetric embedding and
// cyclic Jacobi sweeps; returned ascending (each doubled pair collapsed).
std::vector<double> hermitian_eigenvalues(const std::vector<std::vector<Complex>>& m);

}  // namespace oracles
