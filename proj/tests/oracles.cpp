#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace oracles {

BruteForceGibbs::BruteForceGibbs(const dlab::pointset::PointSetPatch& patch,
                                 const dlab::gibbs::PotentialSpec& pot)
    : n_sites_(patch.size()),
      n_species_(pot.species_count()),
      values_(pot.species_values),
      patch_(patch),
      pot_(pot) {
    double total_configs = std::pow(static_cast<double>(n_species_), static_cast<double>(n_sites_));
    if (total_configs > 1e7) throw std::invalid_argument("BruteForceGibbs: patch too large");
    const std::size_t count = static_cast<std::size_t>(total_configs + 0.5);
    std::vector<double> energies(count);
    std::vector<std::uint8_t> config(n_sites_, 1);
    for (std::size_t idx = 0; idx < count; ++idx) {
        energies[idx] = full_energy(config);
        for (std::size_t k = n_sites_; k-- > 0;) {
            if (config[k] < n_species_) {
                ++config[k];
                break;
            }
            config[k] = 1;
        }
    }
    const double emin = *std::min_element(energies.begin(), energies.end());
    probs_.resize(count);
    double z = 0.0;
    for (std::size_t idx = 0; idx < count; ++idx) {
        probs_[idx] = std::exp(-(energies[idx] - emin));
        z += probs_[idx];
    }
    for (double& p : probs_) p /= z;
}

double BruteForceGibbs::full_energy(const std::vector<std::uint8_t>& config) const {
    // every pair, both endpoints in the patch, counted once
    double h = 0.0;
    for (std::size_t i = 0; i < n_sites_; ++i) {
        for (std::size_t j = i + 1; j < n_sites_; ++j) {
            const double jv =
                pot_.kernel_value(dlab::distance(patch_.points()[i], patch_.points()[j]));
            if (jv == 0.0) continue;
            h += pot_.phi_at(config[i], config[j]) * jv;
        }
    }
    return pot_.beta * h;
}

std::uint8_t BruteForceGibbs::species_at(std::size_t flat_config, std::size_t site) const {
    // site 0 is the most significant digit
    std::size_t div = 1;
    for (std::size_t k = site + 1; k < n_sites_; ++k) div *= n_species_;
    return static_cast<std::uint8_t>(1 + (flat_config / div) % n_species_);
}

Complex BruteForceGibbs::site_mean(std::size_t site) const {
    Complex out{0.0, 0.0};
    for (std::size_t c = 0; c < probs_.size(); ++c)
        out += probs_[c] * values_[species_at(c, site) - 1];
    return out;
}

Complex BruteForceGibbs::pair_moment(std::size_t site_a, std::size_t site_b) const {
    Complex out{0.0, 0.0};
    for (std::size_t c = 0; c < probs_.size(); ++c)
        out += probs_[c] * values_[species_at(c, site_a) - 1] *
               std::conj(values_[species_at(c, site_b) - 1]);
    return out;
}

Complex BruteForceGibbs::covariance(std::size_t site_a, std::size_t site_b) const {
    return pair_moment(site_a, site_b) - site_mean(site_a) * std::conj(site_mean(site_b));
}

std::vector<double> BruteForceGibbs::conditional(const std::vector<std::size_t>& sites,
                                                 const std::vector<std::uint8_t>& base) const {
    std::size_t table = 1;
    for (std::size_t k = 0; k < sites.size(); ++k) table *= n_species_;
    std::vector<double> out(table, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < probs_.size(); ++c) {
        bool matches = true;
        for (std::size_t s = 0; s < n_sites_ && matches; ++s) {
            if (std::find(sites.begin(), sites.end(), s) != sites.end()) continue;
            matches = species_at(c, s) == base[s];
        }
        if (!matches) continue;
        std::size_t idx = 0;
        for (std::size_t site : sites) idx = idx * n_species_ + (species_at(c, site) - 1);
        out[idx] += probs_[c];
        total += probs_[c];
    }
    if (total <= 0.0) throw std::logic_error("conditional: boundary has zero mass");
    for (double& p : out) p /= total;
    return out;
}

double ising_chain_correlation(double beta, long z) {
    return std::pow(std::tanh(beta), static_cast<double>(std::labs(z)));
}

double geometric_series_density(double lambda, double k) {
    const double c = std::cos(2.0 * std::numbers::pi * k);
    return (1.0 - lambda * lambda) / (1.0 - 2.0 * lambda * c + lambda * lambda);
}

std::size_t disk_lattice_count(double b00, double b01, double b10, double b11, double r) {
    std::size_t count = 0;
    const long bound = static_cast<long>(std::ceil(r / std::min({std::abs(b00) + std::abs(b01),
                                                                 std::abs(b10) + std::abs(b11), 1.0}) *
                                                   4.0)) +
                       2;
    for (long n0 = -bound; n0 <= bound; ++n0) {
        for (long n1 = -bound; n1 <= bound; ++n1) {
            const double x = b00 * static_cast<double>(n0) + b01 * static_cast<double>(n1);
            const double y = b10 * static_cast<double>(n0) + b11 * static_cast<double>(n1);
            if (x * x + y * y <= r * r * (1.0 + 4e-12) + 1e-15) ++count;
        }
    }
    return count;
}

std::size_t fibonacci_count(double lo, double hi, double r) {
    const double tau = (1.0 + std::sqrt(5.0)) / 2.0;
    std::size_t count = 0;
    const long mbound = static_cast<long>(std::ceil((r + std::max(std::abs(lo), std::abs(hi)) + 2.0) /
                                                    (tau + 1.0 / tau))) +
                        2;
    for (long m = -mbound; m <= mbound; ++m) {
        // physical n + m tau in [-r, r] pins n to an interval
        const long nlo = static_cast<long>(std::floor(-r - static_cast<double>(m) * tau)) - 1;
        const long nhi = static_cast<long>(std::ceil(r - static_cast<double>(m) * tau)) + 1;
        for (long n = nlo; n <= nhi; ++n) {
            const double phys = static_cast<double>(n) + static_cast<double>(m) * tau;
            if (std::abs(phys) > r * (1.0 + 4e-12) + 1e-15) continue;
            const double internal = static_cast<double>(n) - static_cast<double>(m) / tau;
            if (internal >= lo && internal < hi) ++count;
        }
    }
    return count;
}

std::vector<double> hermitian_eigenvalues(const std::vector<std::vector<Complex>>& m) {
    const std::size_t n = m.size();
    const std::size_t nn = 2 * n;
    // [[Re, -Im], [Im, Re]] has the Hermitian eigenvalues, each twice
    std::vector<std::vector<double>> a(nn, std::vector<double>(nn, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            a[i][j] = m[i][j].real();
            a[i][n + j] = -m[i][j].imag();
            a[n + i][j] = m[i][j].imag();
            a[n + i][n + j] = m[i][j].real();
        }
    }
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < nn; ++p)
            for (std::size_t q = p + 1; q < nn; ++q) off += a[p][q] * a[p][q];
        if (off < 1e-24) break;
        for (std::size_t p = 0; p < nn; ++p) {
            for (std::size_t q = p + 1; q < nn; ++q) {
                if (std::abs(a[p][q]) < 1e-300) continue;
                const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                const double t = (theta >= 0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t k = 0; k < nn; ++k) {
                    const double akp = a[k][p], akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < nn; ++k) {
                    const double apk = a[p][k], aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    std::vector<double> eig(nn);
    for (std::size_t i = 0; i < nn; ++i) eig[i] = a[i][i];
    std::sort(eig.begin(), eig.end());
    // collapse the doubled pairs
    std::vector<double> out;
    for (std::size_t i = 0; i < nn; i += 2) out.push_back((eig[i] + eig[i + 1]) / 2.0);
    return out;
}

}  // namespace oracles
