#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "diffractlab/autocorr.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"
#include "diffractlab/rng.hpp"
#include "oracles.hpp"

using namespace dlab;
using namespace dlab::gibbs;

namespace {

SmallMat mat1(double a) {
    SmallMat m(1, 1);
    m(0, 0) = a;
    return m;
}

pointset::PointSetPatch z_patch(double r) { return pointset::generate_lattice_patch(mat1(1.0), r); }

std::size_t origin_index(const pointset::PointSetPatch& patch) {
    Vec origin;
    origin.dim = patch.dim();
    return *patch.index_of(origin);
}

}  // namespace

TEST_CASE("oscillation of the nearest-neighbour pair term") {
    const auto pot = ising_potential(0.1);
    CHECK(oscillation(pot, Vec(0.0), Vec(1.0)) == doctest::Approx(0.2).epsilon(1e-14));
    CHECK(oscillation(pot, Vec(0.0), Vec(2.5)) == 0.0);  // out of range
    const auto free = ising_potential(0.0);
    CHECK(oscillation(free, Vec(0.0), Vec(1.0)) == 0.0);
    CHECK_THROWS_AS(oscillation(pot, Vec(1.0), Vec(1.0)), std::invalid_argument);
}

TEST_CASE("total energy of the all-up Ising chain") {
    const auto patch = z_patch(10.0);
    auto pot = ising_potential(1.0);
    Configuration all_up;
    all_up.species.assign(patch.size(), 1);

    const std::size_t mid = origin_index(patch);
    const std::size_t f[] = {mid};
    CHECK(total_energy(patch, all_up, f, pot) == doctest::Approx(-2.0).epsilon(1e-14));

    pot.beta = 0.0;
    CHECK(total_energy(patch, all_up, f, pot) == 0.0);

    pot.beta = 0.7;
    std::vector<std::size_t> all(patch.size());
    std::iota(all.begin(), all.end(), 0);
    CHECK(total_energy(patch, all_up, all, pot) ==
          doctest::Approx(-0.7 * static_cast<double>(patch.size() - 1)).epsilon(1e-12));

    CHECK_THROWS_AS(total_energy(patch, all_up, std::span<const std::size_t>{}, pot),
                    std::invalid_argument);
}

TEST_CASE("free single-site conditional is uniform") {
    const auto patch = z_patch(5.0);
    PotentialSpec pot;
    pot.species_values = {Complex(1, 0), Complex(2, 0), Complex(3, 0)};
    pot.beta = 0.0;
    pot.phi.assign(9, 0.0);
    pot.kernel = FiniteRangeKernel{1.0};
    Configuration boundary;
    boundary.species.assign(patch.size(), 1);
    const std::size_t f[] = {origin_index(patch)};
    const auto table = gibbs_conditional(patch, f, boundary, pot);
    REQUIRE(table.probabilities.size() == 3);
    for (double p : table.probabilities) CHECK(p == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("Ising single-site conditional with aligned neighbours") {
    const auto patch = z_patch(5.0);
    const auto pot = ising_potential(0.5);
    Configuration boundary;
    boundary.species.assign(patch.size(), 1);  // all +1
    const std::size_t f[] = {origin_index(patch)};
    const auto table = gibbs_conditional(patch, f, boundary, pot);
    // P(+1) = e^{1} / (e^{1} + e^{-1})
    const double expected = std::exp(1.0) / (std::exp(1.0) + std::exp(-1.0));
    CHECK(table.probabilities[0] == doctest::Approx(expected).epsilon(1e-14));
    CHECK(table.probabilities[0] + table.probabilities[1] == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("multi-site conditional matches exhaustive enumeration") {
    const auto patch = z_patch(4.0);  // 9 sites
    const auto pot = ising_potential(0.3);
    oracles::BruteForceGibbs exact(patch, pot);

    Configuration boundary;
    boundary.species = {1, 2, 2, 1, 1, 2, 1, 2, 1};
    for (const std::vector<std::size_t> sites : {std::vector<std::size_t>{4},
                                                 std::vector<std::size_t>{3, 4},
                                                 std::vector<std::size_t>{2, 4, 6}}) {
        const auto table = gibbs_conditional(patch, sites, boundary, pot);
        const auto reference = exact.conditional(sites, boundary.species);
        REQUIRE(table.probabilities.size() == reference.size());
        for (std::size_t i = 0; i < reference.size(); ++i)
            CHECK(table.probabilities[i] == doctest::Approx(reference[i]).epsilon(1e-12));
    }
}

TEST_CASE("conditional refuses oversized site sets") {
    const auto patch = z_patch(10.0);
    const auto pot = ising_potential(0.1);
    Configuration boundary;
    boundary.species.assign(patch.size(), 1);
    std::vector<std::size_t> sites(13);
    std::iota(sites.begin(), sites.end(), 0);
    CHECK_THROWS_WITH_AS(gibbs_conditional(patch, sites, boundary, pot), "use sampler",
                         std::invalid_argument);
}

TEST_CASE("sampler is deterministic given the seed") {
    const auto patch = z_patch(32.0);
    const auto pot = ising_potential(0.1);
    SamplerParams params;
    params.sweeps = 50;
    params.burn_in = 10;
    params.thinning = 5;
    params.seed = 99;
    const auto a = sample_gibbs(patch, pot, params);
    const auto b = sample_gibbs(patch, pot, params);
    REQUIRE(a.size() == 10);
    REQUIRE(a.size() == b.size());
    for (std::size_t s = 0; s < a.size(); ++s) CHECK(a[s].species == b[s].species);
}

TEST_CASE("free measure sampling gives uniform single-site frequencies") {
    const auto patch = z_patch(100.0);  // 201 sites
    PotentialSpec pot;
    pot.species_values = {Complex(0, 0), Complex(1, 0), Complex(2, 0)};
    pot.beta = 0.0;
    pot.phi.assign(9, 1.0);
    pot.kernel = FiniteRangeKernel{1.0};
    SamplerParams params;
    params.sweeps = 300;
    params.burn_in = 3;
    params.thinning = 1;
    params.seed = 7;
    const auto samples = sample_gibbs(patch, pot, params);
    const double draws = static_cast<double>(samples.size() * patch.size());
    std::array<double, 3> counts{0, 0, 0};
    for (const auto& cfg : samples)
        for (std::uint8_t sp : cfg.species) counts[sp - 1] += 1.0;
    const double p = 1.0 / 3.0;
    const double sigma = std::sqrt(p * (1.0 - p) * draws);
    for (double c : counts) CHECK(std::abs(c - p * draws) < 3.0 * sigma);
}

TEST_CASE("sampled Ising covariances track the transfer-matrix oracle") {
    const auto patch = z_patch(512.0);
    const auto pot = ising_potential(0.1);
    SamplerParams params;
    params.sweeps = 600;
    params.burn_in = 200;
    params.thinning = 4;
    params.seed = 2024;
    const auto samples = sample_gibbs(patch, pot, params);
    REQUIRE(samples.size() == 150);
    const auto cov = autocorr::covariance_estimate(patch, samples, pot.species_values, 8.0,
                                                   autocorr::CovarianceMode::translation_average);
    for (long z = 0; z <= 8; ++z) {
        const auto entry = cov.entries.at(QKey(Vec(static_cast<double>(z))));
        const double want = oracles::ising_chain_correlation(0.1, z);
        const double sigma = std::max(entry.sem.real(), 1e-6);
        CHECK(std::abs(entry.value.real() - want) < 3.0 * sigma);
        CHECK(std::abs(entry.value.imag()) < 1e-12);
    }
}

TEST_CASE("fixed and free boundaries agree deep inside the patch") {
    const auto patch = z_patch(40.0);
    const auto pot = ising_potential(0.1);
    SamplerParams params;
    params.sweeps = 100000;
    params.burn_in = 500;
    params.thinning = 1;
    params.seed = 5;

    const auto free_samples = sample_gibbs(patch, pot, params);
    params.boundary.kind = Boundary::Kind::fixed;
    params.boundary.values.species.assign(patch.size(), 1);  // all +1 shell
    params.seed = 6;
    const auto fixed_samples = sample_gibbs(patch, pot, params);

    const double n = static_cast<double>(free_samples.size());
    for (std::size_t i = 0; i < patch.size(); ++i) {
        if (std::abs(patch.points()[i][0]) > 20.0) continue;  // distance >= 20 from the boundary
        double p_free = 0.0, p_fixed = 0.0;
        for (const auto& cfg : free_samples) p_free += cfg.species[i] == 1 ? 1.0 : 0.0;
        for (const auto& cfg : fixed_samples) p_fixed += cfg.species[i] == 1 ? 1.0 : 0.0;
        CHECK(std::abs(p_free / n - p_fixed / n) < 0.01);
    }
}

TEST_CASE("uniqueness criterion for the nearest-neighbour chain") {
    const auto patch = z_patch(64.0);
    MetricSpec metric;  // scaled_euclidean, t = 1

    auto pot = ising_potential(0.1);
    auto report = dobrushin_check(pot, patch, metric);
    CHECK(report.criterion_value == doctest::Approx(4.0 * std::exp(1.0) * 0.1).epsilon(1e-12));
    CHECK(report.satisfied);
    CHECK(report.alpha_bound == doctest::Approx(report.criterion_value / 2.0));
    CHECK(report.covariance_sum_bound ==
          doctest::Approx(4.0 / (4.0 * (1.0 - report.alpha_bound))).epsilon(1e-12));

    pot.beta = 0.2;
    report = dobrushin_check(pot, patch, metric);
    CHECK(report.criterion_value == doctest::Approx(4.0 * std::exp(1.0) * 0.2).epsilon(1e-12));
    CHECK_FALSE(report.satisfied);
    CHECK(std::isinf(report.covariance_sum_bound));

    pot.beta = 0.0;
    report = dobrushin_check(pot, patch, metric);
    CHECK(report.criterion_value == 0.0);
    CHECK(report.satisfied);
    CHECK(report.covariance_sum_bound == doctest::Approx(1.0));  // (max|c_i-c_j|)^2 / 4
}

TEST_CASE("criterion is nondecreasing in beta and in J0") {
    const auto patch = z_patch(64.0);
    MetricSpec metric;
    metric.kind = MetricSpec::Kind::capped;
    metric.t = 1.0;
    metric.p = 2.0;
    double last = 0.0;
    for (double beta : {0.01, 0.05, 0.1, 0.2}) {
        PotentialSpec pot = ising_potential(beta);
        pot.kernel = ExponentialKernel{1.0, 2.0};
        const auto rep = dobrushin_check(pot, patch, metric);
        CHECK(rep.criterion_value >= last);
        last = rep.criterion_value;
    }
    last = 0.0;
    for (double j0 : {0.5, 1.0, 2.0}) {
        PotentialSpec pot = ising_potential(0.05);
        pot.kernel = ExponentialKernel{j0, 2.0};
        const auto rep = dobrushin_check(pot, patch, metric);
        CHECK(rep.criterion_value >= last);
        last = rep.criterion_value;
    }
}

TEST_CASE("exponential-kernel criterion agrees with a wide brute-force sum") {
    const auto patch = z_patch(200.0);
    MetricSpec metric;
    metric.kind = MetricSpec::Kind::capped;
    metric.t = 1.0;
    metric.p = 2.0;
    PotentialSpec pot = ising_potential(0.05);
    pot.kernel = ExponentialKernel{1.0, 2.0};

    const auto rep = dobrushin_check(pot, patch, metric);
    // independent wide-truncation sum over the infinite chain
    double brute = 0.0;
    for (long z = 1; z <= 1000; ++z) {
        const double dist = static_cast<double>(z);
        const double weight = std::exp(std::min(metric.t * dist, 2.0 * std::log1p(dist)));
        brute += 2.0 * weight * pot.beta * 2.0 * std::exp(-2.0 * dist);
    }
    CHECK(rep.criterion_value >= brute - 1e-12);
    CHECK(rep.criterion_value <= brute + rep.truncation_error_bound + 1e-9);

    const double beta_star = high_temperature_threshold(pot, patch, metric);
    CHECK(beta_star == doctest::Approx(2.0 * 0.05 / rep.criterion_value).epsilon(1e-9));
}

TEST_CASE("non-summable kernel and metric combinations are rejected") {
    const auto patch = z_patch(64.0);
    MetricSpec scaled;  // t = 1
    PotentialSpec pot = ising_potential(0.1);
    pot.kernel = AlgebraicKernel{1.0, 3.0};
    CHECK_THROWS_WITH_AS(dobrushin_check(pot, patch, scaled), "non-summable kernel",
                         std::invalid_argument);

    pot.kernel = ExponentialKernel{1.0, 0.5};  // kappa below the metric slope
    CHECK_THROWS_WITH_AS(dobrushin_check(pot, patch, scaled), "non-summable kernel",
                         std::invalid_argument);

    pot.kernel = AlgebraicKernel{1.0, 1.5};  // q <= d+1 rejected at validation
    CHECK_THROWS_WITH_AS(dobrushin_check(pot, patch, scaled), "non-summable kernel",
                         std::invalid_argument);
}

TEST_CASE("high-temperature threshold of the chain is 1/(2e)") {
    const auto patch = z_patch(64.0);
    MetricSpec metric;
    const auto pot = ising_potential(0.1);
    const double beta_star = high_temperature_threshold(pot, patch, metric);
    CHECK(std::abs(beta_star - 1.0 / (2.0 * std::exp(1.0))) < 1e-12);

    PotentialSpec zero = pot;
    zero.kernel = ExponentialKernel{0.0, 1.0};
    CHECK(std::isinf(high_temperature_threshold(zero, patch, metric)));
}

TEST_CASE("covariance-sum bound holds for {0,1} species at high temperature") {
    const auto patch = z_patch(512.0);
    PotentialSpec pot = ising_potential(0.1);
    pot.species_values = {Complex(0, 0), Complex(1, 0)};  // spread 1
    const auto report = dobrushin_check(pot, patch, MetricSpec{});
    REQUIRE(report.satisfied);

    SamplerParams params;
    params.sweeps = 1000;
    params.burn_in = 200;
    params.thinning = 5;
    params.seed = 31;
    const auto samples = sample_gibbs(patch, pot, params);
    const auto cov = autocorr::covariance_estimate(patch, samples, pot.species_values, 10.0,
                                                   autocorr::CovarianceMode::translation_average);
    double total = 0.0, sigma = 0.0;
    for (const auto& [key, entry] : cov.entries) {
        total += std::abs(entry.value);
        sigma += entry.sem.real() * entry.sem.real() + entry.sem.imag() * entry.sem.imag();
    }
    CHECK(total <= report.covariance_sum_bound + 3.0 * std::sqrt(sigma));
}

TEST_CASE("bernoulli sampler validates probabilities and hits the marginals") {
    const auto patch = z_patch(200.0);
    const double bad[] = {0.3, 0.3};
    CHECK_THROWS_WITH_AS(sample_bernoulli(patch, bad, 4, 1), "invalid probability vector",
                         std::invalid_argument);

    const double probs[] = {0.25, 0.75};
    const auto samples = sample_bernoulli(patch, probs, 400, 11);
    REQUIRE(samples.size() == 400);
    double ones = 0.0;
    const double draws = 400.0 * static_cast<double>(patch.size());
    for (const auto& cfg : samples)
        for (std::uint8_t sp : cfg.species) ones += sp == 1 ? 1.0 : 0.0;
    const double sigma = std::sqrt(0.25 * 0.75 * draws);
    CHECK(std::abs(ones - 0.25 * draws) < 3.0 * sigma);
}
