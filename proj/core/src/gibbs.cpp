#include "diffractlab/gibbs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "diffractlab/rng.hpp"

namespace dlab::gibbs {

namespace {

// int_A^inf u^j e^{-ku} du = (j!/k^{j+1}) e^{-kA} sum_{i=0..j} (kA)^i / i!
double poly_exp_integral(double a, double k, int j) {
    double fact = 1.0;
    for (int i = 2; i <= j; ++i) fact *= static_cast<double>(i);
    double series = 0.0;
    double term = 1.0;
    for (int i = 0; i <= j; ++i) {
        if (i > 0) term *= k * a / static_cast<double>(i);
        series += term;
    }
    return fact / std::pow(k, j + 1) * std::exp(-k * a) * series;
}

// int_A^inf u^{-a} du, a > 1, A > 0
double power_integral(double lo, double a) {
    return std::pow(lo, 1.0 - a) / (a - 1.0);
}

// Upper bound on sum over a uniformly discrete set (min spacing s) of
// w(dist)*|J(dist)| over points farther than R from a fixed site, where
// w is 1 (no metric) or e^{metric}. Comparison with the sphere-packing
// integral; requires the bounding integrand to be nonincreasing beyond
// R - s, otherwise returns +inf so the caller enlarges R.
double kernel_amplitude(const Kernel& kernel) {
    if (auto* e = std::get_if<ExponentialKernel>(&kernel)) return std::abs(e->j0);
    if (auto* a = std::get_if<AlgebraicKernel>(&kernel)) return std::abs(a->j0);
    return 1.0;
}

double certified_tail(const Kernel& kernel, const MetricSpec* metric, double s, int d, double r_cut) {
    if (std::holds_alternative<FiniteRangeKernel>(kernel)) {
        return r_cut >= std::get<FiniteRangeKernel>(kernel).range ? 0.0
                                                                  : std::numeric_limits<double>::infinity();
    }
    if (kernel_amplitude(kernel) == 0.0) return 0.0;
    if (!std::isfinite(s)) return 0.0;  // fewer than two points, nothing beyond
    const double a = r_cut - s;
    const double inf = std::numeric_limits<double>::infinity();
    if (a <= 0.0) return inf;
    const double prefactor = (d == 1) ? 2.0 / s : 8.0 / (s * s);
    const double half = s / 2.0;

    if (auto* e = std::get_if<ExponentialKernel>(&kernel)) {
        const double j0 = std::abs(e->j0);
        auto integral = [&](double kappa, int extra_pow) {
            double v = poly_exp_integral(a, kappa, extra_pow + d - 1);
            if (d == 2) v += half * poly_exp_integral(a, kappa, extra_pow);
            return v;
        };
        if (metric == nullptr) return prefactor * j0 * integral(e->kappa, 0);
        if (metric->kind == MetricSpec::Kind::scaled_euclidean) {
            const double k = e->kappa - metric->t;
            if (k <= 0.0) throw std::invalid_argument("non-summable kernel");
            return prefactor * j0 * integral(k, 0);
        }
        const int pfl = static_cast<int>(std::floor(metric->p));
        double best = inf;
        // power route: e^{metric} <= (1+u)^pfl <= (2u)^pfl for u >= 1
        if (a >= std::max(1.0, static_cast<double>(pfl) / e->kappa))
            best = prefactor * j0 * std::pow(2.0, pfl) * integral(e->kappa, pfl);
        // linear route also applies when t < kappa
        if (metric->t < e->kappa)
            best = std::min(best, prefactor * j0 * integral(e->kappa - metric->t, 0));
        return best;
    }

    const auto& alg = std::get<AlgebraicKernel>(kernel);
    const double j0 = std::abs(alg.j0);
    auto integral = [&](double q_eff) {
        if (q_eff <= static_cast<double>(d)) throw std::invalid_argument("non-summable kernel");
        double v = (d == 1) ? power_integral(a, q_eff) : power_integral(a, q_eff - 1.0);
        if (d == 2) v += half * power_integral(a, q_eff);
        return v;
    };
    if (metric == nullptr) return prefactor * j0 * integral(alg.exponent);
    if (metric->kind == MetricSpec::Kind::scaled_euclidean)
        throw std::invalid_argument("non-summable kernel");
    const int pfl = static_cast<int>(std::floor(metric->p));
    if (alg.exponent - static_cast<double>(pfl) <= static_cast<double>(d))
        throw std::invalid_argument("non-summable kernel");
    if (a < 1.0) return inf;
    return prefactor * j0 * std::pow(2.0, pfl) * integral(alg.exponent - static_cast<double>(pfl));
}

std::size_t checked_table_size(std::size_t n, std::size_t f) {
    std::size_t size = 1;
    for (std::size_t i = 0; i < f; ++i) {
        if (size > (std::size_t{1} << 24) / n) throw std::invalid_argument("use sampler");
        size *= n;
    }
    return size;
}

}  // namespace

double PotentialSpec::kernel_value(double dist) const {
    if (dist <= 0.0) return 0.0;
    if (auto* f = std::get_if<FiniteRangeKernel>(&kernel))
        return dist <= f->range * (1.0 + 1e-12) ? 1.0 : 0.0;
    if (auto* e = std::get_if<ExponentialKernel>(&kernel)) return e->j0 * std::exp(-e->kappa * dist);
    const auto& a = std::get<AlgebraicKernel>(kernel);
    return a.j0 * std::pow(dist, -a.exponent);
}

double PotentialSpec::phi_spread() const {
    double lo = phi[0], hi = phi[0];
    for (double v : phi) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    return hi - lo;
}

double PotentialSpec::value_spread() const {
    double spread = 0.0;
    for (std::size_t i = 0; i < species_values.size(); ++i)
        for (std::size_t j = i + 1; j < species_values.size(); ++j)
            spread = std::max(spread, std::abs(species_values[i] - species_values[j]));
    return spread;
}

void PotentialSpec::validate(int dim) const {
    const std::size_t n = species_values.size();
    if (n < 2) throw std::invalid_argument("potential: at least two species required");
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw std::invalid_argument("potential: beta must be finite and >= 0");
    if (phi.size() != n * n) throw std::invalid_argument("potential: phi must be n x n");
    for (double v : phi)
        if (!std::isfinite(v)) throw std::invalid_argument("potential: phi entries must be finite");
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (std::abs(phi[i * n + j] - phi[j * n + i]) > 1e-12)
                throw std::invalid_argument("potential: phi must be symmetric");
    if (auto* f = std::get_if<FiniteRangeKernel>(&kernel)) {
        if (!(f->range > 0.0)) throw std::invalid_argument("potential: range must be positive");
    } else if (auto* e = std::get_if<ExponentialKernel>(&kernel)) {
        if (!(e->kappa > 0.0)) throw std::invalid_argument("non-summable kernel");
    } else {
        const auto& a = std::get<AlgebraicKernel>(kernel);
        if (!(a.exponent > static_cast<double>(dim) + 1.0)) throw std::invalid_argument("non-summable kernel");
    }
}

PotentialSpec ising_potential(double beta, double range) {
    PotentialSpec pot;
    pot.species_values = {Complex(1.0, 0.0), Complex(-1.0, 0.0)};
    pot.beta = beta;
    pot.kernel = FiniteRangeKernel{range};
    pot.phi = {-1.0, 1.0, 1.0, -1.0};  // -sigma_s sigma_t
    return pot;
}

double MetricSpec::operator()(double dist) const {
    if (kind == Kind::scaled_euclidean) return t * dist;
    return std::min(t * dist, std::floor(p) * std::log1p(dist));
}

void MetricSpec::validate() const {
    if (!(t > 0.0)) throw std::invalid_argument("metric: t must be positive");
    if (kind == Kind::capped && !(p > 1.0)) throw std::invalid_argument("metric: p must exceed 1");
}

double oscillation(const PotentialSpec& pot, const Vec& x, const Vec& y) {
    const double dist = distance(x, y);
    if (dist <= 0.0) throw std::invalid_argument("oscillation: sites must be distinct");
    return pot.beta * std::abs(pot.kernel_value(dist)) * pot.phi_spread();
}

NeighborTable build_neighbor_table(const pointset::PointSetPatch& patch, const PotentialSpec& pot) {
    pot.validate(patch.dim());
    NeighborTable table;
    const double s = patch.min_spacing();
    if (auto* f = std::get_if<FiniteRangeKernel>(&pot.kernel)) {
        table.truncation_radius = f->range;
        table.tail_bound = 0.0;
    } else {
        // Grow the radius until the ignored interactions are negligible
        // relative to the kernel amplitude.
        const double j0 = std::holds_alternative<ExponentialKernel>(pot.kernel)
                              ? std::abs(std::get<ExponentialKernel>(pot.kernel).j0)
                              : std::abs(std::get<AlgebraicKernel>(pot.kernel).j0);
        const double target = 1e-12 * std::max(j0, 1e-30);
        double r_cut = std::isfinite(s) ? std::max(4.0 * s, 2.0) : 2.0;
        const double r_max = 2.0 * patch.radius();
        while (r_cut < r_max && certified_tail(pot.kernel, nullptr, s, patch.dim(), r_cut) > target)
            r_cut *= 2.0;
        r_cut = std::min(r_cut, r_max);
        table.truncation_radius = r_cut;
        table.tail_bound = certified_tail(pot.kernel, nullptr, s, patch.dim(), r_cut);
    }
    table.neighbors.resize(patch.size());
    const double cutoff = std::min(table.truncation_radius, 2.0 * patch.radius());
    pointset::for_close_pairs(patch, cutoff, [&](std::size_t i, std::size_t j) {
        if (i == j) return;
        const double jv = pot.kernel_value(distance(patch.points()[i], patch.points()[j]));
        if (jv != 0.0)
            table.neighbors[i].emplace_back(static_cast<std::uint32_t>(j), jv);
    });
    return table;
}

double total_energy(const pointset::PointSetPatch& patch, const Configuration& config,
                    std::span<const std::size_t> sites, const PotentialSpec& pot,
                    const NeighborTable& neighbors) {
    if (sites.empty()) throw std::invalid_argument("total_energy: empty site set");
    if (config.size() != patch.size()) throw std::invalid_argument("total_energy: configuration/patch mismatch");
    std::vector<bool> in_f(patch.size(), false);
    for (std::size_t u : sites) {
        if (u >= patch.size()) throw std::invalid_argument("total_energy: site index out of range");
        in_f[u] = true;
    }
    double energy = 0.0;
    for (std::size_t u : sites) {
        for (const auto& [v, jv] : neighbors.neighbors[u]) {
            if (in_f[v] && v < u) continue;  // pair inside F counted once
            energy += pot.phi_at(config.species[u], config.species[v]) * jv;
        }
    }
    return pot.beta * energy;
}

double total_energy(const pointset::PointSetPatch& patch, const Configuration& config,
                    std::span<const std::size_t> sites, const PotentialSpec& pot) {
    return total_energy(patch, config, sites, pot, build_neighbor_table(patch, pot));
}

std::size_t ConditionalTable::index_of(std::span<const std::uint8_t> assignment) const {
    std::size_t idx = 0;
    for (std::uint8_t a : assignment) idx = idx * species_count + (a - 1);
    return idx;
}

ConditionalTable gibbs_conditional(const pointset::PointSetPatch& patch,
                                   std::span<const std::size_t> sites,
                                   const Configuration& boundary, const PotentialSpec& pot) {
    pot.validate(patch.dim());
    if (sites.empty()) throw std::invalid_argument("gibbs_conditional: empty site set");
    if (sites.size() > 12) throw std::invalid_argument("use sampler");
    if (boundary.size() != patch.size())
        throw std::invalid_argument("gibbs_conditional: configuration/patch mismatch");
    const std::size_t n = pot.species_count();
    const std::size_t f = sites.size();
    const std::size_t table_size = checked_table_size(n, f);

    ConditionalTable out;
    out.sites.assign(sites.begin(), sites.end());
    std::sort(out.sites.begin(), out.sites.end());
    out.species_count = n;

    const NeighborTable nb = build_neighbor_table(patch, pot);
    std::vector<std::ptrdiff_t> pos_in_f(patch.size(), -1);
    for (std::size_t k = 0; k < f; ++k) pos_in_f[out.sites[k]] = static_cast<std::ptrdiff_t>(k);

    // Split each site's interactions into the fixed external field (per
    // candidate species) and the pairs internal to F.
    std::vector<std::vector<double>> external(f, std::vector<double>(n, 0.0));
    std::vector<std::vector<std::pair<std::size_t, double>>> internal(f);
    for (std::size_t k = 0; k < f; ++k) {
        const std::size_t u = out.sites[k];
        for (const auto& [v, jv] : nb.neighbors[u]) {
            if (pos_in_f[v] >= 0) {
                if (static_cast<std::size_t>(pos_in_f[v]) > k)
                    internal[k].emplace_back(static_cast<std::size_t>(pos_in_f[v]), jv);
            } else {
                for (std::size_t a = 1; a <= n; ++a)
                    external[k][a - 1] += pot.phi_at(a, boundary.species[v]) * jv;
            }
        }
    }

    std::vector<double> energies(table_size, 0.0);
    std::vector<std::uint8_t> assign(f, 1);
    for (std::size_t idx = 0;; ++idx) {
        double h = 0.0;
        for (std::size_t k = 0; k < f; ++k) {
            h += external[k][assign[k] - 1];
            for (const auto& [k2, jv] : internal[k]) h += pot.phi_at(assign[k], assign[k2]) * jv;
        }
        energies[idx] = pot.beta * h;
        // odometer, last site fastest
        std::size_t k = f;
        while (k > 0) {
            --k;
            if (assign[k] < n) {
                ++assign[k];
                break;
            }
            assign[k] = 1;
            if (k == 0) goto done;
        }
        if (idx + 1 == table_size) break;
    }
done:;
    const double emin = *std::min_element(energies.begin(), energies.end());
    double z = 0.0;
    out.probabilities.resize(table_size);
    for (std::size_t i = 0; i < table_size; ++i) {
        out.probabilities[i] = std::exp(-(energies[i] - emin));
        z += out.probabilities[i];
    }
    for (double& p : out.probabilities) p /= z;
    return out;
}

std::vector<Configuration> sample_gibbs(const pointset::PointSetPatch& patch,
                                        const PotentialSpec& pot, const SamplerParams& params) {
    pot.validate(patch.dim());
    if (params.thinning < 1) throw std::invalid_argument("sample_gibbs: thinning must be >= 1");
    const std::size_t n = pot.species_count();
    const NeighborTable nb = build_neighbor_table(patch, pot);

    std::vector<bool> frozen(patch.size(), false);
    Configuration config;
    config.species.assign(patch.size(), 1);
    Rng rng(params.seed);

    if (params.boundary.kind == Boundary::Kind::fixed) {
        if (params.boundary.values.size() != patch.size())
            throw std::invalid_argument("sample_gibbs: boundary configuration/patch mismatch");
        const double margin =
            params.boundary.margin > 0.0 ? params.boundary.margin : nb.truncation_radius;
        for (std::size_t i = 0; i < patch.size(); ++i) {
            config.species[i] = params.boundary.values.species[i];
            if (patch.points()[i].norm() > patch.radius() - margin) frozen[i] = true;
        }
    }
    for (std::size_t i = 0; i < patch.size(); ++i)
        if (!frozen[i]) config.species[i] = static_cast<std::uint8_t>(1 + rng.below(n));

    std::vector<double> energy(n);
    auto sweep = [&]() {
        for (std::size_t i = 0; i < patch.size(); ++i) {
            if (frozen[i]) continue;
            for (std::size_t a = 0; a < n; ++a) energy[a] = 0.0;
            for (const auto& [v, jv] : nb.neighbors[i])
                for (std::size_t a = 1; a <= n; ++a)
                    energy[a - 1] += pot.phi_at(a, config.species[v]) * jv;
            double emin = energy[0];
            for (double e : energy) emin = std::min(emin, e);
            double total = 0.0;
            for (std::size_t a = 0; a < n; ++a) {
                energy[a] = std::exp(-pot.beta * (energy[a] - emin));
                total += energy[a];
            }
            const double u = rng.uniform() * total;
            double acc = 0.0;
            std::uint8_t pick = static_cast<std::uint8_t>(n);
            for (std::size_t a = 0; a < n; ++a) {
                acc += energy[a];
                if (u < acc) {
                    pick = static_cast<std::uint8_t>(a + 1);
                    break;
                }
            }
            config.species[i] = pick;
        }
    };

    for (std::size_t s = 0; s < params.burn_in; ++s) sweep();
    std::vector<Configuration> samples;
    samples.reserve(params.sweeps / params.thinning);
    for (std::size_t s = 1; s <= params.sweeps; ++s) {
        sweep();
        if (s % params.thinning == 0) samples.push_back(config);
    }
    return samples;
}

std::vector<Configuration> sample_bernoulli(const pointset::PointSetPatch& patch,
                                            std::span<const double> probabilities,
                                            std::size_t count, std::uint64_t seed) {
    double sum = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) throw std::invalid_argument("invalid probability vector");
        sum += p;
    }
    if (probabilities.empty() || std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("invalid probability vector");
    Rng rng(seed);
    std::vector<Configuration> samples(count);
    for (auto& cfg : samples) {
        cfg.species.resize(patch.size());
        for (std::size_t i = 0; i < patch.size(); ++i) {
            const double u = rng.uniform();
            double acc = 0.0;
            std::uint8_t pick = static_cast<std::uint8_t>(probabilities.size());
            for (std::size_t a = 0; a < probabilities.size(); ++a) {
                acc += probabilities[a];
                if (u < acc) {
                    pick = static_cast<std::uint8_t>(a + 1);
                    break;
                }
            }
            cfg.species[i] = pick;
        }
    }
    return samples;
}

DobrushinReport dobrushin_check(const PotentialSpec& pot, const pointset::PointSetPatch& patch,
                                const MetricSpec& metric) {
    pot.validate(patch.dim());
    metric.validate();
    if (patch.size() == 0) throw std::invalid_argument("dobrushin_check: empty patch");

    DobrushinReport report;
    const double spread = pot.phi_spread();
    const double cspread = pot.value_spread();

    if (pot.beta == 0.0 || spread == 0.0) {
        report.criterion_value = 0.0;
        report.alpha_bound = 0.0;
        report.satisfied = true;
        report.covariance_sum_bound = cspread * cspread / 4.0;
        return report;
    }

    const double s = patch.min_spacing();
    const int d = patch.dim();

    // Probe the summability once; metric/kernel combinations without a
    // certified tail are rejected here.
    if (!std::holds_alternative<FiniteRangeKernel>(pot.kernel))
        (void)certified_tail(pot.kernel, &metric, s, d, std::max(4.0 * s, 8.0) + s + 1.0);

    auto partial_criterion = [&](double r_cut) {
        // sup over sites whose r_cut-ball lies inside the patch
        const double interior = patch.radius() - r_cut;
        std::vector<double> site_sum(patch.size(), 0.0);
        std::vector<bool> eligible(patch.size(), false);
        std::size_t n_eligible = 0;
        for (std::size_t i = 0; i < patch.size(); ++i) {
            if (patch.points()[i].norm() <= interior * (1.0 + 1e-12) + 1e-12) {
                eligible[i] = true;
                ++n_eligible;
            }
        }
        if (n_eligible == 0) return -1.0;
        pointset::for_close_pairs(patch, r_cut, [&](std::size_t i, std::size_t j) {
            if (i == j || !eligible[i]) return;
            const double dist = distance(patch.points()[i], patch.points()[j]);
            const double jv = pot.kernel_value(dist);
            if (jv == 0.0) return;
            site_sum[i] += std::exp(metric(dist)) * pot.beta * spread * std::abs(jv);
        });
        double best = 0.0;
        for (std::size_t i = 0; i < patch.size(); ++i)
            if (eligible[i]) best = std::max(best, site_sum[i]);
        return best;
    };

    double r_cut;
    double tail;
    if (auto* f = std::get_if<FiniteRangeKernel>(&pot.kernel)) {
        r_cut = f->range;
        tail = 0.0;
        if (partial_criterion(r_cut) < 0.0)
            throw std::invalid_argument("dobrushin_check: patch too small for truncation radius");
    } else {
        r_cut = std::isfinite(s) ? std::max(4.0 * s, 8.0) : 8.0;
        if (patch.radius() <= r_cut)
            throw std::invalid_argument("dobrushin_check: patch too small for truncation radius");
        // Push the certified tail below 1e-10 of the partial sum while the
        // patch still has interior sites; the tail is added to the
        // criterion either way, so the result stays an upper bound.
        while (true) {
            tail = pot.beta * spread * certified_tail(pot.kernel, &metric, s, d, r_cut);
            const double partial = partial_criterion(r_cut);
            if (partial < 0.0) throw std::invalid_argument("dobrushin_check: patch too small for truncation radius");
            if (tail <= 1e-10 * std::max(partial, 1e-300)) break;
            if (2.0 * r_cut >= patch.radius() - s) break;  // keep interior nonempty
            r_cut *= 2.0;
        }
    }

    report.truncation_radius = r_cut;
    report.truncation_error_bound = tail;
    report.criterion_value = partial_criterion(r_cut) + tail;
    report.alpha_bound = report.criterion_value / 2.0;
    report.satisfied = report.criterion_value < 2.0;
    report.covariance_sum_bound = report.satisfied
                                      ? cspread * cspread / (4.0 * (1.0 - report.alpha_bound))
                                      : std::numeric_limits<double>::infinity();
    return report;
}

double high_temperature_threshold(const PotentialSpec& pot, const pointset::PointSetPatch& patch,
                                  const MetricSpec& metric) {
    PotentialSpec probe = pot;
    probe.beta = 1.0;
    const DobrushinReport rep = dobrushin_check(probe, patch, metric);
    if (rep.criterion_value <= 0.0) return std::numeric_limits<double>::infinity();
    return 2.0 / rep.criterion_value;
}

}  // namespace dlab::gibbs
