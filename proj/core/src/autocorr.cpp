#include "diffractlab/autocorr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlab::autocorr {

namespace {

bool key_positive(const QKey& k) {
    for (int i = 0; i < k.dim; ++i) {
        if (k.q[static_cast<std::size_t>(i)] > 0) return true;
        if (k.q[static_cast<std::size_t>(i)] < 0) return false;
    }
    return false;
}

struct SampleStats {
    Complex mean{0.0, 0.0};
    Complex sem{0.0, 0.0};
};

SampleStats stats_from_sums(Complex sum, double sum_re2, double sum_im2, std::size_t s) {
    SampleStats st;
    const double n = static_cast<double>(s);
    st.mean = sum / n;
    if (s >= 2) {
        const double var_re = std::max(0.0, (sum_re2 - n * st.mean.real() * st.mean.real()) / (n - 1.0));
        const double var_im = std::max(0.0, (sum_im2 - n * st.mean.imag() * st.mean.imag()) / (n - 1.0));
        st.sem = {std::sqrt(var_re / n), std::sqrt(var_im / n)};
    }
    return st;
}

void check_samples(const pointset::PointSetPatch& patch,
                   std::span<const gibbs::Configuration> samples,
                   std::span<const Complex> species_values) {
    if (samples.empty()) throw std::invalid_argument("at least one sample required");
    for (const auto& s : samples) {
        if (s.size() != patch.size()) throw std::invalid_argument("sample/patch mismatch");
        for (std::uint8_t a : s.species)
            if (a < 1 || a > species_values.size())
                throw std::invalid_argument("sample species index out of range");
    }
}

// Pair lists keyed by difference, restricted to the canonical half
// (positive keys plus zero); the mirror entries come from conjugation so
// Hermitian symmetry is exact by construction.
struct HalfPairs {
    std::map<QKey, std::vector<std::pair<std::uint32_t, std::uint32_t>>> lists;
};

HalfPairs half_pairs(const pointset::PointSetPatch& patch, double cutoff,
                     const EstimatorOptions& opts) {
    HalfPairs hp;
    if (opts.periodic_wrap) {
        const SmallMat* basis = patch.lattice_basis();
        if (basis == nullptr || patch.dim() != 1)
            throw std::invalid_argument("periodic_wrap requires a 1-d lattice patch");
        const double a = std::abs((*basis)(0, 0));
        const std::size_t n = patch.size();
        const auto wrap = [&](std::ptrdiff_t i) {
            std::ptrdiff_t m = i % static_cast<std::ptrdiff_t>(n);
            if (m < 0) m += static_cast<std::ptrdiff_t>(n);
            return static_cast<std::uint32_t>(m);
        };
        const std::int64_t kmax = static_cast<std::int64_t>(std::floor(cutoff / a * (1.0 + 1e-12)));
        for (std::int64_t k = 0; k <= kmax; ++k) {
            Vec z(a * static_cast<double>(k));
            auto& list = hp.lists[QKey(z)];
            list.reserve(n);
            for (std::size_t i = 0; i < n; ++i)
                list.emplace_back(static_cast<std::uint32_t>(i),
                                  wrap(static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(k)));
        }
        return hp;
    }
    const double margin_limit = patch.radius() - opts.interior_margin;
    pointset::for_close_pairs(patch, cutoff, [&](std::size_t i, std::size_t j) {
        const QKey key(patch.points()[i] - patch.points()[j]);
        if (!key_positive(key) && !key.is_zero()) return;
        if (opts.interior_margin > 0.0 &&
            patch.points()[i].norm() > margin_limit * (1.0 + 1e-12) + 1e-12)
            return;
        hp.lists[key].emplace_back(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
    });
    return hp;
}

void insert_mirrored(AutocorrelationTable& table, const QKey& key, const TableEntry& entry) {
    table.entries[key] = entry;
    if (!key.is_zero()) {
        TableEntry mirror = entry;
        mirror.value = std::conj(entry.value);
        table.entries[key.negated()] = mirror;
    }
}

}  // namespace

double AutocorrelationTable::hermitian_defect() const {
    double worst = 0.0;
    for (const auto& [key, entry] : entries) {
        auto it = entries.find(key.negated());
        if (it == entries.end()) {
            worst = std::max(worst, std::abs(entry.value));
            continue;
        }
        worst = std::max(worst, std::abs(it->second.value - std::conj(entry.value)));
    }
    return worst;
}

void AutocorrelationTable::merge(const AutocorrelationTable& other) {
    if (kind != other.kind || std::abs(cutoff - other.cutoff) > 1e-12)
        throw std::invalid_argument("merge: incompatible tables");
    const double n1 = static_cast<double>(sample_count);
    const double n2 = static_cast<double>(other.sample_count);
    for (const auto& [key, entry] : other.entries) {
        auto& mine = entries[key];
        mine.value = (n1 * mine.value + n2 * entry.value) / (n1 + n2);
        mine.sem = {std::sqrt(n1 * n1 * mine.sem.real() * mine.sem.real() +
                              n2 * n2 * entry.sem.real() * entry.sem.real()) /
                        (n1 + n2),
                    std::sqrt(n1 * n1 * mine.sem.imag() * mine.sem.imag() +
                              n2 * n2 * entry.sem.imag() * entry.sem.imag()) /
                        (n1 + n2)};
    }
    sample_count += other.sample_count;
}

AutocorrelationTable eta_unweighted(const pointset::PointSetPatch& patch, double cutoff) {
    if (cutoff > patch.radius() * (1.0 + 1e-12))
        throw std::invalid_argument("eta_unweighted: cutoff exceeds patch radius");
    const double vol = ball_volume(patch.dim(), patch.radius());
    AutocorrelationTable table;
    table.kind = TableKind::unweighted_eta;
    table.patch_radius = patch.radius();
    table.sample_count = 1;
    table.cutoff = cutoff;
    for (const auto& [z, mult] : pointset::difference_set(patch, cutoff)) {
        TableEntry e;
        e.value = Complex(static_cast<double>(mult) / vol, 0.0);
        table.entries[QKey(z)] = e;
    }
    return table;
}

AutocorrelationTable eta_weighted(const pointset::PointSetPatch& patch,
                                  std::span<const gibbs::Configuration> samples,
                                  std::span<const Complex> species_values, double cutoff,
                                  const EstimatorOptions& opts) {
    if (cutoff > patch.radius() * (1.0 + 1e-12))
        throw std::invalid_argument("eta_weighted: cutoff exceeds patch radius");
    check_samples(patch, samples, species_values);
    const double vol = ball_volume(patch.dim(), patch.radius());
    const HalfPairs hp = half_pairs(patch, cutoff, opts);

    AutocorrelationTable table;
    table.kind = TableKind::weighted_eta;
    table.patch_radius = patch.radius();
    table.sample_count = samples.size();
    table.cutoff = cutoff;
    for (const auto& [key, list] : hp.lists) {
        Complex sum{0.0, 0.0};
        double sum_re2 = 0.0, sum_im2 = 0.0;
        for (const auto& cfg : samples) {
            Complex acc{0.0, 0.0};
            for (const auto& [i, j] : list)
                acc += species_values[cfg.species[i] - 1] * std::conj(species_values[cfg.species[j] - 1]);
            acc /= vol;
            sum += acc;
            sum_re2 += acc.real() * acc.real();
            sum_im2 += acc.imag() * acc.imag();
        }
        const SampleStats st = stats_from_sums(sum, sum_re2, sum_im2, samples.size());
        insert_mirrored(table, key, TableEntry{st.mean, st.sem});
    }
    return table;
}

AutocorrelationTable covariance_estimate(const pointset::PointSetPatch& patch,
                                         std::span<const gibbs::Configuration> samples,
                                         std::span<const Complex> species_values, double cutoff,
                                         CovarianceMode mode, const EstimatorOptions& opts) {
    if (cutoff > patch.radius() * (1.0 + 1e-12))
        throw std::invalid_argument("covariance_estimate: cutoff exceeds patch radius");
    check_samples(patch, samples, species_values);
    if (mode == CovarianceMode::ensemble && samples.size() < 2)
        throw std::invalid_argument("ensemble mode needs at least two samples");
    if (mode == CovarianceMode::translation_average && !patch.is_lattice())
        throw std::invalid_argument("translation_average requires a lattice patch");

    const HalfPairs hp = half_pairs(patch, cutoff, opts);
    const double n_samples = static_cast<double>(samples.size());

    // per-site sample means, used by the ensemble estimator
    std::vector<Complex> site_mean(patch.size(), Complex{0.0, 0.0});
    if (mode == CovarianceMode::ensemble) {
        for (const auto& cfg : samples)
            for (std::size_t i = 0; i < patch.size(); ++i)
                site_mean[i] += species_values[cfg.species[i] - 1];
        for (auto& m : site_mean) m /= n_samples;
    }

    AutocorrelationTable table;
    table.kind = TableKind::covariance;
    table.patch_radius = patch.radius();
    table.sample_count = samples.size();
    table.cutoff = cutoff;

    for (const auto& [key, list] : hp.lists) {
        const double n_pairs = static_cast<double>(list.size());
        Complex sum{0.0, 0.0};
        double sum_re2 = 0.0, sum_im2 = 0.0;
        Complex left_sum{0.0, 0.0}, right_sum{0.0, 0.0};
        for (const auto& cfg : samples) {
            Complex acc{0.0, 0.0};
            for (const auto& [i, j] : list) {
                const Complex hi = species_values[cfg.species[i] - 1];
                const Complex hj = species_values[cfg.species[j] - 1];
                acc += hi * std::conj(hj);
                if (mode == CovarianceMode::translation_average) {
                    left_sum += hi;
                    right_sum += hj;
                }
            }
            acc /= n_pairs;
            sum += acc;
            sum_re2 += acc.real() * acc.real();
            sum_im2 += acc.imag() * acc.imag();
        }
        const SampleStats st = stats_from_sums(sum, sum_re2, sum_im2, samples.size());
        Complex mean_product{0.0, 0.0};
        if (mode == CovarianceMode::translation_average) {
            const Complex ml = left_sum / (n_samples * n_pairs);
            const Complex mr = right_sum / (n_samples * n_pairs);
            mean_product = ml * std::conj(mr);
        } else {
            Complex acc{0.0, 0.0};
            for (const auto& [i, j] : list) acc += site_mean[i] * std::conj(site_mean[j]);
            mean_product = acc / n_pairs;
        }
        insert_mirrored(table, key, TableEntry{st.mean - mean_product, st.sem});
    }
    return table;
}

DecomposeResult decompose(const pointset::PointSetPatch& patch,
                          std::span<const gibbs::Configuration> samples,
                          std::span<const Complex> species_values, double cutoff,
                          const EstimatorOptions& opts) {
    if (!patch.is_lattice()) throw std::invalid_argument("decompose requires a lattice patch");
    check_samples(patch, samples, species_values);

    DecomposeResult out;
    out.weighted = eta_weighted(patch, samples, species_values, cutoff, opts);
    out.cov_part = covariance_estimate(patch, samples, species_values, cutoff,
                                       CovarianceMode::translation_average, opts);
    out.density = pointset::density_estimate(patch);

    Complex mean{0.0, 0.0};
    for (const auto& cfg : samples)
        for (std::uint8_t a : cfg.species) mean += species_values[a - 1];
    mean /= static_cast<double>(samples.size()) * static_cast<double>(patch.size());
    out.mean_h = mean;

    // eta of the fully occupied patch, with the same pair bookkeeping
    // (wrap or plain) as the weighted estimator.
    AutocorrelationTable eta;
    {
        std::vector<gibbs::Configuration> ones(1);
        ones[0].species.assign(patch.size(), 1);
        const Complex unit[] = {Complex{1.0, 0.0}};
        eta = eta_weighted(patch, ones, std::span<const Complex>(unit, 1), cutoff, opts);
        eta.kind = TableKind::unweighted_eta;
    }

    out.pp = eta;
    out.pp.kind = TableKind::weighted_eta;
    out.pp.sample_count = samples.size();
    const double mean_sq = std::norm(mean);
    for (auto& [key, entry] : out.pp.entries) {
        entry.value *= mean_sq;
        entry.sem = {0.0, 0.0};
    }

    for (auto& [key, entry] : out.cov_part.entries) {
        entry.value *= out.density;
        entry.sem = {entry.sem.real() * out.density, entry.sem.imag() * out.density};
    }

    out.residual = 0.0;
    for (const auto& [key, entry] : out.weighted.entries) {
        const Complex pp = out.pp.entries.count(key) ? out.pp.entries[key].value : Complex{0.0, 0.0};
        const Complex cv = out.cov_part.entries.count(key) ? out.cov_part.entries[key].value : Complex{0.0, 0.0};
        out.residual = std::max(out.residual, std::abs(entry.value - pp - cv));
    }
    return out;
}

AutocorrelationTable bernoulli_exact(double dens, const AutocorrelationTable& eta,
                                     std::span<const double> probabilities,
                                     std::span<const Complex> species_values) {
    if (probabilities.size() != species_values.size())
        throw std::invalid_argument("invalid probability vector");
    double total = 0.0;
    for (double p : probabilities) {
        if (!(p >= 0.0)) throw std::invalid_argument("invalid probability vector");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("invalid probability vector");

    Complex mean{0.0, 0.0};
    double second = 0.0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        mean += probabilities[i] * species_values[i];
        second += probabilities[i] * std::norm(species_values[i]);
    }
    const double mean_sq = std::norm(mean);
    const double variance = second - mean_sq;

    AutocorrelationTable out = eta;
    out.kind = TableKind::weighted_eta;
    for (auto& [key, entry] : out.entries) {
        entry.value *= mean_sq;
        if (key.is_zero()) entry.value += dens * variance;
        entry.sem = {0.0, 0.0};
    }
    return out;
}

ClusterConditional conditional_by_cluster(const pointset::PointSetPatch& patch,
                                          std::span<const gibbs::Configuration> samples,
                                          std::span<const Complex> species_values,
                                          const pointset::ClusterTable& clusters, const Vec& z,
                                          double interaction_range) {
    check_samples(patch, samples, species_values);
    if (!(interaction_range > 0.0))
        throw std::invalid_argument("conditional_by_cluster: interaction range must be positive");
    const double required = z.norm() + interaction_range;
    if (std::abs(clusters.radius - required) > 1e-9)
        throw std::invalid_argument("conditional_by_cluster: cluster table radius must equal |z| + range");

    auto members = pointset::cluster_members(patch, clusters.radius);
    if (members.empty()) throw std::invalid_argument("no interior sites for cluster radius");

    ClusterConditional out;
    out.z = z;
    out.cluster_radius = clusters.radius;
    const QKey minus_z(-z);
    const double n_samples = static_cast<double>(samples.size());

    std::vector<Complex> per_sample_aggregate(samples.size(), Complex{0.0, 0.0});

    for (const auto& [key, sites] : members) {
        auto freq_it = clusters.entries.find(key);
        if (freq_it == clusters.entries.end())
            throw std::invalid_argument("conditional_by_cluster: cluster table mismatch");
        ClusterConditional::PerCluster pc;
        pc.key = key;
        pc.frequency = freq_it->second.frequency;
        pc.site_count = sites.size();
        pc.contains_minus_z = std::binary_search(key.positions.begin(), key.positions.end(), minus_z);
        if (pc.contains_minus_z) {
            std::vector<std::size_t> partner(sites.size());
            for (std::size_t k = 0; k < sites.size(); ++k) {
                auto idx = patch.index_of(patch.points()[sites[k]] - z);
                if (!idx) throw std::logic_error("conditional_by_cluster: partner point missing");
                partner[k] = *idx;
            }
            const double denom = n_samples * static_cast<double>(sites.size());
            Complex mixed{0.0, 0.0}, left{0.0, 0.0}, right{0.0, 0.0};
            for (std::size_t s = 0; s < samples.size(); ++s) {
                Complex mixed_s{0.0, 0.0};
                for (std::size_t k = 0; k < sites.size(); ++k) {
                    const Complex hx = species_values[samples[s].species[sites[k]] - 1];
                    const Complex hy = species_values[samples[s].species[partner[k]] - 1];
                    mixed_s += hx * std::conj(hy);
                    left += hx;
                    right += std::conj(hy);
                }
                per_sample_aggregate[s] += pc.frequency * (mixed_s / static_cast<double>(sites.size()));
                mixed += mixed_s;
            }
            pc.mixed_mean = mixed / denom;
            pc.left_mean = left / denom;
            pc.right_mean_conj = right / denom;
            pc.covariance = pc.mixed_mean - pc.left_mean * pc.right_mean_conj;
            out.aggregate += pc.frequency * pc.covariance;
            out.weighted_mixed += pc.frequency * pc.mixed_mean;
        }
        out.clusters.push_back(std::move(pc));
    }

    Complex sum{0.0, 0.0};
    double sum_re2 = 0.0, sum_im2 = 0.0;
    for (const Complex& a : per_sample_aggregate) {
        sum += a;
        sum_re2 += a.real() * a.real();
        sum_im2 += a.imag() * a.imag();
    }
    out.aggregate_sem = stats_from_sums(sum, sum_re2, sum_im2, samples.size()).sem;
    return out;
}

SummabilityReport summability_check(const AutocorrelationTable& table, int dim) {
    double spacing = std::numeric_limits<double>::infinity();
    for (const auto& [key, entry] : table.entries) {
        if (key.is_zero()) continue;
        spacing = std::min(spacing, key.vec().norm());
    }
    if (!std::isfinite(spacing)) {
        // only z = 0 present: trivially summable
        SummabilityReport rep;
        rep.is_summable_evidence = true;
        rep.fitted_exponent = -std::numeric_limits<double>::infinity();
        rep.partial_sums = {table.sum_abs()};
        return rep;
    }
    if (table.cutoff < 10.0 * spacing * (1.0 - 1e-12))
        throw std::invalid_argument("summability_check: table cutoff below 10 spacing units");

    SummabilityReport rep;
    const std::size_t n_shells = static_cast<std::size_t>(std::ceil(table.cutoff / spacing)) + 1;
    std::vector<double> shell_sum(n_shells, 0.0);
    std::vector<std::size_t> shell_count(n_shells, 0);

    double sum_x = 0.0, sum_y = 0.0, sum_xx = 0.0, sum_xy = 0.0;
    std::size_t n_fit = 0;
    bool tail_all_zero = true;
    const double half = table.cutoff / 2.0;
    for (const auto& [key, entry] : table.entries) {
        if (key.is_zero()) continue;
        const double r = key.vec().norm();
        const double g = std::abs(entry.value);
        const std::size_t shell = std::min(n_shells - 1, static_cast<std::size_t>(std::floor(r / spacing)));
        shell_sum[shell] += g;
        shell_count[shell] += 1;
        if (r >= half) {
            if (g > 1e-300) {
                tail_all_zero = false;
                const double x = std::log(r);
                const double y = std::log(g);
                sum_x += x;
                sum_y += y;
                sum_xx += x * x;
                sum_xy += x * y;
                ++n_fit;
            }
        }
    }

    rep.partial_sums.reserve(n_shells);
    double cum = 0.0;
    for (double s : shell_sum) {
        cum += s;
        rep.partial_sums.push_back(cum);
    }

    if (tail_all_zero) {
        rep.fitted_exponent = -std::numeric_limits<double>::infinity();
        rep.fitted_amplitude = 0.0;
        rep.is_summable_evidence = true;
        rep.tail_estimate = 0.0;
        return rep;
    }

    const double nf = static_cast<double>(n_fit);
    const double denom = nf * sum_xx - sum_x * sum_x;
    if (n_fit < 2 || std::abs(denom) < 1e-30) {
        rep.fitted_exponent = 0.0;
        rep.fitted_amplitude = std::exp(n_fit > 0 ? sum_y / nf : 0.0);
    } else {
        rep.fitted_exponent = (nf * sum_xy - sum_x * sum_y) / denom;
        rep.fitted_amplitude = std::exp((sum_y - rep.fitted_exponent * sum_x) / nf);
    }

    bool cauchy = true;
    const std::size_t start = n_shells / 2;
    for (std::size_t k = start + 1; k < n_shells; ++k) {
        if (shell_sum[k] > shell_sum[k - 1] + 1e-12 * (1.0 + shell_sum[k - 1])) {
            cauchy = false;
            break;
        }
    }
    rep.is_summable_evidence = cauchy && rep.fitted_exponent < -static_cast<double>(dim);

    // extrapolated tail beyond the cutoff, from the fitted power law and the
    // observed key density per shell
    double tail_keys = 0.0;
    std::size_t tail_shells = 0;
    for (std::size_t k = start; k < n_shells; ++k) {
        tail_keys += static_cast<double>(shell_count[k]);
        ++tail_shells;
    }
    const double keys_per_shell = tail_shells ? tail_keys / static_cast<double>(tail_shells) : 0.0;
    if (rep.fitted_exponent < -1.0 - 1e-9) {
        const double b = rep.fitted_exponent;
        rep.tail_estimate = keys_per_shell / spacing * rep.fitted_amplitude *
                            std::pow(table.cutoff, b + 1.0) / (-(b + 1.0));
    } else {
        rep.tail_estimate = std::numeric_limits<double>::infinity();
    }
    return rep;
}

}  // namespace dlab::autocorr
