#include "diffractlab/diffraction.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "diffractlab/fft.hpp"

namespace dlab::diffraction {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Fixed-size chunks keep results independent of the worker count.
void parallel_chunks(std::size_t n, std::size_t chunk,
                     const std::function<void(std::size_t, std::size_t)>& fn) {
    const std::size_t n_chunks = (n + chunk - 1) / chunk;
    unsigned workers = std::min<unsigned>(std::thread::hardware_concurrency(),
                                          static_cast<unsigned>(n_chunks));
    if (workers <= 1 || n_chunks <= 1) {
        for (std::size_t c = 0; c < n_chunks; ++c) fn(c * chunk, std::min(n, (c + 1) * chunk));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const std::size_t c = next.fetch_add(1);
                if (c >= n_chunks) return;
                fn(c * chunk, std::min(n, (c + 1) * chunk));
            }
        });
    }
    for (auto& t : pool) t.join();
}

Complex unit_phase(double angle) { return {std::cos(angle), std::sin(angle)}; }

// Direct amplitude evaluation A(k) = sum_x h_x e^{-2pi i k.x} on the grid,
// one multiply per (point, cell) through a per-chunk phase recurrence.
void direct_amplitudes(const KGrid& grid, std::span<const Vec> points,
                       std::span<const Complex> weights, std::vector<Complex>& out) {
    out.assign(grid.size(), Complex{0.0, 0.0});
    if (grid.dim == 1) {
        parallel_chunks(grid.size(), 512, [&](std::size_t a, std::size_t b) {
            const double ka = grid.spacing * static_cast<double>(grid.lo[0] + static_cast<std::int64_t>(a));
            for (std::size_t p = 0; p < points.size(); ++p) {
                const double x = points[p][0];
                Complex w = weights[p] * unit_phase(-kTwoPi * ka * x);
                const Complex step = unit_phase(-kTwoPi * grid.spacing * x);
                for (std::size_t i = a; i < b; ++i) {
                    out[i] += w;
                    w *= step;
                }
            }
        });
        return;
    }
    // rows of constant k0; recurrence along k1
    parallel_chunks(grid.count[0], 1, [&](std::size_t r0, std::size_t r1) {
        for (std::size_t row = r0; row < r1; ++row) {
            const double k0 = grid.spacing * static_cast<double>(grid.lo[0] + static_cast<std::int64_t>(row));
            const double k1a = grid.spacing * static_cast<double>(grid.lo[1]);
            const std::size_t base = row * grid.count[1];
            for (std::size_t p = 0; p < points.size(); ++p) {
                const double x0 = points[p][0];
                const double x1 = points[p][1];
                Complex w = weights[p] * unit_phase(-kTwoPi * (k0 * x0 + k1a * x1));
                const Complex step = unit_phase(-kTwoPi * grid.spacing * x1);
                for (std::size_t i = 0; i < grid.count[1]; ++i) {
                    out[base + i] += w;
                    w *= step;
                }
            }
        }
    });
}

struct LatticeFftPlan {
    bool usable = false;
    std::array<std::size_t, 2> length{1, 1};       // DFT length per axis
    std::array<std::vector<std::int64_t>, 2> coeff;  // signed integer coordinate per point
};

LatticeFftPlan plan_lattice_fft(const pointset::PointSetPatch& patch, const KGrid& grid) {
    LatticeFftPlan plan;
    const SmallMat* basis = patch.lattice_basis();
    if (basis == nullptr) return plan;
    const int d = patch.dim();
    if (d == 2 && (std::abs((*basis)(0, 1)) > 1e-12 || std::abs((*basis)(1, 0)) > 1e-12))
        return plan;
    std::array<double, 2> diag{(*basis)(0, 0), d == 2 ? (*basis)(1, 1) : 1.0};
    std::array<double, 2> sign{1.0, 1.0};
    for (int ax = 0; ax < d; ++ax) {
        const double q = 1.0 / (grid.spacing * diag[static_cast<std::size_t>(ax)]);
        const double qr = std::abs(q);
        const double rounded = std::round(qr);
        if (rounded < 1.0 || std::abs(qr - rounded) > 1e-9 * std::max(1.0, qr)) return plan;
        plan.length[static_cast<std::size_t>(ax)] = static_cast<std::size_t>(rounded);
        sign[static_cast<std::size_t>(ax)] = q < 0 ? -1.0 : 1.0;
    }
    for (int ax = 0; ax < d; ++ax) {
        auto& coeff = plan.coeff[static_cast<std::size_t>(ax)];
        coeff.resize(patch.size());
        for (std::size_t p = 0; p < patch.size(); ++p) {
            const double v = patch.points()[p][ax] / diag[static_cast<std::size_t>(ax)] *
                             sign[static_cast<std::size_t>(ax)];
            const double r = std::round(v);
            if (std::abs(v - r) > 1e-9) return plan;
            coeff[p] = static_cast<std::int64_t>(r);
        }
    }
    plan.usable = true;
    return plan;
}

// A(k_i) = Ghat[i mod L] of the residue-binned weights; exact because the
// phase e^{-2pi i i n / L} only sees n mod L for integer grid indices.
void fft_amplitudes(const LatticeFftPlan& plan, const KGrid& grid, std::span<const Vec> points,
                    std::span<const Complex> weights, std::vector<Complex>& out) {
    const std::size_t l0 = plan.length[0];
    const std::size_t l1 = grid.dim == 2 ? plan.length[1] : 1;
    std::vector<Complex> bins(l0 * l1, Complex{0.0, 0.0});
    const double k0a = grid.spacing * static_cast<double>(grid.lo[0]);
    const double k1a = grid.dim == 2 ? grid.spacing * static_cast<double>(grid.lo[1]) : 0.0;
    auto mod = [](std::int64_t v, std::size_t l) {
        std::int64_t m = v % static_cast<std::int64_t>(l);
        if (m < 0) m += static_cast<std::int64_t>(l);
        return static_cast<std::size_t>(m);
    };
    for (std::size_t p = 0; p < points.size(); ++p) {
        double phase = -kTwoPi * k0a * points[p][0];
        if (grid.dim == 2) phase -= kTwoPi * k1a * points[p][1];
        const std::size_t m0 = mod(plan.coeff[0][p], l0);
        const std::size_t m1 = grid.dim == 2 ? mod(plan.coeff[1][p], l1) : 0;
        bins[m0 * l1 + m1] += weights[p] * unit_phase(phase);
    }
    if (grid.dim == 1) {
        bins = dft_any(bins);
    } else {
        std::vector<Complex> tmp;
        for (std::size_t r = 0; r < l0; ++r) {
            tmp.assign(bins.begin() + static_cast<std::ptrdiff_t>(r * l1),
                       bins.begin() + static_cast<std::ptrdiff_t>((r + 1) * l1));
            tmp = dft_any(tmp);
            std::copy(tmp.begin(), tmp.end(), bins.begin() + static_cast<std::ptrdiff_t>(r * l1));
        }
        std::vector<Complex> col(l0);
        for (std::size_t c = 0; c < l1; ++c) {
            for (std::size_t r = 0; r < l0; ++r) col[r] = bins[r * l1 + c];
            col = dft_any(col);
            for (std::size_t r = 0; r < l0; ++r) bins[r * l1 + c] = col[r];
        }
    }
    out.resize(grid.size());
    if (grid.dim == 1) {
        for (std::size_t i = 0; i < grid.size(); ++i) out[i] = bins[i % l0];
    } else {
        for (std::size_t i0 = 0; i0 < grid.count[0]; ++i0)
            for (std::size_t i1 = 0; i1 < grid.count[1]; ++i1)
                out[i0 * grid.count[1] + i1] = bins[(i0 % l0) * l1 + (i1 % l1)];
    }
}

double grid_median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    return v[mid];
}

std::vector<std::size_t> local_maxima(const KGrid& grid, std::span<const double> v, double threshold) {
    std::vector<std::size_t> out;
    if (grid.dim == 1) {
        for (std::size_t i = 1; i + 1 < grid.count[0]; ++i)
            if (v[i] > threshold && v[i] >= v[i - 1] && v[i] >= v[i + 1]) out.push_back(i);
        return out;
    }
    for (std::size_t i0 = 1; i0 + 1 < grid.count[0]; ++i0) {
        for (std::size_t i1 = 1; i1 + 1 < grid.count[1]; ++i1) {
            const std::size_t i = i0 * grid.count[1] + i1;
            if (v[i] <= threshold) continue;
            bool is_max = true;
            for (int d0 = -1; d0 <= 1 && is_max; ++d0)
                for (int d1 = -1; d1 <= 1; ++d1) {
                    if (d0 == 0 && d1 == 0) continue;
                    const std::size_t j = (i0 + static_cast<std::size_t>(d0 + 1) - 1) * grid.count[1] +
                                          (i1 + static_cast<std::size_t>(d1 + 1) - 1);
                    if (v[j] > v[i]) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) out.push_back(i);
        }
    }
    return out;
}

}  // namespace

KGrid KGrid::symmetric(int dim, double window, double spacing) {
    if (dim < 1 || dim > 2) throw std::invalid_argument("KGrid: dim must be 1 or 2");
    if (!(spacing > 0.0) || !(window > 0.0)) throw std::invalid_argument("KGrid: positive window and spacing required");
    KGrid g;
    g.dim = dim;
    g.spacing = spacing;
    const std::int64_t half = static_cast<std::int64_t>(std::floor(window / spacing * (1.0 + 1e-12)));
    for (int ax = 0; ax < dim; ++ax) {
        g.lo[static_cast<std::size_t>(ax)] = -half;
        g.count[static_cast<std::size_t>(ax)] = static_cast<std::size_t>(2 * half + 1);
    }
    return g;
}

Vec KGrid::at(std::size_t flat) const {
    Vec k;
    k.dim = dim;
    if (dim == 1) {
        k[0] = spacing * static_cast<double>(lo[0] + static_cast<std::int64_t>(flat));
        return k;
    }
    const std::size_t i0 = flat / count[1];
    const std::size_t i1 = flat % count[1];
    k[0] = spacing * static_cast<double>(lo[0] + static_cast<std::int64_t>(i0));
    k[1] = spacing * static_cast<double>(lo[1] + static_cast<std::int64_t>(i1));
    return k;
}

std::optional<std::size_t> KGrid::index_near(const Vec& k) const {
    std::array<std::int64_t, 2> idx{0, 0};
    for (int ax = 0; ax < dim; ++ax) {
        const std::int64_t i = std::llround(k[ax] / spacing) - lo[static_cast<std::size_t>(ax)];
        if (i < 0 || i >= static_cast<std::int64_t>(count[static_cast<std::size_t>(ax)])) return std::nullopt;
        idx[static_cast<std::size_t>(ax)] = i;
    }
    if (dim == 1) return static_cast<std::size_t>(idx[0]);
    return static_cast<std::size_t>(idx[0]) * count[1] + static_cast<std::size_t>(idx[1]);
}

bool KGrid::same_as(const KGrid& other) const {
    if (dim != other.dim) return false;
    if (std::abs(spacing - other.spacing) > 1e-12 * std::max(spacing, other.spacing)) return false;
    for (int ax = 0; ax < dim; ++ax)
        if (lo[static_cast<std::size_t>(ax)] != other.lo[static_cast<std::size_t>(ax)] ||
            count[static_cast<std::size_t>(ax)] != other.count[static_cast<std::size_t>(ax)])
            return false;
    return true;
}

Complex ProfileMeasure::fourier(const Vec& k) const {
    Complex sum{0.0, 0.0};
    for (const auto& [pos, w] : atoms) sum += w * unit_phase(-kTwoPi * dot(k, pos));
    return sum;
}

SmallMat dual_lattice(const SmallMat& basis) {
    if (basis.rows() != basis.cols()) throw std::invalid_argument("dual_lattice: square basis required");
    if (std::abs(basis.determinant()) < 1e-12) throw std::invalid_argument("degenerate lattice");
    return basis.inverse().transpose();
}

std::vector<Peak> poisson_pp(const SmallMat& basis, double dens, double k_window) {
    if (!(dens > 0.0)) throw std::invalid_argument("poisson_pp: density must be positive");
    const SmallMat dual = dual_lattice(basis);
    const auto patch = pointset::generate_lattice_patch(dual, k_window);
    std::vector<Peak> peaks;
    peaks.reserve(patch.size());
    for (const Vec& k : patch.points()) peaks.push_back({k, dens * dens});
    return peaks;
}

DiffractionSpectrum profile_modulation(const DiffractionSpectrum& spectrum, const ProfileMeasure& rho) {
    if (spectrum.kind != SpectrumKind::predicted)
        throw std::invalid_argument("profile_modulation: predicted spectrum required");
    DiffractionSpectrum out = spectrum;
    for (auto& p : out.peaks) p.weight *= std::norm(rho.fourier(p.position));
    for (std::size_t i = 0; i < out.density.size(); ++i)
        out.density[i] *= std::norm(rho.fourier(out.grid.at(i)));
    return out;
}

DensityResult fourier_series_density(const autocorr::AutocorrelationTable& table, const KGrid& grid) {
    double max_abs = 0.0;
    for (const auto& [key, entry] : table.entries) max_abs = std::max(max_abs, std::abs(entry.value));
    if (table.hermitian_defect() > 1e-12 * (1.0 + max_abs))
        throw std::invalid_argument("asymmetric table");

    std::vector<std::pair<Vec, Complex>> terms;
    terms.reserve(table.entries.size());
    double sum_abs = 0.0;
    for (const auto& [key, entry] : table.entries) {
        terms.emplace_back(key.vec(), entry.value);
        sum_abs += std::abs(entry.value);
    }

    DensityResult out;
    out.sum_abs = sum_abs;
    out.values.assign(grid.size(), 0.0);
    std::vector<double> imag_worst((grid.size() + 4095) / 4096, 0.0);
    parallel_chunks(grid.size(), 4096, [&](std::size_t a, std::size_t b) {
        double worst = 0.0;
        for (std::size_t i = a; i < b; ++i) {
            const Vec k = grid.at(i);
            Complex acc{0.0, 0.0};
            for (const auto& [z, g] : terms) acc += g * unit_phase(-kTwoPi * dot(k, z));
            out.values[i] = acc.real();
            worst = std::max(worst, std::abs(acc.imag()));
        }
        imag_worst[a / 4096] = worst;
    });
    out.max_imag = *std::max_element(imag_worst.begin(), imag_worst.end());
    if (out.max_imag > 1e-9 * std::max(sum_abs, 1e-300))
        throw std::logic_error("fourier_series_density: imaginary residue above tolerance");

    out.tail_bound = 0.0;
    try {
        out.tail_bound = autocorr::summability_check(table, grid.dim).tail_estimate;
    } catch (const std::invalid_argument&) {
        out.tail_bound = std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

DiffractionSpectrum periodogram(const pointset::PointSetPatch& patch,
                                std::span<const gibbs::Configuration> samples,
                                std::span<const Complex> species_values, const KGrid& grid,
                                const PeriodogramOptions& opts) {
    if (patch.size() == 0) throw std::invalid_argument("periodogram: empty patch");
    const double vol = ball_volume(patch.dim(), patch.radius());
    const std::size_t n_samples = samples.empty() ? 1 : samples.size();
    for (const auto& s : samples)
        if (s.size() != patch.size()) throw std::invalid_argument("sample/patch mismatch");

    DiffractionSpectrum spec;
    spec.kind = SpectrumKind::empirical;
    spec.grid = grid;
    spec.patch_radius = patch.radius();
    spec.sample_count = n_samples;
    spec.peak_halfwidth = opts.peak_halfwidth > 0.0 ? opts.peak_halfwidth : 12.0 / patch.radius();

    LatticeFftPlan plan;
    if (!opts.force_direct) plan = plan_lattice_fft(patch, grid);

    std::vector<double> mean(grid.size(), 0.0);
    std::vector<double> m2(grid.size(), 0.0);
    std::vector<Complex> weights(patch.size());
    std::vector<Complex> amps;
    for (std::size_t s = 0; s < n_samples; ++s) {
        if (samples.empty()) {
            std::fill(weights.begin(), weights.end(), Complex{1.0, 0.0});
        } else {
            for (std::size_t i = 0; i < patch.size(); ++i)
                weights[i] = species_values[samples[s].species[i] - 1];
        }
        if (plan.usable)
            fft_amplitudes(plan, grid, patch.points(), weights, amps);
        else
            direct_amplitudes(grid, patch.points(), weights, amps);
        const double sn = static_cast<double>(s + 1);
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double intensity = std::norm(amps[i]) / vol;
            const double delta = intensity - mean[i];
            mean[i] += delta / sn;
            m2[i] += delta * (intensity - mean[i]);
        }
    }
    spec.density = std::move(mean);
    if (n_samples >= 2) {
        spec.density_sem.resize(grid.size());
        const double n = static_cast<double>(n_samples);
        for (std::size_t i = 0; i < grid.size(); ++i)
            spec.density_sem[i] = std::sqrt(std::max(0.0, m2[i] / (n - 1.0)) / n);
    }

    // peak extraction on the raw intensity
    spec.peak_threshold = opts.peak_threshold_factor * grid_median(spec.density);
    if (spec.peak_threshold > 0.0) {
        auto candidates = local_maxima(grid, spec.density, spec.peak_threshold);
        std::sort(candidates.begin(), candidates.end(),
                  [&](std::size_t a, std::size_t b) { return spec.density[a] > spec.density[b]; });
        std::vector<std::size_t> accepted;
        for (std::size_t c : candidates) {
            const Vec pos = grid.at(c);
            bool merged = false;
            for (std::size_t a : accepted) {
                if ((grid.at(a) - pos).norm() <= spec.peak_halfwidth) {
                    merged = true;
                    break;
                }
            }
            if (!merged) accepted.push_back(c);
        }
        std::sort(accepted.begin(), accepted.end());
        spec.peaks.resize(accepted.size());
        for (std::size_t a = 0; a < accepted.size(); ++a)
            spec.peaks[a] = {grid.at(accepted[a]), 0.0};
        // integrated intensity, each cell assigned to its nearest peak
        const double cellvol = grid.cell_volume();
        for (std::size_t i = 0; i < grid.size(); ++i) {
            double best = spec.peak_halfwidth;
            std::ptrdiff_t who = -1;
            const Vec k = grid.at(i);
            for (std::size_t a = 0; a < spec.peaks.size(); ++a) {
                const double dist = (spec.peaks[a].position - k).norm();
                if (dist <= best) {
                    best = dist;
                    who = static_cast<std::ptrdiff_t>(a);
                }
            }
            if (who >= 0) spec.peaks[static_cast<std::size_t>(who)].weight += spec.density[i] * cellvol;
        }
    }
    return spec;
}

DiffractionSpectrum predicted_spectrum(const SmallMat& basis, double dens, Complex mean_h,
                                       const autocorr::AutocorrelationTable& cov_part,
                                       const KGrid& grid, double k_window) {
    DiffractionSpectrum spec;
    spec.kind = SpectrumKind::predicted;
    spec.grid = grid;
    spec.patch_radius = cov_part.patch_radius;
    const double scale = std::norm(mean_h);
    for (const Peak& p : poisson_pp(basis, dens, k_window))
        spec.peaks.push_back({p.position, p.weight * scale});
    spec.density = fourier_series_density(cov_part, grid).values;
    return spec;
}

std::vector<std::uint8_t> peak_mask(const KGrid& grid, std::span<const Peak> peaks, double halfwidth) {
    std::vector<std::uint8_t> mask(grid.size(), 0);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec k = grid.at(i);
        for (const Peak& p : peaks) {
            if ((p.position - k).norm() <= halfwidth) {
                mask[i] = 1;
                break;
            }
        }
    }
    return mask;
}

std::vector<double> smooth_density(const KGrid& grid, std::span<const double> values,
                                   std::span<const std::uint8_t> mask, double bandwidth) {
    std::vector<double> out(values.begin(), values.end());
    if (bandwidth <= 0.0) return out;
    const std::int64_t half = std::llround(bandwidth / grid.spacing);
    if (half < 1) return out;
    auto masked = [&](std::size_t i) { return !mask.empty() && mask[i] != 0; };
    if (grid.dim == 1) {
        const std::int64_t n = static_cast<std::int64_t>(grid.count[0]);
        for (std::int64_t i = 0; i < n; ++i) {
            if (masked(static_cast<std::size_t>(i))) continue;
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::int64_t j = std::max<std::int64_t>(0, i - half);
                 j <= std::min<std::int64_t>(n - 1, i + half); ++j) {
                if (masked(static_cast<std::size_t>(j))) continue;
                sum += values[static_cast<std::size_t>(j)];
                ++cnt;
            }
            if (cnt) out[static_cast<std::size_t>(i)] = sum / static_cast<double>(cnt);
        }
        return out;
    }
    const std::int64_t n0 = static_cast<std::int64_t>(grid.count[0]);
    const std::int64_t n1 = static_cast<std::int64_t>(grid.count[1]);
    for (std::int64_t i0 = 0; i0 < n0; ++i0) {
        for (std::int64_t i1 = 0; i1 < n1; ++i1) {
            const std::size_t i = static_cast<std::size_t>(i0 * n1 + i1);
            if (masked(i)) continue;
            double sum = 0.0;
            std::size_t cnt = 0;
            for (std::int64_t j0 = std::max<std::int64_t>(0, i0 - half);
                 j0 <= std::min<std::int64_t>(n0 - 1, i0 + half); ++j0) {
                for (std::int64_t j1 = std::max<std::int64_t>(0, i1 - half);
                     j1 <= std::min<std::int64_t>(n1 - 1, i1 + half); ++j1) {
                    const std::size_t j = static_cast<std::size_t>(j0 * n1 + j1);
                    if (masked(j)) continue;
                    sum += values[j];
                    ++cnt;
                }
            }
            if (cnt) out[i] = sum / static_cast<double>(cnt);
        }
    }
    return out;
}

ClassificationReport classify_spectrum(const DiffractionSpectrum& empirical,
                                       const DiffractionSpectrum& predicted,
                                       const ClassifyOptions& opts) {
    if (!empirical.grid.same_as(predicted.grid)) throw std::invalid_argument("grid mismatch");
    const KGrid& grid = empirical.grid;

    ClassificationReport report;
    report.smoothing_bandwidth = opts.smoothing_bandwidth;
    const double tol = grid.spacing * opts.position_tolerance_steps * (1.0 + 1e-9);

    std::vector<bool> emp_used(empirical.peaks.size(), false);
    for (const Peak& pp : predicted.peaks) {
        double best = tol;
        std::ptrdiff_t who = -1;
        for (std::size_t e = 0; e < empirical.peaks.size(); ++e) {
            if (emp_used[e]) continue;
            const double dist = (empirical.peaks[e].position - pp.position).norm();
            if (dist <= best) {
                best = dist;
                who = static_cast<std::ptrdiff_t>(e);
            }
        }
        if (who < 0) {
            report.missed_predicted.push_back(pp);
            continue;
        }
        emp_used[static_cast<std::size_t>(who)] = true;
        const Peak& ep = empirical.peaks[static_cast<std::size_t>(who)];
        PeakMatch match;
        match.predicted_position = pp.position;
        match.empirical_position = ep.position;
        match.predicted_weight = pp.weight;
        match.empirical_weight = ep.weight;
        match.relative_error = pp.weight != 0.0 ? (ep.weight - pp.weight) / pp.weight
                                                : (ep.weight == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
        report.matched.push_back(match);
    }
    for (std::size_t e = 0; e < empirical.peaks.size(); ++e)
        if (!emp_used[e]) report.extra_empirical.push_back(empirical.peaks[e]);

    // peak-removed background comparison
    const double halfwidth = empirical.peak_halfwidth > 0.0 ? empirical.peak_halfwidth
                                                            : 12.0 / std::max(1.0, empirical.patch_radius);
    std::vector<Peak> all_peaks = empirical.peaks;
    all_peaks.insert(all_peaks.end(), predicted.peaks.begin(), predicted.peaks.end());
    std::vector<std::uint8_t> mask = peak_mask(grid, all_peaks, halfwidth);
    const std::vector<double> emp =
        smooth_density(grid, empirical.density, mask, opts.smoothing_bandwidth);

    const double cellvol = grid.cell_volume();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (mask[i]) continue;
        const double diff = emp[i] - predicted.density[i];
        report.residual_sup = std::max(report.residual_sup, std::abs(diff));
        report.residual_l1 += std::abs(diff) * cellvol;
        report.predicted_l1 += std::abs(predicted.density[i]) * cellvol;
        ++report.off_peak_cells;
    }
    report.residual_rel_l1 = report.predicted_l1 > 0.0
                                 ? report.residual_l1 / report.predicted_l1
                                 : (report.residual_l1 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
    return report;
}

double periodicity_check(const DiffractionSpectrum& spectrum, const SmallMat& basis) {
    const KGrid& grid = spectrum.grid;
    if (basis.rows() != grid.dim) throw std::invalid_argument("periodicity_check: basis/grid dimension mismatch");
    const SmallMat dual = dual_lattice(basis);
    double worst = 0.0;
    for (int gcol = 0; gcol < grid.dim; ++gcol) {
        std::array<std::int64_t, 2> shift{0, 0};
        for (int ax = 0; ax < grid.dim; ++ax) {
            const double steps = dual(ax, gcol) / grid.spacing;
            const double rounded = std::round(steps);
            if (std::abs(steps - rounded) > 1e-9 * std::max(1.0, std::abs(steps)))
                throw std::invalid_argument("grid too small");
            shift[static_cast<std::size_t>(ax)] = static_cast<std::int64_t>(rounded);
        }
        // require at least one realized pair per generator
        bool any = false;
        if (grid.dim == 1) {
            const std::int64_t n = static_cast<std::int64_t>(grid.count[0]);
            const std::int64_t s = shift[0];
            for (std::int64_t i = 0; i < n; ++i) {
                const std::int64_t j = i + s;
                if (j < 0 || j >= n) continue;
                any = true;
                worst = std::max(worst, std::abs(spectrum.density[static_cast<std::size_t>(i)] -
                                                 spectrum.density[static_cast<std::size_t>(j)]));
            }
        } else {
            const std::int64_t n0 = static_cast<std::int64_t>(grid.count[0]);
            const std::int64_t n1 = static_cast<std::int64_t>(grid.count[1]);
            for (std::int64_t i0 = 0; i0 < n0; ++i0) {
                const std::int64_t j0 = i0 + shift[0];
                if (j0 < 0 || j0 >= n0) continue;
                for (std::int64_t i1 = 0; i1 < n1; ++i1) {
                    const std::int64_t j1 = i1 + shift[1];
                    if (j1 < 0 || j1 >= n1) continue;
                    any = true;
                    worst = std::max(worst, std::abs(spectrum.density[static_cast<std::size_t>(i0 * n1 + i1)] -
                                                     spectrum.density[static_cast<std::size_t>(j0 * n1 + j1)]));
                }
            }
        }
        if (!any) throw std::invalid_argument("grid too small");
    }
    return worst;
}

}  // namespace dlab::diffraction
