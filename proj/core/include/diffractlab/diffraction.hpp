#pragma once

#include <optional>
#include <span>
#include <vector>

#include "diffractlab/autocorr.hpp"
#include "diffractlab/geometry.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

namespace dlab::diffraction {

// Uniform wave-vector grid; k(i) = spacing * (lo + i) per axis, axis 0 slow.
struct KGrid {
    int dim = 1;
    double spacing = 0.0;
    std::array<std::int64_t, 2> lo{0, 0};
    std::array<std::size_t, 2> count{1, 1};

    // Symmetric grid covering [-window, window]^d with 0 on the grid.
    static KGrid symmetric(int dim, double window, double spacing);

    std::size_t size() const { return count[0] * (dim == 2 ? count[1] : 1); }
    Vec at(std::size_t flat) const;
    // flat index of the cell nearest to k, if on the grid
    std::optional<std::size_t> index_near(const Vec& k) const;
    double cell_volume() const { return dim == 1 ? spacing : spacing * spacing; }
    bool same_as(const KGrid& other) const;
};

struct Peak {
    Vec position;
    double weight = 0.0;
};

enum class SpectrumKind { predicted, empirical };

struct DiffractionSpectrum {
    SpectrumKind kind = SpectrumKind::predicted;
    KGrid grid;
    std::vector<Peak> peaks;
    std::vector<double> density;      // ac density on the grid (empirical: intensity)
    std::vector<double> density_sem;  // empirical only, may be empty
    double patch_radius = 0.0;
    std::size_t sample_count = 1;
    double peak_threshold = 0.0;  // absolute extraction threshold (empirical)
    double peak_halfwidth = 0.0;  // integration window around peaks
};

// Finite atomic measure decorating each lattice point.
struct ProfileMeasure {
    std::vector<std::pair<Vec, Complex>> atoms;
    Complex fourier(const Vec& k) const;
};

// Columns of the returned matrix generate {z : z·y integer for all lattice y}.
SmallMat dual_lattice(const SmallMat& basis);

// Bragg peaks of the fully occupied lattice: dual-lattice points within
// ||k|| <= k_window, each of weight dens^2.
std::vector<Peak> poisson_pp(const SmallMat& basis, double dens, double k_window);

// Multiplies peak weights and density by |rho_hat(k)|^2.
DiffractionSpectrum profile_modulation(const DiffractionSpectrum& spectrum, const ProfileMeasure& rho);

struct DensityResult {
    std::vector<double> values;
    double max_imag = 0.0;            // largest imaginary residue, must stay tiny
    double tail_bound = 0.0;          // extrapolated |g| mass beyond the cutoff
    double sum_abs = 0.0;
};

// Fourier series sum_z g(z) e^{-2pi i k z} of a Hermitian table on the grid.
DensityResult fourier_series_density(const autocorr::AutocorrelationTable& table, const KGrid& grid);

struct PeriodogramOptions {
    double peak_threshold_factor = 50.0;  // theta: threshold = theta * grid median
    double peak_halfwidth = 0.0;          // 0 = default 12/r
    bool force_direct = false;            // skip the lattice FFT fast path
};

// I_r(k) = |sum_x H_x e^{-2pi i k x}|^2 / vol(B_r) averaged over samples;
// empty `samples` means unit weights. Local maxima above the threshold are
// reported as candidate Bragg peaks with integrated weights.
DiffractionSpectrum periodogram(const pointset::PointSetPatch& patch,
                                std::span<const gibbs::Configuration> samples,
                                std::span<const Complex> species_values, const KGrid& grid,
                                const PeriodogramOptions& opts = {});

// Assembles the lattice-gas prediction: Poisson peaks scaled by |mean H|^2
// plus the Fourier density of the (already dens-scaled) covariance table.
DiffractionSpectrum predicted_spectrum(const SmallMat& basis, double dens, Complex mean_h,
                                       const autocorr::AutocorrelationTable& cov_part,
                                       const KGrid& grid, double k_window);

struct PeakMatch {
    Vec predicted_position;
    Vec empirical_position;
    double predicted_weight = 0.0;
    double empirical_weight = 0.0;
    double relative_error = 0.0;
};

struct ClassificationReport {
    std::vector<PeakMatch> matched;
    std::vector<Peak> missed_predicted;
    std::vector<Peak> extra_empirical;
    double residual_sup = 0.0;
    double residual_l1 = 0.0;
    double predicted_l1 = 0.0;  // off-peak reference mass
    double residual_rel_l1 = 0.0;
    std::size_t off_peak_cells = 0;
    double smoothing_bandwidth = 0.0;
};

struct ClassifyOptions {
    double smoothing_bandwidth = 0.0;  // Daniell window halfwidth in k units
    double position_tolerance_steps = 1.0;
};

// Matches peaks within one grid step, removes peak windows, and compares
// the (optionally smoothed) empirical background against the predicted
// density. The residual norms are finite-size diagnostics, not proof of
// spectral type.
ClassificationReport classify_spectrum(const DiffractionSpectrum& empirical,
                                       const DiffractionSpectrum& predicted,
                                       const ClassifyOptions& opts = {});

// Max |density(k) - density(k+m)| over dual-lattice translates m realized
// on the grid. The grid must cover at least two fundamental domains.
double periodicity_check(const DiffractionSpectrum& spectrum, const SmallMat& basis);

// Daniell smoothing of a gridded density, skipping masked cells.
std::vector<double> smooth_density(const KGrid& grid, std::span<const double> values,
                                   std::span<const std::uint8_t> mask, double bandwidth);

// Cells within the peak integration window of any listed peak.
std::vector<std::uint8_t> peak_mask(const KGrid& grid, std::span<const Peak> peaks, double halfwidth);

}  // namespace dlab::diffraction
