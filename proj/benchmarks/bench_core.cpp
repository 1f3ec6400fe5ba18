#include <benchmark/benchmark.h>

#include "diffractlab/autocorr.hpp"
#include "diffractlab/diffraction.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

using namespace dlab;

namespace {

SmallMat mat1(double a) {
    SmallMat m(1, 1);
    m(0, 0) = a;
    return m;
}

const Complex kUnit[] = {Complex(1, 0)};

void bm_heat_bath_sweep(benchmark::State& state) {
    const auto patch = pointset::generate_lattice_patch(mat1(1.0), static_cast<double>(state.range(0)));
    const auto pot = gibbs::ising_potential(0.1);
    gibbs::SamplerParams params;
    params.burn_in = 0;
    params.thinning = 1;
    params.sweeps = 1;
    params.seed = 7;
    for (auto _ : state) {
        benchmark::DoNotOptimize(gibbs::sample_gibbs(patch, pot, params));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(patch.size()));
}
BENCHMARK(bm_heat_bath_sweep)->Arg(512)->Arg(2048);

void bm_periodogram_direct(benchmark::State& state) {
    const auto patch = pointset::generate_model_set_patch(pointset::fibonacci_scheme(),
                                                          static_cast<double>(state.range(0)));
    const auto grid = diffraction::KGrid::symmetric(1, 2.0, 1.0 / (8.0 * patch.radius()));
    diffraction::PeriodogramOptions opts;
    opts.force_direct = true;
    for (auto _ : state) {
        benchmark::DoNotOptimize(diffraction::periodogram(patch, {}, kUnit, grid, opts));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(patch.size() * grid.size()));
}
BENCHMARK(bm_periodogram_direct)->Arg(100)->Arg(300);

void bm_periodogram_fft(benchmark::State& state) {
    const auto patch = pointset::generate_lattice_patch(mat1(1.0), static_cast<double>(state.range(0)));
    const auto grid = diffraction::KGrid::symmetric(1, 1.5, 1.0 / (8.0 * patch.radius()));
    for (auto _ : state) {
        benchmark::DoNotOptimize(diffraction::periodogram(patch, {}, kUnit, grid, {}));
    }
}
BENCHMARK(bm_periodogram_fft)->Arg(2048)->Arg(8192);

void bm_difference_set(benchmark::State& state) {
    const auto patch = pointset::generate_model_set_patch(pointset::fibonacci_scheme(),
                                                          static_cast<double>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(pointset::difference_set(patch, 20.0));
    }
}
BENCHMARK(bm_difference_set)->Arg(200)->Arg(500);

void bm_fourier_series(benchmark::State& state) {
    autocorr::AutocorrelationTable table;
    table.cutoff = 30.0;
    for (long z = -30; z <= 30; ++z)
        table.entries[QKey(Vec(static_cast<double>(z)))].value =
            Complex(std::pow(0.3, std::labs(z)), 0.0);
    const auto grid =
        diffraction::KGrid::symmetric(1, 1.5, 1.0 / static_cast<double>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(diffraction::fourier_series_density(table, grid));
    }
}
BENCHMARK(bm_fourier_series)->Arg(1 << 12)->Arg(1 << 14);

}  // namespace

BENCHMARK_MAIN();
