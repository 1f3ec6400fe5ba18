#include "diffractlab/experiment.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "diffractlab/io.hpp"
#include "diffractlab/rng.hpp"

namespace dlab::experiment {

namespace {

constexpr const char* kVersion = "diffractlab 0.1.0";

std::vector<std::string> split(const std::string& s, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

double to_double(const std::string& v) {
    try {
        return std::stod(v);
    } catch (const std::exception&) {
        throw std::runtime_error("malformed number: '" + v + "'");
    }
}

std::size_t to_size(const std::string& v) { return static_cast<std::size_t>(std::stoull(v)); }

bool to_bool(const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::runtime_error("malformed bool: '" + v + "'");
}

SmallMat parse_matrix(const std::string& s) {
    const auto rows = split(s, '|');
    const auto first = split(rows[0], ',');
    SmallMat m(static_cast<int>(rows.size()), static_cast<int>(first.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto cols = split(rows[i], ',');
        if (cols.size() != first.size()) throw std::runtime_error("ragged matrix: " + s);
        for (std::size_t j = 0; j < cols.size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = to_double(trim(cols[j]));
    }
    return m;
}

std::vector<Complex> parse_complex_list(const std::string& s) {
    std::vector<Complex> out;
    for (const std::string& item : split(s, ',')) {
        const auto colon = item.find(':');
        if (colon == std::string::npos) {
            out.emplace_back(to_double(trim(item)), 0.0);
        } else {
            out.emplace_back(to_double(trim(item.substr(0, colon))),
                             to_double(trim(item.substr(colon + 1))));
        }
    }
    return out;
}

// key table: one row per config field
struct KeyEntry {
    const char* key;
    std::function<void(ExperimentConfig&, const std::string&)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

const std::vector<KeyEntry>& key_table() {
    using C = ExperimentConfig;
    auto d = [](double C::*field) {
        return KeyEntry{nullptr,
                        [field](C& c, const std::string& v) { c.*field = to_double(v); },
                        [field](const C& c) { return io::format_double(c.*field); }};
    };
    auto s = [](std::string C::*field) {
        return KeyEntry{nullptr,
                        [field](C& c, const std::string& v) { c.*field = v; },
                        [field](const C& c) { return c.*field; }};
    };
    auto z = [](std::size_t C::*field) {
        return KeyEntry{nullptr,
                        [field](C& c, const std::string& v) { c.*field = to_size(v); },
                        [field](const C& c) { return std::to_string(c.*field); }};
    };
    static const std::vector<KeyEntry> table = [&]() {
        std::vector<KeyEntry> t;
        auto add = [&t](const char* key, KeyEntry e) {
            e.key = key;
            t.push_back(std::move(e));
        };
        add("pointset.kind", s(&C::pointset_kind));
        add("pointset.basis", s(&C::pointset_basis));
        add("pointset.radius", d(&C::pointset_radius));
        add("pointset.window_offset", d(&C::window_offset));
        add("pointset.window_length", d(&C::window_length));
        add("potential.mode", s(&C::potential_mode));
        add("potential.species", s(&C::species));
        add("potential.probabilities", s(&C::probabilities));
        add("potential.beta", d(&C::beta));
        add("potential.kernel", s(&C::kernel));
        add("potential.range", d(&C::range));
        add("potential.j0", d(&C::j0));
        add("potential.kappa", d(&C::kappa));
        add("potential.q", d(&C::q_exponent));
        add("potential.phi", s(&C::phi));
        add("sampler.sweeps", z(&C::sweeps));
        add("sampler.burn_in", z(&C::burn_in));
        add("sampler.thinning", z(&C::thinning));
        add("sampler.seed", KeyEntry{nullptr,
                                     [](C& c, const std::string& v) { c.seed = std::stoull(v); },
                                     [](const C& c) { return std::to_string(c.seed); }});
        add("sampler.chains", z(&C::chains));
        add("sampler.boundary", s(&C::boundary));
        add("analysis.cutoff", d(&C::cutoff));
        add("analysis.k_spacing", d(&C::k_spacing));
        add("analysis.k_window", d(&C::k_window));
        add("analysis.peak_threshold", d(&C::peak_threshold));
        add("analysis.peak_halfwidth", d(&C::peak_halfwidth));
        add("analysis.smoothing_bandwidth", d(&C::smoothing_bandwidth));
        add("analysis.metric", s(&C::metric));
        add("analysis.metric_t", d(&C::metric_t));
        add("analysis.metric_p", d(&C::metric_p));
        add("analysis.covariance_mode", s(&C::covariance_mode));
        add("analysis.periodic_wrap",
            KeyEntry{nullptr, [](C& c, const std::string& v) { c.periodic_wrap = to_bool(v); },
                     [](const C& c) { return c.periodic_wrap ? std::string("true") : std::string("false"); }});
        add("analysis.cluster_range", d(&C::cluster_range));
        add("report.l1_tol", d(&C::report_l1_tol));
        add("report.l1_abs_tol", d(&C::report_l1_abs_tol));
        add("report.peak_tol", d(&C::report_peak_tol));
        add("output.dir", s(&C::out_dir));
        return t;
    }();
    return table;
}

std::string out_path(const ExperimentConfig& config, const std::string& file) {
    return config.out_dir + "/" + file;
}

std::string require_file(const ExperimentConfig& config, const std::string& file,
                         const std::string& producing_stage) {
    const std::string path = out_path(config, file);
    if (!io::file_exists(path))
        throw std::runtime_error("missing " + file + " - run `" + producing_stage + "` first");
    return path;
}

pointset::PointSetPatch load_patch(const ExperimentConfig& config) {
    std::ifstream f(require_file(config, "patch.csv", "generate"));
    return io::read_patch_csv(f);
}

std::vector<gibbs::Configuration> load_samples(const ExperimentConfig& config) {
    std::ifstream f(require_file(config, "samples.csv", "sample"));
    return io::read_samples_csv(f);
}

gibbs::PotentialSpec effective_potential(const ExperimentConfig& config) {
    gibbs::PotentialSpec pot = build_potential(config);
    if (config.potential_mode != "gibbs") pot.beta = 0.0;  // interaction-free modes
    return pot;
}

Complex pooled_mean(std::span<const gibbs::Configuration> samples, std::span<const Complex> values) {
    Complex mean{0.0, 0.0};
    std::size_t count = 0;
    for (const auto& cfg : samples) {
        for (std::uint8_t a : cfg.species) mean += values[a - 1];
        count += cfg.size();
    }
    return count ? mean / static_cast<double>(count) : Complex{1.0, 0.0};
}

void stage_generate(const ExperimentConfig& config, std::ostream& log) {
    const auto patch = build_patch(config);
    std::ostringstream os;
    io::write_patch_csv(os, patch);
    io::write_text_file(out_path(config, "patch.csv"), os.str());
    log << "generate: " << patch.size() << " points, density "
        << io::format_sig12(pointset::density_estimate(patch)) << "\n";
}

void stage_dobrushin(const ExperimentConfig& config, std::ostream& log) {
    const auto patch = load_patch(config);
    const auto pot = effective_potential(config);
    const auto metric = build_metric(config);
    const auto report = gibbs::dobrushin_check(pot, patch, metric);
    std::ostringstream os;
    io::write_key_values(os, io::dobrushin_key_values(report));
    os << "high_temperature_threshold="
       << io::format_double(gibbs::high_temperature_threshold(pot, patch, metric)) << "\n";
    io::write_text_file(out_path(config, "dobrushin.txt"), os.str());
    log << "dobrushin: criterion " << io::format_sig12(report.criterion_value) << ", "
        << (report.satisfied ? "satisfied" : "NOT satisfied") << "\n";
}

void stage_sample(const ExperimentConfig& config, std::ostream& log) {
    if (config.potential_mode == "none") {
        log << "sample: potential.mode=none, nothing to sample\n";
        return;
    }
    const auto patch = load_patch(config);
    std::vector<gibbs::Configuration> samples;
    const std::size_t per_chain = config.sweeps / std::max<std::size_t>(1, config.thinning);
    for (std::size_t c = 0; c < std::max<std::size_t>(1, config.chains); ++c) {
        const std::uint64_t seed = chain_seed(config.seed, c);
        if (config.potential_mode == "bernoulli") {
            const auto probs = build_probabilities(config);
            auto chunk = gibbs::sample_bernoulli(patch, probs, per_chain, seed);
            samples.insert(samples.end(), chunk.begin(), chunk.end());
        } else if (config.potential_mode == "gibbs") {
            gibbs::SamplerParams params;
            params.sweeps = config.sweeps;
            params.burn_in = config.burn_in;
            params.thinning = config.thinning;
            params.seed = seed;
            if (config.boundary.rfind("fixed", 0) == 0) {
                params.boundary.kind = gibbs::Boundary::Kind::fixed;
                std::uint8_t species = 1;
                const auto colon = config.boundary.find(':');
                if (colon != std::string::npos)
                    species = static_cast<std::uint8_t>(std::stoi(config.boundary.substr(colon + 1)));
                params.boundary.values.species.assign(patch.size(), species);
            }
            auto chunk = gibbs::sample_gibbs(patch, build_potential(config), params);
            samples.insert(samples.end(), chunk.begin(), chunk.end());
        } else {
            throw std::runtime_error("unknown potential.mode: " + config.potential_mode);
        }
    }
    std::ostringstream os;
    io::write_samples_csv(os, samples);
    io::write_text_file(out_path(config, "samples.csv"), os.str());
    log << "sample: " << samples.size() << " configurations\n";
}

void stage_autocorr(const ExperimentConfig& config, std::ostream& log) {
    const auto patch = load_patch(config);
    const double cutoff = std::min(config.cutoff, patch.radius());

    if (config.potential_mode == "none") {
        const auto eta = autocorr::eta_unweighted(patch, cutoff);
        std::ostringstream os;
        io::write_table_csv(os, eta, patch.dim());
        io::write_text_file(out_path(config, "autocorr.csv"), os.str());
        log << "autocorr: " << eta.entries.size() << " unweighted coefficients\n";
        return;
    }

    const auto samples = load_samples(config);
    const auto values = parse_complex_list(config.species);
    autocorr::EstimatorOptions opts;
    opts.periodic_wrap = config.periodic_wrap;

    const auto weighted = autocorr::eta_weighted(patch, samples, values, cutoff, opts);
    {
        std::ostringstream os;
        io::write_table_csv(os, weighted, patch.dim());
        io::write_text_file(out_path(config, "autocorr.csv"), os.str());
    }

    autocorr::AutocorrelationTable cov;
    if (patch.is_lattice()) {
        const auto mode = config.covariance_mode == "ensemble" ? autocorr::CovarianceMode::ensemble
                                                               : autocorr::CovarianceMode::translation_average;
        cov = autocorr::covariance_estimate(patch, samples, values, cutoff, mode, opts);
    } else if (config.cluster_range > 0.0) {
        // cluster-conditioned conditional covariances, one z at a time
        cov.kind = autocorr::TableKind::covariance;
        cov.patch_radius = patch.radius();
        cov.sample_count = samples.size();
        cov.cutoff = cutoff;
        for (const auto& [z, mult] : pointset::difference_set(patch, cutoff)) {
            const QKey key(z);
            bool positive = false;
            for (int i = 0; i < key.dim; ++i) {
                if (key.q[static_cast<std::size_t>(i)] > 0) { positive = true; break; }
                if (key.q[static_cast<std::size_t>(i)] < 0) break;
            }
            if (!positive && !key.is_zero()) continue;
            const double cluster_radius = z.norm() + config.cluster_range;
            if (!(cluster_radius < patch.radius() / 2.0)) continue;  // interior statistics unavailable
            const auto clusters = pointset::cluster_frequencies(patch, cluster_radius);
            const auto cc =
                autocorr::conditional_by_cluster(patch, samples, values, clusters, z, config.cluster_range);
            autocorr::TableEntry entry;
            entry.value = cc.aggregate;
            entry.sem = cc.aggregate_sem;
            cov.entries[key] = entry;
            if (!key.is_zero()) {
                entry.value = std::conj(entry.value);
                cov.entries[key.negated()] = entry;
            }
        }
    } else {
        cov = autocorr::covariance_estimate(patch, samples, values, cutoff,
                                            autocorr::CovarianceMode::ensemble, opts);
    }
    std::ostringstream os;
    io::write_table_csv(os, cov, patch.dim());
    io::write_text_file(out_path(config, "covariance.csv"), os.str());
    log << "autocorr: " << weighted.entries.size() << " weighted, " << cov.entries.size()
        << " covariance coefficients\n";
}

autocorr::AutocorrelationTable zero_table(const pointset::PointSetPatch& patch,
                                          const ExperimentConfig& config) {
    autocorr::AutocorrelationTable t;
    t.kind = autocorr::TableKind::covariance;
    t.patch_radius = patch.radius();
    t.cutoff = std::min(config.cutoff, patch.radius());
    autocorr::TableEntry zero;
    Vec origin;
    origin.dim = patch.dim();
    t.entries[QKey(origin)] = zero;
    return t;
}

// E_p(H) and E_p(|H|^2) for the configured Bernoulli weights
std::pair<Complex, double> bernoulli_moments(const ExperimentConfig& config,
                                             std::span<const Complex> values) {
    const auto probs = build_probabilities(config);
    if (probs.size() != values.size()) throw std::runtime_error("invalid probability vector");
    Complex mean{0.0, 0.0};
    double second = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        mean += probs[i] * values[i];
        second += probs[i] * std::norm(values[i]);
    }
    return {mean, second};
}

autocorr::AutocorrelationTable load_cov_part(const ExperimentConfig& config, double dens) {
    std::ifstream f(require_file(config, "covariance.csv", "autocorr"));
    auto cov = io::read_table_csv(f);
    for (auto& [key, entry] : cov.entries) entry.value *= dens;
    return cov;
}

void stage_diffract(const ExperimentConfig& config, std::ostream& log) {
    const auto patch = load_patch(config);
    const auto values = parse_complex_list(config.species);
    const auto grid = build_grid(config, patch.dim(), patch.radius());
    diffraction::PeriodogramOptions popts;
    popts.peak_threshold_factor = config.peak_threshold;
    popts.peak_halfwidth = config.peak_halfwidth;

    std::vector<gibbs::Configuration> samples;
    if (config.potential_mode != "none") samples = load_samples(config);

    const auto empirical = diffraction::periodogram(patch, samples, values, grid, popts);
    {
        std::ostringstream os;
        io::write_spectrum_csv(os, empirical);
        io::write_text_file(out_path(config, "spectrum_empirical.csv"), os.str());
    }

    const double dens = pointset::density_estimate(patch);
    diffraction::DiffractionSpectrum predicted;
    if (patch.is_lattice()) {
        const SmallMat& basis = *patch.lattice_basis();
        if (config.potential_mode == "none") {
            predicted = diffraction::predicted_spectrum(basis, dens, Complex{1.0, 0.0},
                                                        zero_table(patch, config), grid, config.k_window);
        } else if (config.potential_mode == "bernoulli") {
            const auto [mean, second] = bernoulli_moments(config, values);
            auto flat = zero_table(patch, config);
            Vec origin;
            origin.dim = patch.dim();
            flat.entries[QKey(origin)].value = dens * (second - std::norm(mean));
            predicted = diffraction::predicted_spectrum(basis, dens, mean, flat, grid, config.k_window);
        } else {
            predicted = diffraction::predicted_spectrum(basis, dens, pooled_mean(samples, values),
                                                        load_cov_part(config, dens), grid, config.k_window);
            if (io::file_exists(out_path(config, "dobrushin.txt"))) {
                std::ifstream df(out_path(config, "dobrushin.txt"));
                const auto rep = io::dobrushin_from_key_values(io::read_key_values(df));
                if (!rep.satisfied)
                    log << "diffract: uniqueness criterion not satisfied, prediction not certified\n";
            }
        }
    } else {
        // model set: pure-point reference is the unweighted spectrum of the
        // same patch; disorder scales it by |E H|^2 and adds the flat or
        // covariance-series background.
        predicted = diffraction::periodogram(patch, {}, values, grid, popts);
        predicted.kind = diffraction::SpectrumKind::predicted;
        predicted.sample_count = 1;
        predicted.density_sem.clear();
        if (config.potential_mode == "none") {
            std::fill(predicted.density.begin(), predicted.density.end(), 0.0);
        } else if (config.potential_mode == "bernoulli") {
            const auto [mean, second] = bernoulli_moments(config, values);
            const double scale = std::norm(mean);
            const double flat = dens * (second - scale);
            for (auto& p : predicted.peaks) p.weight *= scale;
            for (auto& v : predicted.density) v = scale * v + flat;
        } else {
            const double scale = std::norm(pooled_mean(samples, values));
            for (auto& p : predicted.peaks) p.weight *= scale;
            if (io::file_exists(out_path(config, "covariance.csv"))) {
                const auto ac = diffraction::fourier_series_density(load_cov_part(config, dens), grid);
                for (std::size_t i = 0; i < predicted.density.size(); ++i)
                    predicted.density[i] = scale * predicted.density[i] + ac.values[i];
            } else {
                for (auto& v : predicted.density) v *= scale;
            }
        }
    }
    std::ostringstream os;
    io::write_spectrum_csv(os, predicted);
    io::write_text_file(out_path(config, "spectrum_predicted.csv"), os.str());
    log << "diffract: " << empirical.peaks.size() << " empirical peaks, " << predicted.peaks.size()
        << " predicted peaks\n";
}

void stage_classify(const ExperimentConfig& config, std::ostream& log) {
    std::ifstream fe(require_file(config, "spectrum_empirical.csv", "diffract"));
    std::ifstream fp(require_file(config, "spectrum_predicted.csv", "diffract"));
    const auto empirical = io::read_spectrum_csv(fe);
    const auto predicted = io::read_spectrum_csv(fp);
    diffraction::ClassifyOptions opts;
    opts.smoothing_bandwidth = config.smoothing_bandwidth;
    const auto report = diffraction::classify_spectrum(empirical, predicted, opts);
    std::ostringstream os;
    io::write_key_values(os, io::classification_key_values(report));
    io::write_text_file(out_path(config, "classification.txt"), os.str());
    log << "classify: " << report.matched.size() << " matched peaks, rel L1 residual "
        << io::format_sig12(report.residual_rel_l1) << "\n";
}

int stage_report(const ExperimentConfig& config, std::ostream& log) {
    bool failed = false;
    std::ostringstream os;
    os << "# " << kVersion << " report\n";

    if (config.potential_mode == "gibbs") {
        std::ifstream f(require_file(config, "dobrushin.txt", "dobrushin"));
        const auto rep = io::dobrushin_from_key_values(io::read_key_values(f));
        const bool ok = rep.satisfied;
        os << (ok ? "PASS" : "FAIL") << " dobrushin criterion "
           << io::format_sig12(rep.criterion_value) << " < 2\n";
        failed = failed || !ok;
    }

    {
        std::ifstream f(require_file(config, "classification.txt", "classify"));
        const auto kv = io::read_key_values(f);
        const double rel = std::stod(kv.at("residual_rel_l1"));
        const double abs_l1 = std::stod(kv.at("residual_l1"));
        const double pred_l1 = std::stod(kv.at("predicted_l1"));
        if (pred_l1 > 1e-12) {
            const bool l1_ok = rel <= config.report_l1_tol;
            os << (l1_ok ? "PASS" : "FAIL") << " off-peak density residual rel L1 "
               << io::format_sig12(rel) << " <= " << io::format_sig12(config.report_l1_tol) << "\n";
            failed = failed || !l1_ok;
        } else {
            // pure-point prediction: judge the leftover mass absolutely
            const bool l1_ok = abs_l1 <= config.report_l1_abs_tol;
            os << (l1_ok ? "PASS" : "FAIL") << " off-peak leftover L1 " << io::format_sig12(abs_l1)
               << " <= " << io::format_sig12(config.report_l1_abs_tol) << "\n";
            failed = failed || !l1_ok;
        }

        const std::size_t matched = to_size(kv.at("matched_count"));
        double worst = 0.0;
        for (std::size_t i = 0; i < matched; ++i) {
            worst = std::max(worst,
                             std::abs(std::stod(kv.at("match." + std::to_string(i) + ".relative_error"))));
        }
        if (matched > 0) {
            const bool peaks_ok = worst <= config.report_peak_tol;
            os << (peaks_ok ? "PASS" : "FAIL") << " peak weights worst rel error "
               << io::format_sig12(worst) << " <= " << io::format_sig12(config.report_peak_tol) << "\n";
            failed = failed || !peaks_ok;
        }
        const std::size_t missed = to_size(kv.at("missed_count"));
        os << "INFO matched=" << matched << " missed=" << missed
           << " extra=" << kv.at("extra_count") << "\n";
    }

    io::write_text_file(out_path(config, "report.txt"), os.str());
    log << os.str();
    return failed ? 2 : 0;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig config;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("expected key=value, got: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        bool found = false;
        for (const auto& entry : key_table()) {
            if (key == entry.key) {
                entry.set(config, value);
                found = true;
                break;
            }
        }
        if (!found) throw std::runtime_error("unknown config key: " + key);
    }
    return config;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    return from_string(io::read_text_file(path));
}

std::string ExperimentConfig::serialize() const {
    std::string out;
    for (const auto& entry : key_table()) {
        out += entry.key;
        out += '=';
        out += entry.get(*this);
        out += '\n';
    }
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return io::fnv1a64(serialize()); }

pointset::PointSetPatch build_patch(const ExperimentConfig& config) {
    if (config.pointset_kind == "lattice")
        return pointset::generate_lattice_patch(parse_matrix(config.pointset_basis),
                                                config.pointset_radius);
    if (config.pointset_kind == "fibonacci")
        return pointset::generate_model_set_patch(
            pointset::fibonacci_scheme(config.window_offset, config.window_length),
            config.pointset_radius);
    if (config.pointset_kind == "silver")
        return pointset::generate_model_set_patch(
            pointset::silver_scheme(config.window_offset, config.window_length),
            config.pointset_radius);
    throw std::runtime_error("unknown pointset.kind: " + config.pointset_kind);
}

gibbs::PotentialSpec build_potential(const ExperimentConfig& config) {
    gibbs::PotentialSpec pot;
    pot.species_values = parse_complex_list(config.species);
    pot.beta = config.beta;
    if (config.kernel == "finite_range") {
        pot.kernel = gibbs::FiniteRangeKernel{config.range};
    } else if (config.kernel == "exponential") {
        pot.kernel = gibbs::ExponentialKernel{config.j0, config.kappa};
    } else if (config.kernel == "algebraic") {
        pot.kernel = gibbs::AlgebraicKernel{config.j0, config.q_exponent};
    } else {
        throw std::runtime_error("unknown potential.kernel: " + config.kernel);
    }
    const SmallMat phi = parse_matrix(config.phi);
    if (phi.rows() != phi.cols() || phi.rows() != static_cast<int>(pot.species_values.size()))
        throw std::runtime_error("potential.phi must be n x n for n species");
    pot.phi.resize(pot.species_values.size() * pot.species_values.size());
    for (int i = 0; i < phi.rows(); ++i)
        for (int j = 0; j < phi.cols(); ++j)
            pot.phi[static_cast<std::size_t>(i) * pot.species_values.size() + static_cast<std::size_t>(j)] =
                phi(i, j);
    return pot;
}

gibbs::MetricSpec build_metric(const ExperimentConfig& config) {
    gibbs::MetricSpec metric;
    if (config.metric == "scaled_euclidean") {
        metric.kind = gibbs::MetricSpec::Kind::scaled_euclidean;
    } else if (config.metric == "capped") {
        metric.kind = gibbs::MetricSpec::Kind::capped;
    } else {
        throw std::runtime_error("unknown analysis.metric: " + config.metric);
    }
    metric.t = config.metric_t;
    metric.p = config.metric_p;
    return metric;
}

std::vector<double> build_probabilities(const ExperimentConfig& config) {
    std::vector<double> probs;
    for (const std::string& v : split(config.probabilities, ',')) probs.push_back(to_double(trim(v)));
    return probs;
}

diffraction::KGrid build_grid(const ExperimentConfig& config, int dim, double radius) {
    const double spacing = config.k_spacing > 0.0 ? config.k_spacing : 1.0 / (8.0 * radius);
    return diffraction::KGrid::symmetric(dim, config.k_window, spacing);
}

int run_stage(const ExperimentConfig& config, const std::string& stage, std::ostream& log) {
    if (stage == "generate") stage_generate(config, log);
    else if (stage == "dobrushin") stage_dobrushin(config, log);
    else if (stage == "sample") stage_sample(config, log);
    else if (stage == "autocorr") stage_autocorr(config, log);
    else if (stage == "diffract") stage_diffract(config, log);
    else if (stage == "classify") stage_classify(config, log);
    else if (stage == "report") return stage_report(config, log);
    else throw std::runtime_error("unknown stage: " + stage);
    return 0;
}

void write_manifest(const ExperimentConfig& config, std::ostream& log) {
    std::vector<std::pair<std::string, std::string>> kv;
    kv.emplace_back("version", kVersion);
    char hash[32];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(config.hash()));
    kv.emplace_back("config_hash", hash);
    for (const char* file : {"patch.csv", "dobrushin.txt", "samples.csv", "autocorr.csv",
                             "covariance.csv", "spectrum_predicted.csv", "spectrum_empirical.csv",
                             "classification.txt", "report.txt"}) {
        const std::string path = out_path(config, file);
        if (!io::file_exists(path)) continue;
        char h[32];
        std::snprintf(h, sizeof(h), "%016llx",
                      static_cast<unsigned long long>(io::fnv1a64(io::read_text_file(path))));
        kv.emplace_back(std::string("file.") + file, h);
    }
    std::ostringstream os;
    io::write_key_values(os, kv);
    io::write_text_file(out_path(config, "manifest.txt"), os.str());
    log << "manifest: " << kv.size() - 2 << " files\n";
}

int run_all(const ExperimentConfig& config, std::ostream& log) {
    int status = 0;
    for (const std::string& stage : stage_names()) {
        const int rc = run_stage(config, stage, log);
        if (stage == "report") status = rc;
    }
    write_manifest(config, log);
    return status;
}

}  // namespace dlab::experiment
