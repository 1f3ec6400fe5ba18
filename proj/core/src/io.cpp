#include "diffractlab/io.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dlab::io {

namespace {

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

double parse_double(const std::string& s) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::runtime_error("malformed number: '" + s + "'");
    }
}

// attribute list "a=1;b=2", with '|'-separated matrix rows inside values
std::map<std::string, std::string> parse_attrs(const std::string& s) {
    std::map<std::string, std::string> out;
    for (const std::string& part : split(s, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) {
            out[trim(part)] = "";
        } else {
            out[trim(part.substr(0, eq))] = trim(part.substr(eq + 1));
        }
    }
    return out;
}

SmallMat parse_matrix(const std::string& s) {
    const auto rows = split(s, '|');
    const auto first = split(rows[0], ',');
    SmallMat m(static_cast<int>(rows.size()), static_cast<int>(first.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto cols = split(rows[i], ',');
        if (cols.size() != first.size()) throw std::runtime_error("ragged matrix: " + s);
        for (std::size_t j = 0; j < cols.size(); ++j)
            m(static_cast<int>(i), static_cast<int>(j)) = parse_double(cols[j]);
    }
    return m;
}

std::string format_matrix(const SmallMat& m) {
    std::string out;
    for (int i = 0; i < m.rows(); ++i) {
        if (i) out += '|';
        for (int j = 0; j < m.cols(); ++j) {
            if (j) out += ',';
            out += format_double(m(i, j));
        }
    }
    return out;
}

const char* table_kind_name(autocorr::TableKind kind) {
    switch (kind) {
        case autocorr::TableKind::unweighted_eta: return "unweighted_eta";
        case autocorr::TableKind::weighted_eta: return "weighted_eta";
        case autocorr::TableKind::covariance: return "covariance";
    }
    return "unweighted_eta";
}

autocorr::TableKind table_kind_from(const std::string& name) {
    if (name == "unweighted_eta") return autocorr::TableKind::unweighted_eta;
    if (name == "weighted_eta") return autocorr::TableKind::weighted_eta;
    if (name == "covariance") return autocorr::TableKind::covariance;
    throw std::runtime_error("unknown table kind: " + name);
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_sig12(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

void write_patch_csv(std::ostream& os, const pointset::PointSetPatch& patch) {
    std::string descriptor;
    if (auto* basis = patch.lattice_basis()) {
        descriptor = "lattice;basis=" + format_matrix(*basis);
    } else {
        const auto& scheme = std::get<pointset::ModelSetGenerator>(patch.generator()).scheme;
        descriptor = "modelset;preset=" + (scheme.name.empty() ? std::string("custom") : scheme.name);
        descriptor += ";d=" + std::to_string(scheme.phys_dim) + ";m=" + std::to_string(scheme.internal_dim);
        descriptor += ";basis=" + format_matrix(scheme.lattice_basis);
        descriptor += ";phys=" + format_matrix(scheme.physical_projection);
        descriptor += ";internal=" + format_matrix(scheme.internal_projection);
        descriptor += ";window_lo=";
        for (std::size_t i = 0; i < scheme.window_lo.size(); ++i) {
            if (i) descriptor += ',';
            descriptor += format_double(scheme.window_lo[i]);
        }
        descriptor += ";window_hi=";
        for (std::size_t i = 0; i < scheme.window_hi.size(); ++i) {
            if (i) descriptor += ',';
            descriptor += format_double(scheme.window_hi[i]);
        }
    }
    os << "# dim=" << patch.dim() << " radius=" << format_double(patch.radius())
       << " generator=" << descriptor << "\n";
    for (const Vec& p : patch.points()) {
        os << format_sig12(p[0]);
        if (patch.dim() == 2) os << ',' << format_sig12(p[1]);
        os << "\n";
    }
}

pointset::PointSetPatch read_patch_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# ", 0) != 0)
        throw std::runtime_error("patch csv: missing header");
    int dim = 0;
    double radius = 0.0;
    std::string descriptor;
    {
        std::istringstream hs(header.substr(2));
        std::string tok;
        while (hs >> tok) {
            if (tok.rfind("dim=", 0) == 0) dim = std::stoi(tok.substr(4));
            else if (tok.rfind("radius=", 0) == 0) radius = parse_double(tok.substr(7));
            else if (tok.rfind("generator=", 0) == 0) descriptor = tok.substr(10);
        }
    }
    if (dim < 1 || dim > 2 || !(radius > 0.0)) throw std::runtime_error("patch csv: bad header");

    pointset::Generator generator;
    const auto semi = descriptor.find(';');
    const std::string kind = descriptor.substr(0, semi);
    const auto attrs = parse_attrs(semi == std::string::npos ? "" : descriptor.substr(semi + 1));
    if (kind == "lattice") {
        generator = pointset::LatticeGenerator{parse_matrix(attrs.at("basis"))};
    } else if (kind == "modelset") {
        pointset::CutProjectScheme scheme;
        scheme.name = attrs.at("preset") == "custom" ? "" : attrs.at("preset");
        scheme.phys_dim = std::stoi(attrs.at("d"));
        scheme.internal_dim = std::stoi(attrs.at("m"));
        scheme.lattice_basis = parse_matrix(attrs.at("basis"));
        scheme.physical_projection = parse_matrix(attrs.at("phys"));
        scheme.internal_projection = parse_matrix(attrs.at("internal"));
        for (const std::string& v : split(attrs.at("window_lo"), ','))
            scheme.window_lo.push_back(parse_double(v));
        for (const std::string& v : split(attrs.at("window_hi"), ','))
            scheme.window_hi.push_back(parse_double(v));
        scheme.validate();
        generator = pointset::ModelSetGenerator{std::move(scheme)};
    } else {
        throw std::runtime_error("patch csv: unknown generator kind '" + kind + "'");
    }

    std::vector<Vec> points;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto cols = split(line, ',');
        if (static_cast<int>(cols.size()) != dim) throw std::runtime_error("patch csv: bad point row");
        Vec p;
        p.dim = dim;
        for (int i = 0; i < dim; ++i) p[i] = parse_double(cols[static_cast<std::size_t>(i)]);
        points.push_back(p);
    }
    return pointset::PointSetPatch(std::move(points), dim, radius, std::move(generator));
}

void write_samples_csv(std::ostream& os, std::span<const gibbs::Configuration> samples) {
    os << "# samples count=" << samples.size() << " sites=" << (samples.empty() ? 0 : samples[0].size())
       << "\n";
    for (const auto& cfg : samples) {
        for (std::size_t i = 0; i < cfg.size(); ++i) {
            if (i) os << ',';
            os << static_cast<int>(cfg.species[i]);
        }
        os << "\n";
    }
}

std::vector<gibbs::Configuration> read_samples_csv(std::istream& is) {
    std::vector<gibbs::Configuration> samples;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        gibbs::Configuration cfg;
        for (const std::string& v : split(line, ',')) {
            const int s = std::stoi(v);
            if (s < 1 || s > 255) throw std::runtime_error("samples csv: species index out of range");
            cfg.species.push_back(static_cast<std::uint8_t>(s));
        }
        samples.push_back(std::move(cfg));
    }
    return samples;
}

void write_table_csv(std::ostream& os, const autocorr::AutocorrelationTable& table, int dim) {
    os << "# autocorr kind=" << table_kind_name(table.kind) << " dim=" << dim
       << " radius=" << format_double(table.patch_radius) << " samples=" << table.sample_count
       << " cutoff=" << format_double(table.cutoff) << "\n";
    for (const auto& [key, entry] : table.entries) {
        const Vec z = key.vec();
        os << format_double(z[0]);
        if (dim == 2) os << ',' << format_double(z[1]);
        os << ',' << format_double(entry.value.real()) << ',' << format_double(entry.value.imag())
           << ',' << format_double(std::hypot(entry.sem.real(), entry.sem.imag())) << "\n";
    }
}

autocorr::AutocorrelationTable read_table_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# autocorr", 0) != 0)
        throw std::runtime_error("table csv: missing header");
    autocorr::AutocorrelationTable table;
    int dim = 1;
    {
        std::istringstream hs(header.substr(2));
        std::string tok;
        while (hs >> tok) {
            if (tok.rfind("kind=", 0) == 0) table.kind = table_kind_from(tok.substr(5));
            else if (tok.rfind("dim=", 0) == 0) dim = std::stoi(tok.substr(4));
            else if (tok.rfind("radius=", 0) == 0) table.patch_radius = parse_double(tok.substr(7));
            else if (tok.rfind("samples=", 0) == 0) table.sample_count = std::stoul(tok.substr(8));
            else if (tok.rfind("cutoff=", 0) == 0) table.cutoff = parse_double(tok.substr(7));
        }
    }
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto cols = split(line, ',');
        if (static_cast<int>(cols.size()) != dim + 3) throw std::runtime_error("table csv: bad row");
        Vec z;
        z.dim = dim;
        for (int i = 0; i < dim; ++i) z[i] = parse_double(cols[static_cast<std::size_t>(i)]);
        autocorr::TableEntry entry;
        entry.value = Complex(parse_double(cols[static_cast<std::size_t>(dim)]),
                              parse_double(cols[static_cast<std::size_t>(dim) + 1]));
        entry.sem = Complex(parse_double(cols[static_cast<std::size_t>(dim) + 2]), 0.0);
        table.entries[QKey(z)] = entry;
    }
    return table;
}

void write_spectrum_csv(std::ostream& os, const diffraction::DiffractionSpectrum& spectrum) {
    const auto& g = spectrum.grid;
    os << "# spectrum kind=" << (spectrum.kind == diffraction::SpectrumKind::predicted ? "predicted" : "empirical")
       << " dim=" << g.dim << " radius=" << format_double(spectrum.patch_radius)
       << " samples=" << spectrum.sample_count << " spacing=" << format_double(g.spacing)
       << " lo0=" << g.lo[0] << " count0=" << g.count[0];
    if (g.dim == 2) os << " lo1=" << g.lo[1] << " count1=" << g.count[1];
    os << " threshold=" << format_double(spectrum.peak_threshold)
       << " halfwidth=" << format_double(spectrum.peak_halfwidth) << "\n";
    os << "[peaks]\n";
    for (const auto& p : spectrum.peaks) {
        os << format_double(p.position[0]);
        if (g.dim == 2) os << ',' << format_double(p.position[1]);
        os << ',' << format_double(p.weight) << "\n";
    }
    os << "[density]\n";
    const bool with_sem = !spectrum.density_sem.empty();
    for (std::size_t i = 0; i < spectrum.density.size(); ++i) {
        const Vec k = g.at(i);
        os << format_double(k[0]);
        if (g.dim == 2) os << ',' << format_double(k[1]);
        os << ',' << format_double(spectrum.density[i]);
        if (with_sem) os << ',' << format_double(spectrum.density_sem[i]);
        os << "\n";
    }
}

diffraction::DiffractionSpectrum read_spectrum_csv(std::istream& is) {
    std::string header;
    if (!std::getline(is, header) || header.rfind("# spectrum", 0) != 0)
        throw std::runtime_error("spectrum csv: missing header");
    diffraction::DiffractionSpectrum spec;
    auto& g = spec.grid;
    {
        std::istringstream hs(header.substr(2));
        std::string tok;
        while (hs >> tok) {
            if (tok.rfind("kind=", 0) == 0)
                spec.kind = tok.substr(5) == "predicted" ? diffraction::SpectrumKind::predicted
                                                         : diffraction::SpectrumKind::empirical;
            else if (tok.rfind("dim=", 0) == 0) g.dim = std::stoi(tok.substr(4));
            else if (tok.rfind("radius=", 0) == 0) spec.patch_radius = parse_double(tok.substr(7));
            else if (tok.rfind("samples=", 0) == 0) spec.sample_count = std::stoul(tok.substr(8));
            else if (tok.rfind("spacing=", 0) == 0) g.spacing = parse_double(tok.substr(8));
            else if (tok.rfind("lo0=", 0) == 0) g.lo[0] = std::stoll(tok.substr(4));
            else if (tok.rfind("count0=", 0) == 0) g.count[0] = std::stoul(tok.substr(7));
            else if (tok.rfind("lo1=", 0) == 0) g.lo[1] = std::stoll(tok.substr(4));
            else if (tok.rfind("count1=", 0) == 0) g.count[1] = std::stoul(tok.substr(7));
            else if (tok.rfind("threshold=", 0) == 0) spec.peak_threshold = parse_double(tok.substr(10));
            else if (tok.rfind("halfwidth=", 0) == 0) spec.peak_halfwidth = parse_double(tok.substr(10));
        }
    }
    std::string line;
    enum { none, peaks, density } section = none;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        if (line == "[peaks]") {
            section = peaks;
            continue;
        }
        if (line == "[density]") {
            section = density;
            continue;
        }
        const auto cols = split(line, ',');
        if (section == peaks) {
            diffraction::Peak p;
            p.position.dim = g.dim;
            for (int i = 0; i < g.dim; ++i) p.position[i] = parse_double(cols[static_cast<std::size_t>(i)]);
            p.weight = parse_double(cols[static_cast<std::size_t>(g.dim)]);
            spec.peaks.push_back(p);
        } else if (section == density) {
            spec.density.push_back(parse_double(cols[static_cast<std::size_t>(g.dim)]));
            if (static_cast<int>(cols.size()) > g.dim + 1)
                spec.density_sem.push_back(parse_double(cols[static_cast<std::size_t>(g.dim) + 1]));
        } else {
            throw std::runtime_error("spectrum csv: data before section marker");
        }
    }
    if (spec.density.size() != spec.grid.size()) throw std::runtime_error("spectrum csv: density size mismatch");
    return spec;
}

void write_key_values(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [k, v] : kv) os << k << '=' << v << "\n";
}

std::map<std::string, std::string> read_key_values(std::istream& is) {
    std::map<std::string, std::string> out;
    std::string line;
    while (std::getline(is, line)) {
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw std::runtime_error("expected key=value, got: " + line);
        out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> dobrushin_key_values(const gibbs::DobrushinReport& r) {
    return {
        {"criterion_value", format_double(r.criterion_value)},
        {"alpha_bound", format_double(r.alpha_bound)},
        {"satisfied", r.satisfied ? "true" : "false"},
        {"covariance_sum_bound", format_double(r.covariance_sum_bound)},
        {"truncation_radius", format_double(r.truncation_radius)},
        {"truncation_error_bound", format_double(r.truncation_error_bound)},
    };
}

gibbs::DobrushinReport dobrushin_from_key_values(const std::map<std::string, std::string>& kv) {
    gibbs::DobrushinReport r;
    r.criterion_value = parse_double(kv.at("criterion_value"));
    r.alpha_bound = parse_double(kv.at("alpha_bound"));
    r.satisfied = kv.at("satisfied") == "true";
    r.covariance_sum_bound = parse_double(kv.at("covariance_sum_bound"));
    r.truncation_radius = parse_double(kv.at("truncation_radius"));
    r.truncation_error_bound = parse_double(kv.at("truncation_error_bound"));
    return r;
}

std::vector<std::pair<std::string, std::string>> classification_key_values(
    const diffraction::ClassificationReport& r) {
    std::vector<std::pair<std::string, std::string>> kv = {
        {"matched_count", std::to_string(r.matched.size())},
        {"missed_count", std::to_string(r.missed_predicted.size())},
        {"extra_count", std::to_string(r.extra_empirical.size())},
        {"residual_sup", format_double(r.residual_sup)},
        {"residual_l1", format_double(r.residual_l1)},
        {"predicted_l1", format_double(r.predicted_l1)},
        {"residual_rel_l1", format_double(r.residual_rel_l1)},
        {"off_peak_cells", std::to_string(r.off_peak_cells)},
        {"smoothing_bandwidth", format_double(r.smoothing_bandwidth)},
    };
    for (std::size_t i = 0; i < r.matched.size(); ++i) {
        const auto& m = r.matched[i];
        const std::string p = "match." + std::to_string(i);
        std::string pos = format_double(m.predicted_position[0]);
        if (m.predicted_position.dim == 2) pos += ":" + format_double(m.predicted_position[1]);
        kv.emplace_back(p + ".k", pos);
        kv.emplace_back(p + ".predicted_weight", format_double(m.predicted_weight));
        kv.emplace_back(p + ".empirical_weight", format_double(m.empirical_weight));
        kv.emplace_back(p + ".relative_error", format_double(m.relative_error));
    }
    return kv;
}

std::string read_text_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << content;
    if (!f) throw std::runtime_error("failed writing " + path);
}

bool file_exists(const std::string& path) { return std::filesystem::exists(path); }

}  // namespace dlab::io
