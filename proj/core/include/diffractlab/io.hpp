#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "diffractlab/autocorr.hpp"
#include "diffractlab/diffraction.hpp"
#include "diffractlab/gibbs.hpp"
#include "diffractlab/pointset.hpp"

namespace dlab::io {

// All CSV output: '.' decimal separator, comma delimiter, LF line endings.

std::string format_double(double v);  // %.17g, round-trips exactly
std::string format_sig12(double v);   // %.12g, patch coordinates

std::uint64_t fnv1a64(std::string_view data);

// one point per line; the header line records dim, radius and generator
void write_patch_csv(std::ostream& os, const pointset::PointSetPatch& patch);
pointset::PointSetPatch read_patch_csv(std::istream& is);

// one row per sample, 1-based species indices
void write_samples_csv(std::ostream& os, std::span<const gibbs::Configuration> samples);
std::vector<gibbs::Configuration> read_samples_csv(std::istream& is);

// z components, real part, imaginary part, standard error
void write_table_csv(std::ostream& os, const autocorr::AutocorrelationTable& table, int dim);
autocorr::AutocorrelationTable read_table_csv(std::istream& is);

// [peaks] section then [density] section
void write_spectrum_csv(std::ostream& os, const diffraction::DiffractionSpectrum& spectrum);
diffraction::DiffractionSpectrum read_spectrum_csv(std::istream& is);

void write_key_values(std::ostream& os, const std::vector<std::pair<std::string, std::string>>& kv);
std::map<std::string, std::string> read_key_values(std::istream& is);

std::vector<std::pair<std::string, std::string>> dobrushin_key_values(const gibbs::DobrushinReport& report);
gibbs::DobrushinReport dobrushin_from_key_values(const std::map<std::string, std::string>& kv);

std::vector<std::pair<std::string, std::string>> classification_key_values(
    const diffraction::ClassificationReport& report);

// file helpers; throw std::runtime_error naming the path on failure
std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
bool file_exists(const std::string& path);

}  // namespace dlab::io
