#pragma once

#include <filesystem>
#include <string>

#include <nlohmann/json.hpp>

#include "sfda/core/image.hpp"

namespace sfda {

using json = nlohmann::json;

// Binary PPM (P6) / PGM (P5). Images quantize to 8 bit on write; labels are
// stored verbatim (UNKNOWN = num_classes fits easily in a byte).
void write_ppm(const std::filesystem::path& path, const Image& img);
Image read_ppm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const SegMap& map);
SegMap read_pgm(const std::filesystem::path& path);

json load_json_file(const std::filesystem::path& path);
void save_json_file(const std::filesystem::path& path, const json& j);

// Throws ConfigError listing any key of `j` that is not in `allowed`.
void reject_unknown_fields(const json& j, const std::vector<std::string>& allowed,
                           const std::string& context);

}  // namespace sfda
