#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>

namespace mmsi {

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& value);

}  // namespace mmsi
