#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace bitplan {

// Ordered keys keep every artifact byte-stable across runs.
using Json = nlohmann::ordered_json;

Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace bitplan
