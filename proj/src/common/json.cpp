#include "bitplan/common/json.hpp"

#include <fstream>
#include <sstream>

#include "bitplan/common/error.hpp"

namespace bitplan {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("E_FILE_NOT_FOUND", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("E_WRITE", "cannot write " + path.string());
  out << text;
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_JSON", path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace bitplan
