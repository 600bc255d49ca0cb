#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "devlm/tensor.hpp"

namespace devlm::io {

/// Parses a JSON file; failures become ParseError carrying the path and the
/// parser's byte position.
nlohmann::json read_json(const std::filesystem::path& path);

/// Writes `doc` with two-space indentation and a trailing newline.
void write_json(const nlohmann::json& doc, const std::filesystem::path& path);

void write_text(const std::string& text, const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);

Vector vector_from_json(const nlohmann::json& j, const std::string& where);
Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json to_json(const Matrix& m);

}  // namespace devlm::io
