#include "devlm/json_io.hpp"

#include <fstream>
#include <sstream>

#include "devlm/errors.hpp"

namespace devlm::io {

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::string& text, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out.flush()) throw std::runtime_error("write failed for " + path.string());
}

nlohmann::json read_json(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path.string() + ": byte " + std::to_string(e.byte) + ": " + e.what());
  }
}

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  write_text(doc.dump(2) + "\n", path);
}

Vector vector_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
  Vector v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) {
      throw ParseError(where + "[" + std::to_string(i) + "]: expected a number");
    }
    v.push_back(j[i].get<double>());
  }
  return v;
}

Matrix matrix_from_json(const nlohmann::json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of arrays");
  std::vector<Vector> rows;
  for (std::size_t r = 0; r < j.size(); ++r) {
    rows.push_back(vector_from_json(j[r], where + "[" + std::to_string(r) + "]"));
  }
  if (!rows.empty()) {
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != rows[0].size()) {
        throw ParseError(where + "[" + std::to_string(r) + "]: ragged row (length " +
                         std::to_string(rows[r].size()) + ", expected " +
                         std::to_string(rows[0].size()) + ")");
      }
    }
  }
  return Matrix::from_rows(rows);
}

nlohmann::json to_json(const Matrix& m) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    out.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return out;
}

}  // namespace devlm::io
