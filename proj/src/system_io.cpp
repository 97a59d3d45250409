#include "qomor/system_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qomor {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double x) {
  if (!std::isfinite(x)) throw ValidationError("cannot serialize a non-finite value");
  std::array<char, 32> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  if (ec != std::errc()) throw IoError("number formatting failed");
  return std::string(buf.data(), ptr);
}

double parse_double(std::string_view text, const std::string& field) {
  std::string_view t = text;
  if (!t.empty() && t.front() == '+') t.remove_prefix(1);
  double value = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), value);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw IoError(field + ": '" + std::string(text) + "' is not a decimal number");
  }
  if (!std::isfinite(value)) throw ValidationError(field + ": non-finite entry");
  return value;
}

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

json inline_matrix(const Matrix<double>& x) {
  json rows = json::array();
  for (Index i = 0; i < x.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < x.cols(); ++j) row.push_back(format_double(x(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json matrix_entry(const Matrix<double>& x, const std::string& key, const fs::path& manifest,
                  const WriteOptions& options) {
  if (x.rows() <= options.sidecar_threshold && x.cols() <= options.sidecar_threshold) {
    return inline_matrix(x);
  }
  const std::string file = manifest.stem().string() + "." + key + ".mtx";
  write_matrix_market(x, manifest.parent_path() / file);
  return json{{"file", file}};
}

double entry_value(const json& v, const std::string& field) {
  if (v.is_string()) return parse_double(v.get<std::string>(), field);
  if (v.is_number()) {
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ValidationError(field + ": non-finite entry");
    return x;
  }
  throw IoError(field + ": expected a decimal string");
}

Matrix<double> parse_matrix(const json& node, const std::string& field, const fs::path& base) {
  if (node.is_object()) {
    if (!node.contains("file") || !node["file"].is_string()) {
      throw IoError(field + ": expected an array of rows or {\"file\": ...}");
    }
    return read_matrix_market(base / node["file"].get<std::string>());
  }
  if (!node.is_array()) throw IoError(field + ": expected an array of rows");
  const auto rows = static_cast<Index>(node.size());
  Index cols = -1;
  Matrix<double> x;
  for (Index i = 0; i < rows; ++i) {
    const json& row = node[static_cast<std::size_t>(i)];
    const std::string row_field = field + "[" + std::to_string(i) + "]";
    if (!row.is_array()) throw IoError(row_field + ": expected an array");
    if (cols < 0) {
      cols = static_cast<Index>(row.size());
      x.resize(rows, cols);
    } else if (static_cast<Index>(row.size()) != cols) {
      throw ValidationError(row_field + ": has " + std::to_string(row.size()) + " entries, expected " +
                            std::to_string(cols));
    }
    for (Index j = 0; j < cols; ++j) {
      x(i, j) = entry_value(row[static_cast<std::size_t>(j)], row_field + "[" + std::to_string(j) + "]");
    }
  }
  if (rows == 0) x.resize(0, 0);
  return x;
}

Index manifest_count(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ValidationError("manifest field '" + key + "' is missing");
  const json& v = doc[key];
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ValidationError("manifest field '" + key + "' must be a nonnegative integer");
  }
  return static_cast<Index>(v.get<long long>());
}

const json& matrices_of(const json& doc, std::initializer_list<const char*> keys) {
  if (!doc.contains("matrices") || !doc["matrices"].is_object()) {
    throw ValidationError("manifest field 'matrices' is missing");
  }
  for (const char* key : keys) {
    if (!doc["matrices"].contains(key)) {
      throw ValidationError(std::string("manifest field 'matrices.") + key + "' is missing");
    }
  }
  return doc["matrices"];
}

void check_dim(Index got, Index want, const std::string& what, const std::string& field) {
  if (got != want) {
    throw ValidationError("manifest field '" + field + "' = " + std::to_string(want) + " does not match " +
                          what + " (" + std::to_string(got) + ")");
  }
}

LdqoSystem<double> system_from_json(const json& doc, const fs::path& base, const std::string& origin) {
  if (!doc.is_object()) throw IoError(origin + " is not a JSON object");
  if (doc.contains("kind") && doc["kind"] != "ldqo") {
    throw ValidationError("manifest field 'kind' must be \"ldqo\"");
  }
  const Index n = manifest_count(doc, "n");
  const Index m = manifest_count(doc, "m");
  const json& mats = matrices_of(doc, {"A", "B", "M"});
  Matrix<double> a = parse_matrix(mats["A"], "matrices.A", base);
  Matrix<double> b = parse_matrix(mats["B"], "matrices.B", base);
  Matrix<double> mm = parse_matrix(mats["M"], "matrices.M", base);
  check_dim(a.rows(), n, "rows of matrices.A", "n");
  check_dim(a.cols(), n, "columns of matrices.A", "n");
  check_dim(b.rows(), n, "rows of matrices.B", "n");
  check_dim(b.cols(), m, "columns of matrices.B", "m");
  check_dim(mm.rows(), n, "rows of matrices.M", "n");
  check_dim(mm.cols(), n, "columns of matrices.M", "n");
  return LdqoSystem<double>(std::move(a), std::move(b), mm);
}

}  // namespace

LdqoSystem<double> read_system(const fs::path& path) {
  return system_from_json(read_json(path), path.parent_path(), "'" + path.string() + "'");
}

LdqoSystem<double> parse_system(const std::string& text, const fs::path& base) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw IoError(std::string("malformed system JSON: ") + e.what());
  }
  return system_from_json(doc, base, "system manifest");
}

void write_system(const LdqoSystem<double>& sys, const fs::path& path, const std::string& name,
                  const WriteOptions& options) {
  json doc;
  doc["name"] = name;
  doc["kind"] = "ldqo";
  doc["n"] = sys.n();
  doc["m"] = sys.m();
  doc["matrices"]["A"] = matrix_entry(sys.A(), "A", path, options);
  doc["matrices"]["B"] = matrix_entry(sys.B(), "B", path, options);
  doc["matrices"]["M"] = matrix_entry(sys.M(), "M", path, options);
  write_text(path, doc.dump(2) + "\n");
}

void write_qb_system(const QbSystem<double>& sys, const fs::path& path, const std::string& name,
                     const WriteOptions& options) {
  json doc;
  doc["name"] = name;
  doc["kind"] = "qb";
  doc["n"] = sys.n();
  doc["m"] = sys.m();
  doc["p"] = sys.C.rows();
  doc["matrices"]["A"] = matrix_entry(sys.A, "A", path, options);
  doc["matrices"]["B"] = matrix_entry(sys.B, "B", path, options);
  doc["matrices"]["C"] = matrix_entry(sys.C, "C", path, options);
  doc["matrices"]["H"] = matrix_entry(sys.H, "H", path, options);
  for (std::size_t j = 0; j < sys.N.size(); ++j) {
    const std::string key = "N" + std::to_string(j);
    doc["matrices"][key] = matrix_entry(sys.N[j], key, path, options);
  }
  write_text(path, doc.dump(2) + "\n");
}

QbSystem<double> read_qb_system(const fs::path& path) {
  const json doc = read_json(path);
  if (!doc.is_object() || !doc.contains("kind") || doc["kind"] != "qb") {
    throw ValidationError("manifest field 'kind' must be \"qb\"");
  }
  const Index n = manifest_count(doc, "n");
  const Index m = manifest_count(doc, "m");
  const json& mats = matrices_of(doc, {"A", "B", "C", "H"});
  const fs::path base = path.parent_path();
  Matrix<double> a = parse_matrix(mats["A"], "matrices.A", base);
  check_dim(a.rows(), n, "rows of matrices.A", "n");
  std::vector<Matrix<double>> nq;
  for (Index j = 0; j < m; ++j) {
    const std::string key = "N" + std::to_string(j);
    if (!mats.contains(key)) throw ValidationError("manifest field 'matrices." + key + "' is missing");
    nq.push_back(parse_matrix(mats[key], "matrices." + key, base));
  }
  return QbSystem<double>(std::move(a), parse_matrix(mats["B"], "matrices.B", base),
                          parse_matrix(mats["C"], "matrices.C", base),
                          parse_matrix(mats["H"], "matrices.H", base), std::move(nq));
}

Matrix<double> read_matrix_market(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open Matrix Market file '" + path.string() + "'");
  const std::string where = "Matrix Market file '" + path.string() + "'";
  std::string line;
  if (!std::getline(in, line)) throw IoError(where + " is empty");
  std::istringstream header(line);
  std::string banner, object, format, field, symmetry;
  header >> banner >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
  };
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (banner != "%%MatrixMarket" || lower(object) != "matrix") throw IoError(where + ": missing header");
  if (format != "coordinate" && format != "array") throw IoError(where + ": unsupported format " + format);
  if (field != "real" && field != "integer" && field != "double") {
    throw IoError(where + ": unsupported field " + field);
  }
  if (symmetry != "general" && symmetry != "symmetric") {
    throw IoError(where + ": unsupported symmetry " + symmetry);
  }
  const bool symmetric = symmetry == "symmetric";
  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream size_line(line);
  long long rows = -1, cols = -1, nnz = -1;
  size_line >> rows >> cols;
  if (format == "coordinate") size_line >> nnz;
  if (size_line.fail() || rows < 0 || cols < 0 || (format == "coordinate" && nnz < 0)) {
    throw IoError(where + ": malformed size line");
  }
  if (symmetric && rows != cols) throw ValidationError(where + ": symmetric matrix must be square");
  Matrix<double> x = Matrix<double>::Zero(rows, cols);
  std::string token;
  auto next_value = [&](const std::string& what) {
    if (!(in >> token)) throw IoError(where + ": truncated data (" + what + ")");
    return parse_double(token, where + " " + what);
  };
  if (format == "coordinate") {
    for (long long k = 0; k < nnz; ++k) {
      long long i = 0, j = 0;
      if (!(in >> i >> j)) throw IoError(where + ": truncated data at entry " + std::to_string(k + 1));
      if (i < 1 || i > rows || j < 1 || j > cols) {
        throw ValidationError(where + ": entry " + std::to_string(k + 1) + " index out of range");
      }
      const double v = next_value("entry " + std::to_string(k + 1));
      x(i - 1, j - 1) = v;
      if (symmetric) x(j - 1, i - 1) = v;
    }
  } else {
    for (long long j = 0; j < cols; ++j) {
      for (long long i = symmetric ? j : 0; i < rows; ++i) {
        const double v = next_value("entry (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")");
        x(i, j) = v;
        if (symmetric) x(j, i) = v;
      }
    }
  }
  return x;
}

void write_matrix_market(const Matrix<double>& x, const fs::path& path) {
  std::string text = "%%MatrixMarket matrix array real general\n";
  text += std::to_string(x.rows()) + " " + std::to_string(x.cols()) + "\n";
  for (Index j = 0; j < x.cols(); ++j) {
    for (Index i = 0; i < x.rows(); ++i) {
      text += format_double(x(i, j));
      text += '\n';
    }
  }
  write_text(path, text);
}

}  // namespace qomor
