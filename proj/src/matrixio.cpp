#include "gridred/matrixio.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace gridred {

const MatrixXd& TextDocument::matrix(const std::string& name) const {
  const auto it = matrices.find(name);
  if (it == matrices.end()) throw ConfigError("document has no matrix '" + name + "'");
  return it->second;
}

const VectorXd& TextDocument::vector(const std::string& name) const {
  const auto it = vectors.find(name);
  if (it == vectors.end()) throw ConfigError("document has no vector '" + name + "'");
  return it->second;
}

std::string TextDocument::meta_at(const std::string& key) const {
  const auto it = meta.find(key);
  if (it == meta.end()) throw ConfigError("document has no metadata key '" + key + "'");
  return it->second;
}

double TextDocument::meta_num(const std::string& key) const {
  const std::string v = meta_at(key);
  try {
    return std::stod(v);
  } catch (const std::exception&) {
    throw ConfigError("metadata key '" + key + "' is not numeric: '" + v + "'");
  }
}

void write_document(std::ostream& out, const TextDocument& doc,
                    const std::vector<std::string>& comment_lines) {
  out << std::setprecision(17);
  for (const auto& c : comment_lines) out << "# " << c << "\n";
  for (const auto& [k, v] : doc.meta) out << "#@ " << k << " " << v << "\n";
  for (const auto& [name, vec] : doc.vectors) {
    out << "vector " << name << " " << vec.size() << "\n";
    for (int i = 0; i < vec.size(); ++i) out << (i ? " " : "") << vec(i);
    out << "\n";
  }
  for (const auto& [name, m] : doc.matrices) {
    out << "matrix " << name << " " << m.rows() << " " << m.cols() << "\n";
    for (int i = 0; i < m.rows(); ++i) {
      for (int j = 0; j < m.cols(); ++j) out << (j ? " " : "") << m(i, j);
      out << "\n";
    }
  }
}

void save_document(const std::string& path, const TextDocument& doc,
                   const std::vector<std::string>& comment_lines) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  write_document(out, doc, comment_lines);
}

TextDocument read_document(std::istream& in, const std::string& origin) {
  TextDocument doc;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + msg);
  };
  auto next_values = [&](int count, double* dest) {
    int got = 0;
    while (got < count) {
      if (!std::getline(in, line)) fail("unexpected end of file in numeric block");
      ++line_no;
      std::istringstream ss(line);
      double v;
      while (ss >> v) {
        if (got >= count) fail("too many values in numeric block");
        dest[got++] = v;
      }
    }
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.size() > 1 && line[1] == '@') {
        std::istringstream ss(line.substr(2));
        std::string key;
        ss >> key;
        std::string rest;
        std::getline(ss, rest);
        const auto pos = rest.find_first_not_of(' ');
        doc.meta[key] = (pos == std::string::npos) ? "" : rest.substr(pos);
      }
      continue;
    }
    std::istringstream ss(line);
    std::string kind, name;
    ss >> kind >> name;
    if (kind == "matrix") {
      int r, c;
      if (!(ss >> r >> c) || r < 0 || c < 0) fail("bad matrix header");
      MatrixXd m(r, c);
      next_values(r * c, m.data());
      // values were read row-major; Eigen default storage is column-major
      MatrixXd mm(r, c);
      int k = 0;
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) mm(i, j) = m.data()[k++];
      doc.matrices[name] = mm;
    } else if (kind == "vector") {
      int n;
      if (!(ss >> n) || n < 0) fail("bad vector header");
      VectorXd v(n);
      next_values(n, v.data());
      doc.vectors[name] = v;
    } else {
      fail("unknown section '" + kind + "'");
    }
  }
  return doc;
}

TextDocument load_document(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read_document(in, path);
}

}  // namespace gridred
