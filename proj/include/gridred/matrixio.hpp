#ifndef GRIDRED_MATRIXIO_HPP
#define GRIDRED_MATRIXIO_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "gridred/types.hpp"

namespace gridred {

/// Sectioned plain-text container for numeric artifacts. Lines starting with
/// '#' are free comments; '#@ key value...' lines carry string metadata.
/// Sections are 'matrix NAME ROWS COLS' followed by row-major values and
/// 'vector NAME N' followed by values.
struct TextDocument {
  std::map<std::string, std::string> meta;
  std::map<std::string, MatrixXd> matrices;
  std::map<std::string, VectorXd> vectors;

  const MatrixXd& matrix(const std::string& name) const;
  const VectorXd& vector(const std::string& name) const;
  std::string meta_at(const std::string& key) const;
  double meta_num(const std::string& key) const;
};

void write_document(std::ostream& out, const TextDocument& doc,
                    const std::vector<std::string>& comment_lines = {});
void save_document(const std::string& path, const TextDocument& doc,
                   const std::vector<std::string>& comment_lines = {});

TextDocument read_document(std::istream& in, const std::string& origin);
TextDocument load_document(const std::string& path);

}  // namespace gridred

#endif  // GRIDRED_MATRIXIO_HPP
