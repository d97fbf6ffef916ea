#include "dmlboot/csv.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace dmlboot {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    // Trim surrounding whitespace and a possible trailing carriage return.
    const auto b = field.find_first_not_of(" \t\r");
    const auto e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string()
                                         : field.substr(b, e - b + 1));
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::shared_ptr<const Dataset> load_dataset_csv(
    const std::string& path, const std::string& outcome,
    const std::optional<std::string>& treatment,
    std::vector<std::string> covariates) {
  std::ifstream in(path);
  if (!in) throw FileIoError("cannot open data file: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw InvalidSpecError("data file is empty: " + path);
  const std::vector<std::string> names = split_line(line);

  auto find_col = [&](const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end())
      throw InvalidSpecError("data file has no column named '" + name + "'");
    return static_cast<int>(it - names.begin());
  };

  ColumnSchema schema;
  schema.names = names;
  schema.outcome = find_col(outcome);
  if (treatment) schema.treatment = find_col(*treatment);
  if (covariates.empty()) {
    for (int c = 0; c < schema.width(); ++c)
      if (c != schema.outcome && c != schema.treatment)
        schema.covariates.push_back(c);
  } else {
    for (const auto& name : covariates) schema.covariates.push_back(find_col(name));
  }

  std::vector<std::vector<double>> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> fields = split_line(line);
    if (fields.size() != names.size()) {
      std::ostringstream msg;
      msg << path << ":" << lineno << ": expected " << names.size()
          << " fields, got " << fields.size();
      throw InvalidSpecError(msg.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      std::size_t used = 0;
      try {
        row[j] = std::stod(fields[j], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != fields[j].size() || fields[j].empty()) {
        std::ostringstream msg;
        msg << path << ":" << lineno << ": field '" << fields[j]
            << "' is not a number";
        throw InvalidSpecError(msg.str());
      }
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd mat(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < names.size(); ++j)
      mat(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows[i][j];
  return std::make_shared<Dataset>(std::move(mat), std::move(schema));
}

void write_dataset_csv(const Dataset& data, std::ostream& os) {
  const auto& names = data.schema().names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (j) os << ',';
    os << names[j];
  }
  os << '\n';
  char buf[48];
  for (int i = 0; i < data.n(); ++i) {
    for (int j = 0; j < data.width(); ++j) {
      if (j) os << ',';
      std::snprintf(buf, sizeof buf, "%.17g", data.rows()(i, j));
      os << buf;
    }
    os << '\n';
  }
}

}  // namespace dmlboot
