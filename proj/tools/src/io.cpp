#include "bhpm/cli/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "bhpm/errors.hpp"

namespace bhpm::cli {

using nlohmann::json;

namespace {

const std::set<std::string> kProblemKeys = {"n", "m",  "A", "B",  "N", "Q",
                                            "Qf", "R", "x0", "t0", "tf"};

std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

double number_at(const json& v, const std::string& key) {
  if (!v.is_number()) throw ProblemError(key, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ProblemError(key, "non-finite number");
  return d;
}

int positive_int(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ProblemError(key, "missing required key");
  const json& v = doc.at(key);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ProblemError(key, "expected a positive integer");
  }
  return static_cast<int>(v.get<long long>());
}

Matrix matrix_at(const json& v, const std::string& key, int rows, int cols) {
  // A bare number is accepted for 1x1 matrices.
  if (v.is_number() && rows == 1 && cols == 1) {
    Matrix M(1, 1);
    M(0, 0) = number_at(v, key);
    return M;
  }
  if (!v.is_array() || static_cast<int>(v.size()) != rows) {
    throw ProblemError(key, "expected " + std::to_string(rows) + " rows of " +
                                std::to_string(cols) + " numbers");
  }
  Matrix M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    const json& row = v[static_cast<std::size_t>(i)];
    const std::string rkey = key + "[" + std::to_string(i) + "]";
    if (!row.is_array() || static_cast<int>(row.size()) != cols) {
      throw ProblemError(rkey, "expected a row of " + std::to_string(cols) + " numbers");
    }
    for (int j = 0; j < cols; ++j) {
      M(i, j) = number_at(row[static_cast<std::size_t>(j)], rkey + "[" + std::to_string(j) + "]");
    }
  }
  return M;
}

Vector vector_at(const json& v, const std::string& key, int size) {
  if (!v.is_array() || static_cast<int>(v.size()) != size) {
    throw ProblemError(key, "expected an array of " + std::to_string(size) + " numbers");
  }
  Vector x(size);
  for (int i = 0; i < size; ++i) {
    x(i) = number_at(v[static_cast<std::size_t>(i)], key + "[" + std::to_string(i) + "]");
  }
  return x;
}

const json& required(const json& doc, const std::string& key) {
  if (!doc.contains(key)) throw ProblemError(key, "missing required key");
  return doc.at(key);
}

nlohmann::ordered_json matrix_to_json(const Matrix& M) {
  auto rows = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    auto row = nlohmann::ordered_json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

BilinearProblem parse_problem(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ProblemError(line_column(text, e.byte), "malformed JSON");
  }
  if (!doc.is_object()) throw ProblemError("<root>", "expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (!kProblemKeys.count(key)) throw ProblemError(key, "unknown key");
  }

  const int n = positive_int(doc, "n");
  const int m = positive_int(doc, "m");

  ProblemData d;
  d.A = matrix_at(required(doc, "A"), "A", n, n);
  d.B = matrix_at(required(doc, "B"), "B", n, m);
  const json& N = required(doc, "N");
  if (!N.is_array() || static_cast<int>(N.size()) != n) {
    throw ProblemError("N", "expected an array of " + std::to_string(n) + " matrices");
  }
  for (int j = 0; j < n; ++j) {
    d.N.push_back(matrix_at(N[static_cast<std::size_t>(j)], "N[" + std::to_string(j) + "]", n, m));
  }
  d.Q = matrix_at(required(doc, "Q"), "Q", n, n);
  d.Qf = matrix_at(required(doc, "Qf"), "Qf", n, n);
  d.R = matrix_at(required(doc, "R"), "R", m, m);
  d.x0 = vector_at(required(doc, "x0"), "x0", n);
  d.t0 = number_at(required(doc, "t0"), "t0");
  d.tf = number_at(required(doc, "tf"), "tf");
  return BilinearProblem(std::move(d));
}

BilinearProblem read_problem_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open problem file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_problem(ss.str());
}

nlohmann::ordered_json problem_to_json(const BilinearProblem& p) {
  nlohmann::ordered_json doc;
  doc["n"] = p.n();
  doc["m"] = p.m();
  doc["A"] = matrix_to_json(p.A());
  doc["B"] = matrix_to_json(p.B());
  auto N = nlohmann::ordered_json::array();
  for (const auto& Nj : p.N()) N.push_back(matrix_to_json(Nj));
  doc["N"] = std::move(N);
  doc["Q"] = matrix_to_json(p.Q());
  doc["Qf"] = matrix_to_json(p.Qf());
  doc["R"] = matrix_to_json(p.R());
  doc["x0"] = std::vector<double>(p.x0().data(), p.x0().data() + p.x0().size());
  doc["t0"] = p.t0();
  doc["tf"] = p.tf();
  return doc;
}

void write_problem_file(const std::filesystem::path& path, const BilinearProblem& problem) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << problem_to_json(problem).dump(2) << '\n';
}

std::string format_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void write_trajectories_csv(std::ostream& os, const Trajectory& x, const Trajectory& lam,
                            const Trajectory& u) {
  if (!(x.grid() == lam.grid()) || !(x.grid() == u.grid())) {
    throw DimensionError("trajectories CSV: grids differ");
  }
  os << 't';
  for (Eigen::Index i = 0; i < x.dim(); ++i) os << ",x_" << i + 1;
  for (Eigen::Index i = 0; i < lam.dim(); ++i) os << ",lambda_" << i + 1;
  for (Eigen::Index i = 0; i < u.dim(); ++i) os << ",u_" << i + 1;
  os << '\n';
  for (std::size_t k = 0; k < x.size(); ++k) {
    os << format_number(x.grid().node(k));
    for (Eigen::Index i = 0; i < x.dim(); ++i) os << ',' << format_number(x.at(k)(i));
    for (Eigen::Index i = 0; i < lam.dim(); ++i) os << ',' << format_number(lam.at(k)(i));
    for (Eigen::Index i = 0; i < u.dim(); ++i) os << ',' << format_number(u.at(k)(i));
    os << '\n';
  }
}

void write_plot_csv(std::ostream& os, const Trajectory& x, const Trajectory& u) {
  os << 't';
  for (Eigen::Index i = 0; i < x.dim(); ++i) os << ",x_" << i + 1;
  for (Eigen::Index i = 0; i < u.dim(); ++i) os << ",u_" << i + 1;
  os << '\n';
  for (std::size_t k = 0; k < x.size(); ++k) {
    os << format_number(x.grid().node(k));
    for (Eigen::Index i = 0; i < x.dim(); ++i) os << ',' << format_number(x.at(k)(i));
    for (Eigen::Index i = 0; i < u.dim(); ++i) os << ',' << format_number(u.at(k)(i));
    os << '\n';
  }
}

TrajectorySet read_trajectories_csv(std::istream& is, const BilinearProblem& problem) {
  const int n = problem.n();
  const int m = problem.m();
  const std::size_t columns = 1 + 2 * static_cast<std::size_t>(n) + static_cast<std::size_t>(m);

  std::string line;
  if (!std::getline(is, line)) throw DimensionError("trajectories CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() != columns) {
    throw DimensionError("trajectories CSV has " + std::to_string(header.size()) +
                         " columns, problem needs " + std::to_string(columns));
  }

  std::vector<std::vector<double>> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != columns) {
      throw DimensionError("trajectories CSV line " + std::to_string(line_no) + " has " +
                           std::to_string(cells.size()) + " columns");
    }
    std::vector<double> row;
    row.reserve(columns);
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') {
        throw DimensionError("trajectories CSV line " + std::to_string(line_no) +
                             ": bad number '" + c + "'");
      }
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.size() < 3) throw DimensionError("trajectories CSV needs at least 3 rows");

  const TimeGrid grid(problem.t0(), problem.tf(), static_cast<int>(rows.size() - 1));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const double t = rows[k][0];
    if (std::abs(t - grid.node(k)) > 1e-12 * std::max(1.0, std::abs(t))) {
      throw DimensionError("trajectories CSV row " + std::to_string(k) + ": t = " +
                           format_number(t) + " is not on the uniform grid over [t0, tf]");
    }
  }

  TrajectorySet set{Trajectory(grid, n), Trajectory(grid, n), Trajectory(grid, m)};
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (int i = 0; i < n; ++i) set.x.at(k)(i) = rows[k][1 + static_cast<std::size_t>(i)];
    for (int i = 0; i < n; ++i) set.lam.at(k)(i) = rows[k][1 + static_cast<std::size_t>(n + i)];
    for (int i = 0; i < m; ++i) {
      set.u.at(k)(i) = rows[k][1 + 2 * static_cast<std::size_t>(n) + static_cast<std::size_t>(i)];
    }
  }
  return set;
}

}  // namespace bhpm::cli
