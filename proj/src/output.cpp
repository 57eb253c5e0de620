#include "topopt/output.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace topopt {

namespace {

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_size(int nx, int ny, const Eigen::VectorXd& rho) {
  if (nx < 1 || ny < 1 || rho.size() != static_cast<Eigen::Index>(nx) * ny) {
    throw std::invalid_argument("density field does not match an nx x ny grid");
  }
}

}  // namespace

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open '" + path + "' for writing");
  }
  out << content;
  out.close();
  if (!out) {
    throw IoError("failed to write '" + path + "'");
  }
}

std::string pgm_text(int nx, int ny, const Eigen::VectorXd& rho) {
  check_size(nx, ny, rho);
  std::ostringstream s;
  s << "P2\n" << nx << ' ' << ny << "\n255\n";
  for (int j = ny - 1; j >= 0; --j) {
    for (int i = 0; i < nx; ++i) {
      const double r = std::clamp(rho[static_cast<Eigen::Index>(i) * ny + j], 0.0, 1.0);
      s << (i > 0 ? " " : "") << static_cast<int>(std::lround(255.0 * (1.0 - r)));
    }
    s << '\n';
  }
  return s.str();
}

void write_pgm(const std::string& path, int nx, int ny, const Eigen::VectorXd& rho) {
  write_text(path, pgm_text(nx, ny, rho));
}

std::string density_csv_text(int nx, int ny, const Eigen::VectorXd& rho) {
  check_size(nx, ny, rho);
  std::string s;
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      if (i > 0) s += ',';
      s += format_number(rho[static_cast<Eigen::Index>(i) * ny + j]);
    }
    s += '\n';
  }
  return s;
}

void write_density_csv(const std::string& path, int nx, int ny, const Eigen::VectorXd& rho) {
  write_text(path, density_csv_text(nx, ny, rho));
}

void write_iterations_csv(const std::string& path, const std::vector<IterationRecord>& history) {
  std::string s = "n,tau,backtracks,J,R,V,Jtilde,E1,E2\n";
  for (const IterationRecord& r : history) {
    s += std::to_string(r.n) + ',' + format_number(r.tau) + ',' + std::to_string(r.backtracks) +
         ',' + format_number(r.J) + ',' + format_number(r.R) + ',' + format_number(r.V) + ',' +
         format_number(r.Jtilde) + ',' + format_number(r.E1) + ',' + format_number(r.E2) + '\n';
  }
  write_text(path, s);
}

Eigen::VectorXd read_density_csv(const std::string& path, int& nx, int& ny) {
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read '" + path + "'");
  }
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) {
      row.push_back(std::stod(cell));
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw IoError("ragged rows in '" + path + "'");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    throw IoError("no data in '" + path + "'");
  }
  ny = static_cast<int>(rows.size());
  nx = static_cast<int>(rows.front().size());
  Eigen::VectorXd rho(static_cast<Eigen::Index>(nx) * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      rho[static_cast<Eigen::Index>(i) * ny + j] = rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)];
    }
  }
  return rho;
}

}  // namespace topopt
