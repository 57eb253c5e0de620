#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "topopt/optim.hpp"

namespace topopt {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// ASCII PGM (P2), nx columns by ny rows, top row first; pixel value
/// round(255 (1 - rho_e)) so solid material is black.
void write_pgm(const std::string& path, int nx, int ny, const Eigen::VectorXd& element_density);
std::string pgm_text(int nx, int ny, const Eigen::VectorXd& element_density);

/// Elemental densities, one line per element row from the bottom up, nx values each.
void write_density_csv(const std::string& path, int nx, int ny,
                       const Eigen::VectorXd& element_density);
std::string density_csv_text(int nx, int ny, const Eigen::VectorXd& element_density);

/// Columns n, tau, backtracks, J, R, V, Jtilde, E1, E2.
void write_iterations_csv(const std::string& path, const std::vector<IterationRecord>& history);

void write_text(const std::string& path, const std::string& content);

/// Reads a density.csv back into an element vector (element (i, j) at i*ny + j).
Eigen::VectorXd read_density_csv(const std::string& path, int& nx, int& ny);

}  // namespace topopt
