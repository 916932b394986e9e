// Stress one block of a small Student-t model and print what happens to the other.

#include <iostream>

#include "ellrisk/ellrisk.hpp"

int main() {
  using namespace ellrisk;

  // Two "banks" (0, 1) and three "insurers" (2, 3, 4), daily log-returns.
  Matrix corr(5, 5);
  corr << 1.0, 0.7, 0.4, 0.3, 0.3,
          0.7, 1.0, 0.4, 0.3, 0.3,
          0.4, 0.4, 1.0, 0.6, 0.5,
          0.3, 0.3, 0.6, 1.0, 0.5,
          0.3, 0.3, 0.5, 0.5, 1.0;
  const Vector vol = (Vector(5) << 0.02, 0.018, 0.012, 0.011, 0.013).finished();
  const double nu = 6.0;
  const Matrix cov = vol.asDiagonal() * corr * vol.asDiagonal();
  const EllipticalModel model(Vector::Zero(5), (nu - 2.0) / nu * cov, DistributionKind::student_t(nu),
                              {"BANK1", "BANK2", "INS1", "INS2", "INS3"});

  const IndexList banks = {0, 1};
  const IndexList insurers = {2, 3, 4};
  const StressReport report = stress_pair(model, banks, insurers, StressPolicy::parametric(0.95));

  std::cout << "stress losses on banks: " << report.scenario.losses.transpose() << "\n";
  std::cout << "d2x = " << report.d2x << "\n";
  std::cout << "centroid shift on insurers: " << report.shift.transpose() << "\n";
  for (const auto& [name, value] : report.values) std::cout << name << " = " << value << "\n";
  for (const auto& [name, msg] : report.errors) std::cout << name << " failed: " << msg << "\n";
}
