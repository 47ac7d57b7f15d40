#include "torsion/sector.hpp"

#include <cmath>

#include "core/errors.hpp"
#include "geom/spherical_mesh.hpp"

namespace conekit::torsion {

double sector_torsion_exact(double x_norm, double R, int dim) {
  if (!(R > 0.0)) throw ConfigError("sector radius must be positive");
  if (x_norm < 0.0 || x_norm > R * (1.0 + 1e-14))
    throw ConfigError("point outside the sector radius");
  return (R * R - x_norm * x_norm) / (2.0 * dim);
}

double sector_flux(double R, int dim) { return -R / dim; }

double sector_energy(double R, double d_area, int dim) {
  if (!(R > 0.0 && d_area > 0.0)) throw ConfigError("positive inputs required");
  return -std::pow(R, dim + 2) * d_area / (2.0 * dim * dim * (dim + 2));
}

double sector_radius_for_volume(double c, double d_area, int dim) {
  if (!(c > 0.0 && d_area > 0.0)) throw ConfigError("positive inputs required");
  return std::pow(dim * c / d_area, 1.0 / dim);
}

double fixed_volume_sector_energy(double c, double d_area, int dim) {
  return sector_energy(sector_radius_for_volume(c, d_area, dim), d_area, dim);
}

double halfspace_energy(double c, int dim) {
  if (!(c > 0.0)) throw ConfigError("volume must be positive");
  const double omega = geom::unit_ball_volume(dim);
  return -omega / (4.0 * dim * (dim + 2)) *
         std::pow(2.0 * c / omega, (dim + 2.0) / dim);
}

double halfspace_energy_printed(double c, int dim) {
  if (!(c > 0.0)) throw ConfigError("volume must be positive");
  const double omega = geom::unit_ball_volume(dim);
  return -omega / (4.0 * dim * (dim + 2)) *
         std::pow(2.0 * c / (dim * omega), (dim + 2.0) / dim);
}

double minimizer_flux_constant(double o1, int dim) {
  if (!(o1 < 0.0)) throw ConfigError("energy at volume one must be negative");
  return std::sqrt(2.0 * (dim + 2) * (-o1) / dim);
}

}  // namespace conekit::torsion
