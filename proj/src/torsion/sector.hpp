#pragma once

namespace conekit::torsion {

// u(x) = (R^2 - |x|^2) / (2N) on the spherical sector of radius R.
double sector_torsion_exact(double x_norm, double R, int dim);

// Constant normal derivative of the sector torsion function on its
// spherical boundary: -R/N.
double sector_flux(double R, int dim);

// E(Omega_{D,R}) = -R^{N+2} H_{N-1}(D) / (2 N^2 (N+2)).
double sector_energy(double R, double d_area, int dim);

// Radius with |Omega_{D,R}| = c, from |Omega| = R^N H_{N-1}(D) / N.
double sector_radius_for_volume(double c, double d_area, int dim);

// sector_energy at the volume-c radius.
double fixed_volume_sector_energy(double c, double d_area, int dim);

// Optimal torsional energy of the half-space at volume c (half-ball value);
// identical to fixed_volume_sector_energy(c, hemisphere_measure(N), N).
double halfspace_energy(double c, int dim);

// The same quantity as it appears in print, kept for report transparency;
// it disagrees with the sector formula chain (see README notes).
double halfspace_energy_printed(double c, int dim);

// Constant flux modulus on a volume-1 minimizer: sqrt(2 (N+2) |O1| / N).
double minimizer_flux_constant(double o1, int dim);

}  // namespace conekit::torsion
