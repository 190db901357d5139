#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "borfem/exterior.hpp"

namespace borfem::cases {

struct Metric {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;  // pass when value <= tolerance
  bool pass() const { return value <= tolerance; }
};

struct Report {
  std::string name;
  std::vector<Metric> metrics;
  std::vector<std::string> notes;
  double seconds = 0.0;
  bool pass() const;
};

void write_report(std::ostream& os, const Report& r);

/// Overrides shared by the validation cases; unset fields keep each case's own setting.
struct Options {
  std::optional<double> freq;
  std::optional<int> M;
  std::optional<cplx> gamma;
  std::optional<double> mesh_h;  // air element size in wavelengths
  int threads = 1;
};

/// eps_r = 1 body on the cylinder mesh: scattered DOFs against the unit-contrast scale.
Report zero_contrast(const Options& opt);

/// Free-space dielectric sphere against the Mie series; the FEM far-field cut
/// (both halves of phi = 0) goes to `pattern` when given.
Report mie_sphere(const Options& opt, FarFieldPattern* pattern = nullptr);

/// Muscle cylinder on a ground plane: total-field directivity on the phi = 0 cut,
/// horizon null of E_phi and exterior-field agreement with an enlarged FEM domain.
Report cylinder_ground(const Options& opt, FarFieldPattern* pattern = nullptr, bool consistency = true);

/// Exterior-field check alone: probe ring 2.5 wavelengths outside S_eq.
Metric equivalent_source_consistency(const Options& opt, double* seconds = nullptr);

}  // namespace borfem::cases
