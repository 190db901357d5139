#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

#include "borfem/types.hpp"

namespace borfem {

struct ColeColeTerm {
  double delta_eps = 0.0;  // dispersion magnitude
  double tau = 1.0;        // relaxation time, s
  double alpha = 0.0;      // broadening, 0 <= alpha < 1
};

/// eps(w) = eps_inf + sum_i d_i / (1 + (j w tau_i)^(1 - alpha_i)) - j sigma / (w eps0)
struct ColeColeParams {
  double eps_inf = 1.0;
  std::vector<ColeColeTerm> terms;  // up to 4
  double sigma = 0.0;               // static ionic conductivity, S/m

  void validate() const;
};

/// Tissue described either by a dispersion model or a fixed complex value
/// (engineering convention eps' - j eps'', eps'' >= 0).
class Material {
 public:
  Material() : model_(cplx(1.0, 0.0)) {}
  explicit Material(ColeColeParams p);
  explicit Material(cplx eps_r);

  static Material vacuum() { return Material(cplx(1.0, 0.0)); }

  bool is_dispersive() const { return std::holds_alternative<ColeColeParams>(model_); }
  const std::variant<ColeColeParams, cplx>& model() const { return model_; }

 private:
  std::variant<ColeColeParams, cplx> model_;
};

cplx permittivity(const ColeColeParams& p, double freq);
cplx permittivity(const Material& mat, double freq);

/// Named tissue table loaded from JSON:
///   { "muscle": { "eps_inf": 4, "sigma": 0.2,
///                 "terms": [ {"delta_eps": 50, "tau": 7.234e-12, "alpha": 0.1}, ... ] } }
std::map<std::string, ColeColeParams> load_tissues(const std::string& path);
ColeColeParams tissue(const std::string& path, const std::string& name);

/// Location of the tissue file shipped with the sources.
std::string default_tissue_file();

}  // namespace borfem
