#include "borfem/materials.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace borfem {

void ColeColeParams::validate() const {
  if (!(eps_inf >= 1.0)) throw ParameterError("eps_inf must be >= 1");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
  if (terms.size() > 4) throw ParameterError("at most 4 Cole-Cole terms are supported");
  for (const auto& t : terms) {
    if (!(t.delta_eps >= 0.0)) throw ParameterError("delta_eps must be >= 0");
    if (!(t.tau > 0.0)) throw ParameterError("tau must be > 0");
    if (!(t.alpha >= 0.0 && t.alpha < 1.0)) throw ParameterError("alpha must lie in [0, 1)");
  }
}

Material::Material(ColeColeParams p) : model_(std::move(p)) {
  std::get<ColeColeParams>(model_).validate();
}

Material::Material(cplx eps_r) : model_(eps_r) {
  if (eps_r.imag() > 0.0) throw ParameterError("passive medium requires Im(eps_r) <= 0");
}

cplx permittivity(const ColeColeParams& p, double freq) {
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  const double w = angular(freq);
  cplx eps = p.eps_inf;
  for (const auto& t : p.terms) eps += t.delta_eps / (1.0 + std::pow(kJ * (w * t.tau), 1.0 - t.alpha));
  eps -= kJ * p.sigma / (w * constants::eps0);
  return eps;
}

cplx permittivity(const Material& mat, double freq) {
  if (!(freq > 0.0)) throw ParameterError("frequency must be positive");
  if (const auto* p = std::get_if<ColeColeParams>(&mat.model())) return permittivity(*p, freq);
  return std::get<cplx>(mat.model());
}

std::map<std::string, ColeColeParams> load_tissues(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tissue file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("tissue file " + path + ": " + e.what());
  }
  std::map<std::string, ColeColeParams> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it->is_object() || it.key().starts_with("_")) continue;
    try {
      ColeColeParams p;
      p.eps_inf = it->at("eps_inf").get<double>();
      p.sigma = it->at("sigma").get<double>();
      for (const auto& t : it->at("terms"))
        p.terms.push_back({t.at("delta_eps").get<double>(), t.at("tau").get<double>(),
                           t.at("alpha").get<double>()});
      p.validate();
      out.emplace(it.key(), std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("tissue '" + it.key() + "': " + e.what());
    } catch (const ParameterError& e) {
      throw ConfigError("tissue '" + it.key() + "': " + e.what());
    }
  }
  return out;
}

ColeColeParams tissue(const std::string& path, const std::string& name) {
  const auto all = load_tissues(path);
  auto it = all.find(name);
  if (it == all.end()) throw ConfigError("tissue '" + name + "' not found in " + path);
  return it->second;
}

std::string default_tissue_file() { return std::string(BORFEM_DATA_DIR) + "/tissues.json"; }

}  // namespace borfem
