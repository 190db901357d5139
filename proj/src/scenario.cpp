#include "borfem/scenario.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

namespace borfem {

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("malformed ") + what + " value '" + s + "'");
  }
}

int parse_int(const std::string& s, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigError(std::string("malformed ") + what + " value '" + s + "'");
  }
}

// Body-frame coordinates of a room point: origin on the body axis, x towards the transmitter.
Vec3 to_body_frame(const Vec3& p, const Vec2& body, double phi_tx) {
  const double dx = p.x() - body.x(), dy = p.y() - body.y();
  const double c = std::cos(phi_tx), s = std::sin(phi_tx);
  return {c * dx + s * dy, -s * dx + c * dy, p.z()};
}

double db_from_dbm(double dbm) { return std::pow(10.0, dbm / 10.0); }

// Receiver inside the equivalent surface; only used between the simulator and the drivers.
constexpr unsigned kInsideSurface = 1u << 31;

// ---------------------------------------------------------------------------
// Config parsing

class KeyChecker {
 public:
  void object(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed,
              const std::set<std::string>& required = {}) {
    if (!j.is_object()) {
      problems_.push_back(where + ": expected an object");
      return;
    }
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!allowed.count(it.key())) problems_.push_back(where + "." + it.key() + ": unknown key");
    for (const auto& k : required)
      if (!j.contains(k)) problems_.push_back(where + "." + k + ": missing");
  }

  template <typename T>
  void read(const nlohmann::json& j, const std::string& key, const std::string& where, T& out) {
    if (!j.is_object() || !j.contains(key)) return;
    try {
      out = j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      problems_.push_back(where + "." + key + ": wrong type");
    }
  }

  void complex(const nlohmann::json& j, const std::string& key, const std::string& where, cplx& out) {
    if (!j.is_object() || !j.contains(key)) return;
    const auto& v = j.at(key);
    if (v.is_number()) {
      out = v.get<double>();
    } else if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
      out = cplx(v[0].get<double>(), v[1].get<double>());
    } else {
      problems_.push_back(where + "." + key + ": expected a number or [re, im]");
    }
  }

  void add(std::string p) { problems_.push_back(std::move(p)); }

  void raise() const {
    if (problems_.empty()) return;
    std::string msg = "invalid scenario config:";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> problems_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Scenario

std::vector<Vec2> MicroMovementGrid::offsets() const {
  if (n < 1) throw ParameterError("micro-movement grid needs n >= 1");
  if (!(span >= 0.0) || !(jitter >= 0.0) || jitter > 1.0) throw ParameterError("invalid micro-movement span or jitter");
  std::vector<double> a(n, 0.0);
  if (n > 1)
    for (int i = 0; i < n; ++i) a[i] = (2.0 * i - (n - 1)) * span / (2.0 * (n - 1));
  const double cell = n > 1 ? span / (n - 1) : 0.0;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  std::vector<Vec2> out;
  for (int iy = 0; iy < n; ++iy)
    for (int ix = 0; ix < n; ++ix) {
      Vec2 o(a[ix], a[iy]);
      if (jitter > 0.0) {
        o.x() += jitter * cell * u(rng);
        o.y() += jitter * cell * u(rng);
      }
      out.push_back(o);
    }
  return out;
}

void Scenario::validate() const {
  if (!(room.x_max > room.x_min) || !(room.y_max > room.y_min)) throw ConfigError("room rectangle is empty");
  std::set<int> ids;
  for (const auto& a : antennas) {
    if (!ids.insert(a.id).second) throw ConfigError("duplicate antenna id " + std::to_string(a.id));
    if (!(a.z > 0.0)) throw ConfigError("antenna " + std::to_string(a.id) + " must be above the ground");
  }
  ids.clear();
  for (const auto& b : bodies) {
    if (b.id <= 0) throw ConfigError("body position ids must be positive (0 denotes free space)");
    if (!ids.insert(b.id).second) throw ConfigError("duplicate body position id " + std::to_string(b.id));
    if (!room.contains(b.x, b.y)) throw ConfigError("body position " + std::to_string(b.id) + " lies outside the room");
  }
  if (!(height > 0.0) || !(girth > 0.0)) throw ConfigError("body height and girth must be positive");
  if (!(freq > 0.0)) throw ConfigError("frequency must be positive");
  if (!(tx_power > 0.0)) throw ConfigError("transmit power must be positive");
  if (!(std::abs(gamma) <= 1.0)) throw ConfigError("|gamma| must not exceed 1");
  if (!(zeta.real() >= 0.0)) throw ConfigError("ground impedance must be passive (Re >= 0)");
  if (M < 0 || M > 60) throw ConfigError("harmonic count out of range [0, 60]");
  if (!(kappa > 0.0)) throw ConfigError("kappa must be positive");
  if (!(noise_db >= 0.0)) throw ConfigError("noise_db must be non-negative");
  if (micro.n < 1 || !(micro.span >= 0.0)) throw ConfigError("invalid micro-movement grid");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

const Antenna& Scenario::antenna(int id) const {
  for (const auto& a : antennas)
    if (a.id == id) return a;
  throw ConfigError("unknown antenna id " + std::to_string(id));
}

const BodyPosition& Scenario::body(int id) const {
  for (const auto& b : bodies)
    if (b.id == id) return b;
  throw ConfigError("unknown body position id " + std::to_string(id));
}

Scenario parse_scenario(const std::string& text, const std::string& base_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config is not valid JSON: ") + e.what());
  }
  Scenario s;
  KeyChecker k;
  k.object(j, "config",
           {"room", "antennas", "bodies", "body", "physics", "mesh", "surface", "rssi", "micro", "run", "_note"},
           {"room", "antennas"});
  if (j.is_object() && j.contains("room")) {
    const auto& r = j["room"];
    k.object(r, "room", {"x_min", "x_max", "y_min", "y_max"}, {"x_min", "x_max", "y_min", "y_max"});
    k.read(r, "x_min", "room", s.room.x_min);
    k.read(r, "x_max", "room", s.room.x_max);
    k.read(r, "y_min", "room", s.room.y_min);
    k.read(r, "y_max", "room", s.room.y_max);
  }
  auto list = [&](const char* key, auto&& each) {
    if (!j.is_object() || !j.contains(key)) return;
    if (!j[key].is_array()) {
      k.add(std::string(key) + ": expected an array");
      return;
    }
    for (std::size_t i = 0; i < j[key].size(); ++i) each(j[key][i], std::string(key) + "[" + std::to_string(i) + "]");
  };
  list("antennas", [&](const nlohmann::json& a, const std::string& w) {
    k.object(a, w, {"id", "x", "y", "z"}, {"id", "x", "y", "z"});
    Antenna ant;
    k.read(a, "id", w, ant.id);
    k.read(a, "x", w, ant.x);
    k.read(a, "y", w, ant.y);
    k.read(a, "z", w, ant.z);
    s.antennas.push_back(ant);
  });
  list("bodies", [&](const nlohmann::json& b, const std::string& w) {
    k.object(b, w, {"id", "x", "y"}, {"id", "x", "y"});
    BodyPosition pos;
    k.read(b, "id", w, pos.id);
    k.read(b, "x", w, pos.x);
    k.read(b, "y", w, pos.y);
    s.bodies.push_back(pos);
  });
  if (j.is_object() && j.contains("body")) {
    const auto& b = j["body"];
    k.object(b, "body", {"height", "girth", "tissue", "tissue_file", "permittivity"});
    k.read(b, "height", "body", s.height);
    k.read(b, "girth", "body", s.girth);
    if (b.is_object() && b.contains("permittivity") && b.contains("tissue"))
      k.add("body: give either tissue or permittivity, not both");
    if (b.is_object() && b.contains("permittivity")) {
      cplx eps = 1.0;
      k.complex(b, "permittivity", "body", eps);
      s.tissue = Material(eps);
    }
    if (b.is_object() && b.contains("tissue")) {
      std::string name, file = default_tissue_file();
      k.read(b, "tissue", "body", name);
      if (b.contains("tissue_file")) {
        k.read(b, "tissue_file", "body", file);
        file = (std::filesystem::path(base_dir) / file).string();
      }
      try {
        if (!name.empty()) s.tissue = Material(tissue(file, name));
      } catch (const Error& e) {
        k.add(std::string("body.tissue: ") + e.what());
      }
    }
  }
  if (j.is_object() && j.contains("physics")) {
    const auto& p = j["physics"];
    k.object(p, "physics", {"frequency", "tx_power", "gamma", "ground_impedance", "harmonics"});
    k.read(p, "frequency", "physics", s.freq);
    k.read(p, "tx_power", "physics", s.tx_power);
    k.complex(p, "gamma", "physics", s.gamma);
    k.complex(p, "ground_impedance", "physics", s.zeta);
    k.read(p, "harmonics", "physics", s.M);
  }
  if (j.is_object() && j.contains("mesh")) {
    const auto& m = j["mesh"];
    k.object(m, "mesh", {"air_ppw", "body_ppw", "air_margin", "pml"});
    k.read(m, "air_ppw", "mesh", s.mesh.air_ppw);
    k.read(m, "body_ppw", "mesh", s.mesh.body_ppw);
    k.read(m, "air_margin", "mesh", s.mesh.air_margin);
    k.read(m, "pml", "mesh", s.mesh.pml);
  }
  if (j.is_object() && j.contains("surface")) {
    const auto& m = j["surface"];
    k.object(m, "surface", {"margin", "spacing", "n_az", "gauss"});
    k.read(m, "margin", "surface", s.surface.margin);
    k.read(m, "spacing", "surface", s.surface.spacing);
    k.read(m, "n_az", "surface", s.surface.n_az);
    k.read(m, "gauss", "surface", s.surface.gauss);
  }
  if (j.is_object() && j.contains("rssi")) {
    const auto& r = j["rssi"];
    k.object(r, "rssi", {"kappa", "dbm_offset", "noise_db", "seed"});
    k.read(r, "kappa", "rssi", s.kappa);
    k.read(r, "dbm_offset", "rssi", s.dbm_offset);
    k.read(r, "noise_db", "rssi", s.noise_db);
    k.read(r, "seed", "rssi", s.seed);
  }
  if (j.is_object() && j.contains("micro")) {
    const auto& m = j["micro"];
    k.object(m, "micro", {"n", "span", "jitter", "seed"});
    k.read(m, "n", "micro", s.micro.n);
    k.read(m, "span", "micro", s.micro.span);
    k.read(m, "jitter", "micro", s.micro.jitter);
    k.read(m, "seed", "micro", s.micro.seed);
  }
  if (j.is_object() && j.contains("run")) {
    const auto& r = j["run"];
    k.object(r, "run", {"threads", "memory_budget"});
    k.read(r, "threads", "run", s.threads);
    k.read(r, "memory_budget", "run", s.memory_budget);
  }
  k.raise();
  s.mesh.ground = true;
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str(), std::filesystem::path(path).parent_path().string());
}

// ---------------------------------------------------------------------------
// Records

std::string flags_to_string(unsigned flags) {
  static const std::pair<unsigned, const char*> names[] = {
      {kNearField, "near_field"}, {kSourceNear, "source_near"}, {kNoise, "noise"}, {kCalibrated, "calibrated"}};
  std::string out;
  for (const auto& [bit, name] : names)
    if (flags & bit) out += (out.empty() ? "" : "|") + std::string(name);
  return out;
}

unsigned flags_from_string(const std::string& s) {
  unsigned f = 0;
  if (s.empty()) return f;
  for (const auto& t : split(s, '|')) {
    if (t == "near_field") f |= kNearField;
    else if (t == "source_near") f |= kSourceNear;
    else if (t == "noise") f |= kNoise;
    else if (t == "calibrated") f |= kCalibrated;
    else throw ConfigError("unknown record flag '" + t + "'");
  }
  return f;
}

void sort_records(std::vector<RssiRecord>& records) {
  std::sort(records.begin(), records.end(), [](const RssiRecord& a, const RssiRecord& b) {
    return std::tie(a.body_pos_id, a.dy, a.dx, a.tx_id, a.rx_id) <
           std::tie(b.body_pos_id, b.dy, b.dx, b.tx_id, b.rx_id);
  });
}

static const char* kDatasetHeader = "tx_id,rx_id,body_pos_id,dx,dy,rssi_dbm,rssi_free_dbm,delta_rssi_db,flags";

void export_dataset(const std::vector<RssiRecord>& records, std::ostream& os) {
  os << kDatasetHeader << '\n';
  for (const auto& r : records)
    os << r.tx_id << ',' << r.rx_id << ',' << r.body_pos_id << ',' << fmt(r.dx) << ',' << fmt(r.dy) << ','
       << fmt(r.rssi_dbm) << ',' << fmt(r.rssi_free_dbm) << ',' << fmt(r.delta_rssi_db) << ','
       << flags_to_string(r.flags) << '\n';
}

void export_dataset(const std::vector<RssiRecord>& records, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write dataset " + path);
  export_dataset(records, out);
  if (!out) throw Error("failed writing dataset " + path);
}

std::vector<RssiRecord> parse_dataset(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("dataset is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kDatasetHeader) throw ConfigError("unexpected dataset header: " + line);
  std::vector<RssiRecord> out;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw ConfigError("dataset row with " + std::to_string(f.size()) + " fields: " + line);
    RssiRecord r;
    r.tx_id = parse_int(f[0], "tx_id");
    r.rx_id = parse_int(f[1], "rx_id");
    r.body_pos_id = parse_int(f[2], "body_pos_id");
    r.dx = parse_double(f[3], "dx");
    r.dy = parse_double(f[4], "dy");
    r.rssi_dbm = parse_double(f[5], "rssi_dbm");
    r.rssi_free_dbm = parse_double(f[6], "rssi_free_dbm");
    r.delta_rssi_db = parse_double(f[7], "delta_rssi_db");
    r.flags = flags_from_string(f[8]);
    out.push_back(r);
  }
  return out;
}

double quantize_db(double db) {
  constexpr double q = 4294967296.0;  // 2^32
  return std::round(db * q) / q;
}

double to_dbm(double linear, double offset) {
  if (!(linear > 0.0) || !std::isfinite(linear)) throw ConsistencyError("received power must be positive and finite");
  return quantize_db(10.0 * std::log10(linear) + offset);
}

// ---------------------------------------------------------------------------
// Simulation

BodyModel::BodyModel(const Scenario& scn) {
  scn.validate();
  const auto t0 = clock_type::now();
  eps_ = scn.permittivity();
  MeshOptions opts = scn.mesh;
  opts.ground = true;
  mesh_ = std::make_unique<Mesh2D>(
      triangulate(make_domain(build_human_profile(scn.height, scn.girth), scn.freq, eps_, opts)));
  system_ = std::make_unique<HarmonicSystem>(
      assemble(*mesh_, eps_, PmlMap::for_mesh(*mesh_, scn.freq), scn.zeta, scn.freq, scn.M));
  surface_ = std::make_shared<const SurfaceGeometry>(make_surface(*mesh_, scn.freq, scn.M, scn.surface));
  assembly_seconds_ = since(t0);
}

namespace {

CVec3 room_incident(const Scenario& scn, const Antenna& tx, const Vec3& r) {
  const double k = wavenumber(scn.freq);
  const double il = dipole_moment(scn.tx_power, scn.freq);
  const Vec3 s(tx.x, tx.y, tx.z), img(tx.x, tx.y, -tx.z);
  CVec3 e = hertzian_field(r, s, il, k, DipoleModel::Radiation);
  if (scn.gamma != 0.0) e += scn.gamma * hertzian_field(r, img, il, k, DipoleModel::Radiation);
  return e;
}

struct Placement {
  double rho_s = 0.0, phi_tx = 0.0;
};

Placement placement(const Scenario& scn, const BodyModel& model, const Antenna& tx, const Vec2& body) {
  Placement p;
  p.rho_s = std::hypot(tx.x - body.x(), tx.y - body.y());
  p.phi_tx = std::atan2(tx.y - body.y(), tx.x - body.x());
  if (model.surface()->encloses(Vec3(p.rho_s, 0.0, tx.z))) {
    std::ostringstream os;
    os << "transmitter " << tx.id << " lies inside the equivalent surface of the body at (" << body.x() << ", "
       << body.y() << ")";
    throw GeometryError(os.str());
  }
  (void)scn;
  return p;
}

DipoleSource local_source(const Scenario& scn, const Antenna& tx, const Placement& p) {
  DipoleSource src;
  src.position = {p.rho_s, 0.0, tx.z};
  src.power = scn.tx_power;
  src.gamma = scn.gamma;
  src.freq = scn.freq;
  src.model = DipoleModel::Radiation;
  return src;
}

}  // namespace

namespace {

std::vector<LinkSet> simulate(const Scenario& scn, const BodyModel& model, const std::vector<LinkJob>& jobs,
                              RunTiming* timing, bool skip_inside) {
  const double lam = wavelength(scn.freq);
  std::vector<LinkSet> out(jobs.size());
  std::vector<int> body_jobs;
  std::vector<Placement> place(jobs.size());
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Antenna& tx = scn.antenna(jobs[i].tx_id);
    out[i].tx_id = tx.id;
    out[i].body = jobs[i].body;
    for (const auto& a : scn.antennas)
      if (a.id != tx.id) out[i].rx_ids.push_back(a.id);
    if (jobs[i].body) {
      if (!scn.room.contains(jobs[i].body->x(), jobs[i].body->y()))
        throw ParameterError("body placement outside the room");
      place[i] = placement(scn, model, tx, *jobs[i].body);
      body_jobs.push_back(static_cast<int>(i));
    }
  }

  // FEM for every body placement against the shared system.
  std::vector<EquivalentSurface> surf;
  surf.reserve(body_jobs.size());
  for (std::size_t b = 0; b < body_jobs.size(); ++b) surf.emplace_back(model.surface());
  std::vector<double> rhs_seconds(body_jobs.size(), 0.0);
  if (!body_jobs.empty()) {
    JobSolveOptions opts;
    opts.threads = scn.threads;
    opts.memory_budget = scn.memory_budget;
    JobTiming local;
    opts.timing = timing ? &timing->solve : &local;
    auto rhs = [&](int b) {
      const auto t0 = clock_type::now();
      const int i = body_jobs[b];
      const Antenna& tx = scn.antenna(jobs[i].tx_id);
      const auto hinc = azimuthal_decompose(model.mesh(), local_source(scn, tx, place[i]), scn.M);
      out[i].warnings = hinc.warnings;
      auto K = assemble_rhs(hinc, model.mesh(), model.permittivity());
      rhs_seconds[b] = since(t0);
      return K;
    };
    auto sink = [&](int b, int m, const HarmonicCoefficients& c) { surf[b].set_harmonic(m, c.u_t, c.u_phi); };
    solve_jobs(model.system(), scn.M, static_cast<int>(body_jobs.size()), rhs, sink, opts);
  }

  std::vector<int> body_index(jobs.size(), -1);
  for (std::size_t b = 0; b < body_jobs.size(); ++b) body_index[body_jobs[b]] = static_cast<int>(b);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto t0 = clock_type::now();
    LinkSet& ls = out[i];
    const Antenna& tx = scn.antenna(ls.tx_id);
    const std::size_t nrx = ls.rx_ids.size();
    ls.ez.assign(nrx, 0.0);
    ls.ez_scattered.assign(nrx, 0.0);
    ls.rssi.assign(nrx, 0.0);
    ls.flags.assign(nrx, 0u);
    std::vector<Vec3> local;
    std::vector<std::size_t> outside;
    for (std::size_t r = 0; r < nrx; ++r) {
      const Antenna& rx = scn.antenna(ls.rx_ids[r]);
      const Vec3 p(rx.x, rx.y, rx.z);
      ls.ez[r] = room_incident(scn, tx, p)[2];
      if (!ls.body) continue;
      if (!ls.warnings.empty()) ls.flags[r] |= kSourceNear;
      const Vec3 q = to_body_frame(p, *ls.body, place[i].phi_tx);
      if (model.surface()->encloses(q)) {
        if (skip_inside) {
          ls.flags[r] |= kInsideSurface;
          continue;
        }
        std::ostringstream os;
        os << "receiver " << rx.id << " lies inside the equivalent surface of the body at (" << ls.body->x()
           << ", " << ls.body->y() << ")";
        throw DomainError(os.str());
      }
      if (model.surface()->distance(q) < 2.0 * lam) ls.flags[r] |= kNearField;
      local.push_back(q);
      outside.push_back(r);
    }
    if (ls.body && !local.empty()) {
      const auto es = exterior_field(surf[body_index[i]], local, scn.gamma, ExteriorKernel::Full, scn.threads);
      for (std::size_t k = 0; k < outside.size(); ++k) {
        ls.ez_scattered[outside[k]] = es[k][2];
        ls.ez[outside[k]] += es[k][2];
      }
    }
    for (std::size_t r = 0; r < nrx; ++r)
      ls.rssi[r] = ls.flags[r] & kInsideSurface ? std::numeric_limits<double>::quiet_NaN()
                                                : scn.kappa * std::norm(ls.ez[r]);
    if (timing) {
      const double ext = since(t0);
      timing->exterior += ext;
      timing->per_tx[ls.tx_id] += ext + (body_index[i] >= 0 ? rhs_seconds[body_index[i]] : 0.0);
    }
  }
  return out;
}

}  // namespace

std::vector<LinkSet> simulate_links(const Scenario& scn, const BodyModel& model, const std::vector<LinkJob>& jobs,
                                    RunTiming* timing) {
  return simulate(scn, model, jobs, timing, false);
}

LinkSet simulate_link_set(const Scenario& scn, const BodyModel& model, int tx_id, std::optional<Vec2> body) {
  return simulate_links(scn, model, {LinkJob{tx_id, body}}).front();
}

EquivalentSurface placement_currents(const Scenario& scn, const BodyModel& model, int tx_id, const Vec2& body) {
  const Antenna& tx = scn.antenna(tx_id);
  const Placement p = placement(scn, model, tx, body);
  EquivalentSurface surf(model.surface());
  JobSolveOptions opts;
  opts.threads = scn.threads;
  solve_jobs(
      model.system(), scn.M, 1,
      [&](int) {
        return assemble_rhs(azimuthal_decompose(model.mesh(), local_source(scn, tx, p), scn.M), model.mesh(),
                            model.permittivity());
      },
      [&](int, int m, const HarmonicCoefficients& c) { surf.set_harmonic(m, c.u_t, c.u_phi); }, opts);
  return surf;
}

std::vector<FieldMapPoint> field_map(const Scenario& scn, const BodyModel& model, int tx_id, const Vec2& body,
                                     const std::vector<Vec3>& points, bool total) {
  const Antenna& tx = scn.antenna(tx_id);
  const Placement p = placement(scn, model, tx, body);
  const auto surf = placement_currents(scn, model, tx_id, body);
  std::vector<FieldMapPoint> out(points.size());
  std::vector<Vec3> local;
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < points.size(); ++i) {
    out[i].r = points[i];
    if (points[i].z() < 0.0) throw DomainError("field map point below the ground plane");
    const Vec3 q = to_body_frame(points[i], body, p.phi_tx);
    const bool at_source = total && (points[i] - Vec3(tx.x, tx.y, tx.z)).norm() < 0.05 * wavelength(scn.freq);
    if (model.surface()->encloses(q) || at_source) {
      out[i].masked = true;
      continue;
    }
    local.push_back(q);
    idx.push_back(i);
  }
  const auto es = exterior_field(surf, local, scn.gamma, ExteriorKernel::Full, scn.threads);
  const double c = std::cos(p.phi_tx), s = std::sin(p.phi_tx);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const CVec3& e = es[k];
    CVec3 room(c * e[0] - s * e[1], s * e[0] + c * e[1], e[2]);
    if (total) room += room_incident(scn, tx, points[idx[k]]);
    out[idx[k]].e = room;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

CalibrationFactor calibrate(const std::vector<double>& sim, const std::vector<double>& ref, int tx_id) {
  if (sim.size() != ref.size() || sim.empty()) throw CalibrationError("calibration vectors must match and be non-empty");
  const double ms = *std::max_element(sim.begin(), sim.end());
  const double mr = *std::max_element(ref.begin(), ref.end());
  if (!(ms > 0.0)) throw CalibrationError("simulated RSSI is identically zero for tx " + std::to_string(tx_id));
  if (!(mr > 0.0)) throw CalibrationError("reference RSSI has no positive value for tx " + std::to_string(tx_id));
  return {tx_id, mr / ms};
}

std::map<std::pair<int, int>, double> load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open reference " + path);
  std::string line;
  std::getline(in, line);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "tx_id,rx_id,rssi_dbm") throw ConfigError("reference header must be tx_id,rx_id,rssi_dbm");
  std::map<std::pair<int, int>, double> ref;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto f = split(line, ',');
    if (f.size() != 3) throw ConfigError("malformed reference row: " + line);
    ref[{parse_int(f[0], "tx_id"), parse_int(f[1], "rx_id")}] = parse_double(f[2], "rssi_dbm");
  }
  return ref;
}

std::map<int, CalibrationFactor> calibrate_records(std::vector<RssiRecord>& records,
                                                   const std::map<std::pair<int, int>, double>& ref) {
  std::map<int, std::pair<std::vector<double>, std::vector<double>>> pairs;
  for (const auto& r : records) {
    if (r.body_pos_id != 0) continue;
    const auto it = ref.find({r.tx_id, r.rx_id});
    if (it == ref.end()) continue;
    pairs[r.tx_id].first.push_back(db_from_dbm(r.rssi_free_dbm));
    pairs[r.tx_id].second.push_back(db_from_dbm(it->second));
  }
  std::map<int, CalibrationFactor> out;
  for (const auto& [tx, v] : pairs) out[tx] = calibrate(v.first, v.second, tx);
  for (auto& r : records) {
    const auto it = out.find(r.tx_id);
    if (it == out.end()) continue;
    const double c = quantize_db(10.0 * std::log10(it->second.alpha));
    r.rssi_dbm += c;
    r.rssi_free_dbm += c;
    r.flags |= kCalibrated;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Drivers

namespace {

std::vector<int> transmitters(const Scenario& scn, const std::vector<int>& filter) {
  std::vector<int> ids;
  if (filter.empty()) {
    for (const auto& a : scn.antennas) ids.push_back(a.id);
  } else {
    for (int id : filter) ids.push_back(scn.antenna(id).id);
  }
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

struct BodyCase {
  int pos_id;
  Vec2 offset;
  Vec2 center;
};

ScenarioRun run_cases(const Scenario& scn, const BodyModel& model, const std::vector<int>& txs,
                      const std::vector<BodyCase>& cases) {
  ScenarioRun run;
  run.timing.assembly = model.assembly_seconds();
  if (scn.antennas.size() < 2) {
    run.warnings.push_back("fewer than two antennas: no links to simulate");
    return run;
  }
  std::vector<LinkJob> jobs;
  for (int tx : txs) jobs.push_back({tx, std::nullopt});
  std::vector<const BodyCase*> job_case(jobs.size(), nullptr);
  const auto& g = *model.surface();
  for (const auto& c : cases)
    for (int tx : txs) {
      const Antenna& a = scn.antenna(tx);
      const double rho = std::hypot(a.x - c.center.x(), a.y - c.center.y());
      if (g.encloses(Vec3(rho, 0.0, a.z))) {
        std::ostringstream os;
        os << "tx " << tx << " coincides with body position " << c.pos_id << " (offset " << c.offset.x() << ", "
           << c.offset.y() << "): links skipped";
        run.warnings.push_back(os.str());
        continue;
      }
      jobs.push_back({tx, c.center});
      job_case.push_back(&c);
    }
  const auto sets = simulate(scn, model, jobs, &run.timing, true);
  std::map<std::pair<int, int>, double> free_dbm;
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (job_case[i]) continue;
    for (std::size_t r = 0; r < sets[i].rx_ids.size(); ++r) {
      const double p = to_dbm(sets[i].rssi[r], scn.dbm_offset);
      free_dbm[{sets[i].tx_id, sets[i].rx_ids[r]}] = p;
      RssiRecord rec;
      rec.tx_id = sets[i].tx_id;
      rec.rx_id = sets[i].rx_ids[r];
      rec.rssi_dbm = p;
      rec.rssi_free_dbm = p;
      rec.delta_rssi_db = 0.0;
      run.records.push_back(rec);
    }
  }
  for (std::size_t i = 0; i < sets.size(); ++i) {
    if (!job_case[i]) continue;
    for (std::size_t r = 0; r < sets[i].rx_ids.size(); ++r) {
      if (sets[i].flags[r] & kInsideSurface) {
        std::ostringstream os;
        os << "rx " << sets[i].rx_ids[r] << " lies inside the body at position " << job_case[i]->pos_id
           << ": link to tx " << sets[i].tx_id << " skipped";
        run.warnings.push_back(os.str());
        continue;
      }
      RssiRecord rec;
      rec.tx_id = sets[i].tx_id;
      rec.rx_id = sets[i].rx_ids[r];
      rec.body_pos_id = job_case[i]->pos_id;
      rec.dx = job_case[i]->offset.x();
      rec.dy = job_case[i]->offset.y();
      rec.rssi_dbm = to_dbm(sets[i].rssi[r], scn.dbm_offset);
      rec.rssi_free_dbm = free_dbm.at({rec.tx_id, rec.rx_id});
      rec.delta_rssi_db = rec.rssi_free_dbm - rec.rssi_dbm;
      rec.flags = sets[i].flags[r];
      run.records.push_back(rec);
    }
  }
  sort_records(run.records);
  if (scn.noise_db > 0.0) add_noise(run.records, scn.noise_db, scn.seed);
  return run;
}

}  // namespace

ScenarioRun run_scenario(const Scenario& scn, const BodyModel& model, const std::vector<int>& tx_filter) {
  std::vector<BodyCase> cases;
  for (const auto& b : scn.bodies) cases.push_back({b.id, Vec2::Zero(), Vec2(b.x, b.y)});
  return run_cases(scn, model, transmitters(scn, tx_filter), cases);
}

ScenarioRun micro_sweep(const Scenario& scn, const BodyModel& model, int position_id, const MicroMovementGrid& grid,
                        const std::vector<int>& tx_filter) {
  const BodyPosition& nominal = scn.body(position_id);
  std::vector<BodyCase> cases;
  for (const Vec2& o : grid.offsets()) {
    const Vec2 c(nominal.x + o.x(), nominal.y + o.y());
    if (!scn.room.contains(c.x(), c.y())) throw ParameterError("micro-movement offset leaves the room");
    cases.push_back({position_id, o, c});
  }
  return run_cases(scn, model, transmitters(scn, tx_filter), cases);
}

void add_noise(std::vector<RssiRecord>& records, double sigma_db, std::uint64_t seed) {
  if (!(sigma_db > 0.0)) return;
  sort_records(records);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, sigma_db);
  std::map<std::pair<int, int>, double> free_noise;
  for (auto& r : records)
    if (r.body_pos_id == 0) free_noise[{r.tx_id, r.rx_id}] = quantize_db(n(rng));
  for (auto& r : records) {
    const auto it = free_noise.find({r.tx_id, r.rx_id});
    const double nf = it != free_noise.end() ? it->second : quantize_db(n(rng));
    r.rssi_free_dbm += nf;
    r.rssi_dbm = r.body_pos_id == 0 ? r.rssi_free_dbm : r.rssi_dbm + quantize_db(n(rng));
    r.delta_rssi_db = r.rssi_free_dbm - r.rssi_dbm;
    r.flags |= kNoise;
  }
}

// ---------------------------------------------------------------------------
// Statistics

double EmpiricalPdf::integral() const {
  double s = 0.0;
  for (std::size_t i = 0; i < density.size(); ++i) s += density[i] * (edges[i + 1] - edges[i]);
  return s;
}

EmpiricalPdf empirical_pdf(const std::vector<double>& v, double bin_width) {
  if (v.empty()) throw ParameterError("empirical PDF needs at least one value");
  if (!(bin_width > 0.0)) throw ParameterError("bin width must be positive");
  EmpiricalPdf p;
  p.bin_width = bin_width;
  p.count = static_cast<int>(v.size());
  p.mean = std::accumulate(v.begin(), v.end(), 0.0) / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - p.mean) * (x - p.mean);
  p.stddev = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi == lo) {
    p.edges = {lo - 0.5 * bin_width, lo + 0.5 * bin_width};
    p.density = {1.0 / bin_width};
    return p;
  }
  const double start = std::floor(lo / bin_width) * bin_width;
  int nb = std::max(1, static_cast<int>(std::ceil((hi - start) / bin_width)));
  if (start + nb * bin_width <= hi) ++nb;
  std::vector<int> counts(nb, 0);
  for (double x : v) counts[std::clamp(static_cast<int>(std::floor((x - start) / bin_width)), 0, nb - 1)]++;
  for (int b = 0; b <= nb; ++b) p.edges.push_back(start + b * bin_width);
  for (int b = 0; b < nb; ++b) p.density.push_back(counts[b] / (v.size() * (p.edges[b + 1] - p.edges[b])));
  return p;
}

std::vector<LinkStats> link_statistics(const std::vector<RssiRecord>& records, double bin_width) {
  std::map<std::tuple<int, int, int>, std::pair<std::vector<double>, std::vector<double>>> groups;
  for (const auto& r : records) {
    if (r.body_pos_id == 0) continue;
    auto& g = groups[{r.body_pos_id, r.tx_id, r.rx_id}];
    g.first.push_back(r.rssi_dbm);
    g.second.push_back(r.delta_rssi_db);
  }
  std::vector<LinkStats> out;
  for (const auto& [key, g] : groups) {
    LinkStats s;
    std::tie(s.body_pos_id, s.tx_id, s.rx_id) = key;
    s.rssi = empirical_pdf(g.first, bin_width);
    s.delta_std = empirical_pdf(g.second, bin_width).stddev;
    out.push_back(std::move(s));
  }
  return out;
}

void write_link_statistics(std::ostream& os, const std::vector<LinkStats>& stats) {
  os << "tx_id,rx_id,body_pos_id,count,mean_db,std_db,delta_std_db,bin_lo_db,bin_hi_db,density\n";
  for (const auto& s : stats)
    for (std::size_t b = 0; b < s.rssi.density.size(); ++b)
      os << s.tx_id << ',' << s.rx_id << ',' << s.body_pos_id << ',' << s.rssi.count << ',' << fmt(s.rssi.mean)
         << ',' << fmt(s.rssi.stddev) << ',' << fmt(s.delta_std) << ',' << fmt(s.rssi.edges[b]) << ','
         << fmt(s.rssi.edges[b + 1]) << ',' << fmt(s.rssi.density[b]) << '\n';
}

}  // namespace borfem
