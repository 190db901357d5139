#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "borfem/scenario.hpp"
#include "cases.hpp"

using namespace borfem;
namespace fs = std::filesystem;

namespace {

struct Args {
  std::string config;
  std::string out = ".";
  std::optional<double> freq;
  std::optional<int> harmonics;
  std::vector<double> gamma;
  std::optional<double> mesh_h;
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::string case_name;
  std::string plane = "xy";
  std::string quantity = "scattered";
  std::vector<int> tx;
  int position = 0;
  std::string reference;
  double z_cut = -1.0;
  double step = 0.05;
  double extent = 2.0;
  double bin_width = 0.5;
  bool verbose = false;
};

int g_verbose = 0;

void log(const std::string& s) {
  if (g_verbose) std::cerr << s << "\n";
}

std::optional<cplx> gamma_override(const Args& a) {
  if (a.gamma.empty()) return std::nullopt;
  if (a.gamma.size() > 2) throw ParameterError("--gamma takes RE or RE IM");
  const cplx g(a.gamma[0], a.gamma.size() == 2 ? a.gamma[1] : 0.0);
  if (std::abs(g) > 1.0) throw ParameterError("|gamma| must not exceed 1");
  return g;
}

Scenario scenario_from(const Args& a) {
  if (a.config.empty()) throw ConfigError("--config is required");
  Scenario s = load_scenario(a.config);
  if (a.freq) s.freq = *a.freq;
  if (a.harmonics) s.M = *a.harmonics;
  if (auto g = gamma_override(a)) s.gamma = *g;
  if (a.mesh_h) {
    if (!(*a.mesh_h > 0.0 && *a.mesh_h <= 0.5)) throw ParameterError("--mesh-h must lie in (0, 0.5] wavelengths");
    s.mesh.air_ppw = 1.0 / *a.mesh_h;
  }
  s.threads = a.threads;
  if (a.seed) s.seed = *a.seed;
  s.validate();
  return s;
}

fs::path out_dir(const Args& a) {
  fs::path d(a.out);
  std::error_code ec;
  fs::create_directories(d, ec);
  if (!fs::is_directory(d)) throw ConfigError("cannot create output directory " + a.out);
  return d;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + p.string());
  return f;
}

void print_warnings(const std::vector<std::string>& w) {
  for (const auto& s : w) std::cerr << "warning: " << s << "\n";
}

void write_timing(std::ostream& os, const RunTiming& t) {
  char buf[128];
  os << "item,seconds\n";
  std::snprintf(buf, sizeof buf, "assembly,%.3f\n", t.assembly);
  os << buf;
  for (std::size_t m = 0; m < t.solve.factorize.size(); ++m) {
    std::snprintf(buf, sizeof buf, "factorize_m%zu,%.3f\nsolve_m%zu,%.3f\n", m, t.solve.factorize[m], m,
                  m < t.solve.solve.size() ? t.solve.solve[m] : 0.0);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "rhs,%.3f\nexterior,%.3f\nbatches,%d\n", t.solve.rhs, t.exterior, t.solve.batches);
  os << buf;
  for (const auto& [tx, sec] : t.per_tx) {
    std::snprintf(buf, sizeof buf, "tx_%d,%.3f\n", tx, sec);
    os << buf;
  }
}

int cmd_validate(const Args& a) {
  cases::Options o;
  o.freq = a.freq;
  o.M = a.harmonics;
  o.gamma = gamma_override(a);
  o.mesh_h = a.mesh_h;
  o.threads = a.threads;
  const fs::path dir = out_dir(a);
  cases::Report r;
  FarFieldPattern ff;
  bool has_pattern = false;
  if (a.case_name == "zero-contrast") {
    r = cases::zero_contrast(o);
  } else if (a.case_name == "mie-sphere") {
    r = cases::mie_sphere(o, &ff);
    has_pattern = true;
  } else if (a.case_name == "cylinder-ground") {
    r = cases::cylinder_ground(o, &ff);
    has_pattern = true;
  } else {
    throw ParameterError("unknown case '" + a.case_name + "' (cylinder-ground, mie-sphere, zero-contrast)");
  }
  auto rep = open_out(dir / ("validate_" + a.case_name + ".csv"));
  cases::write_report(rep, r);
  if (has_pattern) {
    auto f = open_out(dir / ("directivity_" + a.case_name + ".csv"));
    write_far_field_csv(f, ff);
  }
  cases::write_report(std::cout, r);
  return r.pass() ? 0 : 1;
}

int cmd_fieldmap(const Args& a) {
  const Scenario s = scenario_from(a);
  if (a.tx.size() != 1) throw ParameterError("fieldmap needs exactly one --tx");
  if (a.quantity != "scattered" && a.quantity != "total") throw ParameterError("--quantity is scattered or total");
  if (!(a.step > 0.0)) throw ParameterError("--step must be positive");
  const Antenna& tx = s.antenna(a.tx.front());
  const BodyPosition& b = s.body(a.position);
  const double z = a.z_cut >= 0.0 ? a.z_cut : tx.z;
  std::vector<Vec3> pts;
  if (a.plane == "xy") {
    const int nx = static_cast<int>(std::floor((s.room.x_max - s.room.x_min) / a.step + 1e-9)) + 1;
    const int ny = static_cast<int>(std::floor((s.room.y_max - s.room.y_min) / a.step + 1e-9)) + 1;
    if (nx < 2 || ny < 2) throw ParameterError("field map grid must be at least 2 x 2");
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) pts.emplace_back(s.room.x_min + i * a.step, s.room.y_min + j * a.step, z);
  } else if (a.plane == "rz") {
    // vertical plane through the body axis and the transmitter
    const double phi = std::atan2(tx.y - b.y, tx.x - b.x);
    const int nr = static_cast<int>(std::floor(2.0 * a.extent / a.step + 1e-9)) + 1;
    const int nz = static_cast<int>(std::floor(1.5 * s.height / a.step + 1e-9)) + 1;
    if (nr < 2 || nz < 2) throw ParameterError("field map grid must be at least 2 x 2");
    for (int j = 0; j < nz; ++j)
      for (int i = 0; i < nr; ++i) {
        const double r = -a.extent + i * a.step;
        pts.emplace_back(b.x + r * std::cos(phi), b.y + r * std::sin(phi), j * a.step);
      }
  } else {
    throw ParameterError("--plane is xy or rz");
  }
  const BodyModel model(s);
  log("mesh triangles " + std::to_string(model.mesh().num_triangles()));
  const auto grid = field_map(s, model, tx.id, Vec2(b.x, b.y), pts, a.quantity == "total");
  auto f = open_out(out_dir(a) / "fieldmap.csv");
  write_field_map_csv(f, grid);
  std::cout << "fieldmap points " << grid.size() << "\n";
  return 0;
}

int cmd_scenario(const Args& a) {
  const Scenario s = scenario_from(a);
  const auto t0 = std::chrono::steady_clock::now();
  const BodyModel model(s);
  log("mesh triangles " + std::to_string(model.mesh().num_triangles()));
  ScenarioRun run = run_scenario(s, model, a.tx);
  print_warnings(run.warnings);
  if (!a.reference.empty()) calibrate_records(run.records, load_reference(a.reference));
  const fs::path dir = out_dir(a);
  export_dataset(run.records, (dir / "dataset.csv").string());
  auto t = open_out(dir / "timing.csv");
  write_timing(t, run.timing);
  std::cout << "records " << run.records.size() << "\n";
  std::printf("elapsed %.1f s\n", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  write_timing(std::cout, run.timing);
  return 0;
}

int cmd_sweep(const Args& a) {
  const Scenario s = scenario_from(a);
  const BodyModel model(s);
  log("mesh triangles " + std::to_string(model.mesh().num_triangles()));
  ScenarioRun run = micro_sweep(s, model, a.position, s.micro, a.tx);
  print_warnings(run.warnings);
  if (!a.reference.empty()) calibrate_records(run.records, load_reference(a.reference));
  const fs::path dir = out_dir(a);
  export_dataset(run.records, (dir / "dataset.csv").string());
  auto p = open_out(dir / "pdf.csv");
  write_link_statistics(p, link_statistics(run.records, a.bin_width));
  auto t = open_out(dir / "timing.csv");
  write_timing(t, run.timing);
  std::cout << "records " << run.records.size() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"2.5-D body-of-revolution FEM: validation, field maps and RSSI datasets"};
  app.require_subcommand(1);
  Args a;

  auto common = [&](CLI::App* c) {
    c->add_option("--out", a.out, "Output directory")->capture_default_str();
    c->add_option("--freq", a.freq, "Frequency override (Hz)");
    c->add_option("--harmonics", a.harmonics, "Highest azimuthal harmonic M");
    c->add_option("--gamma", a.gamma, "Ground image coefficient: RE [IM]")->expected(1, 2);
    c->add_option("--mesh-h", a.mesh_h, "Air element size (wavelengths)");
    c->add_option("--threads", a.threads, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
    c->add_flag("-v,--verbose", a.verbose, "Progress on stderr");
  };
  auto with_config = [&](CLI::App* c) {
    common(c);
    c->add_option("--config", a.config, "Scenario JSON")->required();
    c->add_option("--seed", a.seed, "Noise seed");
  };

  auto* validate = app.add_subcommand("validate", "Run a validation case and report pass/fail");
  common(validate);
  validate->add_option("--case", a.case_name, "cylinder-ground | mie-sphere | zero-contrast")->required();

  auto* fieldmap = app.add_subcommand("fieldmap", "Complex E on a grid around one body placement");
  with_config(fieldmap);
  fieldmap->add_option("--tx", a.tx, "Transmitter id")->required()->expected(1);
  fieldmap->add_option("--position", a.position, "Body position id")->required();
  fieldmap->add_option("--plane", a.plane, "xy (horizontal cut) or rz (through body and Tx)")->capture_default_str();
  fieldmap->add_option("--quantity", a.quantity, "scattered or total")->capture_default_str();
  fieldmap->add_option("--z", a.z_cut, "Height of the xy cut (default: Tx height)");
  fieldmap->add_option("--step", a.step, "Grid spacing (m)")->capture_default_str();
  fieldmap->add_option("--extent", a.extent, "Half width of the rz cut (m)")->capture_default_str();

  auto* scenario = app.add_subcommand("scenario", "Free-space and body RSSI for every link");
  with_config(scenario);
  scenario->add_option("--tx", a.tx, "Restrict to these transmitters");
  scenario->add_option("--reference", a.reference, "Reference CSV tx_id,rx_id,rssi_dbm for calibration");

  auto* sweep = app.add_subcommand("sweep", "Micro-movement sweep around one body position");
  with_config(sweep);
  sweep->add_option("--position", a.position, "Body position id")->required();
  sweep->add_option("--tx", a.tx, "Restrict to these transmitters");
  sweep->add_option("--reference", a.reference, "Reference CSV tx_id,rx_id,rssi_dbm for calibration");
  sweep->add_option("--bin-width", a.bin_width, "PDF bin width (dB)")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  g_verbose = a.verbose;

  try {
    if (*validate) return cmd_validate(a);
    if (*fieldmap) return cmd_fieldmap(a);
    if (*scenario) return cmd_scenario(a);
    if (*sweep) return cmd_sweep(a);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ParameterError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
