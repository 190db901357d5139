// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here.
//
//   acceptance [--only 1,2,...] [--known-fail N,...] [--out DIR]
//
// Exit status is 0 when every criterion passes except those listed with
// --known-fail (which still print FAIL), 1 otherwise.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "borfem/scenario.hpp"
#include "cases.hpp"

using namespace borfem;

namespace {

using clock_type = std::chrono::steady_clock;

double since(clock_type::time_point t0) {
  return std::chrono::duration<double>(clock_type::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::set<int> parse_list(const std::string& s) {
  std::set<int> out;
  std::stringstream ss(s);
  std::string t;
  while (std::getline(ss, t, ','))
    if (!t.empty()) out.insert(std::stoi(t));
  return out;
}

std::string g_source_dir = BORFEM_SOURCE_DIR;
std::filesystem::path g_out = "acceptance_out";

Scenario room20() { return load_scenario(g_source_dir + "/configs/room20.json"); }

// Human model shared by criteria 4, 5, 7 and 8.
struct Human {
  Scenario scn;
  std::unique_ptr<BodyModel> model;
  double build_seconds = 0.0;
};

Human& human() {
  static Human h = [] {
    Human x;
    x.scn = room20();
    const auto t0 = clock_type::now();
    x.model = std::make_unique<BodyModel>(x.scn);
    x.build_seconds = since(t0);
    return x;
  }();
  return h;
}

// Criterion 4 solve, reused by criterion 7 for the timing.
struct HumanSolve {
  std::unique_ptr<EquivalentSurface> surf;
  double seconds = 0.0;
};

HumanSolve& human_solve() {
  static HumanSolve s = [] {
    HumanSolve x;
    auto& h = human();
    const auto t0 = clock_type::now();
    x.surf = std::make_unique<EquivalentSurface>(placement_currents(h.scn, *h.model, 7, {h.scn.body(1).x, h.scn.body(1).y}));
    x.seconds = since(t0);
    return x;
  }();
  return s;
}

cases::Report& cylinder_report() {
  static cases::Report r = cases::cylinder_ground({}, nullptr, false);
  return r;
}

const cases::Metric& metric(const cases::Report& r, const std::string& name) {
  for (const auto& m : r.metrics)
    if (m.name == name) return m;
  throw std::runtime_error("missing metric " + name);
}

// 1. zero contrast: scattered DOFs vanish for every harmonic
Outcome c1() {
  const auto r = cases::zero_contrast({});
  const auto& m = r.metrics.front();
  return {m.pass() && r.seconds < 60.0,
          "max dof/rhs " + fmt("%.2e", m.value) + " (tol 1e-10), " + fmt("%.1f s", r.seconds) + " (limit 60 s)"};
}

// 2. dielectric sphere against the Mie series
Outcome c2() {
  FarFieldPattern ff;
  const auto r = cases::mie_sphere({}, &ff);
  std::ofstream f(g_out / "mie_far_field.csv");
  write_far_field_csv(f, ff);
  const auto& m = metric(r, "far-field amplitude L2 error");
  return {m.pass() && r.seconds < 300.0,
          "L2 " + fmt("%.3e", m.value) + " (tol 2e-2), " + fmt("%.1f s", r.seconds) + " (limit 300 s); " + r.notes[0]};
}

// 3. exterior field from S_eq against an enlarged FEM domain
Outcome c3() {
  double sec = 0.0;
  const auto m = cases::equivalent_source_consistency({}, &sec);
  return {m.pass() && sec < 600.0,
          "relative L2 " + fmt("%.3e", m.value) + " (tol 3e-2), " + fmt("%.1f s", sec) + " (limit 600 s)"};
}

// 4. human case: M = 9 -> 11 change of the S_eq field, decaying harmonic tail
Outcome c4() {
  auto& h = human();
  const auto& big = *human_solve().surf;
  Scenario s9 = h.scn;
  s9.M = 9;
  const BodyModel m9(s9);
  const auto small = placement_currents(s9, m9, 7, {s9.body(1).x, s9.body(1).y});
  if (small.e_rho.rows() != big.e_rho.rows()) throw std::runtime_error("surface nodes differ between M = 9 and 11");
  EquivalentSurface diff = big;
  auto sub = [](Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) { a.leftCols(b.cols()) -= b; };
  sub(diff.e_rho, small.e_rho);
  sub(diff.e_phi, small.e_phi);
  sub(diff.e_z, small.e_z);
  double num = 0.0, den = 0.0;
  for (double e : diff.harmonic_energy()) num += e;
  const auto spec = big.harmonic_energy();
  for (double e : spec) den += e;
  const double change = std::sqrt(num / den);
  bool monotone = true;
  std::string tail;
  for (std::size_t m = 4; m < spec.size(); ++m) {
    if (m > 4 && !(spec[m] < spec[m - 1])) monotone = false;
    tail += (m > 4 ? " " : "") + fmt("%.1e", spec[m] / den);
  }
  std::ofstream f(g_out / "human_harmonic_energy.csv");
  f << "m,energy_fraction\n";
  for (std::size_t m = 0; m < spec.size(); ++m) f << m << ',' << fmt("%.17g", spec[m] / den) << '\n';
  return {change <= 1e-3 && monotone, "relative change " + fmt("%.3e", change) + " (tol 1e-3); tail m>=4 " +
                                          (monotone ? "decays" : "NOT monotone") + " [" + tail + "]"};
}

// 5. reciprocity of E_z coupling through the body at p = 2
Outcome c5() {
  auto& h = human();
  const Vec2 p2(h.scn.body(2).x, h.scn.body(2).y);
  const std::vector<std::pair<int, int>> links = {{19, 13}, {16, 5}};
  std::vector<LinkJob> jobs;
  for (const auto& [a, b] : links) {
    jobs.push_back({a, p2});
    jobs.push_back({b, p2});
  }
  const auto sets = simulate_links(h.scn, *h.model, jobs);
  auto at = [](const LinkSet& s, int rx, bool scattered) {
    for (std::size_t i = 0; i < s.rx_ids.size(); ++i)
      if (s.rx_ids[i] == rx) return scattered ? s.ez_scattered[i] : s.ez[i];
    throw std::runtime_error("receiver missing");
  };
  double worst = 0.0;
  std::string detail;
  for (std::size_t l = 0; l < links.size(); ++l) {
    const auto [a, b] = links[l];
    const cplx ab = at(sets[2 * l], b, false), ba = at(sets[2 * l + 1], a, false);
    const cplx sab = at(sets[2 * l], b, true), sba = at(sets[2 * l + 1], a, true);
    const double err = std::abs(ab - ba) / std::abs(ab);
    worst = std::max(worst, err);
    detail += " " + std::to_string(a) + "<->" + std::to_string(b) + ": total " + fmt("%.2e", err) + ", scattered " +
              fmt("%.2e", std::abs(sab - sba) / std::abs(sab)) + ", |scat/total| " +
              fmt("%.2f", std::abs(sab) / std::abs(ab)) + ";";
  }
  return {worst <= 0.02, "max total-coupling mismatch " + fmt("%.3e", worst) + " (tol 2e-2);" + detail};
}

// 6. PEC image: tangential incident E vanishes on z = 0, E_phi null on the horizon
Outcome c6() {
  double worst = 0.0;
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-3.0, 3.0), hz(0.05, 2.0);
  for (DipoleModel model : {DipoleModel::Radiation, DipoleModel::Full})
    for (int i = 0; i < 400; ++i) {
      DipoleSource src;
      src.position = {std::abs(u(rng)) + 0.1, u(rng), hz(rng)};
      src.gamma = 1.0;
      src.model = model;
      const Vec3 r(u(rng), u(rng), 0.0);
      const CVec3 e = incident_field(r, src);
      worst = std::max(worst, std::hypot(std::abs(e[0]), std::abs(e[1])) / e.norm());
    }
  const auto& m = metric(cylinder_report(), "horizon |E_phi| / |E_theta|");
  return {worst <= 1e-10 && m.pass(),
          "max |E_t|/|E| on ground " + fmt("%.2e", worst) + " (tol 1e-10); horizon |E_phi|/|E_theta| " +
              fmt("%.2e", m.value) + " (tol 1e-10)"};
}

// 7. wall-clock anchors
Outcome c7() {
  const auto& cyl = metric(cylinder_report(), "assemble + solve s");
  auto& h = human();
  const double human_s = h.build_seconds + human_solve().seconds;
  return {cyl.pass() && human_s <= 900.0,
          "cylinder " + fmt("%.1f s", cyl.value) + " (limit 60 s, " + cylinder_report().notes.back() + "); human " +
              fmt("%.1f s", human_s) + " (limit 900 s, " + std::to_string(h.model->mesh().num_triangles()) +
              " triangles, M 11)"};
}

// 8. micro-movement statistics for Tx 14 around p = 1
Outcome c8() {
  auto& h = human();
  const int tx = 14;
  ScenarioRun run = micro_sweep(h.scn, *h.model, 1, MicroMovementGrid{}, {tx});
  export_dataset(run.records, (g_out / "sweep_tx14_p1.csv").string());
  const auto stats = link_statistics(run.records, 0.5);
  {
    std::ofstream f(g_out / "sweep_tx14_p1_pdf.csv");
    write_link_statistics(f, stats);
  }
  int body_rows = 0;
  for (const auto& r : run.records) body_rows += r.body_pos_id != 0;

  std::map<int, double> mean_delta, std_delta;
  double pdf_err = 0.0;
  for (const auto& s : stats) {
    std_delta[s.rx_id] = s.delta_std;
    pdf_err = std::max(pdf_err, std::abs(s.rssi.integral() - 1.0));
  }
  for (const auto& r : run.records)
    if (r.body_pos_id != 0) mean_delta[r.rx_id] += r.delta_rssi_db / 25.0;
  int shadowed = 0, nearest = 0;
  double best = -1e300, dmin = 1e300;
  const Antenna& t = h.scn.antenna(tx);
  for (const auto& [rx, d] : mean_delta) {
    if (d > best) best = d, shadowed = rx;
    const Antenna& a = h.scn.antenna(rx);
    const double dist = std::hypot(a.x - t.x, a.y - t.y);
    if (dist < dmin) dmin = dist, nearest = rx;
  }

  // calibration against a synthetic reference must leave every delta untouched
  auto cal = run.records;
  std::map<std::pair<int, int>, double> ref;
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 3.0);
  for (const auto& r : cal)
    if (r.body_pos_id == 0) ref[{r.tx_id, r.rx_id}] = r.rssi_free_dbm - 40.0 + n(rng);
  calibrate_records(cal, ref);
  bool invariant = cal.size() == run.records.size();
  for (std::size_t i = 0; invariant && i < cal.size(); ++i)
    invariant = cal[i].delta_rssi_db == run.records[i].delta_rssi_db;
  const auto cal_stats = link_statistics(cal, 0.5);
  for (std::size_t i = 0; invariant && i < stats.size(); ++i) invariant = cal_stats[i].delta_std == stats[i].delta_std;

  const bool ordered = std_delta[shadowed] > std_delta[nearest];
  return {ordered && pdf_err <= 1e-9 && invariant && body_rows == 25 * 19,
          "std dRSSI most-shadowed rx " + std::to_string(shadowed) + " " + fmt("%.3f dB", std_delta[shadowed]) +
              " (mean dRSSI " + fmt("%.2f dB", best) + ") vs nearest rx " + std::to_string(nearest) + " " +
              fmt("%.3f dB", std_delta[nearest]) + "; max |PDF integral - 1| " + fmt("%.1e", pdf_err) +
              " (tol 1e-9); calibration " + (invariant ? "invariant" : "CHANGED deltas") + "; body rows " +
              std::to_string(body_rows)};
}

// 9. full room run twice from scratch, byte-identical CSV
Outcome c9() {
  std::string out[2];
  std::size_t rows = 0;
  double secs[2] = {0.0, 0.0};
  for (int k = 0; k < 2; ++k) {
    const auto t0 = clock_type::now();
    const Scenario s = room20();
    const BodyModel model(s);
    const auto run = run_scenario(s, model);
    std::ostringstream os;
    export_dataset(run.records, os);
    out[k] = os.str();
    rows = run.records.size();
    secs[k] = since(t0);
    if (k == 0) {
      std::ofstream f(g_out / "room20_dataset.csv", std::ios::binary);
      f << out[0];
      std::ofstream w(g_out / "room20_warnings.txt");
      for (const auto& m : run.warnings) w << m << '\n';
    }
  }
  const bool same = out[0] == out[1];
  return {same && !out[0].empty() && rows == 2242,
          std::string(same ? "identical" : "DIFFERENT") + " (" + std::to_string(out[0].size()) + " bytes, " +
              std::to_string(rows) + " rows, expected 2242); runs " + fmt("%.0f s", secs[0]) + " and " +
              fmt("%.0f s", secs[1])};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only, known;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--only" && i + 1 < argc) only = parse_list(argv[++i]);
    else if (a == "--known-fail" && i + 1 < argc) known = parse_list(argv[++i]);
    else if (a == "--out" && i + 1 < argc) g_out = argv[++i];
    else {
      std::cerr << "usage: acceptance [--only 1,2,...] [--known-fail N,...] [--out DIR]\n";
      return 2;
    }
  }
  std::filesystem::create_directories(g_out);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"zero-contrast null", c1},         {"Mie sphere far field", c2},
      {"equivalent-source consistency", c3}, {"harmonic convergence (human)", c4},
      {"reciprocity through body at p2", c5}, {"image-ground null", c6},
      {"performance anchors", c7},         {"micro-movement statistics", c8},
      {"dataset determinism", c9}};

  bool ok = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = clock_type::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool expected_fail = known.count(id) > 0;
    if (!o.pass && !expected_fail) ok = false;
    std::printf("[%s] %d %s: %s [%.1f s]%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str(),
                since(t0), !o.pass && expected_fail ? " (known failure)" : "");
    std::fflush(stdout);
  }
  return ok ? 0 : 1;
}
