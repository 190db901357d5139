#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "borfem/exterior.hpp"
#include "borfem/materials.hpp"

namespace borfem {

struct Antenna {
  int id = 0;
  double x = 0.0, y = 0.0, z = 0.0;
};

struct BodyPosition {
  int id = 0;
  double x = 0.0, y = 0.0;
};

struct Room {
  double x_min = 0.0, x_max = 0.0, y_min = 0.0, y_max = 0.0;
  bool contains(double x, double y) const {
    return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
  }
};

/// n x n body offsets spanning span x span (m) around a nominal position.
/// A nonzero jitter moves every offset by a seeded uniform amount of at most
/// jitter * cell / 2 per axis.
struct MicroMovementGrid {
  int n = 5;
  double span = 0.4;
  double jitter = 0.0;
  std::uint64_t seed = 1;

  std::vector<Vec2> offsets() const;
};

struct Scenario {
  Room room;
  std::vector<Antenna> antennas;
  std::vector<BodyPosition> bodies;
  double height = 1.7;  // m
  double girth = 0.2;   // R_h, m
  Material tissue = Material(cplx(52.7, -12.76));
  double freq = 2.43e9;
  double tx_power = 1.0;  // W
  cplx gamma = 0.3;
  cplx zeta = 0.0;  // ground surface impedance inside the FEM domain (ohm), 0 = PEC
  int M = 11;
  MeshOptions mesh;
  SurfaceSpec surface;
  double kappa = 1.0;       // RSSI = kappa |E_z|^2
  double dbm_offset = 0.0;  // P_dBm = 10 log10(RSSI) + offset
  double noise_db = 0.0;    // std-dev of optional Gaussian noise on exported P values
  std::uint64_t seed = 1;
  MicroMovementGrid micro;
  int threads = 1;
  double memory_budget = 2.0e9;  // bytes of stored right-hand sides per batch

  void validate() const;
  const Antenna& antenna(int id) const;
  const BodyPosition& body(int id) const;
  cplx permittivity() const { return borfem::permittivity(tissue, freq); }
};

/// JSON scenario file; see docs/config.md. Unknown or missing keys are reported
/// together in one ConfigError.
Scenario load_scenario(const std::string& path);
Scenario parse_scenario(const std::string& json_text, const std::string& base_dir = ".");

enum RecordFlag : unsigned {
  kNearField = 1u << 0,   // receiver within 2 wavelengths of the equivalent surface
  kSourceNear = 1u << 1,  // body within 5 wavelengths of the transmitter (far-zone source model)
  kNoise = 1u << 2,       // synthetic noise added
  kCalibrated = 1u << 3,
};

std::string flags_to_string(unsigned flags);
unsigned flags_from_string(const std::string& s);

struct RssiRecord {
  int tx_id = 0;
  int rx_id = 0;
  int body_pos_id = 0;  // 0 = free space
  double dx = 0.0, dy = 0.0;
  double rssi_dbm = 0.0;
  double rssi_free_dbm = 0.0;
  double delta_rssi_db = 0.0;  // rssi_free_dbm - rssi_dbm
  unsigned flags = 0;

  bool operator==(const RssiRecord&) const = default;
};

/// Row order used for export: body position, offsets, tx, rx.
void sort_records(std::vector<RssiRecord>& records);

void export_dataset(const std::vector<RssiRecord>& records, std::ostream& os);
void export_dataset(const std::vector<RssiRecord>& records, const std::string& path);
std::vector<RssiRecord> parse_dataset(std::istream& is);

/// dB values are kept on a 2^-32 dB grid so that sums and differences of
/// levels (delta, calibration offsets) are exact in floating point.
double quantize_db(double db);
double to_dbm(double linear, double offset);

/// Human-body FEM model shared by every placement of one scenario: mesh,
/// factorization-ready system and equivalent-surface geometry in the body frame.
class BodyModel {
 public:
  explicit BodyModel(const Scenario& scn);

  const Mesh2D& mesh() const { return *mesh_; }
  const HarmonicSystem& system() const { return *system_; }
  std::shared_ptr<const SurfaceGeometry> surface() const { return surface_; }
  cplx permittivity() const { return eps_; }
  double assembly_seconds() const { return assembly_seconds_; }

 private:
  std::unique_ptr<Mesh2D> mesh_;
  std::unique_ptr<HarmonicSystem> system_;
  std::shared_ptr<const SurfaceGeometry> surface_;
  cplx eps_;
  double assembly_seconds_ = 0.0;
};

/// One transmitter with the body at (x, y), or none for free space.
struct LinkJob {
  int tx_id = 0;
  std::optional<Vec2> body;
};

struct LinkSet {
  int tx_id = 0;
  std::optional<Vec2> body;
  std::vector<int> rx_ids;
  std::vector<cplx> ez;           // total E_z at each receiver
  std::vector<cplx> ez_scattered; // zero in free space
  std::vector<double> rssi;       // kappa |E_z|^2
  std::vector<unsigned> flags;
  std::vector<std::string> warnings;
};

struct RunTiming {
  JobTiming solve;
  std::map<int, double> per_tx;  // rhs + exterior seconds by transmitter
  double exterior = 0.0;
  double assembly = 0.0;
};

/// Receivers are every other antenna. A body placed on the transmitter or on a
/// receiver (inside the equivalent surface) is rejected by simulate_links; the
/// scenario drivers skip those links instead.
std::vector<LinkSet> simulate_links(const Scenario& scn, const BodyModel& model,
                                    const std::vector<LinkJob>& jobs, RunTiming* timing = nullptr);
LinkSet simulate_link_set(const Scenario& scn, const BodyModel& model, int tx_id,
                          std::optional<Vec2> body = std::nullopt);

/// Equivalent-surface currents of one placement (body frame, transmitter at phi = 0).
EquivalentSurface placement_currents(const Scenario& scn, const BodyModel& model, int tx_id, const Vec2& body);

/// Room-frame E at arbitrary points for one transmitter and body placement.
/// Points inside the equivalent surface come back masked with zero field.
/// `total` adds the incident dipole and its image; points within 0.05
/// wavelengths of the transmitter are then masked too.
std::vector<FieldMapPoint> field_map(const Scenario& scn, const BodyModel& model, int tx_id, const Vec2& body,
                                     const std::vector<Vec3>& points, bool total);

struct CalibrationFactor {
  int tx_id = 0;
  double alpha = 1.0;
};

CalibrationFactor calibrate(const std::vector<double>& sim, const std::vector<double>& ref, int tx_id);

/// Measured reference: CSV with header tx_id,rx_id,rssi_dbm.
std::map<std::pair<int, int>, double> load_reference(const std::string& path);

/// Per-transmitter factors from the free-space rows of `records` against
/// `ref`, applied to every level of that transmitter (deltas are unchanged).
std::map<int, CalibrationFactor> calibrate_records(std::vector<RssiRecord>& records,
                                                   const std::map<std::pair<int, int>, double>& ref);

struct ScenarioRun {
  std::vector<RssiRecord> records;
  RunTiming timing;
  std::vector<std::string> warnings;
};

/// Free-space rows for every link plus body rows for every nominal position.
ScenarioRun run_scenario(const Scenario& scn, const BodyModel& model, const std::vector<int>& tx_filter = {});

/// Body rows for every offset of `grid` around a nominal position; deltas use
/// the shared free-space reference.
ScenarioRun micro_sweep(const Scenario& scn, const BodyModel& model, int position_id,
                        const MicroMovementGrid& grid, const std::vector<int>& tx_filter = {});

/// Optional synthetic noise (Gaussian in dB) on every exported level.
void add_noise(std::vector<RssiRecord>& records, double sigma_db, std::uint64_t seed);

struct EmpiricalPdf {
  double bin_width = 0.0;
  std::vector<double> edges;    // size bins + 1
  std::vector<double> density;  // per bin, integrates to 1
  double mean = 0.0, stddev = 0.0;
  int count = 0;

  double integral() const;
};

EmpiricalPdf empirical_pdf(const std::vector<double>& values_db, double bin_width);

struct LinkStats {
  int tx_id = 0, rx_id = 0, body_pos_id = 0;
  EmpiricalPdf rssi;   // of rssi_dbm over offsets
  double delta_std = 0.0;
};

std::vector<LinkStats> link_statistics(const std::vector<RssiRecord>& records, double bin_width);
void write_link_statistics(std::ostream& os, const std::vector<LinkStats>& stats);

}  // namespace borfem
