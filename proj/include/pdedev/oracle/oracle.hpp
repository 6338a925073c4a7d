#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdedev/lbm/fields.hpp"
#include "pdedev/lbm/kernels.hpp"
#include "pdedev/sandbox/report.hpp"
#include "pdedev/tasks/tasks.hpp"

namespace pdedev::oracle {

using lbm::ScalarField;
using lbm::Vec2;
using lbm::VectorField;

// Closed-form advected, diffusing Gaussian on a periodic nx-by-ny box
// (minimum-image distances). Throws OracleInapplicableError once the
// Gaussian is wide enough for periodic images to matter.
double analytic_ad_gaussian(double x, double y, double t, const lbm::TransportParams& params,
                            const tasks::InitSpec& init, int nx, int ny);
ScalarField analytic_ad_gaussian_field(double t, const lbm::TransportParams& params,
                                       const tasks::InitSpec& init, int nx, int ny);

// Minimum-image representative of d on a period of length n, in [-n/2, n/2).
double periodic_offset(double d, double n);

struct Peak {
  Vec2 position;
  double amplitude = 0.0;
};

// Argmax refined by a 3-point parabola per axis (periodic neighbours).
// Ties go to the smallest x, then y. MeasurementError on constant fields.
Peak measure_peak(const ScalarField& field);

// Second moment of (field - min) about `center`, minimum-image distances.
double periodic_variance(const ScalarField& field, Vec2 center);

// Mean of the one-cell band next to an edge.
double band_mean(const ScalarField& field, bc::Edge edge);

// Distance from `center` to the `level` crossing along the row through the
// centre, averaged over the +x and -x directions (linear interpolation).
double level_set_radius(const ScalarField& field, Vec2 center, double level = 0.5);

// Least-squares slope of radius against time. PreconditionError with fewer
// than 5 samples, MeasurementError if radii decrease.
double front_speed(const std::vector<std::pair<double, double>>& series);

struct DetectorResult {
  bool applicable = false;
  bool flagged = false;
  std::string detail;
};

struct Snapshot {
  long timestep = 0;
  double time = 0.0;
  ScalarField scalar;
  VectorField velocity;
};

struct LoadedOutput {
  bool has_manifest = false;
  tasks::Manifest manifest;
  std::vector<Snapshot> snapshots;  // in timestep order
  std::vector<std::string> checksum_mismatches;
  std::size_t field_files = 0;  // .vtk/.vtu files present in the directory
};

// Reads manifest.json and every listed snapshot. Without a manifest the
// directory is only scanned for field files. IoError on unreadable fields.
LoadedOutput load_output(const std::string& dir, std::string_view scalar_name);

DetectorResult detect_missing_advection(const Snapshot& first, const Snapshot& last,
                                        const tasks::SimulationConfig& config,
                                        double fraction = 0.25);
DetectorResult detect_bc_swap(const ScalarField& field, const std::vector<bc::BcRule>& rules,
                              double miss = 0.25, double match = 0.1);
DetectorResult detect_spurious(const LoadedOutput& output, double constancy_tol = 1e-12);

enum class ErrorClass { pass, syntactic, misinterpretation, spatial, spurious, unstable };
std::string_view to_string(ErrorClass c);

struct CheckResult {
  std::string name;
  std::string op;
  double threshold = 0.0;
  double measured = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::string task;
  std::map<std::string, double> metrics;
  std::vector<CheckResult> checks;
  std::map<std::string, DetectorResult> detectors;
  ErrorClass error_class = ErrorClass::pass;
  bool success = false;
  std::vector<std::string> notes;
};

nlohmann::json report_to_json(const ValidationReport& report);

// Metrics the checks can refer to; only those meaningful for the task's
// configuration and output are present.
std::map<std::string, double> compute_metrics(const tasks::TaskSpec& task,
                                              const LoadedOutput& output);

// Precedence: unstable, syntactic, spurious, spatial, misinterpretation,
// failed metric (misinterpretation), pass.
ValidationReport validate(const tasks::TaskSpec& task, const sandbox::ExecutionReport& exec,
                          const LoadedOutput& output);
ValidationReport validate_dir(const tasks::TaskSpec& task, const sandbox::ExecutionReport& exec,
                              const std::string& output_dir);

}  // namespace pdedev::oracle
