#pragma once

#include "fovkit/bodycomp.hpp"
#include "fovkit/fovsim.hpp"
#include "fovkit/image.hpp"
#include "fovkit/phantom.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace fovkit::eval {

// sqrt(mean((truth - pred)^2)) over paired areas.
double rmse(const std::vector<double>& truth, const std::vector<double>& pred);

// 2|A∩B| / (|A|+|B|); defined as 1 when both masks are empty.
double dice(const BinaryMask& a, const BinaryMask& b);

struct SummaryStats {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double iqr = 0.0;
  double mean = 0.0;
};

// Quartiles by linear interpolation between order statistics.
SummaryStats summarize_differences(const std::vector<double>& differences);

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double w = 0.0;  // min(w_plus, w_minus)
  double p = 1.0;  // two-sided
  int n = 0;       // after dropping zero differences
};

// Signed-rank test with mid-rank ties. Exact p by enumerating all 2^n sign
// assignments for n <= 20, tie-corrected normal approximation above.
WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences);

struct MethodResult {
  bodycomp::BodyCompMeasurement pred;
  double dice_muscle = 0.0;
  double dice_sat = 0.0;
};

struct EvalRecord {
  std::string id;
  std::string level_class;
  bodycomp::BodyCompMeasurement truth;
  MethodResult truncated;
  MethodResult si;
  MethodResult mi;
};

inline const std::vector<std::string>& method_names() {
  static const std::vector<std::string> names = {"truncated", "si", "mi"};
  return names;
}

const MethodResult& method_of(const EvalRecord& rec, const std::string& method);

// Runs the recovery pipeline over every manifest row; SI is candidate 0 of
// the same n-candidate run, MI the median-selected candidate. Deterministic
// per seed.
std::vector<EvalRecord> run_evaluation(const std::vector<fovsim::SimRecord>& records,
                                       bodycomp::RecoverModels& models, int n,
                                       std::uint64_t seed,
                                       const bodycomp::RecoverConfig& config, int jobs = 1);

// {method -> level -> {rmse, dice means, difference stats, wilcoxon}}.
// Levels are the phantom classes plus "overall".
nlohmann::json aggregate_report(const std::vector<EvalRecord>& records);

// report.csv (one row per record and method) + report.json.
void write_report(const std::filesystem::path& out_dir, const std::vector<EvalRecord>& records);

}  // namespace fovkit::eval
