#include "fovkit/evalharness.hpp"

#include "fovkit/bodydetect.hpp"
#include "fovkit/fg01.hpp"
#include "fovkit/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace fovkit::eval {

using nlohmann::json;

double rmse(const std::vector<double>& truth, const std::vector<double>& pred) {
  if (truth.empty() || truth.size() != pred.size()) {
    throw Error(ErrorKind::Config, "rmse needs non-empty paired vectors");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - pred[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw Error(ErrorKind::Shape, "dice masks have mismatched dimensions");
  }
  const long na = a.count();
  const long nb = b.count();
  if (na + nb == 0) return 1.0;
  const long inter = (a.bits && b.bits).count();
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

SummaryStats summarize_differences(const std::vector<double>& differences) {
  if (differences.empty()) {
    throw Error(ErrorKind::Config, "summarize_differences needs a non-empty set");
  }
  std::vector<double> sorted = differences;
  std::sort(sorted.begin(), sorted.end());
  SummaryStats s;
  s.median = quantile_sorted(sorted, 0.5);
  s.q1 = quantile_sorted(sorted, 0.25);
  s.q3 = quantile_sorted(sorted, 0.75);
  s.iqr = s.q3 - s.q1;
  s.mean = std::accumulate(sorted.begin(), sorted.end(), 0.0) /
           static_cast<double>(sorted.size());
  return s;
}

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& differences) {
  std::vector<double> nonzero;
  for (double d : differences) {
    if (d != 0.0) nonzero.push_back(d);
  }
  if (nonzero.empty()) {
    throw Error(ErrorKind::Degenerate, "all differences are zero");
  }
  const int n = static_cast<int>(nonzero.size());
  if (n < 5) {
    throw Error(ErrorKind::Config, "wilcoxon needs n >= 5 after dropping zeros");
  }

  // Mid-ranks of |d|.
  std::vector<int> order(nonzero.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return std::abs(nonzero[a]) < std::abs(nonzero[b]);
  });
  std::vector<double> ranks(nonzero.size());
  std::vector<int> tie_sizes;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() &&
           std::abs(nonzero[order[j]]) == std::abs(nonzero[order[i]])) {
      ++j;
    }
    const double mid = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = mid;
    tie_sizes.push_back(static_cast<int>(j - i));
    i = j;
  }

  WilcoxonResult r;
  r.n = n;
  for (std::size_t i = 0; i < nonzero.size(); ++i) {
    if (nonzero[i] > 0.0) {
      r.w_plus += ranks[i];
    } else {
      r.w_minus += ranks[i];
    }
  }
  r.w = std::min(r.w_plus, r.w_minus);

  if (n <= 20) {
    // Exact two-sided p: fraction of sign assignments whose min(W+, W-) does
    // not exceed the observed one.
    const double total = r.w_plus + r.w_minus;
    const std::uint64_t count = 1ULL << n;
    std::uint64_t hits = 0;
    for (std::uint64_t bits = 0; bits < count; ++bits) {
      double w_plus = 0.0;
      for (int i = 0; i < n; ++i) {
        if (bits & (1ULL << i)) w_plus += ranks[static_cast<std::size_t>(i)];
      }
      if (std::min(w_plus, total - w_plus) <= r.w + 1e-9) ++hits;
    }
    r.p = static_cast<double>(hits) / static_cast<double>(count);
  } else {
    const double nd = n;
    const double mu = nd * (nd + 1.0) / 4.0;
    double tie_term = 0.0;
    for (int t : tie_sizes) {
      tie_term += static_cast<double>(t) * t * t - t;
    }
    const double var = nd * (nd + 1.0) * (2.0 * nd + 1.0) / 24.0 - tie_term / 48.0;
    if (var <= 0.0) {
      throw Error(ErrorKind::Degenerate, "wilcoxon variance is zero (all values tied)");
    }
    const double z = (r.w - mu) / std::sqrt(var);
    r.p = std::min(1.0, 2.0 * 0.5 * std::erfc(-z / std::sqrt(2.0)));
  }
  return r;
}

const MethodResult& method_of(const EvalRecord& rec, const std::string& method) {
  if (method == "truncated") return rec.truncated;
  if (method == "si") return rec.si;
  if (method == "mi") return rec.mi;
  throw Error(ErrorKind::Config, "unknown method '" + method + "'");
}

namespace {

struct TissueMasks {
  BinaryMask muscle;
  BinaryMask sat;
};

TissueMasks masks_of(const phantom::LabelMap& labels) {
  return {phantom::tissue_mask(labels, phantom::kMuscle),
          phantom::tissue_mask(labels, phantom::kSat)};
}

MethodResult score_method(const phantom::LabelMap& labels, const TissueMasks& truth_masks,
                          const bodycomp::BodyCompMeasurement& pred) {
  const TissueMasks masks = masks_of(labels);
  MethodResult r;
  r.pred = pred;
  r.dice_muscle = dice(masks.muscle, truth_masks.muscle);
  r.dice_sat = dice(masks.sat, truth_masks.sat);
  return r;
}

}  // namespace

namespace {

EvalRecord evaluate_one(const fovsim::SimRecord& rec, bodycomp::RecoverModels& models, int n,
                        std::uint64_t record_seed, const bodycomp::RecoverConfig& config) {
  const NormalizedSlice truncated = io::load_normalized(rec.truncated);
  const NormalizedSlice untruncated = io::load_normalized(rec.untruncated);

  bodycomp::RecoverResult rr =
      bodycomp::recover_slice(models, truncated, rec.fov_spec, n, record_seed, config);

  // Score everything in the recovered frame: zoom the ground truth with the
  // same transform the pipeline applied.
  const NormalizedSlice truth_zoomed =
      zoom_out(untruncated, rr.predicted_bbox, config.sim.margin, config.sim.sentinel).slice;
  const BinaryMask truth_body =
      bodydetect::identify_body_mask(truth_zoomed, config.sim.body_threshold);
  const phantom::LabelMap truth_labels =
      bodycomp::segment_tissues(truth_zoomed, truth_body, config.seg);
  const TissueMasks truth_masks = masks_of(truth_labels);

  EvalRecord er;
  er.id = rec.id;
  er.level_class = rec.level_class;
  er.truth = bodycomp::measure(truth_labels, rr.effective_spacing);

  auto segment_candidate = [&](const NormalizedSlice& slice) {
    const BinaryMask body = bodydetect::identify_body_mask(slice, config.sim.body_threshold);
    return bodycomp::segment_tissues(slice, body, config.seg);
  };

  const phantom::LabelMap trunc_labels = segment_candidate(rr.zoom.slice);
  er.truncated = score_method(trunc_labels, truth_masks,
                              bodycomp::measure(trunc_labels, rr.effective_spacing));

  const phantom::LabelMap si_labels = segment_candidate(rr.candidates.front());
  er.si = score_method(si_labels, truth_masks, rr.measurements.front());

  const phantom::LabelMap mi_labels = segment_candidate(rr.selected);
  er.mi = score_method(
      mi_labels, truth_masks,
      rr.measurements[static_cast<std::size_t>(rr.selection.selected_index)]);
  return er;
}

}  // namespace

std::vector<EvalRecord> run_evaluation(const std::vector<fovsim::SimRecord>& records,
                                       bodycomp::RecoverModels& models, int n,
                                       std::uint64_t seed,
                                       const bodycomp::RecoverConfig& config, int jobs) {
  std::vector<EvalRecord> out(records.size());
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const int workers = std::max(
      1, std::min<int>(jobs <= 0 ? static_cast<int>(hw) : jobs,
                       static_cast<int>(records.size() == 0 ? 1 : records.size())));

  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&](std::size_t begin, std::size_t end) {
    bodycomp::RecoverModels local = models;  // nets keep forward scratch, one copy per worker
    for (std::size_t i = begin; i < end; ++i) {
      try {
        out[i] = evaluate_one(records[i], local, n,
                              derive_seed(seed, static_cast<std::uint64_t>(i)), config);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  if (workers <= 1) {
    worker(0, records.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (records.size() + workers - 1) / workers;
    for (int t = 0; t < workers; ++t) {
      const std::size_t begin = static_cast<std::size_t>(t) * chunk;
      const std::size_t end = std::min(records.size(), begin + chunk);
      if (begin >= end) break;
      pool.emplace_back(worker, begin, end);
    }
    for (auto& th : pool) th.join();
  }
  if (first_error) std::rethrow_exception(first_error);
  return out;
}

namespace {

json aggregate_group(const std::vector<const EvalRecord*>& group, const std::string& method) {
  std::vector<double> muscle_truth, muscle_pred, sat_truth, sat_pred;
  std::vector<double> dice_muscle, dice_sat, diff_muscle, diff_sat;
  for (const EvalRecord* rec : group) {
    const MethodResult& m = method_of(*rec, method);
    muscle_truth.push_back(rec->truth.muscle_cm2);
    muscle_pred.push_back(m.pred.muscle_cm2);
    sat_truth.push_back(rec->truth.sat_cm2);
    sat_pred.push_back(m.pred.sat_cm2);
    dice_muscle.push_back(m.dice_muscle);
    dice_sat.push_back(m.dice_sat);
    diff_muscle.push_back(rec->truth.muscle_cm2 - m.pred.muscle_cm2);
    diff_sat.push_back(rec->truth.sat_cm2 - m.pred.sat_cm2);
  }

  auto stats_json = [](const SummaryStats& s) {
    return json{{"median", s.median}, {"q1", s.q1}, {"q3", s.q3}, {"iqr", s.iqr},
                {"mean", s.mean}};
  };
  auto wilcoxon_json = [](const std::vector<double>& diffs) -> json {
    try {
      const WilcoxonResult w = wilcoxon_signed_rank(diffs);
      return json{{"w", w.w}, {"p", w.p}, {"n", w.n}};
    } catch (const Error&) {
      return json{{"w", nullptr}, {"p", nullptr}, {"n", 0}};
    }
  };

  json j;
  j["count"] = group.size();
  j["rmse_muscle"] = rmse(muscle_truth, muscle_pred);
  j["rmse_sat"] = rmse(sat_truth, sat_pred);
  j["dice_muscle_mean"] =
      std::accumulate(dice_muscle.begin(), dice_muscle.end(), 0.0) / dice_muscle.size();
  j["dice_sat_mean"] =
      std::accumulate(dice_sat.begin(), dice_sat.end(), 0.0) / dice_sat.size();
  j["stats"] = {{"muscle", stats_json(summarize_differences(diff_muscle))},
                {"sat", stats_json(summarize_differences(diff_sat))}};
  j["wilcoxon"] = {{"muscle", wilcoxon_json(diff_muscle)}, {"sat", wilcoxon_json(diff_sat)}};
  return j;
}

}  // namespace

json aggregate_report(const std::vector<EvalRecord>& records) {
  if (records.empty()) {
    throw Error(ErrorKind::Config, "no evaluation records to aggregate");
  }
  std::vector<std::string> levels = {"L5", "L8", "L10"};
  json report;
  for (const std::string& method : method_names()) {
    json per_level;
    std::vector<const EvalRecord*> all;
    for (const auto& rec : records) all.push_back(&rec);
    per_level["overall"] = aggregate_group(all, method);
    for (const std::string& level : levels) {
      std::vector<const EvalRecord*> group;
      for (const auto& rec : records) {
        if (rec.level_class == level) group.push_back(&rec);
      }
      if (!group.empty()) {
        per_level[level] = aggregate_group(group, method);
      }
    }
    report[method] = per_level;
  }
  return report;
}

void write_report(const std::filesystem::path& out_dir,
                  const std::vector<EvalRecord>& records) {
  std::filesystem::create_directories(out_dir);
  std::ofstream csv(out_dir / "report.csv");
  if (!csv) {
    throw Error(ErrorKind::Io, "cannot open report.csv for writing");
  }
  csv << "id,level_class,method,muscle_truth,muscle_pred,sat_truth,sat_pred,"
         "dice_muscle,dice_sat\n";
  char line[512];
  for (const auto& rec : records) {
    for (const std::string& method : method_names()) {
      const MethodResult& m = method_of(rec, method);
      std::snprintf(line, sizeof(line), "%s,%s,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                    rec.id.c_str(), rec.level_class.c_str(), method.c_str(),
                    rec.truth.muscle_cm2, m.pred.muscle_cm2, rec.truth.sat_cm2, m.pred.sat_cm2,
                    m.dice_muscle, m.dice_sat);
      csv << line;
    }
  }
  csv.close();

  std::ofstream js(out_dir / "report.json");
  if (!js) {
    throw Error(ErrorKind::Io, "cannot open report.json for writing");
  }
  js << aggregate_report(records).dump(2) << "\n";
}

}  // namespace fovkit::eval
