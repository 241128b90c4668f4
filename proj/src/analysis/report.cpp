#include "failsearch/analysis.hpp"
#include "failsearch/error.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace failsearch::analysis {

using nlohmann::json;

namespace {

struct Pooled {
  Matrix points;
  // Per approach, per repetition: rows of `points`.
  std::vector<std::vector<std::vector<std::size_t>>> rows;
};

template <class Get>
Pooled pool(std::span<const ApproachData> approaches, Get get_rows) {
  Pooled p;
  std::vector<std::vector<double>> flat;
  for (const auto& a : approaches) {
    auto& per_rep = p.rows.emplace_back();
    for (const auto& rep : a.repetitions) {
      auto& idx = per_rep.emplace_back();
      for (auto& row : get_rows(rep)) {
        idx.push_back(flat.size());
        flat.push_back(std::move(row));
      }
    }
  }
  if (flat.empty()) return p;
  p.points = Matrix(flat.size(), flat.front().size());
  for (std::size_t i = 0; i < flat.size(); ++i) {
    if (flat[i].size() != p.points.cols) throw ValidationError("failure vectors differ in width");
    std::copy(flat[i].begin(), flat[i].end(), p.points.row(i).begin());
  }
  return p;
}

json optional_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json metric_json(const std::vector<double>& runs) {
  if (runs.empty()) return nullptr;
  return {{"mean", optional_number(ApproachSummary::mean(runs))}, {"runs", runs}};
}

std::vector<double> metric_from(const json& j) {
  if (j.is_null()) return {};
  return j.at("runs").get<std::vector<double>>();
}

const std::vector<double>& metric_of(const ApproachSummary& s, const std::string& name) {
  if (name == "failures") return s.failures;
  if (name == "input_coverage") return s.input_coverage;
  if (name == "input_entropy") return s.input_entropy;
  if (name == "output_coverage") return s.output_coverage;
  return s.output_entropy;
}

}  // namespace

double ApproachSummary::mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

DiversityReport build_diversity_report(std::span<const ApproachData> approaches, std::uint64_t seed,
                                       const ReportOptions& options) {
  if (approaches.empty()) throw ValidationError("diversity report needs at least one approach");
  if (options.clustering_runs < 1) throw ValidationError("clustering runs must be at least 1");
  DiversityReport report;
  report.clustering_runs = options.clustering_runs;

  std::size_t total = 0;
  for (const auto& a : approaches) {
    auto& s = report.approaches.emplace_back();
    s.name = a.name;
    for (const auto& rep : a.repetitions) {
      if (rep.inputs.size() != rep.outputs.size())
        throw ValidationError("approach '" + a.name + "': failing inputs and outputs differ in count");
      s.failures.push_back(static_cast<double>(rep.inputs.size()));
      total += rep.inputs.size();
    }
  }
  report.diversity_available = total >= 2;

  if (report.diversity_available) {
    const auto inputs = pool(approaches, [](const RepetitionFailures& r) { return r.inputs; });
    // Trajectories are padded across the whole pool; row i matches input row i.
    std::vector<exec::Trajectory> all_traj;
    for (const auto& a : approaches)
      for (const auto& rep : a.repetitions) all_traj.insert(all_traj.end(), rep.outputs.begin(), rep.outputs.end());
    const Matrix output_points = pad_trajectories(all_traj);

    const int runs = options.clustering_runs;
    std::vector<ClusterModel> in_models(static_cast<std::size_t>(runs)), out_models(static_cast<std::size_t>(runs));
    std::exception_ptr error;
#pragma omp parallel for schedule(dynamic, 1)
    for (int c = 0; c < runs; ++c) {
      try {
        const auto run_seed = derive_seed(seed, static_cast<std::uint64_t>(c));
        Rng in_rng = derive_rng(run_seed, 0), out_rng = derive_rng(run_seed, 1);
        in_models[static_cast<std::size_t>(c)] = select_k(inputs.points, in_rng, options.select);
        out_models[static_cast<std::size_t>(c)] = select_k(output_points, out_rng, options.select);
      } catch (...) {
#pragma omp critical
        if (!error) error = std::current_exception();
      }
    }
    if (error) std::rethrow_exception(error);
    for (int c = 0; c < runs; ++c) {
      report.input_k_star.push_back(in_models[static_cast<std::size_t>(c)].k_star);
      report.output_k_star.push_back(out_models[static_cast<std::size_t>(c)].k_star);
    }

    for (std::size_t a = 0; a < approaches.size(); ++a) {
      auto& s = report.approaches[a];
      for (std::size_t r = 0; r < approaches[a].repetitions.size(); ++r) {
        const auto& rows = inputs.rows[a][r];
        double ic = 0, ie = 0, oc = 0, oe = 0;
        if (!rows.empty()) {
          for (int c = 0; c < runs; ++c) {
            const auto& im = in_models[static_cast<std::size_t>(c)];
            const auto& om = out_models[static_cast<std::size_t>(c)];
            ic += coverage(im, rows);
            ie += entropy_normalized(im, rows);
            oc += coverage(om, rows);
            oe += entropy_normalized(om, rows);
          }
        }
        s.input_coverage.push_back(ic / runs);
        s.input_entropy.push_back(ie / runs);
        s.output_coverage.push_back(oc / runs);
        s.output_entropy.push_back(oe / runs);
      }
    }
  }

  for (std::size_t i = 0; i < report.approaches.size(); ++i) {
    for (std::size_t j = i + 1; j < report.approaches.size(); ++j) {
      for (const auto& metric : metric_names()) {
        PairwiseComparison cmp{report.approaches[i].name, report.approaches[j].name, metric, {}, {}};
        const auto& x = metric_of(report.approaches[i], metric);
        const auto& y = metric_of(report.approaches[j], metric);
        if (x.size() >= 2 && y.size() >= 2) {
          cmp.p_value = mann_whitney_u(x, y).p_value;
          cmp.a12 = vargha_delaney_a12(x, y);
        }
        report.pairwise.push_back(std::move(cmp));
      }
    }
  }
  return report;
}

json DiversityReport::to_json() const {
  json arr = json::array();
  for (const auto& a : approaches) {
    json j = {{"name", a.name}, {"repetitions", a.failures.size()}};
    for (const auto& m : metric_names()) j[m] = metric_json(metric_of(a, m));
    arr.push_back(std::move(j));
  }
  json pw = json::array();
  for (const auto& p : pairwise) {
    json j = {{"first", p.first}, {"second", p.second}, {"metric", p.metric}};
    j["p_value"] = p.p_value ? json(*p.p_value) : json(nullptr);
    j["a12"] = p.a12 ? json(*p.a12) : json(nullptr);
    j["effect"] = p.a12 ? json(to_string(effect_size(*p.a12))) : json(nullptr);
    pw.push_back(std::move(j));
  }
  return {{"clustering_runs", clustering_runs},
          {"diversity_available", diversity_available},
          {"input_k_star", input_k_star},
          {"output_k_star", output_k_star},
          {"approaches", std::move(arr)},
          {"pairwise", std::move(pw)}};
}

DiversityReport DiversityReport::from_json(const json& doc) {
  try {
    DiversityReport r;
    r.clustering_runs = doc.at("clustering_runs").get<int>();
    r.diversity_available = doc.at("diversity_available").get<bool>();
    r.input_k_star = doc.at("input_k_star").get<std::vector<int>>();
    r.output_k_star = doc.at("output_k_star").get<std::vector<int>>();
    for (const auto& j : doc.at("approaches")) {
      ApproachSummary s;
      s.name = j.at("name").get<std::string>();
      s.failures = metric_from(j.at("failures"));
      s.input_coverage = metric_from(j.at("input_coverage"));
      s.input_entropy = metric_from(j.at("input_entropy"));
      s.output_coverage = metric_from(j.at("output_coverage"));
      s.output_entropy = metric_from(j.at("output_entropy"));
      r.approaches.push_back(std::move(s));
    }
    for (const auto& j : doc.at("pairwise")) {
      PairwiseComparison p{j.at("first").get<std::string>(), j.at("second").get<std::string>(),
                           j.at("metric").get<std::string>(), {}, {}};
      if (!j.at("p_value").is_null()) p.p_value = j.at("p_value").get<double>();
      if (!j.at("a12").is_null()) p.a12 = j.at("a12").get<double>();
      r.pairwise.push_back(std::move(p));
    }
    return r;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed diversity report: ") + e.what());
  }
}

std::string DiversityReport::to_csv() const {
  std::ostringstream out;
  out << "approach";
  for (const auto& m : metric_names()) out << ',' << m;
  out << '\n';
  char buf[32];
  for (const auto& a : approaches) {
    out << a.name;
    for (const auto& m : metric_names()) {
      const double v = ApproachSummary::mean(metric_of(a, m));
      if (std::isfinite(v)) {
        std::snprintf(buf, sizeof buf, m == "failures" ? "%.2f" : "%.4f", v);
        out << ',' << buf;
      } else {
        out << ",NA";
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace failsearch::analysis
