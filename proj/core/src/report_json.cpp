#include "promix/report_json.hpp"

#include <cstdio>

namespace promix {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(value));
  return buf;
}

std::string canonical_dump(const Json& value) { return value.dump(2) + "\n"; }

std::string config_hash(const Json& config) { return hex64(fnv1a64(canonical_dump(config))); }

namespace {

std::string fixed2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

Json metrics_list(const std::vector<SplitMetrics>& runs) {
  auto out = Json::array();
  for (const auto& m : runs) out.push_back(to_json(m));
  return out;
}

Json curve(const std::vector<SubsetAccuracy>& points) {
  auto out = Json::array();
  for (const auto& p : points) out.push_back(to_json(p));
  return out;
}

}  // namespace

Json to_json(const SplitMetrics& m) {
  return {{"base", m.base}, {"new", m.novel}, {"h", m.h}};
}

Json to_json(const LossConfig& loss) {
  return {{"kind", std::string(to_string(loss.kind))},
          {"w", loss.w},
          {"gamma", loss.gamma},
          {"q", loss.q}};
}

Json to_json(const MixtureWeightSummary& w) {
  return {{"pi_in", w.pi_in},
          {"pi_out", w.pi_out},
          {"in_monotone", w.in_monotone},
          {"out_monotone", w.out_monotone},
          {"out_skipped", w.out_skipped}};
}

Json to_json(const TTestOutcome& outcome) {
  Json j{{"degenerate", outcome.degenerate}, {"significant", outcome.significant}};
  if (outcome.result) {
    j["t"] = outcome.result->t;
    j["p"] = outcome.result->p;
    j["n"] = outcome.result->n;
  } else {
    j["t"] = nullptr;
    j["p"] = nullptr;
  }
  return j;
}

Json to_json(const SubsetAccuracy& acc) {
  return {{"easy", acc.easy}, {"confusing", acc.confusing}, {"hard", acc.hard}, {"all", acc.all}};
}

Json to_json(const CategoryCounts& counts) {
  return {{"easy", counts.easy}, {"confusing", counts.confusing}, {"hard", counts.hard}};
}

Json to_json(const WeightFitResult& fit) {
  auto prompts = Json::array();
  for (std::size_t i = 1; i <= fit.weights.prompt_count(); ++i) {
    prompts.push_back({{"pi_in", fit.weights.pi_in(i)}, {"pi_out", fit.weights.pi_out(i)}});
  }
  return {{"prompts", prompts},
          {"trace", fit.trace},
          {"monotone", fit.monotone},
          {"skipped", fit.skipped},
          {"learning_rate", fit.learning_rate}};
}

Json to_json(const BaseToNewReport& report) {
  Json configs = Json::object();
  for (const auto& c : report.configurations) {
    configs[c.name] = {{"mean", to_json(c.mean)}, {"per_seed", metrics_list(c.per_seed)}};
  }
  auto weights = Json::array();
  for (const auto& w : report.cocoa_weights) weights.push_back(to_json(w));
  Json j{{"seeds", report.seeds},
         {"configurations", configs},
         {"head_ce", to_json(report.head_ce)},
         {"head_coa", to_json(report.head_coa)},
         {"cocoa_weights", weights}};
  if (report.parameterizations) {
    const auto& p = *report.parameterizations;
    j["parameterizations"] = {{"one_stage", to_json(p.one_stage)},
                              {"two_stage", to_json(p.two_stage)},
                              {"h_difference", p.h_difference}};
  }
  return j;
}

Json to_json(const FscilReport& report) {
  auto weights = Json::array();
  for (const auto& w : report.weights) weights.push_back(to_json(w));
  return {{"session_accuracy", report.session_accuracy},
          {"zero_shot_accuracy", report.zero_shot_accuracy},
          {"mean", report.mean},
          {"pd", report.pd},
          {"retention_mixture", report.retention_mixture},
          {"retention_zero_shot", report.retention_zero_shot},
          {"weights", weights}};
}

Json to_json(const AssumptionReport& report) {
  return {{"in_domain_gaps", report.in_domain_gaps},
          {"out_domain_gaps", report.out_domain_gaps},
          {"in_domain", to_json(report.in_domain)},
          {"out_domain", to_json(report.out_domain)},
          {"validated", report.validated}};
}

Json to_json(const ConfusingGainReport& report) {
  return {{"counts", to_json(report.counts)},
          {"baseline_curve", curve(report.baseline_curve)},
          {"coa_curve", curve(report.coa_curve)},
          {"baseline_final", to_json(report.baseline_final)},
          {"coa_final", to_json(report.coa_final)},
          {"delta", to_json(report.delta)}};
}

Json to_json(const BoundSweepReport& report) {
  return {{"trials", report.trials},
          {"min_gap", report.min_gap},
          {"max_gap", report.max_gap},
          {"mean_gap", report.mean_gap},
          {"violations", report.violations},
          {"identical_heads_gap", report.identical_heads_gap}};
}

Json to_json(const std::vector<LossZooRow>& rows) {
  auto out = Json::array();
  for (const auto& row : rows) {
    out.push_back({{"loss", to_json(row.loss)}, {"metrics", to_json(row.metrics)}});
  }
  return out;
}

std::string base_to_new_csv(const BaseToNewReport& report) {
  std::string out = "Method,Base,New,H\n";
  for (const auto& c : report.configurations) {
    out += c.name + "," + fixed2(c.mean.base) + "," + fixed2(c.mean.novel) + "," +
           fixed2(c.mean.h) + "\n";
  }
  return out;
}

std::string fscil_csv(const FscilReport& report) {
  std::string out = "Method";
  for (std::size_t i = 0; i < report.session_accuracy.size(); ++i) {
    out += ",S" + std::to_string(i + 1);
  }
  out += ",Mean,PD\n";
  auto row = [&](const std::string& name, const std::vector<double>& acc) {
    out += name;
    double sum = 0.0;
    for (double a : acc) {
      out += "," + fixed2(a);
      sum += a;
    }
    const double mean = acc.empty() ? 0.0 : sum / static_cast<double>(acc.size());
    const double pd = acc.empty() ? 0.0 : acc.front() - acc.back();
    out += "," + fixed2(mean) + "," + fixed2(pd) + "\n";
  };
  row("zero_shot", report.zero_shot_accuracy);
  row("cocoa_mix", report.session_accuracy);
  return out;
}

std::string loss_zoo_csv(const std::vector<LossZooRow>& rows) {
  std::string out = "Loss,Base,New,H\n";
  for (const auto& r : rows) {
    out += std::string(to_string(r.loss.kind)) + "," + fixed2(r.metrics.base) + "," +
           fixed2(r.metrics.novel) + "," + fixed2(r.metrics.h) + "\n";
  }
  return out;
}

std::string confusing_curve_csv(const ConfusingGainReport& report) {
  std::string out = "run,epoch,easy,confusing,hard,all\n";
  auto emit = [&](const char* run, const std::vector<SubsetAccuracy>& points) {
    for (std::size_t e = 0; e < points.size(); ++e) {
      const auto& p = points[e];
      out += std::string(run) + "," + std::to_string(e + 1) + "," + fixed2(p.easy) + "," +
             fixed2(p.confusing) + "," + fixed2(p.hard) + "," + fixed2(p.all) + "\n";
    }
  };
  emit("baseline", report.baseline_curve);
  emit("coa", report.coa_curve);
  return out;
}

}  // namespace promix
