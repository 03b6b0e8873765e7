// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cli.hpp"
#include "promix/embedding_io.hpp"
#include "promix/harness.hpp"
#include "promix/losses.hpp"
#include "promix/mixture.hpp"
#include "promix/stats.hpp"
#include "promix/train.hpp"
#include "test_support.hpp"

namespace promix {
namespace {

using testing::Gen;

constexpr double kStep = 1e-5;
constexpr int kInstances = 100;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

std::size_t jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

// Scalar relative error with a floor so values near zero compare absolutely.
double scalar_rel(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

// ---------------------------------------------------------------------------

double prompt_loss_oracle(std::span<const double> s, std::size_t y, double tau, double w) {
  const auto p = testing::softmax_oracle(s, tau);
  return testing::nll_oracle(s, y, tau) + w * (1.0 - p[y]);
}

Outcome gradient_oracles() {
  Gen gen(1);
  double worst_sims = 0.0, worst_ctx = 0.0, worst_pi = 0.0, worst_ent = 0.0;

  for (int i = 0; i < kInstances; ++i) {
    const auto s = gen.similarities(gen.index(2, 20));
    const std::size_t y = gen.index(0, s.size() - 1);
    const double tau = gen.uniform(0.5, 2.0), w = gen.uniform(0.0, 10.0);
    const auto g = grad_prompt_loss(s, y, tau, w);
    const auto fd = testing::central_difference(
        [&](std::span<const double> v) { return prompt_loss_oracle(v, y, tau, w); },
        std::vector<double>(s.begin(), s.end()), kStep);
    worst_sims = std::max(worst_sims, testing::relative_error(g, fd));
  }

  for (int i = 0; i < kInstances; ++i) {
    const std::size_t classes = gen.index(2, 8), dim = gen.index(2, 12), m = gen.index(1, 4);
    const auto head = gen.head(classes, dim, m, gen.uniform(0.1, 0.8));
    const auto set = gen.clustered_set(head.anchors(), gen.index(1, 3), gen.uniform(0.2, 1.0));
    const double tau = gen.uniform(0.5, 2.0), w = gen.uniform(0.0, 10.0);
    const LossConfig loss{.kind = LossKind::kCEPlusCoA, .w = w};
    const auto all = all_classes(classes);
    const auto obj = prompt_objective(head, set.samples(), all, loss, tau);
    for (std::size_t row = 0; row < m; ++row) {
      auto f = [&](std::span<const double> v) {
        auto ctx = head.context();
        ctx[row].assign(v.begin(), v.end());
        const PromptHead h(head.anchors(), head.class_names(), ctx);
        double total = 0.0;
        for (const auto& smp : set) {
          total += prompt_loss_oracle(testing::similarities_oracle(h, smp.embedding), smp.label,
                                      tau, w);
        }
        return total / static_cast<double>(set.size());
      };
      const auto fd = testing::central_difference(f, head.context()[row], kStep);
      worst_ctx = std::max(worst_ctx, testing::relative_error(obj.context_gradient[row], fd));
    }
  }

  for (int i = 0; i < kInstances; ++i) {
    const std::size_t k = gen.index(2, 4), classes = gen.index(2, 10), dim = gen.index(3, 12);
    std::vector<PromptHead> heads;
    for (std::size_t h = 0; h < k; ++h) heads.push_back(gen.head(classes, dim, gen.index(0, 2)));
    const auto pi = gen.simplex(k);
    const double tau = gen.uniform(0.5, 2.0);
    const auto x = gen.unit(dim);
    const ClassId y = gen.index(0, classes - 1);
    const std::size_t prompt = gen.index(0, k - 1);
    std::vector<std::vector<double>> sims;
    for (const auto& h : heads) sims.push_back(testing::similarities_oracle(h, x));
    auto f = [&](double v) {
      std::vector<double> z(classes, 0.0);
      for (std::size_t h = 0; h < k; ++h) {
        for (std::size_t l = 0; l < classes; ++l) z[l] += (h == prompt ? v : pi[h]) * sims[h][l];
      }
      return testing::nll_oracle(z, y, tau);
    };
    worst_pi = std::max(worst_pi, scalar_rel(mixture_ce_grad_wrt_weight(heads, pi, tau, x, y, prompt),
                                             testing::central_difference_1d(f, pi[prompt], kStep)));
  }

  int done = 0;
  while (done < kInstances) {
    const std::size_t dim = gen.index(4, 12), anchors = gen.index(2, 10);
    const double tau = gen.uniform(0.1, 1.0), alpha = gen.uniform(-3.0, 3.0);
    const double margin = gen.uniform(0.0, 1.0), ent_weight = gen.uniform(0.5, 10.0);
    const auto weights = MixtureWeights::two_stage({{0.0, alpha}}, tau);
    MixtureModel model{{gen.head(4, dim, 0), gen.head(4, dim, 2, 1.0)}, weights,
                       DomainPartition({{0, 1}, {2, 3}}, 4)};
    const auto images = gen.labeled_set(4, dim, gen.index(1, 6));
    const auto outs = gen.units(anchors, dim);
    const OutWeightObjective obj(model, 1, images, outs, margin, ent_weight);
    bool near_kink = false;
    for (std::size_t i = 0; i < images.size(); ++i) {
      const double arg = obj.generalized_entropy(i) - obj.specialized_entropy(weights, i) + margin;
      near_kink = near_kink || std::abs(arg) < 1e-3;
    }
    if (near_kink) continue;
    const auto special = model.heads[1].with_anchors(outs, gen.names(anchors));
    auto value = [&](double pi) {
      double total = 0.0;
      for (std::size_t i = 0; i < images.size(); ++i) {
        auto s = testing::similarities_oracle(special, images[i].embedding);
        const auto p = testing::softmax_oracle(s, tau / pi);
        double h = 0.0;
        for (double v : p) h -= v > 0.0 ? v * std::log(v) : 0.0;
        h /= std::log(static_cast<double>(anchors));
        total += std::max(0.0, obj.generalized_entropy(i) - h + margin);
      }
      return ent_weight * total / static_cast<double>(images.size());
    };
    const double pi = 1.0 / (1.0 + std::exp(-alpha));
    // dL/dpi_out = (dL/dalpha) / (pi (1 - pi)).
    const double analytic = obj.gradient(weights) / (pi * (1.0 - pi));
    worst_ent = std::max(worst_ent,
                         scalar_rel(analytic, testing::central_difference_1d(value, pi, kStep)));
    ++done;
  }

  const double worst = std::max({worst_sims, worst_ctx, worst_pi, worst_ent});
  return {worst < 1e-6,
          fmt("max rel err: similarities %.2e, context %.2e, mixture pi %.2e, entropy pi_out %.2e",
              worst_sims, worst_ctx, worst_pi, worst_ent)};
}

Outcome shift_invariance() {
  Gen gen(2);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto s = gen.similarities(gen.index(2, 50));
    const auto g = grad_prompt_loss(s, gen.index(0, s.size() - 1),
                                    gen.pick(std::vector<double>{0.01, 0.1, 1.0}),
                                    gen.uniform(0.0, 10.0));
    double total = 0.0;
    for (double v : g) total += v;
    worst = std::max(worst, std::abs(total));
  }
  return {worst <= 1e-10, fmt("max |sum of gradient| = %.2e over 1000 instances", worst)};
}

Outcome bound_sweep_check() {
  const auto r = bound_sweep(BoundSweepConfig{});
  return {r.violations == 0 && r.min_gap >= -1e-12 && r.identical_heads_gap == 0.0,
          fmt("%.0f trials, min gap %.4g, violations %.0f, identical-heads gap %.1f",
              static_cast<double>(r.trials), r.min_gap, static_cast<double>(r.violations),
              r.identical_heads_gap)};
}

Outcome decomposition_identity() {
  Gen gen(4);
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = gen.index(3, 20), k = gen.index(1, std::min<std::size_t>(n - 1, 4));
    const std::size_t dim = gen.index(2, 16);
    std::vector<PromptHead> heads;
    for (std::size_t h = 0; h <= k; ++h) heads.push_back(gen.head(n, dim, gen.index(0, 3)));
    std::vector<PromptWeightParams> a(k);
    for (auto& x : a) x = {gen.gaussian(), gen.gaussian()};
    MixtureModel model{heads, MixtureWeights::two_stage(a), DomainPartition(gen.cover(n, k + 1), n)};
    const auto set = gen.clustered_set(heads[0].anchors(), gen.index(1, 5), gen.uniform(0.1, 1.5));
    const auto d = decompose_error(model, set);
    // Brute-force expected error from the mixture logits.
    const auto all = all_classes(n);
    double total = 0.0;
    for (const auto& s : set) total += testing::nll_oracle(mixture_logits(model, s.embedding, all), s.label, 1.0);
    total /= static_cast<double>(set.size());
    worst = std::max(worst, std::abs(d.total - total));
  }
  return {worst <= 1e-12, fmt("max |decomposed - expected| = %.2e over 100 datasets", worst)};
}

Outcome parameterization_equivalence(const BaseToNewReport& report) {
  Gen gen(5);
  double worst = 0.0;
  for (int i = 0; i < kInstances; ++i) {
    const std::size_t n = gen.index(2, 12), dim = gen.index(3, 16);
    const double tau0 = gen.uniform(0.005, 0.05), tau1 = std::exp(gen.uniform(-6.0, -1.0));
    const std::vector<PromptHead> heads{gen.head(n, dim, 0), gen.head(n, dim, 2)};
    const DomainPartition part(gen.cover(n, 2), n);
    // One-stage (tau1, tau0) equals two-stage alpha = log(tau0 / tau1) at
    // temperature tau1 tau0 / (tau1 + tau0).
    const MixtureModel one{heads, MixtureWeights::one_stage(tau1, tau1, tau0), part};
    const double alpha = std::log(tau0 / tau1);
    const MixtureModel two{heads,
                           MixtureWeights::two_stage({{alpha, alpha}}, tau1 * tau0 / (tau1 + tau0)),
                           part};
    const auto x = gen.unit(dim);
    const auto p = mixture_predict(one, x), q = mixture_predict(two, x);
    for (std::size_t l = 0; l < n; ++l) worst = std::max(worst, std::abs(p[l] - q[l]));
  }
  if (!report.parameterizations) return {false, "parameterization comparison missing"};
  const auto& c = *report.parameterizations;
  return {worst <= 1e-12 && c.h_difference <= 0.5,
          fmt("max |p_one - p_two| = %.2e; trained H one-stage %.2f vs two-stage %.2f (diff %.2f)",
              worst, c.one_stage.h, c.two_stage.h, c.h_difference)};
}

Outcome assumption_validation() {
  const auto r = assumption_check(AssumptionConfig{}, jobs());
  auto p = [](const TTestOutcome& o) { return o.result ? o.result->p : 1.0; };
  const bool pass = r.in_domain.significant && r.out_domain.significant &&
                    p(r.in_domain) < 0.05 && p(r.out_domain) < 0.05;
  return {pass, fmt("in-domain p = %.3g, out-domain p = %.3g over %.0f splits", p(r.in_domain),
                    p(r.out_domain), static_cast<double>(r.in_domain_gaps.size()))};
}

Outcome directional_base_to_new(const BaseToNewReport& r) {
  const double h_mix = r.configuration(kCocoaMix).mean.h;
  const double h_uni = r.configuration(kUniformEnsemble).mean.h;
  const double h_zs = r.configuration(kZeroShot).mean.h;
  const double base_margin = r.head_coa.base - r.head_ce.base;
  const bool pass = h_mix - h_uni >= 0.0 && h_uni - h_zs >= 0.0 && base_margin >= 0.0;
  return {pass, fmt("H mix-uniform %+.2f, uniform-zero-shot %+.2f, Base CoA-CE %+.2f",
                    h_mix - h_uni, h_uni - h_zs, base_margin)};
}

Outcome confusing_gain_check() {
  const auto r = confusing_gain(ConfusingGainConfig{});
  const bool pass = r.delta.confusing >= 0.0 && std::abs(r.delta.easy) <= 2.0;
  return {pass, fmt("confusing delta %+.2f, easy delta %+.2f (%.0f confusing samples)",
                    r.delta.confusing, r.delta.easy, static_cast<double>(r.counts.confusing))};
}

Outcome loss_zoo_identities() {
  Gen gen(9);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PredictiveDistribution p(gen.distribution(gen.index(2, 20)), 1.0);
    const std::size_t y = gen.index(0, p.size() - 1);
    worst = std::max({worst, std::abs(gce_loss(p, y, 1.0) - coa_loss(p, y)),
                      std::abs(focal_loss(p, y, 0.0) - ce_loss(p, y)),
                      std::abs(ce_plus_mae_loss(p, y, 0.0) - ce_loss(p, y))});
  }
  return {worst <= 1e-12, fmt("max deviation %.2e over 1000 distributions", worst)};
}

Outcome fscil_retention() {
  const auto r = fscil_run(FscilConfig{});
  const bool shape = r.session_accuracy.size() == 9;
  const bool pass = shape && r.retention_mixture >= r.retention_zero_shot;
  return {pass, fmt("session-1 accuracy mixture %.2f vs zero-shot %.2f; mean %.2f, PD %.2f",
                    r.retention_mixture, r.retention_zero_shot, r.mean, r.pd) +
                    (shape ? "" : " (wrong session count)")};
}

Outcome statistics_check() {
  const double p = 1.0 - student_t_cdf(3.25, 9.0);
  const double p0 = 1.0 - student_t_cdf(0.0, 9.0);
  return {std::abs(p - 0.005) <= 5e-4 && p0 == 0.5,
          fmt("p(t=3.25, dof 9) = %.5f, p(t=0) = %.17g", p, p0)};
}

// Runs the CLI in-process; returns the exit code.
int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "promix");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

Outcome format_and_determinism() {
  namespace fs = std::filesystem;
  Gen gen(12);
  const auto tmp = fs::temp_directory_path() / "promix_acceptance";
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  std::size_t roundtrip_failures = 0;
  for (int i = 0; i < kInstances; ++i) {
    const auto bytes = encode_embedding_set(gen.labeled_set(gen.index(1, 10), gen.index(1, 64),
                                                            gen.index(0, 30)));
    const auto path = tmp / "rt.emb";
    write_file_bytes(path, bytes);
    write_embedding_file(read_embedding_file(path), tmp / "rt2.emb");
    if (read_file_bytes(tmp / "rt2.emb") != bytes) ++roundtrip_failures;
  }

  const std::vector<std::string> small{
      "--set", "data.synthetic.dim=32",      "--set", "data.synthetic.num_classes=8",
      "--set", "data.synthetic.test_per_class=10", "--set", "optimizer.epochs=2",
      "--set", "optimizer.weight_epochs=2",  "--set", "hyper.context_length=2",
      "--set", "seeds=[0]",                  "--set", "vocab_pool_size=32",
      "--set", "fscil.num_classes=20",       "--set", "fscil.base_classes=10",
      "--set", "fscil.way=2",                "--set", "fscil.incremental_sessions=5",
      "--set", "fscil.later_session_weight_epochs=2",
      "--set", "assume.num_classes=12",      "--set", "assume.splits=3",
      "--set", "confusing.confusion_pairs=2", "--set", "confusing.context_length=2",
      "--set", "bound.trials=50",            "--set", "losses.context_length=2"};
  const std::vector<std::vector<std::string>> commands{
      {"gen"}, {"tune"}, {"weights"}, {"eval"}, {"eval", "--harness"}, {"fscil"},
      {"assume"}, {"bound"}, {"losses"}, {"confusing"}};
  std::size_t command_failures = 0, compared = 0;
  for (const char* run : {"a", "b"}) {
    for (const auto& cmd : commands) {
      auto args = small;
      args.push_back("-o");
      args.push_back((tmp / run).string());
      args.insert(args.end(), cmd.begin(), cmd.end());
      if (cli(args) != 0) ++command_failures;
    }
    if (cli({"-o", (tmp / run).string(), "report", (tmp / run).string()}) != 0) ++command_failures;
  }
  std::size_t mismatches = 0;
  for (const auto& entry : fs::directory_iterator(tmp / "a")) {
    ++compared;
    const auto other = tmp / "b" / entry.path().filename();
    if (!fs::exists(other) || read_file_bytes(entry.path()) != read_file_bytes(other)) ++mismatches;
  }
  fs::remove_all(tmp);

  const double h = harmonic_mean(75.47, 68.92);
  const bool pass = roundtrip_failures == 0 && command_failures == 0 && mismatches == 0 &&
                    compared > 0 && std::abs(h - 72.04) <= 0.01;
  return {pass, fmt("round-trip failures %.0f/100; %.0f files compared, %.0f differ; "
                    "harmonic_mean(75.47, 68.92) = %.4f",
                    static_cast<double>(roundtrip_failures), static_cast<double>(compared),
                    static_cast<double>(mismatches), h) +
                    (command_failures ? " (" + std::to_string(command_failures) +
                                            " commands failed)"
                                      : "")};
}

}  // namespace
}  // namespace promix

int main() {
  using namespace promix;
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();

  // Shared by criteria 5 and 7.
  std::optional<BaseToNewReport> b2n;
  auto base_to_new = [&]() -> const BaseToNewReport& {
    if (!b2n) b2n = base_to_new_eval(BaseToNewConfig{}, jobs());
    return *b2n;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient oracle suite", gradient_oracles},
      {"gradient shift invariance", shift_invariance},
      {"mixture bound sweep", bound_sweep_check},
      {"error decomposition identity", decomposition_identity},
      {"parameterization equivalence", [&] { return parameterization_equivalence(base_to_new()); }},
      {"assumption validation", assumption_validation},
      {"directional base-to-new ordering", [&] { return directional_base_to_new(base_to_new()); }},
      {"confusing-sample gain", confusing_gain_check},
      {"loss-zoo identities", loss_zoo_identities},
      {"FSCIL retention", fscil_retention},
      {"statistics correctness", statistics_check},
      {"format and determinism", format_and_determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s %2zu %-34s %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    if (!o.pass) ++failures;
  }
  const double total = std::chrono::duration<double>(Clock::now() - start).count();
  std::printf("%d/%zu criteria passed in %.1fs\n", static_cast<int>(criteria.size()) - failures,
              criteria.size(), total);
  return failures == 0 ? EXIT_SUCCESS : EXIT_FAILURE;
}
