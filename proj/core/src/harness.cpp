#include "promix/harness.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <numeric>
#include <thread>

#include "promix/embedding_io.hpp"
#include "promix/error.hpp"
#include "promix/random.hpp"

namespace promix {

namespace {

// Runs fn(0..n-1) on up to `jobs` threads. Each index writes only its own
// output slot, so the result does not depend on scheduling.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  pool.reserve(jobs);
  for (std::size_t t = 0; t < jobs; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

SplitMetrics split_metrics(const Scorer& scorer, const EmbeddingSet& test,
                           const DomainPartition& partition) {
  SplitMetrics m;
  m.base = accuracy(scorer, test, std::span<const ClassId>(partition.subset(1)));
  m.novel = accuracy(scorer, test, std::span<const ClassId>(partition.subset(0)));
  m.h = harmonic_mean(m.base, m.novel);
  return m;
}

double vocab_noise(const DataSource& source) {
  if (const auto* cfg = std::get_if<SyntheticConfig>(&source)) return cfg->proto_noise;
  return 0.0;
}

// First `shots` samples of each class, in original order.
EmbeddingSet first_per_class(const EmbeddingSet& set, std::size_t shots) {
  std::vector<std::size_t> taken(set.class_count(), 0);
  EmbeddingSet out(set.class_names(), set.dim());
  for (const auto& sample : set) {
    if (taken[sample.label]++ < shots) out.add(sample);
  }
  return out;
}

struct WeightFit {
  MixtureWeights weights;
  MixtureWeightSummary summary;
};

// In-weight first, then out-weight, for prompt `prompt` of `model`.
WeightFit fit_weights(MixtureModel model, std::size_t prompt, const EmbeddingSet& train,
                      std::span<const Embedding> anchors, const HyperParams& hyper,
                      const OptimizerConfig& opt, std::size_t epochs) {
  WeightFit fit;
  const auto in = optimize_in_weight(model, prompt, train, opt, epochs);
  model.weights = in.weights;
  const auto out = optimize_out_weight(model, prompt, train, anchors, hyper, opt, epochs);
  fit.weights = out.weights;
  fit.summary.pi_in = fit.weights.pi_in(prompt);
  fit.summary.pi_out = fit.weights.pi_out(prompt);
  fit.summary.in_monotone = in.monotone;
  fit.summary.out_monotone = out.monotone;
  fit.summary.out_skipped = out.skipped;
  return fit;
}

}  // namespace

MixtureWeights initial_weights(Parameterization p, std::size_t prompts, double tau) {
  switch (p) {
    case Parameterization::kTwoStage:
      return MixtureWeights::two_stage(std::vector<PromptWeightParams>(prompts), tau);
    case Parameterization::kOneStage:
      if (prompts != 1) throw InvalidArgument("one-stage weights support a single prompt only");
      return MixtureWeights::one_stage(tau, tau, tau);
    case Parameterization::kDirect:
      break;
  }
  throw InvalidArgument("direct weights are not optimized; choose one_stage or two_stage");
}

std::vector<Embedding> make_outclass_anchors(const OutclassStrategy& strategy,
                                             std::size_t in_count, std::size_t dim,
                                             double pool_noise, std::size_t pool_size,
                                             std::uint64_t seed) {
  if (strategy.kind == OutclassKind::kNone) return {};
  std::vector<Embedding> pool;
  if (strategy.kind == OutclassKind::kRandomWord || strategy.kind == OutclassKind::kMixed) {
    pool = generate_vocab_pool(pool_size, dim, pool_noise, derive_seed(seed, 0x7001));
  }
  return generate_outclass(strategy.kind, strategy.resolved_count(in_count), dim, seed, pool);
}

SyntheticDomain load_domain(const DataSource& source, std::uint64_t seed_offset) {
  if (const auto* cfg = std::get_if<SyntheticConfig>(&source)) {
    auto shifted = *cfg;
    shifted.seed = cfg->seed + seed_offset;
    return generate_synthetic(shifted);
  }
  const auto& files = std::get<EmbeddingFiles>(source);
  SyntheticDomain domain;
  domain.train = read_embedding_file(files.train);
  domain.test = read_embedding_file(files.test);
  auto protos = read_prototype_file(files.prototypes);
  if (protos.class_names != domain.train.class_names() ||
      protos.class_names != domain.test.class_names()) {
    throw InvalidArgument("train, test and prototype files disagree on the class list");
  }
  if (domain.train.dim() != domain.test.dim() ||
      protos.prototypes.front().dim() != domain.train.dim()) {
    throw InvalidArgument("train, test and prototype files disagree on dimension");
  }
  domain.generalized_prototypes = std::move(protos.prototypes);
  return domain;
}

std::uint64_t source_seed(const DataSource& source, std::uint64_t seed) {
  if (const auto* cfg = std::get_if<SyntheticConfig>(&source)) return cfg->seed + seed;
  return seed;
}

SplitMetrics mean_metrics(std::span<const SplitMetrics> runs) {
  if (runs.empty()) throw InvalidArgument("mean of no runs");
  SplitMetrics m;
  for (const auto& r : runs) {
    m.base += r.base;
    m.novel += r.novel;
    m.h += r.h;
  }
  const double n = static_cast<double>(runs.size());
  m.base /= n;
  m.novel /= n;
  m.h /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Base-to-new

const ConfigurationResult& BaseToNewReport::configuration(std::string_view name) const {
  for (const auto& c : configurations) {
    if (c.name == name) return c;
  }
  throw InvalidArgument("no configuration named '" + std::string(name) + "'");
}

namespace {

struct SeedOutcome {
  SplitMetrics zero_shot, uniform, coa_uniform, cocoa, head_ce, head_coa;
  std::optional<SplitMetrics> alternate;
  MixtureWeightSummary weights;
};

SeedOutcome run_base_to_new_seed(const BaseToNewConfig& cfg, std::uint64_t seed) {
  const auto domain = load_domain(cfg.data, seed);
  const std::uint64_t s = source_seed(cfg.data, seed);
  const std::size_t n = domain.train.class_count();
  const auto partition = partition_classes(n, BaseNewSplit{}, s);
  if (partition.subset(0).empty()) throw InvalidArgument("base-to-new needs at least two classes");
  const auto& names = domain.train.class_names();
  const auto train_base =
      domain.train.filter_by_classes(std::span<const ClassId>(partition.subset(1)));

  auto opt = cfg.opt;
  opt.seed = derive_seed(cfg.opt.seed, s);
  const auto head0 = PromptHead::frozen(domain.generalized_prototypes, names);
  const auto init = PromptHead::learnable(domain.generalized_prototypes, names,
                                          cfg.hyper.context_length, derive_seed(s, 0x1417));
  const auto ce = tune_prompt(init, train_base, LossConfig{.kind = LossKind::kCE}, opt, cfg.tau);
  const auto coa = tune_prompt(init, train_base, cfg.loss, opt, cfg.tau);

  SeedOutcome out;
  out.zero_shot = split_metrics(head_scorer(head0), domain.test, partition);
  out.head_ce = split_metrics(head_scorer(ce.head), domain.test, partition);
  out.head_coa = split_metrics(head_scorer(coa.head), domain.test, partition);

  MixtureModel uniform{{head0, ce.head}, MixtureWeights::uniform(1, cfg.tau), partition};
  out.uniform = split_metrics(mixture_scorer(uniform), domain.test, partition);
  MixtureModel coa_uniform{{head0, coa.head}, MixtureWeights::uniform(1, cfg.tau), partition};
  out.coa_uniform = split_metrics(mixture_scorer(coa_uniform), domain.test, partition);

  const auto anchors =
      make_outclass_anchors(cfg.outclass, partition.subset(1).size(), domain.train.dim(),
                       vocab_noise(cfg.data), cfg.vocab_pool_size, derive_seed(s, 0x0c1a));
  auto cocoa_for = [&](Parameterization p, MixtureWeightSummary* summary) {
    MixtureModel model{{head0, coa.head}, initial_weights(p, 1, cfg.tau), partition};
    auto fit = fit_weights(model, 1, train_base, anchors, cfg.hyper, opt, cfg.opt.weight_epochs);
    model.weights = fit.weights;
    if (summary) *summary = fit.summary;
    return split_metrics(mixture_scorer(model), domain.test, partition);
  };
  out.cocoa = cocoa_for(cfg.weights, &out.weights);
  if (cfg.compare_parameterizations) {
    out.alternate = cocoa_for(cfg.weights == Parameterization::kTwoStage
                                  ? Parameterization::kOneStage
                                  : Parameterization::kTwoStage,
                              nullptr);
  }
  return out;
}

}  // namespace

BaseToNewReport base_to_new_eval(const BaseToNewConfig& config, std::size_t jobs) {
  if (config.seeds.empty()) throw InvalidArgument("base-to-new needs at least one seed");
  config.hyper.validate();
  config.loss.validate();
  config.opt.validate();
  if (config.weights == Parameterization::kDirect) {
    throw InvalidArgument("CoCoA-Mix weights must be one_stage or two_stage");
  }

  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<SeedOutcome> outcomes(seeds.size());
  parallel_for(seeds.size(), jobs,
               [&](std::size_t i) { outcomes[i] = run_base_to_new_seed(config, seeds[i]); });

  BaseToNewReport report;
  report.seeds = seeds;
  auto collect = [&](const char* name, SplitMetrics SeedOutcome::*field) {
    ConfigurationResult r;
    r.name = name;
    for (const auto& o : outcomes) r.per_seed.push_back(o.*field);
    r.mean = mean_metrics(r.per_seed);
    report.configurations.push_back(std::move(r));
  };
  collect(kZeroShot, &SeedOutcome::zero_shot);
  collect(kUniformEnsemble, &SeedOutcome::uniform);
  collect(kCoaUniform, &SeedOutcome::coa_uniform);
  collect(kCocoaMix, &SeedOutcome::cocoa);

  std::vector<SplitMetrics> ce, coa, alt;
  for (const auto& o : outcomes) {
    ce.push_back(o.head_ce);
    coa.push_back(o.head_coa);
    report.cocoa_weights.push_back(o.weights);
    if (o.alternate) alt.push_back(*o.alternate);
  }
  report.head_ce = mean_metrics(ce);
  report.head_coa = mean_metrics(coa);
  if (!alt.empty()) {
    ParameterizationComparison cmp;
    const auto primary = report.configuration(kCocoaMix).mean;
    const auto other = mean_metrics(alt);
    cmp.two_stage = config.weights == Parameterization::kTwoStage ? primary : other;
    cmp.one_stage = config.weights == Parameterization::kTwoStage ? other : primary;
    cmp.h_difference = std::fabs(cmp.two_stage.h - cmp.one_stage.h);
    report.parameterizations = cmp;
  }
  return report;
}

// ---------------------------------------------------------------------------
// FSCIL

FscilReport fscil_run(const FscilConfig& config) {
  config.hyper.validate();
  config.loss.validate();
  config.opt.validate();
  if (config.incremental_shots == 0) throw InvalidArgument("incremental sessions need shots >= 1");
  const auto domain = load_domain(config.data, config.seed);
  const std::uint64_t s = source_seed(config.data, config.seed);
  const std::size_t n = domain.train.class_count();
  const auto schedule = partition_classes(n, config.schedule, s);
  const std::size_t sessions = schedule.subset_count() - 1;
  const auto& names = domain.train.class_names();
  const auto head0 = PromptHead::frozen(domain.generalized_prototypes, names);

  auto opt = config.opt;
  opt.seed = derive_seed(config.opt.seed, s);

  FscilReport report;
  std::vector<PromptHead> heads{head0};
  std::vector<PromptWeightParams> params;
  std::vector<ClassId> seen;
  for (std::size_t k = 1; k <= sessions; ++k) {
    const auto& session_classes = schedule.subset(k);
    auto train_k = domain.train.filter_by_classes(std::span<const ClassId>(session_classes));
    if (k > 1) train_k = first_per_class(train_k, config.incremental_shots);
    const auto init = PromptHead::learnable(domain.generalized_prototypes, names,
                                            config.hyper.context_length, derive_seed(s, 0xf5c0 + k));
    auto session_opt = opt;
    session_opt.seed = derive_seed(opt.seed, k);
    heads.push_back(tune_prompt(init, train_k, config.loss, session_opt, config.tau).head);
    params.push_back({});

    // Classes not yet seen fold into the generalized head's subset.
    std::vector<std::vector<ClassId>> subsets(k + 1);
    for (std::size_t i = 1; i <= k; ++i) subsets[i] = schedule.subset(i);
    std::vector<bool> owned(n, false);
    for (std::size_t i = 1; i <= k; ++i) {
      for (ClassId c : subsets[i]) owned[c] = true;
    }
    for (ClassId c = 0; c < n; ++c) {
      if (!owned[c]) subsets[0].push_back(c);
    }
    MixtureModel model{heads, MixtureWeights::two_stage(params, config.tau),
                       DomainPartition(subsets, n)};

    std::vector<Embedding> anchors;
    if (k == 1) {
      anchors = make_outclass_anchors(config.first_session_outclass, session_classes.size(),
                                      domain.train.dim(), vocab_noise(config.data),
                                      config.vocab_pool_size, derive_seed(s, 0x0c1a));
    } else {
      for (ClassId c : seen) anchors.push_back(domain.generalized_prototypes[c]);
    }
    const std::size_t epochs =
        k == 1 ? config.first_session_weight_epochs : config.later_session_weight_epochs;
    auto fit = fit_weights(model, k, train_k, anchors, config.hyper, session_opt, epochs);
    model.weights = fit.weights;
    params.back() = model.weights.raw(k);
    report.weights.push_back(fit.summary);

    seen.insert(seen.end(), session_classes.begin(), session_classes.end());
    std::sort(seen.begin(), seen.end());
    const auto seen_span = std::span<const ClassId>(seen);
    report.session_accuracy.push_back(accuracy(mixture_scorer(model), domain.test, seen_span));
    report.zero_shot_accuracy.push_back(accuracy(head_scorer(head0), domain.test, seen_span));

    if (k == sessions) {
      const auto first =
          domain.test.filter_by_classes(std::span<const ClassId>(schedule.subset(1)));
      report.retention_mixture = accuracy(mixture_scorer(model), first, seen_span);
      report.retention_zero_shot = accuracy(head_scorer(head0), first, seen_span);
    }
  }
  report.mean = std::accumulate(report.session_accuracy.begin(), report.session_accuracy.end(),
                                0.0) /
                static_cast<double>(sessions);
  report.pd = report.session_accuracy.front() - report.session_accuracy.back();
  return report;
}

// ---------------------------------------------------------------------------
// Assumption check

TTestOutcome guarded_t_test(std::span<const double> diffs, double alpha) {
  TTestOutcome out;
  if (diffs.size() < 2) throw InvalidArgument("t-test needs at least two splits");
  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(diffs.size());
  bool constant = true;
  for (double d : diffs) constant = constant && d == diffs.front();
  if (constant) {
    out.degenerate = true;
    return out;
  }
  out.result = t_test_paired_one_sided(diffs);
  out.significant = out.result->p < alpha;
  return out;
}

AssumptionReport assumption_from_gaps(std::vector<double> in_gaps, std::vector<double> out_gaps) {
  AssumptionReport r;
  r.in_domain = guarded_t_test(in_gaps);
  r.out_domain = guarded_t_test(out_gaps);
  r.in_domain_gaps = std::move(in_gaps);
  r.out_domain_gaps = std::move(out_gaps);
  r.validated = r.in_domain.significant && r.out_domain.significant;
  return r;
}

AssumptionReport assumption_check(const AssumptionConfig& config, std::size_t jobs) {
  if (config.splits < 2) throw InvalidArgument("assumption check needs at least two splits");
  config.hyper.validate();
  config.loss.validate();
  config.opt.validate();
  const auto domain = load_domain(config.data, 0);
  const std::uint64_t s = source_seed(config.data, 0);
  const std::size_t n = domain.train.class_count();
  const auto& names = domain.train.class_names();
  const auto head0 = PromptHead::frozen(domain.generalized_prototypes, names);
  const auto zero_shot = head_scorer(head0);

  std::vector<double> in_gaps(config.splits), out_gaps(config.splits);
  parallel_for(config.splits, jobs, [&](std::size_t split) {
    const std::uint64_t split_seed = derive_seed(s, 0xa550 + split);
    const auto partition = partition_classes(n, BaseNewSplit{}, split_seed);
    const auto& in_classes = partition.subset(1);
    const auto& out_classes = partition.subset(0);
    const auto train = domain.train.filter_by_classes(std::span<const ClassId>(in_classes));
    auto opt = config.opt;
    opt.seed = derive_seed(config.opt.seed, split_seed);
    const auto init = PromptHead::learnable(domain.generalized_prototypes, names,
                                            config.hyper.context_length, split_seed);
    const auto tuned = head_scorer(tune_prompt(init, train, config.loss, opt, config.tau).head);
    const auto in_span = std::span<const ClassId>(in_classes);
    const auto out_span = std::span<const ClassId>(out_classes);
    in_gaps[split] = accuracy(tuned, domain.test, in_span) - accuracy(zero_shot, domain.test, in_span);
    out_gaps[split] =
        accuracy(zero_shot, domain.test, out_span) - accuracy(tuned, domain.test, out_span);
  });
  return assumption_from_gaps(std::move(in_gaps), std::move(out_gaps));
}

// ---------------------------------------------------------------------------
// Confusing-sample analysis

namespace {

SubsetAccuracy subset_accuracy(const PromptHead& head, const EmbeddingSet& test,
                               std::span<const SampleCategory> categories) {
  std::array<std::size_t, 3> hit{}, total{};
  std::size_t all_hit = 0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto s = head.similarities(test[i].embedding);
    const auto v = s.values();
    const auto pred = static_cast<ClassId>(std::max_element(v.begin(), v.end()) - v.begin());
    const auto c = static_cast<std::size_t>(categories[i]);
    ++total[c];
    if (pred == test[i].label) {
      ++hit[c];
      ++all_hit;
    }
  }
  auto pct = [](std::size_t h, std::size_t t) {
    return t == 0 ? 0.0 : 100.0 * static_cast<double>(h) / static_cast<double>(t);
  };
  SubsetAccuracy a;
  a.easy = pct(hit[0], total[0]);
  a.confusing = pct(hit[1], total[1]);
  a.hard = pct(hit[2], total[2]);
  a.all = pct(all_hit, test.size());
  return a;
}

}  // namespace

ConfusingGainReport confusing_gain(const ConfusingGainConfig& config) {
  config.opt.validate();
  const auto domain = load_domain(config.data, 0);
  const std::uint64_t s = source_seed(config.data, 0);
  const auto& names = domain.train.class_names();
  const auto head0 = PromptHead::frozen(domain.generalized_prototypes, names);
  const auto categories =
      classify_samples(head0, domain.test, config.gap_threshold, config.tau);

  ConfusingGainReport report;
  report.counts = count_categories(categories);
  const auto init = PromptHead::learnable(domain.generalized_prototypes, names,
                                          config.context_length, derive_seed(s, 0xc0f));
  auto opt = config.opt;
  opt.seed = derive_seed(config.opt.seed, s);
  auto train = [&](double w, std::vector<SubsetAccuracy>& curve) {
    const LossConfig loss{.kind = LossKind::kCEPlusCoA, .w = w};
    const auto result = tune_prompt(init, domain.train, loss, opt, config.tau,
                                    [&](std::size_t, const PromptHead& head) {
                                      curve.push_back(subset_accuracy(head, domain.test, categories));
                                    });
    return subset_accuracy(result.head, domain.test, categories);
  };
  report.baseline_final = train(config.w_baseline, report.baseline_curve);
  report.coa_final = train(config.w_coa, report.coa_curve);
  report.delta.easy = report.coa_final.easy - report.baseline_final.easy;
  report.delta.confusing = report.coa_final.confusing - report.baseline_final.confusing;
  report.delta.hard = report.coa_final.hard - report.baseline_final.hard;
  report.delta.all = report.coa_final.all - report.baseline_final.all;
  return report;
}

// ---------------------------------------------------------------------------
// Jensen gap sweep

namespace {

std::vector<Embedding> random_units(Rng& rng, std::size_t count, std::size_t dim) {
  std::vector<Embedding> out;
  out.reserve(count);
  while (out.size() < count) {
    auto v = rng.gaussian_vector(dim);
    if (l2_norm(v) > 1e-12) out.push_back(Embedding::normalized(std::move(v)));
  }
  return out;
}

}  // namespace

BoundSweepReport bound_sweep(const BoundSweepConfig& config) {
  if (config.trials == 0) throw InvalidArgument("bound sweep needs at least one trial");
  if (config.min_prompts == 0 || config.min_prompts > config.max_prompts) {
    throw InvalidArgument("invalid prompt-count range");
  }
  if (config.min_classes < 2 || config.min_classes > config.max_classes) {
    throw InvalidArgument("invalid class-count range");
  }
  if (config.dim == 0 || config.samples == 0) throw InvalidArgument("empty bound-sweep instance");

  Rng rng(derive_seed(config.seed, 0xb0d));
  BoundSweepReport r;
  r.trials = config.trials;
  r.min_gap = std::numeric_limits<double>::infinity();
  r.max_gap = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (std::size_t t = 0; t < config.trials; ++t) {
    const std::size_t k = config.min_prompts + rng.index(config.max_prompts - config.min_prompts + 1);
    const std::size_t classes =
        config.min_classes + rng.index(config.max_classes - config.min_classes + 1);
    const auto names = synthetic_class_names(classes);
    std::vector<PromptHead> heads;
    for (std::size_t i = 0; i <= k; ++i) {
      heads.push_back(PromptHead::frozen(random_units(rng, classes, config.dim), names));
    }
    EmbeddingSet set(names, config.dim);
    for (auto& x : random_units(rng, config.samples, config.dim)) {
      set.add({std::move(x), rng.index(classes)});
    }
    std::vector<double> pi(k + 1);
    double total = 0.0;
    for (auto& p : pi) {
      p = -std::log(1.0 - rng.uniform());
      total += p;
    }
    for (auto& p : pi) p /= total;
    const double gap = bound_gap(heads, set, pi, config.tau);
    r.min_gap = std::min(r.min_gap, gap);
    r.max_gap = std::max(r.max_gap, gap);
    sum += gap;
    if (gap < -1e-12) ++r.violations;
  }
  r.mean_gap = sum / static_cast<double>(config.trials);

  // Two copies of one head at equal weight: the mixture is the head itself.
  const auto names = synthetic_class_names(config.min_classes);
  const auto head = PromptHead::frozen(random_units(rng, config.min_classes, config.dim), names);
  EmbeddingSet set(names, config.dim);
  for (auto& x : random_units(rng, config.samples, config.dim)) {
    set.add({std::move(x), rng.index(config.min_classes)});
  }
  const std::vector<PromptHead> twins{head, head};
  const std::vector<double> half{0.5, 0.5};
  r.identical_heads_gap = bound_gap(twins, set, half, config.tau);
  return r;
}

// ---------------------------------------------------------------------------
// Loss comparison

std::vector<LossZooRow> loss_zoo(const LossZooConfig& config, std::size_t jobs) {
  config.opt.validate();
  if (config.seeds.empty()) throw InvalidArgument("loss comparison needs at least one seed");
  std::vector<LossConfig> losses = config.losses;
  if (losses.empty()) {
    for (auto kind : {LossKind::kCE, LossKind::kFocal, LossKind::kGCE, LossKind::kMAE,
                      LossKind::kCEPlusMAE, LossKind::kCEPlusCoA}) {
      losses.push_back(LossConfig{.kind = kind});
    }
  }
  for (const auto& l : losses) l.validate();

  std::vector<std::uint64_t> seeds = config.seeds;
  std::sort(seeds.begin(), seeds.end());
  std::vector<SplitMetrics> cells(losses.size() * seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t si) {
    const auto domain = load_domain(config.data, seeds[si]);
    const std::uint64_t s = source_seed(config.data, seeds[si]);
    const auto partition = partition_classes(domain.train.class_count(), BaseNewSplit{}, s);
    const auto train =
        domain.train.filter_by_classes(std::span<const ClassId>(partition.subset(1)));
    const auto init = PromptHead::learnable(domain.generalized_prototypes,
                                            domain.train.class_names(), config.context_length,
                                            derive_seed(s, 0x1417));
    auto opt = config.opt;
    opt.seed = derive_seed(config.opt.seed, s);
    for (std::size_t li = 0; li < losses.size(); ++li) {
      const auto tuned = tune_prompt(init, train, losses[li], opt, config.tau).head;
      cells[li * seeds.size() + si] = split_metrics(head_scorer(tuned), domain.test, partition);
    }
  });

  std::vector<LossZooRow> rows;
  for (std::size_t li = 0; li < losses.size(); ++li) {
    rows.push_back({losses[li], mean_metrics(std::span<const SplitMetrics>(
                                    cells.data() + li * seeds.size(), seeds.size()))});
  }
  return rows;
}

}  // namespace promix
