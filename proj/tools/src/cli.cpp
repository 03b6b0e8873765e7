#include "cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <ostream>

#include "CLI11.hpp"
#include "promix/embedding_io.hpp"
#include "promix/random.hpp"
#include "run_config.hpp"

namespace promix::cli {

namespace fs = std::filesystem;

namespace {

class MissingCheckpoint : public Error {
 public:
  explicit MissingCheckpoint(const fs::path& path, const std::string& producer)
      : Error("missing checkpoint " + path.string() + " (run `promix " + producer + "` first)") {}
};

struct Outputs {
  fs::path dir;
  std::map<std::string, std::string> hashes;  // file name -> FNV-1a of the bytes

  void write(const std::string& name, const std::string& bytes) {
    write_file_bytes(dir / name, bytes);
    hashes[name] = hex64(fnv1a64(bytes));
  }
  // Records a file written by a library routine.
  void record(const std::string& name) {
    hashes[name] = hex64(fnv1a64(read_file_bytes(dir / name)));
  }
};

void write_manifest(const RunConfig& rc, const std::string& name, const std::string& command,
                    Json metrics, Json traces, Outputs& outputs) {
  Json config = rc.json;
  config.erase("out_dir");
  Json manifest{{"command", command},
                {"config", config},
                {"config_hash", run_config_hash(rc.json)},
                {"seed", rc.seed},
                {"metrics", std::move(metrics)},
                {"traces", std::move(traces)},
                {"outputs", outputs.hashes}};
  write_file_bytes(outputs.dir / (name + ".manifest.json"), canonical_dump(manifest));
}

double pool_noise(const DataSource& data) {
  if (const auto* s = std::get_if<SyntheticConfig>(&data)) return s->proto_noise;
  return 0.0;
}

fs::path head_path(const fs::path& dir, std::size_t i) {
  return dir / ("head_" + std::to_string(i) + ".json");
}

Json partition_json(const DomainPartition& p) {
  return {{"class_count", p.class_count()}, {"subsets", p.subsets()}};
}

DomainPartition load_partition(const fs::path& dir) {
  const auto path = dir / "partition.json";
  if (!fs::exists(path)) throw MissingCheckpoint(path, "tune");
  Json doc;
  try {
    doc = Json::parse(read_file_bytes(path));
    return DomainPartition(doc.at("subsets").get<std::vector<std::vector<ClassId>>>(),
                           doc.at("class_count").get<std::size_t>());
  } catch (const Json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader, path.string() + ": " + e.what());
  }
}

std::vector<PromptHead> load_heads(const fs::path& dir, std::size_t count) {
  std::vector<PromptHead> heads;
  for (std::size_t i = 0; i < count; ++i) {
    const auto path = head_path(dir, i);
    if (!fs::exists(path)) throw MissingCheckpoint(path, "tune");
    heads.push_back(load_head(path).head);
  }
  return heads;
}

EmbeddingSet subset_train(const EmbeddingSet& train, const DomainPartition& p, std::size_t i) {
  auto out = train.filter_by_classes(std::span<const ClassId>(p.subset(i)));
  if (out.empty()) {
    throw InvalidArgument("subset " + std::to_string(i) + " has no training samples");
  }
  return out;
}

// ---------------------------------------------------------------------------

int cmd_gen(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto* synth = std::get_if<SyntheticConfig>(&rc.data);
  if (!synth) throw ConfigError("/data", "gen needs a synthetic data source");
  const auto domain = generate_synthetic(*synth);
  outputs.write("train.emb", encode_embedding_set(domain.train));
  outputs.write("test.emb", encode_embedding_set(domain.test));
  write_prototype_file(domain.generalized_prototypes, domain.train.class_names(),
                       outputs.dir / "prototypes.emb");
  outputs.record("prototypes.emb");
  Json metrics{{"classes", domain.train.class_count()},
               {"dim", domain.train.dim()},
               {"train_samples", domain.train.size()},
               {"test_samples", domain.test.size()}};
  write_manifest(rc, "gen", "gen", metrics, Json::object(), outputs);
  out << "gen: " << domain.train.class_count() << " classes, " << domain.train.size()
      << " train / " << domain.test.size() << " test samples -> " << outputs.dir.string()
      << "\n";
  return kExitOk;
}

int cmd_tune(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto domain = load_domain(rc.data);
  const auto& names = domain.train.class_names();
  const auto partition = partition_classes(domain.train.class_count(), rc.partition, rc.seed);
  outputs.write("partition.json", canonical_dump(partition_json(partition)));

  const auto head0 = PromptHead::frozen(domain.generalized_prototypes, names);
  save_head(head0, rc.tau, head_path(outputs.dir, 0));
  outputs.record("head_0.json");
  outputs.record("head_0.emb");

  Json traces = Json::object();
  Json final_loss = Json::array();
  for (std::size_t i = 1; i < partition.subset_count(); ++i) {
    const auto train = subset_train(domain.train, partition, i);
    const auto init = PromptHead::learnable(domain.generalized_prototypes, names,
                                            rc.hyper.context_length,
                                            derive_seed(rc.seed, 0x1417 + i));
    auto opt = rc.opt;
    opt.seed = derive_seed(rc.seed, i);
    const auto result = tune_prompt(init, train, rc.loss, opt, rc.tau);
    const std::string stem = "head_" + std::to_string(i);
    save_head(result.head, rc.tau, head_path(outputs.dir, i));
    outputs.record(stem + ".json");
    outputs.record(stem + ".emb");
    traces[stem] = result.loss_trace;
    final_loss.push_back(result.loss_trace.empty() ? 0.0 : result.loss_trace.back());
    out << "tune: head " << i << " on " << train.size() << " samples, final loss "
        << final_loss.back().get<double>() << "\n";
  }
  Json metrics{{"prompts", partition.subset_count() - 1}, {"final_loss", final_loss}};
  write_manifest(rc, "tune", "tune", metrics, traces, outputs);
  return kExitOk;
}

int cmd_weights(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto partition = load_partition(outputs.dir);
  const std::size_t prompts = partition.subset_count() - 1;
  MixtureModel model{load_heads(outputs.dir, prompts + 1),
                     initial_weights(rc.weights, prompts, rc.tau), partition};
  model.validate();
  const auto domain = load_domain(rc.data);

  Json traces = Json::object();
  Json summary = Json::array();
  for (std::size_t i = 1; i <= prompts; ++i) {
    const auto train = subset_train(domain.train, partition, i);
    const auto anchors =
        make_outclass_anchors(rc.outclass, partition.subset(i).size(), domain.train.dim(),
                              pool_noise(rc.data), rc.vocab_pool_size,
                              derive_seed(rc.seed, 0x0c1a + i));
    const auto in = optimize_in_weight(model, i, train, rc.opt, rc.opt.weight_epochs);
    model.weights = in.weights;
    const auto fit = optimize_out_weight(model, i, train, anchors, rc.hyper, rc.opt,
                                         rc.opt.weight_epochs);
    model.weights = fit.weights;
    const std::string key = "prompt_" + std::to_string(i);
    traces[key] = {{"in", in.trace}, {"out", fit.trace}};
    summary.push_back({{"prompt", i},
                       {"pi_in", model.weights.pi_in(i)},
                       {"pi_out", model.weights.pi_out(i)},
                       {"in_monotone", in.monotone},
                       {"out_monotone", fit.monotone},
                       {"out_skipped", fit.skipped}});
    out << "weights: prompt " << i << " pi_in " << model.weights.pi_in(i) << " pi_out "
        << model.weights.pi_out(i) << "\n";
  }
  save_weights(model.weights, outputs.dir / "weights.json");
  outputs.record("weights.json");
  write_manifest(rc, "weights", "weights", {{"prompts", summary}}, traces, outputs);
  return kExitOk;
}

int cmd_eval_checkpoints(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto partition = load_partition(outputs.dir);
  const std::size_t prompts = partition.subset_count() - 1;
  auto heads = load_heads(outputs.dir, prompts + 1);
  const auto weights_path = outputs.dir / "weights.json";
  if (!fs::exists(weights_path)) throw MissingCheckpoint(weights_path, "weights");
  MixtureModel model{heads, load_weights(weights_path), partition};
  model.validate();
  const auto domain = load_domain(rc.data);

  const auto zero_shot = head_scorer(heads[0]);
  const auto mixture = mixture_scorer(model);
  Json subsets = Json::array();
  for (std::size_t i = 0; i < partition.subset_count(); ++i) {
    const auto& classes = partition.subset(i);
    if (classes.empty()) continue;
    const std::span<const ClassId> filter(classes);
    subsets.push_back({{"subset", i},
                       {"zero_shot", accuracy(zero_shot, domain.test, filter)},
                       {"mixture", accuracy(mixture, domain.test, filter)}});
  }
  Json metrics{{"subsets", subsets},
               {"all", {{"zero_shot", accuracy(zero_shot, domain.test)},
                        {"mixture", accuracy(mixture, domain.test)}}}};
  if (partition.subset_count() == 2 && !partition.subset(0).empty()) {
    for (const char* key : {"zero_shot", "mixture"}) {
      const double base = subsets[1][key].get<double>();
      const double novel = subsets[0][key].get<double>();
      metrics["base_new"][key] = {{"base", base}, {"new", novel}, {"h", harmonic_mean(base, novel)}};
    }
    const auto& m = metrics["base_new"]["mixture"];
    out << "eval: Base " << m["base"].get<double>() << " New " << m["new"].get<double>()
        << " H " << m["h"].get<double>() << "\n";
  } else {
    out << "eval: mixture accuracy " << metrics["all"]["mixture"].get<double>() << "\n";
  }
  write_manifest(rc, "eval", "eval", metrics, Json::object(), outputs);
  return kExitOk;
}

int cmd_eval_harness(const RunConfig& rc, std::size_t jobs, Outputs& outputs, std::ostream& out) {
  const auto report = base_to_new_eval(rc.base_to_new, jobs);
  outputs.write("base_to_new.csv", base_to_new_csv(report));
  write_manifest(rc, "eval_harness", "eval", to_json(report), Json::object(), outputs);
  for (const auto& c : report.configurations) {
    out << "eval: " << c.name << " Base " << c.mean.base << " New " << c.mean.novel << " H "
        << c.mean.h << "\n";
  }
  return kExitOk;
}

int cmd_fscil(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto report = fscil_run(rc.fscil);
  outputs.write("fscil.csv", fscil_csv(report));
  write_manifest(rc, "fscil", "fscil", to_json(report), Json::object(), outputs);
  out << "fscil: " << report.session_accuracy.size() << " sessions, Mean " << report.mean
      << " PD " << report.pd << "\n";
  return kExitOk;
}

int cmd_assume(const RunConfig& rc, std::size_t jobs, Outputs& outputs, std::ostream& out) {
  const auto report = assumption_check(rc.assume, jobs);
  write_manifest(rc, "assume", "assume", to_json(report), Json::object(), outputs);
  auto p = [](const TTestOutcome& o) {
    return o.result ? std::to_string(o.result->p) : std::string("degenerate");
  };
  out << "assume: in-domain p " << p(report.in_domain) << ", out-domain p "
      << p(report.out_domain) << ", " << (report.validated ? "validated" : "not validated")
      << "\n";
  return kExitOk;
}

int cmd_bound(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto report = bound_sweep(rc.bound);
  write_manifest(rc, "bound", "bound", to_json(report), Json::object(), outputs);
  out << "bound: " << report.trials << " trials, min gap " << report.min_gap << ", violations "
      << report.violations << "\n";
  return kExitOk;
}

int cmd_losses(const RunConfig& rc, std::size_t jobs, Outputs& outputs, std::ostream& out) {
  const auto rows = loss_zoo(rc.losses, jobs);
  outputs.write("losses.csv", loss_zoo_csv(rows));
  write_manifest(rc, "losses", "losses", to_json(rows), Json::object(), outputs);
  for (const auto& r : rows) {
    out << "losses: " << to_string(r.loss.kind) << " Base " << r.metrics.base << " New "
        << r.metrics.novel << " H " << r.metrics.h << "\n";
  }
  return kExitOk;
}

int cmd_confusing(const RunConfig& rc, Outputs& outputs, std::ostream& out) {
  const auto report = confusing_gain(rc.confusing);
  outputs.write("confusing_curves.csv", confusing_curve_csv(report));
  write_manifest(rc, "confusing", "confusing", to_json(report), Json::object(), outputs);
  out << "confusing: delta easy " << report.delta.easy << " confusing " << report.delta.confusing
      << " all " << report.delta.all << "\n";
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& inputs, const fs::path& out_dir,
               std::ostream& out) {
  std::vector<fs::path> dirs;
  for (const auto& d : inputs) dirs.emplace_back(d);
  if (dirs.empty()) dirs.push_back(out_dir);
  Json runs = Json::array();
  for (const auto& dir : dirs) {
    if (!fs::is_directory(dir)) throw InvalidArgument("not a run directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto name = entry.path().filename().string();
      if (name.size() > 14 && name.ends_with(".manifest.json")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      Json m;
      try {
        m = Json::parse(read_file_bytes(f));
      } catch (const Json::parse_error& e) {
        throw FormatError(FormatError::Kind::kBadHeader, f.string() + ": " + e.what());
      }
      runs.push_back({{"file", f.filename().string()},
                      {"command", m.value("command", "")},
                      {"config_hash", m.value("config_hash", "")},
                      {"seed", m.value("seed", Json())},
                      {"metrics", m.value("metrics", Json())}});
    }
  }
  if (runs.empty()) throw InvalidArgument("no run manifests found");
  write_file_bytes(out_dir / "report.json", canonical_dump({{"runs", runs}}));
  out << "report: merged " << runs.size() << " manifests -> " << (out_dir / "report.json").string()
      << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"promix: prompt-mixture training and evaluation on embedding domains"};
  app.name("promix");
  app.require_subcommand(1, 1);
  app.fallthrough();

  std::string config_path;
  std::vector<std::string> sets;
  std::size_t jobs = 1;
  std::string out_dir;
  app.add_option("-c,--config", config_path, "JSON run configuration");
  app.add_option("--set", sets, "Override a config value: path=value (dotted or /pointer path)")
      ->take_all();
  app.add_option("-j,--jobs", jobs, "Worker threads for seed and split fan-out")
      ->check(CLI::PositiveNumber);
  app.add_option("-o,--out", out_dir, "Run directory (overrides out_dir)");

  app.add_subcommand("gen", "Write synthetic train/test/prototype embedding files");
  app.add_subcommand("tune", "Tune one prompt head per partition subset");
  app.add_subcommand("weights", "Optimize mixture weights for tuned heads");
  auto* eval = app.add_subcommand("eval", "Evaluate tuned heads, or run the base-to-new harness");
  bool harness = false;
  eval->add_flag("--harness", harness, "Run the four-configuration base-to-new protocol");
  app.add_subcommand("fscil", "Run the few-shot class-incremental protocol");
  app.add_subcommand("assume", "Paired t-tests on specialized vs generalized accuracy gaps");
  auto* bound = app.add_subcommand("bound", "Random sweep of the mixture error bound gap");
  std::optional<std::size_t> trials;
  bound->add_option("--trials", trials, "Number of random ensembles")
      ->check(CLI::PositiveNumber);
  app.add_subcommand("losses", "Compare classification losses on the base-to-new split");
  app.add_subcommand("confusing", "Confusing-sample accuracy curves for CE vs CE+CoA");
  auto* report = app.add_subcommand("report", "Merge run manifests into report.json");
  std::vector<std::string> inputs;
  report->add_option("dirs", inputs, "Run directories to merge (default: the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    ConfigSources sources;
    if (!config_path.empty()) sources.file = config_path;
    sources.sets = sets;
    if (trials) sources.sets.push_back("bound.trials=" + std::to_string(*trials));
    if (const char* env = std::getenv("PROMIX_SEED"); env && *env) sources.env_seed = env;
    if (!out_dir.empty()) sources.out_dir = out_dir;
    const auto rc = parse_run_config(load_config(sources));

    Outputs outputs{rc.out_dir, {}};
    fs::create_directories(outputs.dir);
    if (command == "gen") return cmd_gen(rc, outputs, out);
    if (command == "tune") return cmd_tune(rc, outputs, out);
    if (command == "weights") return cmd_weights(rc, outputs, out);
    if (command == "eval") {
      return harness ? cmd_eval_harness(rc, jobs, outputs, out)
                     : cmd_eval_checkpoints(rc, outputs, out);
    }
    if (command == "fscil") return cmd_fscil(rc, outputs, out);
    if (command == "assume") return cmd_assume(rc, jobs, outputs, out);
    if (command == "bound") return cmd_bound(rc, outputs, out);
    if (command == "losses") return cmd_losses(rc, jobs, outputs, out);
    if (command == "confusing") return cmd_confusing(rc, outputs, out);
    return cmd_report(inputs, rc.out_dir, out);
  } catch (const MissingCheckpoint& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << command << " failed: " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace promix::cli
