#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "promix/embedding_io.hpp"

namespace promix::cli {

namespace {

Json synthetic_json(const SyntheticConfig& c) {
  return {{"dim", c.dim},
          {"num_classes", c.num_classes},
          {"shots", c.shots},
          {"test_per_class", c.test_per_class},
          {"intra_noise", c.intra_noise},
          {"proto_noise", c.proto_noise},
          {"confusion_pairs", c.confusion_pairs}};
}

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

const char* kind_name(const Json& v) {
  if (v.is_null()) return "null";
  if (v.is_boolean()) return "boolean";
  if (v.is_number_unsigned()) return "non-negative integer";
  if (v.is_number()) return "number";
  if (v.is_string()) return "string";
  if (v.is_array()) return "array";
  return "object";
}

bool is_count(const Json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

constexpr const char* kNullablePointer = "/outclass/count";

// Type of `value` accepted where `def` is the default.
void check_type(const Json& def, const Json& value, const std::string& pointer) {
  bool ok = false;
  if (def.is_boolean()) {
    ok = value.is_boolean();
  } else if (def.is_number_unsigned() || def.is_number_integer()) {
    ok = is_count(value);
  } else if (def.is_number()) {
    ok = value.is_number();
  } else if (def.is_string()) {
    ok = value.is_string();
  } else if (def.is_array()) {
    ok = value.is_array();
  } else if (def.is_object()) {
    ok = value.is_object();
  }
  if (!ok) {
    throw ConfigError(pointer, std::string("expected ") + kind_name(def) + ", got " +
                                   kind_name(value));
  }
}

void overlay_data(Json& base, const Json& patch, const std::string& pointer) {
  if (!patch.is_object()) throw ConfigError(pointer, "expected object");
  for (const auto& [key, value] : patch.items()) {
    if (key != "synthetic" && key != "files") {
      throw ConfigError(pointer + "/" + escape_token(key), "unknown key");
    }
  }
  const bool synthetic = patch.contains("synthetic");
  const bool files = patch.contains("files");
  if (synthetic && files) {
    throw ConfigError(pointer, "exactly one data source (synthetic or files) is allowed");
  }
  if (files) {
    const auto& f = patch["files"];
    const std::string fp = pointer + "/files";
    if (!f.is_object()) throw ConfigError(fp, "expected object");
    Json out = Json::object();
    for (const auto& [key, value] : f.items()) {
      if (key != "train" && key != "test" && key != "prototypes") {
        throw ConfigError(fp + "/" + escape_token(key), "unknown key");
      }
      if (!value.is_string()) throw ConfigError(fp + "/" + key, "expected string");
      out[key] = value;
    }
    for (const char* key : {"train", "test", "prototypes"}) {
      if (!out.contains(key)) throw ConfigError(fp + "/" + key, "missing required path");
    }
    base = Json{{"files", out}};
  } else if (synthetic) {
    if (!base.contains("synthetic")) {
      base = Json{{"synthetic", default_config()["data"]["synthetic"]}};
    }
    overlay(base["synthetic"], patch["synthetic"], pointer + "/synthetic");
  }
}

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  std::size_t used = 0;
  unsigned long long value = 0;
  try {
    if (!text.empty() && text.front() != '-') value = std::stoull(text, &used, 10);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size()) {
    throw InvalidArgument(origin + ": seed must be a non-negative integer, got '" + text + "'");
  }
  return value;
}

template <typename Enum, typename Fn>
Enum parse_enum(const Json& value, const std::string& pointer, Fn&& from_string) {
  try {
    return from_string(value.get<std::string>());
  } catch (const InvalidArgument& e) {
    throw ConfigError(pointer, e.what());
  }
}

std::vector<std::uint64_t> seed_list(const Json& seeds) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (!is_count(seeds[i])) {
      throw ConfigError("/seeds/" + std::to_string(i), "expected non-negative integer");
    }
    out.push_back(seeds[i].get<std::uint64_t>());
  }
  if (out.empty()) throw ConfigError("/seeds", "at least one seed is required");
  return out;
}

}  // namespace

Json default_config() {
  const HyperParams hyper;
  const LossConfig loss;
  const OptimizerConfig opt;
  const FscilConfig fscil;
  const AssumptionConfig assume;
  const ConfusingGainConfig confusing;
  const BoundSweepConfig bound;
  const LossZooConfig zoo;
  const BaseToNewConfig b2n;

  Json kinds = Json::array();
  for (auto k : {LossKind::kCE, LossKind::kCEPlusCoA, LossKind::kFocal, LossKind::kGCE,
                 LossKind::kMAE, LossKind::kCEPlusMAE}) {
    kinds.push_back(std::string(to_string(k)));
  }
  const auto& fscil_data = std::get<SyntheticConfig>(fscil.data);
  const auto& assume_data = std::get<SyntheticConfig>(assume.data);
  const auto& confusing_data = std::get<SyntheticConfig>(confusing.data);

  return {
      {"seed", 0},
      {"seeds", b2n.seeds},
      {"out_dir", "run"},
      {"tau", kDefaultTemperature},
      {"data", {{"synthetic", synthetic_json(SyntheticConfig{})}}},
      {"partition",
       {{"kind", "base_new"},
        {"base_classes", fscil.schedule.base_classes},
        {"way", fscil.schedule.way},
        {"incremental_sessions", fscil.schedule.incremental_sessions},
        {"sets", Json::array()}}},
      {"hyper",
       {{"w", hyper.w},
        {"ent_weight", hyper.ent_weight},
        {"margin", hyper.margin},
        {"context_length", hyper.context_length}}},
      {"loss", {{"kind", std::string(to_string(loss.kind))}, {"gamma", loss.gamma}, {"q", loss.q}}},
      {"optimizer",
       {{"prompt",
         {{"lr", opt.prompt.lr},
          {"weight_decay", opt.prompt.weight_decay},
          {"beta1", opt.prompt.beta1},
          {"beta2", opt.prompt.beta2},
          {"eps", opt.prompt.eps}}},
        {"weights",
         {{"lr", opt.weights.lr},
          {"momentum", opt.weights.momentum},
          {"weight_decay", opt.weights.weight_decay}}},
        {"epochs", opt.epochs},
        {"batch_size", opt.batch_size},
        {"weight_epochs", opt.weight_epochs}}},
      {"outclass", {{"kind", std::string(to_string(OutclassStrategy{}.kind))}, {"count", nullptr}}},
      {"weights", std::string(to_string(b2n.weights))},
      {"vocab_pool_size", b2n.vocab_pool_size},
      {"eval", {{"compare_parameterizations", b2n.compare_parameterizations}}},
      {"fscil",
       {{"num_classes", fscil_data.num_classes},
        {"base_classes", fscil.schedule.base_classes},
        {"way", fscil.schedule.way},
        {"incremental_sessions", fscil.schedule.incremental_sessions},
        {"incremental_shots", fscil.incremental_shots},
        {"margin", fscil.hyper.margin},
        {"context_length", fscil.hyper.context_length},
        {"first_session_weight_epochs", fscil.first_session_weight_epochs},
        {"later_session_weight_epochs", fscil.later_session_weight_epochs}}},
      {"assume", {{"num_classes", assume_data.num_classes}, {"splits", assume.splits}}},
      {"confusing",
       {{"confusion_pairs", confusing_data.confusion_pairs},
        {"context_length", confusing.context_length},
        {"w_baseline", confusing.w_baseline},
        {"w_coa", confusing.w_coa},
        {"gap_threshold", confusing.gap_threshold}}},
      {"bound",
       {{"trials", bound.trials},
        {"min_prompts", bound.min_prompts},
        {"max_prompts", bound.max_prompts},
        {"min_classes", bound.min_classes},
        {"max_classes", bound.max_classes},
        {"dim", bound.dim},
        {"samples", bound.samples}}},
      {"losses", {{"kinds", kinds}, {"context_length", zoo.context_length}}},
  };
}

void overlay(Json& base, const Json& patch, const std::string& pointer) {
  if (!patch.is_object()) throw ConfigError(pointer, "expected object");
  for (const auto& [key, value] : patch.items()) {
    const std::string child = pointer + "/" + escape_token(key);
    if (!base.contains(key)) throw ConfigError(child, "unknown key");
    if (pointer.empty() && key == "data") {
      overlay_data(base[key], value, child);
      continue;
    }
    auto& slot = base[key];
    if (child == kNullablePointer) {
      if (!value.is_null() && !is_count(value)) {
        throw ConfigError(child, "expected null or non-negative integer");
      }
      slot = value.is_null() ? Json(nullptr) : Json(value.get<std::uint64_t>());
      continue;
    }
    check_type(slot, value, child);
    if (slot.is_object()) {
      overlay(slot, value, child);
    } else if (slot.is_number_float()) {
      slot = value.get<double>();
    } else if (slot.is_number()) {
      slot = value.get<std::uint64_t>();
    } else {
      slot = value;
    }
  }
}

void apply_set(Json& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw InvalidArgument("--set expects path=value, got '" + std::string(assignment) + "'");
  }
  std::string path(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  if (path.front() != '/') {
    std::string pointer = "/";
    for (char c : path) pointer += c == '.' ? '/' : c;
    path = pointer;
  }
  Json value;
  try {
    value = Json::parse(text);
  } catch (const Json::parse_error&) {
    value = text;
  }
  Json patch;
  try {
    patch[Json::json_pointer(path)] = value;
  } catch (const Json::exception& e) {
    throw ConfigError(path, std::string("bad path: ") + e.what());
  }
  overlay(config, patch);
}

Json load_config(const ConfigSources& sources) {
  Json config = default_config();
  if (sources.file) {
    std::ifstream in(*sources.file, std::ios::binary);
    if (!in) throw InvalidArgument("cannot open config file '" + sources.file->string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    Json doc;
    try {
      doc = Json::parse(buf.str());
    } catch (const Json::parse_error& e) {
      throw InvalidArgument("config file '" + sources.file->string() + "' is not valid JSON: " +
                            e.what());
    }
    overlay(config, doc);
  }
  for (const auto& s : sources.sets) apply_set(config, s);
  if (sources.env_seed) config["seed"] = parse_seed(*sources.env_seed, "PROMIX_SEED");
  if (sources.out_dir) config["out_dir"] = sources.out_dir->string();
  return config;
}

std::string run_config_hash(const Json& config) {
  Json hashed = config;
  hashed.erase("out_dir");
  return config_hash(hashed);
}

RunConfig parse_run_config(const Json& j) {
  RunConfig rc;
  rc.json = j;
  rc.seed = j.at("seed").get<std::uint64_t>();
  rc.seeds = seed_list(j.at("seeds"));
  rc.out_dir = j.at("out_dir").get<std::string>();
  rc.tau = j.at("tau").get<double>();
  if (!(rc.tau > 0.0)) throw ConfigError("/tau", "temperature must be positive");
  rc.vocab_pool_size = j.at("vocab_pool_size").get<std::size_t>();

  const auto& data = j.at("data");
  SyntheticConfig synth;
  if (data.contains("files")) {
    const auto& f = data["files"];
    rc.data = EmbeddingFiles{f.at("train").get<std::string>(), f.at("test").get<std::string>(),
                             f.at("prototypes").get<std::string>()};
  } else {
    const auto& s = data.at("synthetic");
    synth.dim = s.at("dim").get<std::size_t>();
    synth.num_classes = s.at("num_classes").get<std::size_t>();
    synth.shots = s.at("shots").get<std::size_t>();
    synth.test_per_class = s.at("test_per_class").get<std::size_t>();
    synth.intra_noise = s.at("intra_noise").get<double>();
    synth.proto_noise = s.at("proto_noise").get<double>();
    synth.confusion_pairs = s.at("confusion_pairs").get<std::size_t>();
    synth.seed = rc.seed;
    rc.data = synth;
  }

  const auto& part = j.at("partition");
  const auto kind = part.at("kind").get<std::string>();
  if (kind == "base_new") {
    rc.partition = BaseNewSplit{};
  } else if (kind == "sessions") {
    rc.partition = SessionSchedule{part.at("base_classes").get<std::size_t>(),
                                   part.at("way").get<std::size_t>(),
                                   part.at("incremental_sessions").get<std::size_t>()};
  } else if (kind == "explicit") {
    ExplicitSets sets;
    const auto& raw = part.at("sets");
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const std::string p = "/partition/sets/" + std::to_string(i);
      if (!raw[i].is_array()) throw ConfigError(p, "expected array of class indices");
      std::vector<ClassId> set;
      for (std::size_t k = 0; k < raw[i].size(); ++k) {
        if (!is_count(raw[i][k])) {
          throw ConfigError(p + "/" + std::to_string(k), "expected non-negative integer");
        }
        set.push_back(raw[i][k].get<ClassId>());
      }
      sets.sets.push_back(std::move(set));
    }
    rc.partition = std::move(sets);
  } else {
    throw ConfigError("/partition/kind",
                      "unknown partition kind '" + kind + "' (base_new, sessions, explicit)");
  }

  const auto& h = j.at("hyper");
  rc.hyper.w = h.at("w").get<double>();
  rc.hyper.ent_weight = h.at("ent_weight").get<double>();
  rc.hyper.margin = h.at("margin").get<double>();
  rc.hyper.context_length = h.at("context_length").get<std::size_t>();

  const auto& l = j.at("loss");
  rc.loss.kind = parse_enum<LossKind>(l.at("kind"), "/loss/kind",
                                      [](const std::string& s) { return loss_kind_from_string(s); });
  rc.loss.w = rc.hyper.w;
  rc.loss.gamma = l.at("gamma").get<double>();
  rc.loss.q = l.at("q").get<double>();

  const auto& o = j.at("optimizer");
  const auto& op = o.at("prompt");
  rc.opt.prompt.lr = op.at("lr").get<double>();
  rc.opt.prompt.weight_decay = op.at("weight_decay").get<double>();
  rc.opt.prompt.beta1 = op.at("beta1").get<double>();
  rc.opt.prompt.beta2 = op.at("beta2").get<double>();
  rc.opt.prompt.eps = op.at("eps").get<double>();
  const auto& ow = o.at("weights");
  rc.opt.weights.lr = ow.at("lr").get<double>();
  rc.opt.weights.momentum = ow.at("momentum").get<double>();
  rc.opt.weights.weight_decay = ow.at("weight_decay").get<double>();
  rc.opt.epochs = o.at("epochs").get<std::size_t>();
  rc.opt.batch_size = o.at("batch_size").get<std::size_t>();
  rc.opt.weight_epochs = o.at("weight_epochs").get<std::size_t>();
  rc.opt.seed = rc.seed;

  const auto& oc = j.at("outclass");
  rc.outclass.kind = parse_enum<OutclassKind>(
      oc.at("kind"), "/outclass/kind",
      [](const std::string& s) { return outclass_kind_from_string(s); });
  if (!oc.at("count").is_null()) rc.outclass.count = oc.at("count").get<std::size_t>();

  rc.weights = parse_enum<Parameterization>(
      j.at("weights"), "/weights",
      [](const std::string& s) { return parameterization_from_string(s); });
  if (rc.weights == Parameterization::kDirect) {
    throw ConfigError("/weights", "weights must be one_stage or two_stage");
  }

  try {
    rc.hyper.validate();
    rc.loss.validate();
    rc.opt.validate();
    if (const auto* s = std::get_if<SyntheticConfig>(&rc.data)) s->validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const InvalidArgument& e) {
    throw ConfigError("", e.what());
  }

  auto& b = rc.base_to_new;
  b.data = rc.data;
  b.hyper = rc.hyper;
  b.loss = rc.loss;
  b.opt = rc.opt;
  b.outclass = rc.outclass;
  b.weights = rc.weights;
  b.seeds = rc.seeds;
  b.tau = rc.tau;
  b.vocab_pool_size = rc.vocab_pool_size;
  b.compare_parameterizations = j.at("eval").at("compare_parameterizations").get<bool>();

  auto with_classes = [&](std::size_t classes, std::size_t pairs) -> DataSource {
    if (!std::holds_alternative<SyntheticConfig>(rc.data)) return rc.data;
    auto s = synth;
    s.num_classes = classes;
    s.confusion_pairs = pairs;
    return s;
  };

  const auto& fs = j.at("fscil");
  auto& f = rc.fscil;
  f.data = with_classes(fs.at("num_classes").get<std::size_t>(), synth.confusion_pairs);
  f.schedule = SessionSchedule{fs.at("base_classes").get<std::size_t>(),
                               fs.at("way").get<std::size_t>(),
                               fs.at("incremental_sessions").get<std::size_t>()};
  f.incremental_shots = fs.at("incremental_shots").get<std::size_t>();
  f.hyper = rc.hyper;
  f.hyper.margin = fs.at("margin").get<double>();
  f.hyper.context_length = fs.at("context_length").get<std::size_t>();
  f.loss = rc.loss;
  f.opt = rc.opt;
  f.first_session_weight_epochs = fs.at("first_session_weight_epochs").get<std::size_t>();
  f.later_session_weight_epochs = fs.at("later_session_weight_epochs").get<std::size_t>();
  f.first_session_outclass = rc.outclass;
  f.seed = 0;
  f.tau = rc.tau;
  f.vocab_pool_size = rc.vocab_pool_size;

  const auto& as = j.at("assume");
  auto& a = rc.assume;
  a.data = with_classes(as.at("num_classes").get<std::size_t>(), synth.confusion_pairs);
  a.splits = as.at("splits").get<std::size_t>();
  a.hyper = rc.hyper;
  a.loss = rc.loss;
  a.opt = rc.opt;
  a.tau = rc.tau;

  const auto& cs = j.at("confusing");
  auto& c = rc.confusing;
  c.data = with_classes(synth.num_classes, cs.at("confusion_pairs").get<std::size_t>());
  c.opt = rc.opt;
  c.context_length = cs.at("context_length").get<std::size_t>();
  c.w_baseline = cs.at("w_baseline").get<double>();
  c.w_coa = cs.at("w_coa").get<double>();
  c.gap_threshold = cs.at("gap_threshold").get<double>();
  c.tau = rc.tau;

  const auto& bs = j.at("bound");
  auto& bd = rc.bound;
  bd.trials = bs.at("trials").get<std::size_t>();
  bd.min_prompts = bs.at("min_prompts").get<std::size_t>();
  bd.max_prompts = bs.at("max_prompts").get<std::size_t>();
  bd.min_classes = bs.at("min_classes").get<std::size_t>();
  bd.max_classes = bs.at("max_classes").get<std::size_t>();
  bd.dim = bs.at("dim").get<std::size_t>();
  bd.samples = bs.at("samples").get<std::size_t>();
  bd.tau = rc.tau;
  bd.seed = rc.seed;

  const auto& ls = j.at("losses");
  auto& z = rc.losses;
  z.data = rc.data;
  z.opt = rc.opt;
  z.context_length = ls.at("context_length").get<std::size_t>();
  z.seeds = rc.seeds;
  z.tau = rc.tau;
  const auto& names = ls.at("kinds");
  for (std::size_t i = 0; i < names.size(); ++i) {
    const std::string p = "/losses/kinds/" + std::to_string(i);
    if (!names[i].is_string()) throw ConfigError(p, "expected string");
    LossConfig loss = rc.loss;
    loss.kind = parse_enum<LossKind>(names[i], p,
                                     [](const std::string& s) { return loss_kind_from_string(s); });
    z.losses.push_back(loss);
  }
  if (z.losses.empty()) throw ConfigError("/losses/kinds", "at least one loss is required");
  return rc;
}

}  // namespace promix::cli
