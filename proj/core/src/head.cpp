#include "promix/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "promix/embedding_io.hpp"
#include "promix/error.hpp"
#include "promix/random.hpp"

namespace promix {

SimilarityVector::SimilarityVector(std::vector<double> values) : values_(std::move(values)) {
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("similarity vector has a non-finite entry");
  }
}

PredictiveDistribution::PredictiveDistribution(std::vector<double> probabilities,
                                               double temperature)
    : probs_(std::move(probabilities)), tau_(temperature) {
  if (probs_.empty()) throw InvalidArgument("empty predictive distribution");
  if (!(tau_ > 0.0)) throw InvalidArgument("temperature must be positive");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw InvalidArgument("probabilities sum to " + std::to_string(total));
  }
}

std::size_t PredictiveDistribution::argmax() const {
  return static_cast<std::size_t>(std::max_element(probs_.begin(), probs_.end()) -
                                  probs_.begin());
}

std::vector<double> stable_softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidArgument("softmax of an empty vector");
  double top = -std::numeric_limits<double>::infinity();
  for (double z : logits) {
    if (!std::isfinite(z)) throw InvalidArgument("softmax input is not finite");
    top = std::max(top, z);
  }
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (auto& p : out) p /= total;
  return out;
}

PredictiveDistribution predict(std::span<const double> similarities, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw InvalidArgument("temperature must be positive");
  std::vector<double> logits(similarities.begin(), similarities.end());
  for (auto& z : logits) {
    if (!std::isfinite(z)) throw InvalidArgument("non-finite similarity");
    z /= tau;
  }
  return PredictiveDistribution(stable_softmax(logits), tau);
}

PredictiveDistribution predict(const SimilarityVector& similarities, double tau) {
  return predict(similarities.values(), tau);
}

PromptHead PromptHead::frozen(std::vector<Embedding> anchors,
                              std::vector<std::string> class_names) {
  return PromptHead(std::move(anchors), std::move(class_names), {});
}

PromptHead PromptHead::learnable(std::vector<Embedding> anchors,
                                 std::vector<std::string> class_names,
                                 std::size_t context_length, std::uint64_t seed,
                                 double init_stddev) {
  if (anchors.empty()) throw InvalidArgument("head needs at least one class anchor");
  const std::size_t dim = anchors.front().dim();
  Rng rng(derive_seed(seed, 0xc0ffee));
  std::vector<std::vector<double>> context;
  context.reserve(context_length);
  for (std::size_t m = 0; m < context_length; ++m) {
    context.push_back(rng.gaussian_vector(dim, init_stddev));
  }
  return PromptHead(std::move(anchors), std::move(class_names), std::move(context));
}

PromptHead::PromptHead(std::vector<Embedding> anchors, std::vector<std::string> class_names,
                       std::vector<std::vector<double>> context)
    : anchors_(std::move(anchors)),
      class_names_(std::move(class_names)),
      context_(std::move(context)) {
  if (anchors_.empty()) throw InvalidArgument("head needs at least one class anchor");
  if (anchors_.size() != class_names_.size()) {
    throw InvalidArgument("anchor count must match class-name count");
  }
  dim_ = anchors_.front().dim();
  for (const auto& a : anchors_) {
    if (a.dim() != dim_) throw InvalidArgument("anchors differ in dimension");
  }
  for (const auto& row : context_) {
    if (row.size() != dim_) throw InvalidArgument("context row dimension mismatch");
    for (double v : row) {
      if (!std::isfinite(v)) throw InvalidArgument("context has a non-finite value");
    }
  }
  rebuild();
}

void PromptHead::rebuild() {
  context_mean_.assign(dim_, 0.0);
  if (!context_.empty()) {
    for (const auto& row : context_) {
      for (std::size_t k = 0; k < dim_; ++k) context_mean_[k] += row[k];
    }
    for (auto& v : context_mean_) v /= static_cast<double>(context_.size());
  }
  effective_.clear();
  norms_.clear();
  effective_.reserve(anchors_.size());
  norms_.reserve(anchors_.size());
  for (const auto& a : anchors_) {
    if (context_.empty()) {
      effective_.push_back(a);
      norms_.push_back(1.0);
      continue;
    }
    std::vector<double> u(dim_);
    for (std::size_t k = 0; k < dim_; ++k) u[k] = a[k] + context_mean_[k];
    const double norm = l2_norm(u);
    if (!(norm > 1e-12)) throw InvalidArgument("context cancels a class anchor");
    norms_.push_back(norm);
    effective_.push_back(Embedding::normalized(std::move(u)));
  }
}

SimilarityVector PromptHead::similarities(const Embedding& x) const {
  if (x.dim() != dim_) throw InvalidArgument("input dimension does not match head");
  std::vector<double> s(effective_.size());
  for (std::size_t l = 0; l < effective_.size(); ++l) s[l] = dot(x.values(), effective_[l].values());
  return SimilarityVector(std::move(s));
}

std::vector<double> PromptHead::similarities(const Embedding& x,
                                             std::span<const ClassId> classes) const {
  if (x.dim() != dim_) throw InvalidArgument("input dimension does not match head");
  std::vector<double> s;
  s.reserve(classes.size());
  for (ClassId c : classes) s.push_back(dot(x.values(), class_embedding(c).values()));
  return s;
}

PromptHead PromptHead::with_context(std::vector<std::vector<double>> context) const {
  return PromptHead(anchors_, class_names_, std::move(context));
}

PromptHead PromptHead::with_anchors(std::vector<Embedding> anchors,
                                    std::vector<std::string> class_names) const {
  return PromptHead(std::move(anchors), std::move(class_names), context_);
}

std::size_t local_index(std::span<const ClassId> classes, ClassId cls) {
  auto it = std::find(classes.begin(), classes.end(), cls);
  if (it == classes.end()) {
    throw InvalidArgument("label " + std::to_string(cls) + " is not in the class list");
  }
  return static_cast<std::size_t>(it - classes.begin());
}

std::vector<ClassId> all_classes(std::size_t count) {
  std::vector<ClassId> out(count);
  std::iota(out.begin(), out.end(), ClassId{0});
  return out;
}

double expected_error(const PromptHead& head, const EmbeddingSet& set, double tau,
                      std::optional<std::span<const ClassId>> classes) {
  if (set.empty()) throw InvalidArgument("expected error of an empty set");
  const auto everything = all_classes(head.class_count());
  const std::span<const ClassId> list = classes ? *classes : std::span<const ClassId>(everything);
  double total = 0.0;
  for (const auto& sample : set) {
    const auto p = predict(head.similarities(sample.embedding, list), tau);
    total += -std::log(std::max(p[local_index(list, sample.label)], 1e-300));
  }
  return total / static_cast<double>(set.size());
}

void save_head(const PromptHead& head, double tau, const std::filesystem::path& json_path) {
  auto bin_path = json_path;
  bin_path.replace_extension(".emb");

  RawEmbeddingFile raw;
  raw.dim = static_cast<std::uint32_t>(head.dim());
  raw.class_names = head.class_names();
  for (std::size_t m = 0; m < head.context_length(); ++m) {
    RawRecord rec;
    rec.label = static_cast<std::uint32_t>(m);
    for (double v : head.context()[m]) rec.values.push_back(static_cast<float>(v));
    raw.records.push_back(std::move(rec));
  }
  for (ClassId c = 0; c < head.class_count(); ++c) {
    RawRecord rec;
    rec.label = static_cast<std::uint32_t>(c);
    rec.values = stable_floats(head.anchors()[c].values());
    raw.records.push_back(std::move(rec));
  }
  write_file_bytes(bin_path, encode_raw(raw));

  nlohmann::json manifest;
  manifest["M"] = head.context_length();
  manifest["D"] = head.dim();
  manifest["class_names"] = head.class_names();
  manifest["tau"] = tau;
  manifest["binary"] = bin_path.filename().string();
  write_file_bytes(json_path, manifest.dump(2) + "\n");
}

HeadCheckpoint load_head(const std::filesystem::path& json_path) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file_bytes(json_path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      "head manifest " + json_path.string() + ": " + e.what());
  }
  try {
    const auto m = manifest.at("M").get<std::size_t>();
    const auto d = manifest.at("D").get<std::size_t>();
    const auto names = manifest.at("class_names").get<std::vector<std::string>>();
    const double tau = manifest.at("tau").get<double>();
    const auto bin_path = json_path.parent_path() / manifest.at("binary").get<std::string>();

    const auto raw = decode_raw(read_file_bytes(bin_path));
    if (raw.dim != d || raw.records.size() != m + names.size() || raw.class_names != names) {
      throw FormatError(FormatError::Kind::kBadHeader,
                        "head binary does not match its manifest");
    }
    std::vector<std::vector<double>> context;
    for (std::size_t i = 0; i < m; ++i) {
      std::vector<double> row(raw.records[i].values.begin(), raw.records[i].values.end());
      for (double v : row) {
        if (!std::isfinite(v)) {
          throw FormatError(FormatError::Kind::kNonFinite, "head context is not finite");
        }
      }
      context.push_back(std::move(row));
    }
    std::vector<Embedding> anchors;
    for (std::size_t c = 0; c < names.size(); ++c) {
      const auto& rec = raw.records[m + c];
      if (rec.label != c) {
        throw FormatError(FormatError::Kind::kBadLabel, "head anchors out of order");
      }
      std::vector<double> v(rec.values.begin(), rec.values.end());
      for (double x : v) {
        if (!std::isfinite(x)) {
          throw FormatError(FormatError::Kind::kNonFinite, "head anchor is not finite");
        }
      }
      if (std::abs(l2_norm(v) - 1.0) > kReadNormTolerance) {
        throw FormatError(FormatError::Kind::kNotNormalized, "head anchor is not unit-norm");
      }
      anchors.push_back(Embedding::normalized(std::move(v)));
    }
    return {PromptHead(std::move(anchors), names, std::move(context)), tau};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      "head manifest " + json_path.string() + ": " + e.what());
  }
}

}  // namespace promix
