#include "promix/embedspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "promix/error.hpp"
#include "promix/random.hpp"

namespace promix {

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw InvalidArgument("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

double l2_norm(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x * x;
  return std::sqrt(acc);
}

Embedding Embedding::normalized(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("embedding must have positive dimension");
  for (double x : values) {
    if (!std::isfinite(x)) throw InvalidArgument("embedding has non-finite component");
  }
  const double norm = l2_norm(values);
  if (!(norm > 0.0)) throw InvalidArgument("cannot normalize a zero vector");
  for (auto& x : values) x /= norm;
  return Embedding(std::move(values));
}

Embedding Embedding::from_unit(std::vector<double> values, double tolerance) {
  if (values.empty()) throw InvalidArgument("embedding must have positive dimension");
  for (double x : values) {
    if (!std::isfinite(x)) throw InvalidArgument("embedding has non-finite component");
  }
  const double norm = l2_norm(values);
  if (std::abs(norm - 1.0) > tolerance) {
    throw InvalidArgument("embedding is not unit-norm (norm " + std::to_string(norm) + ")");
  }
  return Embedding(std::move(values));
}

double cosine_similarity(const Embedding& a, const Embedding& b) {
  return dot(a.values(), b.values());
}

EmbeddingSet::EmbeddingSet(std::vector<std::string> class_names, std::size_t dim,
                           std::vector<LabeledSample> samples)
    : class_names_(std::move(class_names)), dim_(dim) {
  if (dim_ == 0) throw InvalidArgument("embedding set dimension must be positive");
  samples_.reserve(samples.size());
  for (auto& s : samples) add(std::move(s));
}

void EmbeddingSet::check(const LabeledSample& sample) const {
  if (sample.embedding.dim() != dim_) {
    throw InvalidArgument("sample dimension " + std::to_string(sample.embedding.dim()) +
                          " does not match set dimension " + std::to_string(dim_));
  }
  if (sample.label >= class_names_.size()) {
    throw InvalidArgument("sample label " + std::to_string(sample.label) +
                          " out of range for " + std::to_string(class_names_.size()) +
                          " classes");
  }
}

void EmbeddingSet::add(LabeledSample sample) {
  check(sample);
  samples_.push_back(std::move(sample));
}

EmbeddingSet EmbeddingSet::filter_by_classes(std::span<const ClassId> classes) const {
  std::vector<bool> keep(class_names_.size(), false);
  for (ClassId c : classes) {
    if (c >= keep.size()) throw InvalidArgument("class filter index out of range");
    keep[c] = true;
  }
  EmbeddingSet out(class_names_, dim_);
  for (const auto& s : samples_) {
    if (keep[s.label]) out.samples_.push_back(s);
  }
  return out;
}

std::vector<ClassId> EmbeddingSet::labels_present() const {
  std::vector<bool> seen(class_names_.size(), false);
  for (const auto& s : samples_) seen[s.label] = true;
  std::vector<ClassId> out;
  for (ClassId c = 0; c < seen.size(); ++c) {
    if (seen[c]) out.push_back(c);
  }
  return out;
}

DomainPartition::DomainPartition(std::vector<std::vector<ClassId>> subsets,
                                 std::size_t class_count)
    : subsets_(std::move(subsets)) {
  if (subsets_.empty()) throw InvalidArgument("partition needs at least one subset");
  constexpr std::size_t kUnassigned = static_cast<std::size_t>(-1);
  owner_.assign(class_count, kUnassigned);
  for (std::size_t i = 0; i < subsets_.size(); ++i) {
    for (ClassId c : subsets_[i]) {
      if (c >= class_count) {
        throw InvalidArgument("partition class " + std::to_string(c) + " out of range");
      }
      if (owner_[c] != kUnassigned) {
        throw InvalidArgument("partition subsets overlap at class " + std::to_string(c));
      }
      owner_[c] = i;
    }
  }
  for (ClassId c = 0; c < class_count; ++c) {
    if (owner_[c] == kUnassigned) {
      throw InvalidArgument("partition does not cover class " + std::to_string(c));
    }
  }
  masses_.resize(subsets_.size());
  for (std::size_t i = 0; i < subsets_.size(); ++i) {
    masses_[i] = class_count == 0 ? 0.0
                                  : static_cast<double>(subsets_[i].size()) /
                                        static_cast<double>(class_count);
  }
}

DomainPartition DomainPartition::with_masses_from(const EmbeddingSet& set) const {
  if (set.class_count() != class_count()) {
    throw InvalidArgument("partition and set disagree on class count");
  }
  if (set.empty()) throw InvalidArgument("cannot derive masses from an empty set");
  std::vector<std::size_t> counts(subsets_.size(), 0);
  for (const auto& s : set) ++counts[owner_[s.label]];
  DomainPartition out = *this;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    out.masses_[i] = static_cast<double>(counts[i]) / static_cast<double>(set.size());
  }
  return out;
}

std::size_t DomainPartition::domain_of(ClassId cls) const {
  if (cls >= owner_.size()) {
    throw InvalidArgument("class " + std::to_string(cls) + " is outside the partition");
  }
  return owner_[cls];
}

void SyntheticConfig::validate() const {
  if (dim == 0 || num_classes == 0 || shots == 0 || test_per_class == 0) {
    throw InvalidArgument("synthetic config counts must be positive");
  }
  if (!(intra_noise >= 0.0) || !(proto_noise >= 0.0) || !std::isfinite(intra_noise) ||
      !std::isfinite(proto_noise)) {
    throw InvalidArgument("synthetic noise levels must be finite and non-negative");
  }
  if (confusion_pairs > num_classes / 2) {
    throw InvalidArgument("confusion_pairs must be at most num_classes/2");
  }
  if (confusion_pairs > 0 && dim < 2) {
    throw InvalidArgument("confusion pairs need dim >= 2");
  }
}

std::vector<std::string> synthetic_class_names(std::size_t count) {
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "class_%03zu", i);
    names.emplace_back(buf);
  }
  return names;
}

namespace {

Embedding random_unit(Rng& rng, std::size_t dim) {
  for (;;) {
    auto v = rng.gaussian_vector(dim);
    if (l2_norm(v) > 1e-12) return Embedding::normalized(std::move(v));
  }
}

Embedding perturb(const Embedding& center, Rng& rng, double sigma) {
  if (sigma == 0.0) return center;
  auto v = rng.gaussian_vector(center.dim(), sigma);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += center[i];
  return Embedding::normalized(std::move(v));
}

// Unit vector at cosine `cos_angle` from `first`.
Embedding confusable_partner(const Embedding& first, Rng& rng, double cos_angle) {
  std::vector<double> g;
  double norm = 0.0;
  do {
    g = rng.gaussian_vector(first.dim());
    const double proj = dot(g, first.values());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] -= proj * first[i];
    norm = l2_norm(g);
  } while (norm < 1e-9);
  const double sin_angle = std::sqrt(1.0 - cos_angle * cos_angle);
  std::vector<double> v(first.dim());
  for (std::size_t i = 0; i < v.size(); ++i) {
    v[i] = cos_angle * first[i] + sin_angle * g[i] / norm;
  }
  return Embedding::normalized(std::move(v));
}

}  // namespace

SyntheticDomain generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Rng proto_rng(derive_seed(config.seed, 1));
  Rng train_rng(derive_seed(config.seed, 2));
  Rng test_rng(derive_seed(config.seed, 3));
  Rng align_rng(derive_seed(config.seed, 4));

  SyntheticDomain domain;
  domain.true_prototypes.reserve(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    domain.true_prototypes.push_back(random_unit(proto_rng, config.dim));
  }
  // Pairs (2k, 2k+1); the cosine is kept a little above the floor so the
  // bound survives renormalization rounding.
  for (std::size_t k = 0; k < config.confusion_pairs; ++k) {
    const double cos_angle = proto_rng.uniform(0.91, 0.96);
    domain.true_prototypes[2 * k + 1] =
        confusable_partner(domain.true_prototypes[2 * k], proto_rng, cos_angle);
  }

  auto names = synthetic_class_names(config.num_classes);
  domain.train = EmbeddingSet(names, config.dim);
  domain.test = EmbeddingSet(names, config.dim);
  for (ClassId c = 0; c < config.num_classes; ++c) {
    const auto& proto = domain.true_prototypes[c];
    for (std::size_t i = 0; i < config.shots; ++i) {
      domain.train.add({perturb(proto, train_rng, config.intra_noise), c});
    }
    for (std::size_t i = 0; i < config.test_per_class; ++i) {
      domain.test.add({perturb(proto, test_rng, config.intra_noise), c});
    }
  }

  domain.generalized_prototypes.reserve(config.num_classes);
  for (const auto& proto : domain.true_prototypes) {
    domain.generalized_prototypes.push_back(perturb(proto, align_rng, config.proto_noise));
  }
  return domain;
}

DomainPartition partition_classes(std::size_t class_count, const PartitionSpec& spec,
                                  std::uint64_t seed) {
  if (class_count == 0) throw InvalidArgument("partition needs at least one class");

  if (std::holds_alternative<BaseNewSplit>(spec)) {
    std::vector<ClassId> order(class_count);
    std::iota(order.begin(), order.end(), ClassId{0});
    Rng rng(derive_seed(seed, 0xba5e));
    rng.shuffle(order);
    const std::size_t base = (class_count + 1) / 2;
    std::vector<ClassId> base_set(order.begin(), order.begin() + static_cast<long>(base));
    std::vector<ClassId> new_set(order.begin() + static_cast<long>(base), order.end());
    std::sort(base_set.begin(), base_set.end());
    std::sort(new_set.begin(), new_set.end());
    return DomainPartition({std::move(new_set), std::move(base_set)}, class_count);
  }

  if (const auto* sched = std::get_if<SessionSchedule>(&spec)) {
    if (sched->base_classes == 0) throw InvalidArgument("base session needs classes");
    if (sched->incremental_sessions > 0 && sched->way == 0) {
      throw InvalidArgument("incremental sessions need way > 0");
    }
    const std::size_t used = sched->base_classes + sched->way * sched->incremental_sessions;
    if (used > class_count) {
      throw InvalidArgument("session schedule needs " + std::to_string(used) +
                            " classes but only " + std::to_string(class_count) +
                            " exist");
    }
    std::vector<std::vector<ClassId>> subsets;
    subsets.emplace_back();
    for (ClassId c = used; c < class_count; ++c) subsets[0].push_back(c);
    std::vector<ClassId> base(sched->base_classes);
    std::iota(base.begin(), base.end(), ClassId{0});
    subsets.push_back(std::move(base));
    for (std::size_t s = 0; s < sched->incremental_sessions; ++s) {
      std::vector<ClassId> session(sched->way);
      std::iota(session.begin(), session.end(), sched->base_classes + s * sched->way);
      subsets.push_back(std::move(session));
    }
    return DomainPartition(std::move(subsets), class_count);
  }

  const auto& explicit_sets = std::get<ExplicitSets>(spec);
  return DomainPartition(explicit_sets.sets, class_count);
}

}  // namespace promix
