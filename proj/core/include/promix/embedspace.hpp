#pragma once

// Embedding data model, synthetic domains and class partitions.
//
// All similarity computations in the library run on unit-norm vectors, so
// cosine similarity is a plain dot product. Embeddings stand in for the
// outputs of frozen image/text encoders.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace promix {

using ClassId = std::size_t;

inline constexpr double kUnitNormTolerance = 1e-9;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);

// Unit-norm vector. Immutable after construction.
class Embedding {
 public:
  Embedding() = default;

  // Scales `values` to unit length. Throws InvalidArgument on a zero,
  // empty, or non-finite vector.
  static Embedding normalized(std::vector<double> values);

  // Accepts `values` only if it is already unit-norm within `tolerance`.
  static Embedding from_unit(std::vector<double> values,
                             double tolerance = kUnitNormTolerance);

  std::span<const double> values() const noexcept { return values_; }
  std::size_t dim() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  explicit Embedding(std::vector<double> values) : values_(std::move(values)) {}

  std::vector<double> values_;
};

// Dot product of two unit vectors. Throws InvalidArgument on dimension
// mismatch.
double cosine_similarity(const Embedding& a, const Embedding& b);

struct LabeledSample {
  Embedding embedding;
  ClassId label = 0;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

class EmbeddingSet {
 public:
  EmbeddingSet() = default;
  EmbeddingSet(std::vector<std::string> class_names, std::size_t dim,
               std::vector<LabeledSample> samples = {});

  void add(LabeledSample sample);

  std::size_t size() const noexcept { return samples_.size(); }
  bool empty() const noexcept { return samples_.empty(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t class_count() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  const std::vector<LabeledSample>& samples() const noexcept { return samples_; }
  const LabeledSample& operator[](std::size_t i) const { return samples_[i]; }

  auto begin() const noexcept { return samples_.begin(); }
  auto end() const noexcept { return samples_.end(); }

  // Samples whose label is in `classes`, in original order. Class list and
  // dimension are kept.
  EmbeddingSet filter_by_classes(std::span<const ClassId> classes) const;

  // Sorted distinct labels that occur in the set.
  std::vector<ClassId> labels_present() const;

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  void check(const LabeledSample& sample) const;

  std::vector<std::string> class_names_;
  std::size_t dim_ = 0;
  std::vector<LabeledSample> samples_;
};

// Disjoint class subsets Y_0..Y_K with sub-domain masses. Subset i is the
// domain owned by prompt i; Y_0 belongs to the generalized prompt and may be
// empty.
class DomainPartition {
 public:
  DomainPartition() = default;

  // Validates disjointness and coverage of [0, class_count). Masses default
  // to the class-count proportions |Y_i| / class_count.
  DomainPartition(std::vector<std::vector<ClassId>> subsets, std::size_t class_count);

  // Same partition, masses replaced by empirical sample proportions.
  DomainPartition with_masses_from(const EmbeddingSet& set) const;

  std::size_t subset_count() const noexcept { return subsets_.size(); }
  std::size_t class_count() const noexcept { return owner_.size(); }
  const std::vector<ClassId>& subset(std::size_t i) const { return subsets_.at(i); }
  const std::vector<std::vector<ClassId>>& subsets() const noexcept { return subsets_; }
  const std::vector<double>& masses() const noexcept { return masses_; }

  // Index of the subset containing `cls`.
  std::size_t domain_of(ClassId cls) const;

 private:
  std::vector<std::vector<ClassId>> subsets_;
  std::vector<double> masses_;
  std::vector<std::size_t> owner_;
};

struct SyntheticConfig {
  std::size_t dim = 256;
  std::size_t num_classes = 20;
  std::size_t shots = 16;
  std::size_t test_per_class = 50;
  double intra_noise = 0.1;
  double proto_noise = 0.15;
  std::size_t confusion_pairs = 0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticDomain {
  EmbeddingSet train;
  EmbeddingSet test;
  std::vector<Embedding> generalized_prototypes;
  std::vector<Embedding> true_prototypes;
};

// Lowest cosine between the two members of a generated confusion pair.
inline constexpr double kConfusionPairMinCosine = 0.9;

SyntheticDomain generate_synthetic(const SyntheticConfig& config);

std::vector<std::string> synthetic_class_names(std::size_t count);

struct BaseNewSplit {};

struct SessionSchedule {
  std::size_t base_classes = 60;
  std::size_t way = 5;
  std::size_t incremental_sessions = 8;
};

struct ExplicitSets {
  std::vector<std::vector<ClassId>> sets;
};

using PartitionSpec = std::variant<BaseNewSplit, SessionSchedule, ExplicitSets>;

// BaseNewSplit: seeded shuffle, first ceil(n/2) classes form Y_1 and the rest
// Y_0. SessionSchedule: Y_1 is the base session, Y_2..Y_K fixed-width
// incremental sessions in class-index order, Y_0 any remainder. ExplicitSets:
// passed through after validation (sets[0] is Y_0).
DomainPartition partition_classes(std::size_t class_count, const PartitionSpec& spec,
                                  std::uint64_t seed);

}  // namespace promix
