#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "promix/embedding_io.hpp"
#include "promix/error.hpp"
#include "promix/harness.hpp"
#include "test_support.hpp"

namespace promix {
namespace {

using testing::Gen;

TEST(EmbeddingFileProperty, HundredRandomFilesRoundTripByteExact) {
  Gen gen(101);
  const auto path = std::filesystem::temp_directory_path() / "promix_prop_roundtrip.emb";
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t classes = gen.index(1, 12);
    const std::size_t dim = gen.index(1, 96);
    const std::size_t count = gen.index(0, 40);
    const auto set = gen.labeled_set(classes, dim, count);
    write_embedding_file(set, path);
    const auto bytes = read_file_bytes(path);
    const auto back = read_embedding_file(path);
    ASSERT_EQ(back.size(), count);
    ASSERT_EQ(back.class_names(), set.class_names());
    write_embedding_file(back, path);
    ASSERT_EQ(read_file_bytes(path), bytes) << "trial " << trial << " dim " << dim;
    ASSERT_EQ(read_embedding_file(path), back) << "trial " << trial;
    for (std::size_t i = 0; i < count; ++i) {
      ASSERT_EQ(back[i].label, set[i].label);
      for (std::size_t d = 0; d < dim; ++d) {
        ASSERT_NEAR(back[i].embedding[d], set[i].embedding[d], 1e-6);
      }
    }
  }
  std::filesystem::remove(path);
}

void expect_partition_invariants(const DomainPartition& p, std::size_t n) {
  std::vector<int> seen(n, 0);
  double mass = 0.0;
  for (std::size_t k = 0; k < p.subset_count(); ++k) {
    for (ClassId c : p.subset(k)) {
      ASSERT_LT(c, n);
      ++seen[c];
      EXPECT_EQ(p.domain_of(c), k);
    }
    mass += p.masses()[k];
  }
  for (std::size_t c = 0; c < n; ++c) EXPECT_EQ(seen[c], 1) << "class " << c;
  EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(PartitionProperty, BaseNewCoversAllClassesOnce) {
  Gen gen(102);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen.index(1, 300);
    const auto p = partition_classes(n, BaseNewSplit{}, gen.index(0, 1000));
    ASSERT_EQ(p.subset_count(), 2u);
    EXPECT_EQ(p.subset(1).size(), (n + 1) / 2);
    expect_partition_invariants(p, n);
  }
}

TEST(PartitionProperty, SessionScheduleCoversAllClassesOnce) {
  Gen gen(103);
  for (int trial = 0; trial < 200; ++trial) {
    const SessionSchedule s{.base_classes = gen.index(1, 40), .way = gen.index(1, 8),
                            .incremental_sessions = gen.index(0, 10)};
    const std::size_t used = s.base_classes + s.way * s.incremental_sessions;
    const std::size_t n = used + gen.index(0, 10);
    const auto p = partition_classes(n, s, 0);
    ASSERT_EQ(p.subset_count(), s.incremental_sessions + 2);
    EXPECT_EQ(p.subset(0).size(), n - used);
    EXPECT_EQ(p.subset(1).size(), s.base_classes);
    expect_partition_invariants(p, n);
    if (used > 1) {
      EXPECT_THROW(partition_classes(used - 1, s, 0), InvalidArgument);
    }
  }
}

TEST(PartitionProperty, ExplicitCoversAreAccepted) {
  Gen gen(104);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = gen.index(2, 60);
    const std::size_t k = gen.index(1, std::min<std::size_t>(n, 6));
    const auto sets = gen.cover(n, k);
    const auto p = partition_classes(n, ExplicitSets{sets}, 0);
    expect_partition_invariants(p, n);
  }
}

TEST(DeterminismProperty, SyntheticAndTuningRepeatBitForBit) {
  Gen gen(105);
  for (int trial = 0; trial < 5; ++trial) {
    const SyntheticConfig cfg{.dim = gen.index(4, 24), .num_classes = gen.index(2, 8),
                              .shots = gen.index(1, 4), .test_per_class = 2,
                              .seed = gen.index(0, 1u << 20)};
    const auto a = generate_synthetic(cfg);
    const auto b = generate_synthetic(cfg);
    ASSERT_EQ(a.train, b.train);
    ASSERT_EQ(a.test, b.test);
    const auto init = PromptHead::learnable(a.generalized_prototypes, a.train.class_names(), 2,
                                            cfg.seed);
    OptimizerConfig opt;
    opt.epochs = 3;
    opt.batch_size = 4;
    opt.seed = cfg.seed;
    EXPECT_EQ(tune_prompt(init, a.train, LossConfig{}, opt).head.context(),
              tune_prompt(init, b.train, LossConfig{}, opt).head.context());
  }
}

}  // namespace
}  // namespace promix
