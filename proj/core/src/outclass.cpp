#include "promix/outclass.hpp"

#include <numeric>

#include "promix/error.hpp"
#include "promix/random.hpp"

namespace promix {

std::string_view to_string(OutclassKind kind) {
  switch (kind) {
    case OutclassKind::kNone: return "none";
    case OutclassKind::kRandomString: return "random_string";
    case OutclassKind::kRandomWord: return "random_word";
    case OutclassKind::kMixed: return "mixed";
  }
  return "?";
}

OutclassKind outclass_kind_from_string(std::string_view name) {
  for (auto kind : {OutclassKind::kNone, OutclassKind::kRandomString, OutclassKind::kRandomWord,
                    OutclassKind::kMixed}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidArgument("unknown out-class strategy '" + std::string(name) + "'");
}

namespace {

std::vector<Embedding> sphere_samples(std::size_t count, std::size_t dim, Rng& rng) {
  std::vector<Embedding> out;
  out.reserve(count);
  while (out.size() < count) {
    auto v = rng.gaussian_vector(dim);
    if (l2_norm(v) > 1e-12) out.push_back(Embedding::normalized(std::move(v)));
  }
  return out;
}

std::vector<Embedding> pool_samples(std::size_t count, std::span<const Embedding> pool,
                                    std::size_t dim, Rng& rng) {
  if (count > pool.size()) {
    throw InvalidArgument("vocabulary pool exhausted: need " + std::to_string(count) +
                          ", have " + std::to_string(pool.size()));
  }
  std::vector<std::size_t> order(pool.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  std::vector<Embedding> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& e = pool[order[i]];
    if (e.dim() != dim) throw InvalidArgument("vocabulary pool dimension mismatch");
    out.push_back(e);
  }
  return out;
}

}  // namespace

std::vector<Embedding> generate_outclass(OutclassKind kind, std::size_t count, std::size_t dim,
                                         std::uint64_t seed,
                                         std::span<const Embedding> vocab_pool) {
  if (kind == OutclassKind::kNone) return {};
  if (count < 2) throw InvalidArgument("out-class set needs at least two anchors");
  if (dim == 0) throw InvalidArgument("out-class dimension must be positive");
  Rng rng(derive_seed(seed, 0x0c1a55));
  switch (kind) {
    case OutclassKind::kRandomString:
      return sphere_samples(count, dim, rng);
    case OutclassKind::kRandomWord:
      return pool_samples(count, vocab_pool, dim, rng);
    case OutclassKind::kMixed: {
      auto out = sphere_samples((count + 1) / 2, dim, rng);
      auto words = pool_samples(count / 2, vocab_pool, dim, rng);
      out.insert(out.end(), words.begin(), words.end());
      return out;
    }
    case OutclassKind::kNone:
      break;
  }
  return {};
}

std::vector<Embedding> generate_vocab_pool(std::size_t size, std::size_t dim, double proto_noise,
                                           std::uint64_t seed) {
  if (dim == 0) throw InvalidArgument("vocabulary dimension must be positive");
  if (!(proto_noise >= 0.0)) throw InvalidArgument("vocabulary noise must be non-negative");
  Rng rng(derive_seed(seed, 0x70c4b));
  std::vector<Embedding> pool;
  pool.reserve(size);
  while (pool.size() < size) {
    auto proto = rng.gaussian_vector(dim);
    const double norm = l2_norm(proto);
    if (norm < 1e-12) continue;
    for (auto& x : proto) x = x / norm + proto_noise * rng.gaussian();
    pool.push_back(Embedding::normalized(std::move(proto)));
  }
  return pool;
}

}  // namespace promix
