#pragma once

// Surrogate out-class anchors for fitting out-weights.
//
// random_string draws unstructured directions uniformly on the sphere;
// random_word samples without replacement from a held-out vocabulary pool
// built by the same process as real class anchors; mixed takes ceil(n/2)
// strings and floor(n/2) words.

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "promix/embedspace.hpp"

namespace promix {

enum class OutclassKind { kNone, kRandomString, kRandomWord, kMixed };

std::string_view to_string(OutclassKind kind);
OutclassKind outclass_kind_from_string(std::string_view name);

struct OutclassStrategy {
  OutclassKind kind = OutclassKind::kRandomWord;
  // Number of anchors; unset means "same as the in-class count".
  std::optional<std::size_t> count;

  std::size_t resolved_count(std::size_t in_class_count) const {
    return count.value_or(in_class_count);
  }
};

std::vector<Embedding> generate_outclass(OutclassKind kind, std::size_t count, std::size_t dim,
                                         std::uint64_t seed,
                                         std::span<const Embedding> vocab_pool = {});

// Held-out pool: generalized-anchor analogs of `size` extra classes drawn
// with the synthetic prototype process (uniform prototype, anchor noise
// `proto_noise`).
std::vector<Embedding> generate_vocab_pool(std::size_t size, std::size_t dim, double proto_noise,
                                           std::uint64_t seed);

}  // namespace promix
