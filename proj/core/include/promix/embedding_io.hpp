#pragma once

// `EMB1` embedding files.
//
// Layout (all integers little-endian):
//   "EMB1"                      4 bytes
//   dim                         u32
//   sample count                u32
//   class count                 u32
//   per class:  u16 length + UTF-8 name bytes
//   per sample: u32 label + dim x f32
//
// Prototype files use the same layout with exactly one sample per class.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "promix/embedspace.hpp"

namespace promix {

// Maximum deviation from unit norm tolerated (and corrected) on read.
inline constexpr double kReadNormTolerance = 1e-6;

struct RawRecord {
  std::uint32_t label = 0;
  std::vector<float> values;
};

// Byte-level view of an EMB1 file; no norm or label checks beyond framing.
struct RawEmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<std::string> class_names;
  std::vector<RawRecord> records;
};

// Float32 rounding of a unit vector that reads back (after renormalization)
// to the same floats, so write/read/write is byte-identical.
std::vector<float> stable_floats(std::span<const double> values);

std::string encode_raw(const RawEmbeddingFile& file);
RawEmbeddingFile decode_raw(std::string_view bytes);

std::string encode_embedding_set(const EmbeddingSet& set);
EmbeddingSet decode_embedding_set(std::string_view bytes);

void write_embedding_file(const EmbeddingSet& set, const std::filesystem::path& path);
EmbeddingSet read_embedding_file(const std::filesystem::path& path);

// One sample per class, label = class index.
void write_prototype_file(std::span<const Embedding> prototypes,
                          const std::vector<std::string>& class_names,
                          const std::filesystem::path& path);

struct PrototypeFile {
  std::vector<std::string> class_names;
  std::vector<Embedding> prototypes;
};
PrototypeFile read_prototype_file(const std::filesystem::path& path);
PrototypeFile prototypes_from_set(const EmbeddingSet& set);

std::string read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::string_view bytes);

}  // namespace promix
