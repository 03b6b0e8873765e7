#include "promix/embedding_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>

#include "promix/error.hpp"

namespace promix {

namespace {

constexpr char kMagic[4] = {'E', 'M', 'B', '1'};

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xffu));
  out.push_back(static_cast<char>((v >> 8) & 0xffu));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<char>((v >> shift) & 0xffu));
  }
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint16_t u16(const char* what) {
    need(2, what);
    std::uint16_t v = static_cast<std::uint16_t>(byte(0) | (byte(1) << 8));
    pos_ += 2;
    return v;
  }

  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(i)) << (8 * i);
    pos_ += 4;
    return v;
  }

  std::string_view take(std::size_t n, const char* what) {
    need(n, what);
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::uint32_t byte(std::size_t i) const {
    return static_cast<unsigned char>(bytes_[pos_ + i]);
  }

  void need(std::size_t n, const char* what) const {
    if (remaining() < n) {
      throw FormatError(FormatError::Kind::kTruncated,
                        std::string("truncated embedding file while reading ") + what);
    }
  }

  std::string_view bytes_;
  std::size_t pos_ = 0;
};

std::vector<double> checked_unit(const RawRecord& rec, std::size_t index) {
  std::vector<double> v(rec.values.begin(), rec.values.end());
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw FormatError(FormatError::Kind::kNonFinite,
                        "sample " + std::to_string(index) + " has a non-finite value");
    }
  }
  const double norm = l2_norm(v);
  if (std::abs(norm - 1.0) > kReadNormTolerance) {
    throw FormatError(FormatError::Kind::kNotNormalized,
                      "sample " + std::to_string(index) + " has norm " +
                          std::to_string(norm) + ", expected unit norm");
  }
  return v;
}

}  // namespace

// Float32 rounding of a unit vector, adjusted so that renormalizing it on
// read and rounding again reproduces the same floats. Keeps write/read/write
// byte-identical.
std::vector<float> stable_floats(std::span<const double> values) {
  std::vector<float> floats(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) floats[i] = static_cast<float>(values[i]);
  auto is_fixed = [](const std::vector<float>& f) {
    const auto back = Embedding::normalized(std::vector<double>(f.begin(), f.end()));
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (static_cast<float>(back[i]) != f[i]) return false;
    }
    return true;
  };
  auto norm_error = [](const std::vector<float>& f) {
    double n2 = 0.0;
    for (float x : f) n2 += static_cast<double>(x) * x;
    return std::abs(n2 - 1.0);
  };
  // Step single components by one ulp while that brings the norm closer to 1.
  for (int pass = 0; pass < 4 && !is_fixed(floats); ++pass) {
    bool improved = false;
    for (std::size_t i = 0; i < floats.size(); ++i) {
      const float orig = floats[i];
      double best = norm_error(floats);
      float best_value = orig;
      for (float target : {std::nextafter(orig, 2.0f), std::nextafter(orig, -2.0f)}) {
        floats[i] = target;
        const double err = norm_error(floats);
        if (err < best) {
          best = err;
          best_value = target;
        }
      }
      floats[i] = best_value;
      improved = improved || best_value != orig;
    }
    if (!improved) break;
  }
  return floats;
}

std::string encode_raw(const RawEmbeddingFile& file) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, file.dim);
  if (file.records.size() > std::numeric_limits<std::uint32_t>::max() ||
      file.class_names.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("embedding file too large");
  }
  put_u32(out, static_cast<std::uint32_t>(file.records.size()));
  put_u32(out, static_cast<std::uint32_t>(file.class_names.size()));
  for (const auto& name : file.class_names) {
    if (name.size() > std::numeric_limits<std::uint16_t>::max()) {
      throw InvalidArgument("class name longer than 65535 bytes");
    }
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out.append(name);
  }
  out.reserve(out.size() + file.records.size() * (4 + 4 * std::size_t{file.dim}));
  for (const auto& rec : file.records) {
    if (rec.values.size() != file.dim) {
      throw InvalidArgument("record dimension does not match file dimension");
    }
    put_u32(out, rec.label);
    for (float x : rec.values) put_u32(out, std::bit_cast<std::uint32_t>(x));
  }
  return out;
}

RawEmbeddingFile decode_raw(std::string_view bytes) {
  Reader in(bytes);
  if (bytes.size() < 4) {
    throw FormatError(FormatError::Kind::kTruncated, "embedding file shorter than its magic");
  }
  if (in.take(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError(FormatError::Kind::kBadMagic, "not an EMB1 embedding file");
  }
  RawEmbeddingFile file;
  file.dim = in.u32("dim");
  const std::uint32_t count = in.u32("sample count");
  const std::uint32_t classes = in.u32("class count");
  if (file.dim == 0) {
    throw FormatError(FormatError::Kind::kBadHeader, "embedding dimension is zero");
  }
  // Each class name needs at least two bytes; reject counts the file cannot hold
  // before allocating.
  if (std::size_t{classes} * 2 > in.remaining()) {
    throw FormatError(FormatError::Kind::kTruncated, "class block exceeds file size");
  }
  file.class_names.reserve(classes);
  for (std::uint32_t c = 0; c < classes; ++c) {
    const auto len = in.u16("class name length");
    file.class_names.emplace_back(in.take(len, "class name"));
  }
  const std::size_t record_bytes = 4 + 4 * std::size_t{file.dim};
  if (std::size_t{count} * record_bytes > in.remaining()) {
    throw FormatError(FormatError::Kind::kTruncated,
                      "file holds fewer samples than its header declares");
  }
  file.records.resize(count);
  for (auto& rec : file.records) {
    rec.label = in.u32("label");
    rec.values.resize(file.dim);
    for (auto& x : rec.values) x = std::bit_cast<float>(in.u32("value"));
  }
  if (in.remaining() != 0) {
    throw FormatError(FormatError::Kind::kTrailingData,
                      std::to_string(in.remaining()) + " unexpected trailing bytes");
  }
  return file;
}

std::string encode_embedding_set(const EmbeddingSet& set) {
  if (set.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw InvalidArgument("dimension too large for EMB1");
  }
  RawEmbeddingFile file;
  file.dim = static_cast<std::uint32_t>(set.dim());
  file.class_names = set.class_names();
  file.records.reserve(set.size());
  for (const auto& s : set) {
    RawRecord rec;
    rec.label = static_cast<std::uint32_t>(s.label);
    rec.values = stable_floats(s.embedding.values());
    file.records.push_back(std::move(rec));
  }
  return encode_raw(file);
}

EmbeddingSet decode_embedding_set(std::string_view bytes) {
  auto raw = decode_raw(bytes);
  EmbeddingSet set(raw.class_names, raw.dim);
  for (std::size_t i = 0; i < raw.records.size(); ++i) {
    const auto& rec = raw.records[i];
    if (rec.label >= raw.class_names.size()) {
      throw FormatError(FormatError::Kind::kBadLabel,
                        "sample " + std::to_string(i) + " label " +
                            std::to_string(rec.label) + " exceeds class count");
    }
    set.add({Embedding::normalized(checked_unit(rec, i)), rec.label});
  }
  return set;
}

std::string read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::kIo, "cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::kIo, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::kIo, "short write to " + path.string());
}

void write_embedding_file(const EmbeddingSet& set, const std::filesystem::path& path) {
  write_file_bytes(path, encode_embedding_set(set));
}

EmbeddingSet read_embedding_file(const std::filesystem::path& path) {
  return decode_embedding_set(read_file_bytes(path));
}

void write_prototype_file(std::span<const Embedding> prototypes,
                          const std::vector<std::string>& class_names,
                          const std::filesystem::path& path) {
  if (prototypes.size() != class_names.size()) {
    throw InvalidArgument("prototype count must equal class count");
  }
  if (prototypes.empty()) throw InvalidArgument("no prototypes to write");
  EmbeddingSet set(class_names, prototypes.front().dim());
  for (ClassId c = 0; c < prototypes.size(); ++c) set.add({prototypes[c], c});
  write_embedding_file(set, path);
}

PrototypeFile prototypes_from_set(const EmbeddingSet& set) {
  if (set.size() != set.class_count()) {
    throw FormatError(FormatError::Kind::kBadHeader,
                      "prototype file must hold exactly one sample per class");
  }
  PrototypeFile out;
  out.class_names = set.class_names();
  out.prototypes.resize(set.class_count());
  std::vector<bool> seen(set.class_count(), false);
  for (const auto& s : set) {
    if (seen[s.label]) {
      throw FormatError(FormatError::Kind::kBadLabel,
                        "prototype file repeats class " + std::to_string(s.label));
    }
    seen[s.label] = true;
    out.prototypes[s.label] = s.embedding;
  }
  return out;
}

PrototypeFile read_prototype_file(const std::filesystem::path& path) {
  return prototypes_from_set(read_embedding_file(path));
}

}  // namespace promix
