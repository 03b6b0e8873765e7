#pragma once

// Generators and independent oracles shared by the unit, property and
// acceptance tests. Nothing here calls the library code it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <vector>

#include "promix/embedspace.hpp"
#include "promix/head.hpp"

namespace promix::testing {

// Small seeded generator for random test instances.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double gaussian() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }
  std::size_t index(std::size_t lo, std::size_t hi) {  // inclusive
    return std::uniform_int_distribution<std::size_t>(lo, hi)(engine_);
  }
  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[index(0, v.size() - 1)];
  }

  std::vector<double> gaussian_vector(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = gaussian();
    return v;
  }

  Embedding unit(std::size_t dim) {
    for (;;) {
      auto v = gaussian_vector(dim);
      double n2 = 0.0;
      for (double x : v) n2 += x * x;
      if (n2 > 1e-6) return Embedding::normalized(std::move(v));
    }
  }

  std::vector<Embedding> units(std::size_t count, std::size_t dim) {
    std::vector<Embedding> out;
    for (std::size_t i = 0; i < count; ++i) out.push_back(unit(dim));
    return out;
  }

  std::vector<double> similarities(std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<double> s(n);
    for (auto& x : s) x = uniform(lo, hi);
    return s;
  }

  // Strictly positive probability vector with a spread of magnitudes.
  std::vector<double> distribution(std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) {
      x = std::exp(3.0 * gaussian());
      total += x;
    }
    for (auto& x : p) x /= total;
    return p;
  }

  // Point on the open simplex of size n.
  std::vector<double> simplex(std::size_t n) {
    std::vector<double> p(n);
    double total = 0.0;
    for (auto& x : p) {
      x = -std::log(uniform(1e-12, 1.0));
      total += x;
    }
    for (auto& x : p) x /= total;
    return p;
  }

  std::vector<std::string> names(std::size_t n) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back("c" + std::to_string(i));
    return out;
  }

  EmbeddingSet labeled_set(std::size_t classes, std::size_t dim, std::size_t count) {
    EmbeddingSet set(names(classes), dim);
    for (std::size_t i = 0; i < count; ++i) {
      set.add({unit(dim), index(0, classes - 1)});
    }
    return set;
  }

  // Set where each sample sits near an anchor of its class.
  EmbeddingSet clustered_set(const std::vector<Embedding>& anchors, std::size_t per_class,
                             double noise) {
    const std::size_t dim = anchors.front().dim();
    EmbeddingSet set(names(anchors.size()), dim);
    for (std::size_t c = 0; c < anchors.size(); ++c) {
      for (std::size_t k = 0; k < per_class; ++k) {
        std::vector<double> v(dim);
        for (std::size_t d = 0; d < dim; ++d) v[d] = anchors[c][d] + noise * gaussian();
        set.add({Embedding::normalized(std::move(v)), c});
      }
    }
    return set;
  }

  PromptHead head(std::size_t classes, std::size_t dim, std::size_t context_length,
                  double context_scale = 0.3) {
    auto anchors = units(classes, dim);
    if (context_length == 0) return PromptHead::frozen(std::move(anchors), names(classes));
    std::vector<std::vector<double>> ctx;
    for (std::size_t m = 0; m < context_length; ++m) {
      auto row = gaussian_vector(dim);
      for (auto& x : row) x *= context_scale;
      ctx.push_back(std::move(row));
    }
    return PromptHead(std::move(anchors), names(classes), std::move(ctx));
  }

  // Random disjoint cover of [0, n) with `subsets` parts; part 0 may be empty.
  std::vector<std::vector<ClassId>> cover(std::size_t n, std::size_t subsets) {
    std::vector<std::vector<ClassId>> parts(subsets);
    std::vector<ClassId> order(n);
    std::iota(order.begin(), order.end(), ClassId{0});
    std::shuffle(order.begin(), order.end(), engine_);
    for (std::size_t i = 0; i < n; ++i) {
      // Guarantee every part but part 0 receives at least one class.
      const std::size_t part = i + 1 < subsets ? i + 1 : index(0, subsets - 1);
      parts[part].push_back(order[i]);
    }
    for (auto& p : parts) std::sort(p.begin(), p.end());
    return parts;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

// ---------------------------------------------------------------------------
// Oracles

inline double dot_oracle(std::span<const double> a, std::span<const double> b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) {
    acc += static_cast<long double>(a[i]) * static_cast<long double>(b[i]);
  }
  return static_cast<double>(acc);
}

inline std::vector<double> softmax_oracle(std::span<const double> s, double tau) {
  long double mx = *std::max_element(s.begin(), s.end());
  std::vector<long double> e(s.size());
  long double total = 0.0L;
  for (std::size_t i = 0; i < s.size(); ++i) {
    e[i] = std::exp((static_cast<long double>(s[i]) - mx) / tau);
    total += e[i];
  }
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = static_cast<double>(e[i] / total);
  return out;
}

// -log softmax(s / tau)[y] in extended precision.
inline double nll_oracle(std::span<const double> s, std::size_t y, double tau) {
  long double mx = *std::max_element(s.begin(), s.end());
  long double total = 0.0L;
  for (double v : s) total += std::exp((static_cast<long double>(v) - mx) / tau);
  return static_cast<double>(std::log(total) - (static_cast<long double>(s[y]) - mx) / tau);
}

// Effective class embedding: normalize(anchor + mean(context)).
inline std::vector<double> class_embedding_oracle(const PromptHead& head, std::size_t cls) {
  const std::size_t dim = head.dim();
  std::vector<double> u(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    double mean = 0.0;
    for (const auto& row : head.context()) mean += row[d];
    if (!head.context().empty()) mean /= static_cast<double>(head.context().size());
    u[d] = head.anchors()[cls][d] + mean;
  }
  const double n = std::sqrt(dot_oracle(u, u));
  for (auto& x : u) x /= n;
  return u;
}

inline std::vector<double> similarities_oracle(const PromptHead& head, const Embedding& x) {
  std::vector<double> s(head.class_count());
  for (std::size_t l = 0; l < s.size(); ++l) {
    s[l] = dot_oracle(class_embedding_oracle(head, l), x.values());
  }
  return s;
}

// Central differences of f at x with step h.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::vector<double> x, double h = 1e-5) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double up = f(x);
    x[i] = orig - h;
    const double down = f(x);
    x[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

inline double central_difference_1d(const std::function<double(double)>& f, double x,
                                    double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ||a - b|| / max(||a||, ||b||); 0 when both vanish.
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double scale = std::sqrt(std::max(na, nb));
  if (scale == 0.0) return std::sqrt(diff);
  return std::sqrt(diff) / scale;
}

inline double relative_error(double a, double b) {
  return relative_error(std::span<const double>(&a, 1), std::span<const double>(&b, 1));
}

}  // namespace promix::testing
