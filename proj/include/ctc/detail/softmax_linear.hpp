#pragma once

// Forward/backward for the averaged-embedding softmax classifier. Templated
// on the scalar so the same code runs in float for training and in double for
// finite-difference checks. `Shared` routes parameter access through relaxed
// atomics for lock-free multi-threaded SGD.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

namespace ctc::detail {

template <typename T>
struct Scratch {
  std::vector<T> hidden;
  std::vector<T> probs;
  std::vector<T> grad_hidden;

  void resize(std::size_t dim, std::size_t classes) {
    hidden.assign(dim, T{});
    probs.assign(classes, T{});
    grad_hidden.assign(dim, T{});
  }
};

template <bool Shared, typename T>
inline T load(const T& x) {
  if constexpr (Shared) {
    return std::atomic_ref<T>(const_cast<T&>(x)).load(std::memory_order_relaxed);
  } else {
    return x;
  }
}

template <bool Shared, typename T>
inline void add_to(T& x, T delta) {
  if constexpr (Shared) {
    std::atomic_ref<T> r(x);
    r.store(r.load(std::memory_order_relaxed) + delta, std::memory_order_relaxed);
  } else {
    x += delta;
  }
}

// hidden = mean of input rows `ids` (zero when ids is empty); probs = softmax(output * hidden).
// `input` is rows x dim, `output` is classes x dim, both row-major.
template <typename T, bool Shared = false>
void forward(std::span<const T> input, std::span<const T> output, std::size_t dim,
             std::size_t classes, std::span<const std::size_t> ids, Scratch<T>& s) {
  s.resize(dim, classes);
  for (std::size_t id : ids) {
    const T* row = input.data() + id * dim;
    for (std::size_t k = 0; k < dim; ++k) s.hidden[k] += load<Shared>(row[k]);
  }
  if (!ids.empty()) {
    const T inv = T{1} / static_cast<T>(ids.size());
    for (auto& h : s.hidden) h *= inv;
  }
  T max_logit = -INFINITY;
  for (std::size_t c = 0; c < classes; ++c) {
    const T* w = output.data() + c * dim;
    T z{};
    for (std::size_t k = 0; k < dim; ++k) z += load<Shared>(w[k]) * s.hidden[k];
    s.probs[c] = z;
    max_logit = std::max(max_logit, z);
  }
  T total{};
  for (auto& p : s.probs) {
    p = std::exp(p - max_logit);
    total += p;
  }
  for (auto& p : s.probs) p /= total;
}

template <typename T>
T cross_entropy(const Scratch<T>& s, std::size_t label) {
  return -std::log(std::max(s.probs[label], std::numeric_limits<T>::min()));
}

// One SGD step on the softmax cross-entropy of `label`; returns the loss
// before the update. Gradients are taken at the pre-update point for both
// matrices, so (before - after) / lr is exactly the gradient.
template <typename T, bool Shared = false>
T sgd_step(std::span<T> input, std::span<T> output, std::size_t dim, std::size_t classes,
           std::span<const std::size_t> ids, std::size_t label, T lr, Scratch<T>& s) {
  forward<T, Shared>(std::span<const T>(input), std::span<const T>(output), dim, classes, ids, s);
  const T loss = cross_entropy(s, label);
  std::fill(s.grad_hidden.begin(), s.grad_hidden.end(), T{});
  for (std::size_t c = 0; c < classes; ++c) {
    const T g = s.probs[c] - (c == label ? T{1} : T{0});
    T* w = output.data() + c * dim;
    for (std::size_t k = 0; k < dim; ++k) {
      s.grad_hidden[k] += g * load<Shared>(w[k]);
      add_to<Shared>(w[k], -lr * g * s.hidden[k]);
    }
  }
  if (!ids.empty()) {
    const T scale = -lr / static_cast<T>(ids.size());
    for (std::size_t id : ids) {
      T* row = input.data() + id * dim;
      for (std::size_t k = 0; k < dim; ++k) add_to<Shared>(row[k], scale * s.grad_hidden[k]);
    }
  }
  return loss;
}

}  // namespace ctc::detail
