#pragma once

#include <cstdint>
#include <vector>

namespace zipfls {

// Raw pre-softmax class scores for one sample, one entry per class.
using Logits = std::vector<double>;

// Probability vector over the C-1 non-target classes, in class-id order
// with the target omitted. Entries are non-negative and sum to 1.
struct SoftLabel {
  std::vector<double> probs;
};

// Per-class rank over the C-1 non-target classes, same indexing as
// SoftLabel. Ranks start at 1; fractional ranks mark ties (mid-rank).
struct RankVector {
  std::vector<double> ranks;
};

// Index of a non-target class within a SoftLabel / RankVector.
inline int nontarget_index(int class_id, int target) {
  return class_id < target ? class_id : class_id - 1;
}
inline int nontarget_class_id(int index, int target) {
  return index < target ? index : index + 1;
}

// splitmix64. Used to derive independent rng streams from one seed.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

}  // namespace zipfls
