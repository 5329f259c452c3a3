#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <vector>

#include "pairwhite/error.hpp"
#include "pairwhite/table.hpp"

namespace pairwhite {

// splitmix64 finalizer; derives independent child seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct FoldAssignment {
  std::vector<int> fold;  // per row
  int k = 0;
  std::uint64_t seed = 0;

  std::vector<Index> test_rows(int f) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] == f) out.push_back(static_cast<Index>(i));
    return out;
  }

  std::vector<Index> train_rows(int f) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < fold.size(); ++i)
      if (fold[i] != f) out.push_back(static_cast<Index>(i));
    return out;
  }

  friend bool operator==(const FoldAssignment&, const FoldAssignment&) = default;
};

// Each class is shuffled with `seed`, classes are laid end to end, and rows
// are dealt to folds round-robin. Per-class fold counts and fold sizes then
// differ by at most one.
inline FoldAssignment stratified_kfold(const std::vector<int>& labels, int k,
                                       std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2, got " + std::to_string(k));
  std::map<int, std::vector<Index>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i)
    by_class[labels[i]].push_back(static_cast<Index>(i));
  for (const auto& [label, rows] : by_class)
    if (static_cast<int>(rows.size()) < k) {
      std::ostringstream os;
      os << "class " << label << " has " << rows.size() << " members, fewer than " << k
         << " folds";
      throw DataError(os.str());
    }
  std::mt19937_64 rng(seed);
  FoldAssignment a;
  a.k = k;
  a.seed = seed;
  a.fold.assign(labels.size(), -1);
  std::size_t pos = 0;
  for (auto& [label, rows] : by_class) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (Index r : rows) a.fold[static_cast<std::size_t>(r)] = static_cast<int>(pos++ % static_cast<std::size_t>(k));
  }
  return a;
}

}  // namespace pairwhite
