#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "sesame/error.hpp"
#include "sesame/random.hpp"

namespace sesame {

struct SampleResult {
  std::vector<std::string> selected;  // bucket-descending, then draw order
  int boundary_bucket = -1;
  std::map<int, std::size_t> taken;   // bucket -> number selected from it
  bool shortage = false;              // fewer than k predictions were available
};

/// Selects k utterances favouring the highest predicted classes: buckets are
/// taken whole from the top down and the bucket that crosses k is sampled
/// uniformly without replacement.
inline SampleResult sample_difficult(const std::vector<std::pair<std::string, int>>& predictions, std::size_t k,
                                     std::uint64_t seed) {
  if (k == 0) throw UsageError("sample size must be at least 1");
  if (predictions.empty()) throw DataError("no predictions to sample from");

  std::map<int, std::vector<std::string>, std::greater<>> buckets;
  for (const auto& [id, cls] : predictions) buckets[cls].push_back(id);

  SampleResult result;
  Rng rng(seed, 0x53414d50);
  for (auto& [cls, ids] : buckets) {
    const std::size_t need = k - result.selected.size();
    if (need == 0) break;
    result.boundary_bucket = cls;
    if (ids.size() <= need) {
      result.selected.insert(result.selected.end(), ids.begin(), ids.end());
      result.taken[cls] = ids.size();
    } else {
      // partial Fisher-Yates: the first `need` positions are the draw
      for (std::size_t i = 0; i < need; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(ids.size() - i));
        std::swap(ids[i], ids[j]);
        result.selected.push_back(ids[i]);
      }
      result.taken[cls] = need;
    }
  }
  result.shortage = result.selected.size() < k;
  return result;
}

inline SampleResult sample_difficult(const std::map<std::string, int>& predictions, std::size_t k, std::uint64_t seed) {
  return sample_difficult(std::vector<std::pair<std::string, int>>(predictions.begin(), predictions.end()), k, seed);
}

}  // namespace sesame
