#pragma once

#include <algorithm>
#include <cstdlib>
#include <vector>

#include "gdt/matrix.hpp"

namespace gdt {

/// Token-id -> dense vector lookup table, one row per vocabulary entry.
struct ContentEmbeddingTable {
  Matrix table;  // vocab_size × d

  int vocab_size() const { return table.rows; }
  int dim() const { return table.cols; }
};

/// Embeddings indexed by clipped unsigned token distance. Row r holds the
/// vector for distance r, r in [0, k_max]; any larger distance maps to k_max.
struct RelativePositionTable {
  Matrix table;  // (k_max+1) × d
  int k_max = 0;

  int dim() const { return table.cols; }
};

/// min(|i-j|, k_max).
inline int clip_distance(int i, int j, int k_max) {
  return std::min(std::abs(i - j), k_max);
}

/// Row i of the result is the table row for ids[i]. Throws on out-of-range id.
Matrix embed_sequence(const std::vector<int>& ids, const ContentEmbeddingTable& table);

}  // namespace gdt
