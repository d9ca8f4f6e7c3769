#include "gdt/embeddings.hpp"

#include <string>

#include "gdt/errors.hpp"

namespace gdt {

Matrix embed_sequence(const std::vector<int>& ids, const ContentEmbeddingTable& table) {
  Matrix out(static_cast<int>(ids.size()), table.dim());
  for (size_t i = 0; i < ids.size(); ++i) {
    const int id = ids[i];
    if (id < 0 || id >= table.vocab_size())
      throw Error("embed_sequence: token id " + std::to_string(id) + " out of range [0, " +
                  std::to_string(table.vocab_size()) + ")");
    for (int j = 0; j < table.dim(); ++j) out(static_cast<int>(i), j) = table.table(id, j);
  }
  return out;
}

}  // namespace gdt
