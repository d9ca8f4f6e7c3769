#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "gdt/matrix.hpp"

namespace gdt {

/// One row of the corpus: a class name and a symptom description.
struct LabeledExample {
  std::string label;
  std::string text;
};

/// Token table with two reserved ids. Non-reserved ids are assigned by
/// descending frequency, ties broken lexicographically, so a vocabulary is a
/// pure function of its input corpus.
struct Vocabulary {
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;

  std::vector<std::string> id_to_token;  // [0]="<pad>", [1]="<unk>"
  std::unordered_map<std::string, int> token_to_id;

  int size() const { return static_cast<int>(id_to_token.size()); }
  int id_or_unk(const std::string& token) const;
};

/// Token ids padded to a fixed width; positions >= length are PAD and must be
/// masked by every attention consumer.
struct EncodedExample {
  std::vector<int> ids;
  int length = 0;
  int label = -1;

  std::vector<uint8_t> mask() const {
    std::vector<uint8_t> m(ids.size(), 0);
    for (int i = 0; i < length && i < static_cast<int>(ids.size()); ++i) m[i] = 1;
    return m;
  }
};

struct DatasetSplit {
  std::vector<EncodedExample> train;
  std::vector<EncodedExample> test;
  std::unordered_map<std::string, int> label_map;
};

/// Parse a `label,text` CSV (RFC-4180 quoting: quoted fields may contain
/// commas, newlines and doubled quotes). Column order is taken from the
/// header; extra columns are ignored. Errors carry 1-based line numbers.
std::vector<LabeledExample> load_csv(const std::string& path);
std::vector<LabeledExample> parse_csv(const std::string& content, const std::string& origin);

/// Write examples back out with RFC-4180 quoting.
void save_csv(const std::string& path, const std::vector<LabeledExample>& examples);

/// Lowercase, split on Unicode whitespace, strip leading/trailing punctuation.
std::vector<std::string> tokenize(const std::string& text);

/// Build a vocabulary over all tokens with count >= min_count.
Vocabulary build_vocab(const std::vector<LabeledExample>& examples, int min_count);

/// Encode one token list: UNK below min_count, truncate to max_len, PAD-fill.
EncodedExample encode(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                      int max_len);

/// The normalized token sequence an encoding preserves (PAD dropped, UNK kept
/// as the UNK token string).
std::vector<std::string> decode(const Vocabulary& vocab, const EncodedExample& example);

struct EncodedDataset {
  Vocabulary vocab;
  std::vector<EncodedExample> examples;
  std::unordered_map<std::string, int> label_map;
  std::vector<std::string> label_names;  // class index -> name
};

/// Vocabulary plus encodings in one pass; class indices are assigned by
/// sorted class name. Throws on an empty example list.
EncodedDataset build_vocab_encode(const std::vector<LabeledExample>& examples, int min_count,
                                  int max_len);

struct SplitIndices {
  std::vector<size_t> train;
  std::vector<size_t> test;
  std::vector<std::string> warnings;
};

/// Per class, floor(count×test_fraction) examples go to test, chosen by a
/// seeded shuffle. A class whose share would leave either side empty stays
/// entirely in train, with a warning.
SplitIndices stratified_split_indices(const std::vector<std::string>& labels, double test_fraction,
                                      SeededRng& rng);

/// The same split over already-encoded examples.
DatasetSplit stratified_split(const std::vector<EncodedExample>& examples,
                              const std::unordered_map<std::string, int>& label_map,
                              double test_fraction, SeededRng& rng,
                              std::vector<std::string>* warnings = nullptr);

/// RFC-4180 field quoting for CSV output.
std::string csv_escape(const std::string& field);

}  // namespace gdt
