#include "gdt/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "gdt/errors.hpp"

namespace gdt {

int Vocabulary::id_or_unk(const std::string& token) const {
  auto it = token_to_id.find(token);
  return it == token_to_id.end() ? kUnkId : it->second;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct CsvRow {
  std::vector<std::string> fields;
  int line = 0;  // 1-based line the row starts on
};

// RFC-4180 state machine over the whole buffer; quoted fields may span lines.
std::vector<CsvRow> parse_csv_rows(const std::string& content, const std::string& origin) {
  std::vector<CsvRow> rows;
  size_t pos = 0;
  int line = 1;
  const size_t n = content.size();

  // strip a UTF-8 BOM
  if (n >= 3 && content.compare(0, 3, "\xEF\xBB\xBF") == 0) pos = 3;

  while (pos < n) {
    CsvRow row;
    row.line = line;
    bool row_done = false;
    while (!row_done) {
      std::string field;
      if (pos < n && content[pos] == '"') {
        ++pos;  // opening quote
        bool closed = false;
        while (pos < n) {
          char c = content[pos];
          if (c == '"') {
            if (pos + 1 < n && content[pos + 1] == '"') {
              field.push_back('"');
              pos += 2;
            } else {
              ++pos;
              closed = true;
              break;
            }
          } else {
            if (c == '\n') ++line;
            field.push_back(c);
            ++pos;
          }
        }
        if (!closed)
          throw FormatError(origin + ": unterminated quoted field in row starting at line " +
                            std::to_string(row.line));
        if (pos < n && content[pos] != ',' && content[pos] != '\n' && content[pos] != '\r')
          throw FormatError(origin + ": unexpected character after closing quote at line " +
                            std::to_string(line));
      } else {
        while (pos < n && content[pos] != ',' && content[pos] != '\n' && content[pos] != '\r')
          field.push_back(content[pos++]);
      }
      row.fields.push_back(std::move(field));

      if (pos >= n) {
        row_done = true;
      } else if (content[pos] == ',') {
        ++pos;
      } else {  // \r or \n
        if (content[pos] == '\r') ++pos;
        if (pos < n && content[pos] == '\n') {
          ++pos;
          ++line;
        }
        row_done = true;
      }
    }
    // skip a fully empty trailing row
    if (row.fields.size() == 1 && row.fields[0].empty() && pos >= n) break;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::vector<LabeledExample> parse_csv(const std::string& content, const std::string& origin) {
  std::vector<CsvRow> rows = parse_csv_rows(content, origin);
  if (rows.empty()) throw FormatError(origin + ": empty file, expected a header row");

  const CsvRow& header = rows[0];
  int label_col = -1, text_col = -1;
  for (size_t i = 0; i < header.fields.size(); ++i) {
    std::string name = trim(header.fields[i]);
    if (name == "label") label_col = static_cast<int>(i);
    if (name == "text") text_col = static_cast<int>(i);
  }
  if (label_col < 0) throw FormatError(origin + ": header is missing the `label` column");
  if (text_col < 0) throw FormatError(origin + ": header is missing the `text` column");

  std::vector<LabeledExample> out;
  out.reserve(rows.size() - 1);
  for (size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.fields.size() != header.fields.size())
      throw FormatError(origin + ": line " + std::to_string(row.line) + ": expected " +
                        std::to_string(header.fields.size()) + " fields, got " +
                        std::to_string(row.fields.size()));
    LabeledExample ex;
    ex.label = trim(row.fields[label_col]);
    ex.text = trim(row.fields[text_col]);
    if (ex.label.empty())
      throw FormatError(origin + ": line " + std::to_string(row.line) + ": empty label");
    if (ex.text.empty())
      throw FormatError(origin + ": line " + std::to_string(row.line) + ": empty text");
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<LabeledExample> load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), path);
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out += "\"";
  return out;
}

void save_csv(const std::string& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  out << "label,text\n";
  for (const auto& ex : examples) out << csv_escape(ex.label) << "," << csv_escape(ex.text) << "\n";
}

namespace {

struct CodePoint {
  uint32_t cp;
  size_t offset;  // byte offset in source
  size_t len;     // byte length
};

// Permissive UTF-8 decode; bytes that do not form a valid sequence are taken
// as single-byte code points.
std::vector<CodePoint> decode_utf8(const std::string& s) {
  std::vector<CodePoint> out;
  size_t i = 0;
  while (i < s.size()) {
    const unsigned char c = static_cast<unsigned char>(s[i]);
    uint32_t cp = c;
    size_t len = 1;
    if ((c & 0xE0) == 0xC0 && i + 1 < s.size() && (s[i + 1] & 0xC0) == 0x80) {
      cp = (c & 0x1F) << 6 | (s[i + 1] & 0x3F);
      len = 2;
    } else if ((c & 0xF0) == 0xE0 && i + 2 < s.size() && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80) {
      cp = (c & 0x0F) << 12 | (s[i + 1] & 0x3F) << 6 | (s[i + 2] & 0x3F);
      len = 3;
    } else if ((c & 0xF8) == 0xF0 && i + 3 < s.size() && (s[i + 1] & 0xC0) == 0x80 &&
               (s[i + 2] & 0xC0) == 0x80 && (s[i + 3] & 0xC0) == 0x80) {
      cp = (c & 0x07) << 18 | (s[i + 1] & 0x3F) << 12 | (s[i + 2] & 0x3F) << 6 | (s[i + 3] & 0x3F);
      len = 4;
    }
    out.push_back({cp, i, len});
    i += len;
  }
  return out;
}

bool is_space_cp(uint32_t cp) {
  if (cp == 0x20 || (cp >= 0x09 && cp <= 0x0D)) return true;
  switch (cp) {
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

bool is_punct_cp(uint32_t cp) {
  if (cp < 0x80) {
    const char c = static_cast<char>(cp);
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }
  switch (cp) {
    case 0x2018: case 0x2019: case 0x201C: case 0x201D: case 0x2013: case 0x2014:
    case 0x2026: case 0x00A1: case 0x00BF: case 0x00AB: case 0x00BB:
      return true;
    default:
      return false;
  }
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<CodePoint> cps = decode_utf8(text);
  std::vector<std::string> tokens;
  size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && is_space_cp(cps[i].cp)) ++i;
    size_t begin = i;
    while (i < cps.size() && !is_space_cp(cps[i].cp)) ++i;
    size_t end = i;
    while (begin < end && is_punct_cp(cps[begin].cp)) ++begin;
    while (end > begin && is_punct_cp(cps[end - 1].cp)) --end;
    if (begin >= end) continue;
    const size_t b0 = cps[begin].offset;
    const size_t b1 = cps[end - 1].offset + cps[end - 1].len;
    std::string token = text.substr(b0, b1 - b0);
    for (char& c : token)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    tokens.push_back(std::move(token));
  }
  return tokens;
}

Vocabulary build_vocab(const std::vector<LabeledExample>& examples, int min_count) {
  if (min_count < 1) throw Error("build_vocab: min_count must be >= 1");
  std::map<std::string, int> counts;  // ordered for deterministic ties
  for (const auto& ex : examples)
    for (const auto& tok : tokenize(ex.text)) ++counts[tok];

  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [tok, count] : counts)
    if (count >= min_count) kept.emplace_back(tok, count);
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocabulary vocab;
  vocab.id_to_token = {"<pad>", "<unk>"};
  for (const auto& [tok, count] : kept) {
    vocab.token_to_id[tok] = vocab.size();
    vocab.id_to_token.push_back(tok);
  }
  return vocab;
}

EncodedExample encode(const Vocabulary& vocab, const std::vector<std::string>& tokens,
                      int max_len) {
  if (max_len < 1) throw Error("encode: max_len must be >= 1");
  EncodedExample ex;
  ex.ids.assign(max_len, Vocabulary::kPadId);
  ex.length = std::min<int>(static_cast<int>(tokens.size()), max_len);
  for (int i = 0; i < ex.length; ++i) ex.ids[i] = vocab.id_or_unk(tokens[i]);
  return ex;
}

std::vector<std::string> decode(const Vocabulary& vocab, const EncodedExample& example) {
  std::vector<std::string> out;
  for (int i = 0; i < example.length; ++i) out.push_back(vocab.id_to_token[example.ids[i]]);
  return out;
}

EncodedDataset build_vocab_encode(const std::vector<LabeledExample>& examples, int min_count,
                                  int max_len) {
  if (examples.empty()) throw Error("build_vocab_encode: empty example list");
  EncodedDataset ds;
  ds.vocab = build_vocab(examples, min_count);

  std::vector<std::string> names;
  for (const auto& ex : examples) names.push_back(ex.label);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  ds.label_names = names;
  for (size_t i = 0; i < names.size(); ++i) ds.label_map[names[i]] = static_cast<int>(i);

  for (const auto& ex : examples) {
    EncodedExample enc = encode(ds.vocab, tokenize(ex.text), max_len);
    enc.label = ds.label_map.at(ex.label);
    ds.examples.push_back(std::move(enc));
  }
  return ds;
}

SplitIndices stratified_split_indices(const std::vector<std::string>& labels, double test_fraction,
                                      SeededRng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw Error("stratified_split: test_fraction must be in (0, 1)");

  std::map<std::string, std::vector<size_t>> by_class;  // sorted class order
  for (size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  SplitIndices out;
  for (auto& [name, idx] : by_class) {
    const size_t count = idx.size();
    size_t n_test = static_cast<size_t>(static_cast<double>(count) * test_fraction);
    if (count < 2 || n_test == 0 || n_test == count) {
      if (n_test == 0 || count < 2)
        out.warnings.push_back("class `" + name + "` (" + std::to_string(count) +
                               " examples) kept entirely in train: test share would be empty");
      out.train.insert(out.train.end(), idx.begin(), idx.end());
      continue;
    }
    rng.shuffle(idx);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + n_test);
    out.train.insert(out.train.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

DatasetSplit stratified_split(const std::vector<EncodedExample>& examples,
                              const std::unordered_map<std::string, int>& label_map,
                              double test_fraction, SeededRng& rng,
                              std::vector<std::string>* warnings) {
  std::vector<std::string> index_to_name(label_map.size());
  for (const auto& [name, idx] : label_map) index_to_name[idx] = name;
  std::vector<std::string> labels;
  labels.reserve(examples.size());
  for (const auto& ex : examples) labels.push_back(index_to_name.at(ex.label));

  SplitIndices idx = stratified_split_indices(labels, test_fraction, rng);
  if (warnings) *warnings = idx.warnings;

  DatasetSplit split;
  split.label_map = label_map;
  for (size_t i : idx.train) split.train.push_back(examples[i]);
  for (size_t i : idx.test) split.test.push_back(examples[i]);
  return split;
}

}  // namespace gdt
