#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "sesame/binary_io.hpp"
#include "sesame/error.hpp"

namespace sesame {

struct Utterance {
  std::string id;
  std::string text;
  std::optional<double> wer;
  std::optional<int> class_label;
};

using Corpus = std::vector<Utterance>;

/// Edit-operation counts of one reference/hypothesis alignment.
struct WerScore {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t hits = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double value() const {
    return static_cast<double>(errors()) / static_cast<double>(reference_length);
  }
};

/// Ordered WER upper bounds; class i holds wer <= upper_bounds[i].
class BucketSpec {
 public:
  BucketSpec() : BucketSpec(std::vector<double>{0.05, 0.1, 0.15, 0.2, 0.3, 0.5, 1.0}) {}

  explicit BucketSpec(std::vector<double> upper_bounds) : bounds_(std::move(upper_bounds)) {
    if (bounds_.size() < 2) throw UsageError("bucket spec needs at least 2 classes");
    for (std::size_t i = 0; i < bounds_.size(); ++i) {
      if (!std::isfinite(bounds_[i]) || bounds_[i] <= 0.0) {
        throw UsageError("bucket bounds must be positive and finite");
      }
      if (i > 0 && bounds_[i] <= bounds_[i - 1]) {
        throw UsageError("bucket bounds must be strictly increasing");
      }
    }
    if (bounds_.back() < 1.0) throw UsageError("last bucket bound must be >= 1");
  }

  std::size_t classes() const { return bounds_.size(); }
  const std::vector<double>& upper_bounds() const { return bounds_; }

  /// Lower edge of class i (exclusive, except class 0 which starts at 0).
  double lower_bound(std::size_t i) const { return i == 0 ? 0.0 : bounds_[i - 1]; }

 private:
  std::vector<double> bounds_;
};

inline int bucketize(double wer, const BucketSpec& spec) {
  if (std::isnan(wer) || wer < 0.0) throw DataError("bucketize: WER must be a non-negative number");
  const auto& bounds = spec.upper_bounds();
  const auto it = std::lower_bound(bounds.begin(), bounds.end(), wer);
  if (it == bounds.end()) return static_cast<int>(bounds.size()) - 1;
  return static_cast<int>(it - bounds.begin());
}

/// Dense row-major matrix of sentence embeddings, one row per corpus line.
struct EmbeddingMatrix {
  std::size_t count = 0;
  std::size_t dim = 0;
  std::vector<float> data;

  EmbeddingMatrix() = default;
  EmbeddingMatrix(std::size_t rows, std::size_t cols) : count(rows), dim(cols), data(rows * cols, 0.0f) {}

  std::span<float> row(std::size_t i) { return {data.data() + i * dim, dim}; }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

namespace detail {

inline std::vector<char32_t> decode_utf8(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1f;
      extra = 1;
    } else if ((c >> 4) == 0xe) {
      cp = c & 0x0f;
      extra = 2;
    } else if ((c >> 3) == 0x1e) {
      cp = c & 0x07;
      extra = 3;
    } else {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) {
        ok = false;
        break;
      }
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3f);
    }
    if (!ok) {
      out.push_back(0xfffd);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += 1 + extra;
  }
  return out;
}

inline void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xc0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xe0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  } else {
    out.push_back(static_cast<char>(0xf0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3f)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3f)));
  }
}

inline bool is_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0d) || c == 0x20 || c == 0x85 || c == 0xa0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200a) || c == 0x2028 || c == 0x2029 || c == 0x202f || c == 0x205f ||
         c == 0x3000;
}

inline bool is_apostrophe(char32_t c) { return c == U'\'' || c == 0x2019; }

// Unicode general category P* for the scripts we expect in corpora. ASCII
// symbols outside P* ($ + < = > ^ ` | ~) are kept, as Unicode classifies them.
inline bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    switch (c) {
      case '!': case '"': case '#': case '%': case '&': case '\'': case '(': case ')':
      case '*': case ',': case '-': case '.': case '/': case ':': case ';': case '?':
      case '@': case '[': case '\\': case ']': case '_': case '{': case '}':
        return true;
      default:
        return false;
    }
  }
  switch (c) {
    case 0xa1: case 0xa7: case 0xab: case 0xb6: case 0xb7: case 0xbb: case 0xbf:
    case 0x37e: case 0x387: case 0x589: case 0x5be: case 0x5c0: case 0x5c3: case 0x5c6:
    case 0x60c: case 0x60d: case 0x61b: case 0x6d4: case 0x964: case 0x965: case 0x970:
    case 0xe4f: case 0xe5a: case 0xe5b: case 0x3030: case 0x303d: case 0x30fb:
    case 0xff3f: case 0xff5b: case 0xff5d:
      return true;
    default:
      break;
  }
  return (c >= 0x55a && c <= 0x55f) || (c >= 0x5f3 && c <= 0x5f4) || (c >= 0x609 && c <= 0x60a) ||
         (c >= 0x61e && c <= 0x61f) || (c >= 0x66a && c <= 0x66d) || (c >= 0x2010 && c <= 0x2027) ||
         (c >= 0x2030 && c <= 0x2043) || (c >= 0x2045 && c <= 0x2051) || (c >= 0x2053 && c <= 0x205e) ||
         (c >= 0x2e00 && c <= 0x2e4f) || (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0x3014 && c <= 0x301f) || (c >= 0xff01 && c <= 0xff03) || (c >= 0xff05 && c <= 0xff0a) ||
         (c >= 0xff0c && c <= 0xff0f) || (c >= 0xff1a && c <= 0xff1b) || (c >= 0xff1f && c <= 0xff20) ||
         (c >= 0xff3b && c <= 0xff3d) || (c >= 0xff5f && c <= 0xff65);
}

// Simple case folding for Latin, Greek and Cyrillic.
inline char32_t to_lower(char32_t c) {
  if (c >= U'A' && c <= U'Z') return c + 32;
  if (c < 0xc0) return c;
  if ((c >= 0xc0 && c <= 0xde && c != 0xd7)) return c + 32;
  if ((c >= 0x100 && c <= 0x137) || (c >= 0x14a && c <= 0x177)) return (c % 2 == 0) ? c + 1 : c;
  if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17e)) return (c % 2 == 1) ? c + 1 : c;
  if (c == 0x178) return 0xff;
  if (c >= 0x391 && c <= 0x3a9 && c != 0x3a2) return c + 32;
  if (c >= 0x410 && c <= 0x42f) return c + 32;
  if (c >= 0x400 && c <= 0x40f) return c + 80;
  return c;
}

}  // namespace detail

/// Lowercases, strips punctuation and splits on whitespace. Apostrophes
/// between two word characters ("don't") survive; all others are stripped.
inline std::vector<std::string> normalize_text(std::string_view raw) {
  const auto cps = detail::decode_utf8(raw);
  auto is_word = [](char32_t c) { return !detail::is_space(c) && !detail::is_punctuation(c); };

  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < cps.size(); ++i) {
    const char32_t c = cps[i];
    if (detail::is_space(c)) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (detail::is_apostrophe(c)) {
      const bool inside = i > 0 && i + 1 < cps.size() && is_word(cps[i - 1]) && is_word(cps[i + 1]);
      if (inside) current.push_back('\'');
      continue;
    }
    if (detail::is_punctuation(c)) continue;
    detail::append_utf8(current, detail::to_lower(c));
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

/// Minimum edit-distance alignment between token sequences. When several
/// alignments share the minimal cost, the backtrace prefers substitution,
/// then insertion, then deletion, so S/D/I counts are deterministic.
inline WerScore compute_wer(std::span<const std::string> reference, std::span<const std::string> hypothesis) {
  if (reference.empty()) throw DataError("undefined WER denominator: empty reference");
  const std::size_t n = reference.size();
  const std::size_t m = hypothesis.size();
  const std::size_t stride = m + 1;
  std::vector<std::uint32_t> cost((n + 1) * stride);
  for (std::size_t i = 0; i <= n; ++i) cost[i * stride] = static_cast<std::uint32_t>(i);
  for (std::size_t j = 0; j <= m; ++j) cost[j] = static_cast<std::uint32_t>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::uint32_t diag = cost[(i - 1) * stride + j - 1] + (reference[i - 1] == hypothesis[j - 1] ? 0 : 1);
      const std::uint32_t ins = cost[i * stride + j - 1] + 1;
      const std::uint32_t del = cost[(i - 1) * stride + j] + 1;
      cost[i * stride + j] = std::min({diag, ins, del});
    }
  }

  WerScore score;
  score.reference_length = n;
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    const std::uint32_t here = cost[i * stride + j];
    if (i > 0 && j > 0) {
      const bool same = reference[i - 1] == hypothesis[j - 1];
      if (cost[(i - 1) * stride + j - 1] + (same ? 0 : 1) == here) {
        if (same) {
          ++score.hits;
        } else {
          ++score.substitutions;
        }
        --i;
        --j;
        continue;
      }
    }
    if (j > 0 && cost[i * stride + j - 1] + 1 == here) {
      ++score.insertions;
      --j;
      continue;
    }
    ++score.deletions;
    --i;
  }
  return score;
}

inline WerScore compute_wer(std::string_view reference, std::string_view hypothesis) {
  const auto ref = normalize_text(reference);
  const auto hyp = normalize_text(hypothesis);
  return compute_wer(std::span<const std::string>(ref), std::span<const std::string>(hyp));
}

/// Reads line-delimited JSON records {"id", "text", optional "wer"}.
/// Blank lines are skipped; errors carry the 1-based line number.
inline Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path);

  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(line_no) + ": ";
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError(where + "malformed record: " + e.what());
    }
    if (!record.is_object()) throw DataError(where + "record is not an object");
    if (!record.contains("id") || !record["id"].is_string()) throw DataError(where + "missing string field \"id\"");
    if (!record.contains("text") || !record["text"].is_string()) {
      throw DataError(where + "missing string field \"text\"");
    }
    Utterance u;
    u.id = record["id"].get<std::string>();
    u.text = record["text"].get<std::string>();
    if (record.contains("wer") && !record["wer"].is_null()) {
      if (!record["wer"].is_number()) throw DataError(where + "field \"wer\" must be a number");
      const double wer = record["wer"].get<double>();
      if (!std::isfinite(wer) || wer < 0.0) throw DataError(where + "field \"wer\" must be non-negative");
      u.wer = wer;
    }
    if (!seen.insert(u.id).second) throw DataError(where + "duplicate id \"" + u.id + "\"");
    corpus.push_back(std::move(u));
  }
  return corpus;
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write corpus file: " + path);
  for (const auto& u : corpus) {
    nlohmann::json record = {{"id", u.id}, {"text", u.text}};
    if (u.wer) record["wer"] = *u.wer;
    out << record.dump() << '\n';
  }
}

/// Sets class_label from wer for every utterance; all must carry a WER.
inline void assign_labels(Corpus& corpus, const BucketSpec& spec) {
  for (auto& u : corpus) {
    if (!u.wer) throw DataError("utterance \"" + u.id + "\" has no WER; training corpus must be fully labeled");
    u.class_label = bucketize(*u.wer, spec);
  }
}

inline constexpr char kEmbeddingMagic[5] = "SESM";
inline constexpr std::uint16_t kEmbeddingVersion = 1;

inline void save_embeddings(const std::string& path, const EmbeddingMatrix& m) {
  if (m.data.size() != m.count * m.dim) throw DataError("embedding matrix size does not match count x dim");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write embedding file: " + path);
  out.write(kEmbeddingMagic, 4);
  io::write_le<std::uint16_t>(out, kEmbeddingVersion);
  io::write_le<std::uint16_t>(out, 0);
  io::write_le<std::uint64_t>(out, m.count);
  io::write_le<std::uint32_t>(out, static_cast<std::uint32_t>(m.dim));
  io::write_le<std::uint32_t>(out, 0);
  for (float v : m.data) io::write_f32(out, v);
  if (!out) throw DataError("failed writing embedding file: " + path);
}

inline EmbeddingMatrix load_embeddings(const std::string& path, std::optional<std::size_t> expected_count = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open embedding file: " + path);
  const std::string what = "embedding file " + path;
  io::expect_magic(in, kEmbeddingMagic, what);
  const auto version = io::read_le<std::uint16_t>(in, "version");
  if (version != kEmbeddingVersion) {
    throw FormatError(what + ": unsupported version " + std::to_string(version));
  }
  if (io::read_le<std::uint16_t>(in, "flags") != 0) throw FormatError(what + ": non-zero flags");
  const auto count = io::read_le<std::uint64_t>(in, "count");
  const auto dim = io::read_le<std::uint32_t>(in, "dim");
  io::read_le<std::uint32_t>(in, "padding");
  if (dim == 0) throw FormatError(what + ": zero dimension");
  if (expected_count && count != *expected_count) {
    throw CountMismatchError(what + ": holds " + std::to_string(count) + " rows but corpus has " +
                             std::to_string(*expected_count));
  }

  EmbeddingMatrix m(static_cast<std::size_t>(count), dim);
  for (std::size_t r = 0; r < m.count; ++r) {
    for (std::size_t c = 0; c < m.dim; ++c) {
      const float v = io::read_f32(in, "payload");
      if (!std::isfinite(v)) {
        throw NonFiniteError(what + ": non-finite value at row " + std::to_string(r) + ", column " +
                             std::to_string(c));
      }
      m.data[r * m.dim + c] = v;
    }
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError(what + ": trailing bytes after payload");
  return m;
}

}  // namespace sesame
