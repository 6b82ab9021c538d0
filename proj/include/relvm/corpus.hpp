#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "relvm/rng.hpp"
#include "relvm/vocab.hpp"

namespace relvm {

inline constexpr std::size_t kMaxSentenceTokens = 140;

struct Mention {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
  std::string type;
  std::string id;
};

struct TaggedSentence {
  std::vector<std::string> tokens;
  std::vector<Mention> mentions;

  void validate() const {
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      const Mention& m = mentions[i];
      require_input(m.start < m.end && m.end <= tokens.size(),
                    "TaggedSentence: mention span out of bounds");
      if (i > 0)
        require_input(mentions[i - 1].end <= m.start,
                      "TaggedSentence: mentions overlap or are unsorted");
    }
  }
};

// Masked token sequence with <BOS>/<EOS> framing and two <ENT> slots.
struct Context {
  std::vector<std::size_t> token_ids;
  std::size_t t_x = 0;
  std::size_t t_y = 0;

  std::size_t length() const { return token_ids.size(); }

  void validate(std::size_t vocab_size) const {
    std::size_t ents = 0;
    for (std::size_t id : token_ids) {
      require_input(id < vocab_size, "Context: token id out of range");
      if (id == kEntId) ++ents;
    }
    require_input(ents == 2, "Context: expected exactly two <ENT> tokens");
    require_input(t_x < t_y && t_y < token_ids.size(), "Context: bad entity positions");
    require_input(token_ids[t_x] == kEntId && token_ids[t_y] == kEntId,
                  "Context: entity positions do not point at <ENT>");
  }
};

struct LabeledMention {
  std::size_t x = 0;  // entity-input ids
  std::size_t y = 0;
  Context context;
  int r = 0;
};

struct LabeledPair {
  std::size_t x = 0;
  std::size_t y = 0;
  int r = 0;
};

struct MaskedExample {
  std::size_t x = 0;
  std::size_t y = 0;
  Context context;
};

// Replaces the two chosen mention spans by single <ENT> tokens, leaving other
// mentions verbatim. x is the earlier span's entity, y the later one's.
inline std::vector<std::string> masked_token_strings(const TaggedSentence& s, std::size_t a,
                                                     std::size_t b) {
  require_input(a < s.mentions.size() && b < s.mentions.size() && a != b,
                "mask_entities: bad mention indices");
  const Mention& ma = s.mentions[std::min(a, b)];
  const Mention& mb = s.mentions[std::max(a, b)];
  require_input(ma.end <= mb.start, "mask_entities: chosen mentions overlap");

  std::vector<std::string> out;
  out.reserve(s.tokens.size());
  for (std::size_t t = 0; t < s.tokens.size();) {
    if (t == ma.start) {
      out.push_back(kEntToken);
      t = ma.end;
    } else if (t == mb.start) {
      out.push_back(kEntToken);
      t = mb.end;
    } else {
      out.push_back(s.tokens[t]);
      ++t;
    }
  }
  return out;
}

inline Context encode_masked_tokens(const std::vector<std::string>& masked,
                                    const Vocabulary& vocab) {
  Context c;
  c.token_ids.reserve(masked.size() + 2);
  c.token_ids.push_back(kBosId);
  std::vector<std::size_t> ent_positions;
  for (const auto& tok : masked) {
    if (tok == kEntToken) {
      ent_positions.push_back(c.token_ids.size());
      c.token_ids.push_back(kEntId);
    } else {
      c.token_ids.push_back(vocab.token_id(tok));
    }
  }
  c.token_ids.push_back(kEosId);
  require_input(ent_positions.size() == 2, "Context must contain exactly two <ENT> tokens");
  c.t_x = ent_positions[0];
  c.t_y = ent_positions[1];
  return c;
}

inline MaskedExample mask_entities(const TaggedSentence& s, std::size_t a, std::size_t b,
                                   const Vocabulary& vocab) {
  const std::size_t first = std::min(a, b), second = std::max(a, b);
  MaskedExample ex;
  ex.context = encode_masked_tokens(masked_token_strings(s, first, second), vocab);
  const Mention& mx = s.mentions[first];
  const Mention& my = s.mentions[second];
  if (vocab.mode == EntityMode::Types) {
    ex.x = vocab.entity_id(mx.type);
    ex.y = vocab.entity_id(my.type);
  } else {
    ex.x = vocab.entity_id(mx.id);
    ex.y = vocab.entity_id(my.id);
  }
  return ex;
}

// All unordered mention pairs, oriented by sentence position.
inline std::vector<std::pair<std::size_t, std::size_t>> expand_pairs(const TaggedSentence& s) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  const std::size_t n = s.mentions.size();
  if (n < 2) return out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  return out;
}

// Length gate (before <BOS>/<EOS>) plus masking and OOV handling.
inline std::optional<MaskedExample> filter_and_encode(const TaggedSentence& s, std::size_t a,
                                                      std::size_t b, const Vocabulary& vocab) {
  if (s.tokens.size() > kMaxSentenceTokens) return std::nullopt;
  return mask_entities(s, a, b, vocab);
}

// Seeded shuffle, then contiguous folds whose sizes differ by at most one
// (the first n % k folds are the larger ones).
inline std::vector<std::vector<std::size_t>> kfold_split(std::size_t n, std::size_t k,
                                                         RngStream rng) {
  require_input(k >= 1 && k <= n, "kfold_split: need 1 <= k <= n");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng.uniform_int(i);
    std::swap(idx[i - 1], idx[j]);
  }
  std::vector<std::vector<std::size_t>> folds(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t sz = base + (f < extra ? 1 : 0);
    folds[f].assign(idx.begin() + pos, idx.begin() + pos + sz);
    pos += sz;
  }
  return folds;
}

// batch - quota labelled examples plus quota NO-RELATION pairs, both drawn
// uniformly with replacement. The pool must already exclude validation and
// test pairs.
inline std::vector<LabeledPair> sample_minibatch(const std::vector<LabeledPair>& positives,
                                                 const std::vector<LabeledPair>& no_rel_pool,
                                                 std::size_t batch, std::size_t quota,
                                                 RngStream& rng) {
  require_input(quota <= batch, "sample_minibatch: quota exceeds batch");
  require_input(batch == quota || !positives.empty(),
                "sample_minibatch: empty labelled pool");
  require_input(quota == 0 || !no_rel_pool.empty(),
                "sample_minibatch: empty NO-RELATION pool");
  std::vector<LabeledPair> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch - quota; ++i)
    out.push_back(positives[rng.uniform_int(positives.size())]);
  for (std::size_t i = 0; i < quota; ++i)
    out.push_back(no_rel_pool[rng.uniform_int(no_rel_pool.size())]);
  return out;
}

// ---------------------------------------------------------------------------
// File formats.
//
// Corpus file: one sentence per line, <tokens>\t<mentions>, tokens
// space-joined, mentions semicolon-joined start,end,TYPE,ID quadruples.
//
// Mention dataset: x_type\ty_type\tmasked sentence\tlabel(0|1).
//
// Pair dataset: x_id\ty_id\tlabel.
// ---------------------------------------------------------------------------

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string join(const std::vector<std::string>& parts, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

inline TaggedSentence parse_corpus_line(const std::string& line, std::size_t lineno) {
  const auto fields = split(line, '\t');
  require_input(fields.size() == 2,
                "corpus line " + std::to_string(lineno) + ": expected 2 tab-separated fields");
  TaggedSentence s;
  s.tokens = split(fields[0], ' ');
  if (!fields[1].empty()) {
    for (const auto& m : split(fields[1], ';')) {
      const auto q = split(m, ',');
      require_input(q.size() == 4, "corpus line " + std::to_string(lineno) +
                                       ": mention must be start,end,TYPE,ID");
      Mention mm;
      try {
        mm.start = std::stoul(q[0]);
        mm.end = std::stoul(q[1]);
      } catch (const std::exception&) {
        throw RejectedInput("corpus line " + std::to_string(lineno) + ": bad mention span");
      }
      mm.type = q[2];
      mm.id = q[3];
      s.mentions.push_back(mm);
    }
  }
  s.validate();
  return s;
}

inline std::vector<TaggedSentence> load_corpus(const std::string& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open corpus file: " + path);
  std::vector<TaggedSentence> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    out.push_back(parse_corpus_line(line, lineno));
  }
  require_input(!out.empty(), "corpus file is empty: " + path);
  return out;
}

inline void write_corpus(const std::string& path, const std::vector<TaggedSentence>& corpus) {
  std::ofstream out(path);
  require_input(out.good(), "cannot write corpus file: " + path);
  for (const auto& s : corpus) {
    std::vector<std::string> ms;
    for (const auto& m : s.mentions)
      ms.push_back(std::to_string(m.start) + "," + std::to_string(m.end) + "," + m.type + "," +
                   m.id);
    out << join(s.tokens, " ") << '\t' << join(ms, ";") << '\n';
  }
}

struct MentionRecord {
  std::string x_type;
  std::string y_type;
  std::vector<std::string> masked_tokens;
  int r = 0;
};

inline std::vector<MentionRecord> load_mention_dataset(const std::string& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open mention dataset: " + path);
  std::vector<MentionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    require_input(fields.size() == 4, "mention dataset line " + std::to_string(lineno) +
                                          ": expected 4 tab-separated fields");
    MentionRecord rec;
    rec.x_type = fields[0];
    rec.y_type = fields[1];
    rec.masked_tokens = split(fields[2], ' ');
    require_input(fields[3] == "0" || fields[3] == "1",
                  "mention dataset line " + std::to_string(lineno) + ": label must be 0 or 1");
    rec.r = fields[3] == "1" ? 1 : 0;
    out.push_back(std::move(rec));
  }
  return out;
}

inline void write_mention_dataset(const std::string& path,
                                  const std::vector<MentionRecord>& recs) {
  std::ofstream out(path);
  require_input(out.good(), "cannot write mention dataset: " + path);
  for (const auto& r : recs)
    out << r.x_type << '\t' << r.y_type << '\t' << join(r.masked_tokens, " ") << '\t' << r.r
        << '\n';
}

struct PairRecord {
  std::string x_id;
  std::string y_id;
  std::string label;
};

inline std::vector<PairRecord> load_pair_dataset(const std::string& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open pair dataset: " + path);
  std::vector<PairRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto fields = split(line, '\t');
    require_input(fields.size() == 3, "pair dataset line " + std::to_string(lineno) +
                                          ": expected 3 tab-separated fields");
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

inline void write_pair_dataset(const std::string& path, const std::vector<PairRecord>& recs) {
  std::ofstream out(path);
  require_input(out.good(), "cannot write pair dataset: " + path);
  for (const auto& r : recs) out << r.x_id << '\t' << r.y_id << '\t' << r.label << '\n';
}

// ---------------------------------------------------------------------------
// Pair-level co-occurrence index over a corpus: canonical (lexicographic)
// entity-name keys mapped to entity types and the sentences containing the
// pair.
// ---------------------------------------------------------------------------

struct CooccurrenceIndex {
  struct Entry {
    std::string type_a, type_b;  // types matching the canonical name order
    std::vector<std::size_t> sentence_indices;
  };
  std::map<std::pair<std::string, std::string>, Entry> pairs;

  static std::pair<std::string, std::string> key(const std::string& a, const std::string& b) {
    return a <= b ? std::make_pair(a, b) : std::make_pair(b, a);
  }

  bool cooccurs(const std::string& a, const std::string& b) const {
    return pairs.count(key(a, b)) > 0;
  }
};

inline CooccurrenceIndex build_cooccurrence(const std::vector<TaggedSentence>& corpus) {
  CooccurrenceIndex index;
  for (std::size_t si = 0; si < corpus.size(); ++si) {
    const auto& s = corpus[si];
    for (const auto& [i, j] : expand_pairs(s)) {
      const Mention& mi = s.mentions[i];
      const Mention& mj = s.mentions[j];
      if (mi.id == mj.id) continue;
      auto k = CooccurrenceIndex::key(mi.id, mj.id);
      auto& e = index.pairs[k];
      if (e.sentence_indices.empty()) {
        e.type_a = k.first == mi.id ? mi.type : mj.type;
        e.type_b = k.first == mi.id ? mj.type : mi.type;
      }
      e.sentence_indices.push_back(si);
    }
  }
  return index;
}

}  // namespace relvm
