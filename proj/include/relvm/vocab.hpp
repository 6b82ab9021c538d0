#pragma once

#include <algorithm>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "relvm/errors.hpp"

namespace relvm {

inline const std::string kPadToken = "<PAD>";
inline const std::string kBosToken = "<BOS>";
inline const std::string kEosToken = "<EOS>";
inline const std::string kUnkToken = "<UNK>";
inline const std::string kEntToken = "<ENT>";

inline constexpr std::size_t kPadId = 0;
inline constexpr std::size_t kBosId = 1;
inline constexpr std::size_t kEosId = 2;
inline constexpr std::size_t kUnkId = 3;
inline constexpr std::size_t kEntId = 4;

enum class EntityMode { Types, Identifiers };

inline std::string entity_mode_name(EntityMode m) {
  return m == EntityMode::Types ? "types" : "identifiers";
}

inline EntityMode entity_mode_from_name(const std::string& s) {
  if (s == "types") return EntityMode::Types;
  if (s == "identifiers") return EntityMode::Identifiers;
  throw RejectedInput("unknown entity mode: " + s);
}

// Token vocabulary plus the entity-input table (types or identifiers,
// depending on mode). Reserved tokens occupy ids 0-4.
struct Vocabulary {
  std::vector<std::string> id_to_token;
  std::unordered_map<std::string, std::size_t> token_to_id;
  EntityMode mode = EntityMode::Types;
  std::vector<std::string> entity_names;
  std::unordered_map<std::string, std::size_t> entity_ids;

  std::size_t size() const { return id_to_token.size(); }
  std::size_t entity_count() const { return entity_names.size(); }

  std::size_t token_id(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? kUnkId : it->second;
  }

  std::size_t entity_id(const std::string& name) const {
    auto it = entity_ids.find(name);
    require_input(it != entity_ids.end(), "unknown entity input: " + name);
    return it->second;
  }

  void add_token(const std::string& tok) {
    token_to_id.emplace(tok, id_to_token.size());
    id_to_token.push_back(tok);
  }

  void add_entity(const std::string& name) {
    if (!entity_ids.count(name)) {
      entity_ids.emplace(name, entity_names.size());
      entity_names.push_back(name);
    }
  }
};

// Reserved tokens first, then descending frequency with lexicographic
// tie-break. Tokens below min_count or beyond max_size (total size cap,
// 0 = unlimited) are left out and encode as <UNK>.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& sentences,
                              std::size_t min_count = 1, std::size_t max_size = 0,
                              EntityMode mode = EntityMode::Types) {
  require_input(!sentences.empty(), "build_vocab: empty corpus");
  std::map<std::string, std::size_t> freq;
  for (const auto& toks : sentences)
    for (const auto& t : toks) ++freq[t];

  std::vector<std::pair<std::string, std::size_t>> by_freq(freq.begin(), freq.end());
  std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.mode = mode;
  for (const auto& tok : {kPadToken, kBosToken, kEosToken, kUnkToken, kEntToken})
    v.add_token(tok);
  for (const auto& [tok, n] : by_freq) {
    if (n < min_count) continue;
    if (max_size > 0 && v.size() >= max_size) break;
    if (v.token_to_id.count(tok)) continue;  // reserved token seen in text
    v.add_token(tok);
  }
  return v;
}

}  // namespace relvm
