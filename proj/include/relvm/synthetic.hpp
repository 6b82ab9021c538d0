#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "relvm/corpus.hpp"
#include "relvm/rng.hpp"

namespace relvm {

inline const std::vector<std::string> kPairLabels = {
    "NO-RELATION", "DISEASE-GENE", "GENE-GENE", "CHEMICAL-GENE", "CHEMICAL-DISEASE"};
inline constexpr int kNoRelationId = 0;

inline int pair_label_id(const std::string& label) {
  for (std::size_t i = 0; i < kPairLabels.size(); ++i)
    if (kPairLabels[i] == label) return static_cast<int>(i);
  throw RejectedInput("unknown pair label: " + label);
}

// Canonical label for an unordered type pair; empty if the combination is
// never labelled (e.g. DISEASE-DISEASE).
inline std::string label_for_type_pair(const std::string& a, const std::string& b) {
  auto has = [&](const char* x, const char* y) {
    return (a == x && b == y) || (a == y && b == x);
  };
  if (has("DISEASE", "GENE")) return "DISEASE-GENE";
  if (has("GENE", "GENE")) return "GENE-GENE";
  if (has("CHEMICAL", "GENE")) return "CHEMICAL-GENE";
  if (has("CHEMICAL", "DISEASE")) return "CHEMICAL-DISEASE";
  return "";
}

// A sentence template with two typed entity slots. Slot type "*" accepts any
// entity. An empty label marks neutral (co-occurrence without relation)
// wording.
struct SentenceTemplate {
  std::string label;
  std::string slot_a_type;
  std::string slot_b_type;
  std::vector<std::string> words;  // "{A}" and "{B}" mark the slots

  void validate() const {
    std::size_t a = 0, b = 0;
    for (const auto& w : words) {
      if (w == "{A}") ++a;
      if (w == "{B}") ++b;
    }
    require_input(a == 1 && b == 1, "template must contain exactly two entity slots");
  }
};

// Two phrasings per relation so the latent wording choice is multimodal,
// plus neutral phrasings shared by all type pairs.
inline const std::vector<SentenceTemplate>& builtin_templates() {
  static const std::vector<SentenceTemplate> t = {
      {"DISEASE-GENE", "GENE", "DISEASE",
       {"mutations", "in", "{A}", "are", "strongly", "linked", "to", "{B}"}},
      {"DISEASE-GENE", "DISEASE", "GENE",
       {"{A}", "risk", "increases", "when", "{B}", "is", "disrupted"}},
      {"GENE-GENE", "GENE", "GENE",
       {"{A}", "phosphorylates", "{B}", "during", "cell", "signalling"}},
      {"GENE-GENE", "GENE", "GENE",
       {"{A}", "binds", "directly", "to", "{B}", "in", "vivo"}},
      {"CHEMICAL-GENE", "CHEMICAL", "GENE",
       {"{A}", "potently", "inhibits", "{B}", "expression"}},
      {"CHEMICAL-GENE", "CHEMICAL", "GENE",
       {"treatment", "with", "{A}", "upregulates", "{B}", "levels"}},
      {"CHEMICAL-DISEASE", "CHEMICAL", "DISEASE",
       {"{A}", "alleviates", "symptoms", "of", "{B}", "in", "trials"}},
      {"CHEMICAL-DISEASE", "CHEMICAL", "DISEASE",
       {"exposure", "to", "{A}", "worsens", "{B}", "progression"}},
      {"", "*", "*", {"{A}", "and", "{B}", "were", "measured", "in", "the", "cohort"}},
      {"", "*", "*",
       {"samples", "containing", "{A}", "and", "{B}", "were", "collected", "for", "analysis"}},
      {"", "*", "*", {"{A}", "was", "recorded", "alongside", "{B}", "in", "the", "registry"}},
  };
  return t;
}

struct SyntheticSpec {
  std::map<std::string, std::size_t> entities_per_type = {
      {"CHEMICAL", 12}, {"DISEASE", 12}, {"GENE", 12}};
  std::size_t sentence_count = 2000;
  std::size_t mention_count = 400;
  std::size_t rule_mod = 2;  // entities i, j are related iff (i + j) % mod == rem
  std::size_t rule_rem = 0;
  double related_pair_prob = 0.55;
  double relational_wording_prob = 0.9;
  std::vector<SentenceTemplate> templates = builtin_templates();

  void validate() const {
    require_input(!entities_per_type.empty() && sentence_count > 0,
                  "synthetic spec: need entities and a sentence count");
    require_input(rule_mod > 0, "synthetic spec: rule_mod must be positive");
    for (const auto& t : templates) t.validate();
  }
};

struct SyntheticEntity {
  std::string name;
  std::string type;
  std::size_t type_index = 0;
};

struct SyntheticData {
  std::vector<TaggedSentence> corpus;
  std::vector<MentionRecord> mentions;  // per-sentence gold, first mention_count sentences
  std::vector<PairRecord> pairs;        // related pairs seen in at least one sentence
  std::vector<SyntheticEntity> entities;
};

namespace detail {

inline bool synthetic_related(const SyntheticSpec& spec, const SyntheticEntity& a,
                              const SyntheticEntity& b) {
  if (label_for_type_pair(a.type, b.type).empty()) return false;
  return (a.type_index + b.type_index) % spec.rule_mod == spec.rule_rem;
}

}  // namespace detail

// Plants pairwise relations over typed entities and realises each sentence
// through a template whose wording matches the planted label. Fully
// deterministic given the RngStream.
inline SyntheticData gen_synthetic(const SyntheticSpec& spec, RngStream rng) {
  spec.validate();

  SyntheticData data;
  for (const auto& [type, count] : spec.entities_per_type) {
    require_input(!type.empty(), "synthetic spec: empty entity type");
    for (std::size_t i = 0; i < count; ++i)
      data.entities.push_back({type.substr(0, 1) + std::to_string(i), type, i});
  }

  struct PairInfo {
    std::size_t a, b;  // entity indices
    std::string label;
  };
  std::vector<PairInfo> related, unrelated;
  for (std::size_t i = 0; i < data.entities.size(); ++i)
    for (std::size_t j = i + 1; j < data.entities.size(); ++j) {
      const auto label = label_for_type_pair(data.entities[i].type, data.entities[j].type);
      if (label.empty()) continue;
      if (detail::synthetic_related(spec, data.entities[i], data.entities[j]))
        related.push_back({i, j, label});
      else
        unrelated.push_back({i, j, ""});
    }
  require_input(!related.empty() && !unrelated.empty(),
                "synthetic spec: rule yields no related or no unrelated pairs");

  std::vector<std::vector<std::size_t>> by_label(kPairLabels.size());
  std::vector<std::size_t> neutral;
  for (std::size_t t = 0; t < spec.templates.size(); ++t) {
    const auto& tpl = spec.templates[t];
    if (tpl.label.empty())
      neutral.push_back(t);
    else
      by_label[pair_label_id(tpl.label)].push_back(t);
  }
  require_input(!neutral.empty(), "synthetic spec: need at least one neutral template");

  std::set<std::pair<std::size_t, std::size_t>> seen_related;
  for (std::size_t n = 0; n < spec.sentence_count; ++n) {
    const bool use_related = rng.bernoulli(spec.related_pair_prob);
    const PairInfo& pick = use_related ? related[rng.uniform_int(related.size())]
                                       : unrelated[rng.uniform_int(unrelated.size())];
    const SyntheticEntity& ea = data.entities[pick.a];
    const SyntheticEntity& eb = data.entities[pick.b];

    int r = 0;
    std::size_t tpl_idx;
    if (use_related && rng.bernoulli(spec.relational_wording_prob)) {
      const auto& bank = by_label[pair_label_id(pick.label)];
      require_input(!bank.empty(), "synthetic spec: no template for label " + pick.label);
      tpl_idx = bank[rng.uniform_int(bank.size())];
      r = 1;
    } else {
      tpl_idx = neutral[rng.uniform_int(neutral.size())];
    }
    const SentenceTemplate& tpl = spec.templates[tpl_idx];

    // Assign entities to slots: typed slots take the matching entity, "*"
    // slots and same-type slots are oriented at random.
    const SyntheticEntity* slot_a = &ea;
    const SyntheticEntity* slot_b = &eb;
    if (tpl.slot_a_type == "*" || tpl.slot_a_type == tpl.slot_b_type) {
      if (rng.bernoulli(0.5)) std::swap(slot_a, slot_b);
    } else if (tpl.slot_a_type == eb.type && tpl.slot_b_type == ea.type) {
      std::swap(slot_a, slot_b);
    }
    require_input(tpl.slot_a_type == "*" || tpl.slot_a_type == slot_a->type,
                  "synthetic spec: template " + std::to_string(tpl_idx) +
                      " cannot be filled by the drawn pair");
    require_input(tpl.slot_b_type == "*" || tpl.slot_b_type == slot_b->type,
                  "synthetic spec: template slot B type mismatch");

    TaggedSentence s;
    for (const auto& w : tpl.words) {
      const SyntheticEntity* ent = w == "{A}" ? slot_a : (w == "{B}" ? slot_b : nullptr);
      if (ent) {
        s.mentions.push_back({s.tokens.size(), s.tokens.size() + 1, ent->type, ent->name});
        s.tokens.push_back(ent->name);
      } else {
        s.tokens.push_back(w);
      }
    }
    s.validate();

    if (use_related) seen_related.insert({pick.a, pick.b});

    if (data.mentions.size() < spec.mention_count) {
      MentionRecord rec;
      rec.x_type = s.mentions[0].type;
      rec.y_type = s.mentions[1].type;
      rec.masked_tokens = masked_token_strings(s, 0, 1);
      rec.r = r;
      data.mentions.push_back(std::move(rec));
    }
    data.corpus.push_back(std::move(s));
  }

  for (const auto& p : related) {
    if (!seen_related.count({p.a, p.b})) continue;
    // Orientation matches the label's word order (e.g. DISEASE-GENE lists the
    // disease first); same-type pairs are listed by name.
    const SyntheticEntity& ea = data.entities[p.a];
    const SyntheticEntity& eb = data.entities[p.b];
    const std::string first_type = p.label.substr(0, p.label.find('-'));
    const SyntheticEntity* x = &ea;
    const SyntheticEntity* y = &eb;
    if (ea.type != eb.type) {
      if (eb.type == first_type) std::swap(x, y);
    } else if (eb.name < ea.name) {
      std::swap(x, y);
    }
    data.pairs.push_back({x->name, y->name, p.label});
  }
  return data;
}

}  // namespace relvm
