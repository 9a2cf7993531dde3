#pragma once

// Synthetic nested-NER corpus: generation, gold alignment construction,
// random segment cutting, and JSON-lines serialization.
//
// Generated text is learnable by construction: every span starts with one of
// its label's dedicated begin-trigger words and ends with an end-trigger word
// (single-token spans use a whole-span trigger), the rest is filler drawn
// from a common-word pool.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/errors.hpp"
#include "nert/lattice.hpp"
#include "nert/schema.hpp"

namespace nert {

struct Span {
  int ontology = -1;
  int label = -1;  // begin-label id from the schema
  int start = 0;   // token index, inclusive
  int end = 0;     // token index, inclusive

  bool operator==(const Span&) const = default;
};

struct LabeledSequence {
  std::string id;
  std::vector<int> tokens;
  std::vector<Span> spans;

  bool operator==(const LabeledSequence&) const = default;
};

struct GoldAlignment {
  AlignmentPath path;
  std::vector<int> targets;  // label ids in emission order
};

// Word-id layout shared by the generator and anyone interpreting tokens.
class WordInventory {
 public:
  WordInventory(const OntologySchema& schema, int common_words = 50)
      : common_(common_words) {
    int b = 0;
    for (const Ontology& o : schema.ontologies) b += static_cast<int>(o.labels.size());
    begins_ = b;
  }

  int common_words() const { return common_; }
  int vocab_size() const { return common_ + 6 * begins_; }

  // per begin-label block of six dedicated words
  int begin_trigger(int begin_label_block, int variant) const {
    return common_ + 6 * begin_label_block + variant;  // variant 0..1
  }
  int end_trigger(int begin_label_block, int variant) const {
    return common_ + 6 * begin_label_block + 2 + variant;
  }
  int whole_trigger(int begin_label_block, int variant) const {
    return common_ + 6 * begin_label_block + 4 + variant;
  }

 private:
  int common_;
  int begins_;
};

struct GenConfig {
  int size = 0;
  int min_len = 20;
  double mean_len = 300;   // long exponential tail, clipped below
  int max_len = 1600;
  double spans_per_100 = 3.0;  // expected spans per 100 tokens
  double nesting_rate = 0.25;
  double single_token_rate = 0.2;
  int max_span_len = 6;
  int common_words = 50;
  std::uint64_t seed = 1;

  void validate() const {
    if (size < 0) throw GenerationError("corpus size must be >= 0");
    if (min_len < 1 || min_len > max_len)
      throw GenerationError("need 1 <= min_len <= max_len");
    if (max_span_len < 1 || max_span_len > min_len)
      throw GenerationError("span longer than shortest sequence");
    if (nesting_rate < 0 || nesting_rate > 1 || single_token_rate < 0 ||
        single_token_rate > 1)
      throw GenerationError("rates must lie in [0, 1]");
    if (spans_per_100 < 0) throw GenerationError("span density must be >= 0");
  }
};

namespace detail {

inline bool strictly_inside(const Span& a, const Span& b) {
  return a.start > b.start && a.end < b.end;
}
inline bool disjoint(const Span& a, const Span& b) {
  return a.end < b.start || b.end < a.start;
}

// same-ontology spans must be pairwise disjoint or strictly nested
inline bool placement_ok(const Span& cand, const std::vector<Span>& spans) {
  for (const Span& s : spans) {
    if (s.ontology != cand.ontology) continue;
    if (!disjoint(cand, s) && !strictly_inside(cand, s) && !strictly_inside(s, cand))
      return false;
  }
  return true;
}

}  // namespace detail

inline std::vector<LabeledSequence> generate_corpus(const OntologySchema& schema,
                                                    const GenConfig& cfg) {
  cfg.validate();
  if (schema.ontologies.empty()) throw GenerationError("schema has no ontologies");
  const WordInventory inv(schema, cfg.common_words);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> common(0, inv.common_words() - 1);
  std::uniform_int_distribution<int> variant(0, 1);
  std::vector<double> weights;
  std::vector<int> label_base;  // global begin-label block offset per ontology
  int base = 0;
  for (const Ontology& o : schema.ontologies) {
    weights.push_back(o.weight);
    label_base.push_back(base);
    base += static_cast<int>(o.labels.size());
  }
  std::discrete_distribution<int> pick_ontology(weights.begin(), weights.end());
  std::exponential_distribution<double> tail(1.0 /
                                             std::max(1.0, cfg.mean_len - cfg.min_len));
  std::uniform_real_distribution<double> coin(0.0, 1.0);

  std::vector<LabeledSequence> corpus;
  corpus.reserve(static_cast<std::size_t>(cfg.size));
  for (int i = 0; i < cfg.size; ++i) {
    LabeledSequence seq;
    seq.id = "gen-" + std::to_string(cfg.seed) + "-" + std::to_string(i);
    const int n =
        std::min(cfg.max_len, cfg.min_len + static_cast<int>(tail(rng)));
    seq.tokens.resize(static_cast<std::size_t>(n));
    for (int t = 0; t < n; ++t) seq.tokens[static_cast<std::size_t>(t)] = common(rng);

    std::vector<bool> used(static_cast<std::size_t>(n), false);  // trigger positions
    std::poisson_distribution<int> span_count(cfg.spans_per_100 * n / 100.0);
    const int want = span_count(rng);
    for (int k = 0; k < want; ++k) {
      const int ont = pick_ontology(rng);
      const int nlabels = static_cast<int>(schema.ontologies[ont].labels.size());
      if (nlabels == 0) continue;
      const int label_idx = std::uniform_int_distribution<int>(0, nlabels - 1)(rng);
      const int block = label_base[ont] + label_idx;
      for (int attempt = 0; attempt < 20; ++attempt) {
        Span cand;
        cand.ontology = ont;
        cand.label = schema.ontologies[ont].begin_ids[label_idx];
        const bool single = coin(rng) < cfg.single_token_rate;
        int len = single ? 1
                         : std::uniform_int_distribution<int>(
                               2, std::max(2, cfg.max_span_len))(rng);
        const bool nest = coin(rng) < cfg.nesting_rate;
        if (nest) {
          // try to sit strictly inside an existing same-ontology span
          std::vector<std::size_t> hosts;
          for (std::size_t s = 0; s < seq.spans.size(); ++s)
            if (seq.spans[s].ontology == ont &&
                seq.spans[s].end - seq.spans[s].start - 1 >= len)
              hosts.push_back(s);
          if (!hosts.empty()) {
            const Span& host = seq.spans[hosts[std::uniform_int_distribution<std::size_t>(
                0, hosts.size() - 1)(rng)]];
            cand.start = std::uniform_int_distribution<int>(
                host.start + 1, host.end - len)(rng);
            cand.end = cand.start + len - 1;
          } else {
            continue;  // nothing to nest in; retry (likely as a top-level span)
          }
        } else {
          if (len > n) break;
          cand.start = std::uniform_int_distribution<int>(0, n - len)(rng);
          cand.end = cand.start + len - 1;
          bool clear = true;  // non-nested spans never touch same-ontology spans
          for (const Span& s : seq.spans)
            if (s.ontology == ont && !detail::disjoint(cand, s)) {
              clear = false;
              break;
            }
          if (!clear) continue;
        }
        if (!detail::placement_ok(cand, seq.spans)) continue;
        if (used[static_cast<std::size_t>(cand.start)] ||
            used[static_cast<std::size_t>(cand.end)])
          continue;
        if (len == 1) {
          seq.tokens[static_cast<std::size_t>(cand.start)] =
              inv.whole_trigger(block, variant(rng));
        } else {
          seq.tokens[static_cast<std::size_t>(cand.start)] =
              inv.begin_trigger(block, variant(rng));
          seq.tokens[static_cast<std::size_t>(cand.end)] =
              inv.end_trigger(block, variant(rng));
        }
        used[static_cast<std::size_t>(cand.start)] = true;
        used[static_cast<std::size_t>(cand.end)] = true;
        seq.spans.push_back(cand);
        break;
      }
    }
    std::sort(seq.spans.begin(), seq.spans.end(), [](const Span& a, const Span& b) {
      if (a.start != b.start) return a.start < b.start;
      return a.end > b.end;
    });
    corpus.push_back(std::move(seq));
  }
  return corpus;
}

// --- gold alignment ----------------------------------------------------------

enum class OrderingPolicy { OutermostFirst };

// Begin-label at the span's start token, end-marker at its end token.
// Emissions sharing a token are ordered longest span first, then ontology id,
// then label id, begin before end; this round-trips through extract_spans.
inline GoldAlignment spans_to_alignment(const LabeledSequence& seq,
                                        const OntologySchema& schema,
                                        OrderingPolicy = OrderingPolicy::OutermostFirst) {
  const int T = static_cast<int>(seq.tokens.size());
  struct Event {
    int len, ontology, label, kind;  // kind 0 = begin, 1 = end
    int emit;                        // label id to emit
  };
  std::vector<std::vector<Event>> at(static_cast<std::size_t>(T));
  for (const Span& s : seq.spans) {
    if (s.start < 0 || s.start > s.end || s.end >= T)
      throw ContractViolation("span outside the token range");
    if (schema.ontology_of(s.label) != s.ontology || !schema.is_begin(s.label))
      throw ContractViolation("span label does not match its ontology");
    const int len = s.end - s.start + 1;
    at[static_cast<std::size_t>(s.start)].push_back(
        Event{len, s.ontology, s.label, 0, s.label});
    at[static_cast<std::size_t>(s.end)].push_back(
        Event{len, s.ontology, s.label, 1,
              schema.ontologies[static_cast<std::size_t>(s.ontology)].end_marker_id});
  }
  GoldAlignment out;
  for (int t = 0; t < T; ++t) {
    auto& ev = at[static_cast<std::size_t>(t)];
    std::sort(ev.begin(), ev.end(), [](const Event& a, const Event& b) {
      if (a.len != b.len) return a.len > b.len;
      if (a.ontology != b.ontology) return a.ontology < b.ontology;
      if (a.label != b.label) return a.label < b.label;
      return a.kind < b.kind;
    });
    for (const Event& e : ev) {
      out.targets.push_back(e.emit);
      out.path.moves.push_back(Move::Label);
    }
    out.path.moves.push_back(Move::Blank);
  }
  out.path.validate(T, static_cast<int>(out.targets.size()));
  return out;
}

// --- random segment cutting --------------------------------------------------

enum class SegmentPolicy { Drop, Clip };

inline LabeledSequence random_segment(const LabeledSequence& seq, int min_len,
                                      int max_len, std::mt19937_64& rng,
                                      SegmentPolicy policy = SegmentPolicy::Drop) {
  if (min_len > max_len) throw ContractViolation("min_len > max_len");
  const int n = static_cast<int>(seq.tokens.size());
  if (n <= min_len) return seq;
  const int L = std::uniform_int_distribution<int>(min_len, std::min(max_len, n))(rng);
  const int s = std::uniform_int_distribution<int>(0, n - L)(rng);
  const int e = s + L - 1;  // inclusive window [s, e]
  LabeledSequence out;
  out.id = seq.id + "@" + std::to_string(s);
  out.tokens.assign(seq.tokens.begin() + s, seq.tokens.begin() + s + L);
  for (Span sp : seq.spans) {
    if (sp.start >= s && sp.end <= e) {
      sp.start -= s;
      sp.end -= s;
      out.spans.push_back(sp);
    } else if (policy == SegmentPolicy::Clip && sp.end >= s && sp.start <= e) {
      sp.start = std::max(sp.start, s) - s;
      sp.end = std::min(sp.end, e) - s;
      out.spans.push_back(sp);
    }
  }
  return out;
}

// --- serialization -----------------------------------------------------------

inline void save_corpus(const std::vector<LabeledSequence>& corpus,
                        const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParseError("cannot open for write: " + path);
  os << nlohmann::json{{"format", "nert-corpus"}, {"version", 1}}.dump() << "\n";
  for (const LabeledSequence& seq : corpus) {
    nlohmann::json spans = nlohmann::json::array();
    for (const Span& s : seq.spans)
      spans.push_back({s.ontology, s.label, s.start, s.end});
    os << nlohmann::json{{"id", seq.id}, {"tokens", seq.tokens}, {"spans", spans}}
              .dump()
       << "\n";
  }
}

inline std::vector<LabeledSequence> load_corpus(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open: " + path);
  std::vector<LabeledSequence> corpus;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (!header_seen) {
        if (j.value("format", "") != "nert-corpus" || j.value("version", 0) != 1)
          throw ParseError("missing or unsupported corpus header");
        header_seen = true;
        continue;
      }
      LabeledSequence seq;
      seq.id = j.at("id").get<std::string>();
      seq.tokens = j.at("tokens").get<std::vector<int>>();
      for (const auto& js : j.at("spans")) {
        if (!js.is_array() || js.size() != 4)
          throw ParseError("span must be [ontology, label, start, end]");
        seq.spans.push_back(Span{js[0].get<int>(), js[1].get<int>(),
                                 js[2].get<int>(), js[3].get<int>()});
      }
      corpus.push_back(std::move(seq));
    } catch (const ParseError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace nert
