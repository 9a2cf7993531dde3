#pragma once

// Span-level precision/recall/F1. Local matching requires the exact label and
// exact (start, end); global matching compares label multisets only.

#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/corpus.hpp"
#include "nert/schema.hpp"

namespace nert {

struct MatchCounts {
  long tp = 0;
  long fp = 0;
  long fn = 0;

  double precision() const { return tp + fp == 0 ? 0.0 : double(tp) / double(tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : double(tp) / double(tp + fn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  MatchCounts& operator+=(const MatchCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }
};

struct SpanMatchResult {
  // keyed by (ontology, begin-label id)
  std::map<std::pair<int, int>, MatchCounts> by_label;

  MatchCounts totals() const {
    MatchCounts t;
    for (const auto& [k, c] : by_label) t += c;
    return t;
  }
  MatchCounts ontology_totals(int ontology) const {
    MatchCounts t;
    for (const auto& [k, c] : by_label)
      if (k.first == ontology) t += c;
    return t;
  }
  SpanMatchResult& operator+=(const SpanMatchResult& o) {
    for (const auto& [k, c] : o.by_label) by_label[k] += c;
    return *this;
  }
};

// True positive iff an unmatched gold span has the same label and the same
// (start, end); one-to-one matching.
inline SpanMatchResult local_f1(const std::vector<Span>& pred,
                                const std::vector<Span>& gold) {
  SpanMatchResult out;
  std::map<std::tuple<int, int, int, int>, long> gold_left;
  for (const Span& g : gold) {
    ++gold_left[{g.ontology, g.label, g.start, g.end}];
    out.by_label[{g.ontology, g.label}];
  }
  for (const Span& p : pred) {
    MatchCounts& c = out.by_label[{p.ontology, p.label}];
    auto it = gold_left.find({p.ontology, p.label, p.start, p.end});
    if (it != gold_left.end() && it->second > 0) {
      --it->second;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& [k, n] : gold_left)
    out.by_label[{std::get<0>(k), std::get<1>(k)}].fn += n;
  return out;
}

// Label multiset matching, locations ignored.
inline SpanMatchResult global_f1(const std::vector<Span>& pred,
                                 const std::vector<Span>& gold) {
  SpanMatchResult out;
  std::map<std::pair<int, int>, long> gold_left;
  for (const Span& g : gold) {
    ++gold_left[{g.ontology, g.label}];
    out.by_label[{g.ontology, g.label}];
  }
  for (const Span& p : pred) {
    MatchCounts& c = out.by_label[{p.ontology, p.label}];
    auto it = gold_left.find({p.ontology, p.label});
    if (it != gold_left.end() && it->second > 0) {
      --it->second;
      ++c.tp;
    } else {
      ++c.fp;
    }
  }
  for (const auto& [k, n] : gold_left) out.by_label[k].fn += n;
  return out;
}

// --- reporting ---------------------------------------------------------------

enum class Averaging { Micro, Macro };

struct ReportRow {
  std::string name;
  MatchCounts counts;
  double precision = 0, recall = 0, f1 = 0;
};

struct Report {
  std::vector<ReportRow> rows;  // "Overall" first, then one row per ontology
};

inline Report per_ontology_report(const SpanMatchResult& result,
                                  const OntologySchema& schema,
                                  Averaging avg = Averaging::Micro) {
  Report rep;
  std::vector<ReportRow> onts;
  for (std::size_t o = 0; o < schema.ontologies.size(); ++o) {
    ReportRow row;
    row.name = schema.ontologies[o].name;
    row.counts = result.ontology_totals(static_cast<int>(o));
    row.precision = row.counts.precision();
    row.recall = row.counts.recall();
    row.f1 = row.counts.f1();
    onts.push_back(row);
  }
  ReportRow overall;
  overall.name = "Overall";
  overall.counts = result.totals();
  if (avg == Averaging::Micro) {
    overall.precision = overall.counts.precision();
    overall.recall = overall.counts.recall();
    overall.f1 = overall.counts.f1();
  } else {
    double p = 0, r = 0, f = 0;
    for (const ReportRow& row : onts) {
      p += row.precision;
      r += row.recall;
      f += row.f1;
    }
    const double n = onts.empty() ? 1.0 : double(onts.size());
    overall.precision = p / n;
    overall.recall = r / n;
    overall.f1 = f / n;
  }
  rep.rows.push_back(overall);
  for (ReportRow& row : onts) rep.rows.push_back(std::move(row));
  return rep;
}

inline std::string report_to_csv(const Report& rep) {
  std::ostringstream os;
  os << "ontology,tp,fp,fn,precision,recall,f1\n";
  os.precision(6);
  os << std::fixed;
  for (const ReportRow& r : rep.rows)
    os << r.name << "," << r.counts.tp << "," << r.counts.fp << "," << r.counts.fn
       << "," << r.precision << "," << r.recall << "," << r.f1 << "\n";
  return os.str();
}

inline nlohmann::json report_to_json(const Report& rep) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ReportRow& r : rep.rows)
    rows.push_back({{"ontology", r.name},
                    {"tp", r.counts.tp},
                    {"fp", r.counts.fp},
                    {"fn", r.counts.fn},
                    {"precision", r.precision},
                    {"recall", r.recall},
                    {"f1", r.f1}});
  return {{"format", "nert-report"}, {"version", 1}, {"rows", rows}};
}

}  // namespace nert
