#pragma once

// Output-label schema: per-ontology begin labels plus one end marker.
// Ids are assigned contiguously over the joint output vocabulary; blank is
// reserved separately as id == vocab_size().

#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nert/errors.hpp"

namespace nert {

struct Ontology {
  std::string name;
  std::vector<std::string> labels;  // begin-label names
  std::string end_name;
  std::vector<int> begin_ids;
  int end_marker_id = -1;
  double weight = 1.0;
};

class OntologySchema {
 public:
  std::vector<Ontology> ontologies;

  void finalize() {
    int next = 0;
    index_.clear();
    for (std::size_t o = 0; o < ontologies.size(); ++o) {
      Ontology& ont = ontologies[o];
      if (ont.end_name.empty()) ont.end_name = ont.name + "_end";
      ont.begin_ids.clear();
      for (std::size_t i = 0; i < ont.labels.size(); ++i) {
        ont.begin_ids.push_back(next++);
        index_.push_back({static_cast<int>(o), false, static_cast<int>(i)});
      }
      ont.end_marker_id = next++;
      index_.push_back({static_cast<int>(o), true, -1});
    }
  }

  int vocab_size() const { return static_cast<int>(index_.size()); }
  int blank_id() const { return vocab_size(); }

  int ontology_of(int id) const { return at(id).ontology; }
  bool is_end_marker(int id) const { return at(id).is_end; }
  bool is_begin(int id) const { return !at(id).is_end; }

  const std::string& label_name(int id) const {
    const IdInfo& info = at(id);
    const Ontology& ont = ontologies[info.ontology];
    return info.is_end ? ont.end_name : ont.labels[info.label_index];
  }
  const std::string& ontology_name(int id) const {
    return ontologies[at(id).ontology].name;
  }

  // The five-ontology schema with Table-1-proportioned frequency weights.
  static OntologySchema standard(int labels_per_ontology = 6) {
    static const char* names[] = {"medications", "symptoms", "conditions",
                                  "diagnoses", "treatments"};
    static const double weights[] = {100, 64, 42, 38, 6};
    OntologySchema s;
    for (int o = 0; o < 5; ++o) {
      Ontology ont;
      ont.name = names[o];
      ont.weight = weights[o];
      for (int i = 0; i < labels_per_ontology; ++i)
        ont.labels.push_back(ont.name + "_" + std::to_string(i));
      s.ontologies.push_back(ont);
    }
    s.finalize();
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json onts = nlohmann::json::array();
    for (const Ontology& o : ontologies)
      onts.push_back({{"name", o.name}, {"labels", o.labels}, {"weight", o.weight}});
    return {{"format", "nert-schema"}, {"version", 1}, {"ontologies", onts}};
  }

  static OntologySchema from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "nert-schema")
      throw ParseError("not a schema file");
    if (j.value("version", 0) != 1) throw ParseError("unsupported schema version");
    OntologySchema s;
    for (const auto& jo : j.at("ontologies")) {
      Ontology o;
      o.name = jo.at("name").get<std::string>();
      o.labels = jo.at("labels").get<std::vector<std::string>>();
      o.weight = jo.value("weight", 1.0);
      s.ontologies.push_back(o);
    }
    s.finalize();
    return s;
  }

  void save(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw ParseError("cannot open for write: " + path);
    os << to_json().dump(2) << "\n";
  }
  static OntologySchema load(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open: " + path);
    nlohmann::json j;
    is >> j;
    return from_json(j);
  }

 private:
  struct IdInfo {
    int ontology;
    bool is_end;
    int label_index;
  };
  const IdInfo& at(int id) const {
    if (id < 0 || id >= vocab_size())
      throw ContractViolation("schema: label id out of range");
    return index_[static_cast<std::size_t>(id)];
  }

  std::vector<IdInfo> index_;
};

}  // namespace nert
