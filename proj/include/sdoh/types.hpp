#pragma once

#include <string>
#include <vector>

#include "sdoh/error.hpp"

namespace sdoh {

struct Domain {
  enum class Kind { Cancer, Opioid, Other };
  Kind kind = Kind::Other;
  std::string name = "unknown";  // always set; "cancer"/"opioid" for the named kinds

  bool operator==(const Domain&) const = default;

  static Domain parse(const std::string& s) {
    if (s == "cancer") return {Kind::Cancer, "cancer"};
    if (s == "opioid") return {Kind::Opioid, "opioid"};
    return {Kind::Other, s};
  }

  const std::string& str() const { return name; }
};

// A clinical-style note. All annotation offsets refer to Unicode scalar
// positions in `text`.
struct Document {
  std::string doc_id;
  std::string patient_id;
  Domain domain;
  std::string text;  // UTF-8
};

// Typed character span; `surface` always equals text[start, end).
struct EntityAnnotation {
  std::string id;        // "T1", "T2", ...
  std::string category;  // display name, declared in the active schema
  std::size_t start = 0;
  std::size_t end = 0;
  std::string surface;

  bool operator==(const EntityAnnotation&) const = default;
};

// Directed attribute -> concept link. `head` names an attribute entity,
// `tail` a concept entity in the same document.
struct RelationAnnotation {
  std::string id;  // "R1", "R2", ...
  std::string rel_type;
  std::string head;
  std::string tail;

  bool operator==(const RelationAnnotation&) const = default;
};

struct AnnotatedDoc {
  Document doc;
  std::vector<EntityAnnotation> entities;
  std::vector<RelationAnnotation> relations;
};

}  // namespace sdoh
