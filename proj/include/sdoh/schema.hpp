#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sdoh/error.hpp"

namespace sdoh {

enum class Role { Concept, Attribute };

struct CategoryInfo {
  std::string name;          // display name, spaces allowed
  Role role;
  std::string parent_class;  // empty for attributes
};

// (attribute category, concept category, relation type)
struct CompatRule {
  std::string attribute_category;
  std::string concept_category;
  std::string rel_type;

  bool operator==(const CompatRule&) const = default;
};

// Class/subclass/attribute taxonomy plus the attribute<->concept
// compatibility matrix. Loaded from a versioned JSON file so categories can
// be added without code changes; the shipped default covers the 19 concept
// subclasses under 6 classes plus a small provisional attribute set.
class SDoHSchema {
 public:
  std::string version;
  std::vector<std::string> classes;
  std::vector<CategoryInfo> categories;  // concepts first is not required; declaration order kept
  std::vector<CompatRule> compat;

  const CategoryInfo* find(const std::string& name) const {
    for (const auto& c : categories)
      if (c.name == name) return &c;
    return nullptr;
  }

  bool is_declared(const std::string& name) const { return find(name) != nullptr; }

  Role role_of(const std::string& name) const {
    const CategoryInfo* c = find(name);
    if (!c) raise("UnknownCategory", "category '" + name + "' not in schema " + version);
    return c->role;
  }

  std::vector<std::string> concept_categories() const {
    std::vector<std::string> out;
    for (const auto& c : categories)
      if (c.role == Role::Concept) out.push_back(c.name);
    return out;
  }

  std::vector<std::string> attribute_categories() const {
    std::vector<std::string> out;
    for (const auto& c : categories)
      if (c.role == Role::Attribute) out.push_back(c.name);
    return out;
  }

  // Relation types permitted between an attribute and a concept category,
  // in declaration order.
  std::vector<std::string> allowed_rel_types(const std::string& attribute_category,
                                             const std::string& concept_category) const {
    std::vector<std::string> out;
    for (const auto& r : compat)
      if (r.attribute_category == attribute_category && r.concept_category == concept_category)
        out.push_back(r.rel_type);
    return out;
  }

  bool compat_allows(const std::string& attribute_category, const std::string& concept_category,
                     const std::string& rel_type) const {
    for (const auto& r : compat)
      if (r.attribute_category == attribute_category && r.concept_category == concept_category &&
          r.rel_type == rel_type)
        return true;
    return false;
  }

  bool pair_compatible(const std::string& attribute_category,
                       const std::string& concept_category) const {
    return !allowed_rel_types(attribute_category, concept_category).empty();
  }

  std::vector<std::string> rel_types() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& r : compat)
      if (seen.insert(r.rel_type).second) out.push_back(r.rel_type);
    return out;
  }

  // brat type names cannot contain spaces; files use underscores.
  static std::string file_form(const std::string& display) {
    std::string out = display;
    for (char& c : out)
      if (c == ' ') c = '_';
    return out;
  }

  static std::string display_form(const std::string& file) {
    std::string out = file;
    for (char& c : out)
      if (c == '_') c = ' ';
    return out;
  }

  void check() const {
    std::set<std::string> names;
    for (const auto& c : categories) {
      if (c.name.empty()) raise("SchemaInvalid", "empty category name");
      if (!names.insert(c.name).second)
        raise("SchemaInvalid", "category '" + c.name + "' declared twice");
      if (c.role == Role::Concept) {
        bool known = false;
        for (const auto& cl : classes) known = known || cl == c.parent_class;
        if (!known)
          raise("SchemaInvalid",
                "subclass '" + c.name + "' references unknown class '" + c.parent_class + "'");
      }
    }
    for (const auto& r : compat) {
      const CategoryInfo* a = find(r.attribute_category);
      const CategoryInfo* c = find(r.concept_category);
      if (!a || a->role != Role::Attribute)
        raise("SchemaInvalid", "compat rule references non-attribute '" + r.attribute_category + "'");
      if (!c || c->role != Role::Concept)
        raise("SchemaInvalid", "compat rule references non-concept '" + r.concept_category + "'");
      if (r.rel_type.empty()) raise("SchemaInvalid", "compat rule with empty rel_type");
    }
  }

  std::string to_json() const {
    nlohmann::ordered_json j;
    j["version"] = version;
    j["classes"] = classes;
    j["subclasses"] = nlohmann::ordered_json::array();
    for (const auto& c : categories)
      if (c.role == Role::Concept)
        j["subclasses"].push_back({{"name", c.name}, {"class", c.parent_class}});
    j["attributes"] = nlohmann::ordered_json::array();
    for (const auto& c : categories)
      if (c.role == Role::Attribute) j["attributes"].push_back({{"name", c.name}});
    j["relations"] = nlohmann::ordered_json::array();
    for (const auto& r : compat)
      j["relations"].push_back({{"type", r.rel_type},
                                {"attribute", r.attribute_category},
                                {"concept", r.concept_category}});
    return j.dump(2) + "\n";
  }

  static SDoHSchema from_json(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      raise("SchemaInvalid", std::string("schema file is not valid JSON: ") + e.what());
    }
    SDoHSchema s;
    try {
      s.version = j.at("version").get<std::string>();
      s.classes = j.at("classes").get<std::vector<std::string>>();
      for (const auto& sub : j.at("subclasses"))
        s.categories.push_back({sub.at("name").get<std::string>(), Role::Concept,
                                sub.at("class").get<std::string>()});
      for (const auto& attr : j.at("attributes"))
        s.categories.push_back({attr.at("name").get<std::string>(), Role::Attribute, ""});
      for (const auto& rel : j.at("relations"))
        s.compat.push_back({rel.at("attribute").get<std::string>(),
                            rel.at("concept").get<std::string>(),
                            rel.at("type").get<std::string>()});
    } catch (const nlohmann::json::exception& e) {
      raise("SchemaInvalid", std::string("schema file is missing fields: ") + e.what());
    }
    s.check();
    return s;
  }

  static SDoHSchema default_schema();
};

inline SDoHSchema SDoHSchema::default_schema() {
  SDoHSchema s;
  s.version = "default-1.0";
  s.classes = {
      "Economic Stability",
      "Education",
      "Health and Health care",
      "Social and community context",
      "Neighborhood and physical environment",
      "Gender, Race, and Ethnicity",
  };
  const std::pair<const char*, const char*> subclasses[] = {
      {"Financial constraint", "Economic Stability"},
      {"Employment", "Economic Stability"},
      {"Language", "Education"},
      {"Education", "Education"},
      {"Physical activity", "Health and Health care"},
      {"SDoH ICD", "Health and Health care"},
      {"Sexual activity", "Health and Health care"},
      {"Drug use", "Health and Health care"},
      {"Tobacco use", "Health and Health care"},
      {"Alcohol use", "Health and Health care"},
      {"Marital status", "Social and community context"},
      {"Social cohesion", "Social and community context"},
      {"Abuse (physical or mental)", "Neighborhood and physical environment"},
      {"Transportation", "Neighborhood and physical environment"},
      {"Living supply", "Neighborhood and physical environment"},
      {"Living condition", "Neighborhood and physical environment"},
      {"Gender", "Gender, Race, and Ethnicity"},
      {"Race", "Gender, Race, and Ethnicity"},
      {"Ethnicity", "Gender, Race, and Ethnicity"},
  };
  for (const auto& [name, cls] : subclasses)
    s.categories.push_back({name, Role::Concept, cls});

  for (const char* attr : {"Type", "Amount", "Frequency", "Duration"})
    s.categories.push_back({attr, Role::Attribute, ""});

  // Provisional compatibility matrix; extend via the schema file as needed.
  const std::pair<const char*, std::vector<const char*>> compat[] = {
      {"Type", {"Tobacco use", "Alcohol use", "Drug use", "Physical activity"}},
      {"Amount", {"Tobacco use", "Alcohol use", "Drug use"}},
      {"Frequency",
       {"Tobacco use", "Alcohol use", "Drug use", "Physical activity", "Sexual activity",
        "Social cohesion"}},
      {"Duration", {"Tobacco use", "Alcohol use", "Drug use", "Employment", "Physical activity"}},
  };
  for (const auto& [attr, targets] : compat)
    for (const char* t : targets) s.compat.push_back({attr, t, "Attr-of"});

  s.check();
  return s;
}

}  // namespace sdoh
