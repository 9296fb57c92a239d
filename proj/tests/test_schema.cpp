#include <doctest.h>

#include <sdoh/sdoh.hpp>

#include "test_helpers.hpp"

using namespace sdoh;

TEST_SUITE("schema") {
  TEST_CASE("default schema has the 19 subclasses under 6 classes") {
    const auto s = SDoHSchema::default_schema();
    CHECK(s.classes.size() == 6);
    CHECK(s.concept_categories().size() == 19);
    CHECK(s.attribute_categories().size() == 4);
    CHECK(s.is_declared("Tobacco use"));
    CHECK(s.is_declared("Abuse (physical or mental)"));
    CHECK(s.role_of("Tobacco use") == Role::Concept);
    CHECK(s.role_of("Amount") == Role::Attribute);
    CHECK(s.find("Tobacco use")->parent_class == "Health and Health care");
    CHECK(s.pair_compatible("Amount", "Tobacco use"));
    CHECK(!s.pair_compatible("Amount", "Education"));
    CHECK(s.rel_types() == std::vector<std::string>{"Attr-of"});
  }

  TEST_CASE("file form maps spaces to underscores and back") {
    CHECK(SDoHSchema::file_form("Tobacco use") == "Tobacco_use");
    CHECK(SDoHSchema::display_form("Tobacco_use") == "Tobacco use");
    CHECK(SDoHSchema::file_form("Abuse (physical or mental)") == "Abuse_(physical_or_mental)");
    CHECK(SDoHSchema::display_form("Abuse_(physical_or_mental)") ==
          "Abuse (physical or mental)");
  }

  TEST_CASE("json round trip preserves the schema") {
    const auto s = SDoHSchema::default_schema();
    const auto back = SDoHSchema::from_json(s.to_json());
    CHECK(back.version == s.version);
    CHECK(back.classes == s.classes);
    CHECK(back.compat == s.compat);
    REQUIRE(back.categories.size() == s.categories.size());
    // from_json lists concepts before attributes; compare as sets of fields
    std::set<std::string> a, b;
    for (const auto& c : s.categories)
      a.insert(c.name + "|" + (c.role == Role::Concept ? c.parent_class : "@attr"));
    for (const auto& c : back.categories)
      b.insert(c.name + "|" + (c.role == Role::Concept ? c.parent_class : "@attr"));
    CHECK(a == b);
  }

  TEST_CASE("schema validation rejects duplicates and dangling references") {
    auto s = testutil::mini_schema();
    s.categories.push_back({"Tobacco use", Role::Concept, "Health and Health care"});
    CHECK_THROWS_WITH_AS(s.check(), doctest::Contains("twice"), Error);

    auto s2 = testutil::mini_schema();
    s2.compat.push_back({"Amount", "No such concept", "Attr-of"});
    CHECK_THROWS_AS(s2.check(), Error);

    CHECK_THROWS_WITH_AS(SDoHSchema::from_json("{not json"), doctest::Contains("JSON"), Error);
    CHECK_THROWS_AS(SDoHSchema::from_json("{\"version\":\"x\"}"), Error);
  }
}
