/**
 * Copyright 2026 The possense Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "possense/taxonomy.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "possense/annotation.hpp"
#include "possense/error.hpp"

namespace possense {
namespace {

// Ids are alphabetical within a super-category, people first.
constexpr const char* kOposTaxonomy = R"json({
  "version": "opos-1",
  "classes": [
    {"id": 1,  "name": "cycpart",      "super_category": "people"},
    {"id": 2,  "name": "cyclist",      "super_category": "people"},
    {"id": 3,  "name": "pedestrian",   "super_category": "people"},
    {"id": 4,  "name": "pedpart",      "super_category": "people"},
    {"id": 5,  "name": "peoplelying",  "super_category": "people"},
    {"id": 6,  "name": "peopleother",  "super_category": "people"},
    {"id": 7,  "name": "roller",       "super_category": "people"},
    {"id": 8,  "name": "scooterer",    "super_category": "people"},
    {"id": 9,  "name": "sitter",       "super_category": "people"},
    {"id": 10, "name": "skater",       "super_category": "people"},
    {"id": 11, "name": "car",          "super_category": "vehicle"},
    {"id": 12, "name": "vehicleother", "super_category": "vehicle"},
    {"id": 13, "name": "stroller",     "super_category": "accessory"},
    {"id": 14, "name": "umbrella",     "super_category": "accessory"},
    {"id": 15, "name": "dog",          "super_category": "animal"}
  ],
  "treatments": {
    "merging": {
      "pedpart": "pedestrian",
      "cycpart": "cyclist",
      "roller": "pedestrian",
      "peoplelying": "peopleother"
    },
    "filtering": {
      "pedpart": "peopleother",
      "cycpart": "peopleother",
      "roller": "pedestrian",
      "peoplelying": "peopleother"
    },
    "separating": {
      "roller": "pedestrian"
    }
  }
})json";

}  // namespace

std::string_view to_string(SuperCategory s) {
  switch (s) {
    case SuperCategory::people: return "people";
    case SuperCategory::vehicle: return "vehicle";
    case SuperCategory::accessory: return "accessory";
    case SuperCategory::animal: return "animal";
  }
  return "people";
}

SuperCategory super_category_from_string(std::string_view s) {
  if (s == "people" || s == "person") return SuperCategory::people;
  if (s == "vehicle") return SuperCategory::vehicle;
  if (s == "accessory") return SuperCategory::accessory;
  if (s == "animal") return SuperCategory::animal;
  throw DataError("unknown super-category '" + std::string(s) + "'");
}

std::string_view label_prefix(SuperCategory s) {
  return s == SuperCategory::people ? "person" : to_string(s);
}

std::string_view to_string(TreatmentMode m) {
  switch (m) {
    case TreatmentMode::merging: return "merging";
    case TreatmentMode::filtering: return "filtering";
    case TreatmentMode::separating: return "separating";
  }
  return "merging";
}

TreatmentMode treatment_from_string(std::string_view s) {
  if (s == "merging") return TreatmentMode::merging;
  if (s == "filtering") return TreatmentMode::filtering;
  if (s == "separating") return TreatmentMode::separating;
  throw ConfigError("unknown treatment '" + std::string(s) +
                    "' (expected merging, filtering or separating)");
}

int Treatment::operator()(int class_id) const {
  if (class_id < 1 || class_id > static_cast<int>(remap.size())) {
    throw DataError("class id " + std::to_string(class_id) + " is not in the taxonomy");
  }
  return remap[static_cast<std::size_t>(class_id - 1)];
}

Taxonomy::Taxonomy(std::string version, std::vector<ClassDef> classes,
                   std::map<TreatmentMode, Treatment> treatments)
    : version_(std::move(version)), classes_(std::move(classes)), treatments_(std::move(treatments)) {
  std::sort(classes_.begin(), classes_.end(),
            [](const ClassDef& a, const ClassDef& b) { return a.id < b.id; });
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i].id != static_cast<int>(i) + 1) {
      throw DataError("taxonomy class ids must be unique and contiguous from 1 (found id " +
                      std::to_string(classes_[i].id) + " at position " + std::to_string(i + 1) + ")");
    }
    if (!names.insert(classes_[i].name).second) {
      throw DataError("taxonomy class name '" + classes_[i].name + "' is duplicated");
    }
  }
  for (auto mode : {TreatmentMode::merging, TreatmentMode::filtering, TreatmentMode::separating}) {
    auto it = treatments_.find(mode);
    if (it == treatments_.end()) {
      Treatment identity{mode, {}};
      for (const auto& c : classes_) identity.remap.push_back(c.id);
      treatments_.emplace(mode, std::move(identity));
      continue;
    }
    Treatment& t = it->second;
    t.mode = mode;
    if (t.remap.size() != classes_.size()) {
      throw DataError("treatment '" + std::string(to_string(mode)) + "' is not total over the taxonomy");
    }
    for (int target : t.remap) {
      if (!contains(target)) {
        throw DataError("treatment '" + std::string(to_string(mode)) + "' maps to unknown class id " +
                        std::to_string(target));
      }
      if (t(target) != target) {
        throw DataError("treatment '" + std::string(to_string(mode)) +
                        "' is not idempotent: " + at(target).name + " is remapped again");
      }
    }
  }
}

const Taxonomy& Taxonomy::opos() {
  static const Taxonomy taxonomy = from_json(kOposTaxonomy);
  return taxonomy;
}

Taxonomy Taxonomy::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("taxonomy: malformed JSON: ") + e.what());
  }
  try {
    std::vector<ClassDef> classes;
    for (const auto& c : doc.at("classes")) {
      classes.push_back({c.at("id").get<int>(), c.at("name").get<std::string>(),
                         super_category_from_string(c.at("super_category").get<std::string>())});
    }
    auto id_by_name = [&](const std::string& name) {
      for (const auto& c : classes) {
        if (c.name == name) return c.id;
      }
      throw DataError("taxonomy: treatment refers to unknown class '" + name + "'");
    };
    std::map<TreatmentMode, Treatment> treatments;
    if (doc.contains("treatments")) {
      for (const auto& [mode_name, table] : doc.at("treatments").items()) {
        const TreatmentMode mode = treatment_from_string(mode_name);
        Treatment t{mode, std::vector<int>(classes.size())};
        for (std::size_t i = 0; i < classes.size(); ++i) t.remap[i] = static_cast<int>(i) + 1;
        for (const auto& [from, to] : table.items()) {
          const int src = id_by_name(from);
          if (src < 1 || src > static_cast<int>(classes.size())) {
            throw DataError("taxonomy: class ids must be contiguous from 1");
          }
          t.remap[static_cast<std::size_t>(src - 1)] = id_by_name(to.get<std::string>());
        }
        treatments.emplace(mode, std::move(t));
      }
    }
    return Taxonomy(doc.value("version", std::string("unversioned")), std::move(classes),
                    std::move(treatments));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("taxonomy: schema violation: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("taxonomy: ") + e.what());
  }
}

std::string Taxonomy::to_json() const {
  nlohmann::ordered_json doc;
  doc["version"] = version_;
  doc["classes"] = nlohmann::ordered_json::array();
  for (const auto& c : classes_) {
    doc["classes"].push_back(
        {{"id", c.id}, {"name", c.name}, {"super_category", std::string(to_string(c.super_category))}});
  }
  auto& out = doc["treatments"];
  for (const auto& [mode, t] : treatments_) {
    nlohmann::ordered_json table = nlohmann::ordered_json::object();
    for (const auto& c : classes_) {
      const int target = t(c.id);
      if (target != c.id) table[c.name] = at(target).name;
    }
    out[std::string(to_string(mode))] = table;
  }
  return doc.dump(2) + "\n";
}

bool Taxonomy::contains(int class_id) const {
  return class_id >= 1 && class_id <= static_cast<int>(classes_.size());
}

const ClassDef& Taxonomy::at(int class_id) const {
  if (!contains(class_id)) {
    throw DataError("class id " + std::to_string(class_id) + " is not in taxonomy " + version_);
  }
  return classes_[static_cast<std::size_t>(class_id - 1)];
}

const ClassDef* Taxonomy::find(std::string_view name) const {
  for (const auto& c : classes_) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

int Taxonomy::id_of(std::string_view name) const {
  if (const ClassDef* c = find(name)) return c->id;
  throw DataError("class '" + std::string(name) + "' is not in taxonomy " + version_);
}

const Treatment& Taxonomy::treatment(TreatmentMode mode) const { return treatments_.at(mode); }

std::vector<Annotation> apply_treatment(std::span<const Annotation> annotations,
                                        const Treatment& treatment, const Taxonomy& taxonomy) {
  std::vector<Annotation> out(annotations.begin(), annotations.end());
  for (auto& a : out) {
    if (!taxonomy.contains(a.category_id)) {
      throw DataError("annotation " + std::to_string(a.id) + " has class id " +
                      std::to_string(a.category_id) + " not in taxonomy " + taxonomy.version());
    }
    a.category_id = treatment(a.category_id);
  }
  return out;
}

int effective_class_count(const Treatment& treatment) {
  return static_cast<int>(effective_classes(treatment).size());
}

std::vector<int> effective_classes(const Treatment& treatment) {
  std::set<int> image(treatment.remap.begin(), treatment.remap.end());
  return {image.begin(), image.end()};
}

}  // namespace possense
