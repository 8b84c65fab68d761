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

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace possense {

struct Annotation;

enum class SuperCategory { people, vehicle, accessory, animal };

std::string_view to_string(SuperCategory s);
SuperCategory super_category_from_string(std::string_view s);

/// Prefix used in annotation-tool labels ("person_pedestrian_6"); the
/// people super-category is written as "person".
std::string_view label_prefix(SuperCategory s);

struct ClassDef {
  int id = 0;
  std::string name;
  SuperCategory super_category = SuperCategory::people;
  bool operator==(const ClassDef&) const = default;
};

enum class TreatmentMode { merging, filtering, separating };

std::string_view to_string(TreatmentMode m);
TreatmentMode treatment_from_string(std::string_view s);

/// A total class remap. Index i holds the target id of class id i+1.
struct Treatment {
  TreatmentMode mode = TreatmentMode::merging;
  std::vector<int> remap;

  /// Throws DataError for ids outside the table.
  int operator()(int class_id) const;
};

/// Two-level class system plus the three part-class treatments.
class Taxonomy {
 public:
  /// Validates ids (unique, contiguous from 1) and every treatment table
  /// (total, in range, idempotent). Throws DataError on violation.
  Taxonomy(std::string version, std::vector<ClassDef> classes,
           std::map<TreatmentMode, Treatment> treatments);

  /// The shipped 15-class OPOS taxonomy.
  static const Taxonomy& opos();

  static Taxonomy from_json(std::string_view text);
  std::string to_json() const;

  const std::string& version() const { return version_; }
  std::span<const ClassDef> classes() const { return classes_; }
  std::size_t size() const { return classes_.size(); }
  bool contains(int class_id) const;

  const ClassDef& at(int class_id) const;
  const ClassDef* find(std::string_view name) const;
  int id_of(std::string_view name) const;
  SuperCategory super_category(int class_id) const { return at(class_id).super_category; }

  const Treatment& treatment(TreatmentMode mode) const;

 private:
  std::string version_;
  std::vector<ClassDef> classes_;
  std::map<TreatmentMode, Treatment> treatments_;
};

/// Remaps class ids; geometry and order untouched. Throws DataError naming
/// the first annotation whose class is not in the taxonomy.
std::vector<Annotation> apply_treatment(std::span<const Annotation> annotations,
                                        const Treatment& treatment, const Taxonomy& taxonomy);

/// Number of distinct classes in the image of the remap.
int effective_class_count(const Treatment& treatment);

/// Class ids that survive a treatment, in taxonomy order.
std::vector<int> effective_classes(const Treatment& treatment);

}  // namespace possense
