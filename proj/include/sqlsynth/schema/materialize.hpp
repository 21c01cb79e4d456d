#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sqlsynth/schema/schema_def.hpp"

namespace sqlsynth::schema {

struct MaterializeReport {
    std::vector<std::string> warnings;  // affinity mismatches and the like
};

// Creates a fresh SQLite file at `path`: tables in foreign-key dependency
// order, example rows inserted, then a full foreign-key integrity check.
// Any engine rejection or integrity violation throws MaterializeError and
// removes the partial file.
MaterializeReport materialize(const SchemaDef& schema, const std::filesystem::path& path);

// Reads table/column/primary-key/foreign-key structure back from a database
// file. Descriptions and example values are not stored in the file, so the
// result carries names and types only.
SchemaDef introspect(const std::filesystem::path& db_path);

// Tables ordered so that referenced tables come before referencing ones;
// cycles fall back to declaration order for the remainder.
std::vector<std::string> fk_dependency_order(const SchemaDef& schema);

}  // namespace sqlsynth::schema
