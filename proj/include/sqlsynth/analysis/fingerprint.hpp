#pragma once

#include <string>
#include <string_view>

namespace sqlsynth::analysis {

// Masks every literal value (numbers, strings, blobs, booleans, bound
// parameters) with [MASK], keeping identifiers, keywords, and structure.
// Output whitespace is canonical; a trailing semicolon is dropped.
//
//   SELECT name FROM school WHERE age > 18
//     -> SELECT name FROM school WHERE age > [MASK]
std::string template_of(std::string_view sql);

// Masks literals plus every table name, column name, and alias, keeping only
// keywords, operators, and structure. Qualified names (t.col) collapse to a
// single [MASK]; function names are kept since they are structure.
//
//   SELECT name FROM school WHERE age > 18
//     -> SELECT [MASK] FROM [MASK] WHERE [MASK] > [MASK]
std::string skeleton_of(std::string_view sql);

}  // namespace sqlsynth::analysis
