#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesmu/expr.hpp"

namespace treesmu::expr {

// Equation files are JSON Lines, one object per equation:
//   {"lhs": "<prefix>", "rhs": "<prefix>", "label": 0|1, "depth": <int>}
// label 1 is Correct. Prefix grammar (docs/equation_format.md):
//   expr  := atom | "(" head expr+ ")"
//   head  := function token from the table, or "-" / "/" sugar
//   atom  := symbol | integer | p/q | decimal | "pi" | "_"
nlohmann::json to_json(const Equation& eq);
Equation equation_from_json(const nlohmann::json& j);

std::vector<Equation> read_equations(const std::filesystem::path& path);
void write_equations(const std::filesystem::path& path, const std::vector<Equation>& equations);

// One JSON line, no trailing newline.
std::string to_line(const Equation& eq);

// An equation with exactly one blank leaf and the subtree that was cut out.
// Lines look like {"lhs": ..., "rhs": ..., "gold": "<prefix>", "depth": <int>}
// where depth is that of the completed equation.
struct CompletionItem {
  ExprPtr lhs;
  ExprPtr rhs;
  ExprPtr gold;

  Equation filled(const ExprPtr& candidate) const;
  int depth() const { return filled(gold).depth(); }
};

// Replaces every blank leaf of `e` with `value`.
ExprPtr fill_blank(const ExprPtr& e, const ExprPtr& value);
std::size_t count_blanks(const Expr& e);

std::string to_line(const CompletionItem& item);
std::vector<CompletionItem> read_completion_items(const std::filesystem::path& path);
void write_completion_items(const std::filesystem::path& path,
                            const std::vector<CompletionItem>& items);

}  // namespace treesmu::expr
