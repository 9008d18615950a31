#include "treesmu/equation_io.hpp"

#include <fstream>

#include "treesmu/errors.hpp"

namespace treesmu::expr {

nlohmann::json to_json(const Equation& eq) {
  return {{"lhs", print(*eq.lhs)},
          {"rhs", print(*eq.rhs)},
          {"label", eq.label == Label::Correct ? 1 : 0},
          {"depth", eq.depth()}};
}

std::string to_line(const Equation& eq) {
  nlohmann::ordered_json j;
  j["lhs"] = print(*eq.lhs);
  j["rhs"] = print(*eq.rhs);
  j["label"] = eq.label == Label::Correct ? 1 : 0;
  j["depth"] = eq.depth();
  return j.dump();
}

Equation equation_from_json(const nlohmann::json& j) {
  Equation eq;
  eq.lhs = parse(j.at("lhs").get<std::string>());
  eq.rhs = parse(j.at("rhs").get<std::string>());
  const int label = j.at("label").get<int>();
  if (label != 0 && label != 1) throw DataError("label must be 0 or 1");
  eq.label = label == 1 ? Label::Correct : Label::Incorrect;
  if (j.contains("depth") && j.at("depth").get<int>() != eq.depth()) {
    throw DataError("recorded depth " + std::to_string(j.at("depth").get<int>()) +
                    " does not match tree depth " + std::to_string(eq.depth()));
  }
  return eq;
}

std::vector<Equation> read_equations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open equation file " + path.string());
  std::vector<Equation> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(equation_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_equations(const std::filesystem::path& path, const std::vector<Equation>& equations) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write equation file " + path.string());
  for (const auto& eq : equations) out << to_line(eq) << '\n';
}

ExprPtr fill_blank(const ExprPtr& e, const ExprPtr& value) {
  if (e->kind() == ExprKind::Blank) return value;
  if (e->is_leaf()) return e;
  std::vector<ExprPtr> children;
  for (const auto& c : e->children()) children.push_back(fill_blank(c, value));
  return Expr::function(e->function(), std::move(children));
}

std::size_t count_blanks(const Expr& e) {
  if (e.kind() == ExprKind::Blank) return 1;
  std::size_t n = 0;
  for (const auto& c : e.children()) n += count_blanks(*c);
  return n;
}

Equation CompletionItem::filled(const ExprPtr& candidate) const {
  return {fill_blank(lhs, candidate), fill_blank(rhs, candidate), Label::Correct};
}

std::string to_line(const CompletionItem& item) {
  nlohmann::ordered_json j;
  j["lhs"] = print(*item.lhs);
  j["rhs"] = print(*item.rhs);
  j["gold"] = print(*item.gold);
  j["depth"] = item.depth();
  return j.dump();
}

std::vector<CompletionItem> read_completion_items(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open completion file " + path.string());
  std::vector<CompletionItem> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CompletionItem item{parse(j.at("lhs").get<std::string>()),
                          parse(j.at("rhs").get<std::string>()),
                          parse(j.at("gold").get<std::string>())};
      if (count_blanks(*item.lhs) + count_blanks(*item.rhs) != 1) {
        throw DataError("completion item must contain exactly one blank");
      }
      if (count_blanks(*item.gold) != 0) throw DataError("gold subtree contains a blank");
      out.push_back(std::move(item));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

void write_completion_items(const std::filesystem::path& path,
                            const std::vector<CompletionItem>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write completion file " + path.string());
  for (const auto& item : items) out << to_line(item) << '\n';
}

}  // namespace treesmu::expr
