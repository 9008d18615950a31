#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "treesmu/equation_io.hpp"
#include "treesmu/errors.hpp"
#include "treesmu/generator.hpp"
#include "treesmu/oracle.hpp"
#include "treesmu/rules.hpp"
#include "treesmu/splits.hpp"

using namespace treesmu;
using namespace treesmu::datagen;
using expr::Equation;
using expr::Label;
using expr::parse;

namespace {

Verdict verdict_of(std::string_view lhs, std::string_view rhs, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  return check_equation(*parse(lhs), *parse(rhs), rng).verdict;
}

GenConfig small_config(std::uint64_t seed) {
  GenConfig c;
  c.seed = seed;
  c.counts_per_depth = {{1, 10}, {2, 60}, {3, 60}, {4, 60}, {5, 40}, {6, 40}, {7, 40}};
  return c;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("oracle verdicts on known identities and non-identities") {
  CHECK(verdict_of("(sin (* 1/2 pi))", "1") == Verdict::Correct);
  CHECK(verdict_of("(sin (* 1/2 pi))", "0.5") == Verdict::Incorrect);
  CHECK(verdict_of("(+ (* 1 y) 0)", "(* 1 y)") == Verdict::Correct);
  CHECK(verdict_of("(+ (^ (sin θ) 2) (^ (cos θ) 2))", "1") == Verdict::Correct);
  CHECK(verdict_of("(* y (+ (* (^ 1 1) (+ 3 (* -1 (^ 4 (* 0 1))))) (^ x 1)))",
                   "(* y (* (^ 2 0) (+ 2 x)))") == Verdict::Correct);
  CHECK(verdict_of("(sec (+ x pi))", "(* -1 (sec (sec x)))") == Verdict::Incorrect);
  CHECK(verdict_of("(arcsin (+ 3 (^ x 2)))", "x") == Verdict::Undetermined);

  std::mt19937_64 rng(9);
  const auto forced = check_equation(*parse("(+ x 1)"), *parse("x"), rng);
  CHECK(forced.verdict == Verdict::Incorrect);
  CHECK(forced.disagree == 16);
}

TEST_CASE("oracle draws avoid the pole band around zero") {
  std::mt19937_64 rng(3);
  OracleConfig cfg;
  for (int i = 0; i < 10000; ++i) {
    const double v = draw_value(rng, cfg);
    CHECK(std::abs(v) >= 0.1);
    CHECK(std::abs(v) <= 2.0);
  }
}

TEST_CASE("constant classes for substitutivity") {
  CHECK(constant_class(*parse("(* 1 (* x 0))")) == "0");
  CHECK(constant_class(*parse("(^ x 0)")) == "1");
  CHECK(constant_class(*parse("(+ x 1)")) == "other");
  CHECK(constant_class(*parse("2")) == "other");
}

TEST_CASE("default rules are oriented and numerically valid") {
  const auto& rules = default_rules();
  CHECK(rules.size() > 60);
  std::set<std::string> names;
  std::mt19937_64 rng(99);
  for (const auto& r : rules) {
    CHECK(names.insert(r.name).second);
    const auto lhs_vars = pattern_variables(*r.lhs);
    for (const auto& v : pattern_variables(*r.rhs)) {
      CHECK_MESSAGE(std::find(lhs_vars.begin(), lhs_vars.end(), v) != lhs_vars.end(), r.name);
    }
    CHECK_MESSAGE(validate_rule(r, rng), r.name);
  }
}

TEST_CASE("an invalid identity fails validation") {
  std::mt19937_64 rng(1);
  CHECK_FALSE(validate_rule(make_rule("bogus", "(sin ?a)", "(cos ?a)"), rng));
  CHECK_FALSE(validate_rule(make_rule("abs", "(sqrt (^ ?a 2))", "?a"), rng));
}

TEST_CASE("pattern matching binds consistently") {
  Bindings b;
  CHECK(match(*parse("(+ ?a ?a)"), parse("(+ (sin x) (sin x))"), b));
  CHECK(expr::print(*b.at("?a")) == "(sin x)");
  Bindings b2;
  CHECK_FALSE(match(*parse("(+ ?a ?a)"), parse("(+ (sin x) (sin y))"), b2));
  Bindings b3;
  CHECK_FALSE(match(*parse("(+ ?a 0)"), parse("(+ x 1)"), b3));
  Bindings b4;
  REQUIRE(match(*parse("(+ ?a 0)"), parse("(+ (* 1 y) 0)"), b4));
  CHECK(expr::print(*instantiate(parse("(* ?a 1)"), b4)) == "(* (* 1 y) 1)");
  CHECK_THROWS_AS(instantiate(parse("?z"), b4), ContractError);
}

TEST_CASE("generated correct equations hit the requested depth and pass the oracle") {
  const Generator gen(small_config(1));
  for (int depth = 1; depth <= 9; ++depth) {
    for (int i = 0; i < 15; ++i) {
      auto rng = slot_rng(42, depth, i);
      auto eq = gen.correct(depth, rng);
      REQUIRE(eq);
      CHECK(eq->depth() == depth);
      CHECK(eq->label == Label::Correct);
      std::mt19937_64 check_rng(string_seed(eq->key()));
      CHECK_MESSAGE(check_equation(*eq->lhs, *eq->rhs, check_rng).verdict == Verdict::Correct,
                    eq->key());
    }
  }
}

TEST_CASE("corruptions keep depth and fail the oracle on at least 80% of fresh samples") {
  const Generator gen(small_config(1));
  int produced = 0;
  for (int i = 0; i < 120; ++i) {
    auto rng = slot_rng(8, 4, i);
    auto eq = gen.correct(2 + i % 5, rng);
    REQUIRE(eq);
    auto bad = gen.incorrect(*eq, rng);
    if (!bad) continue;
    ++produced;
    CHECK(bad->label == Label::Incorrect);
    CHECK(bad->depth() == eq->depth());
    std::mt19937_64 check_rng(string_seed(bad->key()));
    const auto r = check_equation(*bad->lhs, *bad->rhs, check_rng);
    CHECK_MESSAGE(r.disagree >= 0.8 * (r.agree + r.disagree), bad->key());
  }
  CHECK(produced >= 100);
}

TEST_CASE("literal corruption of x + 0 = x") {
  GenConfig c = small_config(1);
  c.corruption = {0.0, 1.0, 0.0};
  const Generator gen(c);
  const Equation eq{parse("(+ x 0)"), parse("x"), Label::Correct};
  std::mt19937_64 rng(4);
  auto bad = gen.incorrect(eq, rng);
  REQUIRE(bad);
  CHECK(bad->rhs->text() == "x");
  CHECK(bad->lhs->children()[1]->text() != "0");
}

TEST_CASE("corpus generation is deterministic and independent of worker count") {
  const auto cfg = small_config(17);
  const auto a = Generator(cfg).generate(1);
  const auto b = Generator(cfg).generate(3);
  REQUIRE(a.equations.size() == b.equations.size());
  for (std::size_t i = 0; i < a.equations.size(); ++i) {
    CHECK(expr::to_line(a.equations[i]) == expr::to_line(b.equations[i]));
  }
  std::set<std::string> keys;
  for (const auto& e : a.equations) CHECK(keys.insert(e.key()).second);

  const auto counts = count_labels(a.equations);
  const double balance = static_cast<double>(counts.correct) / static_cast<double>(counts.total());
  CHECK(balance > 0.4);
  CHECK(balance < 0.6);
}

TEST_CASE("config validation") {
  GenConfig c;
  c.max_depth = 20;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(GenConfig::from_json({{"sede", 1}}), ConfigError);
  const auto round = GenConfig::from_json(small_config(5).to_json());
  CHECK(round.to_json() == small_config(5).to_json());
}

TEST_CASE("productivity splits respect depth filters, disjointness and balance") {
  const auto trainval = Generator(small_config(21)).generate(1).equations;
  const auto test = Generator(small_config(22)).generate(1).equations;
  const Protocol protocol = desk_protocols()[0];
  const auto splits = make_splits(trainval, test, protocol);
  REQUIRE(splits.size() == 3);
  std::set<std::string> train_keys;
  for (const auto& [spec, eqs] : splits) {
    for (const auto& e : eqs) {
      CHECK(e.depth() >= spec.depth_lo);
      CHECK(e.depth() <= spec.depth_hi);
      if (spec.name != "test") CHECK(train_keys.insert(e.key()).second);
    }
  }
  for (const auto& e : splits[2].second) CHECK_FALSE(train_keys.contains(e.key()));

  const auto dir = temp_dir("treesmu_split_test");
  const auto manifest = write_splits(trainval, test, protocol, dir);
  const auto train_file = expr::read_equations(dir / "productivity_train.jsonl");
  const auto test_file = expr::read_equations(dir / "productivity_test.jsonl");
  for (const auto& e : train_file) CHECK(e.depth() <= 4);
  for (const auto& e : test_file) CHECK(e.depth() >= 5);

  // Counting oracle for the majority baseline, straight from the files.
  std::size_t train_correct = 0;
  for (const auto& e : train_file) train_correct += e.label == Label::Correct;
  const bool majority_correct = 2 * train_correct >= train_file.size();
  std::size_t hits = 0;
  for (const auto& e : test_file) hits += (e.label == Label::Correct) == majority_correct;
  const auto& test_entry = manifest.at("splits")[2];
  CHECK(test_entry.at("majority_accuracy").get<double>() ==
        static_cast<double>(hits) / static_cast<double>(test_file.size()));
  std::filesystem::remove_all(dir);
}

TEST_CASE("systematicity test excludes equations seen in training") {
  const auto pool = Generator(small_config(30)).generate(1).equations;
  Protocol p{"same", {{"train", 1, 4, 0.9, std::nullopt, 1}, {"test", 1, 4, 1.0, std::nullopt, 2}}};
  // Same pool on both sides: test may only keep what train did not take.
  const auto splits = make_splits(pool, pool, p);
  std::set<std::string> train_keys;
  for (const auto& e : splits[0].second) train_keys.insert(e.key());
  for (const auto& e : splits[1].second) CHECK_FALSE(train_keys.contains(e.key()));
}

TEST_CASE("an empty split is a hard error") {
  const auto pool = Generator(small_config(31)).generate(1).equations;
  Protocol p{"deep", {{"train", 1, 3, 1.0, std::nullopt, 1}, {"test", 12, 19, 1.0, std::nullopt, 2}}};
  CHECK_THROWS_AS(make_splits(pool, pool, p), DataError);
  Protocol bad{"bad", {{"train", 4, 2, 1.0, std::nullopt, 1}}};
  CHECK_THROWS_AS(make_splits(pool, pool, bad), ConfigError);
}

TEST_CASE("completion items cut a depth 1 or 2 subtree") {
  const auto pool = Generator(small_config(40)).generate(1).equations;
  const auto items = make_completion_items(pool, 50, 3, 7, 5);
  CHECK(items.size() == 50);
  std::mt19937_64 rng(6);
  for (const auto& item : items) {
    CHECK(expr::count_blanks(*item.lhs) + expr::count_blanks(*item.rhs) == 1);
    CHECK((item.gold->depth() == 1 || item.gold->depth() == 2));
    const auto eq = item.filled(item.gold);
    CHECK(check_equation(*eq.lhs, *eq.rhs, rng).verdict == Verdict::Correct);
  }
  const auto path = std::filesystem::temp_directory_path() / "treesmu_completion.jsonl";
  expr::write_completion_items(path, items);
  const auto back = expr::read_completion_items(path);
  std::filesystem::remove(path);
  REQUIRE(back.size() == items.size());
  CHECK(expr::to_line(back[7]) == expr::to_line(items[7]));
}

TEST_CASE("substitutivity set contains both constant classes") {
  const Generator gen(small_config(50));
  const auto items = make_substitutivity_set(gen, 90, 3);
  std::map<std::string, int> classes;
  for (const auto& i : items) {
    ++classes[i.label];
    CHECK(i.expression->depth() >= 1);
    CHECK(i.expression->depth() <= 3);
  }
  CHECK(classes["0"] > 10);
  CHECK(classes["1"] > 10);
  CHECK(classes["other"] > 10);
}

TEST_CASE("dataset generation writes byte-identical files for the same seed") {
  DatasetConfig cfg;
  cfg.trainval = small_config(61);
  cfg.test = small_config(62);
  cfg.protocols = desk_protocols();
  cfg.completion_count = 20;
  cfg.substitutivity_count = 20;
  const auto a = temp_dir("treesmu_dataset_a");
  const auto b = temp_dir("treesmu_dataset_b");
  const auto sa = generate_dataset(cfg, a, 1);
  const auto sb = generate_dataset(cfg, b, 2);
  CHECK(sa.manifest == sb.manifest);
  REQUIRE(sa.files.size() == sb.files.size());
  for (std::size_t i = 0; i < sa.files.size(); ++i) {
    CHECK(sa.files[i].filename() == sb.files[i].filename());
    CHECK(read_file(sa.files[i]) == read_file(sb.files[i]));
  }
  CHECK(std::filesystem::exists(a / "localism_test.jsonl"));
  CHECK(DatasetConfig::from_json(cfg.to_json()).to_json() == cfg.to_json());
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);

  auto same_seed = cfg.to_json();
  same_seed["test"]["seed"] = 61;
  CHECK_THROWS_AS(DatasetConfig::from_json(same_seed), ConfigError);
}
