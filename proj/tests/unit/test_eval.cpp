#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "treesmu/errors.hpp"
#include "treesmu/eval.hpp"
#include "treesmu/generator.hpp"
#include "treesmu/oracle.hpp"
#include "treesmu/training.hpp"

using namespace treesmu;
using namespace treesmu::eval;
using expr::Equation;
using expr::Label;
using expr::parse;

namespace {

std::vector<Equation> corpus(std::uint64_t seed, int lo, int hi, std::size_t per_depth) {
  datagen::GenConfig g;
  g.seed = seed;
  for (int d = lo; d <= hi; ++d) g.counts_per_depth[d] = per_depth;
  return datagen::Generator(g).generate(1).equations;
}

Scorer gold_stub() {
  return [](const Equation& eq) { return eq.label == Label::Correct ? 1.0 : 0.0; };
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

}  // namespace

TEST_CASE("verification metrics") {
  const auto eqs = corpus(31, 1, 4, 30);
  const auto m = verify(gold_stub(), eqs);
  CHECK(m.overall.accuracy() == 1.0);
  CHECK(m.overall.precision() == 1.0);
  CHECK(m.overall.recall() == 1.0);
  std::size_t sum = 0;
  for (const auto& [d, c] : m.per_depth) sum += c.total();
  CHECK(sum == eqs.size());

  const auto shallow = verify(gold_stub(), eqs, 2, 3);
  CHECK(shallow.per_depth.size() == 2);
  CHECK(shallow.per_depth.begin()->first == 2);
  CHECK_THROWS_AS(verify(gold_stub(), eqs, 12, 14), DataError);

  // Hand-built file: scores push predictions to C C I C I I against gold C C C I I I.
  const std::vector<Equation> six = {
      {parse("(+ x 0)"), parse("x"), Label::Correct},
      {parse("(* x 1)"), parse("x"), Label::Correct},
      {parse("(* x 0)"), parse("0"), Label::Correct},
      {parse("(+ x 1)"), parse("x"), Label::Incorrect},
      {parse("(* x 2)"), parse("x"), Label::Incorrect},
      {parse("(+ x 2)"), parse("x"), Label::Incorrect},
  };
  const double scores[] = {0.9, 0.6, 0.2, 0.7, 0.1, 0.49};
  std::size_t i = 0;
  const auto hand = verify([&](const Equation&) { return scores[i++]; }, six);
  CHECK(hand.overall.accuracy() == doctest::Approx(4.0 / 6.0));
  CHECK(hand.overall.precision() == doctest::Approx(2.0 / 3.0));
  CHECK(hand.overall.recall() == doctest::Approx(2.0 / 3.0));

  const auto dir = std::filesystem::temp_directory_path() / "treesmu_eval_csv";
  std::filesystem::create_directories(dir);
  hand.write_csv(dir / "m.csv");
  const auto rows = lines(dir / "m.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "depth,count,accuracy,precision,recall");
  CHECK(rows[2].rfind("overall,6,", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("majority accuracy agrees with the counting oracle") {
  const auto train = corpus(37, 1, 3, 40);
  const auto test = corpus(38, 4, 5, 40);
  cells::ModelConfig cfg;
  cfg.architecture = cells::Architecture::MajorityClass;
  cells::Model model(cfg, expr::Vocab::default_alphabet());
  model.set_majority_label(training::majority_label(train));
  const auto m = verify(model_scorer(model), test);
  CHECK(m.overall.accuracy() ==
        datagen::majority_accuracy(datagen::count_labels(train), datagen::count_labels(test)));
}

TEST_CASE("completion matching") {
  const expr::CompletionItem item{parse("(+ (^ (sin θ) 2) _)"), parse("1"),
                                  parse("(^ (cos θ) 2)")};
  CHECK(completion_match(item, item.gold, MatchMode::Oracle));
  CHECK(completion_match(item, item.gold, MatchMode::Gold));
  CHECK_FALSE(completion_match(item, parse("(^ (sin θ) 2)"), MatchMode::Oracle));
  // Equivalent but not the gold tree.
  const auto alt = parse("(- 1 (^ (sin θ) 2))");
  CHECK(completion_match(item, alt, MatchMode::Oracle));
  CHECK_FALSE(completion_match(item, alt, MatchMode::Gold));
}

TEST_CASE("candidate pool") {
  const auto vocab = expr::Vocab::default_alphabet();
  const auto pool = candidate_pool(vocab, 2000, 3);
  CHECK(pool.size() == 2000);
  std::set<std::string> seen;
  for (const auto& e : pool) seen.insert(expr::print(*e));
  CHECK(seen.size() == pool.size());
  CHECK(expr::print(*pool[0]) == vocab.terminal(0));
  const auto again = candidate_pool(vocab, 2000, 3);
  for (std::size_t i = 0; i < pool.size(); ++i) CHECK(expr::print(*pool[i]) == expr::print(*again[i]));
  const auto small = candidate_pool(vocab, 50, 3);
  CHECK(small.size() == 50);
  for (const auto& e : pool) CHECK(e->depth() <= 2);
}

TEST_CASE("top-K accuracy") {
  const auto vocab = expr::Vocab::default_alphabet();
  const auto pool = candidate_pool(vocab, 120, 5);
  const auto source = corpus(41, 2, 4, 30);
  const auto items = datagen::make_completion_items(source, 25, 2, 5, 9);
  REQUIRE(items.size() >= 20);

  SUBCASE("non-decreasing in K with the exhaustive bound") {
    std::mt19937_64 rng(1);
    std::map<std::string, double> memo;
    const Scorer noisy = [&](const Equation& eq) {
      auto [it, fresh] = memo.try_emplace(eq.key(), 0.0);
      if (fresh) it->second = std::uniform_real_distribution<double>(0, 1)(rng);
      return it->second;
    };
    CompletionConfig cfg;
    cfg.ks = {1, 3, 10, 40, 121};
    const auto r = run_completion(noisy, items, pool, cfg);
    const auto acc = r.overall_accuracy();
    for (std::size_t j = 1; j < acc.size(); ++j) CHECK(acc[j] >= acc[j - 1]);
    // K equal to the largest candidate count is exhaustive.
    CHECK(acc.back() == r.overall_upper_bound());
    CHECK(r.overall_upper_bound() == 1.0);  // gold is always a candidate

    cfg.match = MatchMode::Gold;
    const auto g = run_completion(noisy, items, pool, cfg);
    CHECK(g.overall_accuracy().back() == 1.0);
  }
  SUBCASE("a random scorer hits at the combinatorial rate") {
    double expected = 0;
    double variance = 0;
    for (const auto& item : items) {
      std::vector<expr::ExprPtr> cands(pool.begin(), pool.end());
      const auto gold = expr::print(*item.gold);
      bool has = false;
      for (const auto& c : cands) has |= expr::print(*c) == gold;
      if (!has) cands.push_back(item.gold);
      std::size_t ok = 0;
      for (const auto& c : cands) ok += completion_match(item, c, MatchMode::Oracle);
      const double p = static_cast<double>(ok) / static_cast<double>(cands.size());
      expected += p;
      variance += p * (1 - p);
    }
    double hits = 0;
    const int repeats = 20;
    for (int rep = 0; rep < repeats; ++rep) {
      std::mt19937_64 rng(100 + rep);
      const Scorer random = [&](const Equation&) {
        return std::uniform_real_distribution<double>(0, 1)(rng);
      };
      const auto r = run_completion(random, items, pool, {{1}, 120, 5, MatchMode::Oracle});
      hits += r.overall_accuracy()[0] * static_cast<double>(items.size());
    }
    const double mean_hits = hits / repeats;
    CHECK(std::abs(mean_hits - expected) <= 3 * std::sqrt(variance / repeats));
  }
}

TEST_CASE("model scoring is a pure function") {
  cells::ModelConfig cfg;
  cfg.n = 6;
  cells::Model model(cfg, expr::Vocab::default_alphabet());
  model.initialize(4);
  const auto scorer = model_scorer(model);
  const Equation eq{parse("(+ (sin x) 1)"), parse("(cos y)"), Label::Correct};
  const double a = scorer(eq);
  scorer({parse("(* x x)"), parse("y"), Label::Correct});
  CHECK(scorer(eq) == a);
}

TEST_CASE("stack usage probe") {
  cells::ModelConfig cfg;
  cfg.n = 5;
  cfg.p = 3;
  cells::Model model(cfg, expr::Vocab::default_alphabet());
  const std::vector<Equation> eqs = {{parse("x"), parse("y"), Label::Correct},
                                     {parse("(+ x y)"), parse("1"), Label::Incorrect}};
  const auto zero = stack_usage_probe(model, eqs);
  CHECK(zero.mean_used.at(1) == 0.0);
  CHECK(zero.mean_used.at(2) == 0.0);

  model.initialize(8);
  const auto used = stack_usage_probe(model, eqs);
  CHECK(used.mean_used.at(1) == 0.0);  // leaves keep an empty stack
  CHECK(used.mean_used.at(2) == 0.5);  // one pushed row on one side
  CHECK(used_rows({{0.001, 0.0}, {0.0011, 0.0}, {0, 0}}, 0.001) == 1);

  cells::ModelConfig rnn;
  rnn.architecture = cells::Architecture::TreeRNN;
  rnn.n = 4;
  cells::Model plain(rnn, expr::Vocab::default_alphabet());
  try {
    stack_usage_probe(plain, eqs);
    FAIL("expected an error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()) == "architecture has no stack");
  }
}

TEST_CASE("embedding export") {
  CHECK(datagen::constant_class(*parse("(* 1 (* x 0))")) == "0");
  CHECK(datagen::constant_class(*parse("(^ x 0)")) == "1");
  cells::ModelConfig cfg;
  cfg.n = 3;
  cells::Model model(cfg, expr::Vocab::default_alphabet());
  model.initialize(2);
  const std::vector<datagen::ClassedExpression> items = {{parse("(* 1 (* x 0))"), "0"},
                                                         {parse("(^ x 0)"), "1"}};
  const auto dir = std::filesystem::temp_directory_path() / "treesmu_embed";
  std::filesystem::create_directories(dir);
  export_embeddings(model, items, dir / "e.csv");
  const auto rows = lines(dir / "e.csv");
  REQUIRE(rows.size() == 3);
  CHECK(rows[0] == "expr,class,h0,h1,h2");
  CHECK(rows[1].rfind("\"(* 1 (* x 0))\",0,", 0) == 0);
  CHECK(std::count(rows[2].begin(), rows[2].end(), ',') == 4);
  std::filesystem::remove_all(dir);
}
