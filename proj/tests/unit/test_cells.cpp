#include <cmath>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "model_testing.hpp"
#include "reference_cells.hpp"
#include "treesmu/cells.hpp"
#include "treesmu/errors.hpp"
#include "treesmu/model.hpp"

using namespace treesmu;
using namespace treesmu::cells;
using namespace treesmu::testing;
using expr::parse;

namespace {

ad::NodeId constant_column(ad::Graph& g, const Vec& v) {
  ad::Tensor t(v.size(), 1);
  for (std::size_t i = 0; i < v.size(); ++i) t(i, 0) = v[i];
  return g.constant(t);
}

Vec values(const ad::Graph& g, ad::NodeId id) {
  const auto& t = g.value(id);
  return {t.data().begin(), t.data().end()};
}

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vec v(n);
  for (double& x : v) x = d(rng);
  return v;
}

RefState random_ref_state(std::size_t n, std::size_t p, std::mt19937_64& rng) {
  RefState s{random_vec(n, rng), random_vec(n, rng), {}};
  for (std::size_t i = 0; i < p; ++i) s.stack.push_back(random_vec(n, rng));
  return s;
}

NodeState to_node_state(ad::Graph& g, const RefState& s) {
  NodeState out;
  out.h = constant_column(g, s.h);
  out.c = constant_column(g, s.c);
  for (const auto& row : s.stack) out.stack.push_back(constant_column(g, row));
  return out;
}

void randomize(ad::ParamStore& store, std::mt19937_64& rng, double scale = 0.5) {
  std::uniform_real_distribution<double> d(-scale, scale);
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    for (double& v : store.value(ad::ParamId{i}).data()) v = d(rng);
  }
}

void fill_param(ad::ParamStore& store, const std::string& key, double v) {
  store.value(store.id(key)).fill(v);
}

void check_close(const Vec& a, const Vec& b, double tol) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - b[i]) <= tol);
}

ModelConfig stack_config(std::size_t n, std::size_t p, std::size_t k, bool noop = false) {
  ModelConfig c;
  c.architecture = Architecture::TreeSMU;
  c.n = n;
  c.p = p;
  c.k = k;
  c.noop = noop;
  return c;
}

}  // namespace

TEST_CASE("architecture names and config validation") {
  CHECK(parse_architecture("treesmu") == Architecture::TreeSMU);
  CHECK(parse_architecture("SeqLSTM") == Architecture::SeqLSTM);
  CHECK_THROWS_AS(parse_architecture("transformer"), ConfigError);
  CHECK_THROWS_AS(stack_config(4, 2, 3).validate(), ConfigError);
  CHECK_THROWS_AS(stack_config(4, 0, 1).validate(), ConfigError);
  const auto c = stack_config(7, 3, 2, true);
  CHECK(ModelConfig::from_json(c.to_json()).to_json() == c.to_json());
  const ModelConfig defaults;
  CHECK(defaults.n == 60);
  CHECK(defaults.p == 2);
  CHECK(defaults.k == 1);
  CHECK_FALSE(defaults.noop);
}

TEST_CASE("leaf embeddings start with an empty stack") {
  ModelConfig cfg = stack_config(5, 3, 1);
  Model model(cfg, expr::Vocab::default_alphabet());
  model.initialize(3);
  ad::Graph g(model.params());
  CellContext ctx{g, cfg};
  const auto a = embed_leaf(ctx, "leaf/embed", {2});
  const auto b = embed_leaf(ctx, "leaf/embed", {2});
  const auto c = embed_leaf(ctx, "leaf/embed", {4});
  CHECK(a.stack.size() == 3);
  for (const auto& row : a.stack) CHECK_FALSE(row.has_value());
  CHECK(values(g, a.h) == values(g, b.h));
  CHECK(values(g, a.h) != values(g, c.h));
  CHECK_THROWS_AS(model.hidden(*parse("(+ x q)")), ContractError);
}

TEST_CASE("Tree-RNN node arithmetic") {
  ad::ParamStore store;
  add_rnn_params(store, "+", 2);
  ModelConfig cfg;
  cfg.architecture = Architecture::TreeRNN;
  cfg.n = 2;
  {
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const NodeState l{constant_column(g, {1.0, 2.0}), std::nullopt, {}};
    const NodeState r{constant_column(g, {-1.0, 0.5}), std::nullopt, {}};
    CHECK(values(g, treernn_node(ctx, "+", l, r).h) == Vec{0.5, 0.5});
  }
  store.value(store.id("+/W")) = ad::Tensor(2, 4, {0.1, 0.2, 0.3, 0.4, -0.5, 0.6, -0.7, 0.8});
  store.value(store.id("+/b")) = ad::Tensor(2, 1, {0.05, -0.05});
  ad::Graph g(store);
  CellContext ctx{g, cfg};
  NodeState l{constant_column(g, {1.0, 2.0}), std::nullopt, {}};
  NodeState r{constant_column(g, {-1.0, 0.5}), std::nullopt, {}};
  // 0.1 + 0.4 - 0.3 + 0.2 + 0.05 = 0.45 and -0.5 + 1.2 + 0.7 + 0.4 - 0.05 = 1.75
  const Vec h = values(g, treernn_node(ctx, "+", l, r).h);
  CHECK(std::abs(h[0] - 1.0 / (1.0 + std::exp(-0.45))) <= 1e-12);
  CHECK(std::abs(h[1] - 1.0 / (1.0 + std::exp(-1.75))) <= 1e-12);

  // Child stacks do not matter.
  l.stack = {constant_column(g, {9.0, 9.0})};
  r.stack = {constant_column(g, {-3.0, 4.0})};
  CHECK(values(g, treernn_node(ctx, "+", l, r).h) == h);
}

TEST_CASE("Tree-LSTM saturated gates") {
  ad::ParamStore store;
  add_lstm_params(store, "*", 3);
  std::mt19937_64 rng(5);
  randomize(store, rng, 0.1);
  ModelConfig cfg;
  cfg.architecture = Architecture::TreeLSTM;
  cfg.n = 3;
  const RefState l = random_ref_state(3, 0, rng);
  const RefState r = random_ref_state(3, 0, rng);

  for (const char* b : {"*/bi", "*/bf1", "*/bf2", "*/bo", "*/bu"}) fill_param(store, b, -40.0);
  {
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const auto out = treelstm_node(ctx, "*", to_node_state(g, l), to_node_state(g, r));
    for (double v : values(g, *out.c)) CHECK(std::abs(v) <= 1e-9);
    for (double v : values(g, out.h)) CHECK(std::abs(v) <= 1e-9);
  }
  fill_param(store, "*/bf1", 40.0);
  {
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const auto out = treelstm_node(ctx, "*", to_node_state(g, l), to_node_state(g, r));
    check_close(values(g, *out.c), l.c, 1e-9);
  }
}

TEST_CASE("cells match the straight-line reference on random instances") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 2 + trial % 4;
    const std::size_t p = 1 + trial % 3;
    const std::size_t k = 1 + (trial / 3) % p;
    const bool noop = trial % 2 == 1;
    ModelConfig cfg = stack_config(n, p, k, noop);
    ad::ParamStore store;
    add_rnn_params(store, "r", n);
    add_lstm_params(store, "l", n);
    add_smu_params(store, "s", cfg);
    randomize(store, rng);
    const RefState left = random_ref_state(n, p, rng);
    const RefState right = random_ref_state(n, p, rng);

    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const NodeState gl = to_node_state(g, left);
    const NodeState gr = to_node_state(g, right);

    check_close(values(g, treernn_node(ctx, "r", gl, gr).h), ref_rnn(store, "r", left, right).h,
                1e-10);
    const auto lstm = treelstm_node(ctx, "l", gl, gr);
    const auto lstm_ref = ref_lstm(store, "l", left, right);
    check_close(values(g, lstm.h), lstm_ref.h, 1e-10);
    check_close(values(g, *lstm.c), lstm_ref.c, 1e-10);
    for (bool queue : {false, true}) {
      const auto out = queue ? treequeue_node(ctx, "s", gl, gr) : treesmu_node(ctx, "s", gl, gr);
      const auto ref = ref_stack_cell(store, "s", cfg, left, right, queue);
      check_close(values(g, out.h), ref.h, 1e-10);
      for (std::size_t row = 0; row < p; ++row) {
        const Vec got = out.stack[row] ? values(g, *out.stack[row]) : Vec(n, 0.0);
        check_close(got, ref.stack[row], 1e-10);
      }
    }
  }
}

TEST_CASE("saturated push and pop shift stack rows") {
  const std::size_t n = 4;
  const std::size_t p = 3;
  ModelConfig cfg = stack_config(n, p, 1);
  ad::ParamStore store;
  add_smu_params(store, "+", cfg);
  std::mt19937_64 rng(21);
  randomize(store, rng, 0.05);
  // Route the left child's stack through unchanged.
  fill_param(store, "+/bf1", 40.0);
  fill_param(store, "+/bf2", -40.0);
  const RefState left = random_ref_state(n, p, rng);
  const RefState right = random_ref_state(n, p, rng);

  SUBCASE("push") {
    fill_param(store, "+/bpush", 40.0);
    fill_param(store, "+/bpop", -40.0);
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const auto out = treesmu_node(ctx, "+", to_node_state(g, left), to_node_state(g, right));
    const Vec u = ref_map(ref_affine(store, "+", "Uu", "bu", ref_concat(left.h, right.h)), ref_tanh);
    check_close(values(g, *out.stack[0]), u, 1e-9);
    for (std::size_t i = 1; i < p; ++i) check_close(values(g, *out.stack[i]), left.stack[i - 1], 1e-9);
  }
  SUBCASE("pop") {
    fill_param(store, "+/bpush", -40.0);
    fill_param(store, "+/bpop", 40.0);
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const auto out = treesmu_node(ctx, "+", to_node_state(g, left), to_node_state(g, right));
    for (std::size_t i = 0; i + 1 < p; ++i) {
      check_close(values(g, *out.stack[i]), left.stack[i + 1], 1e-9);
    }
    check_close(values(g, *out.stack[p - 1]), Vec(n, 0.0), 1e-9);
  }
}

TEST_CASE("push and pop gates sum to one per coordinate") {
  std::mt19937_64 rng(31);
  for (bool noop : {false, true}) {
    ModelConfig cfg = stack_config(6, 2, 1, noop);
    ad::ParamStore store;
    add_smu_params(store, "+", cfg);
    randomize(store, rng, 3.0);
    for (int trial = 0; trial < 200; ++trial) {
      ad::Graph g(store);
      CellContext ctx{g, cfg};
      const auto x = constant_column(g, random_vec(12, rng));
      const auto gates = stack_gates(ctx, "+", x);
      const Vec push = values(g, gates.push);
      const Vec pop = values(g, gates.pop);
      const Vec no = gates.noop ? values(g, *gates.noop) : Vec(6, 0.0);
      CHECK(gates.noop.has_value() == noop);
      for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(push[i] + pop[i] + no[i] - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("queue writes at the back and reads the front") {
  const std::size_t n = 3;
  SUBCASE("hard enqueue into empty queues") {
    ModelConfig cfg = stack_config(n, 3, 1);
    ad::ParamStore store;
    add_smu_params(store, "+", cfg);
    std::mt19937_64 rng(41);
    randomize(store, rng, 0.05);
    fill_param(store, "+/bpush", 40.0);
    fill_param(store, "+/bpop", -40.0);
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const NodeState leaf{constant_column(g, random_vec(n, rng)), std::nullopt, {3, std::nullopt}};
    const auto out = treequeue_node(ctx, "+", leaf, leaf);
    const Vec u = ref_map(
        ref_affine(store, "+", "Uu", "bu", ref_concat(values(g, leaf.h), values(g, leaf.h))),
        ref_tanh);
    check_close(values(g, *out.stack[2]), u, 1e-9);
    CHECK_FALSE(out.stack[0].has_value());
    CHECK_FALSE(out.stack[1].has_value());
  }
  SUBCASE("p = 1 makes stack and queue identical") {
    ModelConfig cfg = stack_config(n, 1, 1);
    ad::ParamStore store;
    add_smu_params(store, "+", cfg);
    std::mt19937_64 rng(42);
    randomize(store, rng);
    const RefState l = random_ref_state(n, 1, rng);
    const RefState r = random_ref_state(n, 1, rng);
    ad::Graph g(store);
    CellContext ctx{g, cfg};
    const auto a = treesmu_node(ctx, "+", to_node_state(g, l), to_node_state(g, r));
    const auto b = treequeue_node(ctx, "+", to_node_state(g, l), to_node_state(g, r));
    CHECK(values(g, a.h) == values(g, b.h));
  }
  SUBCASE("a chain of hard writes is stored in reverse order") {
    for (Architecture arch : {Architecture::TreeSMU, Architecture::TreeQueue}) {
      ModelConfig cfg = stack_config(n, 3, 1);
      cfg.architecture = arch;
      Model model(cfg, expr::Vocab::default_alphabet());
      model.initialize(1);
      auto& store = model.params();
      // Candidates ignore the input so each node writes a recognisable constant.
      const std::pair<const char*, double> marks[] = {{"sin", 0.1}, {"cos", 0.2}, {"tan", 0.3}};
      for (const auto& [fn, mark] : marks) {
        const std::string prefix(fn);
        fill_param(store, prefix + "/Uu", 0.0);
        fill_param(store, prefix + "/bu", mark);
        fill_param(store, prefix + "/bpush", 40.0);
        fill_param(store, prefix + "/bpop", -40.0);
        fill_param(store, prefix + "/bf1", 40.0);
      }
      const auto rows = model.stack_rows(*parse("(sin (cos (tan x)))"));
      const double expect[] = {std::tanh(0.1), std::tanh(0.2), std::tanh(0.3)};
      for (std::size_t i = 0; i < 3; ++i) {
        const double want = arch == Architecture::TreeSMU ? expect[i] : expect[2 - i];
        for (double v : rows[i]) CHECK(std::abs(v - want) <= 1e-9);
      }
    }
  }
}

TEST_CASE("sequential LSTM one step by hand") {
  ModelConfig cfg;
  cfg.architecture = Architecture::SeqLSTM;
  cfg.n = 2;
  Model model(cfg, expr::Vocab::default_alphabet());
  auto& s = model.params();
  const auto x_token = model.vocab().require_token("x");
  ad::Tensor& table = s.value(s.id("seq/embed"));
  table(x_token, 0) = 0.5;
  table(x_token, 1) = -1.0;
  fill_param(s, "seq/Ui", 0.1);
  fill_param(s, "seq/Uf", 0.7);
  fill_param(s, "seq/Uo", 0.2);
  fill_param(s, "seq/bo", 0.1);
  fill_param(s, "seq/Uu", 0.3);
  fill_param(s, "seq/bu", -0.1);
  const Vec h = model.hidden(*parse("x"));
  // x sums to -0.5: input gate sigmoid(-0.05), output gate sigmoid(0) = 0.5,
  // candidate tanh(-0.25); the forget gate multiplies a zero cell.
  const double c = 1.0 / (1.0 + std::exp(0.05)) * std::tanh(-0.25);
  CHECK(std::abs(h[0] - 0.5 * std::tanh(c)) <= 1e-12);
  CHECK(std::abs(h[1] - 0.5 * std::tanh(c)) <= 1e-12);

  std::mt19937_64 rng(2);
  randomize(s, rng);
  ad::Graph g(s);
  CellContext ctx{g, model.config()};
  const auto a = model.vocab().require_token("x");
  const auto b = model.vocab().require_token("y");
  const Vec ab = values(g, seq_lstm_encode(ctx, "seq", {{a}, {b}}));
  const Vec ba = values(g, seq_lstm_encode(ctx, "seq", {{b}, {a}}));
  CHECK(ab != ba);
  CHECK_THROWS_AS(seq_lstm_encode(ctx, "seq", {}), ContractError);
}

TEST_CASE("root classifier") {
  ad::ParamStore store;
  ad::Graph g(store);
  const auto z0 = g.dot(constant_column(g, {1.0, 0.0}), constant_column(g, {0.0, 1.0}));
  CHECK(g.value(g.sigmoid(z0))[0] == 0.5);
  const auto u = constant_column(g, {1.0, 1.0, 1.0});
  const auto z1 = g.dot(u, u);
  CHECK(std::abs(g.value(g.sigmoid(z1))[0] - 1.0 / (1.0 + std::exp(-3.0))) <= 1e-15);

  // d BCE(sigmoid(u.v)) / du = (p - y) v
  ad::Graph g2(store);
  const Vec uv = {0.3, -0.2, 0.8};
  const Vec vv = {-0.5, 0.4, 0.9};
  const auto un = constant_column(g2, uv);
  const auto vn = constant_column(g2, vv);
  const auto loss = g2.bce_loss(g2.dot(un, vn), {1.0});
  g2.backward(loss);
  const double z = 0.3 * -0.5 + -0.2 * 0.4 + 0.8 * 0.9;
  const double p = 1.0 / (1.0 + std::exp(-z));
  const Vec grad(g2.gradient(un).data().begin(), g2.gradient(un).data().end());
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(grad[i] - (p - 1.0) * vv[i]) <= 1e-12);
}

TEST_CASE("weights are shared by function type") {
  ModelConfig cfg = stack_config(4, 2, 1);
  Model model(cfg, expr::Vocab::default_alphabet());
  model.initialize(9);
  const expr::Equation eq{parse("(+ (+ (+ x y) z) (+ (+ z x) y))"), parse("(+ y 1)"), expr::Label::Correct};
  ad::Graph g(model.params());
  const auto loss = equations_loss(g, model, {eq});
  const auto grads = g.backward(loss);
  std::size_t parameter_nodes = 0;
  for (std::uint32_t i = 0; i < g.size(); ++i) {
    if (g.kind(ad::NodeId{i}) == ad::OpKind::Parameter) ++parameter_nodes;
  }
  std::size_t plus_keys = 0;
  const auto& store = model.params();
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const std::string& key = store.key(ad::ParamId{i});
    if (key.rfind("+/", 0) == 0) {
      ++plus_keys;
      INFO(key);
      CHECK(grads.contains(ad::ParamId{i}));
    } else if (key != "leaf/embed") {
      CHECK_FALSE(grads.contains(ad::ParamId{i}));
    }
  }
  // Six "+" nodes reuse one bundle, plus the leaf table.
  CHECK(parameter_nodes == plus_keys + 1);
}

TEST_CASE("parameter counts") {
  for (std::size_t n : {4u, 50u, 60u}) {
    CHECK(rnn_bundle_size(n) == 2 * n * n + n);
    CHECK(lstm_bundle_size(n) == 5 * (2 * n * n + n));
    CHECK(smu_bundle_size(stack_config(n, 2, 1)) == 6 * (2 * n * n + n));
    CHECK(smu_bundle_size(stack_config(n, 2, 1, true)) == 7 * (2 * n * n + n));
    CHECK(smu_bundle_size(stack_config(n, 3, 2)) == 6 * (2 * n * n + n) + 2 * n * 2 + 2);
  }
  const auto vocab = expr::Vocab::default_alphabet();
  ModelConfig lstm;
  lstm.architecture = Architecture::TreeLSTM;
  lstm.n = 50;
  const std::size_t table = vocab.terminal_count() * 50;
  const double ratio = static_cast<double>(parameter_count(stack_config(50, 2, 1), vocab) - table) /
                       static_cast<double>(parameter_count(lstm, vocab) - table);
  // The SMU bundle carries six affine maps against the LSTM's five.
  CHECK(ratio == doctest::Approx(1.2).epsilon(1e-12));

  for (const auto& key : {"+/Apush", "+/Apop", "+/Uu", "+/Uo", "+/Uf1", "+/Uf2"}) {
    Model m(stack_config(4, 2, 1), vocab);
    CHECK(m.params().value(m.params().id(key)).rows() == 4);
    CHECK(m.params().value(m.params().id(key)).cols() == 8);
  }
  Model topk(stack_config(4, 3, 2), vocab);
  CHECK(topk.params().value(topk.params().id("+/Up")).rows() == 2);
  CHECK(topk.params().value(topk.params().id("+/Up")).cols() == 8);
}

TEST_CASE("model matches the reference encoder end to end") {
  const auto vocab = expr::Vocab::default_alphabet();
  std::mt19937_64 rng(71);
  const auto eqs = gradcheck_equations();
  for (Architecture arch : {Architecture::TreeRNN, Architecture::TreeLSTM, Architecture::TreeSMU,
                            Architecture::TreeQueue}) {
    ModelConfig cfg = stack_config(5, 3, 2, true);
    cfg.architecture = arch;
    Model model(cfg, vocab);
    model.initialize(rng());
    randomize(model.params(), rng);
    for (const auto& eq : eqs) {
      CHECK(std::abs(model.predict(eq) - ref_probability(model.params(), cfg, vocab, eq)) <= 1e-12);
    }
  }
}

TEST_CASE("analytic gradients agree with finite differences") {
  const auto vocab = expr::Vocab::default_alphabet();
  const auto eqs = gradcheck_equations();
  struct Case {
    Architecture arch;
    std::size_t p, k;
    bool noop;
  };
  const Case cases[] = {
      {Architecture::TreeRNN, 1, 1, false},  {Architecture::TreeLSTM, 1, 1, false},
      {Architecture::TreeSMU, 1, 1, false},  {Architecture::TreeSMU, 2, 1, false},
      {Architecture::TreeSMU, 3, 2, false},  {Architecture::TreeSMU, 2, 1, true},
      {Architecture::TreeQueue, 3, 2, true}, {Architecture::SeqLSTM, 1, 1, false},
  };
  std::uint64_t seed = 100;
  for (const auto& c : cases) {
    ModelConfig cfg = stack_config(4, c.p, c.k, c.noop);
    cfg.architecture = c.arch;
    Model model(cfg, vocab);
    model.initialize(++seed);
    std::mt19937_64 rng(seed);
    randomize(model.params(), rng);
    const auto result = gradient_check(
        model.params(), [&](ad::Graph& g) { return equations_loss(g, model, eqs); }, 120, seed);
    INFO(architecture_name(c.arch), " p=", c.p, " k=", c.k, " noop=", c.noop);
    CHECK(result.coordinates >= 100);
    CHECK(result.max_relative_error <= 1e-4);
  }
}

TEST_CASE("a batched forward equals per-example forwards") {
  const auto vocab = expr::Vocab::default_alphabet();
  const std::vector<expr::Equation> eqs = {
      {parse("(+ x (sin y))"), parse("(* x 2)"), expr::Label::Correct},
      {parse("(+ 3 (sin pi))"), parse("(* z 1)"), expr::Label::Incorrect},
      {parse("(+ y (sin 1/2))"), parse("(* y x)"), expr::Label::Correct},
  };
  for (const auto& e : eqs) REQUIRE(expr::shape_key(*e.tree()) == expr::shape_key(*eqs[0].tree()));
  for (Architecture arch : {Architecture::TreeLSTM, Architecture::TreeSMU, Architecture::SeqLSTM}) {
    ModelConfig cfg = stack_config(6, 2, 1);
    cfg.architecture = arch;
    cfg.dropout = 0.3;
    Model model(cfg, vocab);
    model.initialize(5);

    std::vector<std::mt19937_64> streams;
    for (std::uint64_t i = 0; i < eqs.size(); ++i) streams.emplace_back(1000 + i);
    std::vector<std::mt19937_64*> ptrs;
    for (auto& s : streams) ptrs.push_back(&s);
    DropoutSource batch_dropout(0.3, ptrs);
    ad::Graph g(model.params());
    std::vector<const expr::Equation*> batch;
    for (const auto& e : eqs) batch.push_back(&e);
    const Vec together = values(g, model.logits(g, batch, &batch_dropout));

    for (std::size_t b = 0; b < eqs.size(); ++b) {
      std::mt19937_64 own(1000 + b);
      DropoutSource single(0.3, {&own});
      ad::Graph g1(model.params());
      const expr::Equation* one[] = {&eqs[b]};
      CHECK(std::abs(values(g1, model.logits(g1, one, &single))[0] - together[b]) <= 1e-12);
    }
  }
}

TEST_CASE("checkpoint round trip keeps predictions") {
  const auto dir = std::filesystem::temp_directory_path() / "treesmu_cells_ckpt";
  std::filesystem::create_directories(dir);
  expr::Vocab vocab = expr::Vocab::default_alphabet();
  vocab.add_terminal("5");
  ModelConfig cfg = stack_config(5, 3, 2, true);
  Model model(cfg, vocab);
  model.initialize(17);
  model.set_majority_label(expr::Label::Incorrect);
  model.save(dir / "m.ckpt", {{"epoch", 3}});
  const Model loaded = Model::load(dir / "m.ckpt");
  CHECK(loaded.vocab() == vocab);
  CHECK(loaded.config().to_json() == cfg.to_json());
  CHECK(loaded.majority_label() == expr::Label::Incorrect);
  for (const auto& eq : gradcheck_equations()) CHECK(loaded.predict(eq) == model.predict(eq));

  ModelConfig lstm;
  lstm.architecture = Architecture::TreeLSTM;
  lstm.n = 5;
  Model other(lstm, vocab);
  other.save(dir / "lstm.ckpt");
  auto ck = ad::load_checkpoint(dir / "lstm.ckpt");
  ck.metadata["model"] = cfg.to_json();
  CHECK_THROWS_AS(Model::from_checkpoint(std::move(ck)), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("majority class and stack access") {
  ModelConfig cfg;
  cfg.architecture = Architecture::MajorityClass;
  Model model(cfg, expr::Vocab::default_alphabet());
  const auto eq = gradcheck_equations()[0];
  CHECK(model.predict(eq) == 1.0);
  model.set_majority_label(expr::Label::Incorrect);
  CHECK(model.predict(eq) == 0.0);
  CHECK(model.params().size() == 0);

  ModelConfig lstm;
  lstm.architecture = Architecture::TreeLSTM;
  lstm.n = 4;
  Model m(lstm, expr::Vocab::default_alphabet());
  try {
    (void)m.stack_rows(*parse("(+ x y)"));
    FAIL("expected an error");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()) == "architecture has no stack");
  }
}
