#include <catch_amalgamated.hpp>

#include <sstream>

#include "ctxinfo/scorer.hpp"
#include "ctxinfo/synthetic.hpp"
#include "support/oracles.hpp"

using namespace ctxinfo;
using namespace ctxinfo::scorer;

namespace {

SentenceRecord sentence(std::vector<std::string> tokens, std::size_t target, SentenceId id = 0) {
  SentenceRecord s;
  s.id = id;
  s.tokens = std::move(tokens);
  s.target_pos = target;
  s.target_word = s.tokens[target];
  return s;
}

/// Largest relative error between backward() and central differences over
/// every head parameter, the external features' weights and the lookup rows.
double gradient_error(MaskMode mode, std::size_t ext_dim, std::uint64_t seed) {
  Rng rng(seed);
  const auto s = sentence({"a", "b", "c", "d", "e", "b"}, 2, 3);
  auto bb = LookupBackbone::build(std::vector<SentenceRecord>{s}, 5, 1, seed);
  auto p = ScorerParams::init(5, 3, ext_dim, seed + 1);
  p.mask_mode = mode;
  for (Eigen::Index k = 0; k < p.hidden_bias.size(); ++k) p.hidden_bias(k) = rng.uniform(0.05, 0.3);
  std::map<SentenceId, std::vector<double>> feats;
  for (std::size_t k = 0; k < ext_dim; ++k) feats[3].push_back(rng.uniform(-1, 1));
  const ExternalFeatures ext(feats);
  const ExternalFeatures* ep = ext_dim ? &ext : nullptr;
  const double y = 0.3;
  auto loss = [&] {
    const double sc = forward(p, bb.encode(s, 8), external_for(ep, 3)).score;
    return 0.5 * (sc - y) * (sc - y);
  };
  const auto enc = bb.encode(s, 8);
  const auto f = forward(p, enc, external_for(ep, 3));
  Gradients g(p);
  backward(p, enc, f, f.score - y, g);
  double worst = 0.0;
  auto check = [&](double& x, double a) {
    const double n = oracle::central_diff(loss, x, 1e-6);
    worst = std::max(worst, std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-3}));
  };
  for (Eigen::Index i = 0; i < p.attention.size(); ++i) check(p.attention.data()[i], g.attention.data()[i]);
  for (Eigen::Index i = 0; i < p.hidden_weights.size(); ++i) check(p.hidden_weights.data()[i], g.hidden_weights.data()[i]);
  for (Eigen::Index i = 0; i < p.hidden_bias.size(); ++i) check(p.hidden_bias(i), g.hidden_bias(i));
  for (Eigen::Index i = 0; i < p.output_weights.size(); ++i) check(p.output_weights(i), g.output_weights(i));
  check(p.output_bias, g.output_bias);
  for (Eigen::Index r = 0; r < bb.table().rows(); ++r) {
    const auto it = g.rows.find(static_cast<int>(r));
    for (Eigen::Index c = 0; c < bb.table().cols(); ++c) check(bb.table()(r, c), it == g.rows.end() ? 0.0 : it->second(c));
  }
  return worst;
}

}  // namespace

TEST_CASE("backward matches finite differences", "[scorer][gradient]") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    REQUIRE(gradient_error(MaskMode::PostSoftmax, 0, seed) < 1e-5);
    REQUIRE(gradient_error(MaskMode::PreSoftmax, 0, seed) < 1e-5);
    REQUIRE(gradient_error(MaskMode::PostSoftmax, 2, seed) < 1e-5);
  }
}

TEST_CASE("target and padding positions get zero attention", "[scorer][mask]") {
  const auto s = sentence({"x", "y", "z"}, 1);
  auto bb = LookupBackbone::build(std::vector<SentenceRecord>{s}, 4, 1, 3);
  const auto p = ScorerParams::init(4, 3, 0, 4);
  const auto enc = bb.encode(s, 6);
  const auto w = attention_weights(enc.query, enc.context, enc.mask, p.attention);
  REQUIRE(w(1) == 0.0);
  for (int j = 3; j < 6; ++j) REQUIRE(w(j) == 0.0);
  REQUIRE(w(0) > 0.0);
  // without renormalization the surviving mass is below one
  REQUIRE(w.sum() < 1.0);
  const auto pre = attention_weights(enc.query, enc.context, enc.mask, p.attention, MaskMode::PreSoftmax);
  REQUIRE(pre.sum() == Catch::Approx(1.0));
  REQUIRE(pre(1) == 0.0);
}

TEST_CASE("an all-masked sentence is rejected", "[scorer][mask]") {
  const auto s = sentence({"only"}, 0);
  auto bb = LookupBackbone::build(std::vector<SentenceRecord>{s}, 3, 1, 1);
  const auto p = ScorerParams::init(3, 2, 0, 1);
  REQUIRE_THROWS_AS(predict(s, p, bb, 4), DataError);
}

TEST_CASE("long sentences keep the target inside the window", "[scorer]") {
  REQUIRE(window_start(10, 3, 5) == 0);
  REQUIRE(window_start(10, 8, 5) == 4);
  REQUIRE(window_start(4, 3, 5) == 0);
  std::vector<std::string> toks;
  for (int i = 0; i < 12; ++i) toks.push_back("t" + std::to_string(i));
  const auto s = sentence(toks, 10);
  auto bb = LookupBackbone::build(std::vector<SentenceRecord>{s}, 3, 1, 1);
  const auto enc = bb.encode(s, 4);
  REQUIRE(enc.mask == std::vector<char>{1, 1, 1, 0});
}

TEST_CASE("unknown context words map to the UNK row", "[scorer]") {
  const auto train = sentence({"a", "b", "c"}, 0);
  auto bb = LookupBackbone::build(std::vector<SentenceRecord>{train}, 3, 1, 1);
  REQUIRE(bb.row("never-seen") == 0);
  REQUIRE(bb.row("b") > 0);
  const auto enc = bb.encode(sentence({"a", "zzz", "b"}, 0), 4);
  REQUIRE(enc.rows[1] == 0);
}

TEST_CASE("training lowers the error and is deterministic", "[scorer]") {
  const auto data = synthetic::make_cue_task(600, 3);
  std::vector<SentenceRecord> recs;
  for (const auto& e : data) recs.push_back(e.sentence);
  TrainConfig cfg;
  cfg.epochs = 120;
  cfg.learning_rate = 0.3;
  cfg.hidden = 64;
  cfg.batch_size = 8;
  auto bb1 = LookupBackbone::build(recs, 32, 1, 1);
  auto bb2 = bb1;
  const auto r1 = train(data, cfg, bb1);
  const auto r2 = train(data, cfg, bb2);
  REQUIRE(r1.epoch_rmse.back() < 0.8 * r1.epoch_rmse.front());
  REQUIRE(r1.epoch_rmse == r2.epoch_rmse);
  REQUIRE(r1.params.attention == r2.params.attention);
  cfg.learning_rate = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("model files round trip", "[scorer]") {
  const auto data = synthetic::make_cue_task(50, 4);
  std::vector<SentenceRecord> recs;
  for (const auto& e : data) recs.push_back(e.sentence);
  ScorerModel m;
  m.lookup = LookupBackbone::build(recs, 4, 1, 2);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = 5;
  m.params = train(data, cfg, *m.lookup).params;
  m.max_len = cfg.max_len;
  std::stringstream buf;
  save_model(buf, m);
  const auto back = load_model(tsv::read_lines(buf));
  REQUIRE(back.lookup.has_value());
  for (const auto& e : data) {
    REQUIRE(predict(e.sentence, back.params, *back.lookup, back.max_len) ==
            predict(e.sentence, m.params, *m.lookup, m.max_len));
  }
  REQUIRE_THROWS_AS(load_model({"not-a-model\t1"}), DataError);
}

TEST_CASE("ingested backbone reads per-token vectors", "[scorer]") {
  const std::vector<std::string> lines{"5\t0\t1\t0", "5\t1\t0\t1", "5\t2\t1\t1"};
  const auto bb = IngestedBackbone::read(lines);
  REQUIRE(bb.dim() == 2);
  const auto enc = bb.encode(sentence({"p", "q", "r"}, 1, 5), 4);
  REQUIRE(enc.query(1) == 1.0);
  REQUIRE(enc.mask == std::vector<char>{1, 0, 1, 0});
  REQUIRE_THROWS_AS(bb.encode(sentence({"p", "q", "r"}, 1, 6), 4), DataError);
}
