#include <catch_amalgamated.hpp>

#include <filesystem>

#include "ctxinfo/embeddings.hpp"
#include "ctxinfo/synthetic.hpp"
#include "support/oracles.hpp"

using namespace ctxinfo;
using namespace ctxinfo::embeddings;
namespace fs = std::filesystem;

namespace {

std::vector<TokenSentence> small_corpus(std::uint64_t seed, std::size_t tokens = 20000) {
  return synthetic::make_two_topic_corpus(tokens, seed).sentences;
}

SgConfig small_config() {
  SgConfig c;
  c.dim = 8;
  c.min_count = 1;
  c.epochs = 2;
  return c;
}

fs::path temp_prefix(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "ctxinfo_unit_embeddings";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("vocabulary is ordered by count then word", "[embeddings]") {
  const std::vector<TokenSentence> corpus{{"b", "a", "c"}, {"a", "b"}, {"a", "d"}};
  const auto v = build_vocab(corpus, 1);
  REQUIRE(v.words == std::vector<std::string>{"a", "b", "c", "d"});
  REQUIRE(v.total == 7);
  REQUIRE(build_vocab(corpus, 2).size() == 2);
  REQUIRE_THROWS_AS(build_vocab(corpus, 9), DataError);
  REQUIRE(v.id("zzz") == -1);
}

TEST_CASE("negative sampler follows count^power", "[embeddings]") {
  Vocab v;
  v.add("x", 16);
  v.add("y", 1);
  const NegativeSampler s(v, 0.75);
  REQUIRE(s.mass(0) == Catch::Approx(8.0 / 9.0));
  Rng rng(1);
  int x = 0;
  for (int i = 0; i < 20000; ++i) x += s.sample(rng) == 0;
  REQUIRE(x / 20000.0 == Catch::Approx(8.0 / 9.0).margin(0.01));
}

TEST_CASE("character n-grams of the bracketed word", "[embeddings]") {
  const SubwordConfig cfg{3, 4, 100};
  REQUIRE(char_ngram_strings("cat", cfg) ==
          std::vector<std::string>{"<ca", "cat", "at>", "<cat", "cat>", "<cat>"});
  // code points, not bytes
  const auto g = char_ngram_strings("\xc3\xa9t\xc3\xa9", SubwordConfig{3, 3, 10});
  REQUIRE(g.front() == "<\xc3\xa9t");
  REQUIRE(g.size() == 4);
  for (auto id : char_ngrams("door", cfg)) REQUIRE(id < 100);
}

TEST_CASE("sgns_update steps along the negative analytic gradient", "[embeddings][gradient]") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    auto rv = [&] {
      Eigen::VectorXd v(6);
      for (int i = 0; i < 6; ++i) v(i) = rng.uniform(-1, 1);
      return v;
    };
    Eigen::VectorXd h = rv(), pos = rv();
    std::vector<Eigen::VectorXd> negs{rv(), rv(), rv()};
    auto h2 = h, pos2 = pos;
    auto negs2 = negs;
    const double lr = 1e-3;
    sgns_update(h2, pos2, negs2, lr);
    auto loss = [&] { return sgns_pair_loss(h, pos, negs); };
    for (int i = 0; i < 6; ++i) {
      REQUIRE(-(h2(i) - h(i)) / lr == Catch::Approx(oracle::central_diff(loss, h(i), 1e-5)).epsilon(1e-6).margin(1e-9));
      REQUIRE(-(pos2(i) - pos(i)) / lr == Catch::Approx(oracle::central_diff(loss, pos(i), 1e-5)).epsilon(1e-6).margin(1e-9));
      REQUIRE(-(negs2[1](i) - negs[1](i)) / lr ==
              Catch::Approx(oracle::central_diff(loss, negs[1](i), 1e-5)).epsilon(1e-6).margin(1e-9));
    }
  }
}

TEST_CASE("single-threaded training is deterministic and lowers the loss", "[embeddings]") {
  const auto corpus = small_corpus(1);
  auto cfg = small_config();
  cfg.epochs = 3;
  const auto a = train_skipgram(corpus, cfg);
  const auto b = train_skipgram(corpus, cfg);
  REQUIRE(a.model.input == b.model.input);
  REQUIRE(a.model.output == b.model.output);
  REQUIRE(a.log.size() == 3);
  REQUIRE(a.log.back().mean_loss < a.log.front().mean_loss);
  cfg.seed = 2;
  REQUIRE_FALSE(train_skipgram(corpus, cfg).model.input == a.model.input);
}

TEST_CASE("parallel training produces finite, useful vectors", "[embeddings]") {
  const auto c = synthetic::make_two_topic_corpus(60000, 3);
  auto cfg = small_config();
  cfg.threads = 2;
  cfg.epochs = 3;
  const auto t = train_skipgram(c.sentences, cfg);
  REQUIRE(t.model.input.allFinite());
  const double same = cosine(word_vector(t.model, "cat"), word_vector(t.model, "dog"));
  const double other = cosine(word_vector(t.model, "cat"), word_vector(t.model, "door"));
  REQUIRE(same > other);
}

TEST_CASE("config validation", "[embeddings]") {
  auto cfg = small_config();
  cfg.dim = 0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.alpha = 0.0;
  REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
  REQUIRE_NOTHROW(cfg.validate(true));
  REQUIRE_THROWS_AS(parse_mode("glove"), ConfigError);
}

TEST_CASE("update_model adds unseen words and keeps the dimension", "[embeddings]") {
  auto t = train_skipgram(small_corpus(1), small_config());
  const auto before = t.model.vocab.size();
  const std::vector<TokenSentence> extra{{"cat", "zorp", "dog"}, {"zorp", "door"}};
  auto cfg = small_config();
  cfg.dim = 99;  // ignored: the model's own size wins
  const auto log = update_model(t.model, extra, cfg);
  REQUIRE(t.model.vocab.size() == before + 1);
  REQUIRE(t.model.dim() == 8);
  REQUIRE(t.model.vocab.counts[static_cast<std::size_t>(t.model.vocab.id("zorp"))] == 2);
  REQUIRE(log.size() == 2);
  REQUIRE(update_model(t.model, std::vector<TokenSentence>{}, cfg).empty());
}

TEST_CASE("update with zero learning rate leaves vectors untouched", "[embeddings]") {
  auto t = train_skipgram(small_corpus(1), small_config());
  const auto input = t.model.input;
  auto cfg = small_config();
  cfg.alpha = 0.0;
  update_model(t.model, std::vector<TokenSentence>{{"cat", "dog"}}, cfg);
  REQUIRE(t.model.input == input);
}

TEST_CASE("nonce learning only moves the nonce row", "[embeddings]") {
  auto t = train_skipgram(small_corpus(2), small_config());
  const auto input = t.model.input;
  const auto output = t.model.output;
  const std::vector<TokenSentence> shots{{"the", "cat", "and", "dog"}, {"a", "cat", "horse"}};
  const auto r = train_nonce(t.model, "cat", shots, NonceConfig{}, 7);
  REQUIRE(t.model.vocab.words[static_cast<std::size_t>(r.gold_id)] == "cat_gold");
  REQUIRE(t.model.vocab.id("cat") == r.nonce_id);
  REQUIRE(t.model.input.topRows(input.rows()) == input);
  REQUIRE(t.model.output.topRows(output.rows()) == output);
  REQUIRE(t.model.output.row(r.nonce_id).isZero());
  const auto rank = gold_rank(t.model, r.nonce_id, r.gold_id);
  REQUIRE(rank >= 1);
  REQUIRE(rank <= t.model.vocab.size() - 1);
  auto ft_cfg = small_config();
  ft_cfg.mode = Mode::FastText;
  ft_cfg.subword.bucket_count = 64;
  auto ft = train_skipgram(small_corpus(2, 3000), ft_cfg);
  REQUIRE_THROWS_AS(train_nonce(ft.model, "cat", shots, NonceConfig{}, 1), ConfigError);
  REQUIRE_THROWS_AS(train_nonce(t.model, "unknownword", shots, NonceConfig{}, 1), DataError);
}

TEST_CASE("gold rank counts strictly closer rows", "[embeddings]") {
  EmbeddingModel m;
  m.input.resize(4, 2);
  m.input << 1, 0,   // nonce
      0.9, 0.1,      // gold
      1, 0.01,       // closer than gold
      -1, 0;
  for (const char* w : {"n", "g", "c", "f"}) m.vocab.add(w, 1);
  REQUIRE(gold_rank(m, 0, 1) == 2);
  REQUIRE(median_rank({5, 1, 3, 2}) == 2);
}

TEST_CASE("fasttext builds vectors for unseen words", "[embeddings]") {
  auto cfg = small_config();
  cfg.mode = Mode::FastText;
  cfg.subword.bucket_count = 512;
  const auto t = train_skipgram(small_corpus(3, 5000), cfg);
  REQUIRE(representable(t.model, "catz"));
  REQUIRE(word_vector(t.model, "catz").allFinite());
  REQUIRE(word_vector(t.model, "catz").norm() > 0.0);
}

TEST_CASE("models round trip through files", "[embeddings]") {
  for (auto mode : {Mode::Word2Vec, Mode::FastText}) {
    auto cfg = small_config();
    cfg.mode = mode;
    cfg.subword.bucket_count = 64;
    const auto t = train_skipgram(small_corpus(4, 3000), cfg);
    const auto prefix = temp_prefix(std::string(mode_name(mode)));
    save_model(prefix, t.model);
    const auto back = load_model(prefix);
    REQUIRE(back.vocab.words == t.model.vocab.words);
    REQUIRE(back.vocab.counts == t.model.vocab.counts);
    REQUIRE(back.input == t.model.input);
    REQUIRE(back.output == t.model.output);
    REQUIRE(back.mode == mode);
    if (mode == Mode::FastText) REQUIRE(back.buckets == t.model.buckets);
  }
  REQUIRE_THROWS_AS(load_model(temp_prefix("missing")), DataError);
}
