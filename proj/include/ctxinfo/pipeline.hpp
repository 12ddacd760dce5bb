#pragma once

// Stage drivers shared by the command-line tool and the test suites:
// corpus preparation, run manifests, the batch curriculum sweep and the
// few-shot sweep.

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ctxinfo/corpus.hpp"
#include "ctxinfo/curriculum.hpp"
#include "ctxinfo/embeddings.hpp"
#include "ctxinfo/error.hpp"
#include "ctxinfo/eval.hpp"
#include "ctxinfo/metrics.hpp"
#include "ctxinfo/report.hpp"
#include "ctxinfo/rng.hpp"
#include "ctxinfo/scorer.hpp"
#include "ctxinfo/tsv.hpp"

namespace ctxinfo::pipeline {

namespace fs = std::filesystem;
using json = nlohmann::json;
using corpus::SentenceId;
using corpus::SentenceRecord;

inline constexpr const char* kToolVersion = "1.0.0";

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

inline std::string file_digest(const fs::path& p) { return hex64(fnv1a64(tsv::read_file(p))); }

// ---------------------------------------------------------------------------
// prepare

struct Prepared {
  std::vector<SentenceRecord> all;        // every non-empty input line
  std::vector<SentenceRecord> retained;   // non-target + kept target sentences
  corpus::CorpusSplit split;
  std::vector<corpus::Exclusion> excluded;
  std::vector<std::string> dropped_targets;
  std::size_t input_lines = 0;
  std::size_t empty_lines = 0;
};

inline Prepared prepare(const std::vector<std::string>& lines, const std::set<std::string>& targets,
                        const corpus::FilterPolicy& policy) {
  Prepared p;
  p.input_lines = lines.size();
  auto indexed = corpus::index_targets(corpus::read_corpus(lines), targets);
  p.empty_lines = lines.size() - indexed.sentences.size();
  auto split = corpus::filter_and_split(indexed, targets, policy);
  p.all = std::move(indexed.sentences);
  p.split = std::move(split.split);
  p.excluded = std::move(split.excluded);
  p.dropped_targets = std::move(split.dropped_targets);
  std::set<SentenceId> keep(p.split.non_target_ids.begin(), p.split.non_target_ids.end());
  for (const auto& [t, ids] : p.split.target_map) keep.insert(ids.begin(), ids.end());
  for (const auto& s : p.all) {
    if (keep.count(s.id)) p.retained.push_back(s);
  }
  return p;
}

/// Category counts; they add up to the number of input lines.
inline std::vector<std::pair<std::string, std::size_t>> prepare_summary(const Prepared& p) {
  std::size_t target = 0;
  for (const auto& [t, ids] : p.split.target_map) target += ids.size();
  std::map<std::string, std::size_t> by_reason;
  for (auto r : {corpus::ExclusionReason::MultiTarget, corpus::ExclusionReason::RepeatTarget,
                 corpus::ExclusionReason::Length, corpus::ExclusionReason::SparseTarget}) {
    by_reason[std::string(corpus::reason_code(r))] = 0;
  }
  for (const auto& e : p.excluded) ++by_reason[std::string(corpus::reason_code(e.reason))];
  std::vector<std::pair<std::string, std::size_t>> out{{"TARGET", target},
                                                       {"NON_TARGET", p.split.non_target_ids.size()}};
  for (const auto& kv : by_reason) out.push_back(kv);
  out.emplace_back("EMPTY", p.empty_lines);
  out.emplace_back("TOTAL", p.input_lines);
  return out;
}

/// sentences.tsv, exclusions.tsv, split.tsv (target_word, sentence_id, or
/// "-" for non-target sentences) and summary.tsv.
inline std::vector<fs::path> write_prepared(const fs::path& dir, const Prepared& p) {
  const std::vector<fs::path> paths{dir / "sentences.tsv", dir / "exclusions.tsv", dir / "split.tsv",
                                    dir / "summary.tsv"};
  {
    auto out = tsv::open_output(paths[0]);
    corpus::write_sentences(out, p.retained);
  }
  {
    auto out = tsv::open_output(paths[1]);
    corpus::write_exclusions(out, p.excluded, p.all);
  }
  {
    auto out = tsv::open_output(paths[2]);
    for (const auto& [t, ids] : p.split.target_map)
      for (auto id : ids) out << t << '\t' << id << '\n';
    for (auto id : p.split.non_target_ids) out << "-\t" << id << '\n';
  }
  {
    auto out = tsv::open_output(paths[3]);
    for (const auto& [k, v] : prepare_summary(p)) out << k << '\t' << v << '\n';
  }
  return paths;
}

/// Rebuilds the split from a retained sentences.tsv (targets are the
/// sentences carrying a target annotation).
inline corpus::CorpusSplit split_of(const std::vector<SentenceRecord>& sentences) {
  corpus::CorpusSplit s;
  for (const auto& r : sentences) {
    if (r.target_word) s.target_map[*r.target_word].push_back(r.id);
    else s.non_target_ids.push_back(r.id);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Scores

/// Reads sentence scores. Accepted layouts: id, score / id, target_word,
/// score / the 4-column annotation output (normalized score is used).
inline std::map<SentenceId, double> read_score_table(const std::vector<std::string>& lines) {
  std::map<SentenceId, double> out;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto f = tsv::split(lines[i]);
    std::size_t col = 0;
    if (f.size() == 2) col = 1;
    else if (f.size() == 3 || f.size() == 4) col = 2;
    else throw DataError("score line " + std::to_string(i + 1) + ": expected 2, 3 or 4 fields");
    const double v = tsv::to_double(f[col], "score");
    if (!std::isfinite(v)) throw DataError("score line " + std::to_string(i + 1) + ": non-finite score");
    out[tsv::to_int(f[0], "sentence_id")] = v;
  }
  return out;
}

/// Scored-output TSV: sentence_id, target_word, score.
inline void write_score_table(std::ostream& out, const std::vector<SentenceRecord>& sentences,
                              const std::map<SentenceId, double>& scores) {
  for (const auto& s : sentences) {
    const auto it = scores.find(s.id);
    if (it == scores.end()) continue;
    out << s.id << '\t' << (s.target_word ? *s.target_word : "-") << '\t' << tsv::format_double(it->second) << '\n';
  }
}

inline std::map<SentenceId, double> score_with_model(const scorer::ScorerModel& model,
                                                     const std::vector<SentenceRecord>& sentences,
                                                     const scorer::EmbeddingBackbone* ingested = nullptr) {
  const scorer::EmbeddingBackbone* bb = model.lookup ? static_cast<const scorer::EmbeddingBackbone*>(&*model.lookup) : ingested;
  if (!bb) throw ConfigError("an ingested-backbone scorer needs a vectors file");
  std::map<SentenceId, double> out;
  for (const auto& s : sentences) {
    if (!s.target_pos) continue;
    out[s.id] = scorer::predict(s, model.params, *bb, model.max_len);
  }
  return out;
}

/// Target sentences paired with their scores; sentences without a score
/// are skipped.
inline std::vector<scorer::LabeledSentence> labeled(const std::vector<SentenceRecord>& sentences,
                                                    const std::map<SentenceId, double>& scores) {
  std::vector<scorer::LabeledSentence> out;
  for (const auto& s : sentences) {
    if (!s.target_pos) continue;
    const auto it = scores.find(s.id);
    if (it != scores.end()) out.push_back({s, it->second});
  }
  if (out.empty()) throw DataError("no scored target sentence found");
  return out;
}

// ---------------------------------------------------------------------------
// Configuration

struct ScoreSource {
  std::string source = "file";  // "file" or "model"
  fs::path path;
  fs::path vectors;  // ingested backbone only
};

struct SweepPlan {
  std::size_t pool_size = 512;
  std::vector<curriculum::Heuristic> heuristics{std::begin(curriculum::kAllHeuristics),
                                                std::end(curriculum::kAllHeuristics)};
  std::vector<std::size_t> k;  // empty: 2, 4, ..., pool_size
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

struct FewShotSettings {
  curriculum::FewShotPlan plan;
  std::vector<curriculum::Heuristic> heuristics{std::begin(curriculum::kAllHeuristics),
                                                std::end(curriculum::kAllHeuristics)};
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  embeddings::NonceConfig nonce;
};

struct ExperimentConfig {
  fs::path corpus;
  fs::path targets;
  corpus::FilterPolicy filter;
  ScoreSource scores;
  embeddings::SgConfig embedding;
  embeddings::SgConfig update;
  SweepPlan sweep;
  FewShotSettings fewshot;
  std::vector<fs::path> similarity;
  std::uint64_t seed = 1;
  fs::path output = "out";
  std::size_t threads = 1;
  bool deterministic = false;
  json snapshot;  // the parsed file with flag overrides applied

  std::vector<std::size_t> k_values() const {
    if (!sweep.k.empty()) return sweep.k;
    std::vector<std::size_t> ks;
    for (std::size_t k = 2; k <= sweep.pool_size; k *= 2) ks.push_back(k);
    return ks;
  }
};

namespace detail {

template <class T>
void get_if(const json& j, const char* key, T& dst) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

inline embeddings::SgConfig parse_sg(const json& j, embeddings::SgConfig c) {
  get_if(j, "dim", c.dim);
  get_if(j, "window", c.window);
  get_if(j, "negatives", c.negatives);
  get_if(j, "alpha", c.alpha);
  get_if(j, "subsample_t", c.subsample_t);
  get_if(j, "min_count", c.min_count);
  get_if(j, "epochs", c.epochs);
  get_if(j, "unigram_power", c.unigram_power);
  if (j.contains("mode")) c.mode = embeddings::parse_mode(j.at("mode").get<std::string>());
  if (j.contains("subword")) {
    const auto& s = j.at("subword");
    get_if(s, "n_min", c.subword.n_min);
    get_if(s, "n_max", c.subword.n_max);
    get_if(s, "bucket_count", c.subword.bucket_count);
  }
  return c;
}

inline std::vector<curriculum::Heuristic> parse_heuristics(const json& j) {
  std::vector<curriculum::Heuristic> out;
  for (const auto& h : j) out.push_back(curriculum::parse_heuristic(h.get<std::string>()));
  if (out.empty()) throw ConfigError("heuristic list is empty");
  return out;
}

}  // namespace detail

/// Parses a config document; relative paths resolve against base_dir.
inline ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  ExperimentConfig c;
  auto path_of = [&](const json& v) {
    fs::path p = v.get<std::string>();
    return p.is_absolute() ? p : base_dir / p;
  };
  try {
    if (j.contains("corpus")) c.corpus = path_of(j.at("corpus"));
    if (j.contains("targets")) c.targets = path_of(j.at("targets"));
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      detail::get_if(f, "min_len", c.filter.min_len);
      detail::get_if(f, "max_len", c.filter.max_len);
      detail::get_if(f, "min_sentences_per_target", c.filter.min_sentences_per_target);
    }
    if (j.contains("scores")) {
      const auto& s = j.at("scores");
      detail::get_if(s, "source", c.scores.source);
      if (s.contains("path")) c.scores.path = path_of(s.at("path"));
      if (s.contains("vectors")) c.scores.vectors = path_of(s.at("vectors"));
    }
    if (j.contains("embedding")) c.embedding = detail::parse_sg(j.at("embedding"), c.embedding);
    c.update = c.embedding;
    if (j.contains("update")) c.update = detail::parse_sg(j.at("update"), c.update);
    if (j.contains("curriculum")) {
      const auto& s = j.at("curriculum");
      detail::get_if(s, "pool_size", c.sweep.pool_size);
      detail::get_if(s, "k", c.sweep.k);
      detail::get_if(s, "seeds", c.sweep.seeds);
      if (s.contains("heuristics")) c.sweep.heuristics = detail::parse_heuristics(s.at("heuristics"));
    }
    if (j.contains("fewshot")) {
      const auto& s = j.at("fewshot");
      detail::get_if(s, "background_fraction", c.fewshot.plan.background_fraction);
      detail::get_if(s, "pool_size", c.fewshot.plan.pool_size);
      detail::get_if(s, "exclusion", c.fewshot.plan.exclusion);
      detail::get_if(s, "shots", c.fewshot.plan.shots);
      detail::get_if(s, "seeds", c.fewshot.seeds);
      if (s.contains("heuristics")) c.fewshot.heuristics = detail::parse_heuristics(s.at("heuristics"));
      if (s.contains("nonce")) {
        const auto& n = s.at("nonce");
        auto& nc = c.fewshot.nonce;
        detail::get_if(n, "learning_rate", nc.learning_rate);
        detail::get_if(n, "epochs", nc.epochs);
        detail::get_if(n, "window", nc.window);
        detail::get_if(n, "negatives", nc.negatives);
        detail::get_if(n, "sample", nc.sample);
        detail::get_if(n, "decay", nc.decay);
      }
    }
    if (j.contains("similarity")) {
      for (const auto& p : j.at("similarity")) c.similarity.push_back(path_of(p));
    }
    detail::get_if(j, "seed", c.seed);
    detail::get_if(j, "threads", c.threads);
    detail::get_if(j, "deterministic", c.deterministic);
    if (j.contains("output")) c.output = path_of(j.at("output"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.snapshot = j;
  return c;
}

inline ExperimentConfig load_config(const fs::path& file) {
  json j;
  try {
    j = json::parse(tsv::read_file(file));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + file.string() + ": " + e.what());
  } catch (const DataError&) {
    throw ConfigError("cannot read config file: " + file.string());
  }
  return parse_config(j, file.parent_path());
}

/// Checks that every referenced input exists and the settings are valid.
inline void validate_config(const ExperimentConfig& c, bool need_sweep) {
  auto need = [](const fs::path& p, const char* what) {
    if (p.empty()) throw ConfigError(std::string("config lacks ") + what);
    if (!fs::exists(p)) throw ConfigError(std::string(what) + " not found: " + p.string());
  };
  need(c.corpus, "corpus");
  need(c.targets, "targets");
  need(c.scores.path, "scores path");
  if (c.scores.source != "file" && c.scores.source != "model") throw ConfigError("scores.source must be 'file' or 'model'");
  if (c.similarity.empty()) throw ConfigError("config lists no similarity task");
  for (const auto& p : c.similarity) need(p, "similarity task");
  c.filter.validate();
  c.embedding.validate();
  c.update.validate(true);
  if (c.threads == 0) throw ConfigError("threads must be >= 1");
  if (need_sweep) {
    if (c.sweep.seeds.empty()) throw ConfigError("curriculum seed list is empty");
    for (auto k : c.k_values()) {
      if (k < 2 || (k & (k - 1)) != 0 || k > c.sweep.pool_size) {
        throw ConfigError("curriculum k values must be powers of two in [2, pool_size]");
      }
    }
  } else {
    c.fewshot.plan.validate();
    c.fewshot.nonce.validate();
    if (c.fewshot.seeds.empty()) throw ConfigError("few-shot seed list is empty");
  }
}

// ---------------------------------------------------------------------------
// Manifest: config snapshot, input digests and an append-only stage log.

class Manifest {
 public:
  /// Opens out_dir/manifest.json. An existing manifest must carry the same
  /// config and input digests, otherwise the run is refused.
  static Manifest open(const fs::path& out_dir, const json& config, const std::map<std::string, fs::path>& inputs,
                       const json& seeds) {
    Manifest m;
    m.file_ = out_dir / "manifest.json";
    json digests = json::object();
    for (const auto& [name, path] : inputs) digests[name] = {{"path", path.string()}, {"digest", file_digest(path)}};
    const std::string config_digest = hex64(fnv1a64(config.dump()));
    if (fs::exists(m.file_)) {
      try {
        m.doc_ = json::parse(tsv::read_file(m.file_));
      } catch (const json::parse_error& e) {
        throw DataError("existing manifest is unreadable: " + std::string(e.what()));
      }
      if (m.doc_.value("config_digest", "") != config_digest) {
        throw ConfigError("output directory " + out_dir.string() + " holds a run with a different config");
      }
      if (m.doc_.value("inputs", json::object()) != digests) {
        throw ConfigError("inputs changed since the run in " + out_dir.string() + " was recorded");
      }
      return m;
    }
    m.doc_ = {{"tool_version", kToolVersion}, {"config_digest", config_digest}, {"config", config},
              {"inputs", digests},            {"seeds", seeds},                 {"stages", json::array()}};
    m.save();
    return m;
  }

  bool completed(const std::string& stage) const {
    for (const auto& s : doc_.at("stages")) {
      if (s.value("name", "") == stage && s.value("status", "") == "done") return true;
    }
    return false;
  }

  void record(const std::string& stage, const std::string& status, const std::vector<fs::path>& outputs,
              const std::string& message = "") {
    json entry = {{"name", stage}, {"status", status}};
    json paths = json::array();
    for (const auto& p : outputs) paths.push_back(p.filename().string());
    entry["outputs"] = paths;
    if (!message.empty()) entry["message"] = message;
    doc_["stages"].push_back(entry);
    save();
  }

  /// Runs body as a named stage: recorded as done with its outputs, or as
  /// failed (and rethrown) on any exception.
  std::vector<fs::path> stage(const std::string& name, const std::function<std::vector<fs::path>()>& body) {
    try {
      auto outputs = body();
      record(name, "done", outputs);
      return outputs;
    } catch (const std::exception& e) {
      record(name, "failed", {}, e.what());
      throw;
    }
  }

  const json& doc() const { return doc_; }

 private:
  void save() const {
    auto out = tsv::open_output(file_);
    out << doc_.dump(2) << '\n';
  }

  fs::path file_;
  json doc_;
};

// ---------------------------------------------------------------------------
// Parallel cell runner with results in cell order.

template <class Result>
std::vector<Result> run_cells(std::size_t n, std::size_t threads, const std::function<Result(std::size_t)>& cell) {
  std::vector<Result> results(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        results[i] = cell(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next.store(n);
      }
    }
  };
  const std::size_t t = std::max<std::size_t>(1, std::min(threads, n));
  if (t == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < t; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return results;
}

// ---------------------------------------------------------------------------
// Shared experiment plumbing

namespace detail {

inline std::map<std::string, fs::path> input_files(const ExperimentConfig& c) {
  std::map<std::string, fs::path> in{{"corpus", c.corpus}, {"targets", c.targets}, {"scores", c.scores.path}};
  if (!c.scores.vectors.empty()) in["vectors"] = c.scores.vectors;
  for (std::size_t i = 0; i < c.similarity.size(); ++i) in["similarity." + std::to_string(i)] = c.similarity[i];
  return in;
}

inline std::string task_name(const fs::path& p) { return p.stem().string(); }

inline std::vector<std::vector<eval::SimilarityPair>> load_tasks(const ExperimentConfig& c) {
  std::vector<std::vector<eval::SimilarityPair>> tasks;
  for (const auto& p : c.similarity) tasks.push_back(eval::read_similarity(tsv::read_lines(p)));
  return tasks;
}

inline std::map<SentenceId, double> load_scores(const ExperimentConfig& c, const std::vector<SentenceRecord>& sentences) {
  if (c.scores.source == "file") return read_score_table(tsv::read_lines(c.scores.path));
  const auto model = scorer::load_model(tsv::read_lines(c.scores.path));
  if (model.lookup) return score_with_model(model, sentences);
  if (c.scores.vectors.empty()) throw ConfigError("an ingested-backbone scorer needs scores.vectors");
  const auto bb = scorer::IngestedBackbone::read(tsv::read_lines(c.scores.vectors));
  return score_with_model(model, sentences, &bb);
}

inline std::vector<embeddings::TokenSentence> tokens_of(const std::map<SentenceId, const SentenceRecord*>& index,
                                                        std::span<const SentenceId> ids) {
  std::vector<embeddings::TokenSentence> out;
  out.reserve(ids.size());
  for (auto id : ids) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("sentence " + std::to_string(id) + " is not in the prepared corpus");
    out.push_back(it->second->tokens);
  }
  return out;
}

inline std::string num(double v) { return tsv::format_double(v); }

inline json seeds_json(const ExperimentConfig& c, const std::vector<std::uint64_t>& sweep_seeds) {
  return {{"seed", c.seed}, {"sweep", sweep_seeds}};
}

}  // namespace detail

struct Loaded {
  Prepared prepared;
  std::map<SentenceId, double> scores;
};

/// Reads corpus and targets, prepares the split, scores the target
/// sentences and writes the prepare/score artifacts into out_dir.
inline Loaded load_inputs(const ExperimentConfig& c, const fs::path& out_dir, Manifest& manifest) {
  Loaded l;
  manifest.stage("prepare", [&] {
    l.prepared = prepare(tsv::read_lines(c.corpus), corpus::read_targets(tsv::read_lines(c.targets)), c.filter);
    if (l.prepared.split.target_map.empty()) throw DataError("no target survives the filter policy");
    return write_prepared(out_dir, l.prepared);
  });
  manifest.stage("score", [&] {
    l.scores = detail::load_scores(c, l.prepared.retained);
    std::map<SentenceId, double> kept;
    for (const auto& [t, ids] : l.prepared.split.target_map) {
      for (auto id : ids) {
        const auto it = l.scores.find(id);
        if (it == l.scores.end()) throw DataError("no informativeness score for sentence " + std::to_string(id));
        kept.insert(*it);
      }
    }
    l.scores = std::move(kept);
    const fs::path path = out_dir / "scores.tsv";
    auto out = tsv::open_output(path);
    write_score_table(out, l.prepared.retained, l.scores);
    return std::vector<fs::path>{path};
  });
  return l;
}

inline embeddings::TrainedModel train_background(const ExperimentConfig& c, std::span<const embeddings::TokenSentence> s,
                                                 const fs::path& out_dir, Manifest& manifest) {
  embeddings::TrainedModel bg;
  manifest.stage("background", [&] {
    auto cfg = c.embedding;
    cfg.seed = derive_seed(c.seed, "background");
    cfg.threads = c.deterministic ? 1 : c.threads;
    bg = embeddings::train_skipgram(s, cfg);
    embeddings::save_model(out_dir / "background", bg.model);
    const fs::path log = out_dir / "background_training.tsv";
    auto out = tsv::open_output(log);
    embeddings::write_training_log(out, bg.log);
    return std::vector<fs::path>{out_dir / "background.vec", log};
  });
  return bg;
}

// ---------------------------------------------------------------------------
// Batch curriculum sweep

struct CellRow {
  std::string task;
  curriculum::Heuristic heuristic = curriculum::Heuristic::RandSelect;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  double r = 0.0;
  double coverage = 0.0;
};

struct ExperimentResult {
  bool skipped = false;  // the output directory already held this completed run
  std::vector<CellRow> rows;
  std::map<std::string, eval::SimilarityResult> background;
};

/// Every (heuristic, k, seed) cell the plan allows, in output order.
inline std::vector<curriculum::CurriculumSpec> sweep_cells(const ExperimentConfig& c) {
  std::vector<curriculum::CurriculumSpec> cells;
  for (auto h : c.sweep.heuristics) {
    for (auto k : c.k_values()) {
      curriculum::CurriculumSpec spec{h, k, 0};
      try {
        spec.validate(c.sweep.pool_size);
      } catch (const ConfigError&) {
        continue;
      }
      for (auto s : c.sweep.seeds) cells.push_back({h, k, s});
    }
  }
  return cells;
}

/// experiment.csv, summary.csv and one chart per similarity task.
inline std::vector<fs::path> write_experiment_report(const fs::path& out_dir, const std::vector<CellRow>& rows) {
  std::vector<fs::path> paths{out_dir / "experiment.csv", out_dir / "summary.csv"};
  {
    auto out = tsv::open_output(paths[0]);
    report::write_csv_row(out, {"task", "heuristic", "k", "seed", "r", "coverage"});
    for (const auto& r : rows) {
      report::write_csv_row(out, {r.task, std::string(curriculum::heuristic_name(r.heuristic)), std::to_string(r.k),
                                  std::to_string(r.seed), detail::num(r.r), detail::num(r.coverage)});
    }
  }
  std::map<std::string, std::map<std::pair<std::string, std::size_t>, std::vector<double>>> groups;
  std::vector<std::string> task_order, h_order;
  for (const auto& r : rows) {
    const std::string h(curriculum::heuristic_name(r.heuristic));
    if (std::find(task_order.begin(), task_order.end(), r.task) == task_order.end()) task_order.push_back(r.task);
    if (std::find(h_order.begin(), h_order.end(), h) == h_order.end()) h_order.push_back(h);
    groups[r.task][{h, r.k}].push_back(r.r);
  }
  auto out = tsv::open_output(paths[1]);
  report::write_csv_row(out, {"task", "heuristic", "k", "n", "mean_r", "ci_lo", "ci_hi", "median_r"});
  for (const auto& task : task_order) {
    std::vector<report::Series> series;
    for (const auto& h : h_order) {
      report::Series s{h, {}};
      for (const auto& [key, values] : groups[task]) {
        if (key.first != h) continue;
        const auto ci = metrics::mean_ci95(values);
        report::write_csv_row(out, {task, h, std::to_string(key.second), std::to_string(values.size()),
                                    detail::num(ci.mean), detail::num(ci.lo), detail::num(ci.hi),
                                    detail::num(metrics::lower_median(values))});
        s.points.emplace_back(static_cast<double>(key.second), ci.mean);
      }
      series.push_back(std::move(s));
    }
    const fs::path chart = out_dir / ("chart_" + task + ".svg");
    auto svg = tsv::open_output(chart);
    svg << report::line_chart_svg(task, "sentences per target (k)", "Spearman r", series, true);
    paths.push_back(chart);
  }
  return paths;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, const fs::path& out_dir) {
  validate_config(c, true);
  fs::create_directories(out_dir);
  auto manifest = Manifest::open(out_dir, c.snapshot, detail::input_files(c), detail::seeds_json(c, c.sweep.seeds));
  ExperimentResult result;
  if (manifest.completed("report")) {
    result.skipped = true;
    return result;
  }
  const auto tasks = detail::load_tasks(c);
  auto loaded = load_inputs(c, out_dir, manifest);
  const auto& prep = loaded.prepared;
  const auto index = corpus::by_id(prep.retained);
  const auto background_text = detail::tokens_of(index, prep.split.non_target_ids);
  const auto bg = train_background(c, background_text, out_dir, manifest);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    // target words are usually absent from the background, leaving too few pairs
    try {
      result.background[detail::task_name(c.similarity[t])] = eval::similarity_eval(bg.model, tasks[t]);
    } catch (const DataError&) {
    }
  }

  curriculum::ScoredPool pool;
  const auto cells = sweep_cells(c);
  manifest.stage("curriculum", [&] {
    pool = curriculum::build_scored_pool(prep.split.target_map, loaded.scores, c.sweep.pool_size, c.seed);
    const fs::path path = out_dir / "curricula.tsv";
    auto out = tsv::open_output(path);
    out << "seed\ttarget_word\theuristic\tk\tsentence_id\trank\n";
    for (const auto& spec : cells) {
      std::stringstream block;
      curriculum::write_curriculum(block, curriculum::build_batch_curriculum(pool, spec), spec);
      for (const auto& line : tsv::read_lines(block)) out << spec.seed << '\t' << line << '\n';
    }
    return std::vector<fs::path>{path};
  });

  manifest.stage("sweep", [&] {
    auto per_cell = run_cells<std::vector<CellRow>>(cells.size(), c.threads, [&](std::size_t i) {
      const auto& spec = cells[i];
      const auto chosen = curriculum::build_batch_curriculum(pool, spec);
      std::vector<embeddings::TokenSentence> text;
      for (const auto& [target, ids] : chosen) {
        auto part = detail::tokens_of(index, ids);
        text.insert(text.end(), part.begin(), part.end());
      }
      const std::string key = std::string(curriculum::heuristic_name(spec.heuristic)) + "|" + std::to_string(spec.k);
      Rng order(derive_seed(spec.seed, "order|" + key));
      order.shuffle(text);
      embeddings::EmbeddingModel model = bg.model;
      auto ucfg = c.update;
      ucfg.seed = derive_seed(spec.seed, "update|" + key);
      ucfg.threads = 1;
      embeddings::update_model(model, text, ucfg);
      std::vector<CellRow> rows;
      for (std::size_t t = 0; t < tasks.size(); ++t) {
        const auto sim = eval::similarity_eval(model, tasks[t]);
        rows.push_back({detail::task_name(c.similarity[t]), spec.heuristic, spec.k, spec.seed, sim.r, sim.coverage});
      }
      return rows;
    });
    // task-major order: all cells of the first task, then the next
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      for (const auto& rows : per_cell) result.rows.push_back(rows[t]);
    }
    return std::vector<fs::path>{};
  });
  manifest.stage("report", [&] {
    auto paths = write_experiment_report(out_dir, result.rows);
    const fs::path bg_path = out_dir / "background_similarity.csv";
    auto out = tsv::open_output(bg_path);
    report::write_csv_row(out, {"task", "r", "coverage", "scored", "total"});
    for (const auto& [task, sim] : result.background) {
      report::write_csv_row(out, {task, detail::num(sim.r), detail::num(sim.coverage), std::to_string(sim.scored),
                                  std::to_string(sim.total)});
    }
    paths.push_back(bg_path);
    return paths;
  });
  return result;
}

// ---------------------------------------------------------------------------
// Few-shot sweep

struct FewShotRow {
  curriculum::Heuristic heuristic = curriculum::Heuristic::RandSelect;
  std::size_t shots = 0;
  std::uint64_t seed = 0;
  double median_rank = 0.0;
  double spearman = 0.0;  // NaN when fewer than 3 target pairs are rated
  std::size_t n_targets = 0;
  std::size_t n_pairs = 0;
};

struct FewShotResult {
  bool skipped = false;
  std::vector<FewShotRow> rows;
};

inline std::vector<fs::path> write_fewshot_report(const fs::path& out_dir, const std::vector<FewShotRow>& rows) {
  std::vector<fs::path> paths{out_dir / "fewshot.csv", out_dir / "fewshot_summary.csv", out_dir / "chart_fewshot.svg"};
  {
    auto out = tsv::open_output(paths[0]);
    report::write_csv_row(out, {"heuristic", "shots", "seed", "median_rank", "spearman", "n_targets", "n_pairs"});
    for (const auto& r : rows) {
      report::write_csv_row(out, {std::string(curriculum::heuristic_name(r.heuristic)), std::to_string(r.shots),
                                  std::to_string(r.seed), detail::num(r.median_rank), detail::num(r.spearman),
                                  std::to_string(r.n_targets), std::to_string(r.n_pairs)});
    }
  }
  std::map<std::pair<std::string, std::size_t>, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::vector<std::string> h_order;
  for (const auto& r : rows) {
    const std::string h(curriculum::heuristic_name(r.heuristic));
    if (std::find(h_order.begin(), h_order.end(), h) == h_order.end()) h_order.push_back(h);
    auto& g = groups[{h, r.shots}];
    g.first.push_back(r.median_rank);
    if (std::isfinite(r.spearman)) g.second.push_back(r.spearman);
  }
  auto out = tsv::open_output(paths[1]);
  report::write_csv_row(out, {"heuristic", "shots", "n", "median_of_median_rank", "mean_spearman"});
  std::vector<report::Series> series;
  for (const auto& h : h_order) {
    report::Series s{h, {}};
    for (const auto& [key, g] : groups) {
      if (key.first != h) continue;
      const double med = metrics::lower_median(g.first);
      const double sp = g.second.empty() ? std::nan("") : metrics::mean(g.second);
      report::write_csv_row(out, {h, std::to_string(key.second), std::to_string(g.first.size()), detail::num(med),
                                  detail::num(sp)});
      s.points.emplace_back(static_cast<double>(key.second), med);
    }
    series.push_back(std::move(s));
  }
  auto svg = tsv::open_output(paths[2]);
  svg << report::line_chart_svg("few-shot nonce learning", "shots", "median gold rank", series, false);
  return paths;
}

inline FewShotResult run_fewshot(const ExperimentConfig& c, const fs::path& out_dir) {
  validate_config(c, false);
  fs::create_directories(out_dir);
  auto manifest = Manifest::open(out_dir, c.snapshot, detail::input_files(c), detail::seeds_json(c, c.fewshot.seeds));
  FewShotResult result;
  if (manifest.completed("report")) {
    result.skipped = true;
    return result;
  }
  const auto& plan = c.fewshot.plan;
  const auto tasks = detail::load_tasks(c);
  auto loaded = load_inputs(c, out_dir, manifest);
  const auto& prep = loaded.prepared;
  const auto index = corpus::by_id(prep.retained);

  std::map<std::string, curriculum::FewShotSplit> splits;
  std::map<std::string, std::vector<curriculum::ScoredSentence>> full;
  std::vector<SentenceId> background_ids = prep.split.non_target_ids;
  manifest.stage("split", [&] {
    const fs::path path = out_dir / "fewshot_split.tsv";
    auto out = tsv::open_output(path);
    for (const auto& [t, ids] : prep.split.target_map) {
      auto sp = curriculum::fewshot_split(ids, plan, derive_seed(c.seed, "split|" + t));
      background_ids.insert(background_ids.end(), sp.background.begin(), sp.background.end());
      for (auto id : sp.background) out << t << '\t' << id << "\tbackground\n";
      for (auto id : sp.holdout) out << t << '\t' << id << "\tholdout\n";
      auto& entries = full[t];
      for (auto id : ids) entries.push_back({id, loaded.scores.at(id)});
      std::sort(entries.begin(), entries.end(), curriculum::score_less);
      splits[t] = std::move(sp);
    }
    std::sort(background_ids.begin(), background_ids.end());
    return std::vector<fs::path>{path};
  });
  const auto background_text = detail::tokens_of(index, background_ids);
  const auto bg = train_background(c, background_text, out_dir, manifest);
  if (bg.model.mode != embeddings::Mode::Word2Vec) throw ConfigError("few-shot learning needs a word2vec background");

  std::vector<eval::SimilarityPair> pairs;
  for (const auto& task : tasks) {
    for (const auto& p : task) {
      if (splits.count(p.word_a) && splits.count(p.word_b)) pairs.push_back(p);
    }
  }

  struct Cell {
    curriculum::Heuristic h;
    std::size_t shots;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (auto h : c.fewshot.heuristics)
    for (auto s : plan.shots)
      for (auto si : c.fewshot.seeds) cells.push_back({h, s, si});

  manifest.stage("sweep", [&] {
    result.rows = run_cells<FewShotRow>(cells.size(), c.threads, [&](std::size_t i) {
      const auto& cell = cells[i];
      const std::string hname(curriculum::heuristic_name(cell.h));
      std::vector<std::size_t> ranks;
      std::map<std::string, Eigen::VectorXd> nonces;
      for (const auto& [t, sp] : splits) {
        const auto pool = curriculum::build_fewshot_pool(full.at(t), sp.holdout, cell.h, plan,
                                                         derive_seed(cell.seed, "pool|" + t + "|" + hname));
        const auto shot_ids = curriculum::sample_shots(
            pool, cell.shots, derive_seed(cell.seed, "shots|" + t + "|" + hname + "|" + std::to_string(cell.shots)));
        const auto text = detail::tokens_of(index, shot_ids);
        embeddings::EmbeddingModel model = bg.model;
        const auto nr = embeddings::train_nonce(
            model, t, text, c.fewshot.nonce,
            derive_seed(cell.seed, "nonce|" + t + "|" + hname + "|" + std::to_string(cell.shots)));
        ranks.push_back(embeddings::gold_rank(model, nr.nonce_id, nr.gold_id));
        nonces[t] = model.input.row(nr.nonce_id).transpose();
      }
      FewShotRow row{cell.h, cell.shots, cell.seed, 0.0, std::nan(""), ranks.size(), pairs.size()};
      row.median_rank = static_cast<double>(embeddings::median_rank(ranks));
      if (pairs.size() >= 3) {
        std::vector<double> pred, human;
        for (const auto& p : pairs) {
          pred.push_back(eval::nonce_pair_score(bg.model, nonces, p));
          human.push_back(p.human_score);
        }
        row.spearman = metrics::spearman(pred, human);
      }
      return row;
    });
    return std::vector<fs::path>{};
  });
  manifest.stage("report", [&] { return write_fewshot_report(out_dir, result.rows); });
  return result;
}

}  // namespace ctxinfo::pipeline
