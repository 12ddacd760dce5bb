// ctxinfo command-line driver. One subcommand per pipeline stage plus the
// end-to-end experiment and few-shot sweeps.

#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "ctxinfo/ctxinfo.hpp"

namespace fs = std::filesystem;
using namespace ctxinfo;
using pipeline::json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<std::size_t> threads;
  bool deterministic = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_option("--threads", c.threads, "Worker threads");
  cmd->add_flag("--deterministic", c.deterministic, "Single-threaded, bit-reproducible training");
}

json config_json(const Common& c, fs::path& base) {
  if (c.config.empty()) {
    base = fs::current_path();
    return json::object();
  }
  base = fs::path(c.config).parent_path();
  try {
    return json::parse(tsv::read_file(c.config));
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse config " + c.config + ": " + e.what());
  } catch (const DataError&) {
    throw ConfigError("cannot read config file: " + c.config);
  }
}

/// Loads the config and applies the common flags on top of it.
pipeline::ExperimentConfig load_with_flags(const Common& c) {
  fs::path base;
  json j = config_json(c, base);
  if (c.seed) j["seed"] = *c.seed;
  if (c.threads) j["threads"] = *c.threads;
  if (c.deterministic) j["deterministic"] = true;
  if (!c.out.empty()) j["output"] = fs::absolute(c.out).string();
  return pipeline::parse_config(j, base);
}

std::uint64_t seed_or(const Common& c, std::uint64_t fallback) { return c.seed.value_or(fallback); }

fs::path need_out(const Common& c) {
  if (c.out.empty()) throw ConfigError("--out is required");
  return c.out;
}

std::vector<scorer::LabeledSentence> load_labeled(const std::string& sentences, const std::string& scores) {
  return pipeline::labeled(corpus::read_sentences(fs::path(sentences)),
                           pipeline::read_score_table(tsv::read_lines(fs::path(scores))));
}

std::vector<embeddings::TokenSentence> read_token_file(const fs::path& p) {
  std::vector<embeddings::TokenSentence> out;
  if (p.extension() == ".tsv") {
    for (auto& s : corpus::read_sentences(p)) out.push_back(std::move(s.tokens));
    return out;
  }
  for (const auto& line : tsv::read_lines(p)) {
    auto t = corpus::tokenize(line);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Context informativeness scoring and curriculum experiments"};
  app.require_subcommand(1);

  // prepare
  Common prep_c;
  std::string prep_corpus, prep_targets;
  corpus::FilterPolicy policy;
  auto* prep = app.add_subcommand("prepare", "Index target words, filter and split a corpus");
  add_common(prep, prep_c);
  prep->add_option("--corpus", prep_corpus, "One sentence per line");
  prep->add_option("--targets", prep_targets, "One target word per line");
  prep->add_option("--min-len", policy.min_len);
  prep->add_option("--max-len", policy.max_len);
  prep->add_option("--min-sentences", policy.min_sentences_per_target);

  // annotate
  auto* annotate = app.add_subcommand("annotate", "Best-worst scaling annotation tools");
  annotate->require_subcommand(1);
  Common ann_c;
  std::string ann_sentences, ann_tuples, ann_judgments;
  std::size_t tuples_per_sentence = 2, trials = 10;
  auto* tuples = annotate->add_subcommand("tuples", "Generate 4-tuples over target sentences");
  add_common(tuples, ann_c);
  tuples->add_option("--sentences", ann_sentences)->required();
  tuples->add_option("--per-sentence", tuples_per_sentence);
  auto* aggregate = annotate->add_subcommand("aggregate", "Turn judgments into informativeness scores");
  add_common(aggregate, ann_c);
  aggregate->add_option("--tuples", ann_tuples)->required();
  aggregate->add_option("--judgments", ann_judgments)->required();
  auto* repl = annotate->add_subcommand("replicability", "Split-half reliability of the judgments");
  add_common(repl, ann_c);
  repl->add_option("--tuples", ann_tuples)->required();
  repl->add_option("--judgments", ann_judgments)->required();
  repl->add_option("--trials", trials);

  // score-train / score
  Common st_c;
  std::string st_sentences, st_scores, st_backbone = "lookup", st_vectors;
  scorer::TrainConfig tcfg;
  std::size_t st_dim = 64, st_min_count = 1;
  std::string st_mask = "post";
  auto* score_train = app.add_subcommand("score-train", "Train the attention scorer");
  add_common(score_train, st_c);
  score_train->add_option("--sentences", st_sentences)->required();
  score_train->add_option("--scores", st_scores)->required();
  score_train->add_option("--backbone", st_backbone)->check(CLI::IsMember({"lookup", "ingested"}));
  score_train->add_option("--vectors", st_vectors, "Per-token vectors for the ingested backbone");
  score_train->add_option("--dim", st_dim, "Lookup embedding size");
  score_train->add_option("--min-count", st_min_count);
  score_train->add_option("--epochs", tcfg.epochs);
  score_train->add_option("--batch-size", tcfg.batch_size);
  score_train->add_option("--lr", tcfg.learning_rate);
  score_train->add_option("--hidden", tcfg.hidden);
  score_train->add_option("--max-len", tcfg.max_len);
  score_train->add_option("--mask", st_mask)->check(CLI::IsMember({"pre", "post"}));

  Common sc_c;
  std::string sc_model, sc_sentences, sc_vectors;
  auto* score = app.add_subcommand("score", "Score target sentences with a trained model");
  add_common(score, sc_c);
  score->add_option("--model", sc_model)->required();
  score->add_option("--sentences", sc_sentences)->required();
  score->add_option("--vectors", sc_vectors);

  // curriculum
  Common cu_c;
  std::string cu_sentences, cu_scores, cu_heuristic = "RandSelect";
  std::size_t cu_k = 2, cu_pool = 512;
  auto* cur = app.add_subcommand("curriculum", "Select k sentences per target with a heuristic");
  add_common(cur, cu_c);
  cur->add_option("--sentences", cu_sentences)->required();
  cur->add_option("--scores", cu_scores)->required();
  cur->add_option("--heuristic", cu_heuristic);
  cur->add_option("--k", cu_k);
  cur->add_option("--pool-size", cu_pool);

  // embed
  Common em_c;
  std::string em_input, em_update_from, em_mode = "word2vec";
  embeddings::SgConfig sg;
  auto* embed = app.add_subcommand("embed", "Train or update skip-gram embeddings");
  add_common(embed, em_c);
  embed->add_option("--input", em_input, "Plain text or sentences.tsv")->required();
  embed->add_option("--update-from", em_update_from, "Model prefix to continue training");
  embed->add_option("--mode", em_mode)->check(CLI::IsMember({"word2vec", "fasttext"}));
  embed->add_option("--dim", sg.dim);
  embed->add_option("--window", sg.window);
  embed->add_option("--negatives", sg.negatives);
  embed->add_option("--alpha", sg.alpha);
  embed->add_option("--min-count", sg.min_count);
  embed->add_option("--epochs", sg.epochs);
  embed->add_option("--buckets", sg.subword.bucket_count);

  // experiment / fewshot
  Common ex_c, fs_c;
  auto* experiment = app.add_subcommand("experiment", "Batch curriculum sweep");
  add_common(experiment, ex_c);
  auto* fewshot = app.add_subcommand("fewshot", "Few-shot nonce learning sweep");
  add_common(fewshot, fs_c);

  // eval
  auto* evalc = app.add_subcommand("eval", "Evaluation tasks");
  evalc->require_subcommand(1);
  Common ev_c;
  std::string ev_vectors, ev_task, ev_model, ev_relations, ev_sentences, ev_scores;
  std::size_t ev_folds = 10, ev_examples = 50;
  auto* sim = evalc->add_subcommand("similarity", "Spearman r on a word-similarity task");
  add_common(sim, ev_c);
  sim->add_option("--vectors", ev_vectors, "Model prefix")->required();
  sim->add_option("--task", ev_task)->required();
  auto* rel = evalc->add_subcommand("relation", "Attention ranks on relation templates");
  add_common(rel, ev_c);
  rel->add_option("--model", ev_model)->required();
  rel->add_option("--relations", ev_relations, "Relation TSV; generated when omitted");
  rel->add_option("--per-relation", ev_examples);
  auto* cv = evalc->add_subcommand("cv", "Target-grouped cross-validation of the scorer and baselines");
  add_common(cv, ev_c);
  cv->add_option("--sentences", ev_sentences)->required();
  cv->add_option("--scores", ev_scores)->required();
  cv->add_option("--folds", ev_folds);
  cv->add_option("--epochs", tcfg.epochs);
  cv->add_option("--lr", tcfg.learning_rate);
  cv->add_option("--hidden", tcfg.hidden);
  cv->add_option("--dim", st_dim);

  // report
  Common rp_c;
  std::string rp_csv;
  auto* rep = app.add_subcommand("report", "Chart a summary CSV");
  add_common(rep, rp_c);
  rep->add_option("--csv", rp_csv, "summary.csv or fewshot_summary.csv")->required();

  // synth
  Common sy_c;
  std::string sy_kind = "topic";
  auto* synth = app.add_subcommand("synth", "Write a constructed corpus with known informativeness");
  add_common(synth, sy_c);
  synth->add_option("--kind", sy_kind)->check(CLI::IsMember({"topic", "cue"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*prep) {
      fs::path base;
      const json j = config_json(prep_c, base);
      auto cfg = pipeline::parse_config(j, base);
      if (!prep_corpus.empty()) cfg.corpus = prep_corpus;
      if (!prep_targets.empty()) cfg.targets = prep_targets;
      if (prep->count("--min-len")) cfg.filter.min_len = policy.min_len;
      if (prep->count("--max-len")) cfg.filter.max_len = policy.max_len;
      if (prep->count("--min-sentences")) cfg.filter.min_sentences_per_target = policy.min_sentences_per_target;
      if (cfg.corpus.empty() || cfg.targets.empty()) throw ConfigError("prepare needs --corpus and --targets");
      const fs::path out = prep_c.out.empty() ? cfg.output : fs::path(prep_c.out);
      const auto p = pipeline::prepare(tsv::read_lines(cfg.corpus), corpus::read_targets(tsv::read_lines(cfg.targets)),
                                       cfg.filter);
      pipeline::write_prepared(out, p);
      for (const auto& [k, v] : pipeline::prepare_summary(p)) std::cout << k << '\t' << v << '\n';
    } else if (*tuples) {
      std::vector<corpus::SentenceId> ids;
      for (const auto& s : corpus::read_sentences(fs::path(ann_sentences)))
        if (s.target_pos) ids.push_back(s.id);
      const auto t = annotation::generate_tuples(ids, tuples_per_sentence, seed_or(ann_c, 1));
      auto out = tsv::open_output(need_out(ann_c));
      annotation::write_tuples(out, t);
    } else if (*aggregate) {
      const auto t = annotation::read_tuples(tsv::read_lines(fs::path(ann_tuples)));
      const auto j = annotation::read_judgments(tsv::read_lines(fs::path(ann_judgments)));
      auto out = tsv::open_output(need_out(ann_c));
      annotation::write_scores(out, annotation::aggregate(t, j));
    } else if (*repl) {
      const auto t = annotation::read_tuples(tsv::read_lines(fs::path(ann_tuples)));
      const auto j = annotation::read_judgments(tsv::read_lines(fs::path(ann_judgments)));
      const auto r = annotation::replicability(t, j, trials, seed_or(ann_c, 1));
      std::cout << "mean\t" << tsv::format_double(r.mean) << "\nvariance\t" << tsv::format_double(r.variance) << '\n';
    } else if (*score_train) {
      tcfg.seed = seed_or(st_c, 1);
      tcfg.mask_mode = st_mask == "pre" ? scorer::MaskMode::PreSoftmax : scorer::MaskMode::PostSoftmax;
      const auto data = load_labeled(st_sentences, st_scores);
      scorer::ScorerModel model;
      model.max_len = tcfg.max_len;
      model.backbone_mode = st_backbone;
      if (st_backbone == "lookup") {
        std::vector<corpus::SentenceRecord> recs;
        for (const auto& ex : data) recs.push_back(ex.sentence);
        model.lookup = scorer::LookupBackbone::build(recs, st_dim, st_min_count, derive_seed(tcfg.seed, "lookup"));
        model.params = scorer::train(data, tcfg, *model.lookup).params;
      } else {
        if (st_vectors.empty()) throw ConfigError("the ingested backbone needs --vectors");
        auto bb = scorer::IngestedBackbone::read(tsv::read_lines(fs::path(st_vectors)));
        model.params = scorer::train(data, tcfg, bb).params;
      }
      auto out = tsv::open_output(need_out(st_c));
      scorer::save_model(out, model);
    } else if (*score) {
      const auto model = scorer::load_model(tsv::read_lines(fs::path(sc_model)));
      const auto sentences = corpus::read_sentences(fs::path(sc_sentences));
      std::map<corpus::SentenceId, double> scores;
      if (model.lookup) {
        scores = pipeline::score_with_model(model, sentences);
      } else {
        if (sc_vectors.empty()) throw ConfigError("an ingested-backbone model needs --vectors");
        const auto bb = scorer::IngestedBackbone::read(tsv::read_lines(fs::path(sc_vectors)));
        scores = pipeline::score_with_model(model, sentences, &bb);
      }
      auto out = tsv::open_output(need_out(sc_c));
      pipeline::write_score_table(out, sentences, scores);
    } else if (*cur) {
      const auto sentences = corpus::read_sentences(fs::path(cu_sentences));
      const auto scores = pipeline::read_score_table(tsv::read_lines(fs::path(cu_scores)));
      const curriculum::CurriculumSpec spec{curriculum::parse_heuristic(cu_heuristic), cu_k, seed_or(cu_c, 1)};
      spec.validate(cu_pool);
      const auto pool = curriculum::build_scored_pool(pipeline::split_of(sentences).target_map, scores, cu_pool, spec.seed);
      auto out = tsv::open_output(need_out(cu_c));
      curriculum::write_curriculum(out, curriculum::build_batch_curriculum(pool, spec), spec);
    } else if (*embed) {
      sg.seed = seed_or(em_c, 1);
      sg.mode = embeddings::parse_mode(em_mode);
      sg.threads = em_c.deterministic ? 1 : em_c.threads.value_or(1);
      const auto text = read_token_file(em_input);
      const fs::path prefix = need_out(em_c);
      std::vector<embeddings::EpochLog> log;
      if (!em_update_from.empty()) {
        auto m = embeddings::load_model(em_update_from);
        log = embeddings::update_model(m, text, sg);
        embeddings::save_model(prefix, m);
      } else {
        auto t = embeddings::train_skipgram(text, sg);
        log = t.log;
        embeddings::save_model(prefix, t.model);
      }
      embeddings::write_training_log(std::cout, log);
    } else if (*experiment) {
      const auto cfg = load_with_flags(ex_c);
      const auto r = pipeline::run_experiment(cfg, cfg.output);
      std::cout << (r.skipped ? "run already complete: " : "wrote ") << cfg.output.string() << '\n';
    } else if (*fewshot) {
      const auto cfg = load_with_flags(fs_c);
      const auto r = pipeline::run_fewshot(cfg, cfg.output);
      std::cout << (r.skipped ? "run already complete: " : "wrote ") << cfg.output.string() << '\n';
    } else if (*sim) {
      const auto m = embeddings::load_model(ev_vectors);
      const auto pairs = eval::read_similarity(tsv::read_lines(fs::path(ev_task)));
      const auto r = eval::similarity_eval(m, pairs);
      std::cout << "r\t" << tsv::format_double(r.r) << "\ncoverage\t" << tsv::format_double(r.coverage) << '\n';
    } else if (*rel) {
      const auto model = scorer::load_model(tsv::read_lines(fs::path(ev_model)));
      if (!model.lookup) throw ConfigError("relation evaluation needs a lookup-backbone model");
      const auto examples = ev_relations.empty() ? synthetic::make_relation_examples(ev_examples, seed_or(ev_c, 1))
                                                 : eval::read_relations(tsv::read_lines(fs::path(ev_relations)));
      const auto rows = eval::relation_eval(model.params, *model.lookup, examples, model.max_len, seed_or(ev_c, 1));
      std::cout << "relation\tpair\trcue\trandom_pair\trandom_rcue\n";
      for (const auto& r : rows) {
        std::cout << r.relation << '\t' << tsv::format_double(r.pair.mean) << '\t' << tsv::format_double(r.rcue.mean)
                  << '\t' << tsv::format_double(r.random_pair.mean) << '\t' << tsv::format_double(r.random_rcue.mean)
                  << '\n';
      }
    } else if (*cv) {
      const auto data = load_labeled(ev_sentences, ev_scores);
      const std::uint64_t seed = seed_or(ev_c, 1);
      tcfg.seed = seed;
      std::vector<std::pair<std::string, eval::FitPredict>> models;
      models.emplace_back("Base:Avg", [](auto train, auto test) {
        const auto m = baselines::fit_baseline_avg(train);
        std::vector<double> p;
        for (const auto& ex : test) p.push_back(m.predict(ex.sentence));
        return p;
      });
      models.emplace_back("Base:Length", [](auto train, auto test) {
        const auto m = baselines::fit_baseline_length(train);
        std::vector<double> p;
        for (const auto& ex : test) p.push_back(m.predict(ex.sentence));
        return p;
      });
      models.emplace_back("Base:BOW", [](auto train, auto test) {
        const auto m = baselines::fit_baseline_bow(train);
        std::vector<double> p;
        for (const auto& ex : test) p.push_back(m.predict(ex.sentence));
        return p;
      });
      models.emplace_back("Lookup+Att", [&](auto train, auto test) {
        std::vector<corpus::SentenceRecord> recs;
        for (const auto& ex : train) recs.push_back(ex.sentence);
        auto bb = scorer::LookupBackbone::build(recs, st_dim, 1, derive_seed(seed, "lookup"));
        const auto params = scorer::train(train, tcfg, bb).params;
        std::vector<double> p;
        for (const auto& ex : test) p.push_back(scorer::predict(ex.sentence, params, bb, tcfg.max_len));
        return p;
      });
      std::ostream* out = &std::cout;
      std::ofstream file;
      if (!ev_c.out.empty()) {
        file = tsv::open_output(ev_c.out);
        out = &file;
      }
      report::write_csv_row(*out, {"model", "metric", "mean", "ci_lo", "ci_hi"});
      for (const auto& [name, fp] : models) {
        const auto r = eval::cross_validate(data, ev_folds, seed, fp);
        for (const auto& [metric, ci] : std::vector<std::pair<std::string, metrics::MeanCi>>{
                 {"rmse", r.rmse}, {"auc_bottom20", r.auc_bottom20}, {"auc_median", r.auc_median}, {"auc_top20", r.auc_top20}}) {
          report::write_csv_row(*out, {name, metric, tsv::format_double(ci.mean), tsv::format_double(ci.lo),
                                       tsv::format_double(ci.hi)});
        }
      }
    } else if (*rep) {
      const auto rows = report::read_csv(tsv::read_lines(fs::path(rp_csv)));
      if (rows.empty()) throw DataError("empty CSV: " + rp_csv);
      const auto& head = rows.front();
      auto col = [&](const std::string& name) -> std::size_t {
        const auto it = std::find(head.begin(), head.end(), name);
        if (it == head.end()) throw DataError(rp_csv + " lacks column " + name);
        return static_cast<std::size_t>(it - head.begin());
      };
      const bool few = std::find(head.begin(), head.end(), "shots") != head.end();
      const std::size_t hx = col("heuristic"), xx = col(few ? "shots" : "k"),
                        yx = col(few ? "median_of_median_rank" : "mean_r");
      std::map<std::string, report::Series> series;
      for (std::size_t i = 1; i < rows.size(); ++i) {
        auto& s = series[rows[i].at(hx)];
        s.name = rows[i].at(hx);
        s.points.emplace_back(tsv::to_double(rows[i].at(xx), "x"), tsv::to_double(rows[i].at(yx), "y"));
      }
      std::vector<report::Series> v;
      for (auto& [k, s] : series) v.push_back(std::move(s));
      auto out = tsv::open_output(need_out(rp_c));
      out << report::line_chart_svg(fs::path(rp_csv).stem().string(), few ? "shots" : "sentences per target (k)",
                                    few ? "median gold rank" : "Spearman r", v, !few);
    } else if (*synth) {
      const fs::path dir = need_out(sy_c);
      if (sy_kind == "topic") {
        synthetic::TopicWorldConfig wc;
        wc.seed = seed_or(sy_c, wc.seed);
        const auto w = synthetic::make_topic_world(wc);
        auto corpus_out = tsv::open_output(dir / "corpus.txt");
        for (const auto& l : w.lines) corpus_out << l << '\n';
        auto targets_out = tsv::open_output(dir / "targets.txt");
        for (const auto& t : w.targets) targets_out << t << '\n';
        auto scores_out = tsv::open_output(dir / "scores.tsv");
        for (const auto& [id, s] : w.scores) scores_out << id << '\t' << tsv::format_double(s) << '\n';
        auto sim_out = tsv::open_output(dir / "similarity.tsv");
        for (const auto& p : w.similarity)
          sim_out << p.word_a << '\t' << p.word_b << '\t' << tsv::format_double(p.human_score) << '\n';
      } else {
        const auto data = synthetic::make_cue_task(2000, seed_or(sy_c, 1));
        std::vector<corpus::SentenceRecord> recs;
        auto scores_out = tsv::open_output(dir / "scores.tsv");
        for (const auto& ex : data) {
          recs.push_back(ex.sentence);
          scores_out << ex.sentence.id << '\t' << tsv::format_double(ex.score) << '\n';
        }
        auto sentences_out = tsv::open_output(dir / "sentences.tsv");
        corpus::write_sentences(sentences_out, recs);
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
