#include "analogion/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "analogion/digest.hpp"
#include "analogion/errors.hpp"
#include "analogion/report_io.hpp"
#include "analogion/text.hpp"
#include "json.hpp"

namespace analogion {

namespace fs = std::filesystem;
using nlohmann::json;

// --- config -------------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

std::string slurp(const fs::path& path) { return read_file(path.string()); }

TrainConfig train_config_from(const json& j, std::uint64_t seed) {
  json copy = j;
  copy.erase("name");
  if (!copy.contains("seed")) copy["seed"] = seed;
  return TrainConfig::from_json(copy.dump());
}

std::string default_model_name(const TrainConfig& t) {
  std::string name(to_string(t.objective));
  if (t.extra_layer) name += "_single_layer";
  return name;
}

}  // namespace

PipelineConfig PipelineConfig::from_json(std::string_view text, const fs::path& base_dir,
                                         std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  PipelineConfig c;
  c.base_dir = base_dir;
  c.raw_json = text;
  try {
    if (seed_override) {
      c.seed = *seed_override;
    } else if (j.contains("seed")) {
      c.seed = j["seed"].get<std::uint64_t>();
    } else {
      throw ConfigError("config must set a seed");
    }
    c.k = j.value("k", 10);
    if (c.k < 2) throw ConfigError("k must be at least 2");
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
    if (j.contains("data")) {
      const auto& d = j["data"];
      for (const char* key : {"sat", "u2", "u4", "scan"})
        if (d.contains(key)) c.sources[key] = resolve(base_dir, d[key].get<std::string>());
      if (d.contains("distractor")) c.distractor = resolve(base_dir, d["distractor"].get<std::string>());
      if (d.contains("frequency")) c.frequency = resolve(base_dir, d["frequency"].get<std::string>());
      if (d.contains("wordsim"))
        for (const auto& [name, path] : d["wordsim"].items())
          c.wordsim.emplace_back(name, resolve(base_dir, path.get<std::string>()));
    }
    if (j.contains("baselines") && j["baselines"].contains("static_vectors"))
      c.static_vectors = resolve(base_dir, j["baselines"]["static_vectors"].get<std::string>());
    std::vector<json> model_json;
    if (j.contains("models"))
      for (const auto& m : j["models"]) model_json.push_back(m);
    else if (j.contains("train"))
      model_json.push_back(j["train"]);
    std::set<std::string> names;
    for (const auto& m : model_json) {
      ModelSpec spec;
      spec.train = train_config_from(m, c.seed);
      spec.name = m.value("name", default_model_name(spec.train));
      if (!names.insert(spec.name).second) throw ConfigError("duplicate model name '" + spec.name + "'");
      c.models.push_back(std::move(spec));
    }
    if (j.contains("evaluation")) {
      const auto& e = j["evaluation"];
      c.evaluation.threshold = e.value("threshold", 0.0);
      c.evaluation.calibrate_threshold = e.value("calibrate_threshold", false);
      const auto mode = e.value("aggregate", std::string("micro"));
      if (mode != "micro" && mode != "macro") throw ConfigError("aggregate must be micro or macro");
      c.evaluation.aggregate = mode == "micro" ? AggregateMode::micro : AggregateMode::macro;
      if (e.contains("protocols")) {
        const auto& p = e["protocols"];
        c.evaluation.classification = p.value("classification", true);
        c.evaluation.ranking = p.value("ranking", true);
        c.evaluation.distractor = p.value("distractor", true);
        c.evaluation.wordsim = p.value("wordsim", true);
        c.evaluation.frequency = p.value("frequency", true);
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  for (const auto& m : c.models) m.train.validate();
  return c;
}

PipelineConfig PipelineConfig::load(const fs::path& path, std::optional<std::uint64_t> seed_override) {
  if (!fs::exists(path)) throw ConfigError("config file '" + path.string() + "' not found");
  auto c = from_json(slurp(path), fs::absolute(path).parent_path(), seed_override);
  c.validate();
  return c;
}

void PipelineConfig::validate() const {
  std::vector<fs::path> paths;
  for (const auto& [_, p] : sources) paths.push_back(p);
  if (distractor) paths.push_back(*distractor);
  if (frequency) paths.push_back(*frequency);
  if (static_vectors) paths.push_back(*static_vectors);
  for (const auto& [_, p] : wordsim) paths.push_back(p);
  for (const auto& p : paths)
    if (!fs::exists(p)) throw ConfigError("referenced file '" + p.string() + "' does not exist");
}

fs::path PipelineConfig::run_dir(const std::string& model, int fold) const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "fold_%02d", fold);
  return output_dir / "runs" / model / buf;
}

std::vector<int> parse_fold_spec(std::string_view spec, int k) {
  std::vector<int> folds;
  const auto s = text::normalize_space(spec);
  if (s.empty() || s == "all") {
    for (int f = 0; f < k; ++f) folds.push_back(f);
    return folds;
  }
  auto parse_int = [&](const std::string& x) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(x, &used);
      if (used != x.size()) throw std::invalid_argument(x);
      return v;
    } catch (const std::exception&) {
      throw ConfigError("bad fold spec '" + std::string(spec) + "'");
    }
  };
  for (const auto& part : text::split(s, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      folds.push_back(parse_int(part));
    } else {
      const int lo = parse_int(part.substr(0, dots));
      const int hi = parse_int(part.substr(dots + 2));
      if (hi < lo) throw ConfigError("bad fold range '" + part + "'");
      for (int f = lo; f <= hi; ++f) folds.push_back(f);
    }
  }
  std::sort(folds.begin(), folds.end());
  folds.erase(std::unique(folds.begin(), folds.end()), folds.end());
  for (int f : folds)
    if (f < 0 || f >= k) throw ConfigError("fold " + std::to_string(f) + " outside 0.." + std::to_string(k - 1));
  return folds;
}

// --- manifest -------------------------------------------------------------------------

std::string Manifest::to_json() const {
  json j;
  j["tool"] = "analogion";
  j["version"] = kToolVersion;
  j["command"] = command;
  j["files"] = files;
  j["volatile_files"] = volatile_files;
  try {
    j["config"] = json::parse(config_snapshot);
  } catch (const json::exception&) {
    j["config"] = config_snapshot;
  }
  return j.dump(2) + "\n";
}

void Manifest::add(const fs::path& output_dir, const fs::path& file, bool is_volatile) {
  const auto rel = fs::relative(file, output_dir).generic_string();
  files[rel] = sha256_hex(slurp(file));
  if (is_volatile) volatile_files.push_back(rel);
}

void Manifest::write(const fs::path& output_dir) const {
  write_text(output_dir / "manifests" / (command + ".json"), to_json());
}

// --- prepare-data ------------------------------------------------------------------------

std::vector<SourceSummary> summarize_corpus(const BalancedCorpus& corpus, const EmbeddingBackend* backend,
                                            const FrequencyTable* freq) {
  std::vector<SourceSummary> rows;
  for (Source src : {Source::SCAN, Source::SAT, Source::U2, Source::U4}) {
    auto it = corpus.per_source_counts.find(src);
    if (it == corpus.per_source_counts.end()) continue;
    SourceSummary row{src, it->second, {}, {}, "", ""};
    std::set<std::string> entities;
    for (std::size_t i = 0; i < corpus.quads.size(); ++i) {
      const auto& q = corpus.quads[i];
      if (q.source != src) continue;
      for (const auto* t : q.terms()) entities.insert(text::normalize_space(*t));
      if (row.example_positive.empty() && q.label) {
        const auto& n = corpus.quads[corpus.negative_of[i]];
        row.example_positive = q.a + ":" + q.b + "::" + q.c + ":" + q.d;
        row.example_negative = n.a + ":" + n.b + "::" + n.c + ":" + n.d;
      }
    }
    if (backend && !entities.empty()) {
      std::size_t oov = 0;
      for (const auto& e : entities) oov += backend->is_oov(e);
      row.percent_oov = 100.0 * static_cast<double>(oov) / static_cast<double>(entities.size());
    }
    if (freq) {
      double sum = 0.0;
      std::size_t known = 0;
      for (const auto& e : entities)
        if (auto f = freq->lookup(e)) {
          sum += static_cast<double>(*f);
          ++known;
        }
      if (known) row.mean_frequency = sum / static_cast<double>(known);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string data_summary_markdown(const std::vector<SourceSummary>& rows) {
  std::ostringstream out;
  out << "| Source | n | Positive | Negative | Example positive | Example negative | % OOV | Mean frequency |\n"
      << "|---|---|---|---|---|---|---|---|\n";
  SourceCounts total;
  for (const auto& r : rows) {
    char oov[32] = "-", freq[32] = "-";
    if (r.percent_oov) std::snprintf(oov, sizeof oov, "%.1f%%", *r.percent_oov);
    if (r.mean_frequency) std::snprintf(freq, sizeof freq, "%.0f", *r.mean_frequency);
    out << "| " << to_string(r.source) << " | " << r.counts.total() << " | " << r.counts.positives << " | "
        << r.counts.negatives << " | " << r.example_positive << " | " << r.example_negative << " | " << oov << " | "
        << freq << " |\n";
    total.positives += r.counts.positives;
    total.negatives += r.counts.negatives;
  }
  out << "| TOTAL | " << total.total() << " | " << total.positives << " | " << total.negatives << " | | | | |\n";
  return out.str();
}

namespace {

std::unique_ptr<ContextualBackend> analysis_backend(const PipelineConfig& config) {
  if (config.models.empty()) return nullptr;
  return make_contextual_backend(config.models.front().train.backbone_id);
}

std::optional<FrequencyTable> load_frequency(const PipelineConfig& config) {
  if (!config.frequency) return std::nullopt;
  return FrequencyTable::load_file(config.frequency->string());
}

}  // namespace

Manifest cmd_prepare_data(const PipelineConfig& config, std::ostream& log) {
  CorpusSourceText text_in;
  for (const auto& [key, target] : std::vector<std::pair<std::string, std::string*>>{
           {"sat", &text_in.sat}, {"u2", &text_in.u2}, {"u4", &text_in.u4}, {"scan", &text_in.scan}}) {
    auto it = config.sources.find(key);
    if (it == config.sources.end()) {
      log << "warning: no '" << key << "' source configured; it contributes no quads\n";
      continue;
    }
    *target = slurp(it->second);
  }
  auto prepared = prepare_corpus(text_in, config.seed, config.k);
  for (const auto& w : prepared.folds.warnings) log << "warning: " << w << '\n';
  if (prepared.u4_removed_as_u2_duplicates)
    log << "removed " << prepared.u4_removed_as_u2_duplicates << " U4 quads duplicated in U2\n";
  if (prepared.scan_duplicate_positives)
    log << "dropped " << prepared.scan_duplicate_positives << " duplicate SCAN positives\n";

  fs::create_directories(config.output_dir);
  Manifest manifest;
  manifest.command = "prepare-data";
  manifest.config_snapshot = config.raw_json;
  {
    std::ostringstream tsv;
    write_corpus_tsv(prepared.corpus, tsv);
    write_text(config.corpus_path(), tsv.str());
    manifest.add(config.output_dir, config.corpus_path());
  }
  write_text(config.folds_path(), folds_to_json(prepared.folds));
  manifest.add(config.output_dir, config.folds_path());

  std::unique_ptr<ContextualBackend> backend;
  try {
    backend = analysis_backend(config);
  } catch (const ConfigError& e) {
    log << "warning: no OOV summary (" << e.what() << ")\n";
  }
  const auto freq = load_frequency(config);
  const auto summary = summarize_corpus(prepared.corpus, backend.get(), freq ? &*freq : nullptr);
  const auto md = data_summary_markdown(summary);
  write_text(config.output_dir / "data_summary.md", md);
  manifest.add(config.output_dir, config.output_dir / "data_summary.md");
  log << md;
  manifest.write(config.output_dir);
  return manifest;
}

std::pair<BalancedCorpus, FoldSplit> load_prepared(const PipelineConfig& config) {
  if (!fs::exists(config.corpus_path()) || !fs::exists(config.folds_path()))
    throw UserError("prepared corpus not found in '" + config.output_dir.string() + "'; run prepare-data first");
  std::istringstream in(slurp(config.corpus_path()));
  auto corpus = read_corpus_tsv(in);
  auto folds = folds_from_json(slurp(config.folds_path()), corpus.quads.size());
  if (folds.k != config.k)
    throw ConfigError("fold file has k=" + std::to_string(folds.k) + " but config says k=" + std::to_string(config.k));
  return {std::move(corpus), std::move(folds)};
}

// --- train -----------------------------------------------------------------------------

Manifest cmd_train(const PipelineConfig& config, const RunOptions& options, std::ostream& log) {
  if (config.models.empty()) throw ConfigError("config defines no model to train");
  auto [corpus, folds] = load_prepared(config);
  const auto fold_list = options.folds.empty() ? parse_fold_spec("all", config.k) : options.folds;

  struct Job {
    const ModelSpec* model;
    int fold;
  };
  std::vector<Job> jobs;
  for (const auto& m : config.models)
    for (int f : fold_list) {
      if (!options.force && fs::exists(config.run_dir(m.name, f) / "metrics.json")) {
        log << m.name << " fold " << f << ": already complete, skipped\n";
        continue;
      }
      jobs.push_back({&m, f});
    }

  std::mutex log_mutex;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const auto& job = jobs[i];
        const auto dir = config.run_dir(job.model->name, job.fold);
        fs::remove_all(dir);
        const auto artifact = train_fold(corpus, folds, job.fold, job.model->train);
        save_artifact(artifact, dir.string());
        std::lock_guard lock(log_mutex);
        log << job.model->name << " fold " << job.fold << ": " << artifact.log.size() << " steps, final epoch loss "
            << (artifact.epoch_mean_loss.empty() ? 0.0 : artifact.epoch_mean_loss.back()) << '\n';
      } catch (...) {
        std::lock_guard lock(log_mutex);
        if (!failure) failure = std::current_exception();
        next = jobs.size();
      }
    }
  };
  const int n_threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(jobs.size())));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  Manifest manifest;
  manifest.command = "train";
  manifest.config_snapshot = config.raw_json;
  for (const auto& m : config.models)
    for (int f : fold_list) {
      const auto dir = config.run_dir(m.name, f);
      for (const char* file : {"config.json", "train_log.jsonl", "params.bin", "metrics.json"})
        manifest.add(config.output_dir, dir / file);
      manifest.add(config.output_dir, dir / "timing.json", true);
    }
  manifest.write(config.output_dir);
  return manifest;
}

// --- evaluate --------------------------------------------------------------------------

namespace {

struct ProtocolSelection {
  bool heldout = false;
  bool distractor = false;
  bool wordsim = false;
  bool frequency = false;
};

std::string freq_to_json(const FrequencyBreakdown& f) {
  json j;
  for (const auto& [k, c] : f.cells) j["cells"][k] = {{"mean", c.mean()}, {"count", c.count}};
  j["excluded_quads"] = f.excluded_quads;
  j["unknown_terms"] = f.unknown_terms;
  return j.dump(2) + "\n";
}

std::string oov_to_json(const OovBreakdown& o) {
  json j;
  for (const auto& [k, c] : o.cells)
    j["cells"][k] = {{"accuracy", c.accuracy()}, {"correct", c.correct}, {"total", c.total}};
  j["no_oov_quads"] = o.no_oov_quads;
  j["oov_quads"] = o.oov_quads;
  j["warnings"] = o.warnings;
  return j.dump(2) + "\n";
}

// Folds of a small corpus can miss a category; give every run the union of
// cell keys so they can be pooled.
std::vector<EvaluationReport> pad_to_union(std::vector<EvaluationReport> reports) {
  std::set<std::string> keys;
  for (const auto& r : reports)
    for (const auto& [k, _] : r.cells) keys.insert(k);
  for (auto& r : reports)
    for (const auto& k : keys) r.cells.try_emplace(k);
  return reports;
}

std::vector<const AnalogyQuad*> rows_to_quads(const BalancedCorpus& corpus, const std::vector<std::size_t>& rows) {
  std::vector<const AnalogyQuad*> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(&corpus.quads[r]);
  return out;
}

class Evaluator {
 public:
  Evaluator(const PipelineConfig& config, const RunOptions& options, std::ostream& log, ProtocolSelection protocols,
            std::string command)
      : config_(config), options_(options), log_(log), protocols_(protocols) {
    manifest_.command = std::move(command);
    manifest_.config_snapshot = config.raw_json;
  }

  Manifest run() {
    auto [corpus, folds] = load_prepared(config_);
    corpus_ = std::move(corpus);
    folds_ = std::move(folds);
    fold_list_ = options_.folds.empty() ? parse_fold_spec("all", config_.k) : options_.folds;
    load_auxiliary();

    if (static_) evaluate_static();
    for (const auto& m : config_.models) evaluate_model(m);
    write_tables();
    manifest_.write(config_.output_dir);
    return manifest_;
  }

 private:
  void load_auxiliary() {
    if (protocols_.distractor) {
      if (config_.distractor)
        distractor_items_ = parse_distractor_csv(slurp(*config_.distractor));
      else
        log_ << "warning: no distractor data configured; distractor protocol skipped\n";
    }
    if (protocols_.wordsim) {
      if (config_.wordsim.empty()) log_ << "warning: no word-similarity data configured; protocol skipped\n";
      for (const auto& [name, path] : config_.wordsim) wordsim_.emplace_back(name, parse_wordsim_csv(slurp(path)));
    }
    if (protocols_.frequency) {
      if (config_.frequency)
        freq_ = FrequencyTable::load_file(config_.frequency->string());
      else
        log_ << "warning: no frequency table configured; frequency/OOV reports skipped\n";
    }
    if (config_.static_vectors) static_ = std::make_unique<StaticBackend>(StaticBackend::load_file(config_.static_vectors->string()));
  }

  fs::path dir_for(const std::string& name) const { return config_.reports_dir() / name; }

  void emit(const fs::path& path, const std::string& content) {
    write_text(path, content);
    manifest_.add(config_.output_dir, path);
  }

  double threshold_for(const ScoringModel& model, int fold) const {
    if (!config_.evaluation.calibrate_threshold) return config_.evaluation.threshold;
    const auto train = rows_to_quads(corpus_, folds_.rows_outside_fold(fold));
    return calibrate_threshold(score_quads(model, train, 0.0));
  }

  // Scores each fold's held-out split; models[f] scores fold f.
  void heldout_reports(const std::string& name, const std::vector<ScoringModel>& models,
                       std::vector<ScoredQuad>* all_scored, const EvaluationReport* cls_baseline,
                       const EvaluationReport* rank_baseline, EvaluationReport* cls_out, EvaluationReport* rank_out) {
    std::vector<EvaluationReport> cls, rank;
    std::vector<ScoredQuad> scored_all;
    for (std::size_t i = 0; i < fold_list_.size(); ++i) {
      const int f = fold_list_[i];
      const auto heldout = rows_to_quads(corpus_, folds_.rows_in_fold(f));
      if (heldout.empty()) throw ValidationError("held-out fold " + std::to_string(f) + " is empty");
      auto scored = score_quads(models[i], heldout, threshold_for(models[i], f), f, name);
      cls.push_back(classification_report(scored));
      rank.push_back(ranking_report(scored));
      scored_all.insert(scored_all.end(), scored.begin(), scored.end());
    }
    auto cls_agg = aggregate_runs(pad_to_union(std::move(cls)));
    auto rank_agg = aggregate_runs(pad_to_union(std::move(rank)));
    cls_agg.meta["model"] = rank_agg.meta["model"] = name;
    if (cls_baseline) compare_to_baseline(cls_agg, *cls_baseline);
    if (rank_baseline) compare_to_baseline(rank_agg, *rank_baseline);
    const auto dir = dir_for(name);
    emit(dir / "scores.tsv", scored_quads_tsv(scored_all));
    if (config_.evaluation.classification) emit(dir / "classification.json", report_to_json(cls_agg));
    if (config_.evaluation.ranking) emit(dir / "ranking.json", report_to_json(rank_agg));
    if (all_scored) *all_scored = std::move(scored_all);
    if (cls_out) *cls_out = std::move(cls_agg);
    if (rank_out) *rank_out = std::move(rank_agg);
  }

  EvaluationReport distractor_reports(const std::string& name, const std::vector<ScoringModel>& models,
                                      const EvaluationReport* baseline) {
    std::vector<EvaluationReport> per_fold;
    std::ostringstream dump;
    dump.precision(17);
    dump << "fold\ta\tb\tc\td_correct\td_distractor\tscore_correct\tscore_distractor\tcorrect\n";
    for (std::size_t i = 0; i < models.size(); ++i) {
      const auto outcomes = score_distractor_items(models[i], distractor_items_);
      per_fold.push_back(distractor_report(outcomes));
      for (const auto& o : outcomes)
        dump << fold_list_[i] << '\t' << o.item.a << '\t' << o.item.b << '\t' << o.item.c << '\t' << o.item.d_correct
             << '\t' << o.item.d_distractor << '\t' << o.score_correct << '\t' << o.score_distractor << '\t'
             << (o.correct ? 1 : 0) << '\n';
    }
    auto agg = aggregate_runs(pad_to_union(std::move(per_fold)));
    agg.meta["model"] = name;
    if (baseline) compare_to_baseline(agg, *baseline);
    emit(dir_for(name) / "distractor.json", report_to_json(agg));
    emit(dir_for(name) / "distractor_scores.tsv", dump.str());
    return agg;
  }

  void wordsim_reports(const std::string& name, const std::vector<const EmbeddingBackend*>& backends) {
    json j;
    for (const auto& [dataset, pairs] : wordsim_) {
      std::vector<double> rhos;
      std::size_t n = 0, skipped = 0;
      for (const auto* b : backends) {
        const auto r = evaluate_wordsim(*b, pairs);
        rhos.push_back(r.rho);
        n = r.n;
        skipped = r.skipped.size();
      }
      double mean = 0.0;
      for (double r : rhos) mean += r;
      mean /= static_cast<double>(rhos.size());
      j["datasets"][dataset] = {{"rho", mean}, {"per_run", rhos}, {"n", n}, {"skipped", skipped}};
    }
    j["model"] = name;
    emit(dir_for(name) / "wordsim.json", j.dump(2) + "\n");
  }

  std::vector<ScoringModel> replicate(const ScoringModel& m) const { return std::vector<ScoringModel>(fold_list_.size(), m); }

  void evaluate_static() {
    const ScoringModel model{static_.get(), ObjectiveKind::offset_ab, "fasttext"};
    if (protocols_.heldout) heldout_reports("fasttext", replicate(model), nullptr, nullptr, nullptr, nullptr, nullptr);
    if (protocols_.distractor && !distractor_items_.empty()) distractor_reports("fasttext", replicate(model), nullptr);
    if (protocols_.wordsim && !wordsim_.empty()) wordsim_reports("fasttext", {static_.get()});
  }

  void evaluate_model(const ModelSpec& spec) {
    std::vector<std::unique_ptr<ContextualBackend>> tuned;
    for (int f : fold_list_) {
      const auto params_path = config_.run_dir(spec.name, f) / "params.bin";
      if (!fs::exists(config_.run_dir(spec.name, f) / "metrics.json"))
        throw UserError("artifacts for model '" + spec.name + "' fold " + std::to_string(f) +
                        " are incomplete; run train first");
      tuned.push_back(load_trained_backend(spec.train, load_params(params_path.string())));
    }
    const bool offset = spec.train.objective != ObjectiveKind::simple_classifier;
    std::unique_ptr<ContextualBackend> base;
    if (offset) base = backend_factory_for(spec.train)();
    const std::string base_name = spec.name + "__nontuned";

    std::vector<ScoringModel> tuned_models, base_models;
    for (const auto& t : tuned) tuned_models.push_back({t.get(), spec.train.objective, spec.name});
    if (base) base_models = replicate({base.get(), spec.train.objective, base_name});

    if (protocols_.heldout) {
      EvaluationReport base_cls, base_rank;
      std::vector<ScoredQuad> base_scored, tuned_scored;
      if (base) heldout_reports(base_name, base_models, &base_scored, nullptr, nullptr, &base_cls, &base_rank);
      EvaluationReport cls, rank;
      heldout_reports(spec.name, tuned_models, &tuned_scored, base ? &base_cls : nullptr, base ? &base_rank : nullptr,
                      &cls, &rank);
      log_ << spec.name << ": classification " << cls.cells["OVERALL/all"].accuracy() << ", ranking "
           << rank.cells["OVERALL/all"].accuracy() << '\n';
      if (freq_ && base) {
        const auto before_f = frequency_breakdown(base_scored, *freq_);
        const auto after_f = frequency_breakdown(tuned_scored, *freq_);
        const auto before_o = oov_breakdown(base_scored, *base);
        const auto after_o = oov_breakdown(tuned_scored, *base);
        emit(dir_for(base_name) / "frequency.json", freq_to_json(before_f));
        emit(dir_for(spec.name) / "frequency.json", freq_to_json(after_f));
        emit(dir_for(base_name) / "oov.json", oov_to_json(before_o));
        emit(dir_for(spec.name) / "oov.json", oov_to_json(after_o));
        emit(dir_for(spec.name) / "frequency_oov.md",
             frequency_table_markdown("Mean entity frequency by true label and prediction (" + spec.name + ")",
                                      before_f, &after_f) +
                 "\n" +
                 oov_table_markdown("Accuracy by OOV status (" + spec.name + ")", before_o, &after_o));
      }
    }
    if (protocols_.distractor && !distractor_items_.empty()) {
      EvaluationReport base_rep;
      if (base) base_rep = distractor_reports(base_name, base_models, nullptr);
      distractor_reports(spec.name, tuned_models, base ? &base_rep : nullptr);
    }
    if (protocols_.wordsim && !wordsim_.empty()) {
      if (base) wordsim_reports(base_name, {base.get()});
      std::vector<const EmbeddingBackend*> views;
      for (const auto& t : tuned) views.push_back(t.get());
      wordsim_reports(spec.name, views);
    }
  }

  void write_tables() {
    Manifest scratch;
    const auto md = cmd_report_tables(config_);
    emit(config_.reports_dir() / "tables.md", md);
  }

 public:
  static std::string cmd_report_tables(const PipelineConfig& config);

 private:
  const PipelineConfig& config_;
  const RunOptions& options_;
  std::ostream& log_;
  ProtocolSelection protocols_;
  Manifest manifest_;
  BalancedCorpus corpus_;
  FoldSplit folds_;
  std::vector<int> fold_list_;
  std::vector<DistractorItem> distractor_items_;
  std::vector<std::pair<std::string, std::vector<WordSimPair>>> wordsim_;
  std::optional<FrequencyTable> freq_;
  std::unique_ptr<StaticBackend> static_;
};

std::string Evaluator::cmd_report_tables(const PipelineConfig& config) {
  const auto dir = config.reports_dir();
  std::vector<std::pair<std::string, std::string>> models;  // (dir name, display name)
  if (fs::exists(dir / "fasttext")) models.emplace_back("fasttext", "FastText");
  for (const auto& m : config.models) {
    if (fs::exists(dir / (m.name + "__nontuned"))) models.emplace_back(m.name + "__nontuned", m.name + " non-tuned");
    if (fs::exists(dir / m.name)) models.emplace_back(m.name, m.name);
  }
  std::ostringstream out;
  out << "# Results\n\n";
  for (const auto& [file, title] : std::vector<std::pair<std::string, std::string>>{
           {"classification.json", "Accuracy on analogy classification"},
           {"ranking.json", "Accuracy on analogy ranking"},
           {"distractor.json", "Accuracy on distractor items"}}) {
    std::vector<EvaluationReport> reports;
    std::vector<std::string> names;
    for (const auto& [name, display] : models) {
      const auto path = dir / name / file;
      if (!fs::exists(path)) continue;
      reports.push_back(report_from_json(slurp(path)));
      names.push_back(display);
    }
    if (reports.empty()) continue;
    std::vector<NamedReport> named;
    for (std::size_t i = 0; i < reports.size(); ++i) named.emplace_back(names[i], &reports[i]);
    if (file == std::string("classification.json"))
      out << classification_table_markdown(title, named, config.evaluation.aggregate);
    else if (file == std::string("ranking.json"))
      out << ranking_table_markdown(title, named, config.evaluation.aggregate);
    else
      out << distractor_table_markdown(title, named, config.evaluation.aggregate);
    out << '\n';
  }
  std::map<std::string, WordSimRow> ws;
  std::vector<std::string> ws_order;
  for (const auto& [name, display] : models) {
    const auto path = dir / name / "wordsim.json";
    if (!fs::exists(path)) continue;
    const auto j = json::parse(slurp(path));
    for (const auto& [dataset, v] : j["datasets"].items()) {
      if (!ws.count(dataset)) {
        ws_order.push_back(dataset);
        ws[dataset].dataset = dataset;
      }
      ws[dataset].rho_by_model.emplace_back(display, v["rho"].get<double>());
    }
  }
  if (!ws.empty()) {
    std::vector<WordSimRow> rows;
    for (const auto& d : ws_order) rows.push_back(ws[d]);
    out << wordsim_table_markdown(rows) << '\n';
  }
  for (const auto& m : config.models) {
    const auto path = dir / m.name / "frequency_oov.md";
    if (fs::exists(path)) out << slurp(path) << '\n';
  }
  return out.str();
}

}  // namespace

Manifest cmd_evaluate(const PipelineConfig& config, const RunOptions& options, std::ostream& log) {
  return Evaluator(config, options, log, {true, config.evaluation.distractor, config.evaluation.wordsim,
                                          config.evaluation.frequency},
                   "evaluate")
      .run();
}

Manifest cmd_distractor_eval(const PipelineConfig& config, const RunOptions& options, std::ostream& log) {
  if (!config.distractor) throw ConfigError("distractor-eval needs data.distractor in the config");
  return Evaluator(config, options, log, {false, true, false, false}, "distractor-eval").run();
}

Manifest cmd_wordsim_eval(const PipelineConfig& config, const RunOptions& options, std::ostream& log) {
  if (config.wordsim.empty()) throw ConfigError("wordsim-eval needs data.wordsim in the config");
  return Evaluator(config, options, log, {false, false, true, false}, "wordsim-eval").run();
}

Manifest cmd_report(const PipelineConfig& config, std::ostream& log) {
  Manifest manifest;
  manifest.command = "report";
  manifest.config_snapshot = config.raw_json;
  const auto path = config.reports_dir() / "tables.md";
  const auto md = Evaluator::cmd_report_tables(config);
  write_text(path, md);
  manifest.add(config.output_dir, path);
  manifest.write(config.output_dir);
  log << md;
  return manifest;
}

// --- freq-analysis ----------------------------------------------------------------------

Manifest cmd_freq_analysis(const PipelineConfig& config, std::ostream& log) {
  if (!config.frequency) throw UserError("freq-analysis needs data.frequency (word<TAB>count table) in the config");
  const auto freq = FrequencyTable::load_file(config.frequency->string());
  auto [corpus, folds] = load_prepared(config);
  auto backend = analysis_backend(config);
  if (!backend) throw ConfigError("freq-analysis needs a model backbone to tokenize entities");

  Manifest manifest;
  manifest.command = "freq-analysis";
  manifest.config_snapshot = config.raw_json;
  const auto dir = config.output_dir / "analysis";
  auto emit = [&](const fs::path& p, const std::string& content) {
    write_text(p, content);
    manifest.add(config.output_dir, p);
  };

  std::set<std::string> unique;
  for (const auto& q : corpus.quads)
    for (const auto* t : q.terms()) unique.insert(text::normalize_space(*t));
  const std::vector<std::string> words(unique.begin(), unique.end());
  std::vector<double> edges;
  for (int i = 0; i <= 20; ++i) edges.push_back(5000.0 * i);
  const auto hist = frequency_histogram(words, freq, *backend, edges);
  emit(dir / "frequency_histogram.csv", histogram_csv(hist));
  log << "histogram: " << words.size() << " entities, " << hist.unknown << " without frequency, " << hist.above_limit
      << " at or above 100000\n";

  emit(dir / "data_summary.md", data_summary_markdown(summarize_corpus(corpus, backend.get(), &freq)));

  for (const auto& m : config.models) {
    const auto after_path = config.reports_dir() / m.name / "scores.tsv";
    const auto before_path = config.reports_dir() / (m.name + "__nontuned") / "scores.tsv";
    const bool has_after = fs::exists(after_path);
    const bool has_before = fs::exists(before_path);
    if (!has_after && !has_before) {
      log << "warning: no dumped scores for " << m.name << "; run evaluate for per-dataset breakdowns\n";
      continue;
    }
    const auto after = has_after ? scored_quads_from_tsv(slurp(after_path), corpus) : std::vector<ScoredQuad>{};
    const auto before = has_before ? scored_quads_from_tsv(slurp(before_path), corpus) : std::vector<ScoredQuad>{};
    const auto& first = has_before ? before : after;
    const auto* second = has_before && has_after ? &after : nullptr;
    std::ostringstream md;
    for (Source src : {Source::SCAN, Source::SAT, Source::U2, Source::U4}) {
      auto filter = [&](const std::vector<ScoredQuad>& all) {
        std::vector<ScoredQuad> out;
        for (const auto& s : all)
          if (s.quad.source == src) out.push_back(s);
        return out;
      };
      const auto f1 = filter(first);
      if (f1.empty()) continue;
      const std::string label(to_string(src));
      const auto freq1 = frequency_breakdown(f1, freq);
      const auto oov1 = oov_breakdown(f1, *backend);
      if (second) {
        const auto f2 = filter(*second);
        const auto freq2 = frequency_breakdown(f2, freq);
        const auto oov2 = oov_breakdown(f2, *backend);
        md << frequency_table_markdown(label + ": mean entity frequency before(B)/after(A) fine tuning (" + m.name + ")",
                                       freq1, &freq2)
           << '\n'
           << oov_table_markdown(label + ": accuracy by OOV status before(B)/after(A) fine tuning (" + m.name + ")",
                                 oov1, &oov2)
           << '\n';
      } else {
        md << frequency_table_markdown(label + ": mean entity frequency (" + m.name + ")", freq1, nullptr) << '\n'
           << oov_table_markdown(label + ": accuracy by OOV status (" + m.name + ")", oov1, nullptr) << '\n';
      }
    }
    emit(dir / (m.name + "_per_dataset.md"), md.str());
  }
  manifest.write(config.output_dir);
  return manifest;
}

}  // namespace analogion
