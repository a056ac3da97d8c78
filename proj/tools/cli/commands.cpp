#include "commands.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "manifest.hpp"
#include "metsfuse/cohort/io.hpp"
#include "metsfuse/cohort/labeler.hpp"
#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"
#include "metsfuse/synth/generator.hpp"
#include "run_config.hpp"

#ifndef METSFUSE_VERSION
#define METSFUSE_VERSION "0.0.0"
#endif

namespace metsfuse::cli {

namespace fs = std::filesystem;
using cohort::DailyRecord;

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_text(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

/// Output directory of one command and its manifest.
class Run {
 public:
  Run(const GlobalOptions& g, std::string command, const std::string& out, const nlohmann::json& config,
      std::uint64_t seed)
      : clock_(g.frozen_clock), dir_(out) {
    if (out.empty()) throw ConfigError(fmt::format("{}: --out is required", command));
    fs::create_directories(dir_);
    manifest_.command = std::move(command);
    manifest_.tool_version = METSFUSE_VERSION;
    manifest_.seed = seed;
    manifest_.config = config;
    manifest_.started_at = clock_.now();
  }

  fs::path path(const std::string& name) const { return dir_ / name; }
  void input(const fs::path& p) { manifest_.add_input(p); }

  void write_text(const std::string& name, const std::string& text) const {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path(name).string()));
    out << text;
    if (!out) throw DataError(fmt::format("write failed: {}", path(name).string()));
  }
  void write_json(const std::string& name, const nlohmann::json& j) const { write_text(name, j.dump(2) + "\n"); }

  void finish() {
    manifest_.finished_at = clock_.now();
    manifest_.write(dir_);
    logger()->info("{}: wrote {} files to {} (run {})", manifest_.command, manifest_.outputs.size(), dir_.string(),
                   manifest_.run_id());
  }

 private:
  Clock clock_;
  fs::path dir_;
  RunManifest manifest_;
};

RunConfig load_config(const GlobalOptions& g) {
  RunConfig c = g.config.empty() ? RunConfig{} : RunConfig::read(g.config);
  if (g.seed) c.set_seed(*g.seed);
  return c;
}

void apply(RunConfig& c, const TrainingOverrides& o) {
  if (o.arch) c.architecture = models::parse_architecture(*o.arch);
  if (o.epochs) c.hp.max_epochs = *o.epochs;
  c.hp = models::effective(c.architecture, c.hp);
  c.hp.validate();
}

nlohmann::json labels_json(std::span<const cohort::ExamPanel> panels) {
  static constexpr const char* kCriteria[] = {"adiposity", "glycemia", "blood_pressure", "lipids"};
  nlohmann::json a = nlohmann::json::array();
  for (const auto& p : panels) {
    auto l = cohort::label_mets(p);
    nlohmann::json met = nlohmann::json::array();
    for (std::size_t i = 0; i < l.criteria.size(); ++i) {
      if (l.criteria[i]) met.push_back(kCriteria[i]);
    }
    a.push_back({{"subject_id", p.subject_id}, {"is_mets", l.is_mets ? 1 : 0}, {"criteria_met", met}});
  }
  return a;
}

cohort::SubjectLabels parse_labels(const nlohmann::json& j, const std::string& source) {
  cohort::SubjectLabels out;
  try {
    for (const auto& e : j) out[e.at("subject_id").get<std::string>()] = e.at("is_mets").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", source, e.what()));
  }
  return out;
}

constexpr const char* kPreparedFiles[] = {"records.jsonl", "labels.json", "split_plan.json", "feature_spec.json"};

struct Prepared {
  std::vector<DailyRecord> records;
  cohort::SubjectLabels labels;
  cohort::SplitPlan plan;
  cohort::FeatureSpec features;
};

Prepared load_prepared(const std::string& dir, Run& run) {
  if (dir.empty()) throw ConfigError("--prepared is required");
  fs::path root(dir);
  verify_directory(root);
  for (const char* name : kPreparedFiles) run.input(root / name);
  Prepared p;
  p.records = cohort::read_records_jsonl(root / "records.jsonl");
  p.labels = parse_labels(read_json(root / "labels.json"), (root / "labels.json").string());
  try {
    p.plan = cohort::SplitPlan::from_json(read_json(root / "split_plan.json"));
    p.features = cohort::FeatureSpec::from_json(read_json(root / "feature_spec.json"));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("{}: {}", dir, e.what()));
  }
  return p;
}

std::vector<DailyRecord> test_records(const Prepared& p) {
  std::vector<DailyRecord> out;
  for (auto i : p.plan.select(p.records, {cohort::kTestPartition})) out.push_back(p.records[i]);
  return out;
}

eval::CvConfig cv_for(const RunConfig& cfg, const GlobalOptions& g, const Prepared& p) {
  auto cv = cfg.cv_config(g.jobs);
  cv.features = p.features;
  return cv;
}

std::string csv_of(const auto& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

}  // namespace

int cmd_synth(const GlobalOptions& g, const SynthArgs& a) {
  auto spec = a.spec.empty() ? synth::CohortSpec{} : synth::CohortSpec::parse(read_text(a.spec));
  if (g.seed) spec.seed = *g.seed;
  spec.validate();
  Run run(g, "synth", a.out, spec.to_json(), spec.seed);
  if (!a.spec.empty()) run.input(a.spec);
  auto cohort = synth::generate(spec);
  auto labels = cohort::label_subjects(cohort.panels);
  cohort::write_records_jsonl(run.path("records.jsonl"), cohort.records);
  cohort::write_panels_json(run.path("panels.json"), cohort.panels);
  cohort::write_records_csv(run.path("records.csv"), cohort.records, &labels);
  run.write_json("cohort_spec.json", spec.to_json());
  run.finish();
  fmt::print("{} subjects, {} records\n", cohort.panels.size(), cohort.records.size());
  return 0;
}

int cmd_prepare(const GlobalOptions& g, const PrepareArgs& a) {
  auto cfg = load_config(g);
  if (a.data.empty()) throw ConfigError("prepare: --data is required");
  fs::path data(a.data);
  if (fs::exists(data / kManifestName)) verify_directory(data);
  Run run(g, "prepare", a.out, cfg.to_json(), cfg.hp.seed);
  run.input(data / "records.jsonl");
  run.input(data / "panels.json");
  auto records = cohort::read_records_jsonl(data / "records.jsonl");
  auto panels = cohort::read_panels_json(data / "panels.json");
  auto labels = cohort::label_subjects(panels);
  cohort::record_labels(records, labels);  // every subject needs a panel

  auto cleaned = cohort::clean(records, cfg.clean);
  auto plan = cohort::split(cleaned.records, labels, cfg.test_fraction, cfg.k, cfg.hp.seed, cfg.split_mode);
  auto features = eval::select_on_training(cleaned.records, labels, plan, cfg.feature_alpha);

  cohort::write_records_jsonl(run.path("records.jsonl"), cleaned.records);
  cohort::write_panels_json(run.path("panels.json"), panels);
  run.write_json("labels.json", labels_json(panels));
  cohort::write_audit_jsonl(run.path("audit.jsonl"), cleaned.audit);
  run.write_json("split_plan.json", plan.to_json());
  run.write_json("feature_spec.json", features.to_json());
  run.finish();

  std::string kept;
  for (auto f : features.features) kept += fmt::format("{}{}", kept.empty() ? "" : ",", cohort::to_string(f));
  fmt::print("{} of {} records kept, {} audit entries, features: {}\n", cleaned.records.size(), records.size(),
             cleaned.audit.size(), kept);
  return 0;
}

int cmd_train(const GlobalOptions& g, const TrainArgs& a) {
  auto cfg = load_config(g);
  apply(cfg, a.overrides);
  Run run(g, "train", a.out, cfg.to_json(), cfg.hp.seed);
  auto p = load_prepared(a.prepared, run);
  if (a.fold < 1 || a.fold > p.plan.k) {
    throw ConfigError(fmt::format("train: --fold must be in [1, {}], got {}", p.plan.k, a.fold));
  }
  auto cv = cv_for(cfg, g, p);
  auto data = eval::prepare_rotation(p.records, p.labels, p.plan, a.fold, cv, p.features);
  auto hp = cv.hp;
  hp.seed = eval::rotation_seed(cv.hp.seed, a.fold);
  models::FusionModel model(cv.architecture, hp, data.features, data.vocab, cv.encoder);
  auto train_ex = model.prepare(data.train, cohort::record_labels(data.train, p.labels));
  auto val_ex = model.prepare(data.val, cohort::record_labels(data.val, p.labels));
  auto test_ex = model.prepare(data.test, cohort::record_labels(data.test, p.labels));
  auto history = models::train(model, train_ex, val_ex);

  auto scores = [&](const std::vector<models::Example>& ex) {
    std::vector<int> y;
    for (const auto& e : ex) y.push_back(e.label);
    return eval::evaluate(model.predict(ex), y, cv.threshold);
  };
  auto val = scores(val_ex), test = scores(test_ex);
  model.save(run.path("model.ckpt"));
  run.write_text("history.csv", csv_of([&](std::ostream& o) { history.write_csv(o); }));
  run.write_json("history.json", history.to_json());
  run.write_json("scores.json", {{"architecture", std::string(models::to_string(cv.architecture))},
                                 {"validation_fold", a.fold},
                                 {"best_epoch", history.best_epoch},
                                 {"diverged", history.diverged},
                                 {"parameter_count", model.parameter_count()},
                                 {"n_train", data.train.size()},
                                 {"n_augmented", data.n_augmented},
                                 {"n_val", data.val.size()},
                                 {"n_test", data.test.size()},
                                 {"val", val.to_json()},
                                 {"test", test.to_json()}});
  run.finish();
  if (history.diverged) return 3;
  fmt::print("best epoch {}: val AUROC {:.4f}, test AUROC {:.4f}\n", history.best_epoch, val.auroc, test.auroc);
  return 0;
}

int cmd_cv(const GlobalOptions& g, const EvalArgs& a) {
  auto cfg = load_config(g);
  apply(cfg, a.overrides);
  Run run(g, "cv", a.out, cfg.to_json(), cfg.hp.seed);
  auto p = load_prepared(a.prepared, run);
  auto report = eval::cross_validate(p.records, p.labels, p.plan, cv_for(cfg, g, p));
  auto table = csv_of([&](std::ostream& o) { report.write_table_csv(o); });
  run.write_text("table.csv", table);
  run.write_json("report.json", report.to_json());
  for (const auto& r : report.rotations) {
    run.write_text(fmt::format("history_fold{}.csv", r.validation_fold),
                   csv_of([&](std::ostream& o) { r.history.write_csv(o); }));
  }
  run.finish();
  fmt::print("{}", table);
  if (report.diverged()) {
    logger()->error("at least one rotation diverged");
    return 3;
  }
  return 0;
}

int cmd_grid(const GlobalOptions& g, const EvalArgs& a) {
  auto cfg = load_config(g);
  apply(cfg, a.overrides);
  Run run(g, "grid", a.out, cfg.to_json(), cfg.hp.seed);
  auto p = load_prepared(a.prepared, run);
  auto result = eval::grid_search(p.records, p.labels, p.plan, cfg.grid, cv_for(cfg, g, p));
  run.write_text("grid.csv", csv_of([&](std::ostream& o) { result.write_csv(o); }));
  run.write_json("grid.json", result.to_json());
  run.finish();
  const auto& best = result.trials.front();
  if (best.diverged) {
    logger()->error("every trial diverged");
    return 3;
  }
  fmt::print("best: {} r={} h={} p={} mean val AUROC {:.4f}\n", models::to_string(best.architecture), best.reduced_dim,
             best.hidden_dim, best.dropout_p, best.mean_val_auroc());
  return 0;
}

int cmd_sweep(const GlobalOptions& g, const EvalArgs& a) {
  auto cfg = load_config(g);
  apply(cfg, a.overrides);
  Run run(g, "sweep", a.out, cfg.to_json(), cfg.hp.seed);
  auto p = load_prepared(a.prepared, run);
  eval::SweepConfig sc;
  sc.ratios = cfg.sweep_ratios;
  sc.seeds.clear();
  for (auto s : cfg.sweep_seeds) sc.seeds.push_back(cfg.hp.seed + s);
  sc.test_fraction = cfg.test_fraction;
  sc.k = cfg.k;
  sc.mode = cfg.split_mode;
  sc.cv = cv_for(cfg, g, p);
  sc.cv.features.reset();  // each seed has its own split
  sc.jobs = g.jobs;
  auto result = eval::imbalance_sweep(p.records, p.labels, sc);
  auto csv = csv_of([&](std::ostream& o) { result.write_csv(o); });
  run.write_text("sweep.csv", csv);
  run.write_json("sweep.json", result.to_json());
  run.finish();
  fmt::print("{}", csv);
  return 0;
}

int cmd_explain(const GlobalOptions& g, const ExplainArgs& a) {
  if (!a.pfi && !a.lime) throw ConfigError("explain: choose --pfi, --lime or both");
  if (a.model.empty()) throw ConfigError("explain: --model is required");
  auto cfg = load_config(g);
  if (a.repetitions) cfg.pfi_repetitions = *a.repetitions;
  if (a.samples) cfg.lime.samples = *a.samples;
  Run run(g, "explain", a.out, cfg.to_json(), cfg.hp.seed);
  auto p = load_prepared(a.prepared, run);
  fs::path model_path(a.model);
  auto model_dir = model_path.has_parent_path() ? model_path.parent_path() : fs::path(".");
  if (fs::exists(model_dir / kManifestName)) verify_directory(model_dir);
  run.input(model_path);
  auto model = models::FusionModel::load(model_path);
  auto test = test_records(p);

  if (a.pfi) {
    explain::PfiConfig pc;
    pc.repetitions = cfg.pfi_repetitions;
    pc.seed = cfg.hp.seed;
    pc.features = cfg.pfi_features;
    pc.jobs = g.jobs;
    auto report = explain::pfi(*model, test, cohort::record_labels(test, p.labels), pc);
    run.write_json("pfi.json", report.to_json());
    run.write_text("pfi.csv", csv_of([&](std::ostream& o) { report.write_csv(o); }));
    for (const auto& f : report.features) fmt::print("{:<10} {:+.4f}\n", f.feature, f.importance);
  }

  if (a.lime) {
    const DailyRecord* rec = nullptr;
    if (!a.record.empty()) {
      for (const auto& r : p.records) {
        if (!r.is_augmented() && r.key() == a.record) rec = &r;
      }
      if (rec == nullptr) throw DataError(fmt::format("explain: no record {} in {}", a.record, a.prepared));
    } else {
      for (const auto& r : test) {
        if (p.labels.at(r.subject_id) == 1) {
          rec = &r;
          break;
        }
      }
      if (rec == nullptr) throw DataError("explain: the test partition has no MetS record");
    }
    if (!rec->text) throw DataError(fmt::format("explain: record {} has no text", rec->key()));
    auto e = explain::lime_text(explain::record_classifier(*model, *rec), *rec->text, cfg.lime);
    auto j = e.to_json();
    j["record"] = rec->key();
    run.write_json("lime.json", j);
    run.write_text("lime.html", e.to_html());
    fmt::print("{}: top token \"{}\" ({:+.4f}), R^2 {:.3f}\n", rec->key(), e.top().token, e.top().weight, e.r2);
  }
  run.finish();
  return 0;
}

namespace {

void add_training_flags(CLI::App* sub, TrainingOverrides& o) {
  sub->add_option("--arch", o.arch, "BASELINE, THSCL, TS_HCL, TH_SCL or TS_H");
  sub->add_option("--epochs", o.epochs, "Maximum training epochs")->check(CLI::PositiveNumber);
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"Metabolic-syndrome classification from daily text and wearable physiology", "metsfuse"};
  app.set_version_flag("--version", METSFUSE_VERSION);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Seed for every random stream of the run");
  app.add_option("--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--frozen-clock", g.frozen_clock, "Write a fixed timestamp into manifests");

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort");
  synth->add_option("--spec", synth_args.spec, "Cohort spec JSON (default cohort when omitted)");
  synth->add_option("--out", synth_args.out, "Output directory")->required();

  PrepareArgs prepare_args;
  auto* prepare = app.add_subcommand("prepare", "Clean, label, split and select features");
  prepare->add_option("--data", prepare_args.data, "Directory with records.jsonl and panels.json")->required();
  prepare->add_option("--out", prepare_args.out, "Output directory")->required();

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train one model on the folds other than --fold");
  train->add_option("--prepared", train_args.prepared, "Output of prepare")->required();
  train->add_option("--out", train_args.out, "Output directory")->required();
  train->add_option("--fold", train_args.fold, "Validation fold");
  add_training_flags(train, train_args.overrides);

  EvalArgs cv_args, grid_args, sweep_args;
  auto* cv = app.add_subcommand("cv", "Cross-validate one architecture");
  auto* grid = app.add_subcommand("grid", "Grid search over fusion sizes and dropout");
  auto* sweep = app.add_subcommand("sweep", "Cross-validate across minority ratios and seeds");
  for (auto [sub, args] : {std::pair{cv, &cv_args}, std::pair{grid, &grid_args}, std::pair{sweep, &sweep_args}}) {
    sub->add_option("--prepared", args->prepared, "Output of prepare")->required();
    sub->add_option("--out", args->out, "Output directory")->required();
    add_training_flags(sub, args->overrides);
  }

  ExplainArgs explain_args;
  auto* explain = app.add_subcommand("explain", "Permutation importance and token attributions");
  explain->add_option("--prepared", explain_args.prepared, "Output of prepare")->required();
  explain->add_option("--model", explain_args.model, "Checkpoint written by train")->required();
  explain->add_option("--out", explain_args.out, "Output directory")->required();
  explain->add_flag("--pfi", explain_args.pfi, "Permutation feature importance on the test partition");
  explain->add_flag("--lime", explain_args.lime, "Token attributions for one record");
  explain->add_option("--record", explain_args.record, "Record for --lime as SUBJECT#DAY");
  explain->add_option("--repetitions", explain_args.repetitions, "Permutations per feature")->check(CLI::PositiveNumber);
  explain->add_option("--samples", explain_args.samples, "LIME perturbation samples")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*synth) return cmd_synth(g, synth_args);
    if (*prepare) return cmd_prepare(g, prepare_args);
    if (*train) return cmd_train(g, train_args);
    if (*cv) return cmd_cv(g, cv_args);
    if (*grid) return cmd_grid(g, grid_args);
    if (*sweep) return cmd_sweep(g, sweep_args);
    if (*explain) return cmd_explain(g, explain_args);
  } catch (const ConfigError& e) {
    fmt::print(stderr, "configuration error: {}\n", e.what());
    return 1;
  } catch (const DataError& e) {
    fmt::print(stderr, "data error: {}\n", e.what());
    return 2;
  } catch (const LeakageError& e) {
    fmt::print(stderr, "leakage: {}\n", e.what());
    return 2;
  } catch (const fs::filesystem_error& e) {
    fmt::print(stderr, "i/o error: {}\n", e.what());
    return 2;
  } catch (const NumericError& e) {
    fmt::print(stderr, "numeric failure: {}\n", e.what());
    return 3;
  } catch (const ShapeError& e) {
    fmt::print(stderr, "shape error: {}\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace metsfuse::cli
