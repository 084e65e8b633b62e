#include "coin/cli.hpp"

#include <cstdio>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "coin/dataset.hpp"
#include "coin/distill.hpp"
#include "coin/io.hpp"
#include "coin/metrics.hpp"
#include "coin/morphology.hpp"
#include "coin/oracle.hpp"
#include "coin/parallel.hpp"
#include "coin/propagation.hpp"
#include "coin/scoring.hpp"
#include "coin/synth.hpp"

namespace coin {
namespace fs = std::filesystem;
using nlohmann::json;

int exit_code_for(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::kArgument:
    case ErrorKind::kConfig:
    case ErrorKind::kUnsupported:
      return kExitConfig;
    case ErrorKind::kNumeric:
      return kExitNumeric;
    case ErrorKind::kFormat:
    case ErrorKind::kIo:
    case ErrorKind::kData:
      return kExitData;
  }
  return kExitData;
}

namespace {

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

// The output location is left out so identical runs into different
// directories produce identical trees.
void write_config_record(const RunConfig& c) {
  RunConfig rec = c;
  rec.output.clear();
  write_text(c.output / "config.txt", rec.dump());
}

void require_output(const RunConfig& c) {
  if (c.output.empty()) throw ConfigError("an output directory is required (--output)");
}

void require_dataset(const RunConfig& c) {
  if (c.dataset.empty()) throw ConfigError("a dataset directory is required (--dataset)");
  if (!fs::is_directory(c.dataset)) throw DataError("dataset directory not found: " + c.dataset.string());
}

void check_oracle_config(const RunConfig& c) {
  if (c.oracle_mode != OracleMode::kBridge) return;
  if (c.bridge_dir.empty()) throw ConfigError("oracle.bridge_dir is required with --oracle bridge");
  if (!fs::is_directory(c.bridge_dir)) {
    throw DataError("bridge proposal directory not found: " + c.bridge_dir.string());
  }
}

std::shared_ptr<MaskProposalOracle> make_oracle(const RunConfig& c,
                                                const std::vector<ImageRecord>& records) {
  std::shared_ptr<MaskProposalOracle> inner;
  if (c.oracle_mode == OracleMode::kSynthetic) {
    for (const auto& r : records) {
      if (!r.gt_instances) {
        throw DataError("synthetic oracle needs ground truth; image " + r.id + " has none");
      }
    }
    inner = SyntheticOracle::from_records(records, c.oracle);
  } else {
    std::map<std::string, std::pair<int, int>> shapes;
    for (const auto& r : records) shapes[r.id] = {r.height(), r.width()};
    inner = std::make_shared<FileBridgeOracle>(c.bridge_dir, std::move(shapes));
  }
  return std::make_shared<CachingOracle>(std::move(inner));
}

std::vector<ImageRecord> load_checked(const RunConfig& c) {
  auto records = load_dataset(c.dataset);
  if (records.empty()) throw DataError("dataset is empty: " + c.dataset.string());
  return records;
}

void require_gt(const std::vector<ImageRecord>& records) {
  for (const auto& r : records) {
    if (!r.gt_instances) throw DataError("image " + r.id + " has no ground truth");
  }
}

json round_json(const RoundSummary& s) {
  json j = {{"round", s.round},
            {"accepted", s.accepted},
            {"rejected", s.rejected},
            {"instances", s.instances},
            {"train_loss", s.train_loss}};
  if (s.has_metrics) j["metrics"] = to_json(s.test);
  json images = json::array();
  for (const auto& sc : s.scores) images.push_back(to_json(sc));
  j["images"] = images;
  return j;
}

void write_rounds(const fs::path& dir, const CoinResult& res) {
  fs::create_directories(dir);
  json summary = json::array();
  for (const auto& s : res.rounds) {
    char name[32];
    std::snprintf(name, sizeof name, "round_%02d.json", s.round);
    write_json(dir / name, round_json(s));
    json row = {{"round", s.round}, {"accepted", s.accepted}, {"instances", s.instances}};
    if (s.has_metrics) {
      row["iou"] = s.test.overall.iou;
      row["aji"] = s.test.overall.aji;
      row["pq"] = s.test.overall.pq;
    }
    summary.push_back(row);
  }
  write_json(dir / "summary.json", summary);
}

}  // namespace

void cmd_synth(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_output(c);
  const auto records = gen_dataset(c.synth);
  save_dataset(records, c.output);
  write_config_record(c);
  spdlog::info("wrote {} synthetic images to {}", records.size(), c.output.string());
}

void cmd_propagate(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_output(c);
  require_dataset(c);
  const auto records = load_checked(c);
  std::vector<PropagationResult> results(records.size());
  std::vector<InstanceMap> instances(records.size());
  parallel_for(records.size(), c.jobs, [&](std::size_t i) {
    results[i] = propagate_image(records[i].features, records[i].seed, c.coin.propagation, 1);
    instances[i] = split_instances(results[i].mask.foreground, c.coin.morph);
  });
  fs::create_directories(c.output);
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& id = records[i].id;
    save_mask(results[i].mask.foreground, c.output / (id + ".prop.pgm"));
    save_instances(instances[i], c.output / (id + ".step1.pgm16"));
    json patches = json::array();
    for (const auto& p : results[i].patches) {
      patches.push_back({{"index", p.index},
                         {"fallback", p.fallback},
                         {"borrowed", p.borrowed},
                         {"used_ot", p.used_ot},
                         {"iterations", p.iterations},
                         {"converged", p.converged},
                         {"residual", p.residual},
                         {"cell_mass", p.cell_mass}});
    }
    write_json(c.output / (id + ".ot.json"),
               {{"image_id", id},
                {"lambda", c.coin.propagation.ot.lambda},
                {"use_ot", c.coin.propagation.use_ot},
                {"per_axis", c.coin.propagation.per_axis},
                {"patches", patches}});
  }
  write_config_record(c);
}

void cmd_score(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_output(c);
  require_dataset(c);
  check_oracle_config(c);
  const auto records = load_checked(c);
  if (!opts.topk_curve.empty()) require_gt(records);
  auto oracle = make_oracle(c, records);

  std::vector<InstanceMap> instances(records.size());
  std::vector<ImageScores> scores(records.size());
  std::vector<PseudoLabelPair> pseudo(records.size());
  parallel_for(records.size(), c.jobs, [&](std::size_t i) {
    instances[i] = step1_instances(records[i], c.coin, 1);
    scores[i] = score_image(records[i].id, instances[i], *oracle, c.coin.scoring);
    pseudo[i] = build_pseudo_masks(instances[i], scores[i]);
  });

  fs::create_directories(c.output);
  std::vector<Prompt> prompts;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& id = records[i].id;
    for (const auto& s : scores[i].instances) prompts.push_back({id, s.prompt});
    save_instances(instances[i], c.output / (id + ".step1.pgm16"));
    write_json(c.output / (id + ".scores.json"), to_json(scores[i]));
    save_u8_grid(pseudo[i].binary, c.output / (id + ".pseudo_bin.cgf"));
    save_u8_grid(pseudo[i].edge, c.output / (id + ".pseudo_edge.cgf"));
  }
  write_prompts(prompts, c.output / "prompts.json");
  if (!opts.topk_curve.empty()) {
    std::vector<ScoredImage> scored;
    for (std::size_t i = 0; i < records.size(); ++i) {
      scored.push_back({&scores[i], &instances[i], &*records[i].gt_instances});
    }
    const auto curve = topk_confidence_curve(scored, default_topk_fractions(), c.oracle.seed);
    std::ostringstream csv;
    csv.precision(17);
    csv << "fraction,k,scored_aji,random_aji,scored_pooled,random_pooled\n";
    for (const auto& p : curve)
      csv << p.fraction << ',' << p.k << ',' << p.scored << ',' << p.random << ',' << p.scored_pooled << ','
          << p.random_pooled << '\n';
    write_text(opts.topk_curve, csv.str());
  }
  write_config_record(c);
}

void cmd_distill(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_output(c);
  require_dataset(c);
  check_oracle_config(c);
  const auto records = load_checked(c);
  auto oracle = make_oracle(c, records);
  const CoinResult res = run_coin(records, *oracle, c.coin, c.jobs);
  fs::create_directories(c.output);
  save_checkpoint(res.params, c.output / "checkpoint");
  write_rounds(c.output / "reports", res);
  write_config_record(c);
}

void cmd_run(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_output(c);
  require_dataset(c);
  check_oracle_config(c);
  const auto records = load_checked(c);
  auto oracle = make_oracle(c, records);
  const CoinResult res = run_coin(records, *oracle, c.coin, c.jobs);
  fs::create_directories(c.output / "predictions");
  for (std::size_t i = 0; i < records.size(); ++i) {
    save_instances(res.predictions[i], c.output / "predictions" / (records[i].id + ".pred.pgm16"));
  }
  save_checkpoint(res.params, c.output / "checkpoint");
  write_rounds(c.output / "reports", res);
  write_config_record(c);
}

void cmd_eval(const CliOptions& opts) {
  const RunConfig& c = opts.config;
  c.validate();
  require_dataset(c);
  if (opts.pred_dir.empty()) throw ConfigError("eval needs a prediction directory (--pred)");
  if (!fs::is_directory(opts.pred_dir)) {
    throw DataError("prediction directory not found: " + opts.pred_dir.string());
  }
  const auto records = load_checked(c);
  require_gt(records);
  std::vector<MetricsReport> reports(records.size());
  std::vector<InstanceMap> preds(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto p = opts.pred_dir / (records[i].id + ".pred.pgm16");
    if (!fs::is_regular_file(p)) throw DataError("missing prediction file: " + p.string());
    preds[i] = load_instances(p);
    if (preds[i].height() != records[i].height() || preds[i].width() != records[i].width()) {
      throw DataError(p.string() + ": shape differs from ground truth");
    }
  }
  parallel_for(records.size(), c.jobs, [&](std::size_t i) {
    reports[i] = evaluate(preds[i], *records[i].gt_instances, c.coin.metrics);
  });
  json images = json::object();
  for (std::size_t i = 0; i < records.size(); ++i) images[records[i].id] = to_json(reports[i]);
  const json out = {{"mean", to_json(mean_report(reports))}, {"images", images}};
  if (c.output.empty()) {
    std::cout << out.dump(1) << "\n";
  } else {
    fs::create_directories(c.output);
    write_json(c.output / "eval.json", out);
  }
}

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"coin: annotation-free cell instance segmentation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, oracle_mode, dataset, output, topk, pred, bridge;
  std::vector<std::string> sets;
  int jobs = 0;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "flat key = value config file");
  app.add_option("--set", sets, "override a config key (key=value), repeatable");
  app.add_option("--jobs", jobs, "parallel images")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "seed for synth, oracle and student");
  app.add_option("--oracle", oracle_mode, "mask proposal oracle")
      ->check(CLI::IsMember({"synthetic", "bridge"}));
  app.add_option("--bridge-dir", bridge, "proposal directory for --oracle bridge");
  app.add_option("--dataset", dataset, "dataset directory");
  app.add_option("--output", output, "output directory");

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  auto* propagate = app.add_subcommand("propagate", "Step-1 propagation masks and OT diagnostics");
  auto* score = app.add_subcommand("score", "score Step-1 instances and build pseudo labels");
  score->add_option("--topk-curve", topk, "write the top-k confidence curve CSV here");
  auto* distill = app.add_subcommand("distill", "self-distillation rounds; writes a checkpoint");
  auto* run = app.add_subcommand("run", "full pipeline with predictions and per-round reports");
  auto* eval = app.add_subcommand("eval", "compare <id>.pred.pgm16 files against ground truth");
  eval->add_option("--pred", pred, "prediction directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    CliOptions opts;
    if (!config_path.empty()) opts.config = load_config(config_path);
    for (const auto& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      opts.config.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*seed_opt) opts.config.set_seed(seed);
    if (jobs > 0) opts.config.jobs = jobs;
    if (!oracle_mode.empty()) opts.config.set("oracle.mode", oracle_mode);
    if (!bridge.empty()) opts.config.bridge_dir = bridge;
    if (!dataset.empty()) opts.config.dataset = dataset;
    if (!output.empty()) opts.config.output = output;
    opts.topk_curve = topk;
    opts.pred_dir = pred;

    if (synth->parsed()) cmd_synth(opts);
    if (propagate->parsed()) cmd_propagate(opts);
    if (score->parsed()) cmd_score(opts);
    if (distill->parsed()) cmd_distill(opts);
    if (run->parsed()) cmd_run(opts);
    if (eval->parsed()) cmd_eval(opts);
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("unexpected failure: {}", e.what());
    return kExitData;
  }
  return kExitOk;
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("coin");
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace coin
