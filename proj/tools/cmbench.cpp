// cmbench: cross-modal matching benchmark command line.

#include <cstdlib>
#include <iostream>
#include <map>

#include <CLI11.hpp>

#include "cmbench/commands.hpp"

namespace {

using namespace cmbench;

const std::map<std::string, ReportFormat> kFormats{{"csv", ReportFormat::Csv}, {"json", ReportFormat::Json}};
const std::map<std::string, BranchId> kBranches{{"none", BranchId::None},
                                                {"unsharp", BranchId::Unsharp},
                                                {"scharr_lcn", BranchId::ScharrLcn},
                                                {"morph_gradient", BranchId::MorphGradient}};

void add_settings(CLI::App* cmd, EvalSettings& s) {
  cmd->add_option("--seed", s.ransac.seed, "RANSAC base seed")->capture_default_str();
  cmd->add_option("--ransac-threshold", s.ransac.threshold, "inlier threshold in pixels")->capture_default_str();
  cmd->add_option("--ransac-iterations", s.ransac.max_iterations, "iteration cap")->capture_default_str();
  cmd->add_option("--ransac-confidence", s.ransac.confidence)->capture_default_str();
  cmd->add_option("--max-matches", s.max_matches, "per-record match cap")->capture_default_str();
  cmd->add_option("--resize-max", s.resize_max, "evaluation max image dimension, 0 disables")->capture_default_str();
  cmd->add_option("--workers", s.workers)->capture_default_str();
}

void add_preprocess_params(CLI::App* cmd, BranchParams& p) {
  cmd->add_option("--unsharp-sigma", p.unsharp_sigma)->capture_default_str();
  cmd->add_option("--unsharp-amount", p.unsharp_amount)->capture_default_str();
  cmd->add_option("--lcn-window", p.lcn_window)->capture_default_str();
  cmd->add_option("--lcn-epsilon", p.lcn_epsilon)->capture_default_str();
  cmd->add_option("--morph-radius", p.morph_radius)->capture_default_str();
}

void add_embedding(CLI::App* cmd, EmbeddingOptions& e) {
  cmd->add_option("--provider", e.provider, "builtin or external")->capture_default_str();
  cmd->add_option("--embeddings", e.embeddings, "embedding JSON-lines file for the external provider");
}

std::filesystem::path cache_dir_from_env() {
  const char* v = std::getenv("CMBENCH_CACHE_DIR");
  return v != nullptr ? std::filesystem::path(v) : std::filesystem::path();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-modal image matching benchmark"};
  app.require_subcommand(1);
  int exit_code = kExitOk;

  // eval-homography / eval-pose / eval-geo
  RunOptions run;
  std::string branch = "none";
  const std::pair<const char*, EvalFamily> evals[] = {{"eval-homography", EvalFamily::Homography},
                                                      {"eval-pose", EvalFamily::Pose},
                                                      {"eval-geo", EvalFamily::Geo}};
  for (const auto& [name, family] : evals) {
    auto* cmd = app.add_subcommand(name, std::string("Evaluate the ") + (name + 5) + " task");
    cmd->add_option("--manifest", run.manifest)->required();
    cmd->add_option("--matches-dir", run.matches_dir)->required();
    cmd->add_option("--out", run.out, "report file, stdout when absent");
    cmd->add_option("--format", run.format)->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
    cmd->add_option("--matchers", run.matchers, "restrict to these matcher ids")->delimiter(',');
    cmd->add_option("--thresholds", run.thresholds, "AUC / SR thresholds, ascending")->delimiter(',');
    cmd->add_option("--branch", run.settings.branch, "preprocessing branch of the records to evaluate")
        ->transform(CLI::CheckedTransformer(kBranches, CLI::ignore_case));
    add_settings(cmd, run.settings);
    add_preprocess_params(cmd, run.settings.preprocess);
    const EvalFamily f = family;
    cmd->callback([&run, &exit_code, f] {
      exit_code = guarded(std::cerr, [&] { emit_report(run_eval(f, run, std::cerr), run.out, run.format, std::cout); });
    });
  }

  GateLabelOptions label;
  auto* gate_label = app.add_subcommand("gate-label", "Oracle branch labels and fused descriptors");
  gate_label->add_option("--manifest", label.manifest)->required();
  gate_label->add_option("--matches-dir", label.matches_dir)->required();
  gate_label->add_option("--out", label.out, "samples JSON-lines")->required();
  gate_label->add_option("--skip-file", label.skip_file);
  gate_label->add_option("--matchers", label.matchers)->delimiter(',');
  add_embedding(gate_label, label.embedding);
  add_settings(gate_label, label.settings);
  gate_label->callback([&] {
    label.embedding.cache_dir = cache_dir_from_env();
    exit_code = guarded(std::cerr, [&] { run_gate_label(label, std::cerr); });
  });

  GateTrainOptions train;
  auto* gate_train = app.add_subcommand("gate-train", "Train gate classifiers from labelled samples");
  gate_train->add_option("--samples", train.samples)->required();
  gate_train->add_option("--out", train.out_dir, "model directory")->required();
  gate_train->add_flag("--shared", train.shared, "one model for all matchers");
  gate_train->add_option("--matchers", train.matchers)->delimiter(',');
  gate_train->add_option("--lr", train.hyper.learning_rate)->capture_default_str();
  gate_train->add_option("--epochs", train.hyper.epochs)->capture_default_str();
  gate_train->add_option("--batch-size", train.hyper.batch_size)->capture_default_str();
  gate_train->add_option("--hidden", train.hyper.hidden_width, "hidden width, 0 for linear")->capture_default_str();
  gate_train->add_option("--weight-decay", train.hyper.weight_decay)->capture_default_str();
  gate_train->add_option("--seed", train.hyper.seed)->capture_default_str();
  gate_train->callback([&] { exit_code = guarded(std::cerr, [&] { run_gate_train(train, std::cerr); }); });

  GateEvalOptions geval;
  auto* gate_eval = app.add_subcommand("gate-eval", "Baseline vs gated vs oracle branch selection");
  gate_eval->add_option("--manifest", geval.manifest)->required();
  gate_eval->add_option("--matches-dir", geval.matches_dir)->required();
  gate_eval->add_option("--models", geval.models_dir, "directory written by gate-train")->required();
  gate_eval->add_option("--out", geval.out);
  gate_eval->add_option("--format", geval.format)->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  gate_eval->add_option("--matchers", geval.matchers)->delimiter(',');
  gate_eval->add_option("--threshold", geval.threshold, "AUC threshold (px or deg) or SR threshold (m)")
      ->capture_default_str();
  add_embedding(gate_eval, geval.embedding);
  add_settings(gate_eval, geval.settings);
  gate_eval->callback([&] {
    geval.embedding.cache_dir = cache_dir_from_env();
    exit_code = guarded(std::cerr,
                        [&] { emit_report(run_gate_eval(geval, std::cerr), geval.out, geval.format, std::cout); });
  });

  ReportOptions rep;
  bool text = false;
  auto* report = app.add_subcommand("report", "Merge report files");
  report->add_option("inputs", rep.inputs)->required();
  report->add_option("--out", rep.out);
  report->add_option("--format", rep.format)->transform(CLI::CheckedTransformer(kFormats, CLI::ignore_case));
  report->add_flag("--force", rep.force, "merge rows with different fingerprints");
  report->add_flag("--text", text, "print an aligned table instead of CSV/JSON on stdout");
  report->callback([&] {
    exit_code = guarded(std::cerr, [&] {
      const auto rows = run_report(rep);
      if (text) {
        write_text_table(std::cout, rows);
        if (!rep.out.empty()) emit_report(rows, rep.out, rep.format, std::cout);
      } else {
        emit_report(rows, rep.out, rep.format, std::cout);
      }
    });
  });

  SynthOptions synth;
  auto* synth_cmd = app.add_subcommand("synth-pairs", "Sample synthetic homography pairs");
  synth_cmd->add_option("--out", synth.out, "manifest path")->required();
  synth_cmd->add_option("--count", synth.count)->capture_default_str();
  synth_cmd->add_option("--seed", synth.seed)->capture_default_str();
  synth_cmd->add_option("--width", synth.width)->capture_default_str();
  synth_cmd->add_option("--height", synth.height)->capture_default_str();
  synth_cmd->add_option("--dataset-id", synth.dataset_id)->capture_default_str();
  synth_cmd->add_flag("--images", synth.images, "render textured PNG pairs next to the manifest");
  synth_cmd->add_option("--matches-out", synth.matches_out, "also write ground-truth matches");
  synth_cmd->add_option("--matcher-id", synth.matcher_id)->capture_default_str();
  synth_cmd->add_option("--category", synth.category)->capture_default_str();
  synth_cmd->add_option("--num-matches", synth.num_matches)->capture_default_str();
  synth_cmd->add_option("--noise", synth.noise_px, "Gaussian noise sigma in pixels")->capture_default_str();
  synth_cmd->add_option("--outlier-ratio", synth.outlier_ratio)->capture_default_str();
  synth_cmd->callback([&] { exit_code = guarded(std::cerr, [&] { run_synth_pairs(synth, std::cerr); }); });

  PreprocessOptions pre;
  auto* pre_cmd = app.add_subcommand("preprocess", "Apply a preprocessing branch to images");
  pre_cmd->add_option("inputs", pre.inputs);
  pre_cmd->add_option("--out-dir", pre.out_dir)->capture_default_str();
  pre_cmd->add_option("--branch", pre.branch)->transform(CLI::CheckedTransformer(kBranches, CLI::ignore_case));
  pre_cmd->add_option("--config", pre.config, "read parameters from a config file");
  pre_cmd->add_option("--write-config", pre.write_config, "write the effective parameters");
  pre_cmd->add_option("--workers", pre.workers)->capture_default_str();
  add_preprocess_params(pre_cmd, pre.params);
  pre_cmd->callback([&] {
    if (!pre.inputs.empty() && pre.out_dir.empty()) pre.out_dir = ".";
    exit_code = guarded(std::cerr, [&] { run_preprocess(pre, std::cerr); });
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }
  return exit_code;
}
