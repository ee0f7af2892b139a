// Copyright 2026 The xdmg Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Links only the C API of libxdmg.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "xdmg/xdmg.h"

namespace {

// Takes the summary by reference: it is filled in by the call that produces `status`.
int finish(xdmg_status status, char*& summary) {
  if (summary) {
    std::fputs(summary, stdout);
    xdmg_free_string(summary);
  }
  if (status != XDMG_OK) std::fprintf(stderr, "error: %s\n", xdmg_last_error());
  return static_cast<int>(status);
}

const char* c_or_null(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xdmg: siamese building damage assessment pipeline"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", std::string(xdmg_version()));
  bool single_thread = false;
  app.add_flag("--single-thread", single_thread, "Force single-threaded execution for bitwise reproducibility");

  std::string spec, out, data, config, split = "val", checkpoint, pre, post, pred, truth, out_dir;

  auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic dataset");
  synth->add_option("--spec", spec, "Synthetic spec JSON")->required();
  synth->add_option("--out", out, "Output dataset directory")->required();

  auto* ingest = app.add_subcommand("ingest", "Index a split and rasterize its labels");
  ingest->add_option("--data", data, "Dataset root")->required();
  ingest->add_option("--split", split, "Split name (train, val, test)");
  ingest->add_option("--out", out, "Optional directory for <scene>_truth.png masks");

  auto* train = app.add_subcommand("train", "Train a model on <data>/train, validating on <data>/val");
  train->add_option("--data", data, "Dataset root")->required();
  train->add_option("--config", config, "Train config JSON")->required();
  train->add_option("--out", out, "Run directory")->required();

  auto* predict = app.add_subcommand("predict", "Predict damage masks with a checkpoint");
  predict->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  auto* pre_opt = predict->add_option("--pre", pre, "Pre-disaster PNG");
  auto* post_opt = predict->add_option("--post", post, "Post-disaster PNG");
  auto* out_opt = predict->add_option("--out", out, "Output mask PNG");
  auto* data_opt = predict->add_option("--data", data, "Dataset root (batch mode)");
  predict->add_option("--split", split, "Split for batch mode");
  auto* outdir_opt = predict->add_option("--out-dir", out_dir, "Output directory for batch mode");
  post_opt->excludes(data_opt);
  pre_opt->excludes(data_opt);
  out_opt->excludes(outdir_opt);

  auto* score = app.add_subcommand("score", "Score prediction masks against truth");
  score->add_option("--pred", pred, "Directory of <scene>_prediction.png masks")->required();
  score->add_option("--truth", truth, "Mask directory or dataset split directory")->required();
  score->add_option("--out", out, "Metrics JSON output")->required();

  auto* ablate = app.add_subcommand("ablate", "Run the fusion x weighting ablation grid");
  ablate->add_option("--data", data, "Dataset root")->required();
  ablate->add_option("--config", config, "Base train config JSON")->required();
  ablate->add_option("--out", out, "Ablation CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return XDMG_ERR_USAGE;
  }

  char* summary = nullptr;
  const int st = single_thread ? 1 : 0;
  if (*synth) return finish(xdmg_synth(spec.c_str(), out.c_str(), &summary), summary);
  if (*ingest) return finish(xdmg_ingest(data.c_str(), split.c_str(), c_or_null(out), &summary), summary);
  if (*train) return finish(xdmg_train(data.c_str(), config.c_str(), out.c_str(), st, &summary), summary);
  if (*predict) {
    if (!data.empty()) {
      if (out_dir.empty()) {
        std::fprintf(stderr, "error: batch prediction needs --out-dir\n");
        return XDMG_ERR_USAGE;
      }
      return finish(xdmg_predict_split(checkpoint.c_str(), data.c_str(), split.c_str(), out_dir.c_str(), &summary),
                    summary);
    }
    if (post.empty() || out.empty()) {
      std::fprintf(stderr, "error: predict needs --post and --out (or --data and --out-dir)\n");
      return XDMG_ERR_USAGE;
    }
    return finish(xdmg_predict(checkpoint.c_str(), c_or_null(pre), post.c_str(), out.c_str(), &summary), summary);
  }
  if (*score) return finish(xdmg_score(pred.c_str(), truth.c_str(), out.c_str(), &summary), summary);
  if (*ablate) return finish(xdmg_ablate(data.c_str(), config.c_str(), out.c_str(), st, &summary), summary);
  return XDMG_ERR_USAGE;
}
