// respwave: synth | train | eval | interpret | bench

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>

#include "respwave/app/commands.hpp"

namespace {

namespace app = respwave::app;
namespace fs = std::filesystem;

enum Exit { kOk = 0, kUsage = 1, kConfig = 2, kData = 3, kNumeric = 4 };

int exit_code_for(const std::exception& e) {
  using namespace respwave;
  if (dynamic_cast<const ParameterError*>(&e) || dynamic_cast<const BuildError*>(&e)) return kConfig;
  if (dynamic_cast<const TrainingError*>(&e) || dynamic_cast<const EvaluationError*>(&e) ||
      dynamic_cast<const DegenerateSignalError*>(&e))
    return kNumeric;
  if (dynamic_cast<const DatasetError*>(&e) || dynamic_cast<const IngestionError*>(&e) ||
      dynamic_cast<const LoadError*>(&e) || dynamic_cast<const ShapeError*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e))
    return kData;
  return kUsage;
}

void print_block(const char* label, const respwave::eval::WindowMetrics& b) {
  std::cout << label << " " << b.window.duration_s() << " s (" << b.window.n_segments << " segments): RR mAE "
            << b.rr.mae_median_windows << " bpm, mMAE " << b.rr.mmae_median_subjects << " bpm, waveform MAE "
            << b.waveform_mae_median << " [" << b.waveform_mae_q1 << ", " << b.waveform_mae_q3 << "]";
  if (b.duty_pearson_r) std::cout << ", duty r " << *b.duty_pearson_r;
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  app::tune_allocator();
  CLI::App cli{"Respiratory waveform estimation from PPG with a 1-D convolutional encoder-decoder"};
  cli.set_config("--config", "", "TOML/INI file with option values; command-line flags take precedence");
  cli.require_subcommand(1);
  cli.set_version_flag("--version", std::string(app::kVersion));

  std::string input_norm = "zscore";
  auto add_norm = [&](CLI::App* c) {
    c->add_option("--input-norm", input_norm, "PPG window normalisation: zscore, minmax or none")
        ->check(CLI::IsMember({"zscore", "minmax", "none"}))
        ->capture_default_str();
  };

  // synth
  app::SynthArgs synth;
  auto* c_synth = cli.add_subcommand("synth", "Write a synthetic PPG/respiration dataset");
  c_synth->add_option("--out", synth.out, "Dataset directory (created; must be empty)")->required();
  c_synth->add_option("--n-subjects", synth.synth.n_subjects)->capture_default_str();
  c_synth->add_option("--duration", synth.synth.duration_s, "Seconds per recording")->capture_default_str();
  c_synth->add_option("--rr-min", synth.synth.resp_rate_bpm.lo)->capture_default_str();
  c_synth->add_option("--rr-max", synth.synth.resp_rate_bpm.hi)->capture_default_str();
  c_synth->add_option("--hr-min", synth.synth.heart_rate_bpm.lo)->capture_default_str();
  c_synth->add_option("--hr-max", synth.synth.heart_rate_bpm.hi)->capture_default_str();
  c_synth->add_option("--duty-min", synth.synth.duty_cycle.lo)->capture_default_str();
  c_synth->add_option("--duty-max", synth.synth.duty_cycle.hi)->capture_default_str();
  c_synth->add_option("--noise", synth.synth.noise_std, "PPG noise standard deviation")->capture_default_str();
  c_synth->add_option("--prefix", synth.synth.id_prefix, "Subject id prefix")->capture_default_str();
  c_synth->add_option("--seed", synth.synth.seed)->capture_default_str();

  // train
  app::TrainArgs tr;
  std::string init_weights;
  bool no_loso = false, keep_adam = false, quiet = false;
  auto* c_train = cli.add_subcommand("train", "Train with leave-one-subject-out folds or on the whole dataset");
  c_train->add_option("--data", tr.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_train->add_option("--out", tr.out_root, "Root for run directories")->capture_default_str();
  c_train->add_option("--run-name", tr.run_name, "Run directory name (default: train-<UTC timestamp>)");
  c_train->add_option("--epochs", tr.train.epochs)->capture_default_str();
  c_train->add_option("--batch-size", tr.train.batch_size)->capture_default_str();
  c_train->add_option("--lr", tr.train.learning_rate)->capture_default_str();
  c_train->add_option("--seed", tr.train.seed)->capture_default_str();
  c_train->add_option("--jobs", tr.jobs, "Folds trained in parallel")->capture_default_str();
  c_train->add_flag("--no-loso", no_loso, "Train one model on every subject");
  c_train->add_option("--init-weights", init_weights, "Start from a pretrained weight file")
      ->check(CLI::ExistingFile);
  c_train->add_flag("--keep-adam", keep_adam, "Keep Adam moments stored in --init-weights");
  c_train->add_flag("--save-adam", tr.save_adam, "Store Adam moments in the weight files");
  c_train->add_flag("--quiet", quiet, "No per-epoch progress");
  add_norm(c_train);

  // eval
  app::EvalArgs ev;
  bool no_pls = false;
  auto* c_eval = cli.add_subcommand("eval", "Score trained models on held-out subjects");
  c_eval->add_option("--weights", ev.weights, "Train run directory or a single weight file")->required();
  c_eval->add_option("--data", ev.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c_eval->add_option("--windows", ev.windows_s, "Evaluation window lengths in seconds")
      ->delimiter(',')
      ->capture_default_str();
  c_eval->add_option("--out", ev.out_root)->capture_default_str();
  c_eval->add_option("--run-name", ev.run_name);
  c_eval->add_option("--jobs", ev.jobs)->capture_default_str();
  c_eval->add_flag("--no-pls", no_pls, "Skip the PLS baseline");
  c_eval->add_option("--pls-components", ev.pls_components)->capture_default_str();
  add_norm(c_eval);

  // interpret
  app::InterpretArgs ip;
  std::string mode = "chain";
  auto* c_interp = cli.add_subcommand("interpret", "Attribute latent maxima to layer-1 kernels");
  c_interp->add_option("--weights", ip.weights, "Train run directory or a single weight file")->required();
  c_interp->add_option("--data", ip.data, "Annotated dataset directory")->required()->check(CLI::ExistingDirectory);
  c_interp->add_option("--mode", mode, "chain (bottleneck traced back) or layer1 (argmax after layer 1)")
      ->check(CLI::IsMember({"chain", "layer1"}))
      ->capture_default_str();
  c_interp->add_option("--smooth", ip.smooth_width, "Moving-average width for kernel plots (samples)")
      ->capture_default_str();
  c_interp->add_option("--out", ip.out_root)->capture_default_str();
  c_interp->add_option("--run-name", ip.run_name);
  add_norm(c_interp);

  // bench
  app::BenchArgs bn;
  std::string bench_weights;
  auto* c_bench = cli.add_subcommand("bench", "Single-window inference latency and throughput");
  c_bench->add_option("--weights", bench_weights, "Weight file (default: freshly initialised model)")
      ->check(CLI::ExistingFile);
  c_bench->add_option("--iterations", bn.iterations)->check(CLI::Range(std::size_t{10000}, std::size_t{1} << 40))
      ->capture_default_str();
  c_bench->add_option("--seed", bn.seed)->capture_default_str();
  c_bench->add_option("--out", bn.out_root)->capture_default_str();
  c_bench->add_option("--run-name", bn.run_name);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    const auto norm = respwave::data::parse_input_normalization(input_norm);
    if (*c_synth) {
      const auto dir = app::cmd_synth(synth);
      std::cout << "wrote " << synth.synth.n_subjects << " recordings to " << dir.string() << "\n";
    } else if (*c_train) {
      tr.loso = !no_loso;
      tr.train.reset_adam = !keep_adam;
      tr.input_normalization = norm;
      if (!init_weights.empty()) tr.init_weights = init_weights;
      if (!quiet) tr.log = &std::cerr;
      const auto out = app::cmd_train(tr);
      for (const auto& f : out.folds)
        std::cout << (f.held_out_subject.empty() ? std::string("all subjects") : "fold " + f.held_out_subject)
                  << ": " << f.n_train_segments << " segments, final loss "
                  << (f.loss_history.empty() ? 0.0 : f.loss_history.back()) << "\n";
      std::cout << out.run_dir.string() << "\n";
    } else if (*c_eval) {
      ev.pls = !no_pls;
      ev.input_normalization = norm;
      const auto out = app::cmd_eval(ev);
      for (const auto& b : out.model.blocks) print_block("model", b);
      if (out.pls)
        for (const auto& b : out.pls->blocks) print_block("pls  ", b);
      for (const auto& w : out.model.warnings) std::cerr << "warning: " << w << "\n";
      std::cout << out.run_dir.string() << "\n";
    } else if (*c_interp) {
      ip.mode = respwave::interpret::parse_attribution_mode(mode);
      ip.input_normalization = norm;
      const auto out = app::cmd_interpret(ip);
      const auto& d = out.distribution;
      for (std::size_t c = 0; c < d.rr_by_kernel.size(); ++c) {
        std::cout << "kernel " << c + 1 << ": " << d.rr_by_kernel[c].size() << " windows";
        if (!d.rr_by_kernel[c].empty()) std::cout << ", median RR " << respwave::eval::median(d.rr_by_kernel[c]);
        std::cout << "\n";
      }
      if (d.skipped_unannotated > 0)
        std::cerr << "warning: " << d.skipped_unannotated << " windows without reference RR were skipped\n";
      std::cout << out.run_dir.string() << "\n";
    } else if (*c_bench) {
      if (!bench_weights.empty()) bn.weights = bench_weights;
      const auto r = app::cmd_bench(bn);
      std::cout << "iterations " << r.iterations << "\nmean_ms " << r.mean_ms << "\np95_ms " << r.p95_ms
                << "\nthroughput_windows_per_s " << r.windows_per_s << "\nwaveform_hours_per_s "
                << r.waveform_hours_per_s << "\n"
                << r.run_dir.string() << "\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kOk;
}
