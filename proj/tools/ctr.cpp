#include <algorithm>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ctr/metrics.hpp"
#include "ctr/pipeline.hpp"
#include "ctr/pseudolabel.hpp"
#include "ctr/sceneio.hpp"
#include "ctr/simulator.hpp"
#include "ctr/solver.hpp"
#include "ctr/stft.hpp"
#include "ctr/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct HyperFlags {
  ctr::HyperParams hp;

  void attach(CLI::App* app) {
    app->add_option("--taps-past", hp.taps_past, "past filter taps");
    app->add_option("--taps-future", hp.taps_future, "future filter taps");
    app->add_option("--xi", hp.xi, "weighting floor factor");
    app->add_option("--alpha", hp.alpha, "magnitude compression factor");
    app->add_option("--beta", hp.beta, "activity-loss weight");
    app->add_option("--delta-weight", hp.delta_weight,
                    "close-talk-estimate loss weight");
    app->add_option("--theta", hp.theta, "weighted-sampling factor");
    app->add_option("--pred-delay", hp.pred_delay,
                    "prediction delay for reverb filters");
    app->add_option("--label-taps", hp.label_taps, "pseudo-label filter taps");
    app->add_option("--max-delay", hp.max_delay,
                    "max enumerated frame delay");
    app->add_option("--cte-taps", hp.cte_taps,
                    "taps per side in the close-talk-estimate filter");
  }
};

int cmd_simulate(const std::string& config_path, const std::string& out_dir) {
  const ctr::SceneConfig cfg =
      ctr::scene_config_from_json(ctr::read_text_file(config_path));
  const ctr::MixtureSet set = ctr::simulate_scene(cfg);
  ctr::write_mixture_set(out_dir, set, cfg.stft);
  ctr::write_text_file((fs::path(out_dir) / "scene_config.json").string(),
                       ctr::scene_config_to_json(cfg));
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

int cmd_solve(const std::string& mixture_dir, const std::string& out_dir,
              const ctr::SolverConfig& cfg, bool mute,
              const std::string& activity_path) {
  ctr::StftConfig stft_cfg;
  ctr::MixtureSet set = ctr::read_mixture_set(mixture_dir, &stft_cfg);
  const auto issues = ctr::validate(set);
  if (!issues.empty()) {
    for (const auto& line : issues) std::cerr << "invalid mixture: " << line << "\n";
    return 2;
  }
  const ctr::ActivityTimeline* activity = nullptr;
  ctr::ActivityTimeline loaded;
  if (mute) {
    if (!activity_path.empty()) {
      loaded = ctr::activity_from_json(ctr::read_text_file(activity_path));
      activity = &loaded;
    } else if (set.activity.num_speakers > 0) {
      activity = &set.activity;
    } else {
      std::cerr << "--mute requires activity (none in mixture dir)\n";
      return 2;
    }
  }
  const ctr::SolveResult res =
      ctr::solve_blind_deconvolution(set, cfg, activity);
  ctr::write_estimates(out_dir, res.estimates, stft_cfg, set.num_samples);

  std::ostringstream trace;
  trace << "iteration,objective\n";
  for (std::size_t i = 0; i < res.objective_trace.size(); ++i)
    trace << i << "," << res.objective_trace[i] << "\n";
  ctr::write_text_file((fs::path(out_dir) / "trace.csv").string(), trace.str());
  std::cout << "wrote " << out_dir << " (converged=" << res.converged << ")\n";
  return 0;
}

int cmd_pseudolabel(const std::string& mixture_dir,
                    const std::string& estimates_dir, std::size_t ref_array,
                    std::size_t ref_mic, const std::string& out_dir,
                    const ctr::HyperParams& hp) {
  ctr::StftConfig stft_cfg;
  const ctr::MixtureSet set = ctr::read_mixture_set(mixture_dir, &stft_cfg);
  std::size_t num_samples = 0;
  const std::vector<ctr::Spectrogram> estimates =
      ctr::read_estimates(estimates_dir, nullptr, &num_samples);
  if (ref_array >= set.far_field.size() ||
      ref_mic >= set.far_field[ref_array].size()) {
    std::cerr << "reference mic out of range\n";
    return 2;
  }
  ctr::PseudoLabelConfig cfg;
  cfg.label_taps = hp.label_taps;
  cfg.max_delay = hp.max_delay;
  cfg.weighting.xi = hp.xi;
  const ctr::PseudoLabelResult res = ctr::build_pseudo_labels(
      set.far_field[ref_array][ref_mic], estimates, cfg);

  fs::create_directories(out_dir);
  json meta{{"ref_array", ref_array},
            {"ref_mic", ref_mic},
            {"delays", res.delays},
            {"residuals", res.residuals},
            {"at_boundary", res.at_boundary}};
  ctr::write_estimates(out_dir, res.labels, stft_cfg, num_samples);
  ctr::write_text_file((fs::path(out_dir) / "labels.json").string(),
                       meta.dump(2));
  std::cout << "wrote " << out_dir << "\n";
  return 0;
}

// reference signals: an estimates-format dir, or a mixture dir with
// ground-truth close-talk speech
std::vector<std::vector<double>> load_reference_signals(
    const std::string& dir) {
  if (fs::exists(fs::path(dir) / "estimates.json")) {
    ctr::StftConfig cfg;
    std::size_t n = 0;
    const auto specs = ctr::read_estimates(dir, &cfg, &n);
    std::vector<std::vector<double>> out;
    for (const auto& s : specs) out.push_back(ctr::istft(s, cfg, n));
    return out;
  }
  ctr::StftConfig cfg;
  const ctr::MixtureSet set = ctr::read_mixture_set(dir, &cfg);
  if (!set.ground_truth || set.ground_truth->close_talk_speech.empty())
    throw std::runtime_error("reference dir has no ground-truth speech");
  std::vector<std::vector<double>> out;
  for (const auto& s : set.ground_truth->close_talk_speech)
    out.push_back(ctr::istft(s, cfg, set.num_samples));
  return out;
}

int cmd_eval(const std::string& ref_dir, const std::string& est_dir,
             const std::string& out_report) {
  const auto refs = load_reference_signals(ref_dir);
  ctr::StftConfig cfg;
  std::size_t n = 0;
  const auto est_specs = ctr::read_estimates(est_dir, &cfg, &n);
  if (est_specs.size() != refs.size())
    throw std::runtime_error("reference/estimate channel count mismatch");
  json channels = json::array();
  for (std::size_t c = 0; c < refs.size(); ++c) {
    if (refs[c].size() != n)
      throw std::runtime_error("reference/estimate length mismatch");
    const std::vector<double> est = ctr::istft(est_specs[c], cfg, n);
    channels.push_back({{"channel", c},
                        {"si_sdr_db", ctr::si_sdr(refs[c], est)},
                        {"snr_db", ctr::snr(refs[c], est)}});
  }
  ctr::write_text_file(out_report, json{{"channels", channels}}.dump(2));
  std::cout << "wrote " << out_report << "\n";
  return 0;
}

int cmd_stitch(const std::string& blocks_dir, const ctr::BlockPlan& plan,
               std::size_t session_len, const std::string& out_wav) {
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(blocks_dir))
    if (e.path().extension() == ".wav") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  const auto ranges = ctr::split_blocks(session_len, plan);
  if (files.size() != ranges.size())
    throw std::runtime_error("block count mismatch: dir has " +
                             std::to_string(files.size()) + ", plan needs " +
                             std::to_string(ranges.size()));
  std::vector<std::vector<double>> blocks;
  double sr = plan.sample_rate;
  for (const auto& f : files) {
    ctr::WavData wav = ctr::read_wav(f.string());
    sr = wav.sample_rate;
    blocks.push_back(std::move(wav.samples));
  }
  const std::vector<double> session =
      ctr::stitch_blocks(blocks, ranges, session_len);
  ctr::write_wav(out_wav, session, sr);
  json sidecar{{"block_s", plan.block_s},
               {"ctx_s", plan.ctx_s},
               {"out_s", plan.out_s},
               {"shift_s", plan.shift_s},
               {"sample_rate", plan.sample_rate},
               {"session_len", session_len},
               {"num_blocks", ranges.size()}};
  ctr::write_text_file(out_wav + ".json", sidecar.dump(2));
  std::cout << "wrote " << out_wav << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cross-talk reduction toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker cap (0 = hardware default)");

  HyperFlags hyper;

  auto* sim = app.add_subcommand("simulate", "generate a synthetic scene");
  std::string sim_config, sim_out;
  sim->add_option("config", sim_config, "scene config JSON")->required();
  sim->add_option("out_dir", sim_out, "output directory")->required();

  auto* solve = app.add_subcommand("solve", "run the alternating solver");
  std::string solve_mix, solve_out, solve_activity;
  ctr::SolverConfig solver_cfg;
  bool solve_mute = false;
  std::string solve_init = "mixture";
  solve->add_option("mixture_dir", solve_mix)->required();
  solve->add_option("out_dir", solve_out)->required();
  solve->add_option("--max-iters", solver_cfg.max_outer_iters);
  solve->add_option("--cg-tol", solver_cfg.cg_tol);
  solve->add_option("--cg-max-iters", solver_cfg.cg_max_iters);
  solve->add_option("--convergence-rel", solver_cfg.convergence_rel);
  solve->add_option("--init", solve_init, "mixture|zero");
  solve->add_flag("--mute", solve_mute, "apply frame muting from activity");
  solve->add_option("--activity", solve_activity, "activity JSON override");
  hyper.attach(solve);

  auto* pl = app.add_subcommand("pseudolabel", "build far-field pseudo-labels");
  std::string pl_mix, pl_est, pl_out;
  std::size_t pl_array = 0, pl_mic = 0;
  pl->add_option("mixture_dir", pl_mix)->required();
  pl->add_option("estimates_dir", pl_est)->required();
  pl->add_option("out_dir", pl_out)->required();
  pl->add_option("--ref-array", pl_array, "reference far-field array");
  pl->add_option("--ref-mic", pl_mic, "reference mic within the array");
  hyper.attach(pl);

  auto* ev = app.add_subcommand("eval", "score estimates against references");
  std::string ev_ref, ev_est, ev_report;
  ev->add_option("ref_dir", ev_ref)->required();
  ev->add_option("est_dir", ev_est)->required();
  ev->add_option("out_report", ev_report)->required();

  auto* st = app.add_subcommand("stitch", "stitch block outputs to a session");
  std::string st_dir, st_out;
  ctr::BlockPlan st_plan;
  std::size_t st_session_len = 0;
  st->add_option("blocks_dir", st_dir)->required();
  st->add_option("out_wav", st_out)->required();
  st->add_option("--session-len", st_session_len, "session length in samples")
      ->required();
  st->add_option("--block-s", st_plan.block_s);
  st->add_option("--ctx-s", st_plan.ctx_s);
  st->add_option("--out-s", st_plan.out_s);
  st->add_option("--shift-s", st_plan.shift_s);
  st->add_option("--sample-rate", st_plan.sample_rate);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(sim_config, sim_out);
    if (*solve) {
      solver_cfg.hp = hyper.hp;
      solver_cfg.hp.validate();
      if (solve_init == "zero") solver_cfg.init = ctr::SolverInit::Zero;
      else if (solve_init == "mixture")
        solver_cfg.init = ctr::SolverInit::CloseTalkMixture;
      else {
        std::cerr << "unknown --init value: " << solve_init << "\n";
        return 1;
      }
      return cmd_solve(solve_mix, solve_out, solver_cfg, solve_mute,
                       solve_activity);
    }
    if (*pl) {
      hyper.hp.validate();
      return cmd_pseudolabel(pl_mix, pl_est, pl_array, pl_mic, pl_out,
                             hyper.hp);
    }
    if (*ev) return cmd_eval(ev_ref, ev_est, ev_report);
    if (*st) return cmd_stitch(st_dir, st_plan, st_session_len, st_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
