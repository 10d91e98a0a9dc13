// Command-line front end. Links the C API only.

#include <cstdint>
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "typojack.h"

namespace {

struct CommonArgs {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string mode;
  bool defense = false;
  bool defense_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, CommonArgs* args) {
  cmd->add_option("--config", args->config, "Path to the JSON config file")
      ->required();
  cmd->add_option("--seed", args->seed, "Override the master seed")
      ->each([args](const std::string&) { args->seed_set = true; });
  cmd->add_option("--mode", args->mode,
                  "Override the attack mode (image_only | image_plus_text)");
  cmd->add_flag("--defense", args->defense, "Enable the caption-based defense")
      ->each([args](const std::string&) { args->defense_set = true; });
  cmd->add_option("--out", args->out, "Override the output directory");
}

// 0 on success, 1 on configuration/hard errors, 2 on partial runs.
int exit_code_for(tj_status status) {
  switch (status) {
    case TJ_OK:
      return 0;
    case TJ_ERROR_PARTIAL:
      return 2;
    default:
      return 1;
  }
}

struct SessionGuard {
  tj_session* session = nullptr;
  ~SessionGuard() { tj_session_close(session); }
};

int open_session(const CommonArgs& args, SessionGuard* guard) {
  tj_status status = tj_session_open(args.config.c_str(), &guard->session);
  if (status != TJ_OK) {
    std::fprintf(stderr, "error: %s\n", tj_global_last_error());
    return exit_code_for(status);
  }
  tj_session* s = guard->session;
  if (args.seed_set) tj_session_override_seed(s, args.seed);
  if (!args.mode.empty()) {
    if (tj_session_override_mode(s, args.mode.c_str()) != TJ_OK) {
      std::fprintf(stderr, "error: %s\n", tj_session_last_error(s));
      return 1;
    }
  }
  if (args.defense_set) {
    if (tj_session_override_defense(s, args.defense ? 1 : 0) != TJ_OK) {
      std::fprintf(stderr, "error: %s\n", tj_session_last_error(s));
      return 1;
    }
  }
  if (!args.out.empty()) tj_session_override_output_dir(s, args.out.c_str());
  return -1;  // keep going
}

int finish(tj_session* session, tj_status status, const char* what) {
  if (status == TJ_OK) {
    std::printf("%s: done\n", what);
  } else if (status == TJ_ERROR_PARTIAL) {
    std::fprintf(stderr, "%s: partial (%s)\n", what, tj_session_last_error(session));
  } else {
    std::fprintf(stderr, "%s: error: %s\n", what, tj_session_last_error(session));
  }
  return exit_code_for(status);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typojack: typographic prompt-injection red teaming"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(tj_version()));

  CommonArgs optimize_args, attack_args, campaign_args, defend_args, report_args;
  std::string image_path, prompt, goal_id, image_dir, campaign_dir;

  CLI::App* optimize =
      app.add_subcommand("optimize", "Optimize a prompt's typographic embedding into one image");
  add_common(optimize, &optimize_args);
  optimize->add_option("--image", image_path, "Input PNG")->required();
  optimize->add_option("--prompt", prompt, "Injection prompt text")->required();

  CLI::App* attack =
      app.add_subcommand("attack", "Run the adaptive refinement loop for one goal");
  add_common(attack, &attack_args);
  attack->add_option("--goal", goal_id, "Goal id from the task suite")->required();

  CLI::App* campaign =
      app.add_subcommand("campaign", "Run the full task suite and report ASR");
  add_common(campaign, &campaign_args);

  CLI::App* defend =
      app.add_subcommand("defend", "Run injection detection over a directory of PNGs");
  add_common(defend, &defend_args);
  defend->add_option("--dir", image_dir, "Directory of .png files")->required();

  CLI::App* report =
      app.add_subcommand("report", "Re-render tables from a campaign directory");
  add_common(report, &report_args);
  report->add_option("--from", campaign_dir, "Campaign output directory")->required();

  CLI11_PARSE(app, argc, argv);

  if (optimize->parsed()) {
    SessionGuard guard;
    if (int rc = open_session(optimize_args, &guard); rc >= 0) return rc;
    return finish(guard.session,
                  tj_run_optimize(guard.session, image_path.c_str(), prompt.c_str()),
                  "optimize");
  }
  if (attack->parsed()) {
    SessionGuard guard;
    if (int rc = open_session(attack_args, &guard); rc >= 0) return rc;
    return finish(guard.session, tj_run_attack(guard.session, goal_id.c_str()),
                  "attack");
  }
  if (campaign->parsed()) {
    SessionGuard guard;
    if (int rc = open_session(campaign_args, &guard); rc >= 0) return rc;
    return finish(guard.session, tj_run_campaign(guard.session), "campaign");
  }
  if (defend->parsed()) {
    SessionGuard guard;
    if (int rc = open_session(defend_args, &guard); rc >= 0) return rc;
    return finish(guard.session, tj_run_defend(guard.session, image_dir.c_str()),
                  "defend");
  }
  if (report->parsed()) {
    SessionGuard guard;
    if (int rc = open_session(report_args, &guard); rc >= 0) return rc;
    return finish(guard.session, tj_run_report(guard.session, campaign_dir.c_str()),
                  "report");
  }
  return 1;
}
