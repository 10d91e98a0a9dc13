#pragma once

#include <memory>
#include <string>
#include <vector>

#include "typojack/adaptive.hpp"
#include "typojack/harness.hpp"
#include "typojack/perceptual.hpp"
#include "typojack/placement.hpp"
#include "typojack/providers.hpp"

namespace typojack::campaign {

struct ProviderBinding {
  std::string kind;  // "synthetic" | "scripted" | "rule" | "http" | "default" | "remote_lpips" | "none"
  providers::HttpOptions http;
  std::uint64_t seed = 0;
};

struct CampaignConfig {
  harness::Mode mode = harness::Mode::image_only;
  double stealth_weight = 10.0;
  int optimizer_iters = 0;  // 0 = default: 50 for synthetic stacks, 20 for live
  int max_refine_steps = 20;
  int retrieval_k = 5;
  double success_threshold = 0.8;
  std::uint64_t master_seed = 0;
  bool defense_enabled = false;
  bool refine_enabled = true;
  int trials_per_task = 3;
  int workers = 1;
  double early_stop_total = -0.95;

  std::string font_path;
  std::string task_suite_path;
  std::string strategy_library_path;
  std::string attack_log_path;
  std::string output_dir;

  std::vector<ProviderBinding> captioners;
  ProviderBinding embedder;
  ProviderBinding attacker;
  ProviderBinding scorer;
  ProviderBinding summarizer;
  ProviderBinding victim;
  ProviderBinding victim_captioner;  // kind "none" -> first ensemble member
  ProviderBinding detector;
  ProviderBinding perceptual;

  bool stack_is_live() const;
  int effective_optimizer_iters() const;
};

/// Parses and validates the JSON config; relative paths resolve against the
/// config file's directory. Raises config_error naming the offending field.
CampaignConfig load_config(const std::string& path);

/// Built provider instances for one run.
struct ProviderSet {
  std::vector<std::unique_ptr<providers::Captioner>> captioner_storage;
  std::vector<providers::Captioner*> captioners;
  std::unique_ptr<providers::Embedder> embedder;
  std::unique_ptr<providers::ChatModel> attacker;
  std::unique_ptr<providers::ChatModel> summarizer;
  std::unique_ptr<providers::ChatModel> scorer_chat;  // when scorer kind is chat-backed
  std::unique_ptr<adaptive::Scorer> scorer;
  std::unique_ptr<providers::ChatModel> victim_chat;  // live victim only
  std::unique_ptr<providers::Captioner> victim_captioner;
  std::unique_ptr<providers::Captioner> detector;
  std::unique_ptr<perceptual::DistanceProvider> distance;
  bool victim_is_scripted = true;

  std::unique_ptr<harness::Victim> make_victim(const harness::TaskSpec& task) const;
};

ProviderSet build_providers(const CampaignConfig& config);

/// One startup probe per live role; synthetic/scripted kinds are skipped.
void health_check(const CampaignConfig& config);

std::uint64_t task_seed(std::uint64_t master_seed, const std::string& goal_id);

struct TaskResult {
  harness::TrialOutcome outcome;
  adaptive::AdaptiveReport refine_report;  // empty when refinement disabled
  placement::Result placement;             // final artifacts evaluated
  std::string final_prompt;
  bool refined = false;
};

struct CampaignResult {
  std::vector<TaskResult> tasks;
  double asr = 0.0;
  double asr_wrong_action = 0.0;
  double asr_wrong_information = 0.0;
  bool partial = false;
  int exit_code = 0;
};

/// Full run over the task suite: attack, evaluate with repeated trials,
/// aggregate ASR, and write every artifact under output_dir.
CampaignResult run_campaign(const CampaignConfig& config);

/// Single-image placement optimization; writes the final PNG, mask sidecars,
/// trial trace and run manifest under output_dir.
placement::Result run_optimize(const CampaignConfig& config,
                               const std::string& image_path,
                               const std::string& prompt);

/// Single-goal refinement loop for one task from the suite.
TaskResult run_attack(const CampaignConfig& config, const std::string& goal_id);

struct DefendOutcome {
  std::string file;
  bool flagged = false;
};

/// Runs injection detection over every .png in a directory (mask sidecars are
/// honored when present) and writes defense_report.csv under output_dir.
std::vector<DefendOutcome> run_defend(const CampaignConfig& config,
                                      const std::string& image_dir);

/// Re-renders report.csv and summary.txt from a previous campaign's
/// outcomes.jsonl.
void run_report(const CampaignConfig& config, const std::string& campaign_dir);

// Mask sidecars: coverage as 8-bit gray PNG plus a JSON with render facts.
void save_mask(const typography::CoverageMask& mask, const std::string& png_path,
               const std::string& json_path);
typography::CoverageMask load_mask(const std::string& png_path,
                                   const std::string& json_path);

}  // namespace typojack::campaign
