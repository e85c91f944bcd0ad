#pragma once

#include <optional>
#include <string>
#include <vector>

#include "navlab/discriminator.hpp"
#include "navlab/episode.hpp"
#include "navlab/metrics.hpp"
#include "navlab/navigator.hpp"

namespace navlab {

enum class Regime { kAal, kTeacher, kStudent, kProfessor, kAlternateOnly };

Regime regime_from_string(const std::string& s);
std::string to_string(Regime r);

struct TrainConfig {
  Regime regime = Regime::kAal;
  int interval = 1;  // iterations per mode before alternating
  int batch = 16;
  double lr_gen = 1e-3;
  double lr_dis = 1e-3;
  int iters = 3000;
  double dropout = 0.4;
  uint64_t seed = 1;
  int eval_every = 500;       // 0 = evaluate at the end only
  int checkpoint_every = 0;   // 0 = final checkpoint only
  BehaviorKind behavior = BehaviorKind::kHidden;
  double clip_norm = 0.0;  // 0 = no clipping
  int workers = 0;         // parallel forward rollouts; backward stays on one thread
  std::string out_dir;     // empty = keep everything in memory

  void validate() const;
};

// Flag combinations that are accepted but ignored, reported before any compute.
std::vector<std::string> config_warnings(const TrainConfig& cfg);

// Mode-sequence law: iteration i (1-based) runs teacher-forcing iff
// floor((i-1)/interval) is even; the first mode is always teacher-forcing.
bool is_teacher_iteration(long iter, int interval);

// Sum over steps of -log p[supervision]; batch losses average these.
Tensor nll_loss(const TrajectoryRecord& rec);

struct AppliedUpdate {
  std::string target;  // "generator" | "discriminator"
  std::string loss;    // "nll_tf" | "nll_sf" | "dis_stage1" | ...
  std::string source;  // which rollout's tape fed the gradient
};

struct IterationAudit {
  long iter = 0;
  std::string mode;  // "tf" | "sf"
  std::vector<AppliedUpdate> updates;
};

struct MetricRow {
  long iter = 0;
  std::string split;
  double ne = 0.0, sr = 0.0, spl = 0.0, tl = 0.0;
  std::optional<double> nll_tf, nll_sf, l_dis, l_gen;
  std::string mode;
};

std::string metrics_csv(const std::vector<MetricRow>& rows);

struct RunManifest {
  nlohmann::json config;
  nlohmann::json inputs;  // content hashes of the dataset/vocab/env files
  std::vector<MetricRow> rows;
  std::string checkpoint_path;

  nlohmann::json to_json() const;
};

class Trainer {
 public:
  Trainer(TrainConfig cfg, NavigatorParams generator, DiscriminatorParams discriminator);

  // Runs the configured regime over the train split, evaluating greedily on
  // both validation splits at the configured cadence (always at the end).
  RunManifest run(const Dataset& dataset, const GraphStore& graphs);

  const std::vector<IterationAudit>& audit() const { return audit_; }
  NavigatorParams& generator() { return gen_; }
  DiscriminatorParams& discriminator() { return dis_; }
  Adam& generator_optimizer() { return opt_gen_; }
  Adam& discriminator_optimizer() { return opt_dis_; }

  void save_checkpoint(const std::string& path, long iter) const;
  // Restores parameter and optimizer state; widths must match.
  void load_checkpoint(const std::string& path);

 private:
  struct LossMeter {
    double sum = 0.0;
    long count = 0;
    void add(double v) {
      sum += v;
      ++count;
    }
    std::optional<double> take() {
      if (count == 0) return std::nullopt;
      const double mean = sum / static_cast<double>(count);
      sum = 0.0;
      count = 0;
      return mean;
    }
  };

  struct BatchRollouts {
    std::vector<TrajectoryRecord> teacher;
    std::vector<TrajectoryRecord> student;
  };

  BatchRollouts run_batch(long iter, const std::vector<const Episode*>& batch,
                          const GraphStore& graphs, bool need_teacher, bool need_student);
  void apply_update(Adam& opt, const Tensor& loss, const char* target, const char* loss_name,
                    const char* source, IterationAudit& audit);
  void evaluate_splits(long iter, const Dataset& dataset, const GraphStore& graphs,
                       const std::string& mode, std::vector<MetricRow>& rows);

  TrainConfig cfg_;
  NavigatorParams gen_;
  DiscriminatorParams dis_;
  Adam opt_gen_;
  Adam opt_dis_;
  std::vector<IterationAudit> audit_;
  LossMeter meter_nll_tf_, meter_nll_sf_, meter_dis_, meter_gen_;
};

}  // namespace navlab
