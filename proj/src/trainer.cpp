#include "navlab/trainer.hpp"

#include <sstream>
#include <thread>

#include "navlab/checkpoint.hpp"
#include "navlab/util.hpp"

namespace navlab {

Regime regime_from_string(const std::string& s) {
  if (s == "aal") return Regime::kAal;
  if (s == "teacher") return Regime::kTeacher;
  if (s == "student") return Regime::kStudent;
  if (s == "professor") return Regime::kProfessor;
  if (s == "alternate") return Regime::kAlternateOnly;
  throw ValidationError("unknown regime: " + s);
}

std::string to_string(Regime r) {
  switch (r) {
    case Regime::kAal: return "aal";
    case Regime::kTeacher: return "teacher";
    case Regime::kStudent: return "student";
    case Regime::kProfessor: return "professor";
    case Regime::kAlternateOnly: return "alternate";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (interval < 1) throw ValidationError("train: interval must be >= 1");
  if (batch < 1) throw ValidationError("train: batch must be >= 1");
  if (iters < 1) throw ValidationError("train: iters must be >= 1");
  if (!(lr_gen > 0.0) || !(lr_dis > 0.0)) throw ValidationError("train: learning rates must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ValidationError("train: dropout out of [0,1)");
  if (workers < 0) throw ValidationError("train: workers must be >= 0");
}

std::vector<std::string> config_warnings(const TrainConfig& cfg) {
  std::vector<std::string> out;
  const bool alternating = cfg.regime == Regime::kAal || cfg.regime == Regime::kAlternateOnly;
  if (!alternating && cfg.interval != 1) {
    out.push_back("interval is ignored by regime '" + to_string(cfg.regime) + "'");
  }
  const bool adversarial = cfg.regime == Regime::kAal || cfg.regime == Regime::kProfessor;
  if (!adversarial && cfg.lr_dis != 1e-3) {
    out.push_back("lr_dis is ignored by regime '" + to_string(cfg.regime) + "'");
  }
  return out;
}

bool is_teacher_iteration(long iter, int interval) {
  return (((iter - 1) / interval) % 2) == 0;
}

Tensor nll_loss(const TrajectoryRecord& rec) {
  if (rec.steps.empty()) throw ValidationError("nll_loss: empty trajectory");
  Tensor total;
  for (const StepTrace& s : rec.steps) {
    if (s.supervision < 0) throw ValidationError("nll_loss: step without supervision");
    Tensor term = neg(log(element(s.probs, s.supervision)));
    total = total.defined() ? total + term : term;
  }
  return total;
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::ostringstream out;
  out << "iteration,split,ne,sr,spl,tl,nll_tf,nll_sf,l_dis,l_gen,mode\n";
  auto opt = [](const std::optional<double>& v) {
    return v.has_value() ? format_double(*v) : std::string();
  };
  for (const MetricRow& r : rows) {
    out << r.iter << "," << r.split << "," << format_double(r.ne) << "," << format_double(r.sr)
        << "," << format_double(r.spl) << "," << format_double(r.tl) << "," << opt(r.nll_tf)
        << "," << opt(r.nll_sf) << "," << opt(r.l_dis) << "," << opt(r.l_gen) << "," << r.mode
        << "\n";
  }
  return out.str();
}

nlohmann::json RunManifest::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const MetricRow& r : rows) {
    nlohmann::json jr{{"iteration", r.iter}, {"split", r.split}, {"ne", r.ne},
                      {"sr", r.sr},          {"spl", r.spl},     {"tl", r.tl},
                      {"mode", r.mode}};
    if (r.nll_tf) jr["nll_tf"] = *r.nll_tf;
    if (r.nll_sf) jr["nll_sf"] = *r.nll_sf;
    if (r.l_dis) jr["l_dis"] = *r.l_dis;
    if (r.l_gen) jr["l_gen"] = *r.l_gen;
    rows_json.push_back(std::move(jr));
  }
  return nlohmann::json{{"config", config},
                        {"inputs", inputs},
                        {"rows", rows_json},
                        {"checkpoint", checkpoint_path}};
}

Trainer::Trainer(TrainConfig cfg, NavigatorParams generator, DiscriminatorParams discriminator)
    : cfg_(std::move(cfg)),
      gen_(std::move(generator)),
      dis_(std::move(discriminator)),
      opt_gen_(gen_.params(), AdamConfig{cfg_.lr_gen, 0.9, 0.999, 1e-8}),
      opt_dis_(dis_.params(), AdamConfig{cfg_.lr_dis, 0.9, 0.999, 1e-8}) {
  cfg_.validate();
  const int expected =
      behavior_dim(cfg_.behavior, gen_.config.dec_hidden, gen_.config.max_directions);
  if (dis_.config.input_dim != expected) {
    throw ValidationError("trainer: discriminator input width does not match behavior kind");
  }
}

Trainer::BatchRollouts Trainer::run_batch(long iter, const std::vector<const Episode*>& batch,
                                          const GraphStore& graphs, bool need_teacher,
                                          bool need_student) {
  BatchRollouts out;
  if (need_teacher) out.teacher.resize(batch.size());
  if (need_student) out.student.resize(batch.size());

  auto roll_slot = [&](size_t slot) {
    const Episode& ep = *batch[slot];
    const NavGraph& g = graphs.at(ep.graph_id);
    // no dropout on the instruction path, so both rollouts share one encoding
    EncodedInstruction enc = encode_instruction(ep.instruction, gen_);
    if (need_teacher) {
      Rng rng = substream(cfg_.seed, "rollout_tf", static_cast<uint64_t>(iter), slot);
      RolloutOptions opts;
      opts.mode = RolloutMode::kTeacher;
      opts.dropout = cfg_.dropout;
      opts.rng = &rng;
      opts.encoded = &enc;
      out.teacher[slot] = rollout(ep, g, gen_, opts);
    }
    if (need_student) {
      Rng rng = substream(cfg_.seed, "rollout_sf", static_cast<uint64_t>(iter), slot);
      RolloutOptions opts;
      opts.mode = RolloutMode::kStudent;
      opts.dropout = cfg_.dropout;
      opts.rng = &rng;
      opts.encoded = &enc;
      out.student[slot] = rollout(ep, g, gen_, opts);
    }
  };

  const int workers = std::min<int>(cfg_.workers, static_cast<int>(batch.size()));
  if (workers <= 1) {
    for (size_t slot = 0; slot < batch.size(); ++slot) roll_slot(slot);
  } else {
    // Forward-only parallelism: parameters are immutable during rollouts and
    // every slot owns its tape; backward stays on the calling thread.
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (size_t slot = static_cast<size_t>(w); slot < batch.size();
             slot += static_cast<size_t>(workers)) {
          roll_slot(slot);
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  return out;
}

void Trainer::apply_update(Adam& opt, const Tensor& loss, const char* target,
                           const char* loss_name, const char* source,
                           IterationAudit& audit) {
  opt_gen_.zero_grad();
  opt_dis_.zero_grad();
  backward(loss);
  opt.step(cfg_.clip_norm);
  audit.updates.push_back({target, loss_name, source});
}

namespace {

Tensor batch_mean_nll(const std::vector<TrajectoryRecord>& records) {
  Tensor total;
  for (const TrajectoryRecord& r : records) {
    Tensor term = nll_loss(r);
    total = total.defined() ? total + term : term;
  }
  return scale(total, 1.0 / static_cast<double>(records.size()));
}

}  // namespace

void Trainer::evaluate_splits(long iter, const Dataset& dataset, const GraphStore& graphs,
                              const std::string& mode, std::vector<MetricRow>& rows) {
  const auto nll_tf = meter_nll_tf_.take();
  const auto nll_sf = meter_nll_sf_.take();
  const auto l_dis = meter_dis_.take();
  const auto l_gen = meter_gen_.take();
  for (const char* split : {"val_seen", "val_unseen"}) {
    const auto episodes = dataset.split(split);
    if (episodes.empty()) continue;
    const EvalResult res = evaluate(episodes, graphs, greedy_runner(gen_));
    MetricRow row;
    row.iter = iter;
    row.split = split;
    row.ne = res.ne;
    row.sr = res.sr;
    row.spl = res.spl;
    row.tl = res.tl;
    row.nll_tf = nll_tf;
    row.nll_sf = nll_sf;
    row.l_dis = l_dis;
    row.l_gen = l_gen;
    row.mode = mode;
    rows.push_back(std::move(row));
  }
}

RunManifest Trainer::run(const Dataset& dataset, const GraphStore& graphs) {
  const auto train_eps = dataset.split("train");
  if (train_eps.empty()) throw ValidationError("trainer: empty train split");

  RunManifest manifest;
  audit_.clear();

  for (long iter = 1; iter <= cfg_.iters; ++iter) {
    // sample the batch
    Rng sample_rng = substream(cfg_.seed, "sampling", static_cast<uint64_t>(iter));
    std::vector<const Episode*> batch;
    batch.reserve(static_cast<size_t>(cfg_.batch));
    for (int i = 0; i < cfg_.batch; ++i) {
      batch.push_back(train_eps[static_cast<size_t>(
          sample_rng.uniform_int(static_cast<int>(train_eps.size())))]);
    }

    const bool teacher_mode = is_teacher_iteration(iter, cfg_.interval);
    IterationAudit audit;
    audit.iter = iter;
    audit.mode = teacher_mode ? "tf" : "sf";

    Rng dis_rng = substream(cfg_.seed, "dis_dropout", static_cast<uint64_t>(iter));

    switch (cfg_.regime) {
      case Regime::kTeacher: {
        audit.mode = "tf";
        const auto rolls = run_batch(iter, batch, graphs, true, false);
        const Tensor loss = batch_mean_nll(rolls.teacher);
        meter_nll_tf_.add(loss.item());
        apply_update(opt_gen_, loss, "generator", "nll_tf", "tf", audit);
        break;
      }
      case Regime::kStudent: {
        audit.mode = "sf";
        const auto rolls = run_batch(iter, batch, graphs, false, true);
        const Tensor loss = batch_mean_nll(rolls.student);
        meter_nll_sf_.add(loss.item());
        apply_update(opt_gen_, loss, "generator", "nll_sf", "sf", audit);
        break;
      }
      case Regime::kAlternateOnly: {
        const auto rolls = run_batch(iter, batch, graphs, teacher_mode, !teacher_mode);
        if (teacher_mode) {
          const Tensor loss = batch_mean_nll(rolls.teacher);
          meter_nll_tf_.add(loss.item());
          apply_update(opt_gen_, loss, "generator", "nll_tf", "tf", audit);
        } else {
          const Tensor loss = batch_mean_nll(rolls.student);
          meter_nll_sf_.add(loss.item());
          apply_update(opt_gen_, loss, "generator", "nll_sf", "sf", audit);
        }
        break;
      }
      case Regime::kProfessor: {
        // Teacher NLL plus adversarial regularization; the fooling gradient
        // only flows from student-forced behavior (toward teacher dynamics).
        audit.mode = "tf";
        const auto rolls = run_batch(iter, batch, graphs, true, true);
        const Tensor nll = batch_mean_nll(rolls.teacher);
        meter_nll_tf_.add(nll.item());
        meter_nll_sf_.add(batch_mean_nll(rolls.student).item());

        std::vector<std::vector<Tensor>> tf_behaviors, sf_behaviors;
        for (const auto& r : rolls.teacher) {
          tf_behaviors.push_back(behavior_sequence(r, cfg_.behavior, gen_.config.max_directions));
        }
        for (const auto& r : rolls.student) {
          sf_behaviors.push_back(behavior_sequence(r, cfg_.behavior, gen_.config.max_directions));
        }
        std::vector<std::vector<Tensor>> tf_detached, sf_detached;
        for (const auto& b : tf_behaviors) tf_detached.push_back(detach_sequence(b));
        for (const auto& b : sf_behaviors) sf_detached.push_back(detach_sequence(b));
        const Tensor dis_loss =
            discriminator_loss(tf_detached, sf_detached, dis_, 1, true, &dis_rng);
        meter_dis_.add(dis_loss.item());

        apply_update(opt_gen_, nll, "generator", "nll_tf", "tf", audit);
        apply_update(opt_dis_, dis_loss, "discriminator", "dis_stage1", "tf+sf", audit);
        const Tensor gen_loss = generator_fooling_loss(sf_behaviors, dis_, 1, true, &dis_rng);
        meter_gen_.add(gen_loss.item());
        apply_update(opt_gen_, gen_loss, "generator", "gen_stage1", "sf", audit);
        break;
      }
      case Regime::kAal: {
        // Algorithm order per iteration: both rollouts, the discriminator
        // loss on the pre-update values, then the stage's three updates.
        const auto rolls = run_batch(iter, batch, graphs, true, true);
        const Tensor nll_tf = batch_mean_nll(rolls.teacher);
        const Tensor nll_sf = batch_mean_nll(rolls.student);
        meter_nll_tf_.add(nll_tf.item());
        meter_nll_sf_.add(nll_sf.item());

        std::vector<std::vector<Tensor>> tf_behaviors, sf_behaviors;
        for (const auto& r : rolls.teacher) {
          tf_behaviors.push_back(behavior_sequence(r, cfg_.behavior, gen_.config.max_directions));
        }
        for (const auto& r : rolls.student) {
          sf_behaviors.push_back(behavior_sequence(r, cfg_.behavior, gen_.config.max_directions));
        }
        std::vector<std::vector<Tensor>> tf_detached, sf_detached;
        for (const auto& b : tf_behaviors) tf_detached.push_back(detach_sequence(b));
        for (const auto& b : sf_behaviors) sf_detached.push_back(detach_sequence(b));

        const int stage = teacher_mode ? 1 : 2;
        const Tensor dis_loss =
            discriminator_loss(tf_detached, sf_detached, dis_, stage, true, &dis_rng);
        meter_dis_.add(dis_loss.item());

        if (teacher_mode) {
          apply_update(opt_gen_, nll_tf, "generator", "nll_tf", "tf", audit);
          apply_update(opt_dis_, dis_loss, "discriminator", "dis_stage1", "tf+sf", audit);
          const Tensor gen_loss = generator_fooling_loss(sf_behaviors, dis_, 1, true, &dis_rng);
          meter_gen_.add(gen_loss.item());
          apply_update(opt_gen_, gen_loss, "generator", "gen_stage1", "sf", audit);
        } else {
          apply_update(opt_gen_, nll_sf, "generator", "nll_sf", "sf", audit);
          apply_update(opt_dis_, dis_loss, "discriminator", "dis_stage2", "tf+sf", audit);
          const Tensor gen_loss = generator_fooling_loss(tf_behaviors, dis_, 2, true, &dis_rng);
          meter_gen_.add(gen_loss.item());
          apply_update(opt_gen_, gen_loss, "generator", "gen_stage2", "tf", audit);
        }
        break;
      }
    }

    audit_.push_back(std::move(audit));

    const bool last = iter == cfg_.iters;
    if ((cfg_.eval_every > 0 && iter % cfg_.eval_every == 0) || last) {
      evaluate_splits(iter, dataset, graphs, audit_.back().mode, manifest.rows);
    }
    if (!cfg_.out_dir.empty() && cfg_.checkpoint_every > 0 && iter % cfg_.checkpoint_every == 0 &&
        !last) {
      save_checkpoint(cfg_.out_dir + "/ckpt_" + std::to_string(iter) + ".bin", iter);
    }
  }

  if (!cfg_.out_dir.empty()) {
    manifest.checkpoint_path = cfg_.out_dir + "/ckpt_final.bin";
    save_checkpoint(manifest.checkpoint_path, cfg_.iters);
  }
  return manifest;
}

void Trainer::save_checkpoint(const std::string& path, long iter) const {
  Checkpoint ck;
  ck.meta["version"] = 1;
  ck.meta["iteration"] = iter;
  // seed + iteration determine every derived stream position
  ck.meta["seed"] = cfg_.seed;
  ck.meta["model"] = {{"vocab_size", gen_.config.vocab_size},
                      {"feature_dim", gen_.config.feature_dim},
                      {"word_dim", gen_.config.word_dim},
                      {"enc_hidden", gen_.config.enc_hidden},
                      {"dec_hidden", gen_.config.dec_hidden},
                      {"proj_dim", gen_.config.proj_dim},
                      {"action_dim", gen_.config.action_dim},
                      {"max_directions", gen_.config.max_directions},
                      {"grounding", to_string(gen_.config.grounding)},
                      {"behavior", to_string(cfg_.behavior)}};
  ck.put_params("gen", gen_.params());
  ck.put_params("dis", dis_.params());
  ck.put_adam("opt_gen", opt_gen_);
  ck.put_adam("opt_dis", opt_dis_);
  ck.save(path);
}

void Trainer::load_checkpoint(const std::string& path) {
  const Checkpoint ck = Checkpoint::load(path);
  ParamSet gen_set = gen_.params();
  ParamSet dis_set = dis_.params();
  ck.load_params("gen", gen_set);
  ck.load_params("dis", dis_set);
  ck.load_adam("opt_gen", opt_gen_);
  ck.load_adam("opt_dis", opt_dis_);
}

}  // namespace navlab
