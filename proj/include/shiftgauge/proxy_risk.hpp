#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/class_divergence.hpp"
#include "shiftgauge/dir_trainer.hpp"

// Proxy risk of a candidate model: pretrain a domain-invariant check model,
// fix the feasibility budget from its objective, then ascend the check
// model's disagreement with the candidate under the Lagrangian penalty,
// recording the best feasible zero-one disagreement. Extensions: worst
// in-class proxy risk for division self-tuning, early-stopping series, and
// point-wise error detection.

namespace shiftgauge {

struct ProxyTraceRow {
  int epoch = 0;
  double disagreement = 0.0;
  double constraint_value = 0.0;
  bool feasible = false;
};

struct ProxyResult {
  double max_risk = 0.0;
  Hypothesis best_check_model;
  double epsilon_used = 0.0;
  int feasible_epochs = 0;
  std::vector<ProxyTraceRow> trace;
  // Continuation state for warm-started re-estimation.
  Hypothesis last_check_model;
  Discriminator discriminator;
  SplitSets splits;
};

namespace detail {

// One ascent phase of the check model against a fixed candidate. Appends to
// result.trace and updates the feasible maximum; alpha stays at its final
// value (the schedule belongs to pretraining).
inline void ascend_check_model(const Hypothesis& candidate,
                               Hypothesis& check, Discriminator& disc,
                               ProxyResult& result, const Dataset& target_full,
                               const DirConfig& cfg, Rng root, int epochs,
                               int first_epoch_index) {
  const SplitSets& splits = result.splits;
  auto eval_epoch = [&](int epoch_index) {
    ProxyTraceRow row;
    row.epoch = epoch_index;
    row.disagreement = disagreement(candidate, check, target_full);
    row.constraint_value =
        dir_objective(check, splits.src_val, target_full, cfg.alpha_max,
                      cfg.divergence_method, cfg.audit_config());
    row.feasible = row.constraint_value <= result.epsilon_used;
    result.trace.push_back(row);
    if (row.feasible) {
      ++result.feasible_epochs;
      if (row.disagreement >= result.max_risk) {
        result.max_risk = row.disagreement;
        result.best_check_model = check.deep_copy();
      }
    }
    return row;
  };

  if (first_epoch_index == 0) {
    ProxyTraceRow first = eval_epoch(0);
    // eps = (1+slack) * the same audited objective, so the pretrained model
    // cannot start infeasible; if it does, the audit lost determinism.
    if (!first.feasible)
      throw std::logic_error(
          str_cat("pretrained check model infeasible: objective ",
                  first.constraint_value, " > eps ", result.epsilon_used));
  }

  std::vector<Tensor> params = check.parameters();
  if (!disc.empty()) {
    auto dp = disc.parameters();
    params.insert(params.end(), dp.begin(), dp.end());
  }
  AdamState adam;
  adam_init(adam, params);

  BatchCycler src_batches(splits.src_train.n, cfg.batch_size,
                          root.split("proxy-src"));
  BatchCycler tgt_batches(splits.tgt_train.n, cfg.batch_size,
                          root.split("proxy-tgt"));
  int batches = (splits.tgt_train.n + cfg.batch_size - 1) / cfg.batch_size;

  for (int e = 0; e < epochs; ++e) {
    int epoch_index = first_epoch_index == 0 ? e + 1 : first_epoch_index + e;
    for (int bi = 0; bi < batches; ++bi) {
      Dataset tb = splits.tgt_train.subset(tgt_batches.next());
      Dataset sb = splits.src_train.subset(src_batches.next());
      // Maximize disagreement with the candidate's hard labels on target,
      // under lambda times the check model's own DIR objective.
      std::vector<int> hard = candidate.predict(tb);
      Tensor dis_surr = cross_entropy(check.logits(check.features_tensor(tb)),
                                      hard);
      Tensor pen = dir_penalty(check, disc, sb, tb,
                               ConstraintKind::dir_objective, cfg.alpha_max,
                               cfg);
      Tensor loss = add(scale(dis_surr, -1.0), scale(pen, cfg.lambda_penalty));
      if (!std::isfinite(loss.value()))
        throw TrainingError("non-finite proxy ascent loss", epoch_index);
      zero_grads(params);
      loss.backward();
      adam_step(params, adam, cfg.lr);
    }
    eval_epoch(epoch_index);
  }
}

}  // namespace detail

// Algorithm: pretrain the check model for T1 epochs on the DIR objective,
// fix eps from its audited objective, then for T2 epochs maximize the
// surrogate disagreement under the Lagrangian penalty, keeping the best
// feasible zero-one disagreement on the target sample.
inline ProxyResult compute_proxy_risk(const Hypothesis& candidate,
                                      const MlpSpec& check_spec,
                                      const Dataset& source,
                                      const Dataset& target,
                                      const DirConfig& cfg) {
  if (candidate.spec().num_classes != check_spec.num_classes)
    throw InputError(str_cat("candidate has ", candidate.spec().num_classes,
                             " classes, check class has ",
                             check_spec.num_classes));
  TrainResult pre = train_dir(check_spec, source, target, cfg);

  ProxyResult result;
  result.splits = pre.splits;
  result.epsilon_used =
      epsilon_from_pretrained(pre.model, pre.splits.src_val, target, cfg);
  result.last_check_model = pre.model;
  result.discriminator = pre.discriminator;

  Hypothesis check = pre.model;
  detail::ascend_check_model(candidate, check, result.discriminator, result,
                             target, cfg, Rng(cfg.seed).split("proxy-ascent"),
                             cfg.epochs_t2, 0);
  result.last_check_model = check;
  return result;
}

// Exact zero-one triangle audit on a labeled target sample:
// R_T(h) <= dis(h, h') + R_T(h'), compared on integer counts.
struct TriangleAudit {
  bool holds = false;
  double target_risk_h = 0.0;
  double disagreement_h_check = 0.0;
  double target_risk_check = 0.0;
};

inline TriangleAudit verify_triangle_bound(const Hypothesis& h,
                                           const Hypothesis& check,
                                           const Dataset& labeled_target) {
  if (!labeled_target.has_labels())
    throw InputError("verify_triangle_bound: target labels required");
  std::vector<int> ph = h.predict(labeled_target);
  std::vector<int> pc = check.predict(labeled_target);
  long long rh = 0, dis = 0, rc = 0;
  for (int i = 0; i < labeled_target.n; ++i) {
    int y = labeled_target.labels[static_cast<std::size_t>(i)];
    if (ph[static_cast<std::size_t>(i)] != y) ++rh;
    if (pc[static_cast<std::size_t>(i)] != y) ++rc;
    if (ph[static_cast<std::size_t>(i)] != pc[static_cast<std::size_t>(i)]) ++dis;
  }
  TriangleAudit audit;
  audit.holds = rh <= dis + rc;  // exact in counts
  double n = labeled_target.n;
  audit.target_risk_h = rh / n;
  audit.disagreement_h_check = dis / n;
  audit.target_risk_check = rc / n;
  return audit;
}

// ---------------------------------------------------------------------------
// Worst in-class proxy risk and division selection

struct WorstInClassResult {
  double value = 0.0;
  Hypothesis first_level_model;   // best feasible pair snapshot
  Hypothesis second_level_model;
  double epsilon_first = 0.0;
  double epsilon_second = 0.0;
  int feasible_epochs = 0;
};

// Jointly ascends two independently constrained DIR models (first level at
// the probed division, second level as its own check class) to maximize
// their mutual disagreement on the target; reports the best epoch where
// both constraints hold on validation.
inline WorstInClassResult worst_in_class_proxy_risk(
    const MlpSpec& first_spec, const MlpSpec& second_spec,
    const Dataset& source, const Dataset& target, const DirConfig& cfg) {
  first_spec.check();
  second_spec.check();
  SplitSets splits = make_splits(source, target, cfg);
  Rng root(cfg.seed);

  TrainResult pre1 =
      train_dir_on_splits(first_spec, splits, cfg, root.split("wic-first"));
  TrainResult pre2 =
      train_dir_on_splits(second_spec, splits, cfg, root.split("wic-second"));

  WorstInClassResult result;
  result.epsilon_first =
      epsilon_from_pretrained(pre1.model, splits.src_val, target, cfg);
  result.epsilon_second =
      epsilon_from_pretrained(pre2.model, splits.src_val, target, cfg);

  Hypothesis m1 = pre1.model;
  Hypothesis m2 = pre2.model;
  detail::break_pair_symmetry(m1, m2, 0.02, root.split("wic-jitter"));
  Discriminator d1 = pre1.discriminator;
  Discriminator d2 = pre2.discriminator;

  auto constraint_pair = [&] {
    double c1 = dir_objective(m1, splits.src_val, target, cfg.alpha_max,
                              cfg.divergence_method, cfg.audit_config());
    double c2 = dir_objective(m2, splits.src_val, target, cfg.alpha_max,
                              cfg.divergence_method, cfg.audit_config());
    return std::pair{c1, c2};
  };
  double best = -1.0;
  auto eval_epoch = [&] {
    auto [c1, c2] = constraint_pair();
    if (c1 <= result.epsilon_first && c2 <= result.epsilon_second) {
      ++result.feasible_epochs;
      double dis = disagreement(m1, m2, target);
      if (dis > best) {
        best = dis;
        result.first_level_model = m1.deep_copy();
        result.second_level_model = m2.deep_copy();
      }
    }
  };
  eval_epoch();

  std::vector<Tensor> params = m1.parameters();
  auto p2 = m2.parameters();
  params.insert(params.end(), p2.begin(), p2.end());
  for (Discriminator* d : {&d1, &d2})
    if (!d->empty()) {
      auto dp = d->parameters();
      params.insert(params.end(), dp.begin(), dp.end());
    }
  AdamState adam;
  adam_init(adam, params);
  Rng asc = root.split("wic-ascent");
  detail::BatchCycler src_batches(splits.src_train.n, cfg.batch_size,
                                  asc.split("src"));
  detail::BatchCycler tgt_batches(splits.tgt_train.n, cfg.batch_size,
                                  asc.split("tgt"));
  int batches = (splits.tgt_train.n + cfg.batch_size - 1) / cfg.batch_size;

  for (int epoch = 1; epoch <= cfg.epochs_t2; ++epoch) {
    for (int bi = 0; bi < batches; ++bi) {
      Dataset tb = splits.tgt_train.subset(tgt_batches.next());
      Dataset sb = splits.src_train.subset(src_batches.next());
      Tensor surr = detail::surrogate_disagreement(m1, m2, tb);
      Tensor pen =
          add(detail::dir_penalty(m1, d1, sb, tb,
                                  ConstraintKind::dir_objective,
                                  cfg.alpha_max, cfg),
              detail::dir_penalty(m2, d2, sb, tb,
                                  ConstraintKind::dir_objective,
                                  cfg.alpha_max, cfg));
      Tensor loss = add(scale(surr, -1.0), scale(pen, cfg.lambda_penalty));
      if (!std::isfinite(loss.value()))
        throw TrainingError("non-finite worst-in-class ascent loss", epoch);
      zero_grads(params);
      loss.backward();
      adam_step(params, adam, cfg.lr);
    }
    eval_epoch();
  }
  if (best < 0.0)
    throw EstimationError("no feasible epoch in worst-in-class ascent", 0.0);
  result.value = best;
  return result;
}

struct DivisionSweepRow {
  int division_index = 0;
  int second_level_division = 0;
  std::uint64_t seed = 0;
  double worst_in_class_proxy_risk = 0.0;
  // Filled by the harness from hidden labels; NaN when unknown.
  double true_target_risk = std::numeric_limits<double>::quiet_NaN();
  Hypothesis first_level_model;
};

struct DivisionReport {
  int division_index = 0;
  double worst_in_class_proxy_risk = 0.0;  // median over seeds, mean over
                                           // second-level choices
  std::vector<DivisionSweepRow> rows;
};

struct DivisionSelection {
  int chosen_division = 0;
  std::vector<DivisionReport> reports;
  std::vector<DivisionSweepRow> table;  // one row per (division, second, seed)
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) throw InputError("median of empty list");
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  return v.size() % 2 == 1 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

// argmin over candidate divisions of the worst in-class proxy risk
// (per-seed medians, averaged over second-level choices); ties break toward
// the shallower encoder.
inline DivisionSelection select_division(
    const MlpSpec& base_spec, const std::vector<int>& candidate_divisions,
    const std::vector<int>& second_level_divisions, const Dataset& source,
    const Dataset& target, const DirConfig& cfg,
    const std::vector<std::uint64_t>& seeds) {
  if (candidate_divisions.empty())
    throw InputError("select_division: no candidate divisions");
  if (seeds.empty()) throw InputError("select_division: no seeds");
  DivisionSelection sel;
  double best_score = std::numeric_limits<double>::infinity();
  for (int division : candidate_divisions) {
    DivisionReport report;
    report.division_index = division;
    std::vector<double> per_second;
    for (int second : second_level_divisions) {
      std::vector<double> per_seed;
      for (std::uint64_t seed : seeds) {
        DirConfig run_cfg = cfg;
        run_cfg.seed = Rng(seed).split("division-sweep",
                                       static_cast<std::uint64_t>(division) * 97 +
                                           static_cast<std::uint64_t>(second))
                           .next_u64();
        WorstInClassResult wic = worst_in_class_proxy_risk(
            base_spec.with_division(division), base_spec.with_division(second),
            source, target, run_cfg);
        DivisionSweepRow row;
        row.division_index = division;
        row.second_level_division = second;
        row.seed = seed;
        row.worst_in_class_proxy_risk = wic.value;
        row.first_level_model = wic.first_level_model;
        report.rows.push_back(row);
        sel.table.push_back(row);
        per_seed.push_back(wic.value);
      }
      per_second.push_back(median_of(per_seed));
    }
    double score = 0.0;
    for (double v : per_second) score += v;
    score /= static_cast<double>(per_second.size());
    report.worst_in_class_proxy_risk = score;
    sel.reports.push_back(report);
    if (score < best_score) {
      best_score = score;
      sel.chosen_division = division;
    }
  }
  return sel;
}

// ---------------------------------------------------------------------------
// Early stopping

struct EarlyStopRow {
  int checkpoint = 0;
  double src_risk = 0.0;
  double proxy_risk = 0.0;
  // Filled by the harness when hidden labels exist.
  double true_target_risk = std::numeric_limits<double>::quiet_NaN();
};

struct EarlyStopSeries {
  std::vector<EarlyStopRow> rows;
  double epsilon_used = 0.0;
};

// Proxy risk at each training checkpoint. The first checkpoint pays for the
// full pretrain-and-ascend computation; later ones warm-start the check
// model from the previous best and re-ascend, keeping the same epsilon (the
// check class does not change between checkpoints).
inline EarlyStopSeries early_stopping_trace(
    const std::vector<Hypothesis>& checkpoints, const MlpSpec& check_spec,
    const Dataset& source, const Dataset& target, const DirConfig& cfg) {
  if (checkpoints.empty())
    throw InputError("early_stopping_trace: no checkpoints");
  EarlyStopSeries series;

  ProxyResult state = compute_proxy_risk(checkpoints.front(), check_spec,
                                         source, target, cfg);
  series.epsilon_used = state.epsilon_used;
  EarlyStopRow first;
  first.checkpoint = 1;
  first.src_risk = zero_one_risk(checkpoints.front(), state.splits.src_val);
  first.proxy_risk = state.max_risk;
  series.rows.push_back(first);

  Hypothesis check = state.best_check_model;
  Discriminator disc = state.discriminator;
  Rng root(cfg.seed);
  for (std::size_t ci = 1; ci < checkpoints.size(); ++ci) {
    // The warm start itself counts: it was audited feasible for the previous
    // checkpoint and the constraint does not involve the candidate. Its
    // disagreement is taken before the ascent mutates the check model.
    double warm_dis = disagreement(checkpoints[ci], check, target);
    ProxyResult step;
    step.splits = state.splits;
    step.epsilon_used = state.epsilon_used;
    detail::ascend_check_model(
        checkpoints[ci], check, disc, step, target, cfg,
        root.split("earlystop", static_cast<std::uint64_t>(ci)),
        cfg.epochs_t2, 1);
    double proxy = step.feasible_epochs > 0 ? std::max(step.max_risk, warm_dis)
                                            : warm_dis;

    EarlyStopRow row;
    row.checkpoint = static_cast<int>(ci) + 1;
    row.src_risk = zero_one_risk(checkpoints[ci], state.splits.src_val);
    row.proxy_risk = proxy;
    series.rows.push_back(row);
    if (step.feasible_epochs > 0) check = step.best_check_model;
  }
  return series;
}

// ---------------------------------------------------------------------------
// Point-wise error detection

// Flag a point when the best check model contradicts the candidate there.
inline std::vector<std::uint8_t> detect_errors(const Hypothesis& h,
                                               const Hypothesis& best_check,
                                               const Dataset& points) {
  std::vector<int> ph = h.predict(points);
  std::vector<int> pc = best_check.predict(points);
  std::vector<std::uint8_t> flags(static_cast<std::size_t>(points.n), 0);
  for (int i = 0; i < points.n; ++i)
    flags[static_cast<std::size_t>(i)] =
        ph[static_cast<std::size_t>(i)] != pc[static_cast<std::size_t>(i)] ? 1
                                                                           : 0;
  return flags;
}

struct ErrorDetectionScore {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Errors are the positive class. Degenerate cases: no predicted and no true
// positives scores 1.0 (nothing to find, nothing flagged); true positives
// exist but none predicted scores 0.0.
inline ErrorDetectionScore score_error_detection(
    const std::vector<std::uint8_t>& flags,
    const std::vector<std::uint8_t>& true_errors) {
  if (flags.size() != true_errors.size())
    throw InputError(str_cat("flag count ", flags.size(),
                             " != truth count ", true_errors.size()));
  ErrorDetectionScore s;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    bool f = flags[i] != 0, t = true_errors[i] != 0;
    if (f && t) ++s.tp;
    else if (f && !t) ++s.fp;
    else if (!f && t) ++s.fn;
    else ++s.tn;
  }
  long long predicted = s.tp + s.fp;
  long long actual = s.tp + s.fn;
  if (predicted == 0 && actual == 0) {
    s.precision = s.recall = s.f1 = 1.0;
    return s;
  }
  s.precision = predicted > 0 ? static_cast<double>(s.tp) / predicted : 0.0;
  s.recall = actual > 0 ? static_cast<double>(s.tp) / actual : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

}  // namespace shiftgauge
