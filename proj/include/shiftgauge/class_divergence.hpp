#pragma once

#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "shiftgauge/dir_trainer.hpp"

// Adversarial estimators of the class-pair divergences: two hypotheses are
// gradient-ascended to make their disagreement differ between domains, under
// constraint penalties; the reported value is the best feasible zero-one
// |R_S(h,h') - R_T(h,h')| observed on the validation split. Estimates are
// lower bounds of the exact supremum up to validation noise.

namespace shiftgauge {

enum class ClassDivKind { hdh, fgg, latent_fdf };

enum class ConstraintKind { none, source_risk, dir_objective };

struct ClassConfig {
  MlpSpec spec;  // hypothesis class template
  ConstraintKind constraint = ConstraintKind::source_risk;
  // < 0 derives epsilon from the pretrained pair via (1 + epsilon_slack).
  double epsilon = -1.0;
  // Degenerate classes for the singleton identities: share everything
  // (singleton H) or just the encoders (singleton G).
  bool singleton = false;
  bool share_encoders = false;
};

struct ClassDivTraceRow {
  int epoch = 0;
  double src_disagreement = 0.0;
  double tgt_disagreement = 0.0;
  double value = 0.0;  // |src - tgt|
  double constraint_a = 0.0;
  double constraint_b = 0.0;
  bool feasible = false;
};

struct ClassDivergenceEstimate {
  ClassDivKind kind = ClassDivKind::hdh;
  double value = 0.0;
  Hypothesis model_a;
  Hypothesis model_b;
  double epsilon_used = 0.0;
  int feasible_epochs = 0;
  std::vector<ClassDivTraceRow> trace;
};

namespace detail {

inline std::vector<Tensor> unique_params(std::vector<Tensor> params) {
  std::vector<Tensor> out;
  std::unordered_set<const Node*> seen;
  for (auto& p : params)
    if (seen.insert(p.node().get()).second) out.push_back(p);
  return out;
}

// Differentiable surrogate for the zero-one disagreement on a batch:
// symmetric cross-entropy of each model against the other's hard labels
// (the hard labels are constants, so the game stays well posed).
inline Tensor surrogate_disagreement(const Hypothesis& a, const Hypothesis& b,
                                     const Dataset& batch) {
  std::vector<int> hard_a = a.predict(batch);
  std::vector<int> hard_b = b.predict(batch);
  Tensor la = a.logits(a.features_tensor(batch));
  Tensor lb = b.logits(b.features_tensor(batch));
  return scale(add(cross_entropy(lb, hard_a), cross_entropy(la, hard_b)), 0.5);
}

// Constraint scalar on held-out data; this is what gets compared to eps.
inline double constraint_scalar(const Hypothesis& m, ConstraintKind kind,
                                const SplitSets& splits, const DirConfig& cfg) {
  switch (kind) {
    case ConstraintKind::none:
      return 0.0;
    case ConstraintKind::source_risk:
      return zero_one_risk(m, splits.src_val);
    case ConstraintKind::dir_objective:
      return dir_objective(m, splits.src_val, splits.tgt_val, cfg.alpha_max,
                           cfg.divergence_method, cfg.audit_config());
  }
  return 0.0;
}

// Differentiable DIR penalty for one model on one batch pair: source
// cross-entropy plus, for the dir constraint, the alpha-weighted alignment
// term (reversal game against the model's own discriminator, or MMD).
inline Tensor dir_penalty(const Hypothesis& m, Discriminator& disc,
                          const Dataset& src_batch, const Dataset& tgt_batch,
                          ConstraintKind kind, double alpha,
                          const DirConfig& cfg) {
  if (kind == ConstraintKind::none) return Tensor::scalar(0.0);
  Tensor xs = m.features_tensor(src_batch);
  if (kind != ConstraintKind::dir_objective || alpha == 0.0)
    return cross_entropy(m.logits(xs), src_batch.labels);
  Tensor zs = m.encode(xs);
  Tensor cls = cross_entropy(m.logits_from_latent(zs), src_batch.labels);
  Tensor zt = m.encode(m.features_tensor(tgt_batch));
  if (cfg.divergence_method == DivergenceMethod::mmd_rbf) {
    std::vector<double> pooled = zs.data();
    pooled.insert(pooled.end(), zt.data().begin(), zt.data().end());
    double sigma = median_pairwise_distance(pooled, src_batch.n + tgt_batch.n,
                                            zs.shape()[1]);
    if (sigma <= 0.0) sigma = 1.0;
    return add(cls, scale(mmd_rbf(zs, zt, sigma), alpha));
  }
  std::vector<int> domains(static_cast<std::size_t>(src_batch.n), 0);
  domains.insert(domains.end(), static_cast<std::size_t>(tgt_batch.n), 1);
  Tensor dom = cross_entropy(
      disc.logits(gradient_reversal(concat_rows(zs, zt), alpha)), domains);
  return add(cls, dom);
}

struct PairModels {
  Hypothesis a, b;
  Discriminator disc_a, disc_b;
};

// Joint pretraining of the pair on the constraint objective (both models
// driven toward feasibility; shared tensors receive summed gradients). The
// two models see independent batch orders: with shared batches and a
// symmetric objective, identically converged models would stay locked on
// identical trajectories through the ascent phase.
inline void pretrain_pair(PairModels& pm, const ClassConfig& ccfg,
                          const SplitSets& splits, const DirConfig& cfg,
                          Rng& root) {
  std::vector<Tensor> params = pm.a.parameters();
  auto pb = pm.b.parameters();
  params.insert(params.end(), pb.begin(), pb.end());
  if (!pm.disc_a.empty()) {
    auto d = pm.disc_a.parameters();
    params.insert(params.end(), d.begin(), d.end());
  }
  if (!pm.disc_b.empty()) {
    auto d = pm.disc_b.parameters();
    params.insert(params.end(), d.begin(), d.end());
  }
  params = unique_params(std::move(params));
  AdamState adam;
  adam_init(adam, params);

  BatchCycler src_a(splits.src_train.n, cfg.batch_size, root.split("pre-src-a"));
  BatchCycler src_b(splits.src_train.n, cfg.batch_size, root.split("pre-src-b"));
  BatchCycler tgt_a(splits.tgt_train.n, cfg.batch_size, root.split("pre-tgt-a"));
  BatchCycler tgt_b(splits.tgt_train.n, cfg.batch_size, root.split("pre-tgt-b"));
  int batches = (splits.src_train.n + cfg.batch_size - 1) / cfg.batch_size;
  long total = static_cast<long>(cfg.epochs_t1) * batches;
  long step = 0;
  for (int epoch = 1; epoch <= cfg.epochs_t1; ++epoch) {
    for (int bi = 0; bi < batches; ++bi) {
      double p = total <= 1 ? 1.0 : static_cast<double>(step) / (total - 1);
      double alpha = alpha_schedule(p, cfg.alpha_max);
      ++step;
      Dataset sa = splits.src_train.subset(src_a.next());
      Dataset ta = splits.tgt_train.subset(tgt_a.next());
      Dataset sb = splits.src_train.subset(src_b.next());
      Dataset tb = splits.tgt_train.subset(tgt_b.next());
      Tensor loss = add(
          dir_penalty(pm.a, pm.disc_a, sa, ta, ccfg.constraint, alpha, cfg),
          dir_penalty(pm.b, pm.disc_b, sb, tb, ccfg.constraint, alpha, cfg));
      if (!std::isfinite(loss.value()))
        throw TrainingError("non-finite pretraining loss", epoch);
      zero_grads(params);
      loss.backward();
      adam_step(params, adam, cfg.lr);
    }
  }
}

// Seeded perturbation of the parameters owned by b alone (shared tensors are
// left untouched). A pair that pretrains to the same function produces
// identical symmetric-surrogate gradients and can never split; the jitter
// moves the pair off that fixed manifold before the ascent.
inline void break_pair_symmetry(Hypothesis& a, Hypothesis& b, double scale,
                                Rng rng) {
  std::unordered_set<const Node*> shared;
  for (auto& p : a.parameters()) shared.insert(p.node().get());
  for (auto& p : b.parameters()) {
    if (shared.count(p.node().get())) continue;
    for (auto& v : p.data()) v += scale * rng.normal();
  }
}

// Copies dst's non-shared parameter values from src (same architecture).
inline void copy_unshared_params(Hypothesis& src, Hypothesis& dst) {
  auto ps = src.parameters();
  auto pd = dst.parameters();
  for (std::size_t i = 0; i < ps.size() && i < pd.size(); ++i) {
    if (ps[i].node() == pd[i].node()) continue;
    pd[i].data() = ps[i].data();
  }
}

// Pretraining small classes occasionally leaves one model in a bad local
// optimum (e.g. a constant predictor). Besides wasting the run, a garbage
// member inflates the derived epsilon and poisons the check-model set, so a
// member far worse than its partner restarts from a jittered copy of the
// better one.
inline void heal_pretrained_pair(PairModels& pm, const ClassConfig& ccfg,
                                 const SplitSets& splits, const DirConfig& cfg,
                                 Rng rng) {
  if (ccfg.singleton) return;
  double c_a = constraint_scalar(pm.a, ccfg.constraint, splits, cfg);
  double c_b = constraint_scalar(pm.b, ccfg.constraint, splits, cfg);
  double lo = std::min(c_a, c_b);
  double threshold = ccfg.epsilon >= 0.0
                         ? ccfg.epsilon
                         : (1.0 + cfg.epsilon_slack) * lo + 0.02;
  if (std::max(c_a, c_b) <= threshold || lo > threshold) return;
  Hypothesis& good = c_a <= c_b ? pm.a : pm.b;
  Hypothesis& bad = c_a <= c_b ? pm.b : pm.a;
  copy_unshared_params(good, bad);
  break_pair_symmetry(good, bad, 0.02, rng);
}

inline ClassDivergenceEstimate ascend_pair_divergence(
    ClassDivKind kind, PairModels pm, const ClassConfig& ccfg,
    const SplitSets& splits, const DirConfig& cfg, Rng& root) {
  ClassDivergenceEstimate est;
  est.kind = kind;

  double best = -1.0;
  double best_infeasible = 0.0;
  auto record_epoch = [&](int epoch, double c_a, double c_b, double eps) {
    ClassDivTraceRow row;
    row.epoch = epoch;
    row.src_disagreement = disagreement(pm.a, pm.b, splits.src_val);
    row.tgt_disagreement = disagreement(pm.a, pm.b, splits.tgt_val);
    row.value = std::abs(row.src_disagreement - row.tgt_disagreement);
    row.constraint_a = c_a;
    row.constraint_b = c_b;
    row.feasible = c_a <= eps && c_b <= eps;
    est.trace.push_back(row);
    if (row.feasible) {
      ++est.feasible_epochs;
      if (row.value > best) {
        best = row.value;
        est.model_a = pm.a.deep_copy();
        est.model_b = pm.b.deep_copy();
      }
    } else {
      best_infeasible = std::max(best_infeasible, row.value);
    }
  };

  double eps = ccfg.epsilon;
  {
    double c_a = constraint_scalar(pm.a, ccfg.constraint, splits, cfg);
    double c_b = constraint_scalar(pm.b, ccfg.constraint, splits, cfg);
    if (eps < 0.0)
      eps = (1.0 + cfg.epsilon_slack) * std::max(c_a, c_b);
    est.epsilon_used = eps;
    record_epoch(0, c_a, c_b, eps);
  }

  std::vector<Tensor> params = pm.a.parameters();
  auto pb = pm.b.parameters();
  params.insert(params.end(), pb.begin(), pb.end());
  if (!pm.disc_a.empty()) {
    auto d = pm.disc_a.parameters();
    params.insert(params.end(), d.begin(), d.end());
  }
  if (!pm.disc_b.empty()) {
    auto d = pm.disc_b.parameters();
    params.insert(params.end(), d.begin(), d.end());
  }
  params = unique_params(std::move(params));
  AdamState adam;
  adam_init(adam, params);

  BatchCycler src_batches(splits.src_train.n, cfg.batch_size,
                          root.split("asc-src"));
  BatchCycler tgt_batches(splits.tgt_train.n, cfg.batch_size,
                          root.split("asc-tgt"));
  int batches = (splits.src_train.n + cfg.batch_size - 1) / cfg.batch_size;

  for (int epoch = 1; epoch <= cfg.epochs_t2; ++epoch) {
    for (int bi = 0; bi < batches; ++bi) {
      Dataset sb = splits.src_train.subset(src_batches.next());
      Dataset tb = splits.tgt_train.subset(tgt_batches.next());
      // Appendix-C style Lagrangian: maximize target-pair disagreement minus
      // source-pair disagreement minus lambda * constraint penalties.
      Tensor surr_t = surrogate_disagreement(pm.a, pm.b, tb);
      Tensor surr_s = surrogate_disagreement(pm.a, pm.b, sb);
      Tensor pen = add(
          dir_penalty(pm.a, pm.disc_a, sb, tb, ccfg.constraint, cfg.alpha_max,
                      cfg),
          dir_penalty(pm.b, pm.disc_b, sb, tb, ccfg.constraint, cfg.alpha_max,
                      cfg));
      Tensor loss =
          add(add(scale(surr_t, -1.0), surr_s), scale(pen, cfg.lambda_penalty));
      if (!std::isfinite(loss.value()))
        throw TrainingError("non-finite ascent loss", epoch);
      zero_grads(params);
      loss.backward();
      adam_step(params, adam, cfg.lr);
    }

    record_epoch(epoch,
                 constraint_scalar(pm.a, ccfg.constraint, splits, cfg),
                 constraint_scalar(pm.b, ccfg.constraint, splits, cfg), eps);
  }

  if (est.feasible_epochs == 0)
    throw EstimationError(
        str_cat("no feasible epoch within ", cfg.epochs_t2, " ascent epochs"),
        best_infeasible);
  est.value = best;
  return est;
}

}  // namespace detail

// sup over pairs h, h' in the (constrained) class of
// |R_S(h, h') - R_T(h, h')|, approached by gradient ascent.
inline ClassDivergenceEstimate estimate_hdh(const ClassConfig& ccfg,
                                            const Dataset& source,
                                            const Dataset& target,
                                            const DirConfig& cfg) {
  ccfg.spec.check();
  cfg.check();
  Rng root(cfg.seed);
  SplitSets splits = make_splits(source, target, cfg);

  detail::PairModels pm;
  Rng init_a = root.split("init-a");
  pm.a = Hypothesis::init(ccfg.spec, init_a);
  if (cfg.standardize) pm.a.set_scaler(FeatureScaler::fit(splits.src_train));
  if (ccfg.singleton) {
    pm.b = pm.a;  // shared tensors: the class is a single hypothesis
  } else {
    Rng init_b = root.split("init-b");
    pm.b = Hypothesis::init(ccfg.spec, init_b);
    pm.b.set_scaler(pm.a.scaler());
  }
  if (ccfg.constraint == ConstraintKind::dir_objective &&
      cfg.divergence_method == DivergenceMethod::js_discriminator) {
    Rng da = root.split("disc-a"), db = root.split("disc-b");
    pm.disc_a = Discriminator::init(ccfg.spec.latent_dim(), cfg.disc_widths, da);
    pm.disc_b = Discriminator::init(ccfg.spec.latent_dim(), cfg.disc_widths, db);
  }
  Rng pre_rng = root.split("pretrain");
  detail::pretrain_pair(pm, ccfg, splits, cfg, pre_rng);
  detail::heal_pretrained_pair(pm, ccfg, splits, cfg, root.split("heal"));
  detail::break_pair_symmetry(pm.a, pm.b, 0.02, root.split("sym-break"));
  Rng asc_rng = root.split("ascent");
  return detail::ascend_pair_divergence(ClassDivKind::hdh, std::move(pm), ccfg,
                                        splits, cfg, asc_rng);
}

// Same with one shared predictor and two encoders (Def. of the
// shared-predictor divergence): the pair is (f g, f g').
inline ClassDivergenceEstimate estimate_fgg(const ClassConfig& ccfg,
                                            const Dataset& source,
                                            const Dataset& target,
                                            const DirConfig& cfg) {
  ccfg.spec.check();
  cfg.check();
  Rng root(cfg.seed);
  SplitSets splits = make_splits(source, target, cfg);

  detail::PairModels pm;
  Rng init_a = root.split("init-a");
  pm.a = Hypothesis::init(ccfg.spec, init_a);
  if (cfg.standardize) pm.a.set_scaler(FeatureScaler::fit(splits.src_train));
  if (ccfg.share_encoders || ccfg.singleton) {
    pm.b = pm.a;
  } else {
    Rng init_b = root.split("init-b");
    Hypothesis b_full = Hypothesis::init(ccfg.spec, init_b);
    // Fresh encoder, shared predictor tensors.
    pm.b = pm.a;
    pm.b.encoder_layers() = b_full.encoder_layers();
  }
  if (ccfg.constraint == ConstraintKind::dir_objective &&
      cfg.divergence_method == DivergenceMethod::js_discriminator) {
    Rng da = root.split("disc-a"), db = root.split("disc-b");
    pm.disc_a = Discriminator::init(ccfg.spec.latent_dim(), cfg.disc_widths, da);
    pm.disc_b = Discriminator::init(ccfg.spec.latent_dim(), cfg.disc_widths, db);
  }
  Rng pre_rng = root.split("pretrain");
  detail::pretrain_pair(pm, ccfg, splits, cfg, pre_rng);
  detail::heal_pretrained_pair(pm, ccfg, splits, cfg, root.split("heal"));
  detail::break_pair_symmetry(pm.a, pm.b, 0.02, root.split("sym-break"));
  Rng asc_rng = root.split("ascent");
  return detail::ascend_pair_divergence(ClassDivKind::fgg, std::move(pm), ccfg,
                                        splits, cfg, asc_rng);
}

// Latent-space pair divergence under a fixed encoder: two predictors are
// optimized over the g-embeddings of both samples.
inline ClassDivergenceEstimate estimate_latent_fdf(
    const Hypothesis& g, const std::vector<int>& predictor_hidden,
    const Dataset& source, const Dataset& target, const DirConfig& cfg,
    ConstraintKind constraint = ConstraintKind::none, double epsilon = -1.0,
    bool singleton = false) {
  cfg.check();
  // Embed once, eval mode; the encoder stays fixed throughout.
  auto embed = [&](const Dataset& d) {
    Tensor z = detail::embed_dataset(g, d);
    Dataset out;
    out.n = z.shape()[0];
    out.d = z.shape()[1];
    out.features = z.data();
    out.labels = d.labels;
    out.domain_tag = d.domain_tag;
    out.name = d.name + ":latent";
    return out;
  };
  Dataset zsrc = embed(source);
  Dataset ztgt = embed(target);

  Rng root(cfg.seed);
  DirConfig latent_cfg = cfg;
  latent_cfg.standardize = false;  // the latent space is the model's own
  SplitSets splits = make_splits(zsrc, ztgt, latent_cfg);

  detail::PairModels pm;
  Rng init_a = root.split("init-a");
  pm.a = Hypothesis::init_predictor_only(zsrc.d, predictor_hidden,
                                         g.spec().num_classes, init_a);
  if (singleton) {
    pm.b = pm.a;
  } else {
    Rng init_b = root.split("init-b");
    pm.b = Hypothesis::init_predictor_only(zsrc.d, predictor_hidden,
                                           g.spec().num_classes, init_b);
  }
  ClassConfig ccfg;
  ccfg.constraint = constraint == ConstraintKind::dir_objective
                        ? ConstraintKind::source_risk  // no second encoder here
                        : constraint;
  ccfg.epsilon = epsilon;
  Rng pre_rng = root.split("pretrain");
  detail::pretrain_pair(pm, ccfg, splits, latent_cfg, pre_rng);
  detail::heal_pretrained_pair(pm, ccfg, splits, latent_cfg, root.split("heal"));
  detail::break_pair_symmetry(pm.a, pm.b, 0.02, root.split("sym-break"));
  Rng asc_rng = root.split("ascent");
  return detail::ascend_pair_divergence(ClassDivKind::latent_fdf,
                                        std::move(pm), ccfg, splits,
                                        latent_cfg, asc_rng);
}

}  // namespace shiftgauge
