#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/dataset.hpp"
#include "shiftgauge/divergence.hpp"
#include "shiftgauge/errors.hpp"
#include "shiftgauge/hypothesis.hpp"
#include "shiftgauge/tensor.hpp"

// Domain-invariant training: minimize source cross-entropy plus an
// alpha-weighted alignment term (gradient-reversal game against a jointly
// trained discriminator, or differentiable MMD on the embeddings), with the
// progressive alpha schedule.

namespace shiftgauge {

struct DirConfig {
  double alpha_max = 1.0;
  double lr = 1e-3;
  int epochs_t1 = 50;   // pretraining epochs
  int epochs_t2 = 30;   // disagreement-ascent epochs
  double lambda_penalty = 50.0;
  double epsilon_slack = 0.10;  // the delta in eps = (1 + delta) * objective
  int batch_size = 64;
  std::uint64_t seed = 1;
  DivergenceMethod divergence_method = DivergenceMethod::js_discriminator;
  bool grl = true;  // false = alternating discriminator/model updates
  // Artifact knobs.
  double val_fraction = 0.2;  // 0 = use the full sets for train and val
  int audit_epochs = 120;
  std::vector<int> disc_widths = {64, 64};
  int snapshot_every = 0;  // >0: keep a model copy every k epochs
  bool standardize = true;

  void check() const {
    if (alpha_max < 0.0) throw InputError("alpha_max must be >= 0");
    if (lr <= 0.0) throw InputError("lr must be > 0");
    if (epochs_t1 < 0 || epochs_t2 < 0) throw InputError("epochs must be >= 0");
    if (lambda_penalty <= 0.0) throw InputError("lambda_penalty must be > 0");
    if (epsilon_slack < 0.0) throw InputError("epsilon_slack must be >= 0");
    if (batch_size < 1) throw InputError("batch_size must be >= 1");
    if (val_fraction < 0.0 || val_fraction >= 1.0)
      throw InputError("val_fraction must be in [0, 1)");
    if (audit_epochs < 1) throw InputError("audit_epochs must be >= 1");
  }

  AuditConfig audit_config() const {
    AuditConfig a;
    a.audit_epochs = audit_epochs;
    a.seed = Rng(seed).split("audit").next_u64();
    return a;
  }
};

struct TraceRow {
  int epoch = 0;
  double src_train_risk = 0.0;
  double src_val_risk = 0.0;
  double divergence = 0.0;
  double objective = 0.0;
};

struct TrainTrace {
  std::vector<TraceRow> rows;
};

// Progressive weight from Ganin-style adversarial training:
// alpha_max * (2 / (1 + exp(-10 p)) - 1), monotone in p.
inline double alpha_schedule(double progress, double alpha_max) {
  if (progress < 0.0 || progress > 1.0)
    throw InputError(str_cat("schedule progress must be in [0,1], got ",
                             progress));
  return alpha_max * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

struct SplitSets {
  Dataset src_train, src_val, tgt_train, tgt_val;
};

// val_fraction = 0 evaluates on the training points themselves (used by the
// oracle-agreement miniatures, where estimates must be computed on exactly
// the enumerated sample).
inline SplitSets make_splits(const Dataset& source, const Dataset& target,
                             const DirConfig& cfg) {
  SplitSets s;
  if (cfg.val_fraction == 0.0) {
    s.src_train = source;
    s.src_val = source;
    s.tgt_train = target;
    s.tgt_val = target;
    return s;
  }
  Rng root(cfg.seed);
  auto [st, sv] =
      split(source, cfg.val_fraction, root.split("split-src").next_u64());
  auto [tt, tv] =
      split(target, cfg.val_fraction, root.split("split-tgt").next_u64());
  s.src_train = std::move(st);
  s.src_val = std::move(sv);
  s.tgt_train = std::move(tt);
  s.tgt_val = std::move(tv);
  return s;
}

struct TrainResult {
  Hypothesis model;
  TrainTrace trace;
  Discriminator discriminator;  // empty unless the js game was trained
  SplitSets splits;
  std::vector<Hypothesis> snapshots;
};

namespace detail {

// Cycling batch iterator over a shuffled index set; reshuffles from its own
// stream when exhausted.
class BatchCycler {
 public:
  BatchCycler(int n, int batch_size, Rng rng)
      : n_(n), bs_(std::min(batch_size, n)), rng_(rng),
        perm_(rng_.permutation(n)) {}

  std::vector<int> next() {
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(bs_));
    for (int i = 0; i < bs_; ++i) {
      if (pos_ == n_) {
        perm_ = rng_.permutation(n_);
        pos_ = 0;
      }
      idx.push_back(perm_[static_cast<std::size_t>(pos_++)]);
    }
    return idx;
  }

 private:
  int n_;
  int bs_;
  Rng rng_;
  std::vector<int> perm_;
  int pos_ = 0;
};

inline double trace_divergence(const Hypothesis& model,
                               const Discriminator& disc,
                               const SplitSets& splits, DivergenceMethod method,
                               bool adversarial_active) {
  if (!adversarial_active) return 0.0;
  if (method == DivergenceMethod::mmd_rbf) {
    Tensor zs = embed_dataset(model, splits.src_val);
    Tensor zt = embed_dataset(model, splits.tgt_val);
    return estimate_mmd_embedded(zs, zt).value;
  }
  if (disc.empty()) return 0.0;
  // In-training probe: current discriminator's balanced BCE on validation
  // embeddings. Constraint auditing uses a fresh discriminator instead
  // (dir_objective); this column is a cheap per-epoch signal.
  Tensor zs = embed_dataset(model, splits.src_val);
  Tensor zt = embed_dataset(model, splits.tgt_val);
  double bce = balanced_domain_bce(disc, zs, zt).value();
  return std::clamp(kLn2 - bce, 0.0, kLn2);
}

}  // namespace detail

// Supervised source-only training (the alpha_max = 0 special case of the
// DIR objective). Kept as the explicit baseline counterpart: train_dir with
// alpha_max = 0 routes through the same loop.
inline TrainResult train_dir(const MlpSpec& spec, const Dataset& source,
                             const Dataset& target, const DirConfig& cfg);

inline TrainResult train_supervised(const MlpSpec& spec, const Dataset& source,
                                    const DirConfig& cfg) {
  DirConfig sup = cfg;
  sup.alpha_max = 0.0;
  // The target plays no role with alpha 0; feed source features so the
  // shapes stay consistent.
  return train_dir(spec, source, source.without_labels(), sup);
}

// Training loop over pre-made splits with an explicit stream root; lets
// several models pretrain against the same splits with decorrelated
// initialization and batch orders.
inline TrainResult train_dir_on_splits(const MlpSpec& spec,
                                       const SplitSets& splits,
                                       const DirConfig& cfg, Rng root) {
  spec.check();
  cfg.check();
  const Dataset& source = splits.src_train;
  if (!source.has_labels()) throw InputError("train_dir: source must be labeled");
  if (source.num_classes() < 2)
    throw InputError("train_dir: source must contain at least 2 classes");
  if (source.d != spec.input_dim || splits.tgt_train.d != spec.input_dim)
    throw InputError(str_cat("train_dir: data width ", source.d, "/",
                             splits.tgt_train.d, " vs input_dim ",
                             spec.input_dim));

  TrainResult result;
  result.splits = splits;
  const Dataset& src_train = result.splits.src_train;
  const Dataset& tgt_train = result.splits.tgt_train;

  Rng init_rng = root.split("model-init");
  result.model = Hypothesis::init(spec, init_rng);
  if (cfg.standardize)
    result.model.set_scaler(FeatureScaler::fit(src_train));

  bool adversarial = cfg.alpha_max > 0.0;
  bool js_game = adversarial &&
                 cfg.divergence_method == DivergenceMethod::js_discriminator;
  if (js_game) {
    Rng disc_rng = root.split("disc-init");
    result.discriminator =
        Discriminator::init(spec.latent_dim(), cfg.disc_widths, disc_rng);
  }

  auto model_params = result.model.parameters();
  AdamState model_adam;
  adam_init(model_adam, model_params);
  std::vector<Tensor> disc_params;
  AdamState disc_adam;
  std::vector<Tensor> joint_params = model_params;
  AdamState joint_adam;
  if (js_game) {
    disc_params = result.discriminator.parameters();
    if (cfg.grl) {
      joint_params.insert(joint_params.end(), disc_params.begin(),
                          disc_params.end());
      adam_init(joint_adam, joint_params);
    } else {
      adam_init(disc_adam, disc_params);
    }
  }

  detail::BatchCycler src_batches(src_train.n, cfg.batch_size,
                                  root.split("batches-src"));
  detail::BatchCycler tgt_batches(tgt_train.n, cfg.batch_size,
                                  root.split("batches-tgt"));
  Rng dropout_rng = root.split("dropout");

  int batches_per_epoch =
      (src_train.n + cfg.batch_size - 1) / cfg.batch_size;
  long total_steps =
      static_cast<long>(cfg.epochs_t1) * batches_per_epoch;
  long step = 0;
  double alpha_now = 0.0;

  for (int epoch = 1; epoch <= cfg.epochs_t1; ++epoch) {
    for (int bi = 0; bi < batches_per_epoch; ++bi) {
      double progress =
          total_steps <= 1 ? 1.0
                           : static_cast<double>(step) / (total_steps - 1);
      alpha_now = alpha_schedule(progress, cfg.alpha_max);
      ++step;

      Dataset sb = src_train.subset(src_batches.next());
      Tensor xs = result.model.features_tensor(sb);
      double loss_value = 0.0;

      if (!adversarial) {
        zero_grads(model_params);
        Tensor loss = cross_entropy(
            result.model.logits(xs, true, &dropout_rng), sb.labels);
        loss_value = loss.value();
        if (!std::isfinite(loss_value))
          throw TrainingError("non-finite training loss", epoch);
        loss.backward();
        adam_step(model_params, model_adam, cfg.lr);
        continue;
      }

      Dataset tb = tgt_train.subset(tgt_batches.next());
      Tensor xt = result.model.features_tensor(tb);
      Tensor zs = result.model.encode(xs, true, &dropout_rng);
      Tensor zt = result.model.encode(xt, true, &dropout_rng);
      Tensor cls_loss =
          cross_entropy(result.model.logits_from_latent(zs), sb.labels);

      if (cfg.divergence_method == DivergenceMethod::mmd_rbf) {
        std::vector<double> pooled = zs.data();
        pooled.insert(pooled.end(), zt.data().begin(), zt.data().end());
        double sigma = detail::median_pairwise_distance(
            pooled, sb.n + tb.n, spec.latent_dim());
        if (sigma <= 0.0) sigma = 1.0;
        Tensor loss =
            add(cls_loss, scale(mmd_rbf(zs, zt, sigma), alpha_now));
        loss_value = loss.value();
        if (!std::isfinite(loss_value))
          throw TrainingError("non-finite training loss", epoch);
        zero_grads(model_params);
        loss.backward();
        adam_step(model_params, model_adam, cfg.lr);
      } else if (cfg.grl) {
        // Single backward: the discriminator descends the domain loss while
        // the encoder ascends it through the reversal, scaled by alpha.
        std::vector<int> domains(static_cast<std::size_t>(sb.n), 0);
        domains.insert(domains.end(), static_cast<std::size_t>(tb.n), 1);
        Tensor z_all = concat_rows(zs, zt);
        Tensor dom_loss = cross_entropy(
            result.discriminator.logits(gradient_reversal(z_all, alpha_now)),
            domains);
        Tensor loss = add(cls_loss, dom_loss);
        loss_value = loss.value();
        if (!std::isfinite(loss_value))
          throw TrainingError("non-finite training loss", epoch);
        zero_grads(joint_params);
        loss.backward();
        adam_step(joint_params, joint_adam, cfg.lr);
      } else {
        // Alternating game. Discriminator first, on detached embeddings.
        std::vector<int> domains(static_cast<std::size_t>(sb.n), 0);
        domains.insert(domains.end(), static_cast<std::size_t>(tb.n), 1);
        Tensor z_all_detached =
            concat_rows(zs.detached_copy(), zt.detached_copy());
        zero_grads(disc_params);
        Tensor d_loss = cross_entropy(
            result.discriminator.logits(z_all_detached), domains);
        if (!std::isfinite(d_loss.value()))
          throw TrainingError("non-finite discriminator loss", epoch);
        d_loss.backward();
        adam_step(disc_params, disc_adam, cfg.lr);

        // Model step: confuse the (frozen) discriminator.
        Tensor dom_loss = cross_entropy(
            result.discriminator.logits(concat_rows(zs, zt)), domains);
        Tensor loss = add(cls_loss, scale(dom_loss, -alpha_now));
        loss_value = loss.value();
        if (!std::isfinite(loss_value))
          throw TrainingError("non-finite training loss", epoch);
        zero_grads(model_params);
        zero_grads(disc_params);
        loss.backward();
        adam_step(model_params, model_adam, cfg.lr);
      }
    }

    TraceRow row;
    row.epoch = epoch;
    row.src_train_risk = zero_one_risk(result.model, src_train);
    row.src_val_risk = zero_one_risk(result.model, result.splits.src_val);
    row.divergence = detail::trace_divergence(
        result.model, result.discriminator, result.splits,
        cfg.divergence_method, adversarial);
    row.objective = row.src_val_risk + alpha_now * row.divergence;
    result.trace.rows.push_back(row);

    if (cfg.snapshot_every > 0 && epoch % cfg.snapshot_every == 0)
      result.snapshots.push_back(result.model.deep_copy());
  }
  return result;
}

inline TrainResult train_dir(const MlpSpec& spec, const Dataset& source,
                             const Dataset& target, const DirConfig& cfg) {
  source.check();
  target.check();
  return train_dir_on_splits(spec, make_splits(source, target, cfg), cfg,
                             Rng(cfg.seed));
}

// Membership score for the check-model set: zero-one source risk on the
// given split plus alpha times an audited divergence of h's encoder. This
// is the scalar compared against epsilon.
inline double dir_objective(const Hypothesis& h, const Dataset& source_eval,
                            const Dataset& target_eval, double alpha,
                            DivergenceMethod method, const AuditConfig& audit) {
  double src_risk = zero_one_risk(h, source_eval);
  if (alpha == 0.0) return src_risk;
  double div = method == DivergenceMethod::mmd_rbf
                   ? estimate_mmd(h, source_eval, target_eval).value
                   : estimate_js(h, source_eval, target_eval, audit).value;
  return src_risk + alpha * div;
}

// eps = (1 + slack) * pretrained objective, so the pretrained check model is
// feasible by construction and the check-model set is nonempty.
inline double epsilon_from_pretrained(const Hypothesis& h0,
                                      const Dataset& source_val,
                                      const Dataset& target,
                                      const DirConfig& cfg) {
  double objective =
      dir_objective(h0, source_val, target, cfg.alpha_max,
                    cfg.divergence_method, cfg.audit_config());
  return (1.0 + cfg.epsilon_slack) * objective;
}

}  // namespace shiftgauge
