#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "shiftgauge/dataset.hpp"
#include "shiftgauge/errors.hpp"
#include "shiftgauge/hypothesis.hpp"
#include "shiftgauge/tensor.hpp"

// Scalar divergences between embedded source and target samples: a
// discriminator-based Jensen-Shannon proxy (fresh audit discriminator per
// call; the one trained jointly during DIR training is biased by the
// adversarial game) and a deterministic RBF-MMD alternative.

namespace shiftgauge {

enum class DivergenceMethod { js_discriminator, mmd_rbf };

inline const char* divergence_method_name(DivergenceMethod m) {
  return m == DivergenceMethod::js_discriminator ? "js_discriminator"
                                                 : "mmd_rbf";
}

inline DivergenceMethod parse_divergence_method(const std::string& s) {
  if (s == "js_discriminator") return DivergenceMethod::js_discriminator;
  if (s == "mmd_rbf") return DivergenceMethod::mmd_rbf;
  throw ConfigError(str_cat("unknown divergence method '", s, "'"));
}

struct DivergenceEstimate {
  DivergenceMethod method = DivergenceMethod::js_discriminator;
  double value = 0.0;
  int audit_epochs = 0;
  std::map<std::string, double> details;
};

struct AuditConfig {
  int audit_epochs = 120;
  double lr = 1e-2;
  double holdout_fraction = 1.0 / 3.0;
  std::vector<int> disc_widths = {32, 32};
  std::uint64_t seed = 9001;
  int max_points_per_domain = 512;
};

namespace detail {

// Eval-mode embeddings as a plain matrix (n x latent_dim).
inline Tensor embed_dataset(const Hypothesis& g, const Dataset& data) {
  return g.encode(g.features_tensor(data)).detached_copy();
}

inline Tensor subsample_rows(const Tensor& m, int max_rows, Rng& rng) {
  int n = m.shape()[0], d = m.shape()[1];
  if (n <= max_rows) return m;
  std::vector<int> perm = rng.permutation(n);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_rows) * d);
  for (int i = 0; i < max_rows; ++i) {
    const double* r = &m.data()[static_cast<std::size_t>(perm[i]) * d];
    out.insert(out.end(), r, r + d);
  }
  return Tensor::from_data({max_rows, d}, std::move(out));
}

inline std::pair<Tensor, Tensor> split_rows(const Tensor& m, int n_first) {
  int n = m.shape()[0], d = m.shape()[1];
  std::vector<double> a(m.data().begin(),
                        m.data().begin() + static_cast<std::ptrdiff_t>(n_first) * d);
  std::vector<double> b(m.data().begin() + static_cast<std::ptrdiff_t>(n_first) * d,
                        m.data().end());
  return {Tensor::from_data({n_first, d}, std::move(a)),
          Tensor::from_data({n - n_first, d}, std::move(b))};
}

// Balanced binary cross-entropy: each domain contributes weight 1/2
// regardless of sample counts.
inline Tensor balanced_domain_bce(const Discriminator& disc, const Tensor& zs,
                                  const Tensor& zt) {
  std::vector<int> ls(static_cast<std::size_t>(zs.shape()[0]), 0);
  std::vector<int> lt(static_cast<std::size_t>(zt.shape()[0]), 1);
  Tensor loss_s = cross_entropy(disc.logits(zs), ls);
  Tensor loss_t = cross_entropy(disc.logits(zt), lt);
  return scale(add(loss_s, loss_t), 0.5);
}

inline double median_pairwise_distance(const std::vector<double>& rows, int n,
                                       int d) {
  std::vector<double> dists;
  dists.reserve(static_cast<std::size_t>(n) * (n - 1) / 2);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (int t = 0; t < d; ++t) {
        double diff = rows[static_cast<std::size_t>(i) * d + t] -
                      rows[static_cast<std::size_t>(j) * d + t];
        sq += diff * diff;
      }
      dists.push_back(std::sqrt(sq));
    }
  if (dists.empty()) return 0.0;
  std::nth_element(dists.begin(), dists.begin() + dists.size() / 2,
                   dists.end());
  return dists[dists.size() / 2];
}

}  // namespace detail

constexpr double kLn2 = 0.69314718055994530942;

// Trains a fresh discriminator from scratch to tell domains apart on
// g-embeddings and returns max(0, ln 2 - best held-out cross-entropy): the
// Jensen-Shannon proxy under the optimal-discriminator identity.
inline DivergenceEstimate estimate_js(const Hypothesis& g,
                                      const Dataset& source,
                                      const Dataset& target,
                                      const AuditConfig& cfg) {
  if (source.n < 1 || target.n < 1)
    throw InputError("estimate_js: empty sample");
  Rng rng(cfg.seed);
  Rng sub_rng = rng.split("subsample");
  Tensor zs = detail::subsample_rows(detail::embed_dataset(g, source),
                                     cfg.max_points_per_domain, sub_rng);
  Tensor zt = detail::subsample_rows(detail::embed_dataset(g, target),
                                     cfg.max_points_per_domain, sub_rng);

  // Held-out audit split per domain (embeddings arrive in generator order;
  // rows are shuffled before the cut).
  auto shuffle_rows = [&](Tensor& m, const char* label) {
    Rng r = rng.split(label);
    int n = m.shape()[0], d = m.shape()[1];
    std::vector<int> perm = r.permutation(n);
    std::vector<double> out(m.data().size());
    for (int i = 0; i < n; ++i)
      std::copy_n(&m.data()[static_cast<std::size_t>(perm[i]) * d], d,
                  &out[static_cast<std::size_t>(i) * d]);
    m = Tensor::from_data({n, d}, std::move(out));
  };
  shuffle_rows(zs, "shuffle-src");
  shuffle_rows(zt, "shuffle-tgt");

  int ns = zs.shape()[0], nt = zt.shape()[0];
  int hs = std::max(1, static_cast<int>(std::lround(ns * cfg.holdout_fraction)));
  int ht = std::max(1, static_cast<int>(std::lround(nt * cfg.holdout_fraction)));
  if (hs >= ns) hs = ns - 1;
  if (ht >= nt) ht = nt - 1;
  bool can_holdout = hs >= 1 && ht >= 1;
  auto [zs_held, zs_train] = can_holdout ? detail::split_rows(zs, hs)
                                         : std::pair{zs, zs};
  auto [zt_held, zt_train] = can_holdout ? detail::split_rows(zt, ht)
                                         : std::pair{zt, zt};

  Rng init_rng = rng.split("disc-init");
  Discriminator disc =
      Discriminator::init(zs.shape()[1], cfg.disc_widths, init_rng);
  auto params = disc.parameters();
  AdamState adam;
  adam_init(adam, params);

  double best_heldout = detail::balanced_domain_bce(disc, zs_held, zt_held).value();
  double final_train = 0.0;
  for (int epoch = 1; epoch <= cfg.audit_epochs; ++epoch) {
    zero_grads(params);
    Tensor loss = detail::balanced_domain_bce(disc, zs_train, zt_train);
    final_train = loss.value();
    if (!std::isfinite(final_train))
      throw EstimationError(
          str_cat("audit discriminator diverged at epoch ", epoch),
          best_heldout);
    loss.backward();
    adam_step(params, adam, cfg.lr);
    double held = detail::balanced_domain_bce(disc, zs_held, zt_held).value();
    if (std::isfinite(held)) best_heldout = std::min(best_heldout, held);
  }

  DivergenceEstimate est;
  est.method = DivergenceMethod::js_discriminator;
  est.audit_epochs = cfg.audit_epochs;
  est.value = std::clamp(kLn2 - best_heldout, 0.0, kLn2);
  est.details["best_heldout_bce"] = best_heldout;
  est.details["final_train_bce"] = final_train;
  est.details["points_source"] = ns;
  est.details["points_target"] = nt;
  return est;
}

// Biased V-statistic MMD^2 with the RBF kernel on already-embedded rows.
// Bandwidth <= 0 selects the median heuristic over the pooled sample; an
// all-identical pool falls back to sigma = 1 and flags it.
inline DivergenceEstimate estimate_mmd_embedded(const Tensor& zs,
                                                const Tensor& zt,
                                                double bandwidth = 0.0) {
  int d = zs.shape()[1];
  DivergenceEstimate est;
  est.method = DivergenceMethod::mmd_rbf;
  double sigma = bandwidth;
  if (sigma <= 0.0) {
    std::vector<double> pooled = zs.data();
    pooled.insert(pooled.end(), zt.data().begin(), zt.data().end());
    sigma = detail::median_pairwise_distance(
        pooled, zs.shape()[0] + zt.shape()[0], d);
    if (sigma <= 0.0) {
      sigma = 1.0;
      est.details["bandwidth_fallback"] = 1.0;
    }
  }
  est.value = mmd_rbf(zs, zt, sigma).value();
  est.details["sigma"] = sigma;
  return est;
}

// MMD^2 of the two samples under g's encoder.
inline DivergenceEstimate estimate_mmd(const Hypothesis& g,
                                       const Dataset& source,
                                       const Dataset& target,
                                       double bandwidth = 0.0) {
  if (source.n < 1 || target.n < 1)
    throw InputError("estimate_mmd: empty sample");
  Tensor zs = detail::embed_dataset(g, source);
  Tensor zt = detail::embed_dataset(g, target);
  return estimate_mmd_embedded(zs, zt, bandwidth);
}

// Raw-feature variant (identity encoder).
inline DivergenceEstimate estimate_mmd_raw(const Dataset& source,
                                           const Dataset& target,
                                           double bandwidth = 0.0) {
  if (source.n < 1 || target.n < 1)
    throw InputError("estimate_mmd: empty sample");
  Tensor zs = Tensor::from_data({source.n, source.d}, source.features);
  Tensor zt = Tensor::from_data({target.n, target.d}, target.features);
  return estimate_mmd_embedded(zs, zt, bandwidth);
}

}  // namespace shiftgauge
