#pragma once

#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/class_divergence.hpp"
#include "shiftgauge/dir_trainer.hpp"

// Comparison estimators: the class-pair-divergence bound (source risk plus
// the estimated pair divergence; the best-joint-risk term is unobservable
// without target labels and reported as omitted) and the confidence-score
// drop predictor.

namespace shiftgauge {

enum class BenDavidClassMode { source_constrained, dir_constrained };

struct BaselineEstimate {
  std::string method;
  double predicted_risk = 0.0;
  std::map<std::string, double> components;
  std::string notes;
};

// predicted = R_S(h) on the validation split + the adversarially estimated
// pair divergence over the chosen class: {h : R_S(h) <= eps} for supervised
// candidates, the DIR-constrained set for adaptive ones.
inline BaselineEstimate ben_david_estimate(const Hypothesis& h,
                                           BenDavidClassMode mode,
                                           const MlpSpec& class_spec,
                                           const Dataset& source,
                                           const Dataset& target,
                                           const DirConfig& cfg) {
  SplitSets splits = make_splits(source, target, cfg);
  double src_risk = zero_one_risk(h, splits.src_val);

  ClassConfig ccfg;
  ccfg.spec = class_spec;
  ccfg.constraint = mode == BenDavidClassMode::source_constrained
                        ? ConstraintKind::source_risk
                        : ConstraintKind::dir_objective;
  ClassDivergenceEstimate hdh = estimate_hdh(ccfg, source, target, cfg);

  BaselineEstimate est;
  est.method = "ben_david";
  est.predicted_risk = src_risk + hdh.value;
  est.components["src_risk"] = src_risk;
  est.components["hdh_estimate"] = hdh.value;
  est.components["epsilon_used"] = hdh.epsilon_used;
  est.notes = "lambda_H omitted (unobservable without target labels)";
  return est;
}

// conf = mean max-softmax on source minus mean max-softmax on target;
// predicted = R_S(h) + conf, reported unclamped with a clamped companion
// (the baseline's known failure mode is underestimation, and clamping
// silently would hide it).
inline BaselineEstimate conf_score_estimate(const Hypothesis& h,
                                            const Dataset& source,
                                            const Dataset& target) {
  if (source.n < 1 || target.n < 1)
    throw InputError("conf_score_estimate: empty sample");
  double src_risk = zero_one_risk(h, source);
  double conf = h.mean_confidence(source) - h.mean_confidence(target);
  BaselineEstimate est;
  est.method = "conf_score";
  est.predicted_risk = src_risk + conf;
  est.components["src_risk"] = src_risk;
  est.components["conf"] = conf;
  est.components["predicted_clamped"] =
      std::min(1.0, std::max(0.0, est.predicted_risk));
  return est;
}

// Table metrics over (predicted, true) pairs: mean absolute error and the
// Pearson correlation coefficient.
struct MethodScore {
  double mean_abs_err = 0.0;
  double pearson = 0.0;
};

inline MethodScore score_methods(
    const std::vector<std::pair<double, double>>& pairs) {
  if (pairs.size() < 2)
    throw InputError("score_methods: need at least 2 (predicted, true) pairs");
  MethodScore s;
  double mp = 0.0, mt = 0.0;
  for (const auto& [p, t] : pairs) {
    s.mean_abs_err += std::abs(p - t);
    mp += p;
    mt += t;
  }
  s.mean_abs_err /= static_cast<double>(pairs.size());
  mp /= static_cast<double>(pairs.size());
  mt /= static_cast<double>(pairs.size());
  double spp = 0.0, stt = 0.0, spt = 0.0;
  for (const auto& [p, t] : pairs) {
    spp += (p - mp) * (p - mp);
    stt += (t - mt) * (t - mt);
    spt += (p - mp) * (t - mt);
  }
  if (spp == 0.0)
    throw MetricError("pearson undefined: predicted series is constant");
  if (stt == 0.0)
    throw MetricError("pearson undefined: true series is constant");
  s.pearson = spt / std::sqrt(spp * stt);
  return s;
}

}  // namespace shiftgauge
