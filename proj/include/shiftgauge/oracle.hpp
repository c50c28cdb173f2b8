#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/errors.hpp"
#include "shiftgauge/rng.hpp"

// Exact brute force over tiny finite hypothesis classes on 1-D data. Every
// quantity is a ratio of integer counts (disagreements are bitmask XORs), so
// the theorem checks compare integers, never rounded floats.

namespace shiftgauge::oracle {

struct Sample {
  std::vector<double> x;
  std::vector<int> y;  // empty when unlabeled

  int n() const { return static_cast<int>(x.size()); }
  bool labeled() const { return !y.empty(); }
};

using Map = std::function<double(double)>;

struct Classifier {
  std::function<int(double)> fn;
  std::string desc;
};

struct FiniteClass {
  std::vector<Classifier> members;

  int size() const { return static_cast<int>(members.size()); }
};

// Exact ratio of integer counts.
struct Fraction {
  long long num = 0;
  long long den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }

  // Cross-multiplied exact comparisons (denominators are positive).
  bool operator<=(const Fraction& o) const { return num * o.den <= o.num * den; }
  bool operator<(const Fraction& o) const { return num * o.den < o.num * den; }
  bool operator==(const Fraction& o) const { return num * o.den == o.num * den; }
};

inline Fraction frac_abs_diff(long long cs, long long ns, long long ct,
                              long long nt) {
  long long num = cs * nt - ct * ns;
  if (num < 0) num = -num;
  return Fraction{num, ns * nt};
}

// Predictions of one classifier over one sample, packed 1 bit per point.
struct BitPreds {
  std::vector<std::uint64_t> bits;
  int n = 0;

  static BitPreds eval(const Classifier& h, const std::vector<double>& xs) {
    BitPreds p;
    p.n = static_cast<int>(xs.size());
    p.bits.assign((xs.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < xs.size(); ++i)
      if (h.fn(xs[i]) != 0) p.bits[i >> 6] |= std::uint64_t(1) << (i & 63);
    return p;
  }

  static BitPreds from_labels(const std::vector<int>& ys) {
    BitPreds p;
    p.n = static_cast<int>(ys.size());
    p.bits.assign((ys.size() + 63) / 64, 0);
    for (std::size_t i = 0; i < ys.size(); ++i)
      if (ys[i] != 0) p.bits[i >> 6] |= std::uint64_t(1) << (i & 63);
    return p;
  }
};

// Number of points where the two prediction vectors differ.
inline long long count_disagree(const BitPreds& a, const BitPreds& b) {
  long long c = 0;
  for (std::size_t w = 0; w < a.bits.size(); ++w)
    c += std::popcount(a.bits[w] ^ b.bits[w]);
  return c;
}

// ---------------------------------------------------------------------------
// Classifier and map families

// 1[s * (x - t) > 0] over a uniform grid of thresholds, both signs. With the
// grid wider than the data span this family also realizes both constant
// classifiers.
inline FiniteClass threshold_grid(double lo, double hi, int count) {
  if (count < 1) throw InputError("threshold_grid: count must be >= 1");
  FiniteClass cls;
  for (int s : {+1, -1}) {
    for (int i = 0; i < count; ++i) {
      double t = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
      cls.members.push_back(
          {[s, t](double x) { return s * (x - t) > 0.0 ? 1 : 0; },
           str_cat("thr(t=", t, ",s=", s, ")")});
    }
  }
  return cls;
}

// Monotone piecewise-linear 1-D maps: scalings, shifts, one-sided clamps.
inline std::vector<Map> monotone_map_family(const std::vector<double>& knots) {
  std::vector<Map> maps;
  maps.push_back([](double x) { return x; });
  maps.push_back([](double x) { return -x; });
  for (double c : knots) {
    maps.push_back([c](double x) { return x + c; });
    maps.push_back([c](double x) { return x > c ? x : c; });  // clamp below
    maps.push_back([c](double x) { return x < c ? x : c; });  // clamp above
  }
  return maps;
}

// Encoder list x predictor list with composition as the membership rule.
struct ComposedClass {
  std::vector<Map> encoders;
  std::vector<Classifier> predictors;  // act on the latent coordinate

  Classifier member(int e, int p) const {
    const Map& g = encoders[static_cast<std::size_t>(e)];
    const Classifier& f = predictors[static_cast<std::size_t>(p)];
    return {[g, f](double x) { return f.fn(g(x)); },
            str_cat(f.desc, " o enc", e)};
  }

  FiniteClass flatten() const {
    FiniteClass cls;
    for (std::size_t e = 0; e < encoders.size(); ++e)
      for (std::size_t p = 0; p < predictors.size(); ++p)
        cls.members.push_back(member(static_cast<int>(e), static_cast<int>(p)));
    return cls;
  }
};

inline std::vector<Map> compose_maps(const std::vector<Map>& outer,
                                     const std::vector<Map>& inner) {
  std::vector<Map> out;
  for (const Map& o : outer)
    for (const Map& i : inner)
      out.push_back([o, i](double x) { return o(i(x)); });
  return out;
}

inline std::vector<Classifier> compose_classifiers(
    const std::vector<Classifier>& preds, const std::vector<Map>& maps) {
  std::vector<Classifier> out;
  for (const Classifier& f : preds)
    for (std::size_t mi = 0; mi < maps.size(); ++mi) {
      const Map& m = maps[mi];
      out.push_back({[f, m](double z) { return f.fn(m(z)); },
                     str_cat(f.desc, " o map", mi)});
    }
  return out;
}

inline std::vector<double> apply_map(const Map& g,
                                     const std::vector<double>& xs) {
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = g(xs[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Constraints on check-model membership

struct Constraint {
  enum class Kind { none, source_risk, dir_objective };
  Kind kind = Kind::none;
  double epsilon = 1.0;
  double alpha = 1.0;
  // Uniform binning for the exact discrete divergence (total variation
  // between embedded empirical samples).
  double bin_lo = -4.0;
  double bin_hi = 4.0;
  int bins = 41;

  static Constraint none() { return Constraint{}; }
  static Constraint max_source_risk(double eps) {
    Constraint c;
    c.kind = Kind::source_risk;
    c.epsilon = eps;
    return c;
  }
  static Constraint dir(double eps, double alpha) {
    Constraint c;
    c.kind = Kind::dir_objective;
    c.epsilon = eps;
    c.alpha = alpha;
    return c;
  }
};

// Total variation between two embedded samples binned on the constraint's
// grid; exact rational in the two sample sizes.
inline Fraction binned_tv(const Constraint& c, const std::vector<double>& zs,
                          const std::vector<double>& zt) {
  std::vector<long long> hs(static_cast<std::size_t>(c.bins), 0);
  std::vector<long long> ht(static_cast<std::size_t>(c.bins), 0);
  auto bin_of = [&](double z) {
    if (z <= c.bin_lo) return 0;
    if (z >= c.bin_hi) return c.bins - 1;
    int b = static_cast<int>((z - c.bin_lo) / (c.bin_hi - c.bin_lo) * c.bins);
    return std::min(b, c.bins - 1);
  };
  for (double z : zs) ++hs[static_cast<std::size_t>(bin_of(z))];
  for (double z : zt) ++ht[static_cast<std::size_t>(bin_of(z))];
  long long ns = static_cast<long long>(zs.size());
  long long nt = static_cast<long long>(zt.size());
  long long num = 0;
  for (int b = 0; b < c.bins; ++b) {
    long long d = hs[static_cast<std::size_t>(b)] * nt -
                  ht[static_cast<std::size_t>(b)] * ns;
    num += d < 0 ? -d : d;
  }
  return Fraction{num, 2 * ns * nt};
}

// Constraint scalar for one hypothesis; the encoder argument is used only by
// the dir_objective kind.
inline double constraint_value(const Constraint& c, const BitPreds& preds,
                               const BitPreds& source_labels, int ns,
                               const Map* encoder,
                               const std::vector<double>& source_x,
                               const std::vector<double>& target_x) {
  if (c.kind == Constraint::Kind::none) return 0.0;
  double src_risk =
      static_cast<double>(count_disagree(preds, source_labels)) / ns;
  if (c.kind == Constraint::Kind::source_risk) return src_risk;
  if (encoder == nullptr)
    throw OracleError("dir_objective constraint needs an encoder");
  Fraction tv = binned_tv(c, apply_map(*encoder, source_x),
                          apply_map(*encoder, target_x));
  return src_risk + c.alpha * tv.value();
}

// ---------------------------------------------------------------------------
// Exact quantities

// Feasible member indices of a flattened composed class (or plain class when
// encoders is empty / constraint does not need them).
inline std::vector<int> feasible_members(const ComposedClass& cls,
                                         const Constraint& c,
                                         const Sample& source,
                                         const std::vector<double>& target_x) {
  if (!source.labeled()) throw OracleError("constraint needs labeled source");
  BitPreds src_labels = BitPreds::from_labels(source.y);
  std::vector<int> out;
  int np = static_cast<int>(cls.predictors.size());
  for (std::size_t e = 0; e < cls.encoders.size(); ++e)
    for (int p = 0; p < np; ++p) {
      Classifier h = cls.member(static_cast<int>(e), p);
      BitPreds preds = BitPreds::eval(h, source.x);
      double v = constraint_value(c, preds, src_labels, source.n(),
                                  &cls.encoders[e], source.x, target_x);
      if (v <= c.epsilon) out.push_back(static_cast<int>(e) * np + p);
    }
  return out;
}

inline ComposedClass as_composed(const FiniteClass& cls) {
  ComposedClass cc;
  cc.encoders.push_back([](double x) { return x; });
  cc.predictors = cls.members;
  return cc;
}

struct ProxyRiskResult {
  Fraction value;
  int argmax = -1;  // flattened member index, first maximizer in list order
};

// sup over feasible h' of target-sample disagreement with h.
inline ProxyRiskResult exact_proxy_risk(const Classifier& h,
                                        const ComposedClass& cls,
                                        const Constraint& constraint,
                                        const Sample& source,
                                        const std::vector<double>& target_x) {
  std::vector<int> feas = feasible_members(cls, constraint, source, target_x);
  if (feas.empty()) throw OracleError("exact_proxy_risk: empty feasible set");
  BitPreds hp = BitPreds::eval(h, target_x);
  int nt = static_cast<int>(target_x.size());
  int np = static_cast<int>(cls.predictors.size());
  ProxyRiskResult best;
  best.value = Fraction{-1, static_cast<long long>(nt)};
  for (int idx : feas) {
    Classifier m = cls.member(idx / np, idx % np);
    long long c = count_disagree(hp, BitPreds::eval(m, target_x));
    if (Fraction{best.value.num, best.value.den} <
        Fraction{c, static_cast<long long>(nt)}) {
      best.value = Fraction{c, static_cast<long long>(nt)};
      best.argmax = idx;
    }
  }
  return best;
}

inline ProxyRiskResult exact_proxy_risk(const Classifier& h,
                                        const FiniteClass& cls,
                                        const Constraint& constraint,
                                        const Sample& source,
                                        const std::vector<double>& target_x) {
  return exact_proxy_risk(h, as_composed(cls), constraint, source, target_x);
}

// inf over feasible h' of true target risk.
inline Fraction exact_bias(const ComposedClass& cls,
                           const Constraint& constraint, const Sample& source,
                           const Sample& labeled_target) {
  if (!labeled_target.labeled())
    throw OracleError("exact_bias: target labels required");
  std::vector<int> feas =
      feasible_members(cls, constraint, source, labeled_target.x);
  if (feas.empty()) throw OracleError("exact_bias: empty feasible set");
  BitPreds ty = BitPreds::from_labels(labeled_target.y);
  int nt = labeled_target.n();
  int np = static_cast<int>(cls.predictors.size());
  Fraction best{static_cast<long long>(nt) + 1, static_cast<long long>(nt)};
  for (int idx : feas) {
    Classifier m = cls.member(idx / np, idx % np);
    long long c = count_disagree(ty, BitPreds::eval(m, labeled_target.x));
    Fraction f{c, static_cast<long long>(nt)};
    if (f < best) best = f;
  }
  return best;
}

inline Fraction exact_bias(const FiniteClass& cls, const Constraint& constraint,
                           const Sample& source, const Sample& labeled_target) {
  return exact_bias(as_composed(cls), constraint, source, labeled_target);
}

// sup over pairs in the class of | R_S(h,h') - R_T(h,h') |  (Def. of the
// class-pair divergence). Constrain by pre-filtering the class.
inline Fraction exact_hdh(const FiniteClass& cls,
                          const std::vector<double>& source_x,
                          const std::vector<double>& target_x) {
  long long ns = static_cast<long long>(source_x.size());
  long long nt = static_cast<long long>(target_x.size());
  std::vector<BitPreds> ps, pt;
  ps.reserve(cls.members.size());
  pt.reserve(cls.members.size());
  for (const auto& m : cls.members) {
    ps.push_back(BitPreds::eval(m, source_x));
    pt.push_back(BitPreds::eval(m, target_x));
  }
  Fraction best{0, ns * nt};
  for (std::size_t i = 0; i < cls.members.size(); ++i)
    for (std::size_t j = i; j < cls.members.size(); ++j) {
      Fraction f = frac_abs_diff(count_disagree(ps[i], ps[j]), ns,
                                 count_disagree(pt[i], pt[j]), nt);
      if (best < f) best = f;
    }
  return best;
}

// Same supremum with the predictor shared across the pair: sup over
// f in predictors, g and g' in encoders.
inline Fraction exact_fgg(const ComposedClass& cls,
                          const std::vector<double>& source_x,
                          const std::vector<double>& target_x) {
  long long ns = static_cast<long long>(source_x.size());
  long long nt = static_cast<long long>(target_x.size());
  std::size_t ne = cls.encoders.size();
  std::size_t np = cls.predictors.size();
  // preds[e][p] over each domain
  std::vector<std::vector<BitPreds>> ps(ne), pt(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    ps[e].reserve(np);
    pt[e].reserve(np);
    for (std::size_t p = 0; p < np; ++p) {
      Classifier m = cls.member(static_cast<int>(e), static_cast<int>(p));
      ps[e].push_back(BitPreds::eval(m, source_x));
      pt[e].push_back(BitPreds::eval(m, target_x));
    }
  }
  Fraction best{0, ns * nt};
  for (std::size_t p = 0; p < np; ++p)
    for (std::size_t e = 0; e < ne; ++e)
      for (std::size_t e2 = e; e2 < ne; ++e2) {
        Fraction f = frac_abs_diff(count_disagree(ps[e][p], ps[e2][p]), ns,
                                   count_disagree(pt[e][p], pt[e2][p]), nt);
        if (best < f) best = f;
      }
  return best;
}

// Latent-space pair divergence under a fixed encoder: embed both samples,
// then take the unshared supremum over the predictor class.
inline Fraction exact_latent_fdf(const Map& fixed_encoder,
                                 const FiniteClass& predictors,
                                 const std::vector<double>& source_x,
                                 const std::vector<double>& target_x) {
  return exact_hdh(predictors, apply_map(fixed_encoder, source_x),
                   apply_map(fixed_encoder, target_x));
}

struct Lemma4Witness {
  bool holds = false;
  Fraction proxy_risk;       // sup disagreement with h
  Fraction target_risk_h;    // R_T(h)
  Fraction sup_check_risk;   // sup over feasible h' of R_T(h')
};

// |sup_{h'} R_T(h,h') - R_T(h)| <= sup_{h'} R_T(h'), checked on integer
// counts (all three share the target sample size as denominator).
inline Lemma4Witness verify_lemma4(const Classifier& h,
                                   const ComposedClass& cls,
                                   const Constraint& constraint,
                                   const Sample& source,
                                   const Sample& labeled_target) {
  if (!labeled_target.labeled())
    throw OracleError("verify_lemma4: target labels required");
  std::vector<int> feas =
      feasible_members(cls, constraint, source, labeled_target.x);
  if (feas.empty()) throw OracleError("verify_lemma4: empty feasible set");
  long long nt = labeled_target.n();
  BitPreds hp = BitPreds::eval(h, labeled_target.x);
  BitPreds ty = BitPreds::from_labels(labeled_target.y);
  int np = static_cast<int>(cls.predictors.size());
  long long best_dis = 0, sup_risk = 0;
  for (int idx : feas) {
    Classifier m = cls.member(idx / np, idx % np);
    BitPreds mp = BitPreds::eval(m, labeled_target.x);
    best_dis = std::max(best_dis, count_disagree(hp, mp));
    sup_risk = std::max(sup_risk, count_disagree(ty, mp));
  }
  long long rt_h = count_disagree(hp, ty);
  Lemma4Witness w;
  w.proxy_risk = Fraction{best_dis, nt};
  w.target_risk_h = Fraction{rt_h, nt};
  w.sup_check_risk = Fraction{sup_risk, nt};
  long long err = best_dis - rt_h;
  if (err < 0) err = -err;
  w.holds = err <= sup_risk;
  return w;
}

inline Lemma4Witness verify_lemma4(const Classifier& h, const FiniteClass& cls,
                                   const Constraint& constraint,
                                   const Sample& source,
                                   const Sample& labeled_target) {
  return verify_lemma4(h, as_composed(cls), constraint, source, labeled_target);
}

// ---------------------------------------------------------------------------
// Random instances for theorem fuzzing

// A nested two-stage division family over lattice data: stage maps M1, M2
// and a threshold bank T. Division 1 is (encoders=M1, predictors=T o M2),
// division 2 is (encoders=M2 o M1, predictors=T); both flatten to the same
// set T o M2 o M1, which is what the division inequalities require.
struct DivisionInstance {
  std::vector<Map> stage1;
  std::vector<Map> stage2;
  FiniteClass thresholds;
  ComposedClass division1;
  ComposedClass division2;
  Map g1_star;  // fixed encoders linked by g2* = m2* o g1*
  Map g2_star;
  Sample source;
  Sample target;
};

inline DivisionInstance make_random_division_instance(Rng& rng) {
  DivisionInstance inst;
  auto pick_knots = [&](int k) {
    std::vector<double> ks;
    for (int i = 0; i < k; ++i)
      ks.push_back(rng.uniform(-1.5, 1.5));
    return ks;
  };
  inst.stage1 = monotone_map_family(pick_knots(1));
  inst.stage2 = monotone_map_family(pick_knots(1));
  inst.thresholds =
      threshold_grid(-2.5, 2.5, 7 + static_cast<int>(rng.uniform_int(6)));

  inst.division1.encoders = inst.stage1;
  inst.division1.predictors =
      compose_classifiers(inst.thresholds.members, inst.stage2);
  inst.division2.encoders = compose_maps(inst.stage2, inst.stage1);
  inst.division2.predictors = inst.thresholds.members;

  std::size_t i1 = static_cast<std::size_t>(rng.uniform_int(inst.stage1.size()));
  std::size_t i2 = static_cast<std::size_t>(rng.uniform_int(inst.stage2.size()));
  Map m1 = inst.stage1[i1];
  Map m2 = inst.stage2[i2];
  inst.g1_star = m1;
  inst.g2_star = [m1, m2](double x) { return m2(m1(x)); };

  // Lattice data keeps every threshold comparison unambiguous.
  auto gen_sample = [&](int n, double shift) {
    Sample s;
    for (int i = 0; i < n; ++i) {
      double x = std::floor(rng.uniform(-10.0, 10.0)) * 0.2 + shift;
      s.x.push_back(x);
      s.y.push_back(rng.bernoulli(x > shift ? 0.7 : 0.3));
    }
    return s;
  };
  int n = 24 + static_cast<int>(rng.uniform_int(40));
  inst.source = gen_sample(n, 0.0);
  inst.target = gen_sample(n, rng.uniform(-0.5, 0.5));
  return inst;
}

}  // namespace shiftgauge::oracle
