#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/csv.hpp"
#include "shiftgauge/errors.hpp"
#include "shiftgauge/rng.hpp"

// Synthetic shift benchmarks with known-but-hidden target labels, plus CSV
// and IDX ingestion and seeded split management.

namespace shiftgauge {

struct Dataset {
  std::vector<double> features;  // n x d, row-major
  int n = 0;
  int d = 0;
  std::vector<int> labels;  // empty when unlabeled
  std::string domain_tag;   // "source" | "target"
  std::string name;

  bool has_labels() const { return !labels.empty(); }

  const double* row(int i) const {
    return &features[static_cast<std::size_t>(i) * static_cast<std::size_t>(d)];
  }

  int num_classes() const {
    int k = 0;
    for (int y : labels) k = std::max(k, y + 1);
    return k;
  }

  void check() const {
    if (n < 1) throw InputError(str_cat("dataset '", name, "' is empty"));
    if (features.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(d))
      throw InputError(str_cat("dataset '", name, "': ", features.size(),
                               " feature values for n=", n, " d=", d));
    if (has_labels()) {
      if (static_cast<int>(labels.size()) != n)
        throw InputError(str_cat("dataset '", name, "': ", labels.size(),
                                 " labels for ", n, " rows"));
      for (int y : labels)
        if (y < 0) throw InputError(str_cat("dataset '", name, "': negative label"));
    }
  }

  Dataset without_labels() const {
    Dataset out = *this;
    out.labels.clear();
    return out;
  }

  Dataset subset(const std::vector<int>& idx) const {
    Dataset out;
    out.d = d;
    out.n = static_cast<int>(idx.size());
    out.domain_tag = domain_tag;
    out.name = name;
    out.features.reserve(idx.size() * static_cast<std::size_t>(d));
    for (int i : idx) {
      const double* r = row(i);
      out.features.insert(out.features.end(), r, r + d);
    }
    if (has_labels()) {
      out.labels.reserve(idx.size());
      for (int i : idx) out.labels.push_back(labels[static_cast<std::size_t>(i)]);
    }
    return out;
  }
};

// Every read of hidden target labels is recorded here; estimators have no
// code path that reaches them, and tests assert the log holds only scoring
// reasons.
class HiddenLabelAudit {
 public:
  static void record(const std::string& reason) {
    std::lock_guard<std::mutex> lock(mutex());
    log().push_back(reason);
  }
  static std::vector<std::string> snapshot() {
    std::lock_guard<std::mutex> lock(mutex());
    return log();
  }
  static void reset() {
    std::lock_guard<std::mutex> lock(mutex());
    log().clear();
  }

 private:
  static std::vector<std::string>& log() {
    static std::vector<std::string> entries;
    return entries;
  }
  static std::mutex& mutex() {
    static std::mutex m;
    return m;
  }
};

// Labeled source + unlabeled target; the target's true labels ride along for
// harness scoring only, behind an audited accessor.
class ShiftPair {
 public:
  Dataset source;            // labeled
  Dataset target_unlabeled;  // labels stripped
  std::uint64_t split_seed = 0;
  double val_fraction = 0.2;

  ShiftPair() = default;

  ShiftPair(Dataset src, Dataset tgt_hidden, std::uint64_t seed, double vfrac)
      : source(std::move(src)),
        split_seed(seed),
        val_fraction(vfrac),
        target_hidden_(std::move(tgt_hidden)) {
    source.check();
    target_hidden_.check();
    if (!target_hidden_.has_labels())
      throw InputError("ShiftPair: hidden target view must be labeled");
    target_unlabeled = target_hidden_.without_labels();
  }

  // Scoring-only view. `reason` should name the metric being computed; it is
  // appended to the process-wide audit log.
  const Dataset& target_with_hidden_labels(const std::string& reason) const {
    HiddenLabelAudit::record(reason);
    return target_hidden_;
  }

 private:
  Dataset target_hidden_;
};

// Seeded shuffle then split; disjoint and exhaustive.
inline std::pair<Dataset, Dataset> split(const Dataset& data,
                                         double val_fraction,
                                         std::uint64_t seed) {
  data.check();
  if (!(val_fraction > 0.0 && val_fraction < 1.0))
    throw InputError(
        str_cat("val_fraction must be in (0,1), got ", val_fraction));
  Rng rng = Rng(seed).split("dataset-split");
  std::vector<int> perm = rng.permutation(data.n);
  int n_val = static_cast<int>(std::lround(val_fraction * data.n));
  n_val = std::min(std::max(n_val, 1), data.n - 1);
  std::vector<int> val_idx(perm.begin(), perm.begin() + n_val);
  std::vector<int> train_idx(perm.begin() + n_val, perm.end());
  return {data.subset(train_idx), data.subset(val_idx)};
}

// ---------------------------------------------------------------------------
// Generators

// Binary task in 2D with disjoint support bands: source lives on
// y in [0.8, 1.2], target on y in [-1.2, -0.8]. Class is carried by the
// x-coordinate (class 1 near +1, class 0 near -1, jitter sigma 0.15) and the
// label priors differ: p_S(y=1) = 0.5 + eps, p_T(y=1) = 0.5 - eps.
inline ShiftPair make_toy2d(double epsilon, int n_per_domain,
                            std::uint64_t seed) {
  if (epsilon < 0.0 || epsilon > 0.25)
    throw InputError(str_cat("toy2d epsilon must be in [0, 0.25], got ", epsilon));
  if (n_per_domain < 40)
    throw InputError(str_cat("toy2d needs n >= 40, got ", n_per_domain));
  Rng root(seed);
  auto gen_domain = [&](const char* tag, double prior1, double band_lo,
                        double band_hi) {
    Rng rng = root.split(str_cat("toy2d:", tag));
    Dataset ds;
    ds.d = 2;
    ds.n = n_per_domain;
    ds.domain_tag = tag;
    ds.name = "toy2d";
    for (int i = 0; i < n_per_domain; ++i) {
      int y = rng.bernoulli(prior1);
      double cx = y == 1 ? 1.0 : -1.0;
      double x0 = cx + rng.normal(0.0, 0.15);
      double x1 = rng.uniform(band_lo, band_hi);
      ds.features.push_back(x0);
      ds.features.push_back(x1);
      ds.labels.push_back(y);
    }
    return ds;
  };
  Dataset src = gen_domain("source", 0.5 + epsilon, 0.8, 1.2);
  Dataset tgt = gen_domain("target", 0.5 - epsilon, -1.2, -0.8);
  return ShiftPair(std::move(src), std::move(tgt), seed, 0.2);
}

// Two interleaved moons, point-symmetric through the origin so that a 180
// degree rotation maps each moon exactly onto the other. Target = source
// distribution rotated about the origin; labels ride with the points
// (covariate shift).
inline ShiftPair make_moons_shift(double rotation_deg, double noise, int n,
                                  std::uint64_t seed) {
  if (rotation_deg < 0.0 || rotation_deg > 360.0)
    throw InputError(
        str_cat("moons rotation must be in [0, 360], got ", rotation_deg));
  if (noise < 0.0) throw InputError(str_cat("moons noise must be >= 0, got ", noise));
  if (n < 2) throw InputError(str_cat("moons needs n >= 2, got ", n));
  Rng root(seed);
  const double pi = 3.14159265358979323846;
  auto gen_domain = [&](const char* tag, double rot_rad) {
    Rng rng = root.split(str_cat("moons:", tag));
    Dataset ds;
    ds.d = 2;
    ds.n = n;
    ds.domain_tag = tag;
    ds.name = "moons";
    double c = std::cos(rot_rad), s = std::sin(rot_rad);
    for (int i = 0; i < n; ++i) {
      int y = rng.bernoulli(0.5);
      double t = rng.uniform(0.0, pi);
      // moon 0 arcs over the top-left, moon 1 is its point reflection
      double px = std::cos(t) - 0.5;
      double py = std::sin(t) - 0.25;
      if (y == 1) {
        px = -px;
        py = -py;
      }
      px += rng.normal(0.0, noise);
      py += rng.normal(0.0, noise);
      double rx = c * px - s * py;
      double ry = s * px + c * py;
      ds.features.push_back(rx);
      ds.features.push_back(ry);
      ds.labels.push_back(y);
    }
    return ds;
  };
  Dataset src = gen_domain("source", 0.0);
  Dataset tgt = gen_domain("target", rotation_deg * pi / 180.0);
  return ShiftPair(std::move(src), std::move(tgt), seed, 0.2);
}

// Two Gaussian classes at x = -1 and x = +1 (sigma 0.4); the target moves
// each class mean toward (and past, for shift > 1) the other, so supervised
// target risk ramps smoothly from ~0 to ~1 with mean_shift.
inline ShiftPair make_gauss_shift(double mean_shift, int n,
                                  std::uint64_t seed) {
  if (mean_shift < 0.0 || mean_shift > 2.0)
    throw InputError(
        str_cat("gauss mean_shift must be in [0, 2], got ", mean_shift));
  if (n < 2) throw InputError(str_cat("gauss needs n >= 2, got ", n));
  Rng root(seed);
  auto gen_domain = [&](const char* tag, double shift) {
    Rng rng = root.split(str_cat("gauss:", tag));
    Dataset ds;
    ds.d = 2;
    ds.n = n;
    ds.domain_tag = tag;
    ds.name = "gauss";
    for (int i = 0; i < n; ++i) {
      int y = rng.bernoulli(0.5);
      double cx = y == 1 ? 1.0 - shift : -1.0 + shift;
      ds.features.push_back(cx + rng.normal(0.0, 0.4));
      ds.features.push_back(rng.normal(0.0, 0.4));
      ds.labels.push_back(y);
    }
    return ds;
  };
  Dataset src = gen_domain("source", 0.0);
  Dataset tgt = gen_domain("target", mean_shift);
  return ShiftPair(std::move(src), std::move(tgt), seed, 0.2);
}

// ---------------------------------------------------------------------------
// Loaders

// Comma-separated floats, one row per point. label_column = -1 means
// unlabeled; otherwise that column is read as an integer class index.
inline Dataset load_csv(const std::string& path, int label_column,
                        bool has_header) {
  auto rows = csv::parse_file(path);
  std::size_t start = 0;
  if (has_header) {
    if (rows.empty()) throw FormatError(str_cat(path, ": empty file with header"));
    start = 1;
  }
  if (rows.size() <= start) throw FormatError(str_cat(path, ": no data rows"));
  Dataset ds;
  ds.name = path;
  std::size_t width = rows[start].size();
  if (label_column >= static_cast<int>(width))
    throw FormatError(str_cat(path, ": label column ", label_column,
                              " out of range for width ", width));
  ds.d = static_cast<int>(width) - (label_column >= 0 ? 1 : 0);
  for (std::size_t r = start; r < rows.size(); ++r) {
    if (rows[r].size() != width)
      throw FormatError(str_cat(path, ": ragged row at line ", r + 1, " (",
                                rows[r].size(), " fields, expected ", width, ")"));
    for (std::size_t c = 0; c < width; ++c) {
      double v = csv::to_double(rows[r][c], str_cat(path, " line ", r + 1));
      if (static_cast<int>(c) == label_column) {
        double rounded = std::nearbyint(v);
        if (std::abs(v - rounded) > 1e-9 || rounded < 0.0)
          throw FormatError(str_cat(path, ": bad label '", rows[r][c],
                                    "' at line ", r + 1));
        ds.labels.push_back(static_cast<int>(rounded));
      } else {
        ds.features.push_back(v);
      }
    }
  }
  ds.n = static_cast<int>(rows.size() - start);
  ds.check();
  return ds;
}

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError(str_cat(path, ": truncated IDX header"));
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace detail

// Standard IDX pair: images magic 0x00000803, labels magic 0x00000801.
// Pixels are scaled to [0, 1].
inline Dataset load_idx(const std::string& images_path,
                        const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw IoError(str_cat("cannot open: ", images_path));
  std::uint32_t magic = detail::read_u32_be(img, images_path);
  if (magic != 0x00000803u)
    throw FormatError(str_cat(images_path, ": bad IDX image magic 0x",
                              std::hex, magic));
  std::uint32_t count = detail::read_u32_be(img, images_path);
  std::uint32_t rows = detail::read_u32_be(img, images_path);
  std::uint32_t cols = detail::read_u32_be(img, images_path);

  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw IoError(str_cat("cannot open: ", labels_path));
  std::uint32_t lmagic = detail::read_u32_be(lab, labels_path);
  if (lmagic != 0x00000801u)
    throw FormatError(str_cat(labels_path, ": bad IDX label magic 0x",
                              std::hex, lmagic));
  std::uint32_t lcount = detail::read_u32_be(lab, labels_path);
  if (count != lcount)
    throw FormatError(str_cat("IDX count mismatch: ", count, " images vs ",
                              lcount, " labels"));

  Dataset ds;
  ds.name = images_path;
  ds.n = static_cast<int>(count);
  ds.d = static_cast<int>(rows * cols);
  ds.features.reserve(static_cast<std::size_t>(ds.n) * ds.d);
  std::vector<unsigned char> buf(static_cast<std::size_t>(ds.d));
  for (std::uint32_t i = 0; i < count; ++i) {
    img.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
    if (!img)
      throw FormatError(str_cat(images_path, ": truncated at image ", i));
    for (unsigned char px : buf) ds.features.push_back(px / 255.0);
    int c = lab.get();
    if (c == EOF)
      throw FormatError(str_cat(labels_path, ": truncated at label ", i));
    ds.labels.push_back(c);
  }
  ds.check();
  return ds;
}

// ---------------------------------------------------------------------------

// Per-column affine transform fitted on source data only (target statistics
// must not leak into preprocessing).
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> inv_sd;

  bool empty() const { return mean.empty(); }

  static FeatureScaler fit(const Dataset& source) {
    FeatureScaler sc;
    sc.mean.assign(static_cast<std::size_t>(source.d), 0.0);
    sc.inv_sd.assign(static_cast<std::size_t>(source.d), 1.0);
    for (int i = 0; i < source.n; ++i) {
      const double* r = source.row(i);
      for (int j = 0; j < source.d; ++j) sc.mean[static_cast<std::size_t>(j)] += r[j];
    }
    for (double& m : sc.mean) m /= source.n;
    std::vector<double> var(static_cast<std::size_t>(source.d), 0.0);
    for (int i = 0; i < source.n; ++i) {
      const double* r = source.row(i);
      for (int j = 0; j < source.d; ++j) {
        double dlt = r[j] - sc.mean[static_cast<std::size_t>(j)];
        var[static_cast<std::size_t>(j)] += dlt * dlt;
      }
    }
    for (int j = 0; j < source.d; ++j) {
      double sd = std::sqrt(var[static_cast<std::size_t>(j)] / source.n);
      sc.inv_sd[static_cast<std::size_t>(j)] = sd > 0.0 ? 1.0 / sd : 1.0;
    }
    return sc;
  }

  void apply_row(double* row, int d) const {
    for (int j = 0; j < d; ++j)
      row[j] = (row[j] - mean[static_cast<std::size_t>(j)]) *
               inv_sd[static_cast<std::size_t>(j)];
  }
};

}  // namespace shiftgauge
