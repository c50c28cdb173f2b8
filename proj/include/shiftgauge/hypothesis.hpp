#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "shiftgauge/dataset.hpp"
#include "shiftgauge/errors.hpp"
#include "shiftgauge/rng.hpp"
#include "shiftgauge/tensor.hpp"

// Multilayer-perceptron hypotheses decomposed as h = f . g at a declared
// division index: the encoder is layers 1..i (each Linear+ReLU), the
// predictor is layers i+1..N with a final Linear into class logits.

namespace shiftgauge {

struct MlpSpec {
  int input_dim = 0;
  std::vector<int> widths;  // hidden widths; total layers N = widths.size()+1
  int num_classes = 2;
  int division_index = 1;  // in [1, widths.size()]
  double dropout_rate = 0.0;

  int total_layers() const { return static_cast<int>(widths.size()) + 1; }

  int latent_dim() const {
    return widths[static_cast<std::size_t>(division_index - 1)];
  }

  void check() const {
    if (input_dim < 1) throw InputError(str_cat("input_dim must be >= 1, got ", input_dim));
    if (num_classes < 2)
      throw InputError(str_cat("num_classes must be >= 2, got ", num_classes));
    if (widths.empty()) throw InputError("widths must be non-empty");
    for (int w : widths)
      if (w < 1) throw InputError(str_cat("hidden width must be >= 1, got ", w));
    if (division_index < 1 || division_index > static_cast<int>(widths.size()))
      throw InputError(str_cat("division_index ", division_index,
                               " out of range [1,", widths.size(), "]"));
    if (dropout_rate < 0.0 || dropout_rate >= 1.0)
      throw InputError(str_cat("dropout_rate must be in [0,1), got ", dropout_rate));
  }

  MlpSpec with_division(int i) const {
    MlpSpec s = *this;
    s.division_index = i;
    return s;
  }

  // in/out dims of layer `li` (0-based over all N layers).
  std::pair<int, int> layer_dims(int li) const {
    int in = li == 0 ? input_dim : widths[static_cast<std::size_t>(li - 1)];
    int out = li == static_cast<int>(widths.size())
                  ? num_classes
                  : widths[static_cast<std::size_t>(li)];
    return {in, out};
  }
};

struct DenseLayer {
  Tensor w;  // in x out
  Tensor b;  // out

  static DenseLayer init(int in, int out, Rng& rng) {
    // He-style fan-in uniform for ReLU stacks; biases zero.
    double limit = std::sqrt(6.0 / in);
    std::vector<double> wdata(static_cast<std::size_t>(in) * out);
    for (double& v : wdata) v = rng.uniform(-limit, limit);
    DenseLayer l;
    l.w = Tensor::from_data({in, out}, std::move(wdata), true);
    l.b = Tensor::zeros({out}, true);
    return l;
  }

  DenseLayer deep_copy() const {
    DenseLayer l;
    l.w = w.detached_copy();
    l.b = b.detached_copy();
    return l;
  }

  Tensor apply(const Tensor& x) const { return add_row_bias(matmul(x, w), b); }
};

class Hypothesis {
 public:
  Hypothesis() = default;

  static Hypothesis init(const MlpSpec& spec, Rng& rng) {
    spec.check();
    Hypothesis h;
    h.spec_ = spec;
    for (int li = 0; li < spec.total_layers(); ++li) {
      auto [in, out] = spec.layer_dims(li);
      DenseLayer layer = DenseLayer::init(in, out, rng);
      if (li < spec.division_index)
        h.encoder_.push_back(std::move(layer));
      else
        h.predictor_.push_back(std::move(layer));
    }
    return h;
  }

  // Predictor-only model over an already-embedded space: identity encoder,
  // hidden widths may be empty (a bare linear classifier). Used when
  // optimizing over the predictor class with the encoder held fixed.
  static Hypothesis init_predictor_only(int input_dim,
                                        const std::vector<int>& hidden,
                                        int num_classes, Rng& rng) {
    if (input_dim < 1 || num_classes < 2)
      throw InputError("init_predictor_only: bad dimensions");
    Hypothesis h;
    h.spec_.input_dim = input_dim;
    h.spec_.widths = hidden;
    h.spec_.num_classes = num_classes;
    h.spec_.division_index = 0;  // identity encoder
    int in = input_dim;
    for (int w : hidden) {
      if (w < 1) throw InputError("init_predictor_only: bad hidden width");
      h.predictor_.push_back(DenseLayer::init(in, w, rng));
      in = w;
    }
    h.predictor_.push_back(DenseLayer::init(in, num_classes, rng));
    return h;
  }

  const MlpSpec& spec() const { return spec_; }
  const FeatureScaler& scaler() const { return scaler_; }
  void set_scaler(FeatureScaler sc) { scaler_ = std::move(sc); }

  std::vector<DenseLayer>& encoder_layers() { return encoder_; }
  std::vector<DenseLayer>& predictor_layers() { return predictor_; }
  const std::vector<DenseLayer>& encoder_layers() const { return encoder_; }
  const std::vector<DenseLayer>& predictor_layers() const { return predictor_; }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> ps;
    for (auto& l : encoder_) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    for (auto& l : predictor_) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    return ps;
  }

  std::vector<Tensor> encoder_parameters() {
    std::vector<Tensor> ps;
    for (auto& l : encoder_) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    return ps;
  }

  Hypothesis deep_copy() const {
    Hypothesis h;
    h.spec_ = spec_;
    h.scaler_ = scaler_;
    for (const auto& l : encoder_) h.encoder_.push_back(l.deep_copy());
    for (const auto& l : predictor_) h.predictor_.push_back(l.deep_copy());
    return h;
  }

  // Same concatenated layers, different bookkeeping split. Parameters are
  // shared, not copied: the split carries no semantics for prediction.
  Hypothesis with_division(int division_index) const {
    MlpSpec s = spec_.with_division(division_index);
    s.check();
    Hypothesis h;
    h.spec_ = s;
    h.scaler_ = scaler_;
    std::vector<DenseLayer> all;
    all.insert(all.end(), encoder_.begin(), encoder_.end());
    all.insert(all.end(), predictor_.begin(), predictor_.end());
    for (int li = 0; li < s.total_layers(); ++li) {
      if (li < s.division_index)
        h.encoder_.push_back(all[static_cast<std::size_t>(li)]);
      else
        h.predictor_.push_back(all[static_cast<std::size_t>(li)]);
    }
    return h;
  }

  Tensor features_tensor(const Dataset& data) const {
    if (data.d != spec_.input_dim)
      throw InputError(str_cat("input width ", data.d, " does not match ",
                               "input_dim ", spec_.input_dim));
    Tensor x = Tensor::from_data({data.n, data.d}, data.features);
    if (!scaler_.empty()) {
      auto& v = x.data();
      for (int i = 0; i < data.n; ++i)
        scaler_.apply_row(&v[static_cast<std::size_t>(i) * data.d], data.d);
    }
    return x;
  }

  // Latent Z = g(X); dropout applies inside the encoder during training only.
  Tensor encode(const Tensor& x, bool training = false,
                Rng* dropout_rng = nullptr) const {
    Tensor z = x;
    for (const auto& l : encoder_) {
      z = relu(l.apply(z));
      if (training && spec_.dropout_rate > 0.0 && dropout_rng)
        z = dropout(z, spec_.dropout_rate, *dropout_rng);
    }
    return z;
  }

  Tensor logits_from_latent(const Tensor& z) const {
    Tensor y = z;
    for (std::size_t i = 0; i + 1 < predictor_.size(); ++i)
      y = relu(predictor_[i].apply(y));
    y = predictor_.back().apply(y);
    return y;
  }

  Tensor logits(const Tensor& x, bool training = false,
                Rng* dropout_rng = nullptr) const {
    return logits_from_latent(encode(x, training, dropout_rng));
  }

  // Softmax rows for a batch, eval mode.
  std::vector<double> predict_proba(const Dataset& data) const {
    Tensor lg = logits(features_tensor(data));
    std::vector<double> probs;
    detail::softmax_rows(lg.data(), data.n, spec_.num_classes, probs);
    return probs;
  }

  // Argmax labels; ties break toward the smaller class index.
  std::vector<int> predict(const Dataset& data) const {
    Tensor lg = logits(features_tensor(data));
    std::vector<int> labels(static_cast<std::size_t>(data.n));
    int k = spec_.num_classes;
    for (int i = 0; i < data.n; ++i) {
      const double* row = &lg.data()[static_cast<std::size_t>(i) * k];
      int best = 0;
      for (int j = 1; j < k; ++j)
        if (row[j] > row[best]) best = j;
      labels[static_cast<std::size_t>(i)] = best;
    }
    return labels;
  }

  // Mean max-softmax confidence q_h over a sample, in [1/K, 1].
  double mean_confidence(const Dataset& data) const {
    std::vector<double> probs = predict_proba(data);
    int k = spec_.num_classes;
    double total = 0.0;
    for (int i = 0; i < data.n; ++i) {
      const double* row = &probs[static_cast<std::size_t>(i) * k];
      double mx = row[0];
      for (int j = 1; j < k; ++j) mx = std::max(mx, row[j]);
      total += mx;
    }
    return total / data.n;
  }

 private:
  MlpSpec spec_;
  std::vector<DenseLayer> encoder_;
  std::vector<DenseLayer> predictor_;
  FeatureScaler scaler_;
};

// Fraction of misclassified points under zero-one loss.
inline double zero_one_risk(const Hypothesis& h, const Dataset& data) {
  if (data.n < 1) throw InputError("zero_one_risk: empty dataset");
  if (!data.has_labels()) throw InputError("zero_one_risk: unlabeled dataset");
  std::vector<int> pred = h.predict(data);
  long long wrong = 0;
  for (int i = 0; i < data.n; ++i)
    if (pred[static_cast<std::size_t>(i)] != data.labels[static_cast<std::size_t>(i)])
      ++wrong;
  return static_cast<double>(wrong) / data.n;
}

// Fraction of points where the two hypotheses predict differently.
inline double disagreement(const Hypothesis& a, const Hypothesis& b,
                           const Dataset& data) {
  if (data.n < 1) throw InputError("disagreement: empty dataset");
  if (a.spec().num_classes != b.spec().num_classes)
    throw InputError(str_cat("disagreement: class counts differ (",
                             a.spec().num_classes, " vs ",
                             b.spec().num_classes, ")"));
  std::vector<int> pa = a.predict(data);
  std::vector<int> pb = b.predict(data);
  long long diff = 0;
  for (int i = 0; i < data.n; ++i)
    if (pa[static_cast<std::size_t>(i)] != pb[static_cast<std::size_t>(i)]) ++diff;
  return static_cast<double>(diff) / data.n;
}

// Domain discriminator: latent dim -> 2 logits. A training aid, never part
// of a hypothesis checkpoint.
class Discriminator {
 public:
  Discriminator() = default;

  static Discriminator init(int latent_dim, const std::vector<int>& widths,
                            Rng& rng) {
    Discriminator d;
    int in = latent_dim;
    for (int w : widths) {
      d.layers_.push_back(DenseLayer::init(in, w, rng));
      in = w;
    }
    d.layers_.push_back(DenseLayer::init(in, 2, rng));
    return d;
  }

  Tensor logits(const Tensor& z) const {
    Tensor y = z;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
      y = relu(layers_[i].apply(y));
    y = layers_.back().apply(y);
    return y;
  }

  std::vector<Tensor> parameters() {
    std::vector<Tensor> ps;
    for (auto& l : layers_) {
      ps.push_back(l.w);
      ps.push_back(l.b);
    }
    return ps;
  }

  bool empty() const { return layers_.empty(); }

 private:
  std::vector<DenseLayer> layers_;
};

// ---------------------------------------------------------------------------
// Checkpoint format: 8-byte magic "SHGAUGE1", u32 LE version (=1), u32 LE
// metadata length, UTF-8 metadata (key=value lines), then each layer's
// weights and biases as LE float64 in declaration order.

namespace detail {

constexpr char kCheckpointMagic[9] = "SHGAUGE1";
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_u32_le(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xFF),
                        static_cast<unsigned char>((v >> 8) & 0xFF),
                        static_cast<unsigned char>((v >> 16) & 0xFF),
                        static_cast<unsigned char>((v >> 24) & 0xFF)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32_le(std::istream& in, const std::string& path) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw FormatError(str_cat(path, ": truncated header"));
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

inline void write_f64_le(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline double read_f64_le(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw FormatError(str_cat(path, ": truncated weight data"));
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= std::uint64_t(b[i]) << (8 * i);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

inline std::string hex_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%la", v);
  return buf;
}

inline double parse_hex_double(const std::string& s, const std::string& path) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str()) throw FormatError(str_cat(path, ": bad float '", s, "'"));
  return v;
}

}  // namespace detail

inline void save_checkpoint(const Hypothesis& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(str_cat("cannot open for writing: ", path));
  const MlpSpec& spec = h.spec();
  std::ostringstream meta;
  meta << "input_dim=" << spec.input_dim << "\n";
  meta << "widths=";
  for (std::size_t i = 0; i < spec.widths.size(); ++i) {
    if (i) meta << ",";
    meta << spec.widths[i];
  }
  meta << "\n";
  meta << "num_classes=" << spec.num_classes << "\n";
  meta << "division_index=" << spec.division_index << "\n";
  meta << "dropout_rate=" << detail::hex_double(spec.dropout_rate) << "\n";
  if (!h.scaler().empty()) {
    meta << "scaler_mean=";
    for (std::size_t i = 0; i < h.scaler().mean.size(); ++i) {
      if (i) meta << ",";
      meta << detail::hex_double(h.scaler().mean[i]);
    }
    meta << "\n";
    meta << "scaler_inv_sd=";
    for (std::size_t i = 0; i < h.scaler().inv_sd.size(); ++i) {
      if (i) meta << ",";
      meta << detail::hex_double(h.scaler().inv_sd[i]);
    }
    meta << "\n";
  }
  std::string meta_str = meta.str();

  out.write(detail::kCheckpointMagic, 8);
  detail::write_u32_le(out, detail::kCheckpointVersion);
  detail::write_u32_le(out, static_cast<std::uint32_t>(meta_str.size()));
  out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  auto dump_layers = [&](const std::vector<DenseLayer>& layers) {
    for (const auto& l : layers) {
      for (double v : l.w.data()) detail::write_f64_le(out, v);
      for (double v : l.b.data()) detail::write_f64_le(out, v);
    }
  };
  dump_layers(h.encoder_layers());
  dump_layers(h.predictor_layers());
  if (!out) throw IoError(str_cat("write failed: ", path));
}

inline Hypothesis load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(str_cat("cannot open for reading: ", path));
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, detail::kCheckpointMagic, 8) != 0)
    throw FormatError(str_cat(path, ": bad checkpoint magic"));
  std::uint32_t version = detail::read_u32_le(in, path);
  if (version != detail::kCheckpointVersion)
    throw FormatError(str_cat(path, ": unsupported checkpoint version ",
                              version, " (expected ",
                              detail::kCheckpointVersion, ")"));
  std::uint32_t meta_len = detail::read_u32_le(in, path);
  std::string meta(meta_len, '\0');
  in.read(meta.data(), meta_len);
  if (!in) throw FormatError(str_cat(path, ": truncated metadata"));

  std::map<std::string, std::string> kv;
  std::istringstream meta_in(meta);
  std::string line;
  while (std::getline(meta_in, line)) {
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError(str_cat(path, ": bad metadata line '", line, "'"));
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto need = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end())
      throw FormatError(str_cat(path, ": metadata missing '", key, "'"));
    return it->second;
  };
  auto split_commas = [](const std::string& s) {
    std::vector<std::string> parts;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        parts.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) parts.push_back(cur);
    return parts;
  };

  MlpSpec spec;
  spec.input_dim = std::stoi(need("input_dim"));
  for (const auto& p : split_commas(need("widths")))
    spec.widths.push_back(std::stoi(p));
  spec.num_classes = std::stoi(need("num_classes"));
  spec.division_index = std::stoi(need("division_index"));
  spec.dropout_rate = detail::parse_hex_double(need("dropout_rate"), path);
  spec.check();

  Rng dummy(0);
  Hypothesis h = Hypothesis::init(spec, dummy);
  if (kv.count("scaler_mean")) {
    FeatureScaler sc;
    for (const auto& p : split_commas(kv["scaler_mean"]))
      sc.mean.push_back(detail::parse_hex_double(p, path));
    for (const auto& p : split_commas(need("scaler_inv_sd")))
      sc.inv_sd.push_back(detail::parse_hex_double(p, path));
    if (sc.mean.size() != static_cast<std::size_t>(spec.input_dim) ||
        sc.inv_sd.size() != static_cast<std::size_t>(spec.input_dim))
      throw FormatError(str_cat(path, ": scaler width mismatch"));
    h.set_scaler(std::move(sc));
  }
  auto fill_layers = [&](std::vector<DenseLayer>& layers) {
    for (auto& l : layers) {
      for (double& v : l.w.data()) v = detail::read_f64_le(in, path);
      for (double& v : l.b.data()) v = detail::read_f64_le(in, path);
    }
  };
  fill_layers(h.encoder_layers());
  fill_layers(h.predictor_layers());
  // Trailing bytes would mean the metadata lied about the architecture.
  if (in.peek() != EOF)
    throw FormatError(str_cat(path, ": trailing bytes after weights"));
  return h;
}

}  // namespace shiftgauge
