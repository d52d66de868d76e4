#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "scgnet/error.hpp"
#include "scgnet/ini.hpp"
#include "scgnet/io.hpp"
#include "scgnet/nn/layers.hpp"
#include "scgnet/optim.hpp"

namespace scgnet::model {

enum class Task { Binary, Multiclass };

inline const char* task_name(Task t) { return t == Task::Binary ? "binary" : "multiclass"; }

inline Task parse_task(const std::string& s) {
  if (s == "binary") return Task::Binary;
  if (s == "multiclass") return Task::Multiclass;
  throw Error(Errc::TypeError, "task must be binary or multiclass, got '" + s + "'");
}

inline nn::ActivationKind parse_hidden_activation(const std::string& s) {
  if (s == "relu") return nn::ActivationKind::Relu;
  if (s == "elu") return nn::ActivationKind::Elu;
  if (s == "relu6") return nn::ActivationKind::Relu6;
  throw Error(Errc::TypeError, "activation must be relu, elu or relu6, got '" + s + "'");
}

struct ConvBlock {
  std::size_t kernels = 32;
  std::size_t kernel_size = 2;
  double dropout = 0.2;
  bool operator==(const ConvBlock&) const = default;
};

struct GruBlock {
  std::size_t units = 100;
  double dropout = 0.2;
  bool operator==(const GruBlock&) const = default;
};

enum class Head { BinarySigmoid, Multiclass };

struct ScgnetConfig {
  std::vector<ConvBlock> conv_blocks;
  std::vector<GruBlock> gru_blocks;
  std::size_t dense_units = 64;
  Head head = Head::BinarySigmoid;
  /// Softmax width for the multiclass head.
  std::size_t n_classes = 5;
  nn::ActivationKind activation = nn::ActivationKind::Relu;
  double head_dropout = 0.5;
  std::size_t input_length = 122;
  bool bn_before_activation = true;
  /// When false the last GRU block emits only its final state.
  bool gru_return_sequences = true;
  std::uint64_t seed = 0;

  std::size_t head_width() const { return head == Head::BinarySigmoid ? 1 : n_classes; }
  Task task() const { return head == Head::BinarySigmoid ? Task::Binary : Task::Multiclass; }

  void validate() const {
    auto rate_ok = [](double r) { return r >= 0.0 && r < 1.0; };
    ini::require(!conv_blocks.empty(), "model.conv_kernels", "at least one conv block");
    ini::require(!gru_blocks.empty(), "model.gru_units", "at least one GRU block");
    for (const auto& c : conv_blocks) {
      ini::require(c.kernels > 0 && c.kernel_size > 0, "model.conv_kernels", "counts must be positive");
      ini::require(rate_ok(c.dropout), "model.conv_dropout", "dropout must be in [0, 1)");
    }
    for (const auto& g : gru_blocks) {
      ini::require(g.units > 0, "model.gru_units", "counts must be positive");
      ini::require(rate_ok(g.dropout), "model.gru_dropout", "dropout must be in [0, 1)");
    }
    ini::require(dense_units > 0, "model.dense_units", "must be positive");
    ini::require(input_length > 0, "model.input_length", "must be positive");
    ini::require(rate_ok(head_dropout), "model.head_dropout", "dropout must be in [0, 1)");
    ini::require(head == Head::BinarySigmoid || n_classes >= 2, "model.n_classes", "multiclass head needs >= 2");
    ini::require(activation == nn::ActivationKind::Relu || activation == nn::ActivationKind::Elu ||
                     activation == nn::ActivationKind::Relu6,
                 "model.activation", "must be relu, elu or relu6");
  }

  bool operator==(const ScgnetConfig&) const = default;
};

/// Two conv blocks {32,2,0.2} {64,2,0.2}, two GRU blocks {100,0.2}, dense 64,
/// head dropout 0.5, relu; the head is the only task-dependent field.
inline ScgnetConfig paper_default_config(Task task, std::size_t input_length = 122) {
  ScgnetConfig c;
  c.conv_blocks = {{32, 2, 0.2}, {64, 2, 0.2}};
  c.gru_blocks = {{100, 0.2}, {100, 0.2}};
  c.dense_units = 64;
  c.head_dropout = 0.5;
  c.activation = nn::ActivationKind::Relu;
  c.input_length = input_length;
  c.head = task == Task::Binary ? Head::BinarySigmoid : Head::Multiclass;
  c.n_classes = 5;
  return c;
}

inline const std::set<std::string>& model_keys() {
  static const std::set<std::string> keys{
      "conv_kernels", "conv_kernel_sizes", "conv_dropout", "gru_units",     "gru_dropout",
      "dense_units",  "head",              "n_classes",    "activation",    "head_dropout",
      "input_length", "bn_before_activation", "gru_return_sequences", "seed"};
  return keys;
}

/// The [model] section as a config document, keys in a fixed order.
inline std::string to_ini(const ScgnetConfig& c) {
  std::vector<std::size_t> kernels, sizes, units;
  std::vector<double> conv_drop, gru_drop;
  for (const auto& b : c.conv_blocks) {
    kernels.push_back(b.kernels);
    sizes.push_back(b.kernel_size);
    conv_drop.push_back(b.dropout);
  }
  for (const auto& b : c.gru_blocks) {
    units.push_back(b.units);
    gru_drop.push_back(b.dropout);
  }
  std::string s = "[model]\n";
  auto line = [&](const char* k, const std::string& v) { s += std::string(k) + " = " + v + "\n"; };
  line("conv_kernels", ini::format_list(kernels));
  line("conv_kernel_sizes", ini::format_list(sizes));
  line("conv_dropout", ini::format_list(conv_drop));
  line("gru_units", ini::format_list(units));
  line("gru_dropout", ini::format_list(gru_drop));
  line("dense_units", ini::format_value(c.dense_units));
  line("head", c.head == Head::BinarySigmoid ? "binary" : "multiclass");
  line("n_classes", ini::format_value(c.n_classes));
  line("activation", nn::activation_name(c.activation));
  line("head_dropout", ini::format_value(c.head_dropout));
  line("input_length", ini::format_value(c.input_length));
  line("bn_before_activation", ini::format_value(c.bn_before_activation));
  line("gru_return_sequences", ini::format_value(c.gru_return_sequences));
  line("seed", ini::format_value(c.seed));
  return s;
}

/// Reads [model] keys over `base`. A per-block list with a single value
/// applies to every block; a list left out follows the block count, taking
/// the first value of `base`. Given lists must otherwise agree in length.
inline ScgnetConfig model_from_tree(const ini::Tree& tree, ScgnetConfig base) {
  std::vector<std::size_t> kernels, sizes, units;
  std::vector<double> conv_drop, gru_drop;
  for (const auto& b : base.conv_blocks) {
    kernels.push_back(b.kernels);
    sizes.push_back(b.kernel_size);
    conv_drop.push_back(b.dropout);
  }
  for (const auto& b : base.gru_blocks) {
    units.push_back(b.units);
    gru_drop.push_back(b.dropout);
  }
  kernels = ini::get_list(tree, "model.conv_kernels", kernels);
  sizes = ini::get_list(tree, "model.conv_kernel_sizes", sizes);
  conv_drop = ini::get_list(tree, "model.conv_dropout", conv_drop);
  units = ini::get_list(tree, "model.gru_units", units);
  gru_drop = ini::get_list(tree, "model.gru_dropout", gru_drop);

  auto broadcast = [&](auto& v, std::size_t n, const char* key) {
    if ((v.size() == 1 || !tree.get_optional<std::string>(key)) && !v.empty()) v.resize(n, v.front());
    ini::require(v.size() == n, key, "expected " + std::to_string(n) + " values");
  };
  broadcast(sizes, kernels.size(), "model.conv_kernel_sizes");
  broadcast(conv_drop, kernels.size(), "model.conv_dropout");
  broadcast(gru_drop, units.size(), "model.gru_dropout");

  ScgnetConfig c = base;
  c.conv_blocks.clear();
  for (std::size_t i = 0; i < kernels.size(); ++i) c.conv_blocks.push_back({kernels[i], sizes[i], conv_drop[i]});
  c.gru_blocks.clear();
  for (std::size_t i = 0; i < units.size(); ++i) c.gru_blocks.push_back({units[i], gru_drop[i]});
  c.dense_units = ini::get(tree, "model.dense_units", c.dense_units);
  if (auto h = tree.get_optional<std::string>("model.head")) {
    c.head = parse_task(ini::trim(*h)) == Task::Binary ? Head::BinarySigmoid : Head::Multiclass;
  }
  c.n_classes = ini::get(tree, "model.n_classes", c.n_classes);
  if (auto a = tree.get_optional<std::string>("model.activation")) c.activation = parse_hidden_activation(ini::trim(*a));
  c.head_dropout = ini::get(tree, "model.head_dropout", c.head_dropout);
  c.input_length = ini::get(tree, "model.input_length", c.input_length);
  c.bn_before_activation = ini::get(tree, "model.bn_before_activation", c.bn_before_activation);
  c.gru_return_sequences = ini::get(tree, "model.gru_return_sequences", c.gru_return_sequences);
  c.seed = ini::get(tree, "model.seed", c.seed);
  c.validate();
  return c;
}

inline ScgnetConfig model_from_ini(const std::string& text) {
  const auto tree = ini::parse(text, "model config");
  ini::check_keys(tree, {{"model", model_keys()}});
  return model_from_tree(tree, paper_default_config(Task::Binary));
}

// ---------------------------------------------------------------------------

/// [B, L] -> [B, 1, L]: a feature vector enters the first conv as one channel.
template <class T>
class AddChannel final : public nn::Layer<T> {
 public:
  std::string kind() const override { return "reshape"; }
  nn::Shape output_shape(const nn::Shape& in) const override {
    nn::expect_rank(in, 2, "reshape");
    return {in[0], 1, in[1]};
  }
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode) override { return x.reshaped(output_shape(x.shape)); }
  nn::Tensor<T> backward(const nn::Tensor<T>& dy) override { return dy.reshaped({dy.shape[0], dy.shape[2]}); }
};

/// Ordered layer stack, itself usable as a layer.
template <class T>
class Sequential final : public nn::Layer<T> {
 public:
  std::string kind() const override { return "sequential"; }

  void add(std::unique_ptr<nn::Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  std::size_t size() const { return layers_.size(); }
  nn::Layer<T>& at(std::size_t i) { return *layers_.at(i); }
  const nn::Layer<T>& at(std::size_t i) const { return *layers_.at(i); }

  nn::Shape output_shape(const nn::Shape& in) const override {
    nn::Shape s = in;
    for (const auto& l : layers_) s = l->output_shape(s);
    return s;
  }

  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode) override {
    nn::Tensor<T> y = x;
    for (auto& l : layers_) y = l->forward(y, mode);
    return y;
  }

  nn::Tensor<T> backward(const nn::Tensor<T>& dy) override { return backward_from(dy, layers_.size()); }

  /// Backward starting below layer `end` (exclusive), i.e. `dy` is the
  /// gradient with respect to the output of layer end-1.
  nn::Tensor<T> backward_from(const nn::Tensor<T>& dy, std::size_t end) {
    nn::Tensor<T> g = dy;
    for (std::size_t i = end; i-- > 0;) g = layers_[i]->backward(g);
    return g;
  }

  std::vector<nn::Param<T>*> params() override {
    std::vector<nn::Param<T>*> out;
    for (auto& l : layers_)
      for (auto* p : l->params()) out.push_back(p);
    return out;
  }

  std::vector<nn::Buffer<T>> buffers() override {
    std::vector<nn::Buffer<T>> out;
    for (auto& l : layers_)
      for (auto b : l->buffers()) out.push_back(b);
    return out;
  }

  void init(Rng& rng) override {
    for (auto& l : layers_) l->init(rng);
  }

  void set_step(std::uint64_t step) override {
    for (auto& l : layers_) l->set_step(step);
  }

 private:
  std::vector<std::unique_ptr<nn::Layer<T>>> layers_;
};

struct LedgerEntry {
  std::string kind;
  nn::Shape shape;
};

/// The SCGNet stack built from a config:
///   reshape -> [conv -> BN -> act -> pool -> dropout] x n -> transpose
///   -> [GRU -> BN -> dropout] x m -> flatten -> dense -> act -> dropout
///   -> head dense -> sigmoid | softmax
/// A conv that feeds batch norm directly carries no bias.
/// Parameters are initialised from a stream seeded by config.seed; each
/// dropout layer gets its own seed derived from it.
template <class T>
class Model {
 public:
  explicit Model(ScgnetConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    build();
    Rng rng(derive_seed(cfg_.seed, 0));
    net_.init(rng);
  }

  const ScgnetConfig& config() const { return cfg_; }
  Sequential<T>& net() { return net_; }
  const std::vector<LedgerEntry>& shape_ledger() const { return ledger_; }

  /// Sequence lengths along the conv/pool chain, starting with the input.
  std::vector<std::size_t> conv_lengths() const {
    std::vector<std::size_t> out{cfg_.input_length};
    for (const auto& e : ledger_) {
      if (e.kind == "conv1d" || e.kind == "maxpool1d") out.push_back(e.shape[2]);
    }
    return out;
  }

  std::size_t flatten_width() const {
    for (const auto& e : ledger_)
      if (e.kind == "flatten") return e.shape[1];
    return 0;
  }

  /// x [B, input_length] -> probabilities [B, head width].
  nn::Tensor<T> forward(const nn::Tensor<T>& x, nn::Mode mode) {
    nn::expect_rank(x.shape, 2, "model input");
    if (x.shape[1] != cfg_.input_length) {
      throw Error(Errc::ShapeMismatch, "model expects width " + std::to_string(cfg_.input_length) + ", got " +
                                           std::to_string(x.shape[1]));
    }
    if (x.shape[0] == 0) return nn::Tensor<T>({0, cfg_.head_width()});
    return net_.forward(x, mode);
  }

  /// Backward from the gradient with respect to the head's pre-activation
  /// logits (skips the final sigmoid/softmax).
  nn::Tensor<T> backward_logits(const nn::Tensor<T>& dlogits) { return net_.backward_from(dlogits, net_.size() - 1); }

  std::vector<nn::Param<T>*> params() { return net_.params(); }
  std::vector<nn::Buffer<T>> buffers() { return net_.buffers(); }
  void zero_grad() { net_.zero_grad(); }
  void set_step(std::uint64_t step) { net_.set_step(step); }

  std::size_t parameter_count() {
    std::size_t n = 0;
    for (auto* p : params()) n += p->value.size();
    return n;
  }

  /// Copies of every parameter and buffer, in build order.
  std::vector<std::vector<T>> snapshot() {
    std::vector<std::vector<T>> out;
    for (auto* p : params()) out.push_back(p->value.values);
    for (auto& b : buffers()) out.push_back(b.tensor->values);
    return out;
  }

  void restore(const std::vector<std::vector<T>>& snap) {
    auto ps = params();
    auto bs = buffers();
    if (snap.size() != ps.size() + bs.size()) throw Error(Errc::ShapeMismatch, "snapshot does not fit model");
    for (std::size_t i = 0; i < ps.size(); ++i) ps[i]->value.values = snap[i];
    for (std::size_t i = 0; i < bs.size(); ++i) bs[i].tensor->values = snap[ps.size() + i];
  }

 private:
  void push(std::unique_ptr<nn::Layer<T>> layer) {
    shape_ = layer->output_shape(shape_);
    ledger_.push_back({layer->kind(), shape_});
    net_.add(std::move(layer));
  }

  void push_dropout(double rate) { push(std::make_unique<nn::Dropout<T>>(rate, derive_seed(cfg_.seed, 0x100 + dropouts_++))); }

  void build() {
    using namespace nn;
    shape_ = {1, cfg_.input_length};
    push(std::make_unique<AddChannel<T>>());
    std::size_t channels = 1;
    for (const auto& b : cfg_.conv_blocks) {
      push(std::make_unique<Conv1d<T>>(channels, b.kernels, b.kernel_size, !cfg_.bn_before_activation));
      if (cfg_.bn_before_activation) {
        push(std::make_unique<BatchNorm<T>>(b.kernels, ChannelAxis::Middle));
        push(std::make_unique<Activation<T>>(cfg_.activation));
      } else {
        push(std::make_unique<Activation<T>>(cfg_.activation));
        push(std::make_unique<BatchNorm<T>>(b.kernels, ChannelAxis::Middle));
      }
      push(std::make_unique<MaxPool1d<T>>());
      push_dropout(b.dropout);
      channels = b.kernels;
    }
    push(std::make_unique<ChannelsToSteps<T>>());
    std::size_t features = channels;
    for (std::size_t i = 0; i < cfg_.gru_blocks.size(); ++i) {
      const auto& g = cfg_.gru_blocks[i];
      const bool last = i + 1 == cfg_.gru_blocks.size();
      push(std::make_unique<Gru<T>>(features, g.units, !last || cfg_.gru_return_sequences));
      push(std::make_unique<BatchNorm<T>>(g.units, ChannelAxis::Last));
      push_dropout(g.dropout);
      features = g.units;
    }
    push(std::make_unique<Flatten<T>>());
    push(std::make_unique<Dense<T>>(shape_[1], cfg_.dense_units));
    push(std::make_unique<Activation<T>>(cfg_.activation));
    push_dropout(cfg_.head_dropout);
    push(std::make_unique<Dense<T>>(cfg_.dense_units, cfg_.head_width()));
    push(std::make_unique<Activation<T>>(cfg_.head == Head::BinarySigmoid ? ActivationKind::Sigmoid
                                                                          : ActivationKind::Softmax));
  }

  ScgnetConfig cfg_;
  Sequential<T> net_;
  std::vector<LedgerEntry> ledger_;
  nn::Shape shape_;
  std::uint64_t dropouts_ = 0;
};

/// Binary: Attack (1) iff p >= threshold. Multiclass: argmax, lowest index
/// on ties.
template <class T>
std::vector<int> predict(const nn::Tensor<T>& probs, double threshold = 0.5) {
  nn::expect_rank(probs.shape, 2, "predict");
  const std::size_t n = probs.shape[0], w = probs.shape[1];
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T* row = probs.data() + i * w;
    if (w == 1) {
      out[i] = row[0] >= threshold ? 1 : 0;
    } else {
      out[i] = static_cast<int>(std::max_element(row, row + w) - row);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Weight file

inline constexpr std::string_view kWeightMagic = "SCGN";
inline constexpr std::uint32_t kWeightVersion = 1;

/// Optimiser state carried in checkpoints used to resume training.
struct TrainingState {
  optim::AdamState<float> adam;
  std::uint64_t epochs_done = 0;
  bool operator==(const TrainingState&) const = default;
};

struct LoadedModel {
  std::unique_ptr<Model<float>> model;
  std::optional<TrainingState> state;
};

namespace detail {

inline void put_tensor(io::Writer& w, const std::string& name, const nn::Tensor<float>& t) {
  w.put_string(name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(t.shape.size()));
  for (auto d : t.shape) w.put<std::uint64_t>(d);
  w.put_array(std::span<const float>(t.values));
}

inline void get_tensor(io::Reader& r, const std::string& expect_name, nn::Tensor<float>& t) {
  const auto name = r.get_string();
  const auto rank = r.get<std::uint32_t>();
  nn::Shape shape(rank);
  for (auto& d : shape) d = r.get<std::uint64_t>();
  if (name != expect_name || shape != t.shape) {
    throw Error(Errc::ShapeMismatch, "weight file tensor " + name + nn::shape_str(shape) + " does not match " +
                                         expect_name + nn::shape_str(t.shape));
  }
  t.values = r.get_array<float>(t.size());
}

}  // namespace detail

/// Body: config document, layer count, then per layer its kind and tensors
/// (parameters, then buffers), then a flag byte and, if set, the training
/// state (Adam t, epochs done, m and v per parameter).
inline std::vector<std::uint8_t> encode_weights(Model<float>& m, const TrainingState* state = nullptr) {
  io::Writer w;
  w.put_string(to_ini(m.config()));
  auto& net = m.net();
  w.put<std::uint32_t>(static_cast<std::uint32_t>(net.size()));
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& layer = net.at(i);
    auto ps = layer.params();
    auto bs = layer.buffers();
    w.put_string(layer.kind());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(ps.size() + bs.size()));
    for (auto* p : ps) detail::put_tensor(w, p->name, p->value);
    for (auto& b : bs) detail::put_tensor(w, b.name, *b.tensor);
  }
  w.put<std::uint8_t>(state ? 1 : 0);
  if (state) {
    const auto ps = m.params();
    const bool fresh = state->adam.m.empty();
    if (!fresh && state->adam.m.size() != ps.size()) throw Error(Errc::ShapeMismatch, "adam state does not fit model");
    w.put<std::uint64_t>(state->adam.t);
    w.put<std::uint64_t>(state->epochs_done);
    w.put<std::uint8_t>(fresh ? 0 : 1);
    if (!fresh) {
      for (std::size_t i = 0; i < ps.size(); ++i) {
        detail::put_tensor(w, ps[i]->name + ".m", state->adam.m[i]);
        detail::put_tensor(w, ps[i]->name + ".v", state->adam.v[i]);
      }
    }
  }
  return io::frame(kWeightMagic, kWeightVersion, w.bytes());
}

inline LoadedModel decode_weights(std::span<const std::uint8_t> file) {
  const auto body = io::unframe(file, kWeightMagic, kWeightVersion);
  io::Reader r(body);
  LoadedModel out;
  out.model = std::make_unique<Model<float>>(model_from_ini(r.get_string()));
  auto& net = out.model->net();
  const auto n_layers = r.get<std::uint32_t>();
  if (n_layers != net.size()) throw Error(Errc::ShapeMismatch, "weight file layer count does not match config");
  for (std::size_t i = 0; i < net.size(); ++i) {
    auto& layer = net.at(i);
    const auto kind = r.get_string();
    if (kind != layer.kind()) throw Error(Errc::ShapeMismatch, "weight file layer " + kind + " vs " + layer.kind());
    auto ps = layer.params();
    auto bs = layer.buffers();
    if (r.get<std::uint32_t>() != ps.size() + bs.size()) throw Error(Errc::ShapeMismatch, "tensor count of " + kind);
    for (auto* p : ps) detail::get_tensor(r, p->name, p->value);
    for (auto& b : bs) detail::get_tensor(r, b.name, *b.tensor);
  }
  if (r.get<std::uint8_t>() != 0) {
    TrainingState st;
    st.adam.t = r.get<std::uint64_t>();
    st.epochs_done = r.get<std::uint64_t>();
    if (r.get<std::uint8_t>() != 0) {
      st.adam = optim::AdamState<float>{st.adam.t, {}, {}};
      for (auto* p : out.model->params()) {
        st.adam.m.emplace_back(p->value.shape);
        st.adam.v.emplace_back(p->value.shape);
        detail::get_tensor(r, p->name + ".m", st.adam.m.back());
        detail::get_tensor(r, p->name + ".v", st.adam.v.back());
      }
    }
    out.state = std::move(st);
  }
  if (r.remaining() != 0) throw Error(Errc::TruncatedFile, "trailing bytes after weight payload");
  return out;
}

inline void save_weights(const std::filesystem::path& path, Model<float>& m, const TrainingState* state = nullptr) {
  io::write_file(path, encode_weights(m, state));
}

inline LoadedModel load_weights(const std::filesystem::path& path) { return decode_weights(io::read_file(path)); }

}  // namespace scgnet::model
