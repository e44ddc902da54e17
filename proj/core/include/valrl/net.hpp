#pragma once

// Minimal differentiable core: dense layers, ReLU, elementwise products and
// row broadcasting, recorded on a tape and differentiated in reverse mode.
// Everything is double precision and deterministic for a fixed seed.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "valrl/archive.hpp"
#include "valrl/rng.hpp"

namespace valrl::net {

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0) { return Tensor({rows, cols}, fill); }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  // Leading extent, and the product of the remaining ones.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const { return rows() ? size() / rows() : 0; }

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::span<const double> row(std::size_t r) const { return {values_.data() + r * cols(), cols()}; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> values_;
};

// Named parameters in insertion order. Shapes are fixed once added.
class ParameterSet {
 public:
  void add(std::string name, Tensor value);
  bool has(std::string_view name) const;
  Tensor& get(std::string_view name);
  const Tensor& get(std::string_view name) const;

  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;
  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  ParameterSet zeros_like() const;

  // Stored as records "<prefix><name>" in an archive.
  void write(archive::Writer& w, const std::string& prefix) const;
  // Fills this set's existing parameters (shapes must match).
  void read(const archive::Reader& r, const std::string& prefix);

  friend bool operator==(const ParameterSet&, const ParameterSet&) = default;

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
};

// Adds "<name>.w" [outputs x inputs] and "<name>.b" [outputs], drawn from
// U(-1/sqrt(inputs), 1/sqrt(inputs)).
void init_dense(ParameterSet& params, const std::string& name, std::size_t inputs, std::size_t outputs, Rng& rng);

// Records a forward pass; backward() replays it in reverse.
class Tape {
 public:
  using Node = std::size_t;

  explicit Tape(const ParameterSet& params) : params_(&params) {}

  Node input(Tensor value);
  // x [B x in] -> x W^T + b, W/b from "<layer>.w" / "<layer>.b".
  Node dense(Node x, const std::string& layer);
  Node relu(Node x);
  Node mul(Node a, Node b);
  // [B x H] -> [B*times x H], each row repeated `times` times consecutively.
  Node repeat_rows(Node x, std::size_t times);

  const Tensor& value(Node node) const;
  std::size_t num_nodes() const { return nodes_.size(); }

  // Gradients of sum(output_grad ⊙ value(output)) with respect to every
  // parameter in the set (zeros where unused).
  ParameterSet backward(Node output, const Tensor& output_grad) const;

 private:
  enum class Op { kInput, kDense, kRelu, kMul, kRepeatRows };
  struct Record {
    Op op = Op::kInput;
    Node a = 0, b = 0;
    std::string layer;
    std::size_t times = 0;
    bool needs_grad = false;
    Tensor value;
  };
  static Record make_record(Op op, Node a = 0, Node b = 0);
  Node push(Record r);

  const ParameterSet* params_;
  std::vector<Record> nodes_;
};

// Fully connected trunk of ReLU layers followed by a linear head. Layers are
// named "<prefix>hidden<i>" and "<prefix>head".
struct MlpSpec {
  std::size_t inputs = 0;
  std::vector<std::size_t> hidden;
  std::size_t outputs = 0;
};

ParameterSet init_mlp(const MlpSpec& spec, Rng& rng, const std::string& prefix = "");
Tape::Node mlp_forward(Tape& tape, Tape::Node x, const MlpSpec& spec, const std::string& prefix = "");
// One-shot forward without keeping the tape.
Tensor forward(const ParameterSet& params, const MlpSpec& spec, const Tensor& input);

// ½u² for |u| <= κ, κ(|u| - ½κ) beyond.
double huber_loss(double u, double kappa);
double huber_loss_grad(double u, double kappa);

// Numerically stable softmax (max-subtracted).
void softmax(std::span<const double> logits, std::span<double> out);

// -Σ target · log softmax(logits). When `logits_grad` is non-empty it
// receives softmax(logits) - target. Throws ContractViolation if target is
// not a probability vector (sum off by more than 1e-9).
double softmax_cross_entropy(std::span<const double> logits, std::span<const double> target,
                             std::span<double> logits_grad = {});

class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual std::string name() const = 0;
  // Throws TrainingError naming the parameter if any gradient is not finite;
  // parameters are untouched in that case.
  virtual void apply(ParameterSet& params, const ParameterSet& grads) = 0;
  virtual std::uint64_t steps() const = 0;
  virtual void write(archive::Writer& w, const std::string& prefix) const = 0;
  virtual void read(const archive::Reader& r, const std::string& prefix) = 0;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam final : public Optimizer {
 public:
  Adam(const ParameterSet& shape_like, AdamConfig config);

  std::string name() const override { return "adam"; }
  void apply(ParameterSet& params, const ParameterSet& grads) override;
  std::uint64_t steps() const override { return t_; }
  void write(archive::Writer& w, const std::string& prefix) const override;
  void read(const archive::Reader& r, const std::string& prefix) override;

  const AdamConfig& config() const { return config_; }
  const ParameterSet& first_moments() const { return m_; }
  const ParameterSet& second_moments() const { return v_; }

 private:
  AdamConfig config_;
  ParameterSet m_, v_;
  std::uint64_t t_ = 0;
};

struct RmsPropConfig {
  double learning_rate = 0.00025;
  double decay = 0.95;
  double momentum = 0.0;
  double epsilon = 1e-5;
  bool centered = true;
};

class RmsProp final : public Optimizer {
 public:
  RmsProp(const ParameterSet& shape_like, RmsPropConfig config);

  std::string name() const override { return "rmsprop"; }
  void apply(ParameterSet& params, const ParameterSet& grads) override;
  std::uint64_t steps() const override { return t_; }
  void write(archive::Writer& w, const std::string& prefix) const override;
  void read(const archive::Reader& r, const std::string& prefix) override;

 private:
  RmsPropConfig config_;
  ParameterSet mean_square_, mean_grad_, velocity_;
  std::uint64_t t_ = 0;
};

// Throws TrainingError naming the first parameter holding a NaN or infinity.
void check_finite(const ParameterSet& grads);

}  // namespace valrl::net
