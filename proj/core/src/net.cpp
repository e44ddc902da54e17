#include "valrl/net.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "valrl/errors.hpp"

namespace valrl::net {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using ConstRowVectorMap = Eigen::Map<const Eigen::RowVectorXd>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}
MatrixMap as_matrix(Tensor& t) {
  return MatrixMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s + "]";
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)), values_(product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), values_(std::move(values)) {
  if (values_.size() != product(shape_)) {
    throw ContractViolation("Tensor: " + std::to_string(values_.size()) + " values do not fill shape " +
                            shape_string(shape_));
  }
}

// --- ParameterSet -----------------------------------------------------------

void ParameterSet::add(std::string name, Tensor value) {
  if (has(name)) throw ContractViolation("ParameterSet: duplicate parameter '" + name + "'");
  params_.emplace_back(std::move(name), std::move(value));
}

bool ParameterSet::has(std::string_view name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const auto& p) { return p.first == name; });
}

Tensor& ParameterSet::get(std::string_view name) {
  for (auto& p : params_) {
    if (p.first == name) return p.second;
  }
  throw ContractViolation("ParameterSet: no parameter '" + std::string(name) + "'");
}

const Tensor& ParameterSet::get(std::string_view name) const {
  for (const auto& p : params_) {
    if (p.first == name) return p.second;
  }
  throw ContractViolation("ParameterSet: no parameter '" + std::string(name) + "'");
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.second.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (const auto& [name, t] : params_) out.add(name, Tensor(t.shape()));
  return out;
}

void ParameterSet::write(archive::Writer& w, const std::string& prefix) const {
  for (const auto& [name, t] : params_) {
    std::vector<std::uint64_t> shape(t.shape().begin(), t.shape().end());
    w.add_f64(prefix + name, t.values(), shape);
  }
}

void ParameterSet::read(const archive::Reader& r, const std::string& prefix) {
  for (auto& [name, t] : params_) {
    auto values = r.f64(prefix + name);
    if (values.size() != t.size()) throw RestoreError("parameter '" + prefix + name + "' has the wrong size");
    std::copy(values.begin(), values.end(), t.data());
  }
}

void init_dense(ParameterSet& params, const std::string& name, std::size_t inputs, std::size_t outputs, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(inputs));
  Tensor w = Tensor::matrix(outputs, inputs);
  for (auto& v : w.values()) v = rng.uniform(-bound, bound);
  Tensor b({outputs});
  for (auto& v : b.values()) v = rng.uniform(-bound, bound);
  params.add(name + ".w", std::move(w));
  params.add(name + ".b", std::move(b));
}

// --- Tape -------------------------------------------------------------------

Tape::Record Tape::make_record(Op op, Node a, Node b) {
  Record r;
  r.op = op;
  r.a = a;
  r.b = b;
  return r;
}

Tape::Node Tape::push(Record r) {
  nodes_.push_back(std::move(r));
  return nodes_.size() - 1;
}

const Tensor& Tape::value(Node node) const {
  if (node >= nodes_.size()) throw ContractViolation("Tape: unknown node");
  return nodes_[node].value;
}

Tape::Node Tape::input(Tensor value) {
  if (value.rank() != 2) throw ContractViolation("Tape::input: expected a [rows x cols] tensor");
  Record r = make_record(Op::kInput);
  r.value = std::move(value);
  return push(std::move(r));
}

Tape::Node Tape::dense(Node x, const std::string& layer) {
  const Tensor& in = value(x);
  const Tensor& w = params_->get(layer + ".w");
  const Tensor& b = params_->get(layer + ".b");
  if (in.cols() != w.cols()) {
    throw ContractViolation("layer '" + layer + "' expects " + std::to_string(w.cols()) + " inputs, got " +
                            std::to_string(in.cols()));
  }
  Record r = make_record(Op::kDense, x);
  r.layer = layer;
  r.needs_grad = true;
  r.value = Tensor::matrix(in.rows(), w.rows());
  auto y = as_matrix(r.value);
  y.noalias() = as_matrix(in) * as_matrix(w).transpose();
  y.rowwise() += ConstRowVectorMap(b.data(), static_cast<Eigen::Index>(b.size()));
  return push(std::move(r));
}

Tape::Node Tape::relu(Node x) {
  Record r = make_record(Op::kRelu, x);
  r.needs_grad = nodes_.at(x).needs_grad;
  r.value = value(x);
  for (auto& v : r.value.values()) v = v > 0.0 ? v : 0.0;
  return push(std::move(r));
}

Tape::Node Tape::mul(Node a, Node b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  if (va.shape() != vb.shape()) {
    throw ContractViolation("Tape::mul: shape " + shape_string(va.shape()) + " vs " + shape_string(vb.shape()));
  }
  Record r = make_record(Op::kMul, a, b);
  r.needs_grad = nodes_[a].needs_grad || nodes_[b].needs_grad;
  r.value = va;
  for (std::size_t i = 0; i < r.value.size(); ++i) r.value[i] *= vb[i];
  return push(std::move(r));
}

Tape::Node Tape::repeat_rows(Node x, std::size_t times) {
  const Tensor& in = value(x);
  Record r = make_record(Op::kRepeatRows, x);
  r.times = times;
  r.needs_grad = nodes_[x].needs_grad;
  r.value = Tensor::matrix(in.rows() * times, in.cols());
  for (std::size_t row = 0; row < in.rows(); ++row) {
    for (std::size_t t = 0; t < times; ++t) {
      std::copy_n(in.data() + row * in.cols(), in.cols(), r.value.data() + (row * times + t) * in.cols());
    }
  }
  return push(std::move(r));
}

ParameterSet Tape::backward(Node output, const Tensor& output_grad) const {
  if (nodes_.empty() || output >= nodes_.size()) {
    throw ContractViolation("Tape::backward: no forward pass recorded for this output");
  }
  if (output_grad.shape() != nodes_[output].value.shape()) {
    throw ContractViolation("Tape::backward: gradient shape " + shape_string(output_grad.shape()) +
                            " does not match output " + shape_string(nodes_[output].value.shape()));
  }
  ParameterSet grads = params_->zeros_like();
  std::vector<Tensor> node_grads(output + 1);
  node_grads[output] = output_grad;

  auto accumulate = [&](Node target, Tensor g) {
    if (!nodes_[target].needs_grad) return;
    if (node_grads[target].size() == 0) {
      node_grads[target] = std::move(g);
    } else {
      for (std::size_t i = 0; i < g.size(); ++i) node_grads[target][i] += g[i];
    }
  };

  for (Node n = output + 1; n-- > 0;) {
    const Record& rec = nodes_[n];
    if (!rec.needs_grad || node_grads[n].size() == 0) continue;
    const Tensor& g = node_grads[n];
    switch (rec.op) {
      case Op::kInput: break;
      case Op::kDense: {
        const Tensor& x = nodes_[rec.a].value;
        const Tensor& w = params_->get(rec.layer + ".w");
        auto gy = as_matrix(g);
        as_matrix(grads.get(rec.layer + ".w")).noalias() += gy.transpose() * as_matrix(x);
        Tensor& gb = grads.get(rec.layer + ".b");
        Eigen::Map<Eigen::RowVectorXd>(gb.data(), static_cast<Eigen::Index>(gb.size())) += gy.colwise().sum();
        if (nodes_[rec.a].needs_grad) {
          Tensor gx = Tensor::matrix(x.rows(), x.cols());
          as_matrix(gx).noalias() = gy * as_matrix(w);
          accumulate(rec.a, std::move(gx));
        }
        break;
      }
      case Op::kRelu: {
        Tensor gx = g;
        const Tensor& y = rec.value;
        for (std::size_t i = 0; i < gx.size(); ++i) {
          if (!(y[i] > 0.0)) gx[i] = 0.0;
        }
        accumulate(rec.a, std::move(gx));
        break;
      }
      case Op::kMul: {
        const Tensor& va = nodes_[rec.a].value;
        const Tensor& vb = nodes_[rec.b].value;
        if (nodes_[rec.a].needs_grad) {
          Tensor ga = g;
          for (std::size_t i = 0; i < ga.size(); ++i) ga[i] *= vb[i];
          accumulate(rec.a, std::move(ga));
        }
        if (nodes_[rec.b].needs_grad) {
          Tensor gb = g;
          for (std::size_t i = 0; i < gb.size(); ++i) gb[i] *= va[i];
          accumulate(rec.b, std::move(gb));
        }
        break;
      }
      case Op::kRepeatRows: {
        const Tensor& x = nodes_[rec.a].value;
        Tensor gx = Tensor::matrix(x.rows(), x.cols());
        for (std::size_t row = 0; row < x.rows(); ++row) {
          for (std::size_t t = 0; t < rec.times; ++t) {
            const double* src = g.data() + (row * rec.times + t) * x.cols();
            double* dst = gx.data() + row * x.cols();
            for (std::size_t c = 0; c < x.cols(); ++c) dst[c] += src[c];
          }
        }
        accumulate(rec.a, std::move(gx));
        break;
      }
    }
  }
  return grads;
}

// --- MLP --------------------------------------------------------------------

ParameterSet init_mlp(const MlpSpec& spec, Rng& rng, const std::string& prefix) {
  ParameterSet params;
  std::size_t inputs = spec.inputs;
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
    init_dense(params, prefix + "hidden" + std::to_string(i), inputs, spec.hidden[i], rng);
    inputs = spec.hidden[i];
  }
  init_dense(params, prefix + "head", inputs, spec.outputs, rng);
  return params;
}

Tape::Node mlp_forward(Tape& tape, Tape::Node x, const MlpSpec& spec, const std::string& prefix) {
  for (std::size_t i = 0; i < spec.hidden.size(); ++i) x = tape.relu(tape.dense(x, prefix + "hidden" + std::to_string(i)));
  return tape.dense(x, prefix + "head");
}

Tensor forward(const ParameterSet& params, const MlpSpec& spec, const Tensor& input) {
  Tape tape(params);
  return tape.value(mlp_forward(tape, tape.input(input), spec));
}

// --- losses -----------------------------------------------------------------

double huber_loss(double u, double kappa) {
  const double a = std::abs(u);
  return a <= kappa ? 0.5 * u * u : kappa * (a - 0.5 * kappa);
}

double huber_loss_grad(double u, double kappa) {
  if (std::abs(u) <= kappa) return u;
  return u > 0 ? kappa : -kappa;
}

void softmax(std::span<const double> logits, std::span<double> out) {
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    z += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= z;
}

double softmax_cross_entropy(std::span<const double> logits, std::span<const double> target,
                             std::span<double> logits_grad) {
  if (logits.size() != target.size() || logits.empty()) {
    throw ContractViolation("softmax_cross_entropy: logits and target sizes differ");
  }
  double mass = 0.0;
  for (double t : target) {
    if (t < 0.0) throw ContractViolation("softmax_cross_entropy: negative target probability");
    mass += t;
  }
  if (std::abs(mass - 1.0) > 1e-9) throw ContractViolation("softmax_cross_entropy: target is not normalized");

  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - m);
  const double log_z = m + std::log(z);
  double loss = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (target[i] != 0.0) loss -= target[i] * (logits[i] - log_z);
  }
  if (!logits_grad.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) logits_grad[i] = std::exp(logits[i] - log_z) - target[i];
  }
  return loss;
}

}  // namespace valrl::net
