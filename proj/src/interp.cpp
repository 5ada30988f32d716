#include "theoryc/interp.hpp"

#include <cmath>
#include <string>

#include "theoryc/error.hpp"
#include "theoryc/rng.hpp"

namespace theoryc {

Tensor Tensor::vector(std::vector<double> values) {
  Tensor t;
  t.shape = {static_cast<int>(values.size())};
  t.data = std::move(values);
  return t;
}

ParamSet init_params(const ArchGraph& g, std::uint64_t seed) {
  const CounterRng rng(seed);
  ParamSet out;
  for (const auto& node : g.nodes) {
    for (const auto& slot : node.params) {
      Tensor t;
      t.shape = slot.shape;
      std::size_t count = 1;
      for (int d : slot.shape) count *= static_cast<std::size_t>(d);
      t.data.resize(count);
      const double bound = 1.0 / std::sqrt(static_cast<double>(slot.fan_in));
      for (std::size_t e = 0; e < count; ++e) {
        t.data[e] = bound * (2.0 * rng.uniform(static_cast<std::uint64_t>(slot.id), e) - 1.0);
      }
      out[slot.id] = std::move(t);
    }
  }
  return out;
}

bool is_known_nonlinearity(std::string_view name) {
  return name == "tanh" || name == "relu" || name == "sigmoid" || name == "identity";
}

double apply_nonlinearity(std::string_view name, double v) {
  if (name == "tanh") return std::tanh(v);
  if (name == "relu") return v > 0.0 ? v : 0.0;
  if (name == "sigmoid") return 1.0 / (1.0 + std::exp(-v));
  return v;
}

namespace {

const Tensor& slot_values(const LayerNode& node, const ParamSet& params, std::string_view role) {
  const ParamSlot* slot = node.slot(role);
  if (!slot) {
    throw Error(ErrorCode::ShapeMismatch, "node " + std::to_string(node.id) + " lacks a '" + std::string(role) + "' slot");
  }
  auto it = params.find(slot->id);
  if (it == params.end() || it->second.shape != slot->shape) {
    throw Error(ErrorCode::ShapeMismatch, "parameter slot " + std::to_string(slot->id) + " missing or misshapen");
  }
  return it->second;
}

}  // namespace

Evaluator::Evaluator(const ArchGraph& g, const ParamSet& params) : input_dim_(g.input_dim), output_dim_(g.output_dim) {
  const auto order = g.topological_order();
  if (!order) throw Error(ErrorCode::InvalidGraph, "graph contains a cycle");
  std::map<int, std::size_t> step_of;
  for (int id : *order) {
    const LayerNode& node = *g.find(id);
    Step s;
    s.id = id;
    s.kind = node.kind();
    s.width_in = node.width_in;
    s.width_out = node.width_out;
    for (int p : g.producers(id)) s.inputs.push_back(step_of.at(p));

    const auto rows = static_cast<std::size_t>(node.width_out);
    const auto cols = static_cast<std::size_t>(node.width_in);
    switch (s.kind) {
      case NodeKind::Dense:
      case NodeKind::MaskedDense: {
        s.weight = slot_values(node, params, "weight").data;
        s.bias = slot_values(node, params, "bias").data;
        if (s.kind == NodeKind::MaskedDense) {
          const auto& mask = std::get<MaskedDenseNode>(node.data).mask;
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) {
              if (!mask[r][c]) s.weight[r * cols + c] = 0.0;
            }
          }
        }
        break;
      }
      case NodeKind::SharedLinear: {
        const auto& shared = std::get<SharedLinearNode>(node.data);
        const auto& w = slot_values(node, params, "weight").data;
        const auto& b = slot_values(node, params, "bias").data;
        s.weight.assign(rows * cols, 0.0);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) {
            const int k = shared.pattern[r][c];
            if (k >= 0) s.weight[r * cols + c] = w.at(static_cast<std::size_t>(k));
          }
        }
        s.bias.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) s.bias[r] = b.at(static_cast<std::size_t>(shared.bias_pattern[r]));
        break;
      }
      case NodeKind::Pointwise:
        s.nonlinearity = std::get<PointwiseNode>(node.data).nonlinearity;
        if (!is_known_nonlinearity(s.nonlinearity)) {
          throw Error(ErrorCode::InvalidGraph, "unknown nonlinearity '" + s.nonlinearity + "'");
        }
        break;
      case NodeKind::Projection: s.projection = std::get<ProjectionNode>(node.data); break;
      case NodeKind::CurlHead:
        s.a = slot_values(node, params, "a").data;
        s.w = slot_values(node, params, "w").data;
        s.v = slot_values(node, params, "v").data;
        s.c = slot_values(node, params, "c").data;
        break;
      case NodeKind::Output: output_step_ = steps_.size(); break;
      default: break;
    }
    step_of[id] = steps_.size();
    steps_.push_back(std::move(s));
  }
}

std::vector<double> Evaluator::operator()(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != input_dim_) {
    throw Error(ErrorCode::ShapeMismatch,
                "input has " + std::to_string(x.size()) + " values, expected " + std::to_string(input_dim_));
  }
  std::vector<std::vector<double>> values(steps_.size());
  for (std::size_t k = 0; k < steps_.size(); ++k) {
    const Step& s = steps_[k];
    std::vector<double>& y = values[k];
    auto in = [&](std::size_t port) -> const std::vector<double>& { return values[s.inputs[port]]; };
    switch (s.kind) {
      case NodeKind::Input: y.assign(x.begin(), x.end()); break;
      case NodeKind::Output: y = in(0); break;
      case NodeKind::Dense:
      case NodeKind::MaskedDense:
      case NodeKind::SharedLinear: {
        const auto& xin = in(0);
        const auto cols = static_cast<std::size_t>(s.width_in);
        y.resize(static_cast<std::size_t>(s.width_out));
        for (std::size_t r = 0; r < y.size(); ++r) {
          double acc = s.bias[r];
          const double* row = s.weight.data() + r * cols;
          for (std::size_t c = 0; c < cols; ++c) acc += row[c] * xin[c];
          y[r] = acc;
        }
        break;
      }
      case NodeKind::Pointwise: {
        y = in(0);
        for (double& v : y) v = apply_nonlinearity(s.nonlinearity, v);
        break;
      }
      case NodeKind::Projection: {
        const auto& p = s.projection;
        const auto& yhat = in(0);
        const std::size_t k_rows = p.matrix.size();
        std::vector<double> residual(k_rows);
        for (std::size_t r = 0; r < k_rows; ++r) {
          double t = p.offset[r];
          if (!p.input_matrix.empty()) {
            const auto& xin = in(1);
            for (std::size_t i = 0; i < xin.size(); ++i) t += p.input_matrix[r][i] * xin[i];
          }
          double ay = 0.0;
          for (std::size_t j = 0; j < yhat.size(); ++j) ay += p.matrix[r][j] * yhat[j];
          residual[r] = t - ay;
        }
        y = yhat;
        for (std::size_t j = 0; j < y.size(); ++j) {
          double corr = 0.0;
          for (std::size_t r = 0; r < k_rows; ++r) corr += p.correction[j][r] * residual[r];
          y[j] += corr;
        }
        break;
      }
      case NodeKind::CurlHead: {
        const auto& pt = in(0);
        double u = 0.0;
        double v = 0.0;
        for (std::size_t r = 0; r < s.a.size(); ++r) {
          const double t = std::tanh(s.w[r] * pt[0] + s.v[r] * pt[1] + s.c[r]);
          const double sech2 = 1.0 - t * t;
          u += s.a[r] * s.v[r] * sech2;
          v += s.a[r] * s.w[r] * sech2;
        }
        y = {u, -v};
        break;
      }
      case NodeKind::Concat:
        for (std::size_t port = 0; port < s.inputs.size(); ++port) {
          const auto& part = in(port);
          y.insert(y.end(), part.begin(), part.end());
        }
        break;
    }
    for (double v : y) {
      if (!std::isfinite(v)) {
        throw Error(ErrorCode::NonFiniteValue, "non-finite value produced by node " + std::to_string(s.id));
      }
    }
  }
  return values[output_step_];
}

RealMatrix Evaluator::jacobian_fd(std::span<const double> x, double h) const {
  if (!(h > 0.0)) throw Error(ErrorCode::ShapeMismatch, "finite-difference step must be positive");
  RealMatrix jac(static_cast<std::size_t>(output_dim_), RealVector(x.size(), 0.0));
  std::vector<double> probe(x.begin(), x.end());
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const auto plus = (*this)(probe);
    probe[i] = x[i] - h;
    const auto minus = (*this)(probe);
    probe[i] = x[i];
    for (std::size_t j = 0; j < plus.size(); ++j) jac[j][i] = (plus[j] - minus[j]) / (2.0 * h);
  }
  return jac;
}

Tensor forward(const ArchGraph& g, const ParamSet& params, const Tensor& x) {
  if (x.shape != std::vector<int>{g.input_dim}) {
    throw Error(ErrorCode::ShapeMismatch, "input tensor must have shape (" + std::to_string(g.input_dim) + ")");
  }
  return Tensor::vector(Evaluator(g, params)(x.data));
}

RealMatrix jacobian_fd(const ArchGraph& g, const ParamSet& params, const Tensor& x, double h) {
  if (x.shape != std::vector<int>{g.input_dim}) {
    throw Error(ErrorCode::ShapeMismatch, "input tensor must have shape (" + std::to_string(g.input_dim) + ")");
  }
  return Evaluator(g, params).jacobian_fd(x.data, h);
}

Tensor apply_perm(const Permutation& perm, const Tensor& x) {
  if (perm.size() != x.size()) throw Error(ErrorCode::ShapeMismatch, "permutation degree differs from tensor length");
  Tensor y = x;
  for (std::size_t i = 0; i < perm.size(); ++i) y.data[perm[i]] = x.data[i];
  return y;
}

}  // namespace theoryc
