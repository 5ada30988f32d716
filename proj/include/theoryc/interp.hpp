#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "theoryc/archir.hpp"

namespace theoryc {

/// Dense row-major float64 array.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  static Tensor vector(std::vector<double> values);
  std::size_t size() const { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

/// Parameter values keyed by slot id.
using ParamSet = std::map<int, Tensor>;

/// Uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], element e of slot s drawn at
/// counter (s, e) under `seed`.
ParamSet init_params(const ArchGraph& g, std::uint64_t seed);

/// Graph with parameters materialised into dense per-node matrices. Evaluation
/// is const and reentrant.
class Evaluator {
 public:
  Evaluator(const ArchGraph& g, const ParamSet& params);

  std::vector<double> operator()(std::span<const double> x) const;
  RealMatrix jacobian_fd(std::span<const double> x, double h) const;

  int input_dim() const { return input_dim_; }
  int output_dim() const { return output_dim_; }

 private:
  struct Step {
    int id = 0;
    NodeKind kind = NodeKind::Input;
    int width_out = 0;
    std::vector<std::size_t> inputs;  // indices into steps_, by port
    std::vector<double> weight;       // width_out x width_in, row-major
    std::vector<double> bias;
    int width_in = 0;
    std::string nonlinearity;
    ProjectionNode projection;
    std::vector<double> a, w, v, c;  // CurlHead
  };

  std::vector<Step> steps_;
  std::size_t output_step_ = 0;
  int input_dim_ = 0;
  int output_dim_ = 0;
};

Tensor forward(const ArchGraph& g, const ParamSet& params, const Tensor& x);

/// Central differences: J[j][i] = (f_j(x + h e_i) - f_j(x - h e_i)) / 2h.
RealMatrix jacobian_fd(const ArchGraph& g, const ParamSet& params, const Tensor& x, double h);

/// y[perm[i]] = x[i].
Tensor apply_perm(const Permutation& perm, const Tensor& x);

double apply_nonlinearity(std::string_view name, double v);
bool is_known_nonlinearity(std::string_view name);

}  // namespace theoryc
