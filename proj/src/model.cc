// Copyright 2026 The OODGate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "oodgate/model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "oodgate/error.h"
#include "oodgate/rng.h"

namespace oodgate {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Stream-id salts keep the training, dropout and init streams disjoint.
constexpr std::uint64_t kInitSalt = 0x494e4954ULL;
constexpr std::uint64_t kShuffleSalt = 0x53485546ULL;
constexpr std::uint64_t kTrainDropoutSalt = 0x44524f50ULL;

void RequireShape(bool ok, const std::string& what) {
  Require(ok, ErrorCode::kShapeMismatch, what);
}

Shape LayerOutputShape(const LayerSpec& layer, const Shape& in,
                       std::size_t index) {
  const std::string where = "layer " + std::to_string(index) + " (" +
                            LayerTypeName(layer) + ") input " + ShapeString(in);
  return std::visit(
      Overloaded{
          [&](const DenseLayer& d) -> Shape {
            RequireShape(in.size() == 1 && in[0] == d.in,
                         where + ": expected [" + std::to_string(d.in) + "]");
            RequireShape(d.out > 0, where + ": zero outputs");
            return {d.out};
          },
          [&](const Conv2dLayer& c) -> Shape {
            RequireShape(in.size() == 3 && in[2] == c.in_ch,
                         where + ": expected [H,W," + std::to_string(c.in_ch) + "]");
            RequireShape(c.kernel > 0 && c.stride > 0 && c.out_ch > 0,
                         where + ": degenerate convolution");
            RequireShape(in[0] + 2 * c.pad >= c.kernel &&
                             in[1] + 2 * c.pad >= c.kernel,
                         where + ": kernel larger than padded input");
            return {(in[0] + 2 * c.pad - c.kernel) / c.stride + 1,
                    (in[1] + 2 * c.pad - c.kernel) / c.stride + 1, c.out_ch};
          },
          [&](const ReluLayer&) -> Shape { return in; },
          [&](const MaxPoolLayer& m) -> Shape {
            RequireShape(in.size() == 3, where + ": expected [H,W,C]");
            RequireShape(m.kernel > 0 && m.stride > 0 && in[0] >= m.kernel &&
                             in[1] >= m.kernel,
                         where + ": pool window does not fit");
            return {(in[0] - m.kernel) / m.stride + 1,
                    (in[1] - m.kernel) / m.stride + 1, in[2]};
          },
          [&](const GlobalAvgPoolLayer&) -> Shape {
            RequireShape(in.size() == 3 && in[0] * in[1] > 0,
                         where + ": expected non-empty [H,W,C]");
            return {in[2]};
          },
          [&](const DropoutLayer& d) -> Shape {
            Require(d.p >= 0.0 && d.p < 1.0, ErrorCode::kInvariantViolation,
                    where + ": dropout p must lie in [0,1)");
            return in;
          },
          [&](const FlattenLayer&) -> Shape { return {NumElements(in)}; },
      },
      layer);
}

void CheckFinite(const Tensor& t, std::size_t layer_index) {
  for (double v : t.values()) {
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::kNonFiniteActivation,
                  "layer " + std::to_string(layer_index) + " produced " + std::to_string(v));
    }
  }
}

// ---- forward kernels -------------------------------------------------------

void DenseForward(const DenseLayer& d, const LayerParams& p, const double* in,
                  double* out) {
  const double* w = p.weight.values().data();
  const double* b = p.bias.values().data();
  for (std::size_t o = 0; o < d.out; ++o) {
    const double* row = w + o * d.in;
    double acc = b[o];
    for (std::size_t i = 0; i < d.in; ++i) acc += row[i] * in[i];
    out[o] = acc;
  }
}

void ConvForward(const Conv2dLayer& c, const LayerParams& p, const Shape& in_shape,
                 const Shape& out_shape, const double* in, double* out) {
  const std::size_t h = in_shape[0], w = in_shape[1], ic = c.in_ch;
  const std::size_t oh_n = out_shape[0], ow_n = out_shape[1], oc_n = c.out_ch;
  const std::size_t k = c.kernel;
  const double* wt = p.weight.values().data();
  const double* b = p.bias.values().data();
  for (std::size_t oh = 0; oh < oh_n; ++oh) {
    for (std::size_t ow = 0; ow < ow_n; ++ow) {
      double* o = out + (oh * ow_n + ow) * oc_n;
      for (std::size_t oc = 0; oc < oc_n; ++oc) o[oc] = b[oc];
      for (std::size_t kh = 0; kh < k; ++kh) {
        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh * c.stride + kh) -
                                  static_cast<std::ptrdiff_t>(c.pad);
        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
        for (std::size_t kw = 0; kw < k; ++kw) {
          const std::ptrdiff_t iw = static_cast<std::ptrdiff_t>(ow * c.stride + kw) -
                                    static_cast<std::ptrdiff_t>(c.pad);
          if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
          const double* px = in + (static_cast<std::size_t>(ih) * w +
                                   static_cast<std::size_t>(iw)) * ic;
          for (std::size_t oc = 0; oc < oc_n; ++oc) {
            const double* wk = wt + ((oc * k + kh) * k + kw) * ic;
            double acc = 0.0;
            for (std::size_t i = 0; i < ic; ++i) acc += wk[i] * px[i];
            o[oc] += acc;
          }
        }
      }
    }
  }
}

void MaxPoolForward(const MaxPoolLayer& m, const Shape& in_shape,
                    const Shape& out_shape, const double* in, double* out,
                    std::vector<std::uint32_t>& argmax) {
  const std::size_t w = in_shape[1], ch = in_shape[2];
  argmax.assign(NumElements(out_shape), 0);
  for (std::size_t oh = 0; oh < out_shape[0]; ++oh) {
    for (std::size_t ow = 0; ow < out_shape[1]; ++ow) {
      for (std::size_t c = 0; c < ch; ++c) {
        double best = -std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t kh = 0; kh < m.kernel; ++kh) {
          for (std::size_t kw = 0; kw < m.kernel; ++kw) {
            const std::size_t idx =
                ((oh * m.stride + kh) * w + (ow * m.stride + kw)) * ch + c;
            if (in[idx] > best || (kh == 0 && kw == 0)) {
              best = in[idx];
              best_idx = idx;
            }
          }
        }
        const std::size_t o = (oh * out_shape[1] + ow) * ch + c;
        out[o] = best;
        argmax[o] = static_cast<std::uint32_t>(best_idx);
      }
    }
  }
}

void GapForward(const Shape& in_shape, const double* in, double* out) {
  const std::size_t spatial = in_shape[0] * in_shape[1], ch = in_shape[2];
  for (std::size_t c = 0; c < ch; ++c) out[c] = 0.0;
  for (std::size_t s = 0; s < spatial; ++s) {
    for (std::size_t c = 0; c < ch; ++c) out[c] += in[s * ch + c];
  }
  for (std::size_t c = 0; c < ch; ++c) out[c] /= static_cast<double>(spatial);
}

struct DropoutPlan {
  bool sample = false;
  std::uint64_t seed = 0;
  std::optional<double> p_override;
};

// Runs layers [first, end) starting from `in`, filling trace.outputs[first..].
void ForwardRange(const ModelSpec& spec, const ModelParams& params,
                  const std::vector<Shape>& shapes, std::size_t first,
                  const Tensor& in, const DropoutPlan& plan, ForwardTrace& trace) {
  const std::size_t n = spec.layers.size();
  trace.outputs.resize(n);
  trace.dropout_masks.resize(n);
  trace.pool_argmax.resize(n);
  const Tensor* current = &in;
  for (std::size_t i = first; i < n; ++i) {
    const Shape& in_shape = i == 0 ? spec.input_shape : shapes[i - 1];
    Tensor out(shapes[i]);
    const double* src = current->values().data();
    double* dst = out.mutable_values().data();
    std::visit(
        Overloaded{
            [&](const DenseLayer& d) { DenseForward(d, params.layers[i], src, dst); },
            [&](const Conv2dLayer& c) {
              ConvForward(c, params.layers[i], in_shape, shapes[i], src, dst);
            },
            [&](const ReluLayer&) {
              for (std::size_t j = 0; j < out.size(); ++j) dst[j] = std::max(0.0, src[j]);
            },
            [&](const MaxPoolLayer& m) {
              MaxPoolForward(m, in_shape, shapes[i], src, dst, trace.pool_argmax[i]);
            },
            [&](const GlobalAvgPoolLayer&) { GapForward(in_shape, src, dst); },
            [&](const DropoutLayer& d) {
              const double p = plan.p_override.value_or(d.p);
              if (!plan.sample) {
                std::copy(src, src + out.size(), dst);
                trace.dropout_masks[i].clear();
                return;
              }
              CounterRng rng(DeriveStream(plan.seed, i));
              const double scale = 1.0 / (1.0 - p);
              auto& mask = trace.dropout_masks[i];
              mask.assign(out.size(), 1);
              for (std::size_t j = 0; j < out.size(); ++j) {
                const bool drop = rng.Bernoulli(p);
                mask[j] = drop ? 0 : 1;
                dst[j] = drop ? 0.0 : src[j] * scale;
              }
            },
            [&](const FlattenLayer&) { std::copy(src, src + out.size(), dst); },
        },
        spec.layers[i]);
    CheckFinite(out, i);
    trace.outputs[i] = std::move(out);
    current = &trace.outputs[i];
  }
  trace.logits = trace.outputs.back();
  trace.softmax = Tensor::Vector(Softmax(trace.logits.values()));
}

void CheckInput(const ModelSpec& spec, const Tensor& x) {
  RequireShape(x.shape() == spec.input_shape,
               "input " + ShapeString(x.shape()) + " does not match model input " +
                   ShapeString(spec.input_shape));
}

// ---- backward --------------------------------------------------------------

struct Gradients {
  Tensor input;
  std::vector<LayerParams> params;
};

Gradients Backward(const ModelSpec& spec, const ModelParams& params,
                   const std::vector<Shape>& shapes, const ForwardTrace& trace,
                   const std::vector<double>& grad_logits, bool want_params) {
  const std::size_t n = spec.layers.size();
  Gradients g;
  if (want_params) {
    g.params.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (HasParams(spec.layers[i])) {
        g.params[i].weight = Tensor(params.layers[i].weight.shape());
        g.params[i].bias = Tensor(params.layers[i].bias.shape());
      }
    }
  }
  std::vector<double> grad_out = grad_logits;
  for (std::size_t idx = n; idx-- > 0;) {
    const Tensor& in = idx == 0 ? trace.input : trace.outputs[idx - 1];
    const Shape& in_shape = idx == 0 ? spec.input_shape : shapes[idx - 1];
    const double* a = in.values().data();
    std::vector<double> grad_in(in.size(), 0.0);
    std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
              const double* w = params.layers[idx].weight.values().data();
              for (std::size_t o = 0; o < d.out; ++o) {
                const double go = grad_out[o];
                if (go == 0.0) continue;
                const double* row = w + o * d.in;
                for (std::size_t i = 0; i < d.in; ++i) grad_in[i] += row[i] * go;
              }
              if (want_params) {
                double* gw = g.params[idx].weight.mutable_values().data();
                double* gb = g.params[idx].bias.mutable_values().data();
                for (std::size_t o = 0; o < d.out; ++o) {
                  gb[o] += grad_out[o];
                  for (std::size_t i = 0; i < d.in; ++i) gw[o * d.in + i] += grad_out[o] * a[i];
                }
              }
            },
            [&](const Conv2dLayer& c) {
              const std::size_t h = in_shape[0], w = in_shape[1], ic = c.in_ch;
              const std::size_t oh_n = shapes[idx][0], ow_n = shapes[idx][1];
              const std::size_t oc_n = c.out_ch, k = c.kernel;
              const double* wt = params.layers[idx].weight.values().data();
              double* gw = want_params ? g.params[idx].weight.mutable_values().data() : nullptr;
              double* gb = want_params ? g.params[idx].bias.mutable_values().data() : nullptr;
              for (std::size_t oh = 0; oh < oh_n; ++oh) {
                for (std::size_t ow = 0; ow < ow_n; ++ow) {
                  const double* go = grad_out.data() + (oh * ow_n + ow) * oc_n;
                  if (gb != nullptr) {
                    for (std::size_t oc = 0; oc < oc_n; ++oc) gb[oc] += go[oc];
                  }
                  for (std::size_t kh = 0; kh < k; ++kh) {
                    const std::ptrdiff_t ih =
                        static_cast<std::ptrdiff_t>(oh * c.stride + kh) -
                        static_cast<std::ptrdiff_t>(c.pad);
                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kw = 0; kw < k; ++kw) {
                      const std::ptrdiff_t iw =
                          static_cast<std::ptrdiff_t>(ow * c.stride + kw) -
                          static_cast<std::ptrdiff_t>(c.pad);
                      if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                      const std::size_t base =
                          (static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)) * ic;
                      double* gi = grad_in.data() + base;
                      const double* px = a + base;
                      for (std::size_t oc = 0; oc < oc_n; ++oc) {
                        const double gval = go[oc];
                        if (gval == 0.0) continue;
                        const std::size_t woff = ((oc * k + kh) * k + kw) * ic;
                        const double* wk = wt + woff;
                        for (std::size_t i = 0; i < ic; ++i) gi[i] += wk[i] * gval;
                        if (gw != nullptr) {
                          double* gwk = gw + woff;
                          for (std::size_t i = 0; i < ic; ++i) gwk[i] += px[i] * gval;
                        }
                      }
                    }
                  }
                }
              }
            },
            [&](const ReluLayer&) {
              for (std::size_t j = 0; j < grad_in.size(); ++j) {
                grad_in[j] = a[j] > 0.0 ? grad_out[j] : 0.0;
              }
            },
            [&](const MaxPoolLayer&) {
              const auto& argmax = trace.pool_argmax[idx];
              for (std::size_t o = 0; o < argmax.size(); ++o) grad_in[argmax[o]] += grad_out[o];
            },
            [&](const GlobalAvgPoolLayer&) {
              const std::size_t spatial = in_shape[0] * in_shape[1], ch = in_shape[2];
              const double inv = 1.0 / static_cast<double>(spatial);
              for (std::size_t s = 0; s < spatial; ++s) {
                for (std::size_t c = 0; c < ch; ++c) grad_in[s * ch + c] = grad_out[c] * inv;
              }
            },
            [&](const DropoutLayer& d) {
              const auto& mask = trace.dropout_masks[idx];
              if (mask.empty()) {
                grad_in = grad_out;
                return;
              }
              const double scale = 1.0 / (1.0 - d.p);
              for (std::size_t j = 0; j < grad_in.size(); ++j) {
                grad_in[j] = mask[j] != 0 ? grad_out[j] * scale : 0.0;
              }
            },
            [&](const FlattenLayer&) { grad_in = grad_out; },
        },
        spec.layers[idx]);
    grad_out = std::move(grad_in);
  }
  g.input = Tensor(spec.input_shape, std::move(grad_out));
  return g;
}

std::vector<double> ObjectiveLogitGradient(const Objective& objective,
                                           const Tensor& logits) {
  const std::size_t k = logits.size();
  std::vector<double> grad(k, 0.0);
  switch (objective.kind) {
    case Objective::Kind::kLogMaxSoftmax: {
      Require(objective.temperature > 0.0, ErrorCode::kInvariantViolation,
              "temperature must be positive");
      const std::vector<double> s = Softmax(logits.values(), objective.temperature);
      const std::size_t top = Argmax(logits.values());
      for (std::size_t j = 0; j < k; ++j) {
        grad[j] = ((j == top ? 1.0 : 0.0) - s[j]) / objective.temperature;
      }
      break;
    }
    case Objective::Kind::kLogit:
      Require(objective.index >= 0 && static_cast<std::size_t>(objective.index) < k,
              ErrorCode::kShapeMismatch, "logit index out of range");
      grad[static_cast<std::size_t>(objective.index)] = 1.0;
      break;
    case Objective::Kind::kCrossEntropy: {
      Require(objective.index >= 0 && static_cast<std::size_t>(objective.index) < k,
              ErrorCode::kShapeMismatch, "target out of range");
      grad = Softmax(logits.values());
      grad[static_cast<std::size_t>(objective.index)] -= 1.0;
      break;
    }
  }
  return grad;
}

double LogSumExp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

}  // namespace

// ---- public API ------------------------------------------------------------

std::string LayerTypeName(const LayerSpec& layer) {
  return std::visit(Overloaded{
                        [](const DenseLayer&) { return std::string("dense"); },
                        [](const Conv2dLayer&) { return std::string("conv2d"); },
                        [](const ReluLayer&) { return std::string("relu"); },
                        [](const MaxPoolLayer&) { return std::string("maxpool"); },
                        [](const GlobalAvgPoolLayer&) { return std::string("global_avg_pool"); },
                        [](const DropoutLayer&) { return std::string("dropout"); },
                        [](const FlattenLayer&) { return std::string("flatten"); },
                    },
                    layer);
}

bool HasParams(const LayerSpec& layer) {
  return std::holds_alternative<DenseLayer>(layer) ||
         std::holds_alternative<Conv2dLayer>(layer);
}

std::vector<Shape> ModelSpec::OutputShapes() const {
  Require(num_classes >= 1, ErrorCode::kShapeMismatch, "num_classes must be >= 1");
  Require(!layers.empty(), ErrorCode::kShapeMismatch, "model has no layers");
  std::vector<Shape> shapes;
  shapes.reserve(layers.size());
  Shape current = input_shape;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    current = LayerOutputShape(layers[i], current, i);
    shapes.push_back(current);
  }
  Require(current.size() == 1 && current[0] == static_cast<std::size_t>(num_classes),
          ErrorCode::kShapeMismatch,
          "final output " + ShapeString(current) + " is not [" +
              std::to_string(num_classes) + "]");
  return shapes;
}

bool operator==(const ModelParams& a, const ModelParams& b) {
  if (a.layers.size() != b.layers.size()) return false;
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (!(a.layers[i].weight == b.layers[i].weight) ||
        !(a.layers[i].bias == b.layers[i].bias)) {
      return false;
    }
  }
  return true;
}

ModelSpec TinyConv(std::size_t height, std::size_t width, int num_classes,
                   double dropout_p) {
  ModelSpec spec;
  spec.input_shape = {height, width, 1};
  spec.num_classes = num_classes;
  spec.layers = {
      Conv2dLayer{1, 8, 3, 1, 1},
      ReluLayer{},
      MaxPoolLayer{2, 2},
      Conv2dLayer{8, 16, 3, 1, 1},
      ReluLayer{},
      GlobalAvgPoolLayer{},
      DropoutLayer{dropout_p},
      DenseLayer{16, static_cast<std::size_t>(num_classes)},
  };
  spec.Validate();
  return spec;
}

ModelSpec Mlp(std::size_t input_dim, const std::vector<std::size_t>& hidden,
              int num_classes) {
  ModelSpec spec;
  spec.input_shape = {input_dim};
  spec.num_classes = num_classes;
  std::size_t in = input_dim;
  for (std::size_t h : hidden) {
    spec.layers.push_back(DenseLayer{in, h});
    spec.layers.push_back(ReluLayer{});
    in = h;
  }
  spec.layers.push_back(DenseLayer{in, static_cast<std::size_t>(num_classes)});
  spec.Validate();
  return spec;
}

ModelParams InitParams(const ModelSpec& spec, std::uint64_t seed) {
  spec.Validate();
  ModelParams params;
  params.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    std::size_t fan_in = 0, fan_out = 0;
    Shape w_shape, b_shape;
    if (const auto* d = std::get_if<DenseLayer>(&spec.layers[i])) {
      fan_in = d->in;
      fan_out = d->out;
      w_shape = {d->out, d->in};
      b_shape = {d->out};
    } else if (const auto* c = std::get_if<Conv2dLayer>(&spec.layers[i])) {
      fan_in = c->in_ch * c->kernel * c->kernel;
      fan_out = c->out_ch * c->kernel * c->kernel;
      w_shape = {c->out_ch, c->kernel, c->kernel, c->in_ch};
      b_shape = {c->out_ch};
    } else {
      continue;
    }
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    CounterRng rng(DeriveStream(seed ^ kInitSalt, i));
    Tensor w(w_shape);
    for (double& v : w.mutable_values()) v = rng.Uniform(-limit, limit);
    params.layers[i].weight = std::move(w);
    params.layers[i].bias = Tensor(b_shape);
  }
  return params;
}

void ValidateParams(const ModelSpec& spec, const ModelParams& params) {
  Require(params.layers.size() == spec.layers.size(), ErrorCode::kShapeMismatch,
          "parameter list length does not match layer count");
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerParams& p = params.layers[i];
    Shape w_shape{0}, b_shape{0};
    if (const auto* d = std::get_if<DenseLayer>(&spec.layers[i])) {
      w_shape = {d->out, d->in};
      b_shape = {d->out};
    } else if (const auto* c = std::get_if<Conv2dLayer>(&spec.layers[i])) {
      w_shape = {c->out_ch, c->kernel, c->kernel, c->in_ch};
      b_shape = {c->out_ch};
    }
    Require(p.weight.shape() == w_shape && p.bias.shape() == b_shape,
            ErrorCode::kShapeMismatch,
            "layer " + std::to_string(i) + " parameters have shapes " +
                ShapeString(p.weight.shape()) + "/" + ShapeString(p.bias.shape()));
    for (const Tensor* t : {&p.weight, &p.bias}) {
      for (std::size_t j = 0; j < t->size(); ++j) {
        Require(std::isfinite(t->at(j)), ErrorCode::kInvariantViolation,
                "layer " + std::to_string(i) + " has a non-finite parameter");
      }
    }
  }
}

std::vector<double> Softmax(std::span<const double> logits, double temperature) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  double m = logits[0] / temperature;
  for (double v : logits) m = std::max(m, v / temperature);
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] / temperature - m);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
  return out;
}

std::size_t Argmax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

ForwardTrace Forward(const ModelSpec& spec, const ModelParams& params,
                     const Tensor& x, ForwardMode mode,
                     std::optional<std::uint64_t> seed) {
  const std::vector<Shape> shapes = spec.OutputShapes();
  CheckInput(spec, x);
  Require(params.layers.size() == spec.layers.size(), ErrorCode::kShapeMismatch,
          "parameter list length does not match layer count");
  Require((mode == ForwardMode::kMcDropout) == seed.has_value(),
          ErrorCode::kInvariantViolation,
          "a seed is required exactly when sampling dropout");
  ForwardTrace trace;
  trace.input = x.WithDType(DType::kFloat64);
  DropoutPlan plan;
  plan.sample = mode == ForwardMode::kMcDropout;
  plan.seed = seed.value_or(0);
  ForwardRange(spec, params, shapes, 0, trace.input, plan, trace);
  return trace;
}

double EvaluateObjective(const Objective& objective, const Tensor& logits) {
  switch (objective.kind) {
    case Objective::Kind::kLogMaxSoftmax: {
      const std::size_t top = Argmax(logits.values());
      std::vector<double> scaled(logits.values().begin(), logits.values().end());
      for (double& v : scaled) v /= objective.temperature;
      return scaled[top] - LogSumExp(scaled);
    }
    case Objective::Kind::kLogit:
      return logits[static_cast<std::size_t>(objective.index)];
    case Objective::Kind::kCrossEntropy:
      return LogSumExp(logits.values()) - logits[static_cast<std::size_t>(objective.index)];
  }
  return 0.0;
}

Tensor InputGradient(const ModelSpec& spec, const ModelParams& params,
                     const Tensor& x, const Objective& objective) {
  const std::vector<Shape> shapes = spec.OutputShapes();
  const ForwardTrace trace = Forward(spec, params, x);
  const std::vector<double> grad_logits = ObjectiveLogitGradient(objective, trace.logits);
  return Backward(spec, params, shapes, trace, grad_logits, false).input;
}

double MeanCrossEntropy(const ModelSpec& spec, const ModelParams& params,
                        std::span<const Tensor> inputs, std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const ForwardTrace t = Forward(spec, params, inputs[i]);
    total += EvaluateObjective(Objective::CrossEntropy(labels[i]), t.logits);
  }
  return total / static_cast<double>(inputs.size());
}

TrainResult Train(const ModelSpec& spec, std::span<const Tensor> inputs,
                  std::span<const int> labels, const TrainConfig& config) {
  const std::vector<Shape> shapes = spec.OutputShapes();
  Require(!inputs.empty(), ErrorCode::kInvariantViolation, "empty training set");
  Require(inputs.size() == labels.size(), ErrorCode::kShapeMismatch,
          "inputs and labels differ in length");
  Require(config.batch_size > 0 && config.epochs >= 0,
          ErrorCode::kInvariantViolation, "invalid batch size or epoch count");
  for (int y : labels) {
    Require(y >= 0 && y < spec.num_classes, ErrorCode::kInvariantViolation,
            "label " + std::to_string(y) + " outside [0, K)");
  }
  for (const Tensor& x : inputs) CheckInput(spec, x);

  TrainResult result;
  result.params = config.initial.has_value() ? *config.initial
                                             : InitParams(spec, config.seed);
  ValidateParams(spec, result.params);
  ModelParams& params = result.params;

  std::vector<LayerParams> velocity(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (HasParams(spec.layers[i])) {
      velocity[i].weight = Tensor(params.layers[i].weight.shape());
      velocity[i].bias = Tensor(params.layers[i].bias.shape());
    }
  }

  const std::size_t n = inputs.size();
  std::vector<std::size_t> order(n);
  std::uint64_t step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    CounterRng shuffle(DeriveStream(config.seed ^ kShuffleSalt,
                                    static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.Below(i)]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<LayerParams> grad_sum;
      for (std::size_t pos = start; pos < end; ++pos) {
        const std::size_t s = order[pos];
        ForwardTrace trace;
        trace.input = inputs[s].WithDType(DType::kFloat64);
        DropoutPlan plan;
        plan.sample = true;
        plan.seed = DeriveStream(DeriveStream(config.seed ^ kTrainDropoutSalt, step), pos);
        ForwardRange(spec, params, shapes, 0, trace.input, plan, trace);
        const double loss =
            EvaluateObjective(Objective::CrossEntropy(labels[s]), trace.logits);
        Require(std::isfinite(loss), ErrorCode::kDivergedLoss,
                "non-finite loss at epoch " + std::to_string(epoch));
        epoch_loss += loss;
        std::vector<double> grad_logits(trace.softmax.values().begin(),
                                        trace.softmax.values().end());
        grad_logits[static_cast<std::size_t>(labels[s])] -= 1.0;
        Gradients g = Backward(spec, params, shapes, trace, grad_logits, true);
        if (grad_sum.empty()) {
          grad_sum = std::move(g.params);
        } else {
          for (std::size_t l = 0; l < grad_sum.size(); ++l) {
            if (!HasParams(spec.layers[l])) continue;
            auto gw = grad_sum[l].weight.mutable_values();
            auto gb = grad_sum[l].bias.mutable_values();
            for (std::size_t j = 0; j < gw.size(); ++j) gw[j] += g.params[l].weight[j];
            for (std::size_t j = 0; j < gb.size(); ++j) gb[j] += g.params[l].bias[j];
          }
        }
      }
      const double inv = 1.0 / static_cast<double>(end - start);
      for (std::size_t l = 0; l < spec.layers.size(); ++l) {
        if (!HasParams(spec.layers[l])) continue;
        auto update = [&](Tensor& p, Tensor& v, const Tensor& g) {
          auto pv = p.mutable_values();
          auto vv = v.mutable_values();
          for (std::size_t j = 0; j < pv.size(); ++j) {
            vv[j] = config.momentum * vv[j] - config.learning_rate * (g[j] * inv);
            pv[j] += vv[j];
          }
        };
        update(params.layers[l].weight, velocity[l].weight, grad_sum[l].weight);
        update(params.layers[l].bias, velocity[l].bias, grad_sum[l].bias);
      }
    }
    epoch_loss /= static_cast<double>(n);
    Require(std::isfinite(epoch_loss), ErrorCode::kDivergedLoss,
            "non-finite loss at epoch " + std::to_string(epoch));
    result.epoch_losses.push_back(epoch_loss);
  }
  return result;
}

std::vector<Tensor> McDropoutSample(const ModelSpec& spec, const ModelParams& params,
                                    const Tensor& x, std::optional<double> p_override,
                                    std::size_t num_samples, std::uint64_t seed) {
  Require(num_samples >= 1, ErrorCode::kEmptySamples, "need at least one sample");
  ModelSpec run_spec = spec;
  ModelParams run_params = params;
  const auto is_dropout = [](const LayerSpec& l) {
    return std::holds_alternative<DropoutLayer>(l);
  };
  std::size_t first_dropout =
      static_cast<std::size_t>(std::find_if(spec.layers.begin(), spec.layers.end(),
                                            is_dropout) - spec.layers.begin());
  if (first_dropout == spec.layers.size()) {
    Require(p_override.has_value(), ErrorCode::kInvariantViolation,
            "model has no dropout layer and no dropout rate was given");
    first_dropout = spec.layers.size() - 1;
    run_spec.layers.insert(run_spec.layers.begin() + static_cast<std::ptrdiff_t>(first_dropout),
                           DropoutLayer{*p_override});
    run_params.layers.insert(run_params.layers.begin() + static_cast<std::ptrdiff_t>(first_dropout),
                             LayerParams{});
  }
  if (p_override.has_value()) {
    Require(*p_override >= 0.0 && *p_override < 1.0, ErrorCode::kInvariantViolation,
            "dropout p must lie in [0,1)");
    for (LayerSpec& l : run_spec.layers) {
      if (auto* d = std::get_if<DropoutLayer>(&l)) d->p = *p_override;
    }
  }

  // Layers before the first dropout are deterministic; run them once.
  const std::vector<Shape> shapes = run_spec.OutputShapes();
  CheckInput(run_spec, x);
  Tensor head_output = x.WithDType(DType::kFloat64);
  if (first_dropout > 0) {
    ModelSpec head = run_spec;
    head.layers.resize(first_dropout);
    const std::vector<Shape> head_shapes(
        shapes.begin(), shapes.begin() + static_cast<std::ptrdiff_t>(first_dropout));
    ForwardTrace head_trace;
    ForwardRange(head, run_params, head_shapes, 0, head_output, DropoutPlan{},
                 head_trace);
    head_output = std::move(head_trace.outputs.back());
  }

  std::vector<Tensor> samples;
  samples.reserve(num_samples);
  for (std::size_t t = 0; t < num_samples; ++t) {
    ForwardTrace trace;
    DropoutPlan plan;
    plan.sample = true;
    plan.seed = DeriveStream(seed, t);
    ForwardRange(run_spec, run_params, shapes, first_dropout, head_output, plan, trace);
    samples.push_back(std::move(trace.softmax));
  }
  return samples;
}

std::vector<Tensor> EnsembleSoftmaxes(std::span<const Model> members, const Tensor& x) {
  Require(!members.empty(), ErrorCode::kEmptySamples, "empty ensemble");
  std::vector<Tensor> out;
  out.reserve(members.size());
  for (const Model& m : members) out.push_back(Forward(m.spec, m.params, x).softmax);
  return out;
}

Tensor ExtractFeatureVector(const ForwardTrace& trace, std::size_t layer_index) {
  Require(layer_index < trace.outputs.size(), ErrorCode::kNotAFeatureLayer,
          "layer index " + std::to_string(layer_index) + " out of range");
  const Tensor& h = trace.outputs[layer_index];
  if (h.rank() == 1) return h;
  Require(h.rank() == 3 && h.shape()[0] * h.shape()[1] > 0,
          ErrorCode::kNotAFeatureLayer,
          "layer " + std::to_string(layer_index) + " output " +
              ShapeString(h.shape()) + " is not a [J,J,M] map");
  Tensor z({h.shape()[2]});
  GapForward(h.shape(), h.values().data(), z.mutable_values().data());
  return z;
}

const Tensor& PenultimateFeatures(const ModelSpec& spec, const ForwardTrace& trace) {
  const std::size_t n = spec.layers.size();
  return n >= 2 ? trace.outputs[n - 2] : trace.input;
}

Tensor LrpRelevance(const ModelSpec& spec, const ModelParams& params,
                    const Tensor& x, int target_class, double epsilon) {
  const std::vector<Shape> shapes = spec.OutputShapes();
  Require(target_class >= 0 && target_class < spec.num_classes,
          ErrorCode::kShapeMismatch, "target class out of range");
  Require(epsilon >= 0.0, ErrorCode::kInvariantViolation, "epsilon must be >= 0");
  const ForwardTrace trace = Forward(spec, params, x);

  const auto stabilise = [epsilon](double z) {
    return z + (z >= 0.0 ? epsilon : -epsilon);
  };
  const auto ratio = [&](double r, double z) {
    const double d = stabilise(z);
    return d == 0.0 ? 0.0 : r / d;
  };

  std::vector<double> relevance(static_cast<std::size_t>(spec.num_classes), 0.0);
  relevance[static_cast<std::size_t>(target_class)] =
      trace.logits[static_cast<std::size_t>(target_class)];

  for (std::size_t idx = spec.layers.size(); idx-- > 0;) {
    const Tensor& in = idx == 0 ? trace.input : trace.outputs[idx - 1];
    const Shape& in_shape = idx == 0 ? spec.input_shape : shapes[idx - 1];
    const Tensor& z = trace.outputs[idx];
    const double* a = in.values().data();
    std::vector<double> r_in(in.size(), 0.0);
    std::visit(
        Overloaded{
            [&](const DenseLayer& d) {
              const double* w = params.layers[idx].weight.values().data();
              for (std::size_t o = 0; o < d.out; ++o) {
                const double s = ratio(relevance[o], z[o]);
                if (s == 0.0) continue;
                for (std::size_t i = 0; i < d.in; ++i) r_in[i] += a[i] * w[o * d.in + i] * s;
              }
            },
            [&](const Conv2dLayer& c) {
              const std::size_t h = in_shape[0], w = in_shape[1], ic = c.in_ch;
              const std::size_t oh_n = shapes[idx][0], ow_n = shapes[idx][1];
              const std::size_t oc_n = c.out_ch, k = c.kernel;
              const double* wt = params.layers[idx].weight.values().data();
              for (std::size_t oh = 0; oh < oh_n; ++oh) {
                for (std::size_t ow = 0; ow < ow_n; ++ow) {
                  const std::size_t obase = (oh * ow_n + ow) * oc_n;
                  for (std::size_t oc = 0; oc < oc_n; ++oc) {
                    const double s = ratio(relevance[obase + oc], z[obase + oc]);
                    if (s == 0.0) continue;
                    for (std::size_t kh = 0; kh < k; ++kh) {
                      const std::ptrdiff_t ih =
                          static_cast<std::ptrdiff_t>(oh * c.stride + kh) -
                          static_cast<std::ptrdiff_t>(c.pad);
                      if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(h)) continue;
                      for (std::size_t kw = 0; kw < k; ++kw) {
                        const std::ptrdiff_t iw =
                            static_cast<std::ptrdiff_t>(ow * c.stride + kw) -
                            static_cast<std::ptrdiff_t>(c.pad);
                        if (iw < 0 || iw >= static_cast<std::ptrdiff_t>(w)) continue;
                        const std::size_t base =
                            (static_cast<std::size_t>(ih) * w + static_cast<std::size_t>(iw)) * ic;
                        const double* wk = wt + ((oc * k + kh) * k + kw) * ic;
                        for (std::size_t i = 0; i < ic; ++i) r_in[base + i] += a[base + i] * wk[i] * s;
                      }
                    }
                  }
                }
              }
            },
            [&](const ReluLayer&) { r_in = relevance; },
            [&](const MaxPoolLayer&) {
              const auto& argmax = trace.pool_argmax[idx];
              for (std::size_t o = 0; o < argmax.size(); ++o) r_in[argmax[o]] += relevance[o];
            },
            [&](const GlobalAvgPoolLayer&) {
              const std::size_t spatial = in_shape[0] * in_shape[1], ch = in_shape[2];
              const double inv = 1.0 / static_cast<double>(spatial);
              for (std::size_t c = 0; c < ch; ++c) {
                const double s = ratio(relevance[c], z[c]);
                for (std::size_t p = 0; p < spatial; ++p) r_in[p * ch + c] = a[p * ch + c] * inv * s;
              }
            },
            [&](const DropoutLayer&) { r_in = relevance; },
            [&](const FlattenLayer&) { r_in = relevance; },
        },
        spec.layers[idx]);
    relevance = std::move(r_in);
  }
  return Tensor(spec.input_shape, std::move(relevance));
}

}  // namespace oodgate
