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

#include <fstream>
#include <iterator>

#include "json.hpp"
#include "oodgate/error.h"
#include "oodgate/model.h"
#include "oodgate/npy.h"

namespace oodgate {

using Json = nlohmann::ordered_json;

namespace {

Json LayerToJson(const LayerSpec& layer) {
  Json j;
  j["type"] = LayerTypeName(layer);
  if (const auto* d = std::get_if<DenseLayer>(&layer)) {
    j["in"] = d->in;
    j["out"] = d->out;
  } else if (const auto* c = std::get_if<Conv2dLayer>(&layer)) {
    j["in_ch"] = c->in_ch;
    j["out_ch"] = c->out_ch;
    j["kernel"] = c->kernel;
    j["stride"] = c->stride;
    j["pad"] = c->pad;
  } else if (const auto* m = std::get_if<MaxPoolLayer>(&layer)) {
    j["kernel"] = m->kernel;
    j["stride"] = m->stride;
  } else if (const auto* dr = std::get_if<DropoutLayer>(&layer)) {
    j["p"] = dr->p;
  }
  return j;
}

LayerSpec LayerFromJson(const Json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "dense") return DenseLayer{j.at("in").get<std::size_t>(), j.at("out").get<std::size_t>()};
  if (type == "conv2d") {
    return Conv2dLayer{j.at("in_ch").get<std::size_t>(), j.at("out_ch").get<std::size_t>(),
                       j.at("kernel").get<std::size_t>(), j.value("stride", std::size_t{1}),
                       j.value("pad", std::size_t{0})};
  }
  if (type == "relu") return ReluLayer{};
  if (type == "maxpool") {
    return MaxPoolLayer{j.at("kernel").get<std::size_t>(), j.at("stride").get<std::size_t>()};
  }
  if (type == "global_avg_pool") return GlobalAvgPoolLayer{};
  if (type == "dropout") return DropoutLayer{j.at("p").get<double>()};
  if (type == "flatten") return FlattenLayer{};
  throw Error(ErrorCode::kSchemaMismatch, "unknown layer type '" + type + "'");
}

}  // namespace

std::string SpecToJson(const ModelSpec& spec) {
  Json j;
  j["input_shape"] = spec.input_shape;
  j["num_classes"] = spec.num_classes;
  j["layers"] = Json::array();
  for (const LayerSpec& l : spec.layers) j["layers"].push_back(LayerToJson(l));
  return j.dump(2) + "\n";
}

ModelSpec SpecFromJson(const std::string& text) {
  try {
    const Json j = Json::parse(text);
    ModelSpec spec;
    spec.input_shape = j.at("input_shape").get<Shape>();
    spec.num_classes = j.at("num_classes").get<int>();
    for (const Json& l : j.at("layers")) spec.layers.push_back(LayerFromJson(l));
    spec.Validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchemaMismatch, std::string("model spec: ") + e.what());
  }
}

void SaveModel(const Model& model, const std::filesystem::path& dir) {
  ValidateParams(model.spec, model.params);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "model.json", std::ios::binary | std::ios::trunc);
    Require(out.good(), ErrorCode::kIoFailure, "cannot write " + (dir / "model.json").string());
    out << SpecToJson(model.spec);
  }
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (!HasParams(model.spec.layers[i])) continue;
    WriteArrayFile(model.params.layers[i].weight, dir / (std::to_string(i) + ".w.npy"));
    WriteArrayFile(model.params.layers[i].bias, dir / (std::to_string(i) + ".b.npy"));
  }
}

Model LoadModel(const std::filesystem::path& dir) {
  std::ifstream in(dir / "model.json", std::ios::binary);
  Require(in.good(), ErrorCode::kIoFailure, "cannot open " + (dir / "model.json").string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Model model;
  model.spec = SpecFromJson(text);
  model.params.layers.resize(model.spec.layers.size());
  for (std::size_t i = 0; i < model.spec.layers.size(); ++i) {
    if (!HasParams(model.spec.layers[i])) continue;
    model.params.layers[i].weight =
        ReadArrayFile(dir / (std::to_string(i) + ".w.npy")).WithDType(DType::kFloat64);
    model.params.layers[i].bias =
        ReadArrayFile(dir / (std::to_string(i) + ".b.npy")).WithDType(DType::kFloat64);
  }
  ValidateParams(model.spec, model.params);
  return model;
}

}  // namespace oodgate
