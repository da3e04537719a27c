// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <string_view>

#include "layerprobe/error.hpp"
#include "layerprobe/model.hpp"
#include "layerprobe/tensor.hpp"

namespace testutil {

// Code of the Error raised by fn, or nullopt-like sentinel when none is raised.
struct Caught {
  bool raised = false;
  layerprobe::Errc code = layerprobe::Errc::InvalidArgument;
  std::string message;
};

inline Caught catch_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const layerprobe::Error& e) {
    return {true, e.code(), e.what()};
  }
  return {};
}

inline layerprobe::Tensor random_tensor(std::mt19937_64& rng, layerprobe::Dims d, float lo = -1.0f,
                                        float hi = 1.0f) {
  std::uniform_real_distribution<float> u(lo, hi);
  std::vector<float> v(d.size());
  for (auto& x : v) x = u(rng);
  return layerprobe::Tensor(d, std::move(v));
}

// Fills every slot of the parameter plan with uniform values; slopes get 0.25.
inline layerprobe::Model random_model(const layerprobe::ModelSpec& spec, std::uint64_t seed, float scale = 0.5f) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(-scale, scale);
  std::map<std::string, layerprobe::Parameter> params;
  for (const auto& slot : layerprobe::parameter_plan(spec)) {
    std::size_t n = 1;
    for (auto d : slot.shape) n *= d;
    std::vector<float> v(n);
    const bool slope = slot.name.ends_with(".slope");
    for (auto& x : v) x = slope ? 0.25f : u(rng);
    params.emplace(slot.name, layerprobe::Parameter{slot.shape, std::move(v)});
  }
  return layerprobe::Model(spec, std::move(params));
}

// A fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(std::string_view name) {
  auto p = std::filesystem::temp_directory_path() / "layerprobe_tests" / std::string(name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testutil
