// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/core.h>

#include "layerprobe/error.hpp"
#include "layerprobe/text.hpp"

namespace layerprobe {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

[[noreturn]] void syntax(std::size_t line, const std::string& msg) {
  throw Error(Errc::SyntaxError, fmt::format("line {}: {}", line, msg));
}

// key=value arguments of one `layer` line; every key must be consumed.
class LayerArgs {
 public:
  LayerArgs(std::span<const std::string_view> tokens, std::size_t line) : line_(line) {
    for (auto tok : tokens) {
      const auto eq = tok.find('=');
      if (eq == std::string_view::npos || eq == 0 || eq + 1 == tok.size()) {
        syntax(line, fmt::format("expected key=value, got \"{}\"", tok));
      }
      const auto key = tok.substr(0, eq);
      if (!values_.emplace(std::string(key), tok.substr(eq + 1)).second) {
        syntax(line, fmt::format("repeated key \"{}\"", key));
      }
    }
  }

  std::uint32_t u32(const std::string& key, std::optional<std::uint32_t> fallback, std::uint32_t min) {
    auto it = values_.find(key);
    if (it == values_.end()) {
      if (!fallback) syntax(line_, fmt::format("missing key \"{}\"", key));
      return *fallback;
    }
    auto v = text::parse_u32(it->second);
    if (!v) syntax(line_, fmt::format("\"{}\" must be a non-negative integer", key));
    if (*v < min) syntax(line_, fmt::format("\"{}\" must be >= {}", key, min));
    values_.erase(it);
    return *v;
  }

  float real(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) syntax(line_, fmt::format("missing key \"{}\"", key));
    auto v = text::parse_float(it->second);
    if (!v) syntax(line_, fmt::format("\"{}\" must be a finite number", key));
    values_.erase(it);
    return *v;
  }

  void finish() const {
    if (!values_.empty()) syntax(line_, fmt::format("unknown key \"{}\"", values_.begin()->first));
  }

 private:
  std::size_t line_;
  std::map<std::string, std::string_view> values_;
};

LayerOp parse_layer_op(std::string_view kind, std::span<const std::string_view> tokens, std::size_t line) {
  LayerArgs args(tokens, line);
  LayerOp op;
  if (kind == "Conv2D") {
    Conv2D c;
    c.out_channels = args.u32("out", std::nullopt, 1);
    c.kernel_h = args.u32("kh", std::nullopt, 1);
    c.kernel_w = args.u32("kw", std::nullopt, 1);
    c.stride = args.u32("stride", 1, 1);
    c.pad = args.u32("pad", 0, 0);
    op = c;
  } else if (kind == "MaxPool2D") {
    MaxPool2D p;
    p.kernel = args.u32("kernel", std::nullopt, 1);
    p.stride = args.u32("stride", p.kernel, 1);
    const auto ceil = args.u32("ceil", 0, 0);
    if (ceil > 1) syntax(line, "\"ceil\" must be 0 or 1");
    p.ceil_mode = ceil == 1;
    op = p;
  } else if (kind == "PReLU") {
    op = PReLU{};
  } else if (kind == "FullyConnected") {
    op = FullyConnected{args.u32("out", std::nullopt, 1)};
  } else if (kind == "Dropout") {
    const float rate = args.real("rate");
    if (!(rate >= 0.0f && rate < 1.0f)) syntax(line, "dropout rate must be in [0, 1)");
    op = Dropout{rate};
  } else if (kind == "Softmax") {
    op = Softmax{};
  } else {
    throw Error(Errc::UnknownLayerKind, fmt::format("line {}: \"{}\"", line, kind));
  }
  args.finish();
  return op;
}

bool is_fc(const LayerOp& op) { return std::holds_alternative<FullyConnected>(op); }

void validate_taps(const ModelSpec& spec, const std::map<RepKind, std::size_t>& tap_lines) {
  std::vector<std::size_t> fc_layers;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (is_fc(spec.layers[i].op)) fc_layers.push_back(i);
  }
  const std::size_t first_fc = fc_layers.empty() ? spec.layers.size() : fc_layers.front();

  for (const auto& [kind, layer] : spec.taps) {
    const auto line = tap_lines.at(kind);
    const auto idx = spec.layer_index(layer);
    if (idx == std::string::npos) {
      throw Error(Errc::BadTap, fmt::format("line {}: tap {} references unknown layer \"{}\"", line,
                                            kind_tag(kind), layer));
    }
    if (is_spatial(kind)) {
      if (idx >= first_fc) {
        throw Error(Errc::BadTap, fmt::format("line {}: spatial tap {} on \"{}\" is not before the first "
                                              "FullyConnected layer",
                                              line, kind_tag(kind), layer));
      }
      continue;
    }
    if (fc_layers.size() != 2) {
      throw Error(Errc::BadTap, fmt::format("line {}: tap {} needs exactly two FullyConnected layers, found {}",
                                            line, kind_tag(kind), fc_layers.size()));
    }
    std::size_t source = idx;
    while (source > 0 && (std::holds_alternative<PReLU>(spec.layers[source].op) ||
                          std::holds_alternative<Dropout>(spec.layers[source].op))) {
      --source;
    }
    const std::size_t want = fc_layers[kind == RepKind::FC1 ? 0 : 1];
    if (source != want) {
      throw Error(Errc::BadTap, fmt::format("line {}: tap {} on \"{}\" does not follow FullyConnected \"{}\"",
                                            line, kind_tag(kind), layer, spec.layers[want].name));
    }
  }
}

}  // namespace

std::string_view layer_kind_name(const LayerOp& op) noexcept {
  return std::visit(Overloaded{
                        [](const Conv2D&) { return std::string_view("Conv2D"); },
                        [](const MaxPool2D&) { return std::string_view("MaxPool2D"); },
                        [](const PReLU&) { return std::string_view("PReLU"); },
                        [](const FullyConnected&) { return std::string_view("FullyConnected"); },
                        [](const Dropout&) { return std::string_view("Dropout"); },
                        [](const Softmax&) { return std::string_view("Softmax"); },
                    },
                    op);
}

std::size_t ModelSpec::layer_index(std::string_view name) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].name == name) return i;
  }
  return std::string::npos;
}

ModelSpec parse_manifest(std::string_view doc) {
  ModelSpec spec;
  bool have_input = false;
  std::size_t mean_line = 0;
  std::map<std::string, std::size_t> seen_names;
  std::map<RepKind, std::size_t> tap_lines;

  const auto all = text::lines(doc);
  for (std::size_t n = 0; n < all.size(); ++n) {
    const std::size_t line = n + 1;
    auto body = all[n];
    if (auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    const auto tok = text::fields(body);
    if (tok.empty()) continue;

    if (tok[0] == "input") {
      if (have_input) syntax(line, "duplicate input directive");
      if (tok.size() != 4) syntax(line, "expected: input C H W");
      auto c = text::parse_u32(tok[1]), h = text::parse_u32(tok[2]), w = text::parse_u32(tok[3]);
      if (!c || !h || !w || *c == 0 || *h == 0 || *w == 0) syntax(line, "input dims must be positive integers");
      spec.input = {*c, *h, *w};
      have_input = true;
    } else if (tok[0] == "mean") {
      if (mean_line) syntax(line, "duplicate mean directive");
      if (tok.size() < 2) syntax(line, "expected: mean v1 .. vC");
      for (std::size_t i = 1; i < tok.size(); ++i) {
        auto v = text::parse_float(tok[i]);
        if (!v) syntax(line, fmt::format("bad mean value \"{}\"", tok[i]));
        spec.channel_means.push_back(*v);
      }
      mean_line = line;
    } else if (tok[0] == "layer") {
      if (tok.size() < 3) syntax(line, "expected: layer <name> <kind> [key=value ...]");
      const std::string name(tok[1]);
      if (auto [it, fresh] = seen_names.emplace(name, line); !fresh) {
        throw Error(Errc::DuplicateName,
                    fmt::format("line {}: layer \"{}\" already defined on line {}", line, name, it->second));
      }
      spec.layers.push_back({name, parse_layer_op(tok[2], std::span(tok).subspan(3), line)});
    } else if (tok[0] == "tap") {
      if (tok.size() != 3) syntax(line, "expected: tap <kind> <layer>");
      auto kind = kind_from_tag(tok[1]);
      if (!kind) {
        throw Error(Errc::BadTap, fmt::format("line {}: unknown representation kind \"{}\"", line, tok[1]));
      }
      if (spec.taps.count(*kind)) {
        throw Error(Errc::BadTap, fmt::format("line {}: tap {} declared twice", line, tok[1]));
      }
      spec.taps.emplace(*kind, std::string(tok[2]));
      tap_lines.emplace(*kind, line);
    } else {
      syntax(line, fmt::format("unknown directive \"{}\"", tok[0]));
    }
  }

  if (!have_input) syntax(all.size() + 1, "missing input directive");
  if (spec.layers.empty()) syntax(all.size() + 1, "no layers declared");
  if (mean_line == 0) {
    spec.channel_means.assign(spec.input.c, 0.0f);
  } else if (spec.channel_means.size() != spec.input.c) {
    syntax(mean_line, fmt::format("mean needs {} values, got {}", spec.input.c, spec.channel_means.size()));
  }
  validate_taps(spec, tap_lines);
  return spec;
}

std::string serialize_manifest(const ModelSpec& spec) {
  std::string out = fmt::format("input {} {} {}\nmean", spec.input.c, spec.input.h, spec.input.w);
  for (float m : spec.channel_means) out += " " + text::format_float(m);
  out += '\n';
  for (const auto& layer : spec.layers) {
    out += fmt::format("layer {} {}", layer.name, layer_kind_name(layer.op));
    std::visit(Overloaded{
                   [&](const Conv2D& c) {
                     out += fmt::format(" out={} kh={} kw={} stride={} pad={}", c.out_channels, c.kernel_h,
                                        c.kernel_w, c.stride, c.pad);
                   },
                   [&](const MaxPool2D& p) {
                     out += fmt::format(" kernel={} stride={} ceil={}", p.kernel, p.stride, p.ceil_mode ? 1 : 0);
                   },
                   [&](const FullyConnected& f) { out += fmt::format(" out={}", f.out_dim); },
                   [&](const Dropout& d) { out += " rate=" + text::format_float(d.rate); },
                   [](const auto&) {},
               },
               layer.op);
    out += '\n';
  }
  for (const auto& [kind, layer] : spec.taps) out += fmt::format("tap {} {}\n", kind_tag(kind), layer);
  return out;
}

std::vector<LayerShape> infer_shapes(const ModelSpec& spec) {
  std::vector<LayerShape> plan;
  plan.reserve(spec.layers.size());
  Dims cur = spec.input;
  auto underflow = [](const LayerDesc& l, std::int64_t h, std::int64_t w) {
    throw Error(Errc::ShapeUnderflow, fmt::format("layer \"{}\": output {}x{}", l.name, h, w));
  };
  for (const auto& layer : spec.layers) {
    std::visit(Overloaded{
                   [&](const Conv2D& c) {
                     const auto h = (std::int64_t{cur.h} + 2 * std::int64_t{c.pad} - c.kernel_h);
                     const auto w = (std::int64_t{cur.w} + 2 * std::int64_t{c.pad} - c.kernel_w);
                     if (h < 0 || w < 0) underflow(layer, h < 0 ? 0 : h / c.stride + 1, w < 0 ? 0 : w / c.stride + 1);
                     cur = {c.out_channels, static_cast<std::uint32_t>(h / c.stride + 1),
                            static_cast<std::uint32_t>(w / c.stride + 1)};
                   },
                   [&](const MaxPool2D& p) {
                     const auto h = std::int64_t{cur.h} - p.kernel;
                     const auto w = std::int64_t{cur.w} - p.kernel;
                     if (h < 0 || w < 0) underflow(layer, h < 0 ? 0 : h, w < 0 ? 0 : w);
                     auto out = [&](std::int64_t span) {
                       return static_cast<std::uint32_t>((p.ceil_mode ? (span + p.stride - 1) / p.stride
                                                                      : span / p.stride) +
                                                         1);
                     };
                     const auto oh = out(h), ow = out(w);
                     if (std::int64_t{oh - 1} * p.stride >= cur.h || std::int64_t{ow - 1} * p.stride >= cur.w) {
                       throw Error(Errc::ShapeMismatch,
                                   fmt::format("layer \"{}\": last pool window starts outside the input", layer.name));
                     }
                     cur = {cur.c, oh, ow};
                   },
                   [&](const FullyConnected& f) { cur = {f.out_dim, 1, 1}; },
                   [](const auto&) {},
               },
               layer.op);
    plan.push_back({layer.name, cur});
  }
  return plan;
}

std::vector<ParameterSlot> parameter_plan(const ModelSpec& spec) {
  const auto shapes = infer_shapes(spec);
  std::vector<ParameterSlot> slots;
  Dims in = spec.input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& layer = spec.layers[i];
    std::visit(Overloaded{
                   [&](const Conv2D& c) {
                     slots.push_back({layer.name + ".weight", {c.out_channels, in.c, c.kernel_h, c.kernel_w}});
                     slots.push_back({layer.name + ".bias", {c.out_channels}});
                   },
                   [&](const FullyConnected& f) {
                     slots.push_back({layer.name + ".weight", {f.out_dim, static_cast<std::uint32_t>(in.size())}});
                     slots.push_back({layer.name + ".bias", {f.out_dim}});
                   },
                   [&](const PReLU&) { slots.push_back({layer.name + ".slope", {in.c}}); },
                   [](const auto&) {},
               },
               layer.op);
    in = shapes[i].out;
  }
  return slots;
}

namespace {

bool shape_accepted(const ParameterSlot& slot, const std::vector<std::uint32_t>& shape) {
  if (shape == slot.shape) return true;
  const bool is_slope = slot.name.size() > 6 && slot.name.ends_with(".slope");
  return is_slope && shape == std::vector<std::uint32_t>{1};
}

std::string shape_str(const std::vector<std::uint32_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace

Model::Model(ModelSpec spec, std::map<std::string, Parameter> params)
    : spec_(std::move(spec)), shapes_(infer_shapes(spec_)), params_(std::move(params)) {
  const auto plan = parameter_plan(spec_);
  for (const auto& slot : plan) {
    auto it = params_.find(slot.name);
    if (it == params_.end()) throw Error(Errc::MissingParameter, slot.name);
    const auto& p = it->second;
    std::size_t count = 1;
    for (auto d : p.shape) count *= d;
    if (!shape_accepted(slot, p.shape) || count != p.values.size()) {
      throw Error(Errc::ShapeMismatch, fmt::format("{}: expected {}, got {} with {} values", slot.name,
                                                   shape_str(slot.shape), shape_str(p.shape), p.values.size()));
    }
    if (std::any_of(p.values.begin(), p.values.end(), [](float v) { return !std::isfinite(v); })) {
      throw Error(Errc::NonFiniteWeight, slot.name);
    }
  }
  if (params_.size() != plan.size()) {
    for (const auto& [name, p] : params_) {
      if (std::none_of(plan.begin(), plan.end(), [&](const auto& s) { return s.name == name; })) {
        throw Error(Errc::InvalidArgument, fmt::format("unexpected parameter \"{}\"", name));
      }
    }
  }
}

const Parameter& Model::param(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(Errc::MissingParameter, name);
  return it->second;
}

Model load_weights(const ModelSpec& spec, std::span<const std::uint8_t> blob) {
  ByteReader r(blob);
  r.expect_magic("NNW1");
  std::map<std::string, Parameter> params;
  for (const auto& slot : parameter_plan(spec)) {
    if (r.at_end()) throw Error(Errc::MissingParameter, fmt::format("{} (blob ends at offset {})", slot.name, r.offset()));
    const auto record_at = r.offset();
    const auto name_len = r.u16("parameter name length");
    const auto name = r.text(name_len, "parameter name");
    if (name != slot.name) {
      throw Error(Errc::MissingParameter,
                  fmt::format("{} (offset {} holds \"{}\")", slot.name, record_at, name));
    }
    Parameter p;
    const auto rank = r.u8("parameter rank");
    if (rank < 1 || rank > 4) throw Error(Errc::ShapeMismatch, fmt::format("{}: rank {}", name, rank));
    std::size_t count = 1;
    for (unsigned i = 0; i < rank; ++i) {
      p.shape.push_back(r.u32("parameter dim"));
      count *= p.shape.back();
    }
    if (!shape_accepted(slot, p.shape)) {
      throw Error(Errc::ShapeMismatch,
                  fmt::format("{}: expected {}, blob has {}", name, shape_str(slot.shape), shape_str(p.shape)));
    }
    p.values = r.f32s(count, name);
    if (std::any_of(p.values.begin(), p.values.end(), [](float v) { return !std::isfinite(v); })) {
      throw Error(Errc::NonFiniteWeight, name);
    }
    params.emplace(name, std::move(p));
  }
  r.expect_end();
  return Model(spec, std::move(params));
}

Bytes encode_weights(const Model& model) {
  ByteWriter w;
  w.text("NNW1");
  for (const auto& slot : parameter_plan(model.spec())) {
    const auto& p = model.param(slot.name);
    w.u16(static_cast<std::uint16_t>(slot.name.size()));
    w.text(slot.name);
    w.u8(static_cast<std::uint8_t>(p.shape.size()));
    for (auto d : p.shape) w.u32(d);
    w.f32s(p.values);
  }
  return w.take();
}

Model load_model(const std::filesystem::path& manifest, const std::filesystem::path& weights) {
  const auto spec = parse_manifest(read_text_file(manifest));
  return load_weights(spec, read_file(weights));
}

}  // namespace layerprobe
