#include "eitnet/complexity.hpp"

#include "eitnet/pipeline.hpp"

namespace eitnet {

Complexity& Complexity::operator+=(const Complexity& o) {
  weights += o.weights;
  biases += o.biases;
  macs += o.macs;
  return *this;
}

namespace {

struct Counter {
  Complexity operator()(const LinearLayer& l) const {
    return {l.in * l.out, l.bias ? l.out : 0, l.rows * l.in * l.out};
  }

  Complexity operator()(const Conv3dLayer& l) const {
    l.spec.validate();
    const Extents3 out = l.spec.output_extents(l.input);
    const std::uint64_t taps = l.spec.kernel[0] * l.spec.kernel[1] * l.spec.kernel[2];
    const std::uint64_t cells = out[0] * out[1] * out[2];
    const std::uint64_t w = l.out_channels * l.in_channels * taps;
    return {w, l.spec.bias_enabled ? l.out_channels : 0,
            cells * l.out_channels * l.in_channels * taps};
  }

  Complexity operator()(const AttentionLayer& l) const {
    const std::uint64_t d = l.d_model;
    const std::uint64_t projections = 3 * l.tokens * d * d;
    return {3 * d * d, l.bias ? 3 * d : 0, projections + 2 * l.pairs * d};
  }

  Complexity operator()(const NormLayer& l) const { return {l.features, l.features, 0}; }
  Complexity operator()(const FusionLayer& l) const {
    return {l.inputs, 0, static_cast<std::uint64_t>(l.inputs) * l.features};
  }
};

}  // namespace

Complexity count_layer(const LayerSpec& layer) { return std::visit(Counter{}, layer); }

Complexity count_params_flops(std::span<const LayerSpec> layers) {
  Complexity total;
  for (const auto& l : layers) total += count_layer(l);
  return total;
}

Complexity count_model(std::span<const NamedLayer> layers) {
  Complexity total;
  for (const auto& l : layers) {
    Complexity c = count_layer(l.layer);
    if (l.shared) c.weights = c.biases = 0;
    total += c;
  }
  return total;
}

std::vector<NamedLayer> model_layers(const ModelConfig& config, std::size_t height,
                                     std::size_t width) {
  config.validate();
  std::vector<NamedLayer> layers;
  const auto& det = config.detector;
  const ConvSpec down{{1, 3, 3}, {1, 2, 2}, {0, 1, 1}, true};
  Extents3 extent{1, height, width};
  std::size_t in = config.in_channels;
  for (std::size_t l = 0; l < det.levels; ++l) {
    layers.push_back({"detection", "backbone" + std::to_string(l),
                      Conv3dLayer{in, det.channels, extent, down}});
    extent = down.output_extents(extent);
    in = det.channels;
  }
  const std::size_t fused = det.channels * det.fused_extent * det.fused_extent;
  layers.push_back({"detection", "fusion", FusionLayer{det.levels, fused}});
  const std::size_t anchors = det.anchor_scales.size();
  layers.push_back({"detection", "box_head", LinearLayer{fused, 4 * anchors}});
  layers.push_back({"detection", "score_head", LinearLayer{fused, 2 * anchors}});

  extent = {config.frames, config.crop, config.crop};
  in = config.in_channels;
  const ConvSpec conv{{3, 3, 3}, {1, 1, 1}, {1, 1, 1}, true};
  for (std::size_t b = 0; b < config.i3d_channels.size(); ++b) {
    const std::size_t out = config.i3d_channels[b];
    layers.push_back({"spatiotemporal", "conv" + std::to_string(b),
                      Conv3dLayer{in, out, extent, conv}});
    layers.push_back({"spatiotemporal", "bn" + std::to_string(b), NormLayer{out}});
    const ConvSpec pool{{2, 2, 2}, {2, 2, 2}, {0, 0, 0}, false};
    extent = pool.output_extents(extent);
    in = out;
  }

  const std::size_t d = config.d_model;
  const std::size_t grid_tokens = config.frames * config.grid() * config.grid();
  const std::size_t tokens = grid_tokens + 1;
  layers.push_back({"temporal", "patch_embed",
                    LinearLayer{config.in_channels * config.patch * config.patch, d, true,
                                grid_tokens}});
  layers.push_back({"temporal", "summary", LinearLayer{config.feature_dim(), d}});
  const std::size_t hw = config.grid() * config.grid();
  // Summary token attends to every token; grid tokens to their group plus it.
  const std::size_t temporal_pairs = grid_tokens * (config.frames + 1) + tokens;
  const std::size_t spatial_pairs = grid_tokens * (hw + 1) + tokens;
  for (std::size_t b = 0; b < config.encoder_blocks; ++b) {
    const std::string tag = "block" + std::to_string(b);
    std::vector<std::pair<std::string, std::size_t>> passes;
    switch (config.attention) {
      case AttentionMode::joint: passes = {{"", tokens * tokens}}; break;
      case AttentionMode::temporal: passes = {{"", temporal_pairs}}; break;
      case AttentionMode::spatial: passes = {{"", spatial_pairs}}; break;
      case AttentionMode::divided:
        passes = {{".temporal", temporal_pairs}, {".spatial", spatial_pairs}};
        break;
    }
    for (std::size_t p = 0; p < passes.size(); ++p) {
      const std::string name = tag + passes[p].first;
      const bool shared = p > 0;
      layers.push_back({"temporal", name + ".attention",
                        AttentionLayer{tokens, d, passes[p].second, true}, shared});
      layers.push_back({"temporal", name + ".ln1", NormLayer{d}, shared});
      layers.push_back({"temporal", name + ".ffn1",
                        LinearLayer{d, config.ffn_hidden, true, tokens}, shared});
      layers.push_back({"temporal", name + ".ffn2",
                        LinearLayer{config.ffn_hidden, d, true, tokens}, shared});
      layers.push_back({"temporal", name + ".ln2", NormLayer{d}, shared});
    }
  }
  layers.push_back(
      {"classifier", "classifier", LinearLayer{config.representation_dim(), config.classes}});
  layers.push_back({"metrics", "pose_head", LinearLayer{config.feature_dim(), config.pose_dim()}});
  return layers;
}

}  // namespace eitnet
