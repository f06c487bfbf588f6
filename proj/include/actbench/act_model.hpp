#pragma once

// Action-chunking CVAE policy.
//
// The network maps one observation (per-camera RGB images plus a masked
// proprioceptive state vector) and a style latent z to a chunk of the next
// k actions. Training uses a style encoder that reads the demonstrated
// state/action window and produces a Gaussian posterior over z; inference
// decodes with z fixed at the prior mean (zero).
//
// Layout:
//   tokens  = per-camera CNN tokens || state token || z token, plus fixed
//             sinusoidal position encodings
//   memory  = pre-LN transformer encoder over the tokens
//   chunk   = pre-LN transformer decoder: k learned queries cross-attend
//             into the memory, then a linear head emits (k, action_dim)
//
// All model functions build onto a caller-owned Graph so one training step
// can batch several samples into a single backward pass. Parameters live in
// ACTParams as named tensors; BoundModel binds them to a graph as leaves.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "actbench/dataset.hpp"
#include "actbench/graph.hpp"
#include "actbench/tensor.hpp"

namespace actbench {

// Tokenizer channel widths after conv1 and conv2; conv3 emits embed_dim.
inline constexpr int kTokenizerC1 = 8;
inline constexpr int kTokenizerC2 = 16;

struct ModelConfig {
  int state_dim = 0;
  int action_dim = 0;
  int chunk_size = 16;  // k
  int latent_dim = 8;
  int embed_dim = 64;  // d, must be even and divisible by heads
  int ffn_dim = 128;
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int image_h = 32;
  int image_w = 32;
  int cameras = 0;
  double kl_weight = 10.0;  // beta
  std::uint64_t seed = 0;

  void validate() const;  // throws std::invalid_argument

  // Spatial extent after the three stride-2 convolutions.
  int token_rows() const;
  int token_cols() const;
  int tokens_per_camera() const;
  // Camera tokens plus the state token and the z token.
  int encoder_tokens() const;
};

// Named parameter store. Entry order is fixed by init_model and is also the
// checkpoint block order.
struct ACTParams {
  std::vector<std::pair<std::string, Tensor>> entries;

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool has(const std::string& name) const;
  std::size_t scalar_count() const;
};

// Scaled-uniform initialization: matrices and embeddings draw from
// U(-s, s) with s = sqrt(6 / (fan_in + fan_out)); convolution fans count
// the full receptive field. Biases start at zero, layer-norm gains at one.
// Draw order equals entry order, so a seed fixes every weight.
ACTParams init_model(const ModelConfig& config);

// One graph's view of the parameters (each bound as a gradient leaf).
class BoundModel {
 public:
  BoundModel(Graph& graph, const ModelConfig& config, const ACTParams& params);

  Var at(const std::string& name) const;  // throws std::out_of_range
  Graph& graph() const { return *graph_; }
  const ModelConfig& config() const { return *config_; }

 private:
  Graph* graph_;
  const ModelConfig* config_;
  std::map<std::string, Var> vars_;
};

// Fixed sinusoidal position table, shape (n, d):
// pe(p, 2i) = sin(p / 10000^(2i/d)), pe(p, 2i+1) = cos of the same angle.
Tensor sinusoidal_positions(int n, int d);

// Per-camera tokens, each (tokens_per_camera, d). Images are (3, H, W)
// doubles in [0, 1]; count and sizes must match the config.
std::vector<Var> visual_tokenize(const BoundModel& m, const std::vector<Var>& images);

// Gaussian posterior over the style latent, mu and logvar each (1, latent_dim).
// logvar is clamped to [-10, 10].
struct StylePosterior {
  Var mu;
  Var logvar;
};

// states (T, state_dim), actions (T, action_dim), T >= 1. The encoder pools
// a leading CLS token over [CLS, first-state token, action tokens].
StylePosterior encode_style(const BoundModel& m, Var states, Var actions);

// Full decode: (k, action_dim) chunk for one observation and latent.
Var forward_chunk(const BoundModel& m, const std::vector<Var>& images, Var state, Var z);

struct ChunkLoss {
  Var total;
  Var recon;  // mean |pred - target|
  Var kl;     // KL(N(mu, sigma^2) || N(0, I))
};

// total = recon + beta * kl; with beta == 0 total aliases recon exactly.
ChunkLoss chunk_loss(Graph& graph, Var pred, Var target, const StylePosterior& post,
                     double beta);

// Value-level results for the rollout path.
struct ActionChunk {
  Tensor values;  // (k, action_dim)
};

struct LatentPosterior {
  Tensor mu;      // (latent_dim)
  Tensor logvar;  // (latent_dim), clamped to [-10, 10]
};

// Deterministic inference decode with z at the prior mean (zero vector).
// Builds a private graph; parameters are not modified.
ActionChunk predict_chunk(const ModelConfig& config, const ACTParams& params,
                          const std::vector<Tensor>& images, const Tensor& state);

// Converts one u8 RGB camera frame (H, W, 3) to a (3, H, W) tensor in [0, 1].
Tensor image_frame_tensor(const StreamData& camera, std::uint32_t frame);

}  // namespace actbench
