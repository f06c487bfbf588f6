#include "actbench/act_model.hpp"

#include <cmath>
#include <stdexcept>

#include "actbench/rng.hpp"

namespace actbench {

namespace {

// Output extent of one stride-2, pad-1, 3x3 convolution.
int conv_step(int in) { return (in + 2 - 3) / 2 + 1; }

int conv_ladder(int in) { return conv_step(conv_step(conv_step(in))); }

double glorot_bound(int fan_in, int fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

void fill_uniform(Tensor& t, Rng& rng, double bound) {
  for (Eigen::Index i = 0; i < t.data.size(); ++i) t.data[i] = rng.uniform(-bound, bound);
}

Var ln(const BoundModel& m, const std::string& name, Var x) {
  return layer_norm(x, m.at(name + ".g"), m.at(name + ".b"), 1);
}

// Multi-head attention: queries from q_in, keys and values from kv_in.
Var attention(const BoundModel& m, const std::string& p, Var q_in, Var kv_in) {
  const int d = m.config().embed_dim;
  const int h = m.config().heads;
  const int dh = d / h;
  Var q = add(matmul(q_in, m.at(p + ".wq")), m.at(p + ".bq"));
  Var k = add(matmul(kv_in, m.at(p + ".wk")), m.at(p + ".bk"));
  Var v = add(matmul(kv_in, m.at(p + ".wv")), m.at(p + ".bv"));
  const double inv_sqrt_dh = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<Var> heads;
  heads.reserve(static_cast<std::size_t>(h));
  for (int i = 0; i < h; ++i) {
    Var qh = slice(q, 1, i * dh, dh);
    Var kh = slice(k, 1, i * dh, dh);
    Var vh = slice(v, 1, i * dh, dh);
    Var scores = scale(matmul(qh, transpose(kh)), inv_sqrt_dh);
    heads.push_back(matmul(softmax(scores, 1), vh));
  }
  return add(matmul(concat(heads, 1), m.at(p + ".wo")), m.at(p + ".bo"));
}

Var ffn(const BoundModel& m, const std::string& p, Var x) {
  Var hidden = relu(add(matmul(x, m.at(p + ".ffn.w1")), m.at(p + ".ffn.b1")));
  return add(matmul(hidden, m.at(p + ".ffn.w2")), m.at(p + ".ffn.b2"));
}

// Pre-LN self-attention block.
Var encoder_block(const BoundModel& m, const std::string& p, Var x) {
  Var y = ln(m, p + ".ln1", x);
  x = add(x, attention(m, p + ".attn", y, y));
  return add(x, ffn(m, p, ln(m, p + ".ln2", x)));
}

// Pre-LN block with self-attention, cross-attention into memory, then FFN.
Var decoder_block(const BoundModel& m, const std::string& p, Var x, Var memory) {
  Var y = ln(m, p + ".ln1", x);
  x = add(x, attention(m, p + ".self", y, y));
  x = add(x, attention(m, p + ".cross", ln(m, p + ".ln2", x), memory));
  return add(x, ffn(m, p, ln(m, p + ".ln3", x)));
}

// clamp(x) = -b + relu(2b - relu(b - x)); identity on (-b, b), flat outside.
Var clamp_sym(Graph& g, Var x, double bound) {
  const Shape shp = g.val(x).shape;
  Var b = g.value(Tensor::full(shp, bound));
  Var two_b = g.value(Tensor::full(shp, 2.0 * bound));
  Var neg_b = g.value(Tensor::full(shp, -bound));
  Var low = relu(add(scale(x, -1.0), b));
  return add(relu(add(scale(low, -1.0), two_b)), neg_b);
}

// Accepts (n) or (1, n); returns a (1, n) row.
Var as_row(Graph& g, Var v, int n, const char* what) {
  const Tensor& t = g.val(v);
  if (t.shape == Shape{n}) return reshape(v, {1, n});
  if (t.shape == Shape{1, n}) return v;
  throw ShapeError(std::string(what) + " must have " + std::to_string(n) +
                   " entries, got shape " + shape_str(t.shape));
}

}  // namespace

void ModelConfig::validate() const {
  auto positive = [](int v, const char* name) {
    if (v < 1) throw std::invalid_argument(std::string(name) + " must be positive");
  };
  positive(state_dim, "state_dim");
  positive(action_dim, "action_dim");
  positive(chunk_size, "chunk_size");
  positive(latent_dim, "latent_dim");
  positive(embed_dim, "embed_dim");
  positive(ffn_dim, "ffn_dim");
  positive(encoder_layers, "encoder_layers");
  positive(decoder_layers, "decoder_layers");
  positive(heads, "heads");
  positive(image_h, "image_h");
  positive(image_w, "image_w");
  positive(cameras, "cameras");
  if (embed_dim % heads != 0)
    throw std::invalid_argument("embed_dim must be divisible by heads");
  if (embed_dim % 2 != 0)
    throw std::invalid_argument("embed_dim must be even for sinusoidal positions");
  if (!(kl_weight >= 0.0))
    throw std::invalid_argument("kl_weight must be non-negative");
}

int ModelConfig::token_rows() const { return conv_ladder(image_h); }
int ModelConfig::token_cols() const { return conv_ladder(image_w); }
int ModelConfig::tokens_per_camera() const { return token_rows() * token_cols(); }
int ModelConfig::encoder_tokens() const { return cameras * tokens_per_camera() + 2; }

Tensor& ACTParams::at(const std::string& name) {
  for (auto& [key, tensor] : entries)
    if (key == name) return tensor;
  throw std::out_of_range("unknown parameter '" + name + "'");
}

const Tensor& ACTParams::at(const std::string& name) const {
  for (const auto& [key, tensor] : entries)
    if (key == name) return tensor;
  throw std::out_of_range("unknown parameter '" + name + "'");
}

bool ACTParams::has(const std::string& name) const {
  for (const auto& [key, tensor] : entries)
    if (key == name) return true;
  return false;
}

std::size_t ACTParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [key, tensor] : entries) n += static_cast<std::size_t>(tensor.size());
  return n;
}

ACTParams init_model(const ModelConfig& config) {
  config.validate();
  const int d = config.embed_dim;
  ACTParams params;
  Rng rng(config.seed);

  auto add_matrix = [&](const std::string& name, int in, int out) {
    Tensor t = Tensor::zeros({in, out});
    fill_uniform(t, rng, glorot_bound(in, out));
    params.entries.emplace_back(name, std::move(t));
  };
  auto add_bias = [&](const std::string& name, int n) {
    params.entries.emplace_back(name, Tensor::zeros({n}));
  };
  auto add_conv = [&](const std::string& name, int filters, int in_ch) {
    Tensor t = Tensor::zeros({filters, in_ch, 3, 3});
    fill_uniform(t, rng, glorot_bound(in_ch * 9, filters * 9));
    params.entries.emplace_back(name, std::move(t));
  };
  auto add_ln = [&](const std::string& prefix) {
    params.entries.emplace_back(prefix + ".g", Tensor::full({d}, 1.0));
    params.entries.emplace_back(prefix + ".b", Tensor::zeros({d}));
  };
  auto add_embed = [&](const std::string& name, int rows) {
    Tensor t = Tensor::zeros({rows, d});
    fill_uniform(t, rng, glorot_bound(d, d));
    params.entries.emplace_back(name, std::move(t));
  };
  auto add_attention = [&](const std::string& prefix) {
    for (const char* w : {"q", "k", "v", "o"}) {
      add_matrix(prefix + ".w" + w, d, d);
      add_bias(prefix + ".b" + w, d);
    }
  };
  auto add_ffn = [&](const std::string& prefix) {
    add_matrix(prefix + ".ffn.w1", d, config.ffn_dim);
    add_bias(prefix + ".ffn.b1", config.ffn_dim);
    add_matrix(prefix + ".ffn.w2", config.ffn_dim, d);
    add_bias(prefix + ".ffn.b2", d);
  };
  auto add_encoder_blocks = [&](const std::string& base) {
    for (int l = 0; l < config.encoder_layers; ++l) {
      const std::string p = base + std::to_string(l);
      add_ln(p + ".ln1");
      add_attention(p + ".attn");
      add_ln(p + ".ln2");
      add_ffn(p);
    }
  };

  for (int cam = 0; cam < config.cameras; ++cam) {
    const std::string base = "cam" + std::to_string(cam);
    add_conv(base + ".conv1.w", kTokenizerC1, 3);
    add_bias(base + ".conv1.b", kTokenizerC1);
    add_conv(base + ".conv2.w", kTokenizerC2, kTokenizerC1);
    add_bias(base + ".conv2.b", kTokenizerC2);
    add_conv(base + ".conv3.w", d, kTokenizerC2);
    add_bias(base + ".conv3.b", d);
  }

  add_matrix("state_proj.w", config.state_dim, d);
  add_bias("state_proj.b", d);
  add_matrix("z_proj.w", config.latent_dim, d);
  add_bias("z_proj.b", d);

  add_encoder_blocks("enc");
  add_ln("enc_ln");

  add_embed("query_embed", config.chunk_size);
  for (int l = 0; l < config.decoder_layers; ++l) {
    const std::string p = "dec" + std::to_string(l);
    add_ln(p + ".ln1");
    add_attention(p + ".self");
    add_ln(p + ".ln2");
    add_attention(p + ".cross");
    add_ln(p + ".ln3");
    add_ffn(p);
  }
  add_ln("dec_ln");
  add_matrix("action_head.w", d, config.action_dim);
  add_bias("action_head.b", config.action_dim);

  add_embed("style.cls", 1);
  add_matrix("style.state_proj.w", config.state_dim, d);
  add_bias("style.state_proj.b", d);
  add_matrix("style.action_proj.w", config.action_dim, d);
  add_bias("style.action_proj.b", d);
  add_encoder_blocks("style.enc");
  add_ln("style.enc_ln");
  add_matrix("style.latent_head.w", d, 2 * config.latent_dim);
  add_bias("style.latent_head.b", 2 * config.latent_dim);

  return params;
}

BoundModel::BoundModel(Graph& graph, const ModelConfig& config, const ACTParams& params)
    : graph_(&graph), config_(&config) {
  config.validate();
  for (const auto& [name, tensor] : params.entries) vars_.emplace(name, graph.param(tensor));
}

Var BoundModel::at(const std::string& name) const {
  auto it = vars_.find(name);
  if (it == vars_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor sinusoidal_positions(int n, int d) {
  if (n < 1 || d < 2 || d % 2 != 0)
    throw std::invalid_argument("sinusoidal_positions needs n >= 1 and even d >= 2");
  Tensor pe = Tensor::zeros({n, d});
  for (int pos = 0; pos < n; ++pos) {
    for (int i = 0; i < d / 2; ++i) {
      const double angle =
          pos * std::pow(10000.0, -2.0 * i / static_cast<double>(d));
      pe.data[pos * d + 2 * i] = std::sin(angle);
      pe.data[pos * d + 2 * i + 1] = std::cos(angle);
    }
  }
  return pe;
}

std::vector<Var> visual_tokenize(const BoundModel& m, const std::vector<Var>& images) {
  const ModelConfig& c = m.config();
  Graph& g = m.graph();
  if (static_cast<int>(images.size()) != c.cameras)
    throw ShapeError("expected " + std::to_string(c.cameras) + " camera images, got " +
                     std::to_string(images.size()));
  const Shape want = {3, c.image_h, c.image_w};
  std::vector<Var> tokens;
  tokens.reserve(images.size());
  for (int cam = 0; cam < c.cameras; ++cam) {
    const Tensor& img = g.val(images[static_cast<std::size_t>(cam)]);
    if (img.shape != want)
      throw ShapeError("camera " + std::to_string(cam) + " image must have shape " +
                       shape_str(want) + ", got " + shape_str(img.shape));
    const std::string base = "cam" + std::to_string(cam);
    Var x = relu(conv2d(images[static_cast<std::size_t>(cam)], m.at(base + ".conv1.w"),
                        m.at(base + ".conv1.b"), 2, 1));
    x = relu(conv2d(x, m.at(base + ".conv2.w"), m.at(base + ".conv2.b"), 2, 1));
    x = conv2d(x, m.at(base + ".conv3.w"), m.at(base + ".conv3.b"), 2, 1);
    x = reshape(x, {c.embed_dim, c.tokens_per_camera()});
    tokens.push_back(transpose(x));
  }
  return tokens;
}

StylePosterior encode_style(const BoundModel& m, Var states, Var actions) {
  const ModelConfig& c = m.config();
  Graph& g = m.graph();
  const Tensor& sv = g.val(states);
  const Tensor& av = g.val(actions);
  if (sv.rank() != 2 || sv.cols() != c.state_dim)
    throw ShapeError("states must be (T, " + std::to_string(c.state_dim) + "), got " +
                     shape_str(sv.shape));
  if (av.rank() != 2 || av.cols() != c.action_dim)
    throw ShapeError("actions must be (T, " + std::to_string(c.action_dim) + "), got " +
                     shape_str(av.shape));
  if (sv.rows() != av.rows() || sv.rows() < 1)
    throw ShapeError("states and actions must share T >= 1 rows");

  Var s0 = slice(states, 0, 0, 1);
  Var state_tok = add(matmul(s0, m.at("style.state_proj.w")), m.at("style.state_proj.b"));
  Var action_tok =
      add(matmul(actions, m.at("style.action_proj.w")), m.at("style.action_proj.b"));
  Var x = concat({m.at("style.cls"), state_tok, action_tok}, 0);
  x = add(x, g.value(sinusoidal_positions(static_cast<int>(sv.rows()) + 2, c.embed_dim)));
  for (int l = 0; l < c.encoder_layers; ++l)
    x = encoder_block(m, "style.enc" + std::to_string(l), x);
  x = ln(m, "style.enc_ln", x);

  Var pooled = slice(x, 0, 0, 1);
  Var head =
      add(matmul(pooled, m.at("style.latent_head.w")), m.at("style.latent_head.b"));
  Var mu = slice(head, 1, 0, c.latent_dim);
  Var logvar = clamp_sym(g, slice(head, 1, c.latent_dim, c.latent_dim), 10.0);
  return {mu, logvar};
}

Var forward_chunk(const BoundModel& m, const std::vector<Var>& images, Var state, Var z) {
  const ModelConfig& c = m.config();
  Graph& g = m.graph();

  std::vector<Var> parts = visual_tokenize(m, images);
  Var srow = as_row(g, state, c.state_dim, "state");
  Var zrow = as_row(g, z, c.latent_dim, "z");
  parts.push_back(add(matmul(srow, m.at("state_proj.w")), m.at("state_proj.b")));
  parts.push_back(add(matmul(zrow, m.at("z_proj.w")), m.at("z_proj.b")));

  Var x = concat(parts, 0);
  x = add(x, g.value(sinusoidal_positions(c.encoder_tokens(), c.embed_dim)));
  for (int l = 0; l < c.encoder_layers; ++l)
    x = encoder_block(m, "enc" + std::to_string(l), x);
  Var memory = ln(m, "enc_ln", x);

  Var tgt = add(m.at("query_embed"),
                g.value(sinusoidal_positions(c.chunk_size, c.embed_dim)));
  for (int l = 0; l < c.decoder_layers; ++l)
    tgt = decoder_block(m, "dec" + std::to_string(l), tgt, memory);
  tgt = ln(m, "dec_ln", tgt);
  return add(matmul(tgt, m.at("action_head.w")), m.at("action_head.b"));
}

ChunkLoss chunk_loss(Graph& graph, Var pred, Var target, const StylePosterior& post,
                     double beta) {
  if (!(beta >= 0.0)) throw std::invalid_argument("beta must be non-negative");
  if (graph.val(pred).shape != graph.val(target).shape)
    throw ShapeError("pred and target chunks must share a shape");
  Var recon = l1_loss(pred, target);
  Var kl = gaussian_kl(post.mu, post.logvar);
  Var total = beta == 0.0 ? recon : add(recon, scale(kl, beta));
  return {total, recon, kl};
}

ActionChunk predict_chunk(const ModelConfig& config, const ACTParams& params,
                          const std::vector<Tensor>& images, const Tensor& state) {
  Graph g;
  BoundModel m(g, config, params);
  std::vector<Var> image_vars;
  image_vars.reserve(images.size());
  for (const Tensor& img : images) image_vars.push_back(g.value(img));
  Var out = forward_chunk(m, image_vars, g.value(state),
                          g.value(Tensor::zeros({1, config.latent_dim})));
  return {g.val(out)};
}

Tensor image_frame_tensor(const StreamData& camera, std::uint32_t frame) {
  if (camera.dtype != Dtype::kU8 || camera.dims.size() != 3 || camera.dims[2] != 3)
    throw ShapeError("camera stream '" + camera.name + "' is not (H, W, 3) u8");
  if (frame >= camera.t)
    throw std::out_of_range("frame " + std::to_string(frame) + " out of range for '" +
                            camera.name + "'");
  const int h = camera.dims[0];
  const int w = camera.dims[1];
  const auto& bytes = std::get<std::vector<std::uint8_t>>(camera.values);
  const std::size_t base = static_cast<std::size_t>(frame) * static_cast<std::size_t>(h) *
                           static_cast<std::size_t>(w) * 3u;
  Tensor out = Tensor::zeros({3, h, w});
  for (int row = 0; row < h; ++row)
    for (int col = 0; col < w; ++col)
      for (int ch = 0; ch < 3; ++ch)
        out.data[(ch * h + row) * w + col] =
            bytes[base + (static_cast<std::size_t>(row) * w + col) * 3 +
                  static_cast<std::size_t>(ch)] /
            255.0;
  return out;
}

}  // namespace actbench
