#include "cdpm/denoiser.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "cdpm/errors.hpp"
#include "cdpm/rng.hpp"

namespace cdpm {
namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double silu(double x) { return x * sigmoid(x); }
inline double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

std::string block_name(BlockKind k) {
  return k == BlockKind::kPointwise ? "pw" : "gc";
}

BlockKind block_from_name(const std::string& s) {
  if (s == "pw") return BlockKind::kPointwise;
  if (s == "gc") return BlockKind::kGlobalContext;
  throw InvalidInputError("unknown block kind '" + s + "'");
}

}  // namespace

nlohmann::json ArchitectureConfig::to_json() const {
  nlohmann::json j;
  j["cond_width"] = cond_width;
  j["time_embed_freqs"] = time_embed_freqs;
  j["hidden_width"] = hidden_width;
  std::vector<std::string> names;
  for (BlockKind b : blocks) names.push_back(block_name(b));
  j["blocks"] = names;
  return j;
}

ArchitectureConfig ArchitectureConfig::from_json(const nlohmann::json& j) {
  ArchitectureConfig c;
  c.cond_width = j.at("cond_width").get<int>();
  c.time_embed_freqs = j.at("time_embed_freqs").get<int>();
  c.hidden_width = j.at("hidden_width").get<int>();
  c.blocks.clear();
  for (const auto& name : j.at("blocks")) c.blocks.push_back(block_from_name(name));
  return c;
}

Eigen::RowVectorXd time_embedding(int t, int T, int freqs) {
  Eigen::RowVectorXd emb(2 * freqs);
  const double frac = static_cast<double>(t) / static_cast<double>(T);
  double scale = 3.14159265358979323846;
  for (int k = 0; k < freqs; ++k) {
    emb[2 * k] = std::sin(scale * frac);
    emb[2 * k + 1] = std::cos(scale * frac);
    scale *= 2.0;
  }
  return emb;
}

Denoiser::Denoiser(const ArchitectureConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  if (cfg_.hidden_width < 1) throw InvalidInputError("Denoiser: hidden_width must be >= 1");
  if (cfg_.cond_width < 0) throw InvalidInputError("Denoiser: cond_width must be >= 0");
  if (cfg_.time_embed_freqs < 1)
    throw InvalidInputError("Denoiser: time_embed_freqs must be >= 1");
  if (cfg_.blocks.empty()) throw InvalidInputError("Denoiser: needs at least one block");

  RandomStream rng(seed, 0x494e4954ull /* "INIT" */);
  int in_width = cfg_.input_width();
  for (BlockKind kind : cfg_.blocks) {
    const int fan_in = (kind == BlockKind::kGlobalContext) ? 3 * in_width : in_width;
    Layer layer;
    layer.kind = kind;
    layer.w.resize(fan_in, cfg_.hidden_width);
    const double limit = std::sqrt(6.0 / fan_in);
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c)
        layer.w(r, c) = (2.0 * rng.uniform() - 1.0) * limit;
    layer.b = Eigen::MatrixXd::Zero(1, cfg_.hidden_width);
    layer.gw = Eigen::MatrixXd::Zero(layer.w.rows(), layer.w.cols());
    layer.gb = Eigen::MatrixXd::Zero(1, cfg_.hidden_width);
    layers_.push_back(std::move(layer));
    in_width = cfg_.hidden_width;
  }
  // Zero-initialized linear output layer.
  Layer out;
  out.kind = BlockKind::kPointwise;
  out.w = Eigen::MatrixXd::Zero(cfg_.hidden_width, 3);
  out.b = Eigen::MatrixXd::Zero(1, 3);
  out.gw = Eigen::MatrixXd::Zero(cfg_.hidden_width, 3);
  out.gb = Eigen::MatrixXd::Zero(1, 3);
  layers_.push_back(std::move(out));
}

std::size_t Denoiser::parameter_count() const {
  std::size_t n = 0;
  for (const Layer& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
  return n;
}

Eigen::MatrixXd Denoiser::forward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& cond,
                                  int t, int T, ForwardCache* cache) const {
  const Eigen::Index n = x.rows();
  if (x.cols() != 3) throw InvalidInputError("Denoiser::forward: x must be N x 3");
  if (cond.rows() != n || cond.cols() != cfg_.cond_width)
    throw InvalidInputError("Denoiser::forward: condition width/rows mismatch");
  if (t < 1 || t > T) throw InvalidInputError("Denoiser::forward: t out of [1, T]");

  Eigen::MatrixXd h(n, cfg_.input_width());
  h.leftCols(3) = x;
  if (cfg_.cond_width > 0) h.middleCols(3, cfg_.cond_width) = cond;
  h.rightCols(2 * cfg_.time_embed_freqs).rowwise() =
      time_embedding(t, T, cfg_.time_embed_freqs);

  if (cache) {
    cache->valid = true;
    cache->h.clear();
    cache->preact.clear();
    cache->concat.clear();
    cache->argmax.clear();
    cache->h.push_back(h);
  }

  const std::size_t n_blocks = layers_.size() - 1;
  for (std::size_t l = 0; l < n_blocks; ++l) {
    const Layer& layer = layers_[l];
    Eigen::MatrixXd pre;
    if (layer.kind == BlockKind::kPointwise) {
      pre = h * layer.w;
      if (cache) {
        cache->concat.emplace_back();
        cache->argmax.emplace_back();
      }
    } else {
      const Eigen::Index w = h.cols();
      Eigen::MatrixXd concat(n, 3 * w);
      concat.leftCols(w) = h;
      std::vector<Eigen::Index> argmax(static_cast<std::size_t>(w));
      for (Eigen::Index c = 0; c < w; ++c) {
        Eigen::Index best = 0;
        double bestv = h(0, c);
        for (Eigen::Index r = 1; r < n; ++r)
          if (h(r, c) > bestv) {  // strict: ties keep the lowest index
            bestv = h(r, c);
            best = r;
          }
        argmax[static_cast<std::size_t>(c)] = best;
        concat.col(w + c).setConstant(bestv);
      }
      concat.rightCols(w).rowwise() = h.colwise().mean();
      pre = concat * layer.w;
      if (cache) {
        cache->concat.push_back(concat);
        cache->argmax.push_back(std::move(argmax));
      }
    }
    pre.rowwise() += layer.b.row(0);
    Eigen::MatrixXd act = pre.unaryExpr([](double v) { return silu(v); });
    if (cache) {
      cache->preact.push_back(std::move(pre));
      cache->h.push_back(act);
    }
    h = std::move(act);
  }

  const Layer& out = layers_.back();
  Eigen::MatrixXd y = h * out.w;
  y.rowwise() += out.b.row(0);
  return y;
}

PointCloud Denoiser::predict_noise(const PointCloud& x, const Eigen::MatrixXd& cond,
                                   int t, int T) const {
  Eigen::MatrixXd xm(static_cast<Eigen::Index>(x.size()), 3);
  for (std::size_t i = 0; i < x.size(); ++i) xm.row(static_cast<Eigen::Index>(i)) = x[i];
  const Eigen::MatrixXd y = forward(xm, cond, t, T);
  PointCloud out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    out[i] = y.row(static_cast<Eigen::Index>(i)).transpose();
  return out;
}

Denoiser::Gradients Denoiser::backward(const ForwardCache& cache,
                                       const Eigen::MatrixXd& dY) const {
  if (!cache.valid) throw InvalidStateError("Denoiser::backward: no cached forward pass");
  const std::size_t n_blocks = layers_.size() - 1;
  if (cache.h.size() != n_blocks + 1)
    throw InvalidStateError("Denoiser::backward: cache does not match architecture");

  Gradients g;
  g.gw.resize(layers_.size());
  g.gb.resize(layers_.size());

  const Layer& out = layers_.back();
  g.gw.back() = cache.h.back().transpose() * dY;
  g.gb.back() = dY.colwise().sum();
  Eigen::MatrixXd dH = dY * out.w.transpose();

  for (std::size_t l = n_blocks; l-- > 0;) {
    const Layer& layer = layers_[l];
    const Eigen::MatrixXd dA =
        dH.array() * cache.preact[l].unaryExpr([](double v) { return silu_grad(v); }).array();
    g.gb[l] = dA.colwise().sum();
    if (layer.kind == BlockKind::kPointwise) {
      g.gw[l] = cache.h[l].transpose() * dA;
      dH = dA * layer.w.transpose();
    } else {
      g.gw[l] = cache.concat[l].transpose() * dA;
      const Eigen::MatrixXd dP = dA * layer.w.transpose();
      const Eigen::Index w = cache.h[l].cols();
      const Eigen::Index n = cache.h[l].rows();
      dH = dP.leftCols(w);
      const Eigen::RowVectorXd dmax = dP.middleCols(w, w).colwise().sum();
      for (Eigen::Index c = 0; c < w; ++c)
        dH(cache.argmax[l][static_cast<std::size_t>(c)], c) += dmax[c];
      const Eigen::RowVectorXd dmean =
          dP.rightCols(w).colwise().sum() / static_cast<double>(n);
      dH.rowwise() += dmean;
    }
  }
  g.input_grad = dH;
  return g;
}

void Denoiser::zero_grads() {
  for (Layer& l : layers_) {
    l.gw.setZero();
    l.gb.setZero();
  }
}

void Denoiser::accumulate(const Gradients& g) {
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    layers_[l].gw += g.gw[l];
    layers_[l].gb += g.gb[l];
  }
}

nlohmann::json OptimizerConfig::to_json() const {
  return nlohmann::json{{"base_lr", base_lr},
                        {"peak_lr", peak_lr},
                        {"warmup_steps", warmup_steps},
                        {"total_steps", total_steps},
                        {"weight_decay", weight_decay},
                        {"beta1", beta1},
                        {"beta2", beta2},
                        {"eps", eps},
                        {"decay_floor", decay_floor}};
}

OptimizerConfig OptimizerConfig::from_json(const nlohmann::json& j) {
  OptimizerConfig c;
  c.base_lr = j.at("base_lr").get<double>();
  c.peak_lr = j.at("peak_lr").get<double>();
  c.warmup_steps = j.at("warmup_steps").get<long long>();
  c.total_steps = j.at("total_steps").get<long long>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.beta1 = j.value("beta1", 0.9);
  c.beta2 = j.value("beta2", 0.999);
  c.eps = j.value("eps", 1e-8);
  c.decay_floor = j.value("decay_floor", 1e-8);
  return c;
}

AdamW::AdamW(const Denoiser& net, const OptimizerConfig& cfg) : cfg_(cfg) {
  if (!(cfg_.base_lr > 0.0 && cfg_.peak_lr >= cfg_.base_lr))
    throw InvalidInputError("AdamW: need 0 < base_lr <= peak_lr");
  if (cfg_.warmup_steps < 0 || cfg_.total_steps <= cfg_.warmup_steps)
    throw InvalidInputError("AdamW: need 0 <= warmup_steps < total_steps");
  for (const auto& l : net.layers()) {
    m_.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(l.w.rows(), l.w.cols()));
    m_.push_back(Eigen::MatrixXd::Zero(1, l.b.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(1, l.b.cols()));
  }
}

double AdamW::learning_rate(long long step) const {
  if (step < cfg_.warmup_steps) {
    const double frac = static_cast<double>(step) / static_cast<double>(cfg_.warmup_steps);
    return cfg_.base_lr + frac * (cfg_.peak_lr - cfg_.base_lr);
  }
  if (step >= cfg_.total_steps) return 0.0;
  const double horizon = static_cast<double>(cfg_.total_steps - cfg_.warmup_steps);
  const double rate = std::log(cfg_.peak_lr / cfg_.decay_floor) / horizon;
  const double lr = cfg_.peak_lr * std::exp(-rate * static_cast<double>(step - cfg_.warmup_steps));
  return lr <= cfg_.decay_floor ? 0.0 : lr;
}

void AdamW::step(Denoiser& net) {
  const double lr = learning_rate(step_);
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));

  std::size_t slot = 0;
  for (auto& layer : net.layers()) {
    for (int which = 0; which < 2; ++which, ++slot) {
      Eigen::MatrixXd& p = which ? layer.b : layer.w;
      const Eigen::MatrixXd& grad = which ? layer.gb : layer.gw;
      if (!grad.allFinite())
        throw DivergedTrainingError("AdamW: non-finite gradient", step_ - 1);
      Eigen::MatrixXd& m = m_[slot];
      Eigen::MatrixXd& v = v_[slot];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * grad;
      v = cfg_.beta2 * v.array().matrix() + (1.0 - cfg_.beta2) * grad.cwiseProduct(grad);
      const Eigen::ArrayXXd mhat = m.array() / bc1;
      const Eigen::ArrayXXd vhat = v.array() / bc2;
      Eigen::ArrayXXd update = mhat / (vhat.sqrt() + cfg_.eps);
      if (!which && cfg_.weight_decay > 0.0) update += cfg_.weight_decay * p.array();
      p.array() -= lr * update;
    }
  }
}

void write_checkpoint(const std::filesystem::path& path, const Denoiser& net,
                      const nlohmann::json& extra_meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidInputError("write_checkpoint: cannot open " + path.string());

  nlohmann::json meta = extra_meta;
  meta["arch"] = net.config().to_json();
  const std::string json_str = meta.dump();

  out.write("CDPM", 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), 4);
  const std::uint32_t json_len = static_cast<std::uint32_t>(json_str.size());
  out.write(reinterpret_cast<const char*>(&json_len), 4);
  out.write(json_str.data(), json_len);

  auto write_tensor = [&out](const std::string& name, const Eigen::MatrixXd& t) {
    const std::uint32_t name_len = static_cast<std::uint32_t>(name.size());
    out.write(reinterpret_cast<const char*>(&name_len), 4);
    out.write(name.data(), name_len);
    const std::uint32_t rank = 2;
    out.write(reinterpret_cast<const char*>(&rank), 4);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(t.rows()),
                                   static_cast<std::uint32_t>(t.cols())};
    out.write(reinterpret_cast<const char*>(dims), 8);
    std::vector<float> raw(static_cast<std::size_t>(t.size()));
    std::size_t k = 0;
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) raw[k++] = static_cast<float>(t(r, c));
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * sizeof(float)));
  };

  const auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base =
        (l + 1 == layers.size()) ? "out" : "layer" + std::to_string(l);
    write_tensor(base + ".weight", layers[l].w);
    write_tensor(base + ".bias", layers[l].b);
  }
}

CheckpointData read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInputError("read_checkpoint: cannot open " + path.string());

  auto read_u32 = [&in, &path]() {
    std::uint32_t v;
    in.read(reinterpret_cast<char*>(&v), 4);
    if (in.gcount() != 4)
      throw InvalidInputError("read_checkpoint: truncated file " + path.string());
    return v;
  };

  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, "CDPM", 4) != 0)
    throw InvalidInputError("read_checkpoint: bad magic in " + path.string());
  const std::uint32_t version = read_u32();
  if (version != 1)
    throw InvalidInputError("read_checkpoint: unsupported format version " +
                            std::to_string(version));
  const std::uint32_t json_len = read_u32();
  std::string json_str(json_len, '\0');
  in.read(json_str.data(), json_len);
  if (in.gcount() != static_cast<std::streamsize>(json_len))
    throw InvalidInputError("read_checkpoint: truncated metadata in " + path.string());

  nlohmann::json meta = nlohmann::json::parse(json_str);
  const ArchitectureConfig arch = ArchitectureConfig::from_json(meta.at("arch"));

  CheckpointData data{arch, meta, Denoiser(arch, 0)};
  auto& layers = data.net.layers();

  auto read_tensor = [&](const std::string& want, Eigen::MatrixXd& t) {
    const std::uint32_t name_len = read_u32();
    std::string name(name_len, '\0');
    in.read(name.data(), name_len);
    if (name != want)
      throw InvalidInputError("read_checkpoint: expected tensor '" + want + "', found '" +
                              name + "'");
    const std::uint32_t rank = read_u32();
    if (rank != 2) throw InvalidInputError("read_checkpoint: expected rank-2 tensor");
    const std::uint32_t rows = read_u32();
    const std::uint32_t cols = read_u32();
    if (rows != static_cast<std::uint32_t>(t.rows()) ||
        cols != static_cast<std::uint32_t>(t.cols()))
      throw InvalidInputError("read_checkpoint: tensor '" + want + "' has wrong shape");
    std::vector<float> raw(static_cast<std::size_t>(rows) * cols);
    in.read(reinterpret_cast<char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(float)));
    if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(float)))
      throw InvalidInputError("read_checkpoint: truncated tensor data in " + path.string());
    std::size_t k = 0;
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) t(r, c) = raw[k++];
  };

  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string base =
        (l + 1 == layers.size()) ? "out" : "layer" + std::to_string(l);
    read_tensor(base + ".weight", layers[l].w);
    read_tensor(base + ".bias", layers[l].b);
  }
  // Validate total length: nothing may follow the last tensor.
  in.peek();
  if (!in.eof())
    throw InvalidInputError("read_checkpoint: trailing bytes in " + path.string());
  return data;
}

}  // namespace cdpm
