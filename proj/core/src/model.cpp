// Copyright 2026 The TriCLIP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "triclip/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

#include "byte_io.hpp"
#include "triclip/errors.hpp"
#include "triclip/json_io.hpp"

namespace triclip {
namespace {

constexpr double kLayerNormEps = 1e-5;

Mat layer_norm(const Mat& x, const Mat& g, const Mat& b, LayerNormCache* cache) {
  const Eigen::Index rows = x.rows();
  Mat xhat(rows, x.cols());
  Vec inv_std(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const double mu = x.row(r).mean();
    auto centered = x.row(r).array() - mu;
    const double var = centered.square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + kLayerNormEps);
    xhat.row(r) = (centered * inv_std(r)).matrix();
  }
  Mat y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

Mat layer_norm_backward(const Mat& dy, const Mat& g, const LayerNormCache& cache,
                        Mat& dg, Mat& db) {
  dg += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  db += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * g.row(0).array();
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double mean_d = dxhat.row(r).mean();
    const double mean_dx = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = cache.inv_std(r) *
                (dxhat.row(r).array() - mean_d - cache.xhat.row(r).array() * mean_dx).matrix();
  }
  return dx;
}

double gelu(double u) { return 0.5 * u * (1.0 + std::erf(u * std::numbers::sqrt2 / 2.0)); }

double gelu_grad(double u) {
  const double cdf = 0.5 * (1.0 + std::erf(u * std::numbers::sqrt2 / 2.0));
  const double pdf = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + u * pdf;
}

void softmax_rows(Mat& s) {
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    const double m = s.row(r).maxCoeff();
    s.row(r) = (s.row(r).array() - m).exp().matrix();
    s.row(r) /= s.row(r).sum();
  }
}

Mat truncated_normal(Eigen::Index rows, Eigen::Index cols, double sd, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double v;
    do {
      v = rng.normal();
    } while (std::abs(v) > 2.0);
    m.data()[i] = sd * v;
  }
  return m;
}

Mat uniform_matrix(Eigen::Index rows, Eigen::Index cols, double a, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = a * (2.0 * rng.uniform() - 1.0);
  return m;
}

template <typename Self, typename Emit>
void enumerate_tensors(Self& p, Emit&& emit) {
  emit("patch_w", p.patch_w, true);
  emit("patch_b", p.patch_b, false);
  emit("pos", p.pos, false);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    auto& b = p.blocks[i];
    const std::string prefix = "block" + std::to_string(i) + ".";
    emit(prefix + "ln1_g", b.ln1_g, false);
    emit(prefix + "ln1_b", b.ln1_b, false);
    emit(prefix + "qkv_w", b.qkv_w, true);
    emit(prefix + "qkv_b", b.qkv_b, false);
    emit(prefix + "proj_w", b.proj_w, true);
    emit(prefix + "proj_b", b.proj_b, false);
    emit(prefix + "ln2_g", b.ln2_g, false);
    emit(prefix + "ln2_b", b.ln2_b, false);
    emit(prefix + "fc1_w", b.fc1_w, true);
    emit(prefix + "fc1_b", b.fc1_b, false);
    emit(prefix + "fc2_w", b.fc2_w, true);
    emit(prefix + "fc2_b", b.fc2_b, false);
  }
  emit("norm_g", p.norm_g, false);
  emit("norm_b", p.norm_b, false);
  emit("head_w", p.head_w, true);
  emit("head_b", p.head_b, false);
}

}  // namespace

int EncoderConfig::mlp_hidden() const {
  return std::max(1, static_cast<int>(std::lround(width * mlp_ratio)));
}

void EncoderConfig::validate() const {
  if (image_hw < 1 || patch < 1 || depth < 0 || width < 1 || heads < 1 ||
      embed_dim < 1 || !(mlp_ratio > 0.0)) {
    throw InvalidArgument("encoder config sizes must be positive");
  }
  if (image_hw % patch != 0) {
    throw InvalidArgument("image_hw " + std::to_string(image_hw) +
                          " is not divisible by patch " + std::to_string(patch));
  }
  if (width % heads != 0) {
    throw InvalidArgument("width " + std::to_string(width) +
                          " is not divisible by heads " + std::to_string(heads));
  }
}

nlohmann::json to_json(const EncoderConfig& c) {
  return {{"image_hw", c.image_hw}, {"patch", c.patch},
          {"depth", c.depth},       {"width", c.width},
          {"heads", c.heads},       {"embed_dim", c.embed_dim},
          {"mlp_ratio", c.mlp_ratio}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  try {
    c.image_hw = j.value("image_hw", c.image_hw);
    c.patch = j.value("patch", c.patch);
    c.depth = j.value("depth", c.depth);
    c.width = j.value("width", c.width);
    c.heads = j.value("heads", c.heads);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.mlp_ratio = j.value("mlp_ratio", c.mlp_ratio);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("bad encoder config: ") + e.what());
  }
  c.validate();
  return c;
}

std::int64_t param_count(const EncoderConfig& c) {
  const std::int64_t w = c.width, m = c.mlp_hidden(), d = c.embed_dim;
  const std::int64_t patch_embed = static_cast<std::int64_t>(c.patch_dim()) * w + w;
  const std::int64_t positions = static_cast<std::int64_t>(c.tokens()) * w;
  const std::int64_t block = 2 * w                // ln1
                             + w * 3 * w + 3 * w  // qkv
                             + w * w + w          // attention output
                             + 2 * w              // ln2
                             + w * m + m          // fc1
                             + m * w + w;         // fc2
  const std::int64_t final_norm = 2 * w;
  const std::int64_t head = w * d + d;
  return patch_embed + positions + c.depth * block + final_norm + head;
}

EncoderParams EncoderParams::zeros(const EncoderConfig& c) {
  c.validate();
  const int w = c.width, m = c.mlp_hidden();
  EncoderParams p;
  p.patch_w = Mat::Zero(c.patch_dim(), w);
  p.patch_b = Mat::Zero(1, w);
  p.pos = Mat::Zero(c.tokens(), w);
  p.blocks.resize(c.depth);
  for (auto& b : p.blocks) {
    b.ln1_g = Mat::Zero(1, w);
    b.ln1_b = Mat::Zero(1, w);
    b.qkv_w = Mat::Zero(w, 3 * w);
    b.qkv_b = Mat::Zero(1, 3 * w);
    b.proj_w = Mat::Zero(w, w);
    b.proj_b = Mat::Zero(1, w);
    b.ln2_g = Mat::Zero(1, w);
    b.ln2_b = Mat::Zero(1, w);
    b.fc1_w = Mat::Zero(w, m);
    b.fc1_b = Mat::Zero(1, m);
    b.fc2_w = Mat::Zero(m, w);
    b.fc2_b = Mat::Zero(1, w);
  }
  p.norm_g = Mat::Zero(1, w);
  p.norm_b = Mat::Zero(1, w);
  p.head_w = Mat::Zero(w, c.embed_dim);
  p.head_b = Mat::Zero(1, c.embed_dim);
  return p;
}

EncoderParams EncoderParams::init(const EncoderConfig& c, std::uint64_t seed) {
  EncoderParams p = zeros(c);
  std::uint64_t k = 0;
  for (auto& t : p.tensors()) {
    Rng rng(derive_seed(seed, {k++}));
    const bool gain = t.name.ends_with("_g");
    if (gain) {
      t.value->setOnes();
    } else if (t.name == "patch_w") {
      const double sd = 1.0 / std::sqrt(static_cast<double>(t.value->rows()));
      *t.value = truncated_normal(t.value->rows(), t.value->cols(), sd, rng);
    } else if (t.decay) {
      const double a =
          std::sqrt(6.0 / static_cast<double>(t.value->rows() + t.value->cols()));
      *t.value = uniform_matrix(t.value->rows(), t.value->cols(), a, rng);
    } else if (t.name == "pos") {
      *t.value = truncated_normal(t.value->rows(), t.value->cols(), 0.02, rng);
    }
  }
  return p;
}

std::vector<NamedTensor> EncoderParams::tensors() {
  std::vector<NamedTensor> out;
  enumerate_tensors(*this, [&](std::string name, Mat& m, bool decay) {
    out.push_back({std::move(name), &m, decay});
  });
  return out;
}

std::vector<ConstNamedTensor> EncoderParams::tensors() const {
  std::vector<ConstNamedTensor> out;
  enumerate_tensors(*this, [&](std::string name, const Mat& m, bool decay) {
    out.push_back({std::move(name), &m, decay});
  });
  return out;
}

std::int64_t EncoderParams::count() const {
  std::int64_t n = 0;
  for (const auto& t : tensors()) n += t.value->size();
  return n;
}

void EncoderParams::set_zero() {
  for (auto& t : tensors()) t.value->setZero();
}

void EncoderParams::add_scaled(const EncoderParams& other, double scale) {
  auto mine = tensors();
  auto theirs = other.tensors();
  for (std::size_t i = 0; i < mine.size(); ++i) {
    mine[i].value->noalias() += scale * *theirs[i].value;
  }
}

Mat patchify(const Mat& image, int patch) {
  const int g = static_cast<int>(image.rows()) / patch;
  Mat out(g * g, patch * patch);
  for (int pr = 0; pr < g; ++pr) {
    for (int pc = 0; pc < g; ++pc) {
      const int t = pr * g + pc;
      for (int i = 0; i < patch; ++i) {
        for (int j = 0; j < patch; ++j) {
          out(t, i * patch + j) = image(pr * patch + i, pc * patch + j);
        }
      }
    }
  }
  return out;
}

Vec encode(const EncoderConfig& c, const EncoderParams& p, const Mat& image,
           EncodeTrace* trace) {
  if (image.rows() != c.image_hw || image.cols() != c.image_hw) {
    throw InvalidArgument("encoder expects a " + std::to_string(c.image_hw) + "x" +
                          std::to_string(c.image_hw) + " image, got " +
                          std::to_string(image.rows()) + "x" +
                          std::to_string(image.cols()));
  }
  const int w = c.width, dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat patches = patchify(image, c.patch);
  Mat x = patches * p.patch_w;
  x.rowwise() += p.patch_b.row(0);
  x += p.pos;
  if (trace) {
    trace->patches = std::move(patches);
    trace->blocks.assign(p.blocks.size(), {});
  }

  for (std::size_t bi = 0; bi < p.blocks.size(); ++bi) {
    const BlockParams& b = p.blocks[bi];
    BlockTrace local;
    BlockTrace& t = trace ? trace->blocks[bi] : local;

    t.h1 = layer_norm(x, b.ln1_g, b.ln1_b, &t.ln1);
    t.qkv = t.h1 * b.qkv_w;
    t.qkv.rowwise() += b.qkv_b.row(0);
    t.heads_out.resize(x.rows(), w);
    t.attn.resize(c.heads);
    for (int h = 0; h < c.heads; ++h) {
      auto q = t.qkv.middleCols(h * dh, dh);
      auto k = t.qkv.middleCols(w + h * dh, dh);
      auto v = t.qkv.middleCols(2 * w + h * dh, dh);
      Mat s = scale * (q * k.transpose());
      softmax_rows(s);
      t.heads_out.middleCols(h * dh, dh).noalias() = s * v;
      t.attn[h] = std::move(s);
    }
    x.noalias() += t.heads_out * b.proj_w;
    x.rowwise() += b.proj_b.row(0);

    t.h2 = layer_norm(x, b.ln2_g, b.ln2_b, &t.ln2);
    t.pre_act = t.h2 * b.fc1_w;
    t.pre_act.rowwise() += b.fc1_b.row(0);
    t.act = t.pre_act.unaryExpr([](double u) { return gelu(u); });
    x.noalias() += t.act * b.fc2_w;
    x.rowwise() += b.fc2_b.row(0);
  }

  LayerNormCache final_cache;
  Mat hf = layer_norm(x, p.norm_g, p.norm_b, &final_cache);
  Mat pooled = hf.colwise().mean();
  Vec z = (pooled * p.head_w + p.head_b).transpose();
  const double norm = z.norm();
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw NumericError("encoder produced a zero or non-finite embedding");
  }
  Vec e = z / norm;
  if (trace) {
    trace->final_norm = std::move(final_cache);
    trace->pooled = std::move(pooled);
    trace->z = std::move(z);
    trace->embedding = e;
  }
  return e;
}

void encode_backward(const EncoderConfig& c, const EncoderParams& p,
                     const EncodeTrace& trace, const Vec& d_embedding,
                     EncoderParams& g) {
  const int w = c.width, dh = c.head_dim();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const Eigen::Index tokens = trace.patches.rows();

  const Vec& e = trace.embedding;
  const double norm = trace.z.norm();
  const Vec dz = (d_embedding - e * e.dot(d_embedding)) / norm;

  g.head_w.noalias() += trace.pooled.transpose() * dz.transpose();
  g.head_b += dz.transpose();
  const Mat d_pooled = dz.transpose() * p.head_w.transpose();
  const Mat d_hf = d_pooled.replicate(tokens, 1) / static_cast<double>(tokens);
  Mat dx = layer_norm_backward(d_hf, p.norm_g, trace.final_norm, g.norm_g, g.norm_b);

  for (std::size_t bi = p.blocks.size(); bi-- > 0;) {
    const BlockParams& b = p.blocks[bi];
    const BlockTrace& t = trace.blocks[bi];
    BlockParams& gb = g.blocks[bi];

    // MLP branch.
    gb.fc2_w.noalias() += t.act.transpose() * dx;
    gb.fc2_b += dx.colwise().sum();
    Mat d_pre = dx * b.fc2_w.transpose();
    d_pre.array() *= t.pre_act.unaryExpr([](double u) { return gelu_grad(u); }).array();
    gb.fc1_w.noalias() += t.h2.transpose() * d_pre;
    gb.fc1_b += d_pre.colwise().sum();
    const Mat d_h2 = d_pre * b.fc1_w.transpose();
    dx += layer_norm_backward(d_h2, b.ln2_g, t.ln2, gb.ln2_g, gb.ln2_b);

    // Attention branch.
    gb.proj_w.noalias() += t.heads_out.transpose() * dx;
    gb.proj_b += dx.colwise().sum();
    const Mat d_heads = dx * b.proj_w.transpose();
    Mat d_qkv(tokens, 3 * w);
    for (int h = 0; h < c.heads; ++h) {
      const Mat& a = t.attn[h];
      auto q = t.qkv.middleCols(h * dh, dh);
      auto k = t.qkv.middleCols(w + h * dh, dh);
      auto v = t.qkv.middleCols(2 * w + h * dh, dh);
      auto d_out = d_heads.middleCols(h * dh, dh);
      const Mat d_a = d_out * v.transpose();
      d_qkv.middleCols(2 * w + h * dh, dh).noalias() = a.transpose() * d_out;
      const Vec row_dot = (d_a.array() * a.array()).rowwise().sum();
      Mat d_s = a.array() * (d_a.array().colwise() - row_dot.array());
      d_s *= scale;
      d_qkv.middleCols(h * dh, dh).noalias() = d_s * k;
      d_qkv.middleCols(w + h * dh, dh).noalias() = d_s.transpose() * q;
    }
    gb.qkv_w.noalias() += t.h1.transpose() * d_qkv;
    gb.qkv_b += d_qkv.colwise().sum();
    const Mat d_h1 = d_qkv * b.qkv_w.transpose();
    dx += layer_norm_backward(d_h1, b.ln1_g, t.ln1, gb.ln1_g, gb.ln1_b);
  }

  g.pos += dx;
  g.patch_w.noalias() += trace.patches.transpose() * dx;
  g.patch_b += dx.colwise().sum();
}

TowerSet TowerSet::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  TowerSet set;
  set.config = config;
  for (Modality m : kModalities) {
    set.towers[index_of(m)] = EncoderParams::init(
        config, derive_seed(seed, {stream_tag("tower"), static_cast<std::uint64_t>(m)}));
  }
  set.log_temperature = std::log(kInitTemperature);
  return set;
}

double TowerSet::temperature() const {
  return std::clamp(std::exp(log_temperature), kMinTemperature, kMaxTemperature);
}

bool TowerSet::temperature_clamped() const {
  const double t = std::exp(log_temperature);
  return t <= kMinTemperature || t >= kMaxTemperature;
}

std::int64_t TowerSet::parameter_count() const {
  std::int64_t n = 1;  // log_temperature
  for (const auto& t : towers) n += t.count();
  return n;
}

int sample_channel(const ModalityChip& chip, Rng& rng) {
  const int available = chip.available_channels();
  if (available == 0) {
    throw MissingDataError("chip " + std::to_string(chip.chip_id) + "/" +
                           std::string(to_string(chip.modality)) +
                           " has no available channels");
  }
  auto k = static_cast<int>(rng.below(static_cast<std::uint64_t>(available)));
  for (int c = 0; c < chip.channels; ++c) {
    if (chip.channel_mask[c] && k-- == 0) return c;
  }
  throw MissingDataError("channel mask inconsistent with channel count");
}

Mat channel_image(const ModalityChip& chip, int c) {
  if (c < 0 || c >= chip.channels) {
    throw InvalidArgument("channel " + std::to_string(c) + " out of range for chip " +
                          std::to_string(chip.chip_id));
  }
  Mat img(chip.height, chip.width);
  const float* src = chip.plane(c);
  for (Eigen::Index i = 0; i < img.size(); ++i) img.data()[i] = src[i];
  return img;
}

Mat input_image(const TowerSet& towers, const ModalityChip& chip, int c) {
  const auto m = index_of(chip.modality);
  return (channel_image(chip, c).array() - towers.input.mean[m]) / towers.input.sd[m];
}

InputNorm fit_input_norm(std::span<const ModalityChip* const> chips) {
  std::array<double, kNumModalities> sum{}, sum_sq{};
  std::array<std::int64_t, kNumModalities> count{};
  for (const ModalityChip* chip : chips) {
    const auto m = index_of(chip->modality);
    const auto n = static_cast<std::int64_t>(chip->height) * chip->width;
    for (int c = 0; c < chip->channels; ++c) {
      if (!chip->channel_mask[c]) continue;
      const float* src = chip->plane(c);
      for (std::int64_t i = 0; i < n; ++i) {
        sum[m] += src[i];
        sum_sq[m] += static_cast<double>(src[i]) * src[i];
      }
      count[m] += n;
    }
  }
  InputNorm norm;
  norm.fitted = true;
  for (int m = 0; m < kNumModalities; ++m) {
    if (count[m] == 0) continue;
    const double mean = sum[m] / static_cast<double>(count[m]);
    const double var = sum_sq[m] / static_cast<double>(count[m]) - mean * mean;
    norm.mean[m] = mean;
    norm.sd[m] = var > 1e-12 ? std::sqrt(var) : 1.0;
  }
  return norm;
}

EmbedMode parse_embed_mode(const std::string& text) {
  if (text == "random" || text == "random-single") return EmbedMode::random_single();
  if (text == "mean" || text == "mean-over-channels") return EmbedMode::mean_over_channels();
  if (text.rfind("fixed:", 0) == 0) {
    try {
      return EmbedMode::fixed(std::stoi(text.substr(6)));
    } catch (const std::exception&) {
    }
  }
  throw InvalidArgument("embed mode must be random, mean or fixed:<k>, got '" + text + "'");
}

std::string to_string(const EmbedMode& mode) {
  switch (mode.kind) {
    case EmbedMode::Kind::kRandomSingle: return "random";
    case EmbedMode::Kind::kFixed: return "fixed:" + std::to_string(mode.channel);
    case EmbedMode::Kind::kMeanOverChannels: return "mean";
  }
  return "?";
}

Vec embed_chip(const TowerSet& towers, const ModalityChip& chip, EmbedMode mode,
               Rng& rng) {
  const auto& params = towers.tower(chip.modality);
  switch (mode.kind) {
    case EmbedMode::Kind::kRandomSingle:
      return encode(towers.config, params, input_image(towers, chip, sample_channel(chip, rng)));
    case EmbedMode::Kind::kFixed:
      if (mode.channel < 0 || mode.channel >= chip.channels ||
          !chip.channel_mask[mode.channel]) {
        throw MissingDataError("channel " + std::to_string(mode.channel) + " of chip " +
                               std::to_string(chip.chip_id) + "/" +
                               std::string(to_string(chip.modality)) +
                               " is not available");
      }
      return encode(towers.config, params, input_image(towers, chip, mode.channel));
    case EmbedMode::Kind::kMeanOverChannels: {
      const int available = chip.available_channels();
      if (available == 0) {
        throw MissingDataError("chip " + std::to_string(chip.chip_id) + "/" +
                               std::string(to_string(chip.modality)) +
                               " has no available channels");
      }
      Vec sum = Vec::Zero(towers.config.embed_dim);
      int last = -1;
      for (int c = 0; c < chip.channels; ++c) {
        if (!chip.channel_mask[c]) continue;
        sum += encode(towers.config, params, input_image(towers, chip, c));
        last = c;
      }
      // A lone channel is returned as encoded, so all modes agree exactly.
      if (available == 1) return encode(towers.config, params, input_image(towers, chip, last));
      const double norm = sum.norm();
      if (!(norm > 0.0)) throw NumericError("channel embeddings cancel to zero");
      return sum / norm;
    }
  }
  throw InvalidArgument("unknown embed mode");
}

void save_checkpoint(const TowerSet& towers, std::int64_t step, double val_loss,
                     const std::filesystem::path& dir) {
  detail::ByteWriter blob;
  nlohmann::json table = nlohmann::json::array();
  std::int64_t offset = 0;
  auto add = [&](const std::string& name, const Mat& m) {
    table.push_back({{"name", name}, {"offset", offset}, {"shape", {m.rows(), m.cols()}}});
    for (Eigen::Index i = 0; i < m.size(); ++i) blob.f32(static_cast<float>(m.data()[i]));
    offset += m.size();
  };
  for (Modality mod : kModalities) {
    for (const auto& t : towers.tower(mod).tensors()) {
      add(std::string(to_string(mod)) + "/" + t.name, *t.value);
    }
  }
  Mat temp(1, 1);
  temp(0, 0) = towers.log_temperature;
  add("log_temperature", temp);

  nlohmann::json meta = {{"format", "triclip-checkpoint"},
                         {"version", 1},
                         {"config", to_json(towers.config)},
                         {"step", step},
                         {"val_loss", std::isfinite(val_loss) ? nlohmann::json(val_loss)
                                                              : nlohmann::json(nullptr)},
                         {"dtype", "float32"},
                         {"total_values", offset},
                         {"tensors", std::move(table)}};
  if (towers.input.fitted) {
    nlohmann::json mean, sd;
    for (Modality mod : kModalities) {
      mean[std::string(to_string(mod))] = towers.input.mean[index_of(mod)];
      sd[std::string(to_string(mod))] = towers.input.sd[index_of(mod)];
    }
    meta["input_norm"] = {{"mean", mean}, {"sd", sd}};
  }
  std::filesystem::create_directories(dir);
  detail::write_file_bytes(dir / "params.bin", blob.str());
  write_json_file(dir / "checkpoint.json", meta);
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto meta = read_json_file(dir / "checkpoint.json");
  const std::string blob_path = (dir / "params.bin").string();
  const std::string blob = detail::read_file_bytes(dir / "params.bin");
  Checkpoint ck;
  try {
    if (meta.at("format") != "triclip-checkpoint" || meta.at("version") != 1) {
      throw FormatError((dir / "checkpoint.json").string() + ": not a version-1 checkpoint");
    }
    ck.towers.config = encoder_config_from_json(meta.at("config"));
    ck.step = meta.at("step").get<std::int64_t>();
    ck.val_loss = meta.at("val_loss").is_null() ? std::numeric_limits<double>::quiet_NaN()
                                                : meta.at("val_loss").get<double>();
    const auto total = meta.at("total_values").get<std::int64_t>();
    if (static_cast<std::int64_t>(blob.size()) != total * 4) {
      throw FormatError(blob_path + ": truncated payload (expected " +
                        std::to_string(total * 4) + " bytes, got " +
                        std::to_string(blob.size()) + ")");
    }
    std::map<std::string, Mat*> slots;
    for (Modality mod : kModalities) {
      ck.towers.tower(mod) = EncoderParams::zeros(ck.towers.config);
      for (auto& t : ck.towers.tower(mod).tensors()) {
        slots[std::string(to_string(mod)) + "/" + t.name] = t.value;
      }
    }
    Mat temp(1, 1);
    slots["log_temperature"] = &temp;
    std::size_t filled = 0;
    for (const auto& entry : meta.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      auto it = slots.find(name);
      if (it == slots.end()) throw FormatError(blob_path + ": unexpected tensor " + name);
      Mat& m = *it->second;
      const auto rows = entry.at("shape").at(0).get<Eigen::Index>();
      const auto cols = entry.at("shape").at(1).get<Eigen::Index>();
      if (rows != m.rows() || cols != m.cols()) {
        throw FormatError(blob_path + ": shape mismatch for " + name);
      }
      const auto offset = entry.at("offset").get<std::int64_t>();
      if (offset < 0 || offset + m.size() > total) {
        throw FormatError(blob_path + ": tensor " + name + " overruns the payload");
      }
      detail::ByteReader in(std::string_view(blob).substr(offset * 4, m.size() * 4), blob_path);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.f32(name.c_str());
      ++filled;
    }
    if (filled != slots.size()) {
      throw FormatError(blob_path + ": checkpoint is missing tensors");
    }
    ck.towers.log_temperature = temp(0, 0);
    if (meta.contains("input_norm")) {
      const auto& in = meta.at("input_norm");
      for (Modality mod : kModalities) {
        const std::string key(to_string(mod));
        ck.towers.input.mean[index_of(mod)] = in.at("mean").at(key).get<double>();
        const double sd = in.at("sd").at(key).get<double>();
        if (!(sd > 0.0) || !std::isfinite(sd)) {
          throw FormatError((dir / "checkpoint.json").string() + ": bad input sd for " + key);
        }
        ck.towers.input.sd[index_of(mod)] = sd;
      }
      ck.towers.input.fitted = true;
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "checkpoint.json").string() + ": " + e.what());
  }
  return ck;
}

}  // namespace triclip
