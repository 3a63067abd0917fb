#include "dot/trainer.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "dot/csv.hpp"
#include "dot/errors.hpp"
#include "dot/lap_metric.hpp"
#include "dot/ops.hpp"
#include "dot/postprocess.hpp"

namespace dot {

// ---------------------------------------------------------------- model

ToyNetParams ToyNetParams::init(Rng& rng, bool use_aux) {
  ToyNetParams p;
  p.pd = PdParams::init(PdVariant::kHD, rng);
  p.stage1 = ConvParams::kaiming_uniform(16, 3, 3, 1, rng);
  p.bn1 = BatchNormParams::identity(16);
  p.stage2 = ConvParams::kaiming_uniform(16, 16, 3, 1, rng);
  p.bn2 = BatchNormParams::identity(16);
  p.head = ConvParams::kaiming_uniform(1, 16, 3, 1, rng);
  p.aux = ConvParams::kaiming_uniform(1, 16, 1, 0, rng);
  p.input_mean = Grid4({1, 3, 1, 1}, 0.0);
  p.input_std = Grid4({1, 3, 1, 1}, 1.0);
  p.use_aux = use_aux;
  return p;
}

void ToyNetParams::set_training(bool on) {
  pd.set_training(on);
  bn1.training = on;
  bn2.training = on;
}

NamedGrids ToyNetParams::named() const {
  NamedGrids out;
  out.emplace_back("input.mean", input_mean);
  out.emplace_back("input.std", input_std);
  pd.append_to(out, "pd");
  append_params(out, "stage1", stage1);
  append_params(out, "bn1", bn1);
  append_params(out, "stage2", stage2);
  append_params(out, "bn2", bn2);
  append_params(out, "head", head);
  append_params(out, "aux", aux);
  return out;
}

std::vector<Grid4> ToyNetParams::trainable() const {
  std::vector<Grid4> out;
  for (const auto& [name, g] : named())
    if (g.requires_grad() && (use_aux || name.rfind("aux.", 0) != 0)) out.push_back(g);
  return out;
}

Index ToyNetParams::parameter_count() const {
  Index n = 0;
  for (const auto& g : trainable()) n += g.size();
  return n;
}

ToyNetOutput toy_forward(const Grid4& images, ToyNetParams& p) {
  Grid4 x = mul(sub(images, p.input_mean), Grid4(p.input_std.shape(), 1.0 / p.input_std.values()));
  Grid4 f = pixel_distill_forward(x, p.pd);
  Grid4 h1 = relu(batch_norm(conv2d(f, p.stage1), p.bn1));
  Grid4 h2 = relu(batch_norm(conv2d(h1, p.stage2), p.bn2));
  ToyNetOutput out{conv2d(h2, p.head), std::nullopt};
  if (p.use_aux) out.aux = conv2d(h2, p.aux);
  return out;
}

// ---------------------------------------------------------------- data

void SynthConfig::validate() const {
  if (n_images <= 0) throw ValidationError("n_images must be positive");
  if (size < 8 || size % 2) throw ValidationError("image size must be even and at least 8");
  if (dots_min < 0 || dots_max < dots_min || dots_max > 20) throw ValidationError("dots range must lie in [0, 20]");
  if (!(radius_min > 0 && radius_max >= radius_min)) throw ValidationError("blob radii must be positive");
}

std::vector<AugSample> synth_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const Index s = cfg.size;
  std::vector<AugSample> out;
  out.reserve(std::size_t(cfg.n_images));
  for (Index i = 0; i < cfg.n_images; ++i) {
    // Each image draws from its own stream so the set is seed-partitioned.
    Rng rng(cfg.seed * 0x9E3779B97F4A7C15ull + std::uint64_t(i) + 1);
    Plane noise(s, s);
    for (Index k = 0; k < noise.size(); ++k) noise.data()[k] = rng.uniform(-1, 1);
    Plane texture = Plane::Zero(s, s);
    for (Index y = 0; y < s; ++y)
      for (Index x = 0; x < s; ++x) {
        double acc = 0;
        int cnt = 0;
        for (Index dy = -2; dy <= 2; ++dy)
          for (Index dx = -2; dx <= 2; ++dx) {
            const Index yy = y + dy, xx = x + dx;
            if (yy < 0 || xx < 0 || yy >= s || xx >= s) continue;
            acc += noise(yy, xx);
            ++cnt;
          }
        texture(y, x) = acc / cnt;
      }
    const double base = rng.uniform(0.2, 0.4);
    const double amp = rng.uniform(0.15, 0.3);
    Plane lum = base + amp * texture;

    AugSample smp{Grid4({1, 3, s, s}), {}, cfg.seed};
    const Index dots = rng.between(cfg.dots_min, cfg.dots_max);
    for (Index d = 0; d < dots; ++d) {
      const Point c(rng.uniform(0, double(s - 1)), rng.uniform(0, double(s - 1)));
      const double r = rng.uniform(cfg.radius_min, cfg.radius_max);
      const double a = rng.uniform(0.5, 0.8);
      for (Index y = 0; y < s; ++y)
        for (Index x = 0; x < s; ++x) {
          const double d2 = (double(x) - c.x()) * (double(x) - c.x()) + (double(y) - c.y()) * (double(y) - c.y());
          if (d2 < 16 * r * r) lum(y, x) += a * std::exp(-d2 / (2 * r * r));
        }
      smp.points.push_back(c);
    }
    const double tint[3] = {rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1), rng.uniform(0.9, 1.1)};
    for (Index c = 0; c < 3; ++c)
      for (Index y = 0; y < s; ++y)
        for (Index x = 0; x < s; ++x) smp.image.at(0, c, y, x) = tint[c] * lum(y, x) + 0.02 * rng.uniform(-1, 1);
    out.push_back(std::move(smp));
  }
  return out;
}

// ---------------------------------------------------------------- config

namespace {

double parse_double(const std::string& key, const std::string& v) {
  double out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size() || !std::isfinite(out))
    throw ValidationError("config '" + key + "': expected a number, got '" + v + "'");
  return out;
}

std::int64_t parse_int(const std::string& key, const std::string& v) {
  std::int64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

std::uint64_t parse_seed(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || r.ec != std::errc() || r.ptr != v.data() + v.size())
    throw ValidationError("config '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config '" + key + "': expected true or false, got '" + v + "'");
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  if (key == "steps") steps = parse_int(key, value);
  else if (key == "batch_size") batch_size = parse_int(key, value);
  else if (key == "lr") lr = parse_double(key, value);
  else if (key == "weight_decay") weight_decay = parse_double(key, value);
  else if (key == "beta1") beta1 = parse_double(key, value);
  else if (key == "beta2") beta2 = parse_double(key, value);
  else if (key == "adam_eps") adam_eps = parse_double(key, value);
  else if (key == "seed") seed = parse_seed(key, value);
  else if (key == "sigma") loss.sigma = parse_double(key, value);
  else if (key == "w_neg") loss.w_neg = parse_double(key, value);
  else if (key == "w_obj") loss.w_obj = parse_double(key, value);
  else if (key == "w_reg") loss.w_reg = parse_double(key, value);
  else if (key == "loss") {
    if (value == "pdl") loss_kind = LossKind::kPdl;
    else if (value == "mse") loss_kind = LossKind::kMse;
    else throw ValidationError("config 'loss': expected pdl or mse, got '" + value + "'");
  }
  else if (key == "aux") aux = parse_bool(key, value);
  else if (key == "aux_weight") aux_weight = parse_double(key, value);
  else if (key == "patience") patience = parse_int(key, value);
  else if (key == "n_images") n_images = parse_int(key, value);
  else if (key == "image_size") image_size = parse_int(key, value);
  else if (key == "dots_min") dots_min = parse_int(key, value);
  else if (key == "dots_max") dots_max = parse_int(key, value);
  else if (key == "val_fraction") val_fraction = parse_double(key, value);
  else if (key == "augment") augment = parse_bool(key, value);
  else throw ValidationError("unknown config key '" + key + "'");
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  auto num = [](double v) { return csv::format_exact(v); };
  os << "steps=" << steps << "\n"
     << "batch_size=" << batch_size << "\n"
     << "lr=" << num(lr) << "\n"
     << "weight_decay=" << num(weight_decay) << "\n"
     << "beta1=" << num(beta1) << "\n"
     << "beta2=" << num(beta2) << "\n"
     << "adam_eps=" << num(adam_eps) << "\n"
     << "seed=" << seed << "\n"
     << "sigma=" << num(loss.sigma) << "\n"
     << "w_neg=" << num(loss.w_neg) << "\n"
     << "w_obj=" << num(loss.w_obj) << "\n"
     << "w_reg=" << num(loss.w_reg) << "\n"
     << "loss=" << (loss_kind == LossKind::kPdl ? "pdl" : "mse") << "\n"
     << "aux=" << (aux ? "true" : "false") << "\n"
     << "aux_weight=" << num(aux_weight) << "\n"
     << "patience=" << patience << "\n"
     << "n_images=" << n_images << "\n"
     << "image_size=" << image_size << "\n"
     << "dots_min=" << dots_min << "\n"
     << "dots_max=" << dots_max << "\n"
     << "val_fraction=" << num(val_fraction) << "\n"
     << "augment=" << (augment ? "true" : "false") << "\n";
  return os.str();
}

void TrainConfig::validate() const {
  if (steps < 0) throw ValidationError("steps must be non-negative");
  if (batch_size < 2) throw ValidationError("batch_size must be at least 2 for batch statistics");
  if (!(lr > 0) || weight_decay < 0) throw ValidationError("lr must be positive and weight_decay non-negative");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1 && adam_eps > 0))
    throw ValidationError("optimiser moments must lie in [0, 1) and eps must be positive");
  if (!(loss.sigma > 0)) throw ValidationError("sigma must be positive");
  if (aux_weight < 0) throw ValidationError("aux_weight must be non-negative");
  if (patience < 1) throw ValidationError("patience must be at least 1");
  if (!(val_fraction > 0 && val_fraction < 1)) throw ValidationError("val_fraction must lie in (0, 1)");
  SynthConfig{n_images, image_size, dots_min, dots_max}.validate();
  if (image_size % 2) throw ValidationError("image_size must be even");
  const Index n_val = Index(std::lround(double(n_images) * val_fraction));
  if (n_val < 1 || n_images - n_val < batch_size)
    throw ValidationError("n_images too small for the validation split and batch size");
}

std::map<std::string, std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path);
  std::map<std::string, std::string> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      if (b == std::string::npos) return std::string();
      return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    };
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw ValidationError(path + ":" + std::to_string(line_no) + ": expected key=value");
    out[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return out;
}

// ---------------------------------------------------------------- training

double cosine_lr(double lr0, Index t, Index total) {
  if (total <= 0) return lr0;
  return lr0 * 0.5 * (1.0 + std::cos(std::numbers::pi * double(t) / double(total)));
}

namespace {

Grid4 stack_images(const std::vector<const AugSample*>& batch) {
  const Shape one = batch.front()->image.shape();
  Grid4 out({Index(batch.size()), one.c, one.h, one.w});
  for (std::size_t i = 0; i < batch.size(); ++i)
    out.mutable_values().segment(Index(i) * one.c * one.plane(), one.c * one.plane()) = batch[i]->image.values();
  return out;
}

Grid4 sample_plane(const Grid4& g, Index n) {
  const Shape s = g.shape();
  return Grid4({1, 1, s.h, s.w}, g.values().segment(s.offset(n, 0, 0, 0), s.plane()).eval());
}

struct Adam {
  std::vector<Grid4> params;
  std::vector<Eigen::ArrayXd> m, v;
  std::vector<bool> decay;
  Index t = 0;

  explicit Adam(const ToyNetParams& model) {
    for (const auto& [name, g] : model.named()) {
      if (!g.requires_grad() || (!model.use_aux && name.rfind("aux.", 0) == 0)) continue;
      params.push_back(g);
      m.push_back(Eigen::ArrayXd::Zero(g.size()));
      v.push_back(Eigen::ArrayXd::Zero(g.size()));
      // Decoupled decay on weights only; biases and BN affine terms are exempt.
      decay.push_back(name.size() > 7 && name.compare(name.size() - 7, 7, ".weight") == 0);
    }
  }

  void zero_grad() {
    for (auto& p : params) p.zero_grad();
  }

  void step(const TrainConfig& cfg, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(cfg.beta1, double(t)), c2 = 1.0 - std::pow(cfg.beta2, double(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const Eigen::ArrayXd g = params[i].grad();
      m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g;
      v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g.square();
      auto& w = params[i].mutable_values();
      if (decay[i]) w *= 1.0 - lr * cfg.weight_decay;
      w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.adam_eps);
    }
  }
};

std::vector<Eigen::ArrayXd> snapshot(const ToyNetParams& p) {
  std::vector<Eigen::ArrayXd> out;
  for (const auto& [_, g] : p.named()) out.push_back(g.values());
  return out;
}

void restore(ToyNetParams& p, const std::vector<Eigen::ArrayXd>& snap) {
  auto named = p.named();
  for (std::size_t i = 0; i < named.size(); ++i) named[i].second.mutable_values() = snap[i];
}

}  // namespace

ValMetrics evaluate_model(ToyNetParams& model, const std::vector<AugSample>& samples, Index batch_size) {
  model.set_training(false);
  NoGradGuard guard;
  PredictionMap preds;
  LabelMap labels;
  for (std::size_t start = 0; start < samples.size(); start += std::size_t(batch_size)) {
    std::vector<const AugSample*> batch;
    for (std::size_t i = start; i < std::min(samples.size(), start + std::size_t(batch_size)); ++i)
      batch.push_back(&samples[i]);
    Grid4 logits = toy_forward(stack_images(batch), model).logits;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const FrameKey key{"val", std::int64_t(start + i)};
      labels[key] = batch[i]->points;
      preds[key] = upscale_points(extract_points(sample_plane(logits, Index(i))), 2);
    }
  }
  model.set_training(true);
  EvalConfig cfg;
  cfg.report_at = {5};
  cfg.diagnostic_threshold = 5;
  const EvalReport rep = evaluate(preds, labels, cfg);
  return {rep.ap_at(5), rep.l_map};
}

TrainResult train_toy(const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  Rng init_rng(cfg.seed);
  TrainResult res{ToyNetParams::init(init_rng, cfg.aux), {}, 0.0, 0.0, 0, false};
  ToyNetParams& model = res.model;

  SynthConfig sc{cfg.n_images, cfg.image_size, cfg.dots_min, cfg.dots_max, 1.0, 3.0, cfg.seed};
  std::vector<AugSample> data = synth_dataset(sc);
  const Index n_val = Index(std::lround(double(cfg.n_images) * cfg.val_fraction));
  std::vector<AugSample> val(data.end() - n_val, data.end());
  data.resize(std::size_t(cfg.n_images - n_val));

  std::vector<Grid4> train_images;
  for (const auto& s : data) train_images.push_back(s.image);
  const ChannelStats st = channel_stats(train_images);
  for (Index c = 0; c < 3; ++c) {
    model.input_mean.at(0, c, 0, 0) = st.mean[std::size_t(c)];
    model.input_std.at(0, c, 0, 0) = st.stddev[std::size_t(c)];
  }
  if (cfg.steps == 0) return res;

  Adam opt(model);
  Rng data_rng(cfg.seed ^ 0xD1B54A32D192ED03ull);
  const Index per_epoch = Index(data.size()) / cfg.batch_size;
  const Index mask_h = cfg.image_size / 2, mask_w = cfg.image_size / 2;
  std::vector<std::size_t> order(data.size());
  std::vector<Eigen::ArrayXd> best = snapshot(model);
  double best_lmap = -1.0;
  Index stale = 0, step = 0;

  for (Index epoch = 1; step < cfg.steps; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[data_rng.below(i)]);
    EpochLog log;
    log.epoch = epoch;
    Index batches = 0;
    for (Index b = 0; b < per_epoch && step < cfg.steps; ++b) {
      std::vector<AugSample> batch;
      std::vector<const AugSample*> ptrs;
      for (Index i = 0; i < cfg.batch_size; ++i) {
        const AugSample& s = data[order[std::size_t(b * cfg.batch_size + i)]];
        if (cfg.augment) {
          const int k = int(data_rng.below(4));
          const bool flip = data_rng.below(2) == 1;
          batch.push_back(flip_rotate(s, k, flip));
        } else {
          batch.push_back(s);
        }
      }
      std::vector<PointSet> mask_points;
      for (const auto& s : batch) {
        ptrs.push_back(&s);
        mask_points.push_back(to_pixel_bounds(downscale_points(s.points, 2), mask_h, mask_w));
      }
      ToyNetOutput out = toy_forward(stack_images(ptrs), model);

      Grid4 loss;
      if (cfg.loss_kind == LossKind::kPdl) {
        PdlBreakdown main = pdl_total(out.logits, std::span<const PointSet>(mask_points), cfg.loss);
        loss = main.total;
        log.neg += main.neg;
        log.obj += main.obj;
        log.reg += main.reg;
        if (out.aux)
          loss = add(loss, scale(pdl_total(*out.aux, std::span<const PointSet>(mask_points), cfg.loss).total,
                                 cfg.aux_weight));
      } else {
        std::vector<HeatmapTarget> targets;
        for (const auto& p : mask_points) targets.push_back(gaussian_target_map(p, mask_h, mask_w, cfg.loss.sigma));
        loss = mse_heatmap_loss(out.logits, targets);
        if (out.aux) loss = add(loss, scale(mse_heatmap_loss(*out.aux, targets), cfg.aux_weight));
      }
      const double value = loss.item();
      if (!std::isfinite(value))
        throw ValidationError("training diverged: non-finite loss at step " + std::to_string(step + 1) +
                              " (epoch " + std::to_string(epoch) + ")");
      opt.zero_grad();
      backward(loss);
      log.lr = cosine_lr(cfg.lr, step, cfg.steps);
      opt.step(cfg, log.lr);
      ++step;
      ++batches;
      log.loss += value;
    }
    if (batches == 0) break;
    log.loss /= double(batches);
    log.neg /= double(batches);
    log.obj /= double(batches);
    log.reg /= double(batches);
    log.step = step;
    const ValMetrics vm = evaluate_model(model, val);
    log.val_lap5 = vm.lap5;
    log.val_lmap = vm.lmap;
    res.trace.push_back(log);
    if (on_epoch) on_epoch(log);
    if (vm.lmap > best_lmap) {
      best_lmap = vm.lmap;
      res.best_val_lmap = vm.lmap;
      res.best_val_lap5 = vm.lap5;
      best = snapshot(model);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  res.steps_run = step;
  restore(model, best);
  return res;
}

// ---------------------------------------------------------------- checkpoint

namespace {

constexpr char kCkMagic[4] = {'D', 'O', 'T', 'C'};
constexpr std::uint32_t kCkVersion = 1;

void put_u32(std::string& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(char((v >> (8 * i)) & 0xFFu));
}
void put_u64(std::string& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(char((v >> (8 * i)) & 0xFFu));
}

struct Reader {
  const std::string& buf;
  const std::string& path;
  std::size_t at = 0;

  void need(std::size_t n, const char* what) const {
    if (buf.size() - at < n)
      throw FormatError(path + ": truncated " + what + " at byte offset " + std::to_string(at));
  }
  std::uint64_t uint(int bytes, const char* what) {
    need(std::size_t(bytes), what);
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf[at + std::size_t(i)])) << (8 * i);
    at += std::size_t(bytes);
    return v;
  }
  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = buf.substr(at, n);
    at += n;
    return s;
  }
};

}  // namespace

Checkpoint make_checkpoint(const ToyNetParams& model, const TrainConfig& cfg) {
  Checkpoint ck;
  for (const auto& [name, g] : model.named()) ck.arrays.emplace_back(name, g.clone());
  ck.config_text = cfg.to_text();
  return ck;
}

void write_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::string b(kCkMagic, 4);
  put_u32(b, kCkVersion);
  put_u32(b, std::uint32_t(ck.arrays.size()));
  for (const auto& [name, g] : ck.arrays) {
    put_u32(b, std::uint32_t(name.size()));
    b += name;
    const Shape s = g.shape();
    for (Index e : {s.n, s.c, s.h, s.w}) put_u32(b, std::uint32_t(e));
    for (Index i = 0; i < g.size(); ++i) put_u64(b, std::bit_cast<std::uint64_t>(g.values()[i]));
  }
  put_u32(b, std::uint32_t(ck.config_text.size()));
  b += ck.config_text;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out.write(b.data(), std::streamsize(b.size()));
}

Checkpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  Reader r{buf, path};
  if (r.bytes(std::min<std::size_t>(4, buf.size()), "magic") != std::string(kCkMagic, 4))
    throw FormatError(path + ": bad magic at byte offset 0 (expected DOTC)");
  const std::size_t version_at = r.at;
  if (r.uint(4, "version") != kCkVersion)
    throw FormatError(path + ": unsupported version at byte offset " + std::to_string(version_at));
  Checkpoint ck;
  const auto count = r.uint(4, "array count");
  for (std::uint64_t a = 0; a < count; ++a) {
    const auto len = r.uint(4, "name length");
    std::string name = r.bytes(std::size_t(len), "name");
    Shape s;
    s.n = Index(r.uint(4, "shape"));
    s.c = Index(r.uint(4, "shape"));
    s.h = Index(r.uint(4, "shape"));
    s.w = Index(r.uint(4, "shape"));
    r.need(std::size_t(s.size()) * 8, "array payload");
    Eigen::ArrayXd v(s.size());
    for (Index i = 0; i < s.size(); ++i) v[i] = std::bit_cast<double>(r.uint(8, "array payload"));
    ck.arrays.emplace_back(std::move(name), Grid4(s, std::move(v)));
  }
  const auto clen = r.uint(4, "config length");
  ck.config_text = r.bytes(std::size_t(clen), "config");
  if (r.at != buf.size()) throw FormatError(path + ": unexpected trailing data at byte offset " + std::to_string(r.at));
  return ck;
}

ToyNetParams model_from_checkpoint(const Checkpoint& ck) {
  TrainConfig cfg;
  std::istringstream cs(ck.config_text);
  std::string line;
  while (std::getline(cs, line)) {
    const auto eq = line.find('=');
    if (eq != std::string::npos) cfg.set(line.substr(0, eq), line.substr(eq + 1));
  }
  Rng rng(0);
  ToyNetParams p = ToyNetParams::init(rng, cfg.aux);
  auto named = p.named();
  if (named.size() != ck.arrays.size())
    throw ValidationError("checkpoint holds " + std::to_string(ck.arrays.size()) + " arrays, model expects " +
                          std::to_string(named.size()));
  for (std::size_t i = 0; i < named.size(); ++i) {
    if (named[i].first != ck.arrays[i].first || named[i].second.shape() != ck.arrays[i].second.shape())
      throw ValidationError("checkpoint array '" + ck.arrays[i].first + "' does not match model array '" +
                            named[i].first + "'");
    named[i].second.mutable_values() = ck.arrays[i].second.values();
  }
  p.set_training(false);
  return p;
}

}  // namespace dot
