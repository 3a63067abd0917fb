// Command-line front end: one subcommand per pipeline stage.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 contract violation or
// failed self-check.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dot/augment.hpp"
#include "dot/csv.hpp"
#include "dot/data_io.hpp"
#include "dot/errors.hpp"
#include "dot/geo.hpp"
#include "dot/gradcheck_suite.hpp"
#include "dot/lap_metric.hpp"
#include "dot/pixel_distill.hpp"
#include "dot/postprocess.hpp"
#include "dot/trainer.hpp"

namespace {

using namespace dot;

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kInternal = 2;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// "1..25", "5,10,15" or a mix such as "1..3,10".
std::vector<int> parse_int_list(const std::string& text, const std::string& flag) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string part;
  auto to_int = [&](const std::string& s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (s.empty() || used != s.size()) throw ValidationError(flag + ": '" + s + "' is not an integer");
    return v;
  };
  while (std::getline(ss, part, ',')) {
    const auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(to_int(part));
      continue;
    }
    const int lo = to_int(part.substr(0, dots)), hi = to_int(part.substr(dots + 2));
    if (hi < lo) throw ValidationError(flag + ": empty range " + part);
    for (int v = lo; v <= hi; ++v) out.push_back(v);
  }
  if (out.empty()) throw ValidationError(flag + ": empty list");
  return out;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  return out;
}

// Files bound points to [0, W) while augmentation works in the pixel-centre
// extent; clamping to the last pixel centre keeps each point's nearest pixel.
PointSet clamp_to_last_centre(PointSet pts, Index h, Index w) {
  for (auto& p : pts) p = p.cwiseMin(Point(double(w - 1), double(h - 1)));
  return pts;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string preds, labels, index, thresholds = "1..25", report_at = "10,15,20", curves, diagnostics;
  int diagnostic_threshold = 10;
  bool json = false;
};

int run_eval(const EvalArgs& a) {
  EvalConfig cfg;
  cfg.thresholds = parse_int_list(a.thresholds, "--thresholds");
  cfg.report_at = parse_int_list(a.report_at, "--report-at");
  cfg.diagnostic_threshold = a.diagnostic_threshold;
  const PredictionMap preds = load_predictions(a.preds);
  const LabelMap labels =
      a.index.empty() ? load_label_points(a.labels) : to_label_map(load_annotations(a.labels, a.index));
  const EvalReport report = evaluate(preds, labels, cfg);
  std::cout << (a.json ? report.to_json() + "\n" : report.to_text());
  if (!a.curves.empty()) open_out(a.curves) << report.curve_table();
  if (!a.diagnostics.empty()) {
    auto out = open_out(a.diagnostics);
    out << "sequence,frame,tp,fp,fn,count_diff\n";
    for (const auto& f : report.frames)
      out << f.key.sequence << "," << f.key.frame << "," << f.tp << "," << f.fp << "," << f.fn << "," << f.count_diff
          << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------- extract

struct ExtractArgs {
  std::string mask, out = "-", sequence = "mask";
  std::int64_t frame = 0;
  double thresh = 0.2;
  int factor = 1;
  bool full_resolution = false;
};

int run_extract(const ExtractArgs& a) {
  ExtractionConfig cfg{a.thresh};
  cfg.validate();
  if (a.factor != 1 && a.factor != 2 && a.factor != 4) throw ValidationError("--factor must be 1, 2 or 4");
  if (a.full_resolution && a.factor == 1) throw ValidationError("--full-resolution needs --factor 2 or 4");
  const Grid4 logits = read_mask(a.mask);
  ScoredPoints pts;
  if (a.full_resolution)
    pts = extract_points_full_resolution(logits, a.factor, cfg);
  else {
    pts = extract_points(logits, cfg);
    if (a.factor != 1) pts = upscale_points(pts, a.factor);
  }
  PredictionMap m;
  m[{a.sequence, a.frame}] = pts;
  if (a.out == "-")
    write_predictions(std::cout, m);
  else
    write_predictions(a.out, m);
  return kOk;
}

// ---------------------------------------------------------------- gradcheck

int run_gradcheck(const SuiteOptions& opts) {
  const auto cases = run_gradcheck_suite(opts);
  bool ok = true;
  std::printf("%-22s %7s %8s %8s %6s %12s %8s\n", "operation", "trials", "failures", "checked", "kinks", "max_rel_err",
              "seconds");
  for (const auto& c : cases) {
    std::printf("%-22s %7ld %8ld %8ld %6ld %12.3e %8.2f\n", c.name.c_str(), long(c.trials), long(c.failures),
                long(c.checked), long(c.kinks), c.max_rel_error, c.seconds);
    ok = ok && c.passed();
  }
  std::printf("%s\n", ok ? "gradcheck: all passed" : "gradcheck: FAILED");
  return ok ? kOk : kInternal;
}

// ---------------------------------------------------------------- pd-forward

struct PdArgs {
  std::string variant = "hd", image, out, checkpoint;
  Index height = 0, width = 0;
  std::uint64_t seed = 0;
};

int run_pd_forward(const PdArgs& a) {
  const PdVariant v = parse_variant(a.variant);
  Rng rng(a.seed);
  PdParams params = PdParams::init(v, rng);
  if (!a.checkpoint.empty()) {
    if (v != PdVariant::kHD) throw ValidationError("--checkpoint holds an HD module; use --variant hd");
    params = model_from_checkpoint(read_checkpoint(a.checkpoint)).pd;
  }
  params.set_training(false);
  Grid4 input;
  if (!a.image.empty()) {
    input = read_image(a.image);
  } else {
    const bool hd = v == PdVariant::kHD;
    const Index h = a.height > 0 ? a.height : (hd ? 1088 : 2176);
    const Index w = a.width > 0 ? a.width : (hd ? 1920 : 3840);
    input = Grid4({1, 3, h, w});
    for (Index i = 0; i < input.size(); ++i) input.mutable_values()[i] = rng.uniform(-1.0, 1.0);
  }
  const auto t0 = std::chrono::steady_clock::now();
  Grid4 y;
  {
    NoGradGuard guard;
    y = pixel_distill_forward(input, params);
  }
  std::printf("variant %s: %s -> %s in %.2f s\n", to_string(v).c_str(), input.shape().str().c_str(),
              y.shape().str().c_str(), seconds_since(t0));
  if (!a.out.empty()) write_image(a.out, y);
  return kOk;
}

// ---------------------------------------------------------------- train-toy

struct TrainArgs {
  std::string config, out, log;
  std::map<std::string, std::string> flags;
  bool quiet = false;
};

const std::vector<std::string>& train_keys() {
  static const std::vector<std::string> keys{
      "steps",    "batch_size", "lr",         "weight_decay", "beta1",    "beta2",      "adam_eps", "seed",
      "sigma",    "w_neg",      "w_obj",      "w_reg",        "loss",     "aux",        "aux_weight", "patience",
      "n_images", "image_size", "dots_min",   "dots_max",     "val_fraction", "augment"};
  return keys;
}

int run_train(const TrainArgs& a) {
  TrainConfig cfg;
  if (!a.config.empty())
    for (const auto& [k, v] : read_config_file(a.config)) cfg.set(k, v);
  for (const auto& [k, v] : a.flags) cfg.set(k, v);  // flags override the file
  cfg.validate();
  std::optional<std::ofstream> log;
  if (!a.log.empty()) {
    log = open_out(a.log);
    *log << "epoch,step,lr,loss,neg,obj,reg,val_lap5,val_lmap\n";
  }
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train_toy(cfg, [&](const EpochLog& e) {
    if (!a.quiet)
      std::printf("epoch %ld step %ld lr %.3e loss %.4f neg %.4f obj %.4f reg %.4f val_lap5 %.4f val_lmap %.4f\n",
                  long(e.epoch), long(e.step), e.lr, e.loss, e.neg, e.obj, e.reg, e.val_lap5, e.val_lmap);
    if (log)
      *log << e.epoch << "," << e.step << "," << csv::format_exact(e.lr) << "," << csv::format_exact(e.loss) << ","
           << csv::format_exact(e.neg) << "," << csv::format_exact(e.obj) << "," << csv::format_exact(e.reg) << ","
           << csv::format_exact(e.val_lap5) << "," << csv::format_exact(e.val_lmap) << "\n";
    std::fflush(stdout);
  });
  std::printf("steps %ld%s, best val_lap5 %.4f, best val_lmap %.4f, %.1f s\n", long(r.steps_run),
              r.early_stopped ? " (early stop)" : "", r.best_val_lap5, r.best_val_lmap, seconds_since(t0));
  if (!a.out.empty()) write_checkpoint(a.out, make_checkpoint(r.model, cfg));
  return kOk;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  SynthConfig cfg;
  std::string out;
  Index sequences = 1;
};

int run_synth(const SynthArgs& a) {
  a.cfg.validate();
  if (a.sequences < 1 || a.sequences > a.cfg.n_images)
    throw ValidationError("--sequences must lie in [1, n-images]");
  const auto samples = synth_dataset(a.cfg);
  // Per-sequence altitude so the output can feed the split subcommand.
  Rng rng(a.cfg.seed ^ 0xA17u);
  std::vector<double> altitude(static_cast<std::size_t>(a.sequences));
  for (auto& v : altitude) v = std::round(rng.uniform(20.0, 120.0) * 10.0) / 10.0;
  Dataset d;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const auto seq = static_cast<std::size_t>(Index(i) % a.sequences);
    FrameRecord r;
    r.sequence = "synth" + std::to_string(seq);
    r.frame = Index(i) / a.sequences;
    r.height = s.height();
    r.width = s.width();
    r.altitude_m = altitude[seq];
    r.points = to_pixel_bounds(s.points, r.height, r.width);
    d.records.push_back(std::move(r));
    d.images.push_back(s.image);
  }
  write_dataset(a.out, d);
  std::printf("wrote %zu images to %s\n", samples.size(), a.out.c_str());
  return kOk;
}

// ---------------------------------------------------------------- augment

struct AugmentArgs {
  std::string input, out, ops = "flip,resize";
  std::uint64_t seed = 0;
  double resize_min = 0.5, resize_max = 2.0;
  Index mosaic_height = 0, mosaic_width = 0;
};

int run_augment(const AugmentArgs& a) {
  bool flip = false, resize = false, mos = false;
  std::stringstream ss(a.ops);
  for (std::string op; std::getline(ss, op, ',');) {
    if (op == "flip")
      flip = true;
    else if (op == "resize")
      resize = true;
    else if (op == "mosaic")
      mos = true;
    else
      throw ValidationError("--ops: unknown operation '" + op + "' (expected flip, resize, mosaic)");
  }
  if (!(a.resize_min > 0 && a.resize_min <= a.resize_max))
    throw ValidationError("--resize-min/--resize-max must satisfy 0 < min <= max");
  const Dataset in = read_dataset(a.input);
  std::vector<AugSample> samples;
  for (std::size_t i = 0; i < in.records.size(); ++i) {
    const auto& r = in.records[i];
    samples.push_back({in.images[i], clamp_to_last_centre(r.points, r.height, r.width), a.seed * 1315423911u + i});
  }

  Dataset out;
  Index dropped = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    Rng rng(samples[i].rng_seed);
    AugSample s = samples[i];
    if (flip) s = flip_rotate(s, int(rng.below(4)), rng.below(2) == 1);
    if (resize) {
      auto rr = random_resize(s, rng, {a.resize_min, a.resize_max});
      dropped += rr.dropped;
      s = std::move(rr.sample);
    }
    samples[i] = s;
  }
  std::vector<FrameRecord> meta = in.records;
  if (mos) {
    if (samples.size() < 4 || samples.size() % 4 != 0)
      throw ValidationError("mosaic needs a multiple of 4 images, got " + std::to_string(samples.size()));
    const Index oh = a.mosaic_height > 0 ? a.mosaic_height : in.records[0].height;
    const Index ow = a.mosaic_width > 0 ? a.mosaic_width : in.records[0].width;
    if (oh % 2 || ow % 2) throw ValidationError("mosaic size must be even");
    std::vector<AugSample> tiles;
    std::vector<FrameRecord> tile_meta;
    for (std::size_t g = 0; g < samples.size(); g += 4) {
      std::vector<AugSample> group(samples.begin() + long(g), samples.begin() + long(g + 4));
      tiles.push_back(mosaic(group, oh, ow, samples[g].rng_seed ^ 0x5EEDu));
      FrameRecord r = in.records[g];
      if (std::all_of(in.records.begin() + long(g), in.records.begin() + long(g + 4),
                      [](const auto& x) { return x.altitude_m.has_value(); })) {
        double sum = 0;
        for (std::size_t k = g; k < g + 4; ++k) sum += *in.records[k].altitude_m;
        r.altitude_m = sum / 4.0;
      } else {
        r.altitude_m.reset();
      }
      tile_meta.push_back(r);
    }
    samples = std::move(tiles);
    meta = std::move(tile_meta);
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    FrameRecord r = meta[i];
    r.height = samples[i].height();
    r.width = samples[i].width();
    r.points = to_pixel_bounds(samples[i].points, r.height, r.width);
    out.records.push_back(std::move(r));
    out.images.push_back(samples[i].image);
  }
  write_dataset(a.out, out);
  std::printf("wrote %zu images to %s (%ld points left the frame)\n", out.records.size(), a.out.c_str(),
              long(dropped));
  return kOk;
}

// ---------------------------------------------------------------- geolocate

struct GeoArgs {
  std::string preds, poses, out = "-", sequence;
  double fx = 0, fy = 0, cx = -1, cy = -1;
  Index width = 0, height = 0;
  double line_y = -1, radius = 50.0;
  std::optional<double> origin_lat, origin_lon;
  bool all_points = false;
};

int run_geolocate(const GeoArgs& a) {
  CameraIntrinsics k{a.fx, a.fy, a.cx >= 0 ? a.cx : double(a.width) / 2.0, a.cy >= 0 ? a.cy : double(a.height) / 2.0,
                     a.width, a.height};
  k.validate();
  if (a.origin_lat.has_value() != a.origin_lon.has_value())
    throw ValidationError("--origin-lat and --origin-lon go together");
  const auto poses = read_poses(a.poses);
  const PredictionMap preds = load_predictions(a.preds);

  std::string seq = a.sequence;
  if (seq.empty()) {
    for (const auto& [key, _] : preds) {
      if (!seq.empty() && key.sequence != seq)
        throw ValidationError("predictions span several sequences; choose one with --sequence");
      seq = key.sequence;
    }
  }
  std::vector<FrameDetections> frames;
  for (const auto& [key, pts] : preds)
    if (key.sequence == seq) frames.push_back({key.frame, pts});
  auto pose_of = [&](std::int64_t frame) {
    auto it = poses.find(frame);
    if (it == poses.end()) throw ValidationError("no pose for frame " + std::to_string(frame));
    return it->second;
  };

  std::vector<GroundPoint> ground;
  auto project = [&](std::int64_t frame, const ScoredPoint& p) {
    GroundPoint g = pixel_to_ground(Point(p.x, p.y), k, pose_of(frame));
    g.frame = frame;
    if (a.origin_lat) attach_geodetic(g, {*a.origin_lat, *a.origin_lon});
    ground.push_back(g);
  };
  Index count = 0;
  if (a.all_points) {
    for (const auto& f : frames)
      for (const auto& p : f.points) project(f.frame, p);
    count = Index(ground.size());
  } else {
    LineCrossConfig lc{a.line_y >= 0 ? a.line_y : double(a.height) / 2.0, a.radius};
    if (!(lc.match_radius > 0)) throw ValidationError("--radius must be positive");
    const auto result = line_cross_count(frames, lc);
    for (const auto& c : result.crossings) project(c.frame, c.detection);
    count = result.count();
  }
  if (a.out == "-")
    write_ground_points(std::cout, ground, count);
  else
    write_ground_points(a.out, ground, count);
  return kOk;
}

// ---------------------------------------------------------------- split

struct SplitArgs {
  std::string points, index, out = "-", fractions = "0.7,0.15,0.15";
  int strata = 5;
  std::uint64_t seed = 0;
};

int run_split(const SplitArgs& a) {
  SplitOptions opts;
  std::stringstream ss(a.fractions);
  std::vector<double> f;
  for (std::string part; std::getline(ss, part, ',');) {
    try {
      std::size_t used = 0;
      f.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ValidationError("--fractions: '" + part + "' is not a number");
    }
  }
  if (f.size() != 3) throw ValidationError("--fractions needs three values (train,val,test)");
  opts.fractions = {f[0], f[1], f[2]};
  opts.strata = a.strata;
  opts.seed = a.seed;
  std::vector<std::string> warnings;
  const auto split = stratified_split(sequence_altitudes(load_annotations(a.points, a.index)), opts, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  if (a.out == "-")
    write_split(std::cout, split);
  else
    write_split(a.out, split);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tiny-object point localisation toolkit"};
  app.require_subcommand(1);

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "L-AP / L-mAP of predictions against labels");
  eval->add_option("--preds", ev.preds, "predictions CSV (sequence,frame,x,y,score)")->required();
  eval->add_option("--labels", ev.labels, "label points CSV (sequence,frame,x,y)")->required();
  eval->add_option("--index", ev.index, "frame index CSV; lists frames without labels");
  eval->add_option("--thresholds", ev.thresholds, "distance thresholds, e.g. 1..25 or 5,10")->capture_default_str();
  eval->add_option("--report-at", ev.report_at, "thresholds printed as L-AP@t")->capture_default_str();
  eval->add_option("--diagnostic-threshold", ev.diagnostic_threshold, "per-frame TP/FP/FN distance")
      ->capture_default_str();
  eval->add_option("--curves", ev.curves, "write threshold,ap table");
  eval->add_option("--diagnostics", ev.diagnostics, "write per-frame counts");
  eval->add_flag("--json", ev.json, "print the report as JSON");

  ExtractArgs ex;
  auto* extract = app.add_subcommand("extract", "peak extraction from a DOTM logit mask");
  extract->add_option("--mask", ex.mask, "DOTM mask of logits")->required();
  extract->add_option("--thresh", ex.thresh, "probability threshold")->capture_default_str();
  extract->add_option("--factor", ex.factor, "mask-to-image scale (1, 2 or 4)")->capture_default_str();
  extract->add_flag("--full-resolution", ex.full_resolution, "upsample the mask before extraction");
  extract->add_option("--sequence", ex.sequence, "sequence id for the output rows")->capture_default_str();
  extract->add_option("--frame", ex.frame, "frame id for the output rows")->capture_default_str();
  extract->add_option("--out", ex.out, "predictions CSV, - for stdout")->capture_default_str();

  SuiteOptions gc;
  auto* grad = app.add_subcommand("gradcheck", "finite-difference check of every differentiable operation");
  grad->add_option("--trials", gc.trials, "random trials per operation")->capture_default_str();
  grad->add_option("--seed", gc.seed)->capture_default_str();
  grad->add_option("--components", gc.max_components, "components perturbed per input, 0 for all")
      ->capture_default_str();
  grad->add_option("--tolerance", gc.tolerance, "maximum relative error")->capture_default_str();

  PdArgs pd;
  auto* pdf = app.add_subcommand("pd-forward", "run the Pixel Distill module on an image");
  pdf->add_option("--variant", pd.variant, "hd or uhd")->capture_default_str();
  pdf->add_option("--image", pd.image, "PFM input image; random when omitted");
  pdf->add_option("--height", pd.height, "random input height (default 1088 HD, 2176 UHD)");
  pdf->add_option("--width", pd.width, "random input width (default 1920 HD, 3840 UHD)");
  pdf->add_option("--seed", pd.seed, "weight and input seed")->capture_default_str();
  pdf->add_option("--checkpoint", pd.checkpoint, "take HD weights from a train-toy checkpoint");
  pdf->add_option("--out", pd.out, "write the 3-channel output as PFM");

  TrainArgs tr;
  auto* train = app.add_subcommand("train-toy", "train the toy network on synthetic dots");
  train->add_option("--config", tr.config, "key=value file; flags override it");
  train->add_option("--out", tr.out, "checkpoint path");
  train->add_option("--log", tr.log, "per-epoch CSV trace");
  train->add_flag("--quiet", tr.quiet, "only print the summary");
  for (const auto& key : train_keys()) {
    std::string dashed = key;
    std::replace(dashed.begin(), dashed.end(), '_', '-');
    const std::string names = dashed == key ? "--" + key : "--" + key + ",--" + dashed;
    train->add_option_function<std::string>(names, [&tr, key](const std::string& v) { tr.flags[key] = v; },
                                            "overrides config key " + key);
  }

  SynthArgs sy;
  auto* synth = app.add_subcommand("synth", "write a synthetic dot dataset");
  synth->add_option("--out", sy.out, "output directory")->required();
  synth->add_option("--n-images", sy.cfg.n_images)->capture_default_str();
  synth->add_option("--size", sy.cfg.size, "image side in pixels")->capture_default_str();
  synth->add_option("--dots-min", sy.cfg.dots_min)->capture_default_str();
  synth->add_option("--dots-max", sy.cfg.dots_max)->capture_default_str();
  synth->add_option("--seed", sy.cfg.seed)->capture_default_str();
  synth->add_option("--sequences", sy.sequences, "frames are dealt round-robin into this many sequences")
      ->capture_default_str();

  AugmentArgs au;
  auto* aug = app.add_subcommand("augment", "label-consistent geometric augmentation of a dataset directory");
  aug->add_option("--input", au.input, "dataset directory")->required();
  aug->add_option("--out", au.out, "output dataset directory")->required();
  aug->add_option("--ops", au.ops, "comma list of flip, resize, mosaic")->capture_default_str();
  aug->add_option("--seed", au.seed)->capture_default_str();
  aug->add_option("--resize-min", au.resize_min)->capture_default_str();
  aug->add_option("--resize-max", au.resize_max)->capture_default_str();
  aug->add_option("--mosaic-height", au.mosaic_height, "default: first image height");
  aug->add_option("--mosaic-width", au.mosaic_width, "default: first image width");

  GeoArgs geo;
  auto* geol = app.add_subcommand("geolocate", "ground-plane positions of line-crossing detections");
  geol->add_option("--preds", geo.preds, "predictions CSV")->required();
  geol->add_option("--poses", geo.poses, "pose CSV (frame,altitude_m,pitch_deg,yaw_deg,east_m,north_m)")->required();
  geol->add_option("--fx", geo.fx)->required();
  geol->add_option("--fy", geo.fy)->required();
  geol->add_option("--cx", geo.cx, "default: width / 2");
  geol->add_option("--cy", geo.cy, "default: height / 2");
  geol->add_option("--width", geo.width)->required();
  geol->add_option("--height", geo.height)->required();
  geol->add_option("--sequence", geo.sequence, "required when predictions hold several sequences");
  geol->add_option("--line-y", geo.line_y, "counting line row (default: height / 2)");
  geol->add_option("--radius", geo.radius, "association radius in pixels")->capture_default_str();
  geol->add_option("--origin-lat", geo.origin_lat, "adds lat/lon columns");
  geol->add_option("--origin-lon", geo.origin_lon);
  geol->add_flag("--all-points", geo.all_points, "project every detection instead of counting crossings");
  geol->add_option("--out", geo.out, "output CSV, - for stdout")->capture_default_str();

  SplitArgs sp;
  auto* split = app.add_subcommand("split", "altitude-stratified train/val/test split of sequences");
  split->add_option("--points", sp.points, "points CSV")->required();
  split->add_option("--index", sp.index, "frame index CSV with altitude_m")->required();
  split->add_option("--fractions", sp.fractions, "train,val,test")->capture_default_str();
  split->add_option("--strata", sp.strata)->capture_default_str();
  split->add_option("--seed", sp.seed)->capture_default_str();
  split->add_option("--out", sp.out, "output CSV, - for stdout")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    const auto subs = app.get_subcommands();
    std::cerr << (subs.empty() ? app.help() : subs.front()->help());
    return kInvalid;
  }

  try {
    if (eval->parsed()) return run_eval(ev);
    if (extract->parsed()) return run_extract(ex);
    if (grad->parsed()) return run_gradcheck(gc);
    if (pdf->parsed()) return run_pd_forward(pd);
    if (train->parsed()) return run_train(tr);
    if (synth->parsed()) return run_synth(sy);
    if (aug->parsed()) return run_augment(au);
    if (geol->parsed()) return run_geolocate(geo);
    if (split->parsed()) return run_split(sp);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const ContractViolation& e) {
    std::cerr << "contract violation: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kInternal;
  }
  return kInvalid;
}
