#include "dot/data_io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "dot/csv.hpp"
#include "dot/errors.hpp"
#include "dot/rng.hpp"

namespace dot {

namespace {

constexpr char kMaskMagic[4] = {'D', 'O', 'T', 'M'};
constexpr std::size_t kMaskHeader = 12;
constexpr const char* kSplitNames[3] = {"train", "val", "test"};

std::string where(const csv::Table& t, const csv::Row& r) { return t.source + ":" + std::to_string(r.line) + ": "; }

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  return out;
}

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(const std::string& buf, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::vector<FrameRecord> load_annotations(const std::string& points_path, const std::string& index_path) {
  const auto idx = csv::read(index_path);
  csv::expect_header(idx, {"sequence", "frame", "width", "height"}, {"altitude_m"});
  std::map<FrameKey, FrameRecord> records;
  for (const auto& r : idx.rows) {
    FrameRecord rec;
    rec.sequence = r.fields[0];
    if (rec.sequence.empty()) throw ValidationError(where(idx, r) + "empty sequence id");
    rec.frame = csv::to_int(idx, r, 1);
    rec.width = csv::to_int(idx, r, 2);
    rec.height = csv::to_int(idx, r, 3);
    if (rec.width <= 0 || rec.height <= 0) throw ValidationError(where(idx, r) + "image size must be positive");
    if (idx.header.size() > 4) {
      rec.altitude_m = csv::to_double(idx, r, 4);
      if (*rec.altitude_m <= 0) throw ValidationError(where(idx, r) + "altitude must be positive");
    }
    const FrameKey key = rec.key();
    if (!records.emplace(key, std::move(rec)).second)
      throw ValidationError(where(idx, r) + "duplicate frame " + key.str());
  }

  const auto pts = csv::read(points_path);
  csv::expect_header(pts, {"sequence", "frame", "x", "y"}, {"score"});
  for (const auto& r : pts.rows) {
    const FrameKey key{r.fields[0], csv::to_int(pts, r, 1)};
    auto it = records.find(key);
    if (it == records.end()) throw ValidationError(where(pts, r) + "frame " + key.str() + " is not in the frame index");
    const double x = csv::to_double(pts, r, 2), y = csv::to_double(pts, r, 3);
    auto& rec = it->second;
    if (x < 0 || y < 0 || x >= double(rec.width) || y >= double(rec.height)) {
      std::ostringstream os;
      os << where(pts, r) << "point (" << x << ", " << y << ") outside the " << rec.width << "x" << rec.height
         << " image";
      throw ValidationError(os.str());
    }
    rec.points.emplace_back(x, y);
  }
  std::vector<FrameRecord> out;
  out.reserve(records.size());
  for (auto& [_, rec] : records) out.push_back(std::move(rec));
  return out;
}

void write_annotations(const std::string& points_path, const std::string& index_path,
                       const std::vector<FrameRecord>& records) {
  const bool altitude = std::all_of(records.begin(), records.end(), [](const auto& r) { return r.altitude_m.has_value(); });
  auto idx = open_out(index_path);
  idx << "sequence,frame,width,height" << (altitude && !records.empty() ? ",altitude_m" : "") << "\n";
  auto pts = open_out(points_path);
  pts << "sequence,frame,x,y\n";
  for (const auto& r : records) {
    idx << r.sequence << "," << r.frame << "," << r.width << "," << r.height;
    if (altitude && !records.empty()) idx << "," << csv::format_exact(*r.altitude_m);
    idx << "\n";
    for (const auto& p : r.points)
      pts << r.sequence << "," << r.frame << "," << csv::format_fixed(p.x(), 6) << "," << csv::format_fixed(p.y(), 6)
          << "\n";
  }
}

LabelMap to_label_map(const std::vector<FrameRecord>& records) {
  LabelMap m;
  for (const auto& r : records) m[r.key()] = r.points;
  return m;
}

LabelMap load_label_points(const std::string& path) {
  const auto t = csv::read(path);
  csv::expect_header(t, {"sequence", "frame", "x", "y"}, {"score"});
  LabelMap out;
  for (const auto& r : t.rows) {
    const FrameKey key{r.fields[0], csv::to_int(t, r, 1)};
    const double x = csv::to_double(t, r, 2), y = csv::to_double(t, r, 3);
    if (x < 0 || y < 0) throw ValidationError(where(t, r) + "negative label coordinate");
    out[key].emplace_back(x, y);
  }
  return out;
}

PredictionMap load_predictions(const std::string& path) {
  const auto t = csv::read(path);
  csv::expect_header(t, {"sequence", "frame", "x", "y", "score"});
  PredictionMap out;
  for (const auto& r : t.rows) {
    const FrameKey key{r.fields[0], csv::to_int(t, r, 1)};
    const double score = csv::to_double(t, r, 4);
    if (score < 0 || score > 1) throw ValidationError(where(t, r) + "score must lie in [0, 1], got " + r.fields[4]);
    out[key].push_back({csv::to_double(t, r, 2), csv::to_double(t, r, 3), score});
  }
  return out;
}

void write_predictions(const std::string& path, const PredictionMap& preds) {
  auto out = open_out(path);
  write_predictions(out, preds);
}

void write_predictions(std::ostream& out, const PredictionMap& preds) {
  out << "sequence,frame,x,y,score\n";
  for (const auto& [key, ps] : preds)
    for (const auto& p : ps)
      out << key.sequence << "," << key.frame << "," << csv::format_fixed(p.x, 6) << "," << csv::format_fixed(p.y, 6)
          << "," << csv::format_exact(p.score) << "\n";
}

Grid4 read_mask(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() < 4 || !std::equal(kMaskMagic, kMaskMagic + 4, buf.begin()))
    throw FormatError(path + ": bad magic at byte offset 0 (expected DOTM)");
  if (buf.size() < kMaskHeader)
    throw FormatError(path + ": truncated header at byte offset " + std::to_string(buf.size()));
  const std::uint32_t h = get_u32(buf, 4), w = get_u32(buf, 8);
  if (h == 0) throw FormatError(path + ": zero height at byte offset 4");
  if (w == 0) throw FormatError(path + ": zero width at byte offset 8");
  const std::size_t need = kMaskHeader + std::size_t(h) * std::size_t(w) * 4;
  if (buf.size() < need)
    throw FormatError(path + ": truncated payload at byte offset " + std::to_string(buf.size()) + ", header declares " +
                      std::to_string(need) + " bytes");
  if (buf.size() > need) throw FormatError(path + ": unexpected trailing data at byte offset " + std::to_string(need));
  Grid4 g({1, 1, Index(h), Index(w)});
  auto& v = g.mutable_values();
  for (Index i = 0; i < v.size(); ++i)
    v[i] = std::bit_cast<float>(get_u32(buf, kMaskHeader + std::size_t(i) * 4));
  return g;
}

void write_mask(const std::string& path, const Grid4& mask) {
  const Shape s = mask.shape();
  if (s.n != 1 || s.c != 1) throw ContractViolation("write_mask expects a (1,1,H,W) grid, got " + s.str());
  std::string buf(kMaskMagic, 4);
  buf.reserve(kMaskHeader + std::size_t(s.size()) * 4);
  put_u32(buf, static_cast<std::uint32_t>(s.h));
  put_u32(buf, static_cast<std::uint32_t>(s.w));
  for (Index i = 0; i < s.size(); ++i) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(mask.values()[i])));
  auto out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

Grid4 read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  const std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto token = [&](const char* what) {
    while (pos < buf.size() && std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    if (start == pos) throw FormatError(path + ": missing " + what + " at byte offset " + std::to_string(start));
    return std::pair{buf.substr(start, pos - start), start};
  };
  const auto [magic, magic_at] = token("magic");
  if (magic != "PF" && magic != "Pf") throw FormatError(path + ": bad magic at byte offset 0 (expected PF or Pf)");
  const Index channels = magic == "PF" ? 3 : 1;
  auto dim = [&](const char* what) {
    const auto [tok, at] = token(what);
    std::size_t used = 0;
    long v = 0;
    try {
      v = std::stol(tok, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tok.size() || v <= 0)
      throw FormatError(path + ": invalid " + what + " at byte offset " + std::to_string(at));
    return static_cast<Index>(v);
  };
  const Index w = dim("width"), h = dim("height");
  const auto [scale_tok, scale_at] = token("scale");
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::exception&) {
    throw FormatError(path + ": invalid scale at byte offset " + std::to_string(scale_at));
  }
  if (scale == 0 || !std::isfinite(scale))
    throw FormatError(path + ": invalid scale at byte offset " + std::to_string(scale_at));
  const bool little = scale < 0;
  ++pos;  // single whitespace byte before the raster
  const std::size_t need = pos + std::size_t(h * w * channels) * 4;
  if (buf.size() < need)
    throw FormatError(path + ": truncated payload at byte offset " + std::to_string(buf.size()));
  if (buf.size() > need) throw FormatError(path + ": unexpected trailing data at byte offset " + std::to_string(need));
  Grid4 g({1, channels, h, w});
  auto& v = g.mutable_values();
  std::size_t at = pos;
  for (Index row = h - 1; row >= 0; --row)
    for (Index x = 0; x < w; ++x)
      for (Index c = 0; c < channels; ++c, at += 4) {
        std::uint32_t bits = get_u32(buf, at);
        if (!little) bits = (bits >> 24) | ((bits >> 8) & 0xFF00u) | ((bits << 8) & 0xFF0000u) | (bits << 24);
        v[g.shape().offset(0, c, row, x)] = std::bit_cast<float>(bits);
      }
  return g;
}

void write_image(const std::string& path, const Grid4& image) {
  const Shape s = image.shape();
  if (s.n != 1 || (s.c != 1 && s.c != 3))
    throw ContractViolation("write_image expects a (1,1,H,W) or (1,3,H,W) grid, got " + s.str());
  std::string buf = (s.c == 3 ? "PF\n" : "Pf\n") + std::to_string(s.w) + " " + std::to_string(s.h) + "\n-1.0\n";
  for (Index row = s.h - 1; row >= 0; --row)
    for (Index x = 0; x < s.w; ++x)
      for (Index c = 0; c < s.c; ++c) put_u32(buf, std::bit_cast<std::uint32_t>(static_cast<float>(image(0, c, row, x))));
  auto out = open_out(path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

std::string image_file_name(const FrameKey& key) {
  for (char ch : key.sequence)
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-' && ch != '.')
      throw ValidationError("sequence id '" + key.sequence + "' cannot name an image file");
  return key.sequence + "_" + std::to_string(key.frame) + ".pfm";
}

Dataset read_dataset(const std::string& dir) {
  const std::filesystem::path root(dir);
  Dataset d;
  d.records = load_annotations((root / "points.csv").string(), (root / "index.csv").string());
  for (const auto& r : d.records) {
    const auto path = (root / "images" / image_file_name(r.key())).string();
    Grid4 img = read_image(path);
    if (img.shape().h != r.height || img.shape().w != r.width)
      throw ValidationError(path + ": image is " + std::to_string(img.shape().w) + "x" +
                            std::to_string(img.shape().h) + " but the index says " + std::to_string(r.width) + "x" +
                            std::to_string(r.height));
    d.images.push_back(std::move(img));
  }
  return d;
}

void write_dataset(const std::string& dir, const Dataset& data) {
  if (data.images.size() != data.records.size())
    throw ContractViolation("write_dataset: one image per record required");
  const std::filesystem::path root(dir);
  std::error_code ec;
  std::filesystem::create_directories(root / "images", ec);
  if (ec) throw ValidationError("cannot create " + (root / "images").string() + ": " + ec.message());
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& r = data.records[i];
    const Shape s = data.images[i].shape();
    if (s.h != r.height || s.w != r.width)
      throw ContractViolation("write_dataset: image size disagrees with record " + r.key().str());
    write_image((root / "images" / image_file_name(r.key())).string(), data.images[i]);
  }
  write_annotations((root / "points.csv").string(), (root / "index.csv").string(), data.records);
}

std::vector<SequenceInfo> sequence_altitudes(const std::vector<FrameRecord>& records) {
  std::map<std::string, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (!r.altitude_m) throw ValidationError("frame " + r.key().str() + " has no altitude");
    auto& a = acc[r.sequence];
    a.first += *r.altitude_m;
    a.second += 1;
  }
  std::vector<SequenceInfo> out;
  for (const auto& [id, a] : acc) out.push_back({id, a.first / a.second});
  return out;
}

DatasetSplit stratified_split(std::vector<SequenceInfo> seqs, const SplitOptions& opts,
                              std::vector<std::string>* warnings) {
  const auto& f = opts.fractions;
  if (std::any_of(f.begin(), f.end(), [](double x) { return !(x >= 0); }) ||
      std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
    throw ValidationError("split fractions must be non-negative and sum to 1");
  if (opts.strata < 1) throw ValidationError("strata must be at least 1");
  const Index n = static_cast<Index>(seqs.size());
  if (n < 3) throw ValidationError("need at least 3 sequences to split, got " + std::to_string(n));
  for (std::size_t i = 0; i < seqs.size(); ++i)
    for (std::size_t j = i + 1; j < seqs.size(); ++j)
      if (seqs[i].id == seqs[j].id) throw ValidationError("duplicate sequence id " + seqs[i].id);

  int strata = opts.strata;
  if (strata > n / 3) {
    strata = static_cast<int>(std::max<Index>(1, n / 3));
    if (warnings)
      warnings->push_back("reduced strata from " + std::to_string(opts.strata) + " to " + std::to_string(strata) +
                          " for " + std::to_string(n) + " sequences");
  }
  std::sort(seqs.begin(), seqs.end(), [](const SequenceInfo& a, const SequenceInfo& b) {
    return a.mean_altitude != b.mean_altitude ? a.mean_altitude < b.mean_altitude : a.id < b.id;
  });

  Rng rng(opts.seed);
  DatasetSplit out;
  const std::array<std::vector<std::string>*, 3> dest{&out.train, &out.val, &out.test};
  std::array<double, 3> carry{0, 0, 0};  // target minus allocated so far, per split
  for (int s = 0; s < strata; ++s) {
    const Index lo = n * s / strata, hi = n * (s + 1) / strata;
    std::vector<std::string> ids;
    for (Index i = lo; i < hi; ++i) ids.push_back(seqs[std::size_t(i)].id);
    for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng.below(i)]);

    const double m = static_cast<double>(ids.size());
    std::array<Index, 3> count{};
    std::array<double, 3> target{};
    Index assigned = 0;
    for (int j = 0; j < 3; ++j) {
      target[j] = f[j] * m;
      count[j] = static_cast<Index>(std::floor(target[j]));
      assigned += count[j];
    }
    // Hand the leftover seats to splits with a fractional target, preferring
    // those furthest behind overall; each split stays at floor or ceil.
    std::array<int, 3> order{0, 1, 2};
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return target[a] - std::floor(target[a]) + carry[a] > target[b] - std::floor(target[b]) + carry[b];
    });
    for (int j : order) {
      if (assigned >= Index(ids.size())) break;
      if (target[j] > std::floor(target[j])) {
        ++count[j];
        ++assigned;
      }
    }
    std::size_t at = 0;
    for (int j = 0; j < 3; ++j) {
      carry[j] += target[j] - double(count[j]);
      for (Index k = 0; k < count[j]; ++k) dest[j]->push_back(ids[at++]);
    }
  }
  for (int j = 0; j < 3; ++j) {
    if (f[j] > 0 && dest[j]->empty())
      throw ValidationError(std::string(kSplitNames[j]) + " split is empty after rounding; add sequences or change fractions");
    std::sort(dest[j]->begin(), dest[j]->end());
  }
  return out;
}

void write_split(const std::string& path, const DatasetSplit& split) {
  auto out = open_out(path);
  write_split(out, split);
}

void write_split(std::ostream& out, const DatasetSplit& split) {
  out << "sequence,split\n";
  const std::array<const std::vector<std::string>*, 3> parts{&split.train, &split.val, &split.test};
  for (int j = 0; j < 3; ++j)
    for (const auto& s : *parts[j]) out << s << "," << kSplitNames[j] << "\n";
}

}  // namespace dot
