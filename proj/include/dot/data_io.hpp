#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dot/frames.hpp"
#include "dot/points.hpp"
#include "dot/tensor.hpp"

namespace dot {

struct FrameRecord {
  std::string sequence;
  std::int64_t frame = 0;
  Index width = 0, height = 0;
  std::optional<double> altitude_m;
  PointSet points;  // full image resolution, inside [0,width) x [0,height)

  FrameKey key() const { return {sequence, frame}; }
};

/// Points file `sequence,frame,x,y[,score]` plus the frame index
/// `sequence,frame,width,height[,altitude_m]`. Every frame listed in the
/// index yields a record, possibly with no points. Records come back sorted
/// by (sequence, frame).
std::vector<FrameRecord> load_annotations(const std::string& points_path, const std::string& index_path);
void write_annotations(const std::string& points_path, const std::string& index_path,
                       const std::vector<FrameRecord>& records);

LabelMap to_label_map(const std::vector<FrameRecord>& records);

/// Labels from a points file alone (optional score column ignored). Frames
/// without points cannot be expressed this way; use the frame index for those.
LabelMap load_label_points(const std::string& path);

/// Points file with a mandatory score column in [0, 1]. Duplicate rows are kept.
PredictionMap load_predictions(const std::string& path);
void write_predictions(const std::string& path, const PredictionMap& preds);
void write_predictions(std::ostream& out, const PredictionMap& preds);

/// DOTM binary mask: "DOTM", little-endian u32 height and width, then
/// height*width little-endian float32 values in row-major order.
Grid4 read_mask(const std::string& path);
void write_mask(const std::string& path, const Grid4& mask);

/// Portable float map: "PF" (3 channels) or "Pf" (1 channel), float32 rows
/// stored bottom to top. Either byte order is read; little-endian is written.
Grid4 read_image(const std::string& path);
void write_image(const std::string& path, const Grid4& image);

/// Directory holding `points.csv`, `index.csv` and `images/<sequence>_<frame>.pfm`.
struct Dataset {
  std::vector<FrameRecord> records;
  std::vector<Grid4> images;  // parallel to records, each (1, C, height, width)
};

std::string image_file_name(const FrameKey& key);
Dataset read_dataset(const std::string& dir);
void write_dataset(const std::string& dir, const Dataset& data);

struct SequenceInfo {
  std::string id;
  double mean_altitude = 0.0;
};

/// Mean altitude per sequence; every frame must carry an altitude.
std::vector<SequenceInfo> sequence_altitudes(const std::vector<FrameRecord>& records);

struct DatasetSplit {
  std::vector<std::string> train, val, test;
};

struct SplitOptions {
  std::array<double, 3> fractions{0.7, 0.15, 0.15};
  int strata = 5;
  std::uint64_t seed = 0;
};

/// Altitude-quantile strata, each divided by the fractions (every split gets
/// the floor or ceiling of its per-stratum target) after a seeded shuffle.
/// Strata are reduced to at most n/3 when there are too few sequences; a
/// note is appended to `warnings` when that happens.
DatasetSplit stratified_split(std::vector<SequenceInfo> sequences, const SplitOptions& opts,
                              std::vector<std::string>* warnings = nullptr);

/// `sequence,split` rows, train first, then val, then test.
void write_split(const std::string& path, const DatasetSplit& split);
void write_split(std::ostream& out, const DatasetSplit& split);

}  // namespace dot
