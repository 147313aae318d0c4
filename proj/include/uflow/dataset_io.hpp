#pragma once

// On-disk dataset layout:
//   DIR/NNNNN_img1.png  NNNNN_img2.png  NNNNN_flow.flo  NNNNN_mask.png
//   DIR/manifest.txt    lines of "NNNNN train" / "NNNNN test"
//
// The training view exposes images only; ground-truth flow is reachable
// solely through the evaluation view.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "uflow/data.hpp"
#include "uflow/flo_io.hpp"
#include "uflow/png_io.hpp"

namespace uflow {

struct DatasetEntry {
  std::string id;
  bool is_test = false;
};

inline std::string sample_id(int index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%05d", index);
  return buf;
}

struct GenDataOptions {
  int count = 0;
  double test_fraction = 0.125;
  PairSpec pair;  // pair.seed acts as the base seed; per-index seeds derive from it
};

inline std::vector<DatasetEntry> write_dataset(const std::string& dir,
                                               const GenDataOptions& opt) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  int n_train = opt.count - int(std::lround(opt.count * opt.test_fraction));
  std::vector<DatasetEntry> entries;
  for (int i = 0; i < opt.count; ++i) {
    PairSpec spec = opt.pair;
    spec.seed = hash_seed(opt.pair.seed, uint64_t(i), 0xDA7A);
    SamplePair pair = generate_pair(spec);
    std::string id = sample_id(i);
    std::string base = dir + "/" + id;
    write_image(pair.I1, base + "_img1.png");
    write_image(pair.I2, base + "_img2.png");
    write_flo(pair.gt_flow, base + "_flow.flo");
    write_mask(pair.noc_mask, base + "_mask.png");
    entries.push_back({id, i >= n_train});
  }
  std::ofstream manifest(dir + "/manifest.txt");
  require(manifest.good(), ErrorCode::Unwritable, "cannot write manifest in " + dir);
  for (const auto& e : entries) manifest << e.id << (e.is_test ? " test" : " train") << "\n";
  return entries;
}

inline std::vector<DatasetEntry> load_manifest(const std::string& dir) {
  std::ifstream in(dir + "/manifest.txt");
  require(in.good(), ErrorCode::MissingFile, "no manifest.txt in " + dir);
  std::vector<DatasetEntry> entries;
  std::string id, split;
  while (in >> id >> split) {
    require(split == "train" || split == "test", ErrorCode::BadConfig,
            "manifest: unknown split '" + split + "'");
    entries.push_back({id, split == "test"});
  }
  return entries;
}

// Evaluation view: images, ground truth, mask.
struct EvalSample {
  Image I1, I2;
  FlowField gt_flow;
  ValidityMask noc_mask;
};

inline EvalSample load_eval_sample(const std::string& dir, const std::string& id) {
  EvalSample s;
  s.I1 = read_image(dir + "/" + id + "_img1.png");
  s.I2 = read_image(dir + "/" + id + "_img2.png");
  s.gt_flow = read_flo(dir + "/" + id + "_flow.flo");
  s.noc_mask = read_mask(dir + "/" + id + "_mask.png");
  return s;
}

// Training view: image pairs only.
struct TrainPair {
  Image I1, I2;
};

inline TrainPair load_train_pair(const std::string& dir, const std::string& id) {
  return {read_image(dir + "/" + id + "_img1.png"), read_image(dir + "/" + id + "_img2.png")};
}

}  // namespace uflow
