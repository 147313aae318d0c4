#pragma once

// Endpoint error and the benchmark harness comparing methods on a dataset's
// test split.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "uflow/checkpoint.hpp"
#include "uflow/dataset_io.hpp"
#include "uflow/grid.hpp"
#include "uflow/net.hpp"
#include "uflow/variational.hpp"

namespace uflow {

struct EpeReport {
  double epe_all = 0.0;
  double epe_noc = 0.0;
  size_t n_pixels_all = 0;
  size_t n_pixels_noc = 0;
};

inline EpeReport endpoint_error(const FlowField& pred, const FlowField& gt,
                                const ValidityMask* mask = nullptr) {
  require(pred.same_dims(gt), ErrorCode::DimensionMismatch, "endpoint_error: dims differ");
  if (mask) {
    require(mask->height == gt.height && mask->width == gt.width, ErrorCode::DimensionMismatch,
            "endpoint_error: mask dims differ");
    require(mask->count_true() > 0, ErrorCode::BadArgument, "endpoint_error: empty mask");
  }
  EpeReport rep;
  double sum_all = 0.0, sum_noc = 0.0;
  for (int y = 0; y < gt.height; ++y)
    for (int x = 0; x < gt.width; ++x) {
      double e = std::hypot(pred.u.at(x, y) - gt.u.at(x, y), pred.v.at(x, y) - gt.v.at(x, y));
      sum_all += e;
      ++rep.n_pixels_all;
      if (mask && mask->at(x, y)) {
        sum_noc += e;
        ++rep.n_pixels_noc;
      }
    }
  rep.epe_all = sum_all / double(rep.n_pixels_all);
  rep.epe_noc = mask ? sum_noc / double(rep.n_pixels_noc) : rep.epe_all;
  if (!mask) rep.n_pixels_noc = rep.n_pixels_all;
  return rep;
}

struct BenchmarkRow {
  std::string method;
  std::string split;
  double epe_all = 0.0;
  double epe_noc = 0.0;
  size_t n_pixels_all = 0;
  size_t n_pixels_noc = 0;
  double runtime_ms_per_pair = 0.0;
};

struct BenchmarkSetup {
  LossConfig loss;        // for the solver method
  PyramidConfig solver;
};

// method strings: "zero", "solver", "net:<checkpoint path>"
inline BenchmarkRow benchmark_method(const std::string& dir, const std::string& method,
                                     const std::vector<DatasetEntry>& entries,
                                     const BenchmarkSetup& setup) {
  MiniFlowNet net;
  NetPreprocess pre;
  bool use_net = method.rfind("net:", 0) == 0;
  if (use_net) {
    Checkpoint ck = read_checkpoint(method.substr(4));
    net = net_from_checkpoint(ck);
    pre = ck.preprocess;
  } else {
    require(method == "zero" || method == "solver", ErrorCode::BadArgument,
            "unknown method '" + method + "'");
  }

  BenchmarkRow row;
  row.method = method;
  row.split = "test";
  double sum_all = 0.0, sum_noc = 0.0;
  double total_ms = 0.0;
  size_t n_pairs = 0;

  for (const auto& e : entries) {
    if (!e.is_test) continue;
    EvalSample s = load_eval_sample(dir, e.id);
    auto t0 = std::chrono::steady_clock::now();
    FlowField predicted;
    if (method == "zero") {
      predicted = FlowField(s.gt_flow.height, s.gt_flow.width);
    } else if (method == "solver") {
      predicted = solve_flow(s.I1, s.I2, setup.loss, setup.solver).flow;
    } else {
      Image a = s.I1, b = s.I2;
      if (pre.response_norm) {
        a = response_normalize(a, pre.window, pre.kappa);
        b = response_normalize(b, pre.window, pre.kappa);
      }
      predicted = net.predict_full(a, b);
    }
    auto t1 = std::chrono::steady_clock::now();
    total_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
    ++n_pairs;

    EpeReport rep = endpoint_error(predicted, s.gt_flow, &s.noc_mask);
    sum_all += rep.epe_all * double(rep.n_pixels_all);
    sum_noc += rep.epe_noc * double(rep.n_pixels_noc);
    row.n_pixels_all += rep.n_pixels_all;
    row.n_pixels_noc += rep.n_pixels_noc;
  }
  require(n_pairs > 0, ErrorCode::BadArgument, "no test-split pairs in " + dir);
  row.epe_all = sum_all / double(row.n_pixels_all);
  row.epe_noc = sum_noc / double(row.n_pixels_noc);
  row.runtime_ms_per_pair = total_ms / double(n_pairs);
  return row;
}

inline std::vector<BenchmarkRow> run_benchmark(const std::string& dir,
                                               const std::vector<std::string>& methods,
                                               const BenchmarkSetup& setup,
                                               const std::string& out_csv) {
  std::vector<DatasetEntry> entries = load_manifest(dir);
  std::vector<BenchmarkRow> rows;
  for (const auto& m : methods) rows.push_back(benchmark_method(dir, m, entries, setup));

  std::FILE* f = std::fopen(out_csv.c_str(), "w");
  if (!f) throw Error(ErrorCode::Unwritable, "cannot write " + out_csv);
  std::fprintf(f, "method,split,epe_all,epe_noc,n_pixels_all,n_pixels_noc,runtime_ms_per_pair\n");
  for (const auto& r : rows)
    std::fprintf(f, "%s,%s,%.9g,%.9g,%zu,%zu,%.3f\n", r.method.c_str(), r.split.c_str(),
                 r.epe_all, r.epe_noc, r.n_pixels_all, r.n_pixels_noc, r.runtime_ms_per_pair);
  std::fclose(f);
  return rows;
}

}  // namespace uflow
