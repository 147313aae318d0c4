#pragma once

// Unsupervised training loop: batches of augmented pairs, multiscale loss on
// the geometric-only images, analytic backprop, Adam with a halving learning
// rate. All per-iteration randomness derives from (seed, iteration, slot), so
// runs replay bit for bit and a resumed run matches an uninterrupted one.

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include "uflow/adam.hpp"
#include "uflow/checkpoint.hpp"
#include "uflow/config.hpp"
#include "uflow/dataset_io.hpp"
#include "uflow/losses.hpp"
#include "uflow/net.hpp"

namespace uflow {

struct TrainConfig {
  int batch_size = 4;
  int64_t total_iterations = 20000;
  AdamParams adam{1e-4, 0.9, 0.999, 1e-8};
  int64_t lr_halving_period = 4000;
  uint64_t seed = 1;
  LossConfig loss;
  std::vector<double> level_weights{1.0, 1.0, 1.0};
  int64_t checkpoint_interval = 2000;
  int64_t csv_interval = 10;  // loss CSV row cadence
  TrainSampleConfig sample;

  void validate() const {
    require(batch_size >= 1, ErrorCode::BadConfig, "train: batch_size must be >= 1");
    require(total_iterations >= 0, ErrorCode::BadConfig, "train: negative iteration count");
    adam.validate();
    loss.validate();
    sample.aug.validate();
  }
};

inline TrainConfig train_config_from(const Config& cfg) {
  TrainConfig tc;
  tc.batch_size = int(cfg.get_int("train.batch_size", tc.batch_size));
  tc.total_iterations = cfg.get_int("train.iterations", tc.total_iterations);
  tc.adam.lr = cfg.get_double("train.lr", tc.adam.lr);
  tc.adam.beta1 = cfg.get_double("train.beta1", tc.adam.beta1);
  tc.adam.beta2 = cfg.get_double("train.beta2", tc.adam.beta2);
  tc.adam.eps_hat = cfg.get_double("train.eps_hat", tc.adam.eps_hat);
  tc.lr_halving_period = cfg.get_int("train.lr_halving_period", tc.lr_halving_period);
  tc.seed = uint64_t(cfg.get_int("train.seed", int64_t(tc.seed)));
  tc.checkpoint_interval = cfg.get_int("train.checkpoint_interval", tc.checkpoint_interval);
  tc.loss = loss_config_from(cfg);
  tc.level_weights = level_weights_from(cfg);
  tc.sample.aug = augment_config_from(cfg);
  tc.sample.response_norm = cfg.get_bool("data.response_norm", tc.sample.response_norm);
  tc.sample.window = int(cfg.get_int("data.response_norm_window", tc.sample.window));
  tc.sample.kappa = cfg.get_double("data.response_norm_kappa", tc.sample.kappa);
  tc.validate();
  return tc;
}

struct IterationStats {
  int64_t iteration = 0;  // 1-based, value after the step
  double lr = 0.0;
  double photometric = 0.0;
  double smoothness = 0.0;
  double total = 0.0;
};

struct TrainResult {
  std::vector<IterationStats> curve;  // every iteration
  MiniFlowNet net;
  NetPreprocess preprocess;
  std::string final_checkpoint;
};

namespace detail {

inline std::string checkpoint_name(const std::string& run_dir, int64_t iteration) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "/ckpt_%08" PRId64 ".ckpt", iteration);
  return run_dir + buf;
}

inline int64_t latest_checkpoint_iter(const std::string& run_dir) {
  namespace fs = std::filesystem;
  int64_t best = -1;
  if (!fs::exists(run_dir)) return best;
  for (const auto& e : fs::directory_iterator(run_dir)) {
    std::string name = e.path().filename().string();
    int64_t it = -1;
    if (std::sscanf(name.c_str(), "ckpt_%" SCNd64 ".ckpt", &it) == 1) best = std::max(best, it);
  }
  return best;
}

// Rewrites the loss CSV keeping rows at or before `iteration`; returns the
// stream positioned for appending.
inline void truncate_csv(const std::string& path, int64_t iteration) {
  std::ifstream in(path);
  if (!in.good()) return;
  std::vector<std::string> keep;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("iteration", 0) == 0) {
      keep.push_back(line);
      continue;
    }
    int64_t it = 0;
    if (std::sscanf(line.c_str(), "%" SCNd64 ",", &it) == 1 && it <= iteration) keep.push_back(line);
  }
  in.close();
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << "\n";
}

struct ItemResult {
  std::vector<double> param_grads;
  double total = 0.0, photo = 0.0, smooth = 0.0;
};

}  // namespace detail

// Trains on the manifest's train split. `run_dir` receives loss.csv and
// periodic checkpoints. With resume=true, picks up from the latest
// checkpoint's exact float64 state.
inline TrainResult train(const std::string& data_dir, const MiniFlowNetSpec& net_spec,
                         const TrainConfig& cfg, const std::string& run_dir, bool resume = false) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(run_dir);

  std::vector<DatasetEntry> entries = load_manifest(data_dir);
  std::vector<TrainPair> pool;
  for (const auto& e : entries)
    if (!e.is_test) pool.push_back(load_train_pair(data_dir, e.id));
  require(!pool.empty(), ErrorCode::BadArgument, "no train-split pairs in " + data_dir);

  MiniFlowNet net(net_spec);
  AdamState adam_state(net.param_count());
  int64_t start_iter = 0;

  NetPreprocess preprocess{cfg.sample.response_norm, cfg.sample.window, cfg.sample.kappa};
  const std::string csv_path = run_dir + "/loss.csv";

  if (resume) {
    int64_t it = detail::latest_checkpoint_iter(run_dir);
    require(it >= 0, ErrorCode::MissingCheckpoint, "no checkpoint to resume in " + run_dir);
    Checkpoint ck = read_checkpoint(detail::checkpoint_name(run_dir, it));
    require(ck.has_trainer_state, ErrorCode::MissingCheckpoint,
            "checkpoint lacks trainer state; cannot resume");
    require(ck.trainer.params.size() == net.param_count(), ErrorCode::SizeMismatch,
            "checkpoint does not match the configured architecture");
    net.set_params(ck.trainer.params);
    adam_state = ck.trainer.adam;
    start_iter = ck.trainer.iteration;
    detail::truncate_csv(csv_path, start_iter);
  } else {
    net.init_params(hash_seed(cfg.seed, 0x1217));
    TrainerState st0;
    st0.iteration = 0;
    st0.base_lr = cfg.adam.lr;
    st0.adam = adam_state;
    st0.params = net.params();
    write_checkpoint(detail::checkpoint_name(run_dir, 0), net, preprocess, &st0);
  }

  std::ofstream csv;
  if (start_iter == 0) {
    csv.open(csv_path, std::ios::trunc);
    csv << "iteration,lr,photometric,smoothness,total\n";
  } else {
    csv.open(csv_path, std::ios::app);
  }
  require(csv.good(), ErrorCode::Unwritable, "cannot write " + csv_path);

  TrainResult result;
  const int n_threads = std::min(2u, std::max(1u, std::thread::hardware_concurrency()));

  std::vector<double> param_grads(net.param_count());
  std::vector<double> delta(net.param_count());

  for (int64_t iter = start_iter; iter < cfg.total_iterations; ++iter) {
    AdamParams step_params = cfg.adam;
    step_params.lr = halved_lr(cfg.adam.lr, iter, cfg.lr_halving_period);

    // batch composition is a pure function of (seed, iteration)
    Rng batch_rng(hash_seed(cfg.seed, uint64_t(iter), 0xBA7C));
    std::vector<int> indices(cfg.batch_size);
    for (int s = 0; s < cfg.batch_size; ++s)
      indices[s] = int(batch_rng.uniform_int(0, int64_t(pool.size()) - 1));

    std::vector<detail::ItemResult> items(cfg.batch_size);
    auto worker = [&](int begin, int end) {
      for (int s = begin; s < end; ++s) {
        const TrainPair& tp = pool[indices[s]];
        uint64_t sample_seed = hash_seed(cfg.seed, uint64_t(iter), uint64_t(s) + 1);
        TrainSample ts = make_train_sample(tp.I1, tp.I2, cfg.sample, sample_seed);

        MiniFlowNet::ForwardPass ws;
        std::vector<Tensor4d> flows = net.forward(stack_pair(ts.net_I1, ts.net_I2), ws);
        std::vector<FlowField> preds;
        preds.reserve(flows.size());
        for (const auto& t : flows) preds.push_back(tensor_to_flow(t));

        MultiscaleReport mr =
            multiscale_loss(preds, ts.loss_I1, ts.loss_I2, cfg.level_weights, cfg.loss);

        std::vector<Tensor4d> flow_grads;
        flow_grads.reserve(mr.grads.size());
        double inv_batch = 1.0 / double(cfg.batch_size);
        for (auto& g : mr.grads) {
          Tensor4d t = flow_to_tensor(g);
          for (auto& v : t.data) v *= inv_batch;
          flow_grads.push_back(std::move(t));
        }
        items[s].param_grads = net.backward(ws, flow_grads);
        items[s].total = mr.value;
        items[s].photo = mr.photometric;
        items[s].smooth = mr.smoothness;
      }
    };

    if (n_threads > 1 && cfg.batch_size > 1) {
      int mid = cfg.batch_size / 2;
      std::thread t(worker, 0, mid);
      worker(mid, cfg.batch_size);
      t.join();
    } else {
      worker(0, cfg.batch_size);
    }

    // fixed-order reduction keeps results independent of thread timing
    std::fill(param_grads.begin(), param_grads.end(), 0.0);
    IterationStats stats;
    for (int s = 0; s < cfg.batch_size; ++s) {
      for (size_t i = 0; i < param_grads.size(); ++i) param_grads[i] += items[s].param_grads[i];
      stats.total += items[s].total;
      stats.photometric += items[s].photo;
      stats.smoothness += items[s].smooth;
    }
    stats.total /= double(cfg.batch_size);
    stats.photometric /= double(cfg.batch_size);
    stats.smoothness /= double(cfg.batch_size);
    stats.iteration = iter + 1;
    stats.lr = step_params.lr;

    if (!std::isfinite(stats.total))
      throw Error(ErrorCode::NanLoss,
                  "non-finite loss at iteration " + std::to_string(iter + 1) + " (batch seed " +
                      std::to_string(hash_seed(cfg.seed, uint64_t(iter), 0xBA7C)) + ")");

    adam_step(adam_state, param_grads, step_params, delta);
    {
      auto& p = net.mutable_params();
      for (size_t i = 0; i < p.size(); ++i) p[i] += delta[i];
      net.bump_version();
    }

    result.curve.push_back(stats);
    if (cfg.csv_interval > 0 && stats.iteration % cfg.csv_interval == 0) {
      char line[160];
      std::snprintf(line, sizeof(line), "%" PRId64 ",%.17g,%.17g,%.17g,%.17g\n", stats.iteration,
                    stats.lr, stats.photometric, stats.smoothness, stats.total);
      csv << line;
      csv.flush();
    }

    bool last = stats.iteration == cfg.total_iterations;
    if ((cfg.checkpoint_interval > 0 && stats.iteration % cfg.checkpoint_interval == 0) || last) {
      TrainerState st;
      st.iteration = stats.iteration;
      st.base_lr = cfg.adam.lr;
      st.adam = adam_state;
      st.params = net.params();
      std::string path = detail::checkpoint_name(run_dir, stats.iteration);
      write_checkpoint(path, net, preprocess, &st);
      if (last) result.final_checkpoint = path;
    }
  }

  if (result.final_checkpoint.empty())
    result.final_checkpoint = detail::checkpoint_name(run_dir, cfg.total_iterations);
  if (cfg.total_iterations == 0 && !resume) {
    // iterations 0: the initial checkpoint is the final artifact
    result.final_checkpoint = detail::checkpoint_name(run_dir, 0);
  }

  result.net = std::move(net);
  result.preprocess = preprocess;
  return result;
}

}  // namespace uflow
