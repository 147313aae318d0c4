// uflow command-line interface: dataset generation, the classical solver,
// unsupervised training, evaluation, flow visualization and the gradient
// check suite. Exit codes: 0 success, 1 usage error, 2 runtime error,
// 3 check failure.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "uflow/config.hpp"
#include "uflow/dataset_io.hpp"
#include "uflow/eval.hpp"
#include "uflow/flo_io.hpp"
#include "uflow/flow_viz.hpp"
#include "uflow/gradcheck.hpp"
#include "uflow/png_io.hpp"
#include "uflow/train.hpp"
#include "uflow/variational.hpp"

namespace fs = std::filesystem;
using namespace uflow;

namespace {

void guard_output(const std::string& path, bool force) {
  if (!force && fs::exists(path))
    throw Error(ErrorCode::ExistingOutput,
                "output exists: " + path + " (pass --force to overwrite)");
}

Config load_config_opt(const std::string& path) {
  return path.empty() ? Config{} : Config::load(path);
}

// --size takes HxW, e.g. 64x64
bool parse_size(const std::string& s, int& h, int& w) {
  int a = 0, b = 0;
  if (std::sscanf(s.c_str(), "%dx%d", &a, &b) != 2) return false;
  h = a;
  w = b;
  return h > 0 && w > 0;
}

int cmd_gen_data(const std::string& out, int count, const std::string& size, uint64_t seed,
                 bool force, double test_fraction, int sprites, double max_translation) {
  int h = 0, w = 0;
  if (!parse_size(size, h, w))
    throw Error(ErrorCode::BadArgument, "--size must look like 64x64");
  MiniFlowNetSpec net_spec;
  int sp = net_spec.stride_product();
  if (h % sp != 0 || w % sp != 0)
    throw Error(ErrorCode::BadArgument,
                "--size " + size + " rejected: dims must be divisible by " + std::to_string(sp) +
                    " (the network's stride product)");

  if (fs::exists(out) && !fs::is_empty(out) && !force)
    throw Error(ErrorCode::ExistingOutput,
                "output dir exists and is not empty: " + out + " (pass --force)");
  if (force && fs::exists(out)) fs::remove_all(out);

  GenDataOptions opt;
  opt.count = count;
  opt.test_fraction = test_fraction;
  opt.pair.width = w;
  opt.pair.height = h;
  opt.pair.sprite_count = sprites;
  opt.pair.max_translation = max_translation;
  opt.pair.seed = seed;
  auto entries = write_dataset(out, opt);
  size_t n_test = 0;
  for (const auto& e : entries) n_test += e.is_test ? 1 : 0;
  std::printf("wrote %zu pairs (%zu train, %zu test) to %s\n", entries.size(),
              entries.size() - n_test, n_test, out.c_str());
  return 0;
}

int cmd_solve(const std::string& a, const std::string& b, const std::string& config,
              const std::string& out, const std::string& viz, const std::string& gt_path,
              bool force) {
  Image I1 = read_image(a);
  Image I2 = read_image(b);
  if (I1.channels == 1 || I2.channels == 1) {
    // replicate gray to RGB so both solver and metric paths see 3 channels
    auto gray_to_rgb = [](const Image& g) {
      if (g.channels == 3) return g;
      Image c(g.height, g.width, 3);
      for (int y = 0; y < g.height; ++y)
        for (int x = 0; x < g.width; ++x)
          for (int k = 0; k < 3; ++k) c.at(x, y, k) = g.at(x, y, 0);
      return c;
    };
    I1 = gray_to_rgb(I1);
    I2 = gray_to_rgb(I2);
  }
  FlowField gt;
  bool have_gt = !gt_path.empty();
  if (have_gt) gt = read_flo(gt_path);

  guard_output(out, force);
  if (!viz.empty()) guard_output(viz, force);

  Config cfg = load_config_opt(config);
  SolveResult res = solve_flow(I1, I2, loss_config_from(cfg), solver_config_from(cfg));
  write_flo(res.flow, out);
  if (!viz.empty()) write_image(colorize_flow(res.flow), viz);

  const auto& last = res.trace.back();
  std::printf("solved %dx%d pair: total loss %.6g (photo %.6g, smooth %.6g)\n", I1.width,
              I1.height, last.total, last.photometric, last.smoothness);
  if (have_gt) {
    EpeReport rep = endpoint_error(res.flow, gt);
    std::printf("EPE vs %s: %.4f px\n", gt_path.c_str(), rep.epe_all);
  }
  return 0;
}

int cmd_train(const std::string& data, const std::string& config, const std::string& out,
              bool resume, int64_t iterations_override) {
  Config cfg = load_config_opt(config);
  TrainConfig tc = train_config_from(cfg);
  if (iterations_override >= 0) tc.total_iterations = iterations_override;

  if (fs::exists(out) && !fs::is_empty(out) && !resume)
    throw Error(ErrorCode::ExistingOutput,
                "run dir exists and is not empty: " + out + " (pass --resume to continue)");

  TrainResult res = train(data, MiniFlowNetSpec{}, tc, out, resume);
  if (!res.curve.empty())
    std::printf("trained %zu iterations, final loss %.6g; checkpoint %s\n", res.curve.size(),
                res.curve.back().total, res.final_checkpoint.c_str());
  else
    std::printf("wrote initial checkpoint %s\n", res.final_checkpoint.c_str());
  return 0;
}

int cmd_eval(const std::string& data, const std::vector<std::string>& methods,
             const std::string& config, const std::string& out, bool force) {
  guard_output(out, force);
  Config cfg = load_config_opt(config);
  BenchmarkSetup setup;
  setup.loss = loss_config_from(cfg);
  setup.solver = solver_config_from(cfg);
  auto rows = run_benchmark(data, methods, setup, out);
  std::printf("%-24s %-6s %10s %10s %12s %12s %14s\n", "method", "split", "epe_all", "epe_noc",
              "px_all", "px_noc", "ms/pair");
  for (const auto& r : rows)
    std::printf("%-24s %-6s %10.4f %10.4f %12zu %12zu %14.2f\n", r.method.c_str(),
                r.split.c_str(), r.epe_all, r.epe_noc, r.n_pixels_all, r.n_pixels_noc,
                r.runtime_ms_per_pair);
  return 0;
}

int cmd_viz(const std::string& flow_path, const std::string& out, double max_mag, bool force) {
  FlowField flow = read_flo(flow_path);
  guard_output(out, force);
  write_image(colorize_flow(flow, max_mag), out);
  return 0;
}

int cmd_gradcheck(const std::string& module) {
  std::vector<CheckResult> results;
  auto append = [&](std::vector<CheckResult> r) {
    results.insert(results.end(), r.begin(), r.end());
  };
  if (module == "all" || module == "penalty") append(check_penalty());
  if (module == "all" || module == "warp") append(check_warp());
  if (module == "all" || module == "losses") append(check_losses());
  if (module == "all" || module == "layers") append(check_layers());
  if (module == "all" || module == "net") append(check_network());
  if (results.empty()) throw Error(ErrorCode::BadArgument, "unknown module '" + module + "'");

  bool all_pass = true;
  std::printf("%-34s %14s %12s %6s\n", "check", "max_rel_err", "tolerance", "state");
  for (const auto& r : results) {
    std::printf("%-34s %14.3e %12.0e %6s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                r.pass ? "ok" : "FAIL");
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uflow: unsupervised optical flow toolkit"};
  app.require_subcommand(1);

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  int gen_count = 16;
  std::string gen_size = "64x64";
  uint64_t gen_seed = 1;
  std::string gen_out;
  bool gen_force = false;
  double gen_test_fraction = 0.125;
  int gen_sprites = 3;
  double gen_translation = 3.0;
  gen->add_option("--count", gen_count, "number of pairs");
  gen->add_option("--size", gen_size, "pair dimensions HxW, e.g. 64x64");
  gen->add_option("--seed", gen_seed, "base seed");
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_flag("--force", gen_force, "replace an existing directory");
  gen->add_option("--test-fraction", gen_test_fraction, "share of pairs in the test split");
  gen->add_option("--sprites", gen_sprites, "sprites per scene");
  gen->add_option("--max-translation", gen_translation, "per-layer translation range, px");

  // solve
  auto* solve = app.add_subcommand("solve", "variational coarse-to-fine solve for one pair");
  std::vector<std::string> solve_pair;
  std::string solve_config, solve_out, solve_viz, solve_gt;
  bool solve_force = false;
  solve->add_option("--pair", solve_pair, "two input images")->expected(2)->required();
  solve->add_option("--config", solve_config, "config file");
  solve->add_option("--out", solve_out, "output .flo path")->required();
  solve->add_option("--viz", solve_viz, "also write a color visualization PNG");
  solve->add_option("--gt", solve_gt, "ground-truth .flo; prints EPE");
  solve->add_flag("--force", solve_force, "overwrite outputs");

  // train
  auto* tr = app.add_subcommand("train", "train MiniFlowNet with the unsupervised loss");
  std::string train_data, train_config, train_out;
  bool train_resume = false;
  int64_t train_iters = -1;
  tr->add_option("--data", train_data, "dataset directory")->required();
  tr->add_option("--config", train_config, "config file");
  tr->add_option("--out", train_out, "run directory")->required();
  tr->add_flag("--resume", train_resume, "resume from the latest checkpoint");
  tr->add_option("--iterations", train_iters, "override train.iterations");

  // eval
  auto* ev = app.add_subcommand("eval", "evaluate methods on the test split");
  std::string eval_data, eval_config, eval_out;
  std::vector<std::string> eval_methods;
  bool eval_force = false;
  ev->add_option("--data", eval_data, "dataset directory")->required();
  ev->add_option("--method", eval_methods, "zero | solver | net:CKPT (repeatable)")->required();
  ev->add_option("--config", eval_config, "config file");
  ev->add_option("--out", eval_out, "report CSV path")->required();
  ev->add_flag("--force", eval_force, "overwrite outputs");

  // viz
  auto* vz = app.add_subcommand("viz", "colorize a .flo file");
  std::string viz_flow, viz_out;
  double viz_maxmag = 0.0;
  bool viz_force = false;
  vz->add_option("--flow", viz_flow, "input .flo")->required();
  vz->add_option("--out", viz_out, "output PNG")->required();
  vz->add_option("--max-mag", viz_maxmag, "saturation scale; 0 = field max");
  vz->add_flag("--force", viz_force, "overwrite outputs");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "run the finite-difference suites");
  std::string gc_module = "all";
  gc->add_option("--module", gc_module, "all | penalty | warp | losses | layers | net");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed())
      return cmd_gen_data(gen_out, gen_count, gen_size, gen_seed, gen_force, gen_test_fraction,
                          gen_sprites, gen_translation);
    if (solve->parsed())
      return cmd_solve(solve_pair[0], solve_pair[1], solve_config, solve_out, solve_viz, solve_gt,
                       solve_force);
    if (tr->parsed()) return cmd_train(train_data, train_config, train_out, train_resume, train_iters);
    if (ev->parsed()) return cmd_eval(eval_data, eval_methods, eval_config, eval_out, eval_force);
    if (vz->parsed()) return cmd_viz(viz_flow, viz_out, viz_maxmag, viz_force);
    if (gc->parsed()) return cmd_gradcheck(gc_module);
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}
