// mat: robust dataset distillation pipeline driver.
//
// Subcommands cover the whole workflow: gen-data (deterministic blobs),
// buffer (EMA-smoothed adversarial expert trajectories), distill (trajectory
// matching with meta-gradients), eval (natural training + robustness
// measurement), diagnose (weight-variance CSV), sweep (ablation grids),
// import (raw tensors -> MATX) and info (container metadata).

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mat/config.hpp"
#include "mat/data.hpp"
#include "mat/distill.hpp"
#include "mat/errors.hpp"
#include "mat/eval.hpp"
#include "mat/expert.hpp"
#include "mat/rng.hpp"

namespace fs = std::filesystem;
using namespace mat;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  int jobs = 0;  // 0 = use run.jobs from config
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "run configuration file");
  cmd->add_option("--set", args.overrides,
                  "override a config value as section.key=value (repeatable)");
  cmd->add_option("--jobs", args.jobs, "worker count (1 = bit-exact reproducible)");
}

RunConfig make_config(const CommonArgs& args) {
  RunConfig cfg = args.config_path.empty() ? RunConfig() : RunConfig::load(args.config_path);
  for (const auto& o : args.overrides) cfg.set(o);
  return cfg;
}

int effective_jobs(const CommonArgs& args, const RunConfig& cfg) {
  const int jobs = args.jobs > 0 ? args.jobs : cfg.integer("run.jobs");
  return std::max(jobs, 1);
}

ModelSpec spec_from_config(const RunConfig& cfg) {
  const std::string family = cfg.get("model.family");
  const std::string in = cfg.get("model.input");
  const ImageShape shape = [&] {
    ModelSpec probe = ModelSpec::parse("mlp:in=" + in + ",c=2,h=");
    return probe.input;
  }();
  if (family == "convnet") {
    const std::string norm = cfg.get("model.norm");
    if (norm != "ia" && norm != "none")
      fail(ErrorCategory::config, "model.norm must be 'ia' or 'none'");
    return ModelSpec::make_convnet(cfg.integer("model.depth"), cfg.integer("model.width"),
                                   shape, cfg.integer("model.classes"),
                                   norm == "ia" ? NormKind::instance_affine : NormKind::none);
  }
  if (family == "mlp") {
    std::vector<int> hidden;
    const std::string hs = cfg.get("model.hidden");
    size_t pos = 0;
    while (pos < hs.size()) {
      size_t dash = hs.find('-', pos);
      if (dash == std::string::npos) dash = hs.size();
      if (dash > pos) hidden.push_back(std::stoi(hs.substr(pos, dash - pos)));
      pos = dash + 1;
    }
    return ModelSpec::make_mlp(shape, cfg.integer("model.classes"), hidden);
  }
  fail(ErrorCategory::config, "model.family must be 'convnet' or 'mlp'");
}

AttackConfig attack_from_config(const RunConfig& cfg) {
  AttackConfig a;
  a.epsilon = cfg.f64("attack.eps");
  a.steps = cfg.integer("attack.steps");
  a.step_size = cfg.f64("attack.step_size");
  a.random_start = cfg.boolean("attack.random_start");
  a.validate();
  return a;
}

std::string train_data_path(const RunConfig& cfg) {
  const std::string p = cfg.get("data.train_path");
  return p.empty() ? cfg.get("paths.out_dir") + "/blobs_train.matx" : p;
}

std::string test_data_path(const RunConfig& cfg) {
  const std::string p = cfg.get("data.test_path");
  return p.empty() ? cfg.get("paths.out_dir") + "/blobs_test.matx" : p;
}

std::string buffer_dir(const RunConfig& cfg) {
  const std::string p = cfg.get("buffer.dir");
  return p.empty() ? cfg.get("paths.out_dir") + "/buffers" : p;
}

std::string synthetic_path(const RunConfig& cfg) {
  const std::string p = cfg.get("distill.out");
  return p.empty() ? cfg.get("paths.out_dir") + "/synthetic.mats" : p;
}

void echo_config(const RunConfig& cfg, const std::string& next_to) {
  write_file_atomic(next_to + ".cfg", cfg.echo());
}

void embed_provenance(MetaDoc& meta, const RunConfig& cfg, const std::string& command) {
  meta.set("command", command);
  for (const auto& [key, value] : cfg.provenance_entries()) meta.set("config." + key, value);
}

ExpertConfig expert_config(const RunConfig& cfg) {
  ExpertConfig e;
  e.loss.kind = variant_from_name(cfg.get("buffer.variant"));
  e.loss.beta = cfg.f64("buffer.beta");
  e.attack = attack_from_config(cfg);
  e.ema_decay = cfg.f64("buffer.ema_decay");
  e.outer_lr = cfg.f64("buffer.lr");
  e.momentum = cfg.f64("buffer.momentum");
  e.epochs = cfg.integer("buffer.epochs");
  e.batch_size = cfg.integer("buffer.batch_size");
  e.record_raw = cfg.boolean("buffer.save_raw");
  e.validate();
  return e;
}

std::string expert_file_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "buffer_%03d.matb", index);
  return buf;
}

// ---------------------------------------------------------------- gen-data
int cmd_gen_data(const CommonArgs& args) {
  const RunConfig cfg = make_config(args);
  if (cfg.get("data.source") != "blobs")
    fail(ErrorCategory::config, "gen-data requires data.source = blobs");
  BlobSplits splits =
      gen_blobs(cfg.integer("data.classes"), cfg.integer("data.per_class"),
                cfg.integer("data.height"), cfg.integer("data.width"), cfg.f64("data.sigma"),
                derive_seed(cfg.u64("run.seed"), "gen-data"));
  embed_provenance(splits.train.meta, cfg, "gen-data");
  embed_provenance(splits.test.meta, cfg, "gen-data");
  const std::string train_path = train_data_path(cfg);
  const std::string test_path = test_data_path(cfg);
  save_raw(splits.train, train_path);
  save_raw(splits.test, test_path);
  echo_config(cfg, train_path);
  echo_config(cfg, test_path);
  std::cout << "wrote " << train_path << " (" << splits.train.count() << " samples), "
            << test_path << " (" << splits.test.count() << " samples)\n";
  return 0;
}

// ------------------------------------------------------------------ buffer
int run_buffer_stage(const RunConfig& cfg, int jobs) {
  const RawDataset train = load_raw(train_data_path(cfg));
  const ModelSpec spec = spec_from_config(cfg);
  const ExpertConfig ecfg = expert_config(cfg);
  const int experts = cfg.integer("buffer.experts");
  if (experts < 1) fail(ErrorCategory::config, "buffer.experts must be >= 1");
  const uint64_t stage_seed = derive_seed(cfg.u64("run.seed"), "buffer");
  const std::string dir = buffer_dir(cfg);
  fs::create_directories(dir);

  const char* cache_env = std::getenv("MAT_CACHE_DIR");
  const std::string cache_dir = cache_env ? cache_env : "";
  auto cache_key = [&](uint64_t expert_seed) {
    std::string material = spec.canonical() + "\n";
    for (const auto& [k, v] : cfg.provenance_entries())
      if (k.starts_with("buffer.") || k.starts_with("attack.")) material += k + "=" + v + "\n";
    material += "dataset=" + hex16(train.digest()) + "\n";
    material += "seed=" + std::to_string(expert_seed) + "\n";
    return hex16(fnv1a64(material));
  };

  std::atomic<int> next{0};
  std::vector<std::string> errors(static_cast<size_t>(experts), std::string());
  auto work = [&] {
    for (int i = next.fetch_add(1); i < experts; i = next.fetch_add(1)) {
      try {
        const uint64_t expert_seed = derive_seed(stage_seed, uint64_t(i));
        const std::string out_path = dir + "/" + expert_file_name(i);
        if (!cache_dir.empty()) {
          const std::string cached = cache_dir + "/" + cache_key(expert_seed) + ".matb";
          if (fs::exists(cached)) {
            write_file_atomic(out_path, read_file(cached));
            continue;
          }
        }
        TrajectoryBuffer buffer = train_expert(train, spec, ecfg, expert_seed);
        buffer.meta.set_u64("expert_index", uint64_t(i));
        embed_provenance(buffer.meta, cfg, "buffer");
        const std::string bytes = encode_buffer(buffer);
        write_file_atomic(out_path, bytes);
        if (!cache_dir.empty()) {
          fs::create_directories(cache_dir);
          write_file_atomic(cache_dir + "/" + cache_key(expert_seed) + ".matb", bytes);
        }
      } catch (const Error& e) {
        errors[size_t(i)] = e.what();
      }
    }
  };
  if (jobs <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < std::min(jobs, experts); ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (int i = 0; i < experts; ++i)
    if (!errors[size_t(i)].empty())
      fail(ErrorCategory::numeric, "expert " + std::to_string(i) + ": " + errors[size_t(i)]);

  echo_config(cfg, dir + "/effective");
  std::cout << "wrote " << experts << " trajectory buffers to " << dir << "\n";
  return 0;
}

int cmd_buffer(const CommonArgs& args) {
  const RunConfig cfg = make_config(args);
  return run_buffer_stage(cfg, effective_jobs(args, cfg));
}

// ----------------------------------------------------------------- distill
std::vector<std::string> list_buffer_files(const std::string& dir) {
  std::vector<std::string> files;
  if (!fs::is_directory(dir))
    fail(ErrorCategory::io, "buffer directory '" + dir + "' does not exist");
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".matb") files.push_back(entry.path().string());
  std::sort(files.begin(), files.end());
  if (files.empty()) fail(ErrorCategory::io, "no .matb files under '" + dir + "'");
  return files;
}

int cmd_distill(const CommonArgs& args, bool verify_provenance) {
  const RunConfig cfg = make_config(args);
  const std::vector<std::string> files = list_buffer_files(buffer_dir(cfg));
  std::vector<TrajectoryBuffer> buffers;
  buffers.reserve(files.size());
  std::string buffer_digests;
  for (const auto& f : files) {
    buffers.push_back(load_buffer(f, verify_provenance));
    if (!buffer_digests.empty()) buffer_digests += ',';
    buffer_digests += buffers.back().meta.get("payload_digest");
  }

  MatchConfig mcfg;
  mcfg.max_start_epoch = cfg.integer("distill.max_start_epoch");
  mcfg.target_offset = cfg.integer("distill.target_offset");
  mcfg.max_student_steps = cfg.integer("distill.max_student_steps");
  mcfg.student_batch = cfg.integer("distill.student_batch");
  mcfg.syn_lr = cfg.f64("distill.syn_lr");
  mcfg.lr_lr = cfg.f64("distill.lr_lr");
  mcfg.syn_momentum = cfg.f64("distill.syn_momentum");
  mcfg.iterations = cfg.integer("distill.iterations");
  mcfg.degenerate_eps = cfg.f64("distill.degenerate_eps");
  const std::string track = cfg.get("distill.track");
  if (track != "ema" && track != "raw")
    fail(ErrorCategory::config, "distill.track must be 'ema' or 'raw'");
  mcfg.track = track == "ema" ? Track::ema : Track::raw;
  if (mcfg.iterations < 1) fail(ErrorCategory::config, "distill.iterations must be >= 1");

  const std::string init = cfg.get("distill.init");
  if (init != "real" && init != "noise")
    fail(ErrorCategory::config, "distill.init must be 'real' or 'noise'");
  const RawDataset train = load_raw(train_data_path(cfg));
  SyntheticDataset synthetic = init_synthetic(
      train, cfg.integer("distill.ipc"), init == "real" ? InitStrategy::real : InitStrategy::noise,
      cfg.f64("distill.inner_lr"), derive_seed(cfg.u64("run.seed"), "distill-init"));

  Distiller distiller(std::move(synthetic), buffers, mcfg, cfg.u64("run.seed"));
  std::string stats_csv = distill_stats_csv_header();
  for (int i = 0; i < mcfg.iterations; ++i) {
    const DistillStats stats = distiller.step();
    stats_csv += distill_stats_csv_row(stats);
  }

  SyntheticDataset out = distiller.synthetic();
  out.meta.set("buffer_digests", buffer_digests);
  out.meta.set("buffer_count", std::to_string(buffers.size()));
  embed_provenance(out.meta, cfg, "distill");
  const std::string out_path = synthetic_path(cfg);
  save_synthetic(out, out_path);
  write_file_atomic(out_path + ".stats.csv", stats_csv);
  echo_config(cfg, out_path);
  std::cout << "wrote " << out_path << " (digest " << hex16(out.digest()) << ") and "
            << out_path << ".stats.csv\n";
  return 0;
}

// -------------------------------------------------------------------- eval
int cmd_eval(const CommonArgs& args, bool verify_provenance) {
  const RunConfig cfg = make_config(args);
  const SyntheticDataset synthetic = load_synthetic(synthetic_path(cfg), verify_provenance);
  const RawDataset test = load_raw(test_data_path(cfg));

  EvalConfig ecfg;
  ecfg.spec = spec_from_config(cfg);
  ecfg.epochs = cfg.integer("eval.epochs");
  ecfg.lr = cfg.f64("eval.lr");
  ecfg.batch_size = cfg.integer("eval.batch_size");
  ecfg.attack_chunk = cfg.integer("eval.chunk");
  const int seed_count = cfg.integer("eval.seeds");
  if (seed_count < 1) fail(ErrorCategory::config, "eval.seeds must be >= 1");
  const uint64_t stage_seed = derive_seed(cfg.u64("run.seed"), "eval");
  for (int i = 0; i < seed_count; ++i)
    ecfg.seeds.push_back(derive_seed(stage_seed, uint64_t(i)));
  for (const std::string& name : cfg.list("eval.attacks")) {
    EvalAttack a;
    a.name = name;
    a.cfg = attack_from_config(cfg);
    if (name == "fgsm") a.cfg = AttackConfig::fgsm_equivalent(a.cfg.epsilon);
    ecfg.attacks.push_back(std::move(a));
  }

  const EvalReport report = run_eval(synthetic, test, ecfg, effective_jobs(args, cfg));
  const std::string digest = hex16(synthetic.digest());
  const std::string base = cfg.get("paths.out_dir") + "/report_" + digest;
  write_file_atomic(base + ".txt", report_text(report));
  write_file_atomic(base + ".csv", report_csv(report));
  echo_config(cfg, base);
  std::cout << report_text(report);
  std::cout << "wrote " << base << ".txt and " << base << ".csv\n";
  return 0;
}

// ---------------------------------------------------------------- diagnose
int cmd_diagnose(const std::string& buffer_path, std::string out_path) {
  const TrajectoryBuffer buffer = load_buffer(buffer_path);
  if (out_path.empty()) out_path = buffer_path + ".variance.csv";
  write_file_atomic(out_path, weight_variance_csv(buffer));
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

// ------------------------------------------------------------------- sweep
int cmd_sweep(const CommonArgs& args, std::string decays, std::string epsilons,
              bool paper_grid) {
  RunConfig base = make_config(args);
  if (paper_grid) {
    if (decays.empty()) decays = "0.99,0.999,0.9999";
    if (epsilons.empty())
      epsilons = format_f64(2.0 / 255.0) + "," + format_f64(4.0 / 255.0) + "," +
                 format_f64(6.0 / 255.0) + "," + format_f64(8.0 / 255.0);
  }
  if (decays.empty() && epsilons.empty())
    fail(ErrorCategory::usage, "sweep: give --decays and/or --epsilons, or --paper-grid");

  auto split_list = [](const std::string& s) {
    std::vector<std::string> out;
    size_t pos = 0;
    while (pos < s.size()) {
      size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      if (comma > pos) out.push_back(s.substr(pos, comma - pos));
      pos = comma + 1;
    }
    return out;
  };
  std::vector<std::string> decay_values =
      decays.empty() ? std::vector<std::string>{base.get("buffer.ema_decay")}
                     : split_list(decays);
  std::vector<std::string> eps_values =
      epsilons.empty() ? std::vector<std::string>{base.get("attack.eps")} : split_list(epsilons);

  const std::string root = base.get("paths.out_dir") + "/sweep";
  int runs = 0;
  for (const auto& decay : decay_values)
    for (const auto& eps : eps_values) {
      RunConfig cfg = base;
      cfg.set("buffer.ema_decay", decay);
      cfg.set("attack.eps", eps);
      cfg.set("buffer.dir", root + "/decay_" + decay + "_eps_" + eps);
      run_buffer_stage(cfg, effective_jobs(args, cfg));
      ++runs;
    }
  std::cout << "sweep finished: " << runs << " buffer sets under " << root << "\n";
  return 0;
}

// ------------------------------------------------------------------ import
int cmd_import(const std::string& dir, int height, int width, int channels,
               const std::string& split, const std::string& out_path) {
  if (height < 1 || width < 1 || channels < 1)
    fail(ErrorCategory::usage, "import: --height/--width/--channels must be positive");
  if (split != "train" && split != "test")
    fail(ErrorCategory::usage, "import: --split must be train or test");
  if (!fs::is_directory(dir))
    fail(ErrorCategory::io, "import: '" + dir + "' is not a directory");

  // Per-class subdirectories named by integer label, each holding raw
  // little-endian float32 tensors of height*width*channels pixels.
  std::vector<std::pair<int, std::string>> class_dirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    try {
      class_dirs.emplace_back(std::stoi(name), entry.path().string());
    } catch (...) {
      fail(ErrorCategory::io, "import: subdirectory '" + name + "' is not a class index");
    }
  }
  std::sort(class_dirs.begin(), class_dirs.end());
  if (class_dirs.size() < 2) fail(ErrorCategory::io, "import: need at least 2 class dirs");

  RawDataset dataset;
  dataset.split = split == "train" ? Split::train : Split::test;
  dataset.num_classes = int(class_dirs.size());
  dataset.images.shape = {height, width, channels};
  const size_t sample_bytes = dataset.images.shape.pixels() * 4;
  for (size_t c = 0; c < class_dirs.size(); ++c) {
    if (class_dirs[c].first != int(c))
      fail(ErrorCategory::io, "import: class indices must be contiguous from 0");
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[c].second))
      if (entry.is_regular_file()) files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string bytes = read_file(f);
      if (bytes.size() != sample_bytes)
        fail(ErrorCategory::mismatch, "import: '" + f + "' holds " +
                                          std::to_string(bytes.size()) + " bytes, expected " +
                                          std::to_string(sample_bytes));
      ByteReader r(bytes, f);
      for (size_t p = 0; p < dataset.images.shape.pixels(); ++p) {
        const double v = double(r.f32());
        if (!(v >= 0.0 && v <= 1.0))
          fail(ErrorCategory::mismatch, "import: '" + f + "' has pixels outside [0,1]");
        dataset.images.pixels.push_back(v);
      }
      dataset.labels.push_back(int(c));
      ++dataset.images.count;
    }
  }
  dataset.meta.set("generator", "import");
  dataset.meta.set("source_dir", fs::path(dir).filename().string());
  save_raw(dataset, out_path);
  std::cout << "wrote " << out_path << " (" << dataset.count() << " samples, "
            << dataset.num_classes << " classes)\n";
  return 0;
}

// -------------------------------------------------------------------- info
int cmd_info(const std::string& path) {
  const std::string bytes = read_file(path);
  if (bytes.size() < 4) fail(ErrorCategory::bad_magic, path + ": too short");
  const std::string magic = bytes.substr(0, 4);
  MetaDoc meta;
  std::string kind;
  if (magic == "MATB") {
    const TrajectoryBuffer b = decode_buffer(bytes, path);
    kind = "trajectory-buffer spec=" + b.spec.canonical() +
           " snapshots=" + std::to_string(b.snapshots_ema.size()) +
           " raw=" + (b.has_raw() ? "yes" : "no");
    meta = b.meta;
  } else if (magic == "MATS") {
    const SyntheticDataset s = decode_synthetic(bytes, path);
    kind = "synthetic-dataset classes=" + std::to_string(s.num_classes) +
           " ipc=" + std::to_string(s.ipc) + " digest=" + hex16(s.digest());
    meta = s.meta;
  } else if (magic == "MATX") {
    const RawDataset d = decode_raw(bytes, path);
    kind = "raw-dataset count=" + std::to_string(d.count()) +
           " classes=" + std::to_string(d.num_classes) + " digest=" + hex16(d.digest());
    meta = d.meta;
  } else {
    fail(ErrorCategory::bad_magic, path + ": unknown container magic");
  }
  std::cout << kind << "\n" << meta.serialize();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust dataset distillation via smoothed adversarial trajectory matching"};
  app.require_subcommand(1);

  CommonArgs gen_args, buffer_args, distill_args, eval_args, sweep_args;
  bool distill_verify = false, eval_verify = false;
  std::string diagnose_buffer, diagnose_out;
  std::string sweep_decays, sweep_epsilons;
  bool sweep_paper = false;
  std::string import_dir, import_split = "train", import_out;
  int import_h = 0, import_w = 0, import_c = 1;
  std::string info_path;

  add_common(app.add_subcommand("gen-data", "generate the deterministic blobs dataset"),
             gen_args);
  add_common(app.add_subcommand("buffer", "train expert trajectories and write .matb files"),
             buffer_args);
  CLI::App* distill_cmd =
      app.add_subcommand("distill", "distill a synthetic dataset from trajectory buffers");
  add_common(distill_cmd, distill_args);
  distill_cmd->add_flag("--verify-provenance", distill_verify,
                        "re-derive buffer payload digests before distilling");
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "natural-train on the synthetic set and measure robustness");
  add_common(eval_cmd, eval_args);
  eval_cmd->add_flag("--verify-provenance", eval_verify,
                     "re-derive the synthetic payload digest before evaluating");
  CLI::App* diagnose_cmd =
      app.add_subcommand("diagnose", "emit the weight-variance CSV for a buffer");
  diagnose_cmd->add_option("--buffer", diagnose_buffer, "trajectory buffer file")->required();
  diagnose_cmd->add_option("--out", diagnose_out, "output CSV path");
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "buffer-stage grid over decay/epsilon");
  add_common(sweep_cmd, sweep_args);
  sweep_cmd->add_option("--decays", sweep_decays, "comma list of EMA decays");
  sweep_cmd->add_option("--epsilons", sweep_epsilons, "comma list of attack epsilons");
  sweep_cmd->add_flag("--paper-grid", sweep_paper,
                      "decay in {0.99,0.999,0.9999} and eps in {2,4,6,8}/255");
  CLI::App* import_cmd =
      app.add_subcommand("import", "convert per-class raw float32 tensors into MATX");
  import_cmd->add_option("--dir", import_dir, "directory of per-class subdirectories")
      ->required();
  import_cmd->add_option("--height", import_h)->required();
  import_cmd->add_option("--width", import_w)->required();
  import_cmd->add_option("--channels", import_c);
  import_cmd->add_option("--split", import_split, "train or test");
  import_cmd->add_option("--out", import_out, "output MATX path")->required();
  CLI::App* info_cmd = app.add_subcommand("info", "print container metadata");
  info_cmd->add_option("--file", info_path, "MATB/MATS/MATX file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("gen-data")) return cmd_gen_data(gen_args);
    if (app.got_subcommand("buffer")) return cmd_buffer(buffer_args);
    if (app.got_subcommand("distill")) return cmd_distill(distill_args, distill_verify);
    if (app.got_subcommand("eval")) return cmd_eval(eval_args, eval_verify);
    if (app.got_subcommand("diagnose")) return cmd_diagnose(diagnose_buffer, diagnose_out);
    if (app.got_subcommand("sweep"))
      return cmd_sweep(sweep_args, sweep_decays, sweep_epsilons, sweep_paper);
    if (app.got_subcommand("import"))
      return cmd_import(import_dir, import_h, import_w, import_c, import_split, import_out);
    if (app.got_subcommand("info")) return cmd_info(info_path);
  } catch (const Error& e) {
    std::cerr << e.slug() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unknown-error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
