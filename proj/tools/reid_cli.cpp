#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "reid/data_io.hpp"
#include "reid/errors.hpp"
#include "reid/eval.hpp"
#include "reid/gradcheck.hpp"
#include "reid/model.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitRuntime = 1;

struct DataOptions {
  std::string synthetic;  // "ids=32,per-id=8,dim=16[,spread=0.1][,scale=10]"
  std::string data_file;
  double train_frac = 0.5;
};

void add_data_options(CLI::App* cmd, DataOptions& opts) {
  cmd->add_option("--synthetic", opts.synthetic,
                  "synthetic data spec, e.g. ids=32,per-id=8,dim=16");
  cmd->add_option("--data", opts.data_file, "feature CSV file");
  cmd->add_option("--train-frac", opts.train_frac,
                  "fraction of identities used for training");
}

reid::SyntheticSpec parse_synthetic(const std::string& s, std::uint64_t seed) {
  reid::SyntheticSpec spec;
  spec.seed = seed;
  std::istringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--synthetic", "expected key=value: " + part);
    const std::string key = part.substr(0, eq);
    const std::string val = part.substr(eq + 1);
    if (key == "ids") spec.num_ids = std::stoul(val);
    else if (key == "per-id") spec.samples_per_id = std::stoul(val);
    else if (key == "dim") spec.input_dim = std::stoul(val);
    else if (key == "spread") spec.within_spread = std::stod(val);
    else if (key == "scale") spec.centroid_scale = std::stod(val);
    else throw CLI::ValidationError("--synthetic", "unknown key: " + key);
  }
  return spec;
}

reid::LabeledDataset load_data(const DataOptions& opts, std::uint64_t seed) {
  if (!opts.synthetic.empty() && !opts.data_file.empty())
    throw CLI::ValidationError("data", "--synthetic and --data are exclusive");
  if (!opts.synthetic.empty())
    return reid::gen_synthetic(parse_synthetic(opts.synthetic, seed));
  if (!opts.data_file.empty()) return reid::load_features(opts.data_file);
  throw CLI::ValidationError("data", "one of --synthetic or --data is required");
}

std::string resolve_out_dir(const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (const char* env = std::getenv("REID_OUT_DIR")) return env;
  return "run";
}

void write_history_csv(const reid::TrainHistory& history, const std::string& path,
                       std::uint64_t seed) {
  std::ofstream os(path);
  if (!os) throw reid::Error("cannot write history: " + path);
  os << "# schema_version=1\n# seed=" << seed << "\n";
  os << "epoch,mean_loss,mean_demarcation,lr\n";
  char buf[128];
  for (const auto& e : history.epochs) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g,%.17g,%.17g\n", e.epoch,
                  e.mean_loss, e.mean_demarcation, e.lr);
    os << buf;
  }
}

struct TrainFlags {
  std::string loss = "msml";
  reid::TrainConfig cfg;
  std::uint64_t seed = 0;
  DataOptions data;
  std::string out_dir;
  bool no_normalize = false;
};

reid::TrainResult run_training(TrainFlags& f, const reid::LabeledDataset& train_ds) {
  f.cfg.loss = reid::parse_loss_kind(f.loss);
  f.cfg.margins.normalize_inputs = !f.no_normalize;
  if ((f.cfg.loss == reid::LossKind::Quad ||
       f.cfg.loss == reid::LossKind::QuadPrime) &&
      f.cfg.margins.beta >= f.cfg.margins.alpha)
    std::cerr << "warning: beta (" << f.cfg.margins.beta
              << ") >= alpha (" << f.cfg.margins.alpha
              << "); the absolute-distance margin is meant to be the weaker one\n";
  reid::Rng rng(f.seed);
  return reid::train(train_ds, f.cfg, rng);
}

int cmd_train(TrainFlags& f) {
  const std::string out = resolve_out_dir(f.out_dir);
  fs::create_directories(out);
  const reid::LabeledDataset ds = load_data(f.data, f.seed);

  reid::Rng split_rng(f.seed ^ 0x5eedULL);
  const reid::Split sp = reid::split(ds, f.data.train_frac, split_rng);

  reid::TrainResult result = run_training(f, sp.train);
  reid::save_checkpoint(result.model, out + "/checkpoint.txt", f.seed);
  write_history_csv(result.history, out + "/history.csv", f.seed);
  reid::save_features(sp.train, out + "/train.csv");
  reid::save_features(sp.query, out + "/query.csv");
  reid::save_features(sp.gallery, out + "/gallery.csv");
  std::cout << "wrote " << out << "/checkpoint.txt and history.csv\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& query_file,
             const std::string& gallery_file, const std::string& out_dir,
             bool no_camera_exclusion, std::uint64_t seed) {
  const std::string out = resolve_out_dir(out_dir);
  fs::create_directories(out);
  const reid::MlpModel model = reid::load_checkpoint(checkpoint);
  const reid::LabeledDataset query = reid::load_features(query_file);
  const reid::LabeledDataset gallery = reid::load_features(gallery_file);
  reid::EvalProtocol protocol;
  protocol.camera_exclusion = !no_camera_exclusion;
  const reid::EvalReport report = reid::evaluate(
      reid::embed(model, query), reid::embed(model, gallery), protocol);
  reid::save_report_json(report, out + "/report.json", seed);
  reid::save_histogram_csv(report.hist, out + "/histogram.csv");
  std::printf("rank_1=%.4f rank_5=%.4f rank_10=%.4f mAP=%.4f demarcation=%.4f\n",
              report.cmc[0], report.cmc[4], report.cmc[9], report.map,
              report.demarcation);
  return 0;
}

int cmd_gradcheck(std::uint64_t seed, bool corrupt) {
  const reid::GradCheckReport report = reid::run_gradcheck(seed, 1e-4, corrupt);
  std::printf("%-20s %-12s %s\n", "check", "max_rel_err", "result");
  for (const auto& e : report.entries)
    std::printf("%-20s %-12.3e %s\n", e.name.c_str(), e.rel_err,
                e.pass ? "pass" : "FAIL");
  return report.all_pass() ? 0 : kExitRuntime;
}

int cmd_compare(TrainFlags& f, const std::string& losses_csv) {
  const std::string out = resolve_out_dir(f.out_dir);
  fs::create_directories(out);
  const reid::LabeledDataset ds = load_data(f.data, f.seed);

  std::ofstream os(out + "/summary.csv");
  if (!os) throw reid::Error("cannot write summary: " + out + "/summary.csv");
  os << "# schema_version=1\n# seed=" << f.seed << "\n";
  os << "loss,mAP,rank_1,rank_5,demarcation\n";

  std::istringstream ss(losses_csv);
  std::string loss_name;
  while (std::getline(ss, loss_name, ',')) {
    // Identical split and training stream per loss: same seed, fresh RNGs.
    reid::Rng split_rng(f.seed ^ 0x5eedULL);
    const reid::Split sp = reid::split(ds, f.data.train_frac, split_rng);
    f.loss = loss_name;
    reid::TrainResult result = run_training(f, sp.train);
    const reid::EvalReport report =
        reid::evaluate(reid::embed(result.model, sp.query),
                       reid::embed(result.model, sp.gallery), {});
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g\n",
                  loss_name.c_str(), report.map, report.cmc[0], report.cmc[4],
                  report.demarcation);
    os << buf;
    std::printf("%-10s mAP=%.4f rank_1=%.4f demarcation=%.4f\n",
                loss_name.c_str(), report.map, report.cmc[0],
                report.demarcation);
  }
  std::cout << "wrote " << out << "/summary.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric-learning trainer and ReID evaluation harness"};
  app.require_subcommand(1);
  app.set_config("--config");

  TrainFlags tf;
  auto add_train_flags = [&](CLI::App* cmd) {
    cmd->add_option("--loss", tf.loss,
                    "cls|tri|quad|quad_prime|trihard|msml");
    cmd->add_option("--alpha", tf.cfg.margins.alpha, "hinge margin");
    cmd->add_option("--beta", tf.cfg.margins.beta,
                    "second quadruplet margin");
    cmd->add_option("--w-cls", tf.cfg.w_cls, "classification loss weight");
    cmd->add_option("--p", tf.cfg.p, "identities per batch");
    cmd->add_option("--k", tf.cfg.k, "samples per identity");
    cmd->add_option("--epochs", tf.cfg.epochs);
    cmd->add_option("--lr", tf.cfg.schedule.base_lr, "initial learning rate");
    cmd->add_option("--emb-dim", tf.cfg.emb_dim);
    cmd->add_flag("--no-normalize", tf.no_normalize,
                  "skip l2 normalization of embeddings");
    cmd->add_option("--seed", tf.seed, "rng seed")->required();
    cmd->add_option("--out", tf.out_dir,
                    "output directory (env REID_OUT_DIR, default ./run)");
    add_data_options(cmd, tf.data);
  };

  CLI::App* train = app.add_subcommand("train", "train an embedding model");
  add_train_flags(train);

  std::string checkpoint, query_file, gallery_file, eval_out;
  bool no_camera_exclusion = false;
  std::uint64_t eval_seed = 0;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint)->required();
  eval->add_option("--query", query_file, "query feature CSV")->required();
  eval->add_option("--gallery", gallery_file, "gallery feature CSV")->required();
  eval->add_option("--out", eval_out);
  eval->add_option("--seed", eval_seed, "recorded in report metadata");
  eval->add_flag("--no-camera-exclusion", no_camera_exclusion);

  std::uint64_t gc_seed = 12345;
  bool gc_corrupt = false;
  CLI::App* gradcheck =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck->add_option("--seed", gc_seed);
  gradcheck->add_flag("--corrupt", gc_corrupt)->group("");  // test hook

  std::string losses_csv = "tri,trihard,msml";
  CLI::App* compare =
      app.add_subcommand("compare", "train and evaluate several losses");
  add_train_flags(compare);
  compare->add_option("--losses", losses_csv, "comma-separated loss kinds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (train->parsed()) return cmd_train(tf);
    if (eval->parsed())
      return cmd_eval(checkpoint, query_file, gallery_file, eval_out,
                      no_camera_exclusion, eval_seed);
    if (gradcheck->parsed()) return cmd_gradcheck(gc_seed, gc_corrupt);
    if (compare->parsed()) return cmd_compare(tf, losses_csv);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const reid::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
