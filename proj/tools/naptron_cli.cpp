// Command-line front end: generate -> build -> eval -> sweep -> compare.
//
// Exit codes: 0 success, 1 validation/config error, 2 data error.

#include <naptron/naptron.hpp>

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

namespace {

using namespace naptron;

std::vector<double> parse_thresholds(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw ConfigError("bad threshold '" + item + "'");
    } catch (const std::logic_error&) {
      throw ConfigError("bad threshold '" + item + "'");
    }
  }
  if (out.empty()) throw ConfigError("no thresholds given");
  return out;
}

FprPositive parse_positive(const std::string& s) {
  if (s == "id") return FprPositive::InDistribution;
  if (s == "ood") return FprPositive::OutOfDistribution;
  throw ConfigError("--fpr-positive must be 'id' or 'ood'");
}

struct EvalFlags {
  std::string dataset;
  std::string store;
  std::string method = "naptron-min";
  double lambda = kDefaultIouThreshold;
  double temperature = 1.0;
  std::string positive = "id";
  unsigned threads = 0;

  void attach(CLI::App* cmd) {
    cmd->add_option("dataset", dataset, "Test dataset directory")->required();
    cmd->add_option("--store", store, "Pattern store file (naptron methods)");
    cmd->add_option("--method", method, "naptron-min | naptron-avg | msp | energy")
        ->capture_default_str();
    cmd->add_option("--lambda", lambda, "IOU threshold for labeling")->capture_default_str();
    cmd->add_option("--temperature", temperature, "Energy temperature T")->capture_default_str();
    cmd->add_option("--fpr-positive", positive, "Positive class of FPR@95TPR: id | ood")
        ->capture_default_str();
    cmd->add_option("--threads", threads, "Scoring threads (0 = all cores)");
  }

  pipeline::EvalOptions options() const {
    pipeline::EvalOptions o;
    o.method = parse_method(method);
    o.lambda = lambda;
    o.temperature = temperature;
    o.metric.positive = parse_positive(positive);
    o.threads = threads;
    return o;
  }

  std::optional<PatternStore> load_store_if_needed(Method m) const {
    if (!uses_store(m)) return std::nullopt;
    if (store.empty()) throw ConfigError(std::string(to_string(m)) + " requires --store");
    return io::load_store(store);
  }
};

int run(int argc, char** argv) {
  CLI::App app{"Hamming-distance uncertainty for object-detector predictions"};
  app.require_subcommand(1);

  // generate
  synth::SynthConfig gen;
  std::string gen_out;
  auto* g = app.add_subcommand("generate", "Write a synthetic train/test dataset pair");
  g->add_option("--out", gen_out, "Output directory (gets train/ and test/)")->required();
  g->add_option("--seed", gen.seed)->capture_default_str();
  g->add_option("--classes", gen.class_count)->capture_default_str();
  g->add_option("--unknown-classes", gen.unknown_class_count)->capture_default_str();
  g->add_option("--length", gen.pattern_length, "Activation vector length L")->capture_default_str();
  g->add_option("--train-per-class", gen.train_tps_per_class)->capture_default_str();
  g->add_option("--train-fp", gen.train_fp_count)->capture_default_str();
  g->add_option("--test-id", gen.test_id_count)->capture_default_str();
  g->add_option("--test-ood", gen.test_ood_count)->capture_default_str();
  g->add_option("--test-fp", gen.test_fp_count)->capture_default_str();
  g->add_option("--test-missed", gen.test_missed_count)->capture_default_str();
  g->add_option("--rho-train", gen.rho_train)->capture_default_str();
  g->add_option("--rho-id", gen.rho_id)->capture_default_str();
  g->add_option("--rho-ood", gen.rho_ood)->capture_default_str();
  g->add_option("--boxes-per-image", gen.boxes_per_image)->capture_default_str();
  g->add_flag("--map-mode", gen.map_mode, "Emit feature maps instead of activation vectors");

  // validate
  std::string val_dir;
  auto* v = app.add_subcommand("validate", "Check a dataset directory");
  v->add_option("dataset", val_dir)->required();

  // build
  std::string build_dir, build_out;
  int build_layer = -1;
  pipeline::BuildOptions bopts;
  auto* b = app.add_subcommand("build", "Build a pattern store from a training dataset");
  b->add_option("dataset", build_dir, "Training dataset directory")->required();
  b->add_option("--layer", build_layer, "Layer index (default: penultimate exported layer)");
  b->add_option("--p", bopts.percentile, "Binarization percentile in [0, 1]")->capture_default_str();
  b->add_option("--train-iou", bopts.train_iou, "Training IOU threshold")->capture_default_str();
  b->add_option("--softmax-s", bopts.softmax_threshold, "Training softmax threshold s")->capture_default_str();
  b->add_option("--lambda", bopts.lambda, "IOU threshold for labeling")->capture_default_str();
  b->add_option("--out", build_out, "Store file to write")->required();

  // eval
  EvalFlags ev;
  double nms = 0.01;
  std::string report_dir;
  auto* e = app.add_subcommand("eval", "Score a test dataset and write a report");
  ev.attach(e);
  e->add_option("--nms-threshold", nms, "Drop detections below this softmax score")->capture_default_str();
  e->add_option("--report", report_dir, "Report directory")->required();

  // sweep
  EvalFlags sw;
  std::string thresholds_text, sweep_out;
  auto* s = app.add_subcommand("sweep", "Metrics across NMS score thresholds");
  sw.attach(s);
  s->add_option("--thresholds", thresholds_text, "Ascending comma-separated list")->required();
  s->add_option("--out", sweep_out, "CSV file to write (default: stdout)");

  // compare
  std::string cmp_a, cmp_b;
  auto* c = app.add_subcommand("compare", "Metric deltas of report A against baseline report B");
  c->add_option("report_a", cmp_a)->required();
  c->add_option("report_b", cmp_b)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  if (*g) {
    const auto out = synth::generate(gen, gen_out);
    std::cout << "train: " << out.train.dir.string() << " (" << out.train.intended.size() << " detections)\n"
              << "test: " << out.test.dir.string() << " (" << out.test.intended.size() << " detections)\n";
  } else if (*v) {
    const auto report = io::validate_dataset(val_dir);
    for (const auto& f : report.findings) std::cout << f.to_string() << '\n';
    std::cout << report.findings.size() << " finding(s)\n";
    return report.ok() ? 0 : 1;
  } else if (*b) {
    if (b->count("--layer")) {
      if (build_layer < 0) throw ConfigError("--layer must be non-negative");
      bopts.layer = build_layer;
    }
    const auto ds = io::load_dataset(build_dir);
    const auto store = pipeline::build(ds, bopts);
    io::save_store(build_out, store);
    std::cout << "layer: " << store.config().layer << "\npattern_length: " << store.pattern_length() << '\n';
    for (int id : store.class_ids()) std::cout << "class " << id << ": " << store.count(id) << '\n';
    std::cout << "total: " << store.total_count() << '\n';
  } else if (*e) {
    auto opts = ev.options();
    opts.nms_threshold = nms;
    const auto store = ev.load_store_if_needed(opts.method);
    const auto ds = io::load_dataset(ev.dataset);
    const auto res = pipeline::score_dataset(ds, store ? &*store : nullptr, opts);
    pipeline::write_report(report_dir, res);
    std::cout << "macro_auroc: " << pipeline::fmt_opt(res.metrics.auroc) << '\n'
              << "macro_fpr95: " << pipeline::fmt_opt(res.metrics.fpr95) << '\n'
              << "auc_2n: " << pipeline::fmt_opt(res.auc) << '\n';
    std::size_t errors = 0;
    for (const auto& sc : res.scores) errors += sc.uncertainty ? 0 : 1;
    if (errors) std::cerr << errors << " detection(s) could not be scored; see score_errors.csv\n";
  } else if (*s) {
    const auto opts = sw.options();
    const auto thresholds = parse_thresholds(thresholds_text);
    const auto store = sw.load_store_if_needed(opts.method);
    const auto ds = io::load_dataset(sw.dataset);
    const auto rows = pipeline::sweep(ds, store ? &*store : nullptr, opts, thresholds);
    const std::string csv = pipeline::sweep_csv(rows);
    if (sweep_out.empty()) std::cout << csv;
    else pipeline::write_text(sweep_out, csv);
    for (const auto& r : rows)
      std::cerr << "threshold " << detail::format_double(r.threshold) << ": " << r.retained << " retained\n";
  } else if (*c) {
    const auto cmp = pipeline::compare_reports(cmp_a, cmp_b);
    std::cout << "dataset_fingerprint: " << cmp.fingerprint << '\n';
    for (const auto& d : cmp.deltas) {
      const std::string name = d.key == "auc_2n" ? "delta_auc" : "delta_" + d.key;
      std::cout << name << ": " << pipeline::fmt_opt(d.delta) << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const naptron::Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return err.exit_code();
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  }
}
