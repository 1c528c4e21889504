#include "litecd/cli.hpp"

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>

#include "litecd/evaluator.hpp"
#include "litecd/io.hpp"
#include "litecd/pipeline.hpp"
#include "litecd/trainer.hpp"

namespace litecd {

namespace fs = std::filesystem;

namespace {

std::string fixed6(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::pair<std::size_t, std::size_t> parse_size(const std::string& text) {
  static const std::regex re(R"((\d+)[xX](\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) contract_fail("size must look like HxW, got '" + text + "'");
  return {std::stoul(m[1]), std::stoul(m[2])};
}

Rect parse_rect(const std::string& text) {
  static const std::regex re(R"((\d+),(\d+),(\d+),(\d+))");
  std::smatch m;
  if (!std::regex_match(text, m, re)) contract_fail("region must look like y,x,height,width, got '" + text + "'");
  return Rect{std::stoul(m[1]), std::stoul(m[2]), std::stoul(m[3]), std::stoul(m[4])};
}

struct SynthArgs {
  std::uint64_t seed = 0;
  std::string size = "256x256";
  std::size_t looks = 4;
  double contrast = 4.0;
  std::string out_dir;
};

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  const auto [h, w] = parse_size(a.size);
  SynthConfig cfg;
  cfg.seed = a.seed;
  cfg.height = h;
  cfg.width = w;
  cfg.looks = a.looks;
  cfg.contrast = a.contrast;
  const Scene scene = synth_scene(cfg);
  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (!fs::is_directory(a.out_dir)) contract_fail("cannot create output directory " + a.out_dir);
  const fs::path dir(a.out_dir);
  save_grid(dir / "i1.grid", scene.i1);
  save_grid(dir / "i2.grid", scene.i2);
  save_grid(dir / "mask.grid", scene.mask);
  save_intensity_preview(dir / "i1.pgm", scene.i1);
  save_intensity_preview(dir / "i2.pgm", scene.i2);
  save_mask_pgm(dir / "mask.pgm", scene.mask);
  out << "changed_fraction=" << fixed6(change_fraction(scene.mask)) << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string i1, i2, mask, region, out, trace;
  std::size_t epochs = 15;
  std::uint64_t seed = 0;
  double lr = 0.005;
  double balance = 0.3;
  double dropout = 0.1;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const IntensityImage i1 = load_intensity(a.i1);
  const IntensityImage i2 = load_intensity(a.i2);
  const ChangeMask mask = load_mask(a.mask);
  if (mask.height != i1.height || mask.width != i1.width)
    contract_fail("mask size does not match the images");
  const LogRatioResult di = neighborhood_log_ratio(i1, i2);
  if (di.constant) err << "warning: difference image is constant\n";
  const Rect region = a.region.empty() ? top_rows_region(i1.height, i1.width) : parse_rect(a.region);

  SamplingConfig sampling;
  sampling.balance = a.balance;
  sampling.seed = a.seed;
  const PatchSet patches = extract_training_patches(di.image, mask, region, sampling);
  if (patches.no_changed_pixels) err << "warning: training region contains no changed pixels\n";
  if (patches.patches.empty()) contract_fail("training region yields no patches");

  Rng rng(a.seed);
  LiteCnn<float> net(build_default(a.dropout), rng);
  TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.seed = a.seed;
  cfg.lr = a.lr;
  out << "patches=" << patches.patches.size() << " grid=" << patches.grid_patches << "\n";
  const TrainTrace trace = train(net, patches, cfg, rng, [&](const EpochStats& e) {
    out << "epoch " << e.epoch << "/" << cfg.epochs << " loss=" << fixed6(e.loss)
        << " accuracy=" << fixed6(e.accuracy) << "\n";
  });
  save_checkpoint(a.out, net);
  if (a.trace == "-") {
    write_trace_csv(out, trace);
  } else if (!a.trace.empty()) {
    std::ofstream f(a.trace, std::ios::binary | std::ios::trunc);
    if (!f) contract_fail("cannot write " + a.trace);
    write_trace_csv(f, trace);
  }
  const auto& last = trace.epochs.back();
  out << "final loss=" << fixed6(last.loss) << " accuracy=" << fixed6(last.accuracy) << "\n";
  return kExitOk;
}

struct InferArgs {
  std::string model, i1, i2, out, prob_out, grid_out;
  std::size_t stride = kDefaultInferenceStride;
};

int cmd_infer(const InferArgs& a, std::ostream& out, std::ostream& err) {
  Rng rng(0);
  LiteCnn<float> net(build_default(), rng);
  load_checkpoint(a.model, net);
  const IntensityImage i1 = load_intensity(a.i1);
  const IntensityImage i2 = load_intensity(a.i2);
  const LogRatioResult di = neighborhood_log_ratio(i1, i2);
  if (di.constant) err << "warning: difference image is constant\n";
  const StitchResult res = infer_change_map(net, di.image, a.stride);
  save_mask_pgm(a.out, res.mask);
  if (!a.grid_out.empty()) save_grid(a.grid_out, res.mask);
  if (!a.prob_out.empty()) {
    DifferenceImage prob(res.mask.height, res.mask.width);
    prob.values = res.probability;
    save_grid(a.prob_out, prob);
  }
  out << "size=" << res.mask.height << "x" << res.mask.width
      << " changed_fraction=" << fixed6(change_fraction(res.mask)) << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string pred, ref, pma = "nc", dataset, region, error_map;
  bool header = false;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const PmaDenominator pma = parse_pma_denominator(a.pma);
  ChangeMask pred = load_mask(a.pred);
  ChangeMask ref = load_mask(a.ref);
  if (pred.height != ref.height || pred.width != ref.width)
    contract_fail("prediction and reference sizes differ");
  if (!a.region.empty()) {
    const Rect r = parse_rect(a.region);
    pred = crop(pred, r);
    ref = crop(ref, r);
  }
  const MetricsReport rep = report(pred, ref, pma);
  if (!rep.p_fa) err << "warning: reference has no unchanged pixels; p_fa undefined\n";
  if (!rep.p_ma) err << "warning: p_ma denominator is zero; p_ma undefined\n";
  if (rep.kappa_degenerate) err << "warning: single-class maps; kappa reported as 0\n";
  if (!a.error_map.empty()) save_gray_pgm(a.error_map, error_map(pred, ref));
  const std::string name = a.dataset.empty() ? fs::path(a.pred).stem().string() : a.dataset;
  if (a.header) out << kCsvHeader << "\n";
  out << csv_row(name, rep) << "\n";
  return kExitOk;
}

void print_profile(std::ostream& out, const std::string& title, const Profile& p, bool layers) {
  out << "# " << title << "\n";
  if (layers) {
    out << "layer,params,macs\n";
    for (const auto& l : p.layers) out << l.layer << "," << l.params << "," << l.macs << "\n";
  }
  out << "group,params,macs\n";
  for (const auto& g : p.groups) out << g.name << "," << g.params << "," << g.macs << "\n";
  out << "total," << p.total_params << "," << p.total_macs << "\n";
}

struct ProfileArgs {
  std::string baseline = "plain";
  bool layers = false;
};

int cmd_profile(const ProfileArgs& a, std::ostream& out) {
  const NetworkSpec spec = build_default();
  const Profile lite = profile_lite(spec);
  print_profile(out, "lite", lite, a.layers);
  out << "# asymmetric main convolutions (factorized vs full kxk)\n";
  out << "bottleneck,factorized_params,full_params\n";
  const std::size_t k = spec.asymmetric_kernel;
  for (const auto& g : spec.groups)
    for (const auto& b : g.bottlenecks)
      if (b.kind == BottleneckKind::Asymmetric) {
        const std::size_t c = b.internal_channels;
        out << b.name << "," << 2 * k * c * c << "," << k * k * c * c << "\n";
      }
  if (a.baseline == "plain") {
    const Profile plain = profile_plain(spec);
    print_profile(out, "plain", plain, a.layers);
    out << "ratio,params," << fixed6(static_cast<double>(lite.total_params) / static_cast<double>(plain.total_params))
        << "\n";
    out << "ratio,macs," << fixed6(static_cast<double>(lite.total_macs) / static_cast<double>(plain.total_macs))
        << "\n";
  } else if (a.baseline != "lite") {
    contract_fail("--baseline must be 'lite' or 'plain'");
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Lightweight CNN change detection for bitemporal SAR images", "litecd"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic speckled bitemporal scene");
  s->add_option("--seed", synth.seed, "Generator seed");
  s->add_option("--size", synth.size, "Scene size HxW")->capture_default_str();
  s->add_option("--looks", synth.looks, "Speckle looks (gamma shape)")->capture_default_str();
  s->add_option("--contrast", synth.contrast, "Reflectivity ratio inside changed regions")->capture_default_str();
  s->add_option("--out-dir", synth.out_dir, "Output directory")->required();

  TrainArgs train_args;
  auto* t = app.add_subcommand("train", "Train the network on a scene");
  t->add_option("--i1", train_args.i1, "First acquisition (GridFile or PGM)")->required();
  t->add_option("--i2", train_args.i2, "Second acquisition (GridFile or PGM)")->required();
  t->add_option("--mask", train_args.mask, "Reference change mask")->required();
  t->add_option("--region", train_args.region, "Training rectangle y,x,height,width (default: top 30% rows)");
  t->add_option("--epochs", train_args.epochs, "Epochs")->capture_default_str()->check(CLI::PositiveNumber);
  t->add_option("--seed", train_args.seed, "Seed for init, sampling, shuffling and dropout");
  t->add_option("--lr", train_args.lr, "Adam learning rate")->capture_default_str();
  t->add_option("--balance", train_args.balance, "Minimum fraction of patches with change")->capture_default_str();
  t->add_option("--dropout", train_args.dropout, "Encoder dropout rate")->capture_default_str();
  t->add_option("--out", train_args.out, "Checkpoint path")->required();
  t->add_option("--trace", train_args.trace, "Trace CSV path ('-' for stdout)");

  InferArgs infer;
  auto* i = app.add_subcommand("infer", "Produce a change map from two acquisitions");
  i->add_option("--model", infer.model, "Checkpoint")->required();
  i->add_option("--i1", infer.i1, "First acquisition")->required();
  i->add_option("--i2", infer.i2, "Second acquisition")->required();
  i->add_option("--out", infer.out, "Change map PGM (0/255)")->required();
  i->add_option("--stride", infer.stride, "Tile stride in pixels")->capture_default_str();
  i->add_option("--grid-out", infer.grid_out, "Also write the map as a GridFile");
  i->add_option("--prob-out", infer.prob_out, "Write class-1 probabilities as a GridFile");

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Score a change map against a reference");
  e->add_option("--pred", eval.pred, "Predicted mask (GridFile or PGM)")->required();
  e->add_option("--ref", eval.ref, "Reference mask (GridFile or PGM)")->required();
  e->add_option("--pma-denominator", eval.pma, "nc or changed")->capture_default_str();
  e->add_option("--dataset", eval.dataset, "Dataset label for the CSV row");
  e->add_option("--region", eval.region, "Evaluate only y,x,height,width");
  e->add_option("--error-map", eval.error_map, "Write FA=128 / MA=255 error map PGM");
  e->add_flag("--header", eval.header, "Print the CSV header first");

  ProfileArgs prof;
  auto* p = app.add_subcommand("profile", "Parameter and MAC counts");
  p->add_option("--baseline", prof.baseline, "lite or plain")->capture_default_str();
  p->add_flag("--layers", prof.layers, "Include per-layer rows");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInputError;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, out);
    if (t->parsed()) return cmd_train(train_args, out, err);
    if (i->parsed()) return cmd_infer(infer, out, err);
    if (e->parsed()) return cmd_eval(eval, out, err);
    if (p->parsed()) return cmd_profile(prof, out);
  } catch (const NumericDivergence& ex) {
    err << "diverged: " << ex.what() << "\n";
    return kExitDiverged;
  } catch (const ModelMismatch& ex) {
    err << "model mismatch: " << ex.what() << "\n";
    return kExitModelMismatch;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInputError;
  }
  return kExitInputError;
}

}  // namespace litecd
