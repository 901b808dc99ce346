// Command-line front end for the IRST transmission simulator.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "irst/pipeline.hpp"

namespace {

using namespace irst;

struct LoadedData {
  std::vector<std::pair<Image, SegmentationMap>> pairs;
  ColorMap colors;
};

LoadedData dataset_from_config(const ExperimentConfig& cfg) {
  LoadedData d;
  if (cfg.dataset.type == "synthetic") {
    d.colors = ColorMap::default_palette(cfg.dataset.num_classes);
    for (auto& sc : generate_synthetic(cfg.dataset.n, cfg.dataset.size,
                                       cfg.dataset.num_classes, cfg.seed))
      d.pairs.emplace_back(std::move(sc.image), std::move(sc.map));
  } else {
    d.colors = ColorMap::load(cfg.dataset.colormap_path);
    d.pairs = load_dataset(cfg.dataset.path, d.colors, cfg.dataset.num_classes);
  }
  return d;
}

std::string checkpoint_path(const ExperimentConfig& cfg, const std::string& configured,
                            const std::string& fallback) {
  std::string path = configured.empty() ? cfg.output_dir + "/" + fallback : configured;
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  return path;
}

int cmd_train_seg(const ExperimentConfig& cfg) {
  LoadedData data = dataset_from_config(cfg);
  SegNet net(cfg.dataset.num_classes);
  net.init(derive_seed(cfg.seed, 0x5E6));
  SegTrainConfig tc{cfg.training.learning_rate, cfg.training.batch_size,
                    cfg.training.epochs, cfg.seed};
  auto stats = net.train(data.pairs, tc);
  std::string path = checkpoint_path(cfg, cfg.segnet_checkpoint, "segnet.irstpb");
  ParamBundle b;
  net.save(b);
  b.save(path);
  std::cout << "trained segmentation net: loss " << stats.epoch_losses.front() << " -> "
            << stats.epoch_losses.back() << "; saved " << path << "\n";
  return 0;
}

int cmd_train_sem(const ExperimentConfig& cfg) {
  LoadedData data = dataset_from_config(cfg);
  std::vector<Image> images;
  for (auto& [img, map] : data.pairs) images.push_back(img);
  SemCodec codec;
  codec.init(derive_seed(cfg.seed, 0x5E3));
  SemTrainConfig tc{cfg.training.learning_rate, cfg.training.batch_size,
                    cfg.training.epochs, cfg.seed};
  auto stats = codec.train(images, tc);
  std::string path = checkpoint_path(cfg, cfg.semcodec_checkpoint, "semcodec.irstpb");
  ParamBundle b;
  codec.save(b);
  b.save(path);
  std::cout << "trained semantic codec: loss " << stats.epoch_losses.front() << " -> "
            << stats.epoch_losses.back() << "; saved " << path << "\n";
  return 0;
}

int cmd_train_chan(const ExperimentConfig& cfg) {
  if (cfg.semcodec_checkpoint.empty())
    throw ConfigError("train-chan: checkpoints.semcodec is required");
  SemCodec sem;
  sem.load(ParamBundle::load(cfg.semcodec_checkpoint));
  LoadedData data = dataset_from_config(cfg);
  std::vector<NdArray> latents;
  for (auto& [img, map] : data.pairs) latents.push_back(sem.sem_encode(img));

  StackedChanCodec codec;
  codec.init(derive_seed(cfg.seed, 0xC4A));
  SnrThresholds th = cfg.full_thresholds();
  StagedTrainConfig tc;
  tc.learning_rate = cfg.training.learning_rate;
  tc.weight_decay = cfg.training.weight_decay;
  tc.epochs_per_stage = cfg.training.epochs_per_stage;
  tc.seed = cfg.seed;
  tc.equalize = cfg.equalize;
  auto stats = codec.staged_train(latents, th, cfg.channel, tc);

  std::string path = checkpoint_path(cfg, cfg.chancodec_checkpoint, "chancodec.irstpb");
  ParamBundle b;
  codec.save(b);
  b.save(path);
  // per-stage manifest: stage id, SNR interval, epochs, seed
  json stages = json::array();
  const double hi[3] = {th.gamma_max, th.gamma1, th.gamma2};
  for (int s = 0; s < 3; ++s)
    stages.push_back({{"stage", s + 1}, {"snr_interval", {th.gamma_min, hi[s]}},
                      {"epochs", tc.epochs_per_stage}, {"seed", tc.seed},
                      {"final_loss", stats.stage_epoch_losses[s].back()}});
  std::ofstream mf(path + ".stages.json");
  mf << stages.dump(2) << "\n";
  std::cout << "staged training done";
  for (int s = 0; s < 3; ++s)
    std::cout << "; stage" << s + 1 << " loss " << stats.stage_epoch_losses[s].front()
              << " -> " << stats.stage_epoch_losses[s].back();
  std::cout << "; saved " << path << "\n";
  return 0;
}

int cmd_fit_eval(const ExperimentConfig& cfg, const std::string& pairs_csv) {
  std::ifstream f(pairs_csv);
  if (!f) throw ConfigError("fit-eval: cannot open '" + pairs_csv + "'");
  std::vector<TrainSample> samples;
  std::string line;
  std::getline(f, line);  // header
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    TrainSample s;
    if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &s.features.x_s, &s.features.x_c, &s.y) == 3)
      samples.push_back(s);
  }
  EvalModel m = fit_eval(samples, cfg.eval_model.alpha > 0 ? cfg.eval_model.alpha : 0.05, 20000);
  std::filesystem::create_directories(cfg.output_dir);
  std::ofstream out(cfg.output_dir + "/eval_model.json");
  out << json{{"w0", m.w0}, {"w1", m.w1}, {"w2", m.w2}, {"alpha", m.alpha}}.dump(2) << "\n";
  std::cout << "fitted effect model: w0=" << m.w0 << " w1=" << m.w1 << " w2=" << m.w2
            << " (loss " << eval_loss(m, samples) << ") on " << samples.size()
            << " samples\n";
  return 0;
}

ModelSet load_models(const ExperimentConfig& cfg, SegNet& seg, SemCodec& sem,
                     StackedChanCodec& chan, const ColorMap& colors) {
  ModelSet ms;
  ms.colors = colors;
  ms.eval_model = cfg.eval_model;
  if (!cfg.use_ground_truth_masks) {
    if (cfg.segnet_checkpoint.empty())
      throw ConfigError("checkpoints.segnet required unless use_ground_truth_masks is set");
    seg.load(ParamBundle::load(cfg.segnet_checkpoint));
    ms.segnet = &seg;
  }
  if (!cfg.passthrough_codecs) {
    if (cfg.semcodec_checkpoint.empty() || cfg.chancodec_checkpoint.empty())
      throw ConfigError("checkpoints.semcodec and checkpoints.chancodec are required");
    sem.load(ParamBundle::load(cfg.semcodec_checkpoint));
    chan.load(ParamBundle::load(cfg.chancodec_checkpoint));
    ms.semcodec = &sem;
    ms.chancodec = &chan;
  }
  return ms;
}

int cmd_transmit(const ExperimentConfig& cfg, const std::string& image_path, double snr) {
  LoadedData data;
  Image img;
  const SegmentationMap* gt = nullptr;
  if (!image_path.empty()) {
    img = load_image(image_path);
    data.colors = cfg.dataset.type == "synthetic"
                      ? ColorMap::default_palette(cfg.dataset.num_classes)
                      : ColorMap::load(cfg.dataset.colormap_path);
  } else {
    data = dataset_from_config(cfg);
    if (data.pairs.empty()) throw ConfigError("transmit: dataset is empty");
    img = data.pairs[0].first;
    gt = &data.pairs[0].second;
  }
  SegNet seg(cfg.dataset.num_classes);
  SemCodec sem;
  StackedChanCodec chan;
  ModelSet ms = load_models(cfg, seg, sem, chan, data.colors);

  std::filesystem::create_directories(cfg.output_dir);
  write_manifest(cfg, cfg.output_dir + "/manifest.json", {{"command", "transmit"}});
  auto tr = run_transmission(img, ms, snr, cfg, gt, 0);
  save_png(tr.reconstructed, cfg.output_dir + "/reconstructed.png");
  save_png(tr.selected.pixels, cfg.output_dir + "/selected.png");
  std::ofstream csv(cfg.output_dir + "/metrics.csv");
  csv << "run_id,snr_db,depth,tier,psnr_db,task_psnr_db,ssim,payload_bytes\n";
  append_metrics_csv(csv, "transmit", tr.report);
  std::cout << "snr " << snr << " dB: depth " << tr.report.depth << ", tier "
            << tr.report.tier << ", psnr " << psnr_to_string(tr.report.psnr_db)
            << " dB, task psnr " << psnr_to_string(tr.report.task_psnr_db)
            << " dB, ssim " << tr.report.ssim_val << ", payload "
            << tr.report.payload_bytes << " B\n";
  return 0;
}

int cmd_sweep(const ExperimentConfig& cfg, std::vector<double> grid) {
  if (grid.empty()) grid = {-10, -5, 0, 5, 10};
  LoadedData data = dataset_from_config(cfg);
  SegNet seg(cfg.dataset.num_classes);
  SemCodec sem;
  StackedChanCodec chan;
  ModelSet ms = load_models(cfg, seg, sem, chan, data.colors);
  auto res = sweep_snr(data.pairs, ms, grid, cfg, cfg.output_dir);
  for (size_t i = 0; i < res.snrs.size(); ++i)
    std::cout << "snr " << res.snrs[i] << " dB: mean psnr " << res.mean_psnr[i]
              << " dB, mean ssim " << res.mean_ssim[i] << "\n";
  std::cout << "wrote " << cfg.output_dir << "/{metrics,summary,eval_train}.csv and plots\n";
  return 0;
}

// Latent-level PSNR with the data power as peak reference.
double latent_db(const NdArray& ref, const NdArray& rec) {
  double se = 0.0, pw = 0.0;
  for (long i = 0; i < ref.numel(); ++i) {
    se += (ref[i] - rec[i]) * (ref[i] - rec[i]);
    pw += ref[i] * ref[i];
  }
  return 10.0 * std::log10(pw / se);
}

int cmd_ablate_stacking(const ExperimentConfig& cfg) {
  if (cfg.semcodec_checkpoint.empty() || cfg.chancodec_checkpoint.empty())
    throw ConfigError("ablate-stacking: semcodec and chancodec checkpoints required");
  SemCodec sem;
  sem.load(ParamBundle::load(cfg.semcodec_checkpoint));
  StackedChanCodec chan;
  chan.load(ParamBundle::load(cfg.chancodec_checkpoint));
  LoadedData data = dataset_from_config(cfg);

  std::filesystem::create_directories(cfg.output_dir);
  write_manifest(cfg, cfg.output_dir + "/manifest.json", {{"command", "ablate-stacking"}});
  std::ofstream csv(cfg.output_dir + "/stacking.csv");
  csv << "snr_db,depth1_latent_snr_db,depth3_latent_snr_db\n";
  std::vector<double> grid = {-10, -8, -6, -4};
  for (double snr : grid) {
    double d1 = 0.0, d3 = 0.0;
    NoiseSpec noise = NoiseSpec::from_snr_db(snr);
    for (size_t i = 0; i < data.pairs.size(); ++i) {
      NdArray lat = sem.sem_encode(data.pairs[i].first);
      ChannelDraw draw = sample_gain(cfg.channel, derive_seed(cfg.seed, 0xD4A3, i), 1)[0];
      for (int depth : {1, 3}) {
        NdArray y = chan.chan_encode(lat, depth);
        NdArray r = apply_channel(y, draw, noise, derive_seed(cfg.seed, 0x401E, i), true);
        double db = latent_db(lat, chan.chan_decode(r, depth));
        (depth == 1 ? d1 : d3) += db;
      }
    }
    d1 /= data.pairs.size();
    d3 /= data.pairs.size();
    csv << snr << "," << d1 << "," << d3 << "\n";
    std::cout << "snr " << snr << " dB: depth1 " << d1 << " dB, depth3 " << d3
              << " dB (gain " << d3 - d1 << " dB)\n";
  }
  return 0;
}

int cmd_ablate_selection(const ExperimentConfig& cfg, double snr) {
  LoadedData data = dataset_from_config(cfg);
  SegNet seg(cfg.dataset.num_classes);
  SemCodec sem;
  StackedChanCodec chan;
  ModelSet ms = load_models(cfg, seg, sem, chan, data.colors);

  std::filesystem::create_directories(cfg.output_dir);
  write_manifest(cfg, cfg.output_dir + "/manifest.json", {{"command", "ablate-selection"}});
  std::ofstream csv(cfg.output_dir + "/selection.csv");
  csv << "image,payload_selected,payload_full,task_psnr_selected,task_psnr_full\n";
  ExperimentConfig noblur = cfg;
  noblur.blur_policy = BlurPolicy{{{-1e300, 1}}};  // single no-blur tier
  double sum_sel = 0, sum_full = 0;
  for (size_t i = 0; i < data.pairs.size(); ++i) {
    auto with = run_transmission(data.pairs[i].first, ms, snr, cfg, &data.pairs[i].second, i);
    auto without =
        run_transmission(data.pairs[i].first, ms, snr, noblur, &data.pairs[i].second, i);
    csv << i << "," << with.report.payload_bytes << "," << without.report.payload_bytes << ","
        << psnr_to_string(with.report.task_psnr_db) << ","
        << psnr_to_string(without.report.task_psnr_db) << "\n";
    sum_sel += with.report.payload_bytes;
    sum_full += without.report.payload_bytes;
  }
  std::cout << "mean payload with selection " << sum_sel / data.pairs.size() << " B vs "
            << sum_full / data.pairs.size() << " B without ("
            << 100.0 * (1.0 - sum_sel / sum_full) << "% reduction)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IRST satellite-ground semantic transmission simulator"};
  app.require_subcommand(1);

  std::string config_path, image_path, pairs_csv;
  double snr = 0.0;
  std::vector<double> grid;

  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config (JSON)")->required();
  };
  add_config(app.add_subcommand("train-seg", "train the segmentation network"));
  add_config(app.add_subcommand("train-sem", "pre-train the semantic codec"));
  add_config(app.add_subcommand("train-chan", "staged training of the SNR channel codec"));
  auto* fit = app.add_subcommand("fit-eval", "fit the transmission-effect regressor");
  add_config(fit);
  fit->add_option("--pairs", pairs_csv, "CSV of (x_s,x_c,y) training pairs")->required();
  auto* tx = app.add_subcommand("transmit", "transmit a single image");
  add_config(tx);
  tx->add_option("--image", image_path, "input image (defaults to dataset[0])");
  tx->add_option("--snr", snr, "channel SNR in dB")->required();
  auto* sw = app.add_subcommand("sweep", "SNR sweep with CSV + plots");
  add_config(sw);
  sw->add_option("--grid", grid, "SNR grid in dB");
  auto* ab_stack = app.add_subcommand("ablate-stacking", "depth-1 vs depth-3 comparison");
  add_config(ab_stack);
  auto* ab_sel = app.add_subcommand("ablate-selection", "selection payload/quality comparison");
  add_config(ab_sel);
  ab_sel->add_option("--snr", snr, "channel SNR in dB");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    irst::ExperimentConfig cfg = irst::load_config(config_path);
    if (app.got_subcommand("train-seg")) return cmd_train_seg(cfg);
    if (app.got_subcommand("train-sem")) return cmd_train_sem(cfg);
    if (app.got_subcommand("train-chan")) return cmd_train_chan(cfg);
    if (app.got_subcommand("fit-eval")) return cmd_fit_eval(cfg, pairs_csv);
    if (app.got_subcommand("transmit")) return cmd_transmit(cfg, image_path, snr);
    if (app.got_subcommand("sweep")) return cmd_sweep(cfg, grid);
    if (app.got_subcommand("ablate-stacking")) return cmd_ablate_stacking(cfg);
    if (app.got_subcommand("ablate-selection"))
      return cmd_ablate_selection(cfg, snr != 0.0 ? snr : 10.0);
  } catch (const irst::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
