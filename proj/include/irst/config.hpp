#pragma once

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "irst/chancodec.hpp"
#include "irst/channel.hpp"
#include "irst/effect_eval.hpp"
#include "irst/errors.hpp"
#include "irst/selection.hpp"

namespace irst {

using json = nlohmann::json;

struct DatasetSpec {
  std::string type = "synthetic";  // "synthetic" | "directory"
  // synthetic
  int n = 32;
  int size = 64;
  int num_classes = 3;
  // directory
  std::string path;
  std::string colormap_path;
};

struct TrainingConfig {
  double learning_rate = 1e-4;
  int batch_size = 8;
  int epochs = 5;
  int epochs_per_stage = 10;
  double weight_decay = 0.01;
};

struct ExperimentConfig {
  uint64_t seed = 7;
  std::string output_dir = "out";
  DatasetSpec dataset;
  ChannelParams channel;
  double snr_db_min = -10.0, snr_db_max = 10.0;
  bool equalize = true;
  SnrThresholds thresholds;
  TaskSpec task;
  BlurPolicy blur_policy = BlurPolicy::default_policy(10.0, 40.0);
  TrainingConfig training;
  EvalModel eval_model;
  bool passthrough_codecs = false;
  std::string segnet_checkpoint, semcodec_checkpoint, chancodec_checkpoint;
  bool use_ground_truth_masks = false;

  void validate() const {
    channel.validate();
    SnrThresholds t = thresholds;
    t.gamma_min = snr_db_min;
    t.gamma_max = snr_db_max;
    t.validate();
    blur_policy.validate();
    if (dataset.type != "synthetic" && dataset.type != "directory")
      throw ConfigError("config: dataset.type must be 'synthetic' or 'directory'");
    if (task.task_classes.empty()) throw ConfigError("config: task.classes is empty");
    if (!(training.learning_rate >= 0)) throw ConfigError("config: negative learning rate");
  }

  SnrThresholds full_thresholds() const {
    SnrThresholds t = thresholds;
    t.gamma_min = snr_db_min;
    t.gamma_max = snr_db_max;
    return t;
  }
};

inline ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.seed = j.value("seed", c.seed);
  c.output_dir = j.value("output_dir", c.output_dir);
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    c.dataset.type = d.value("type", c.dataset.type);
    c.dataset.n = d.value("n", c.dataset.n);
    c.dataset.size = d.value("size", c.dataset.size);
    c.dataset.num_classes = d.value("num_classes", c.dataset.num_classes);
    c.dataset.path = d.value("path", c.dataset.path);
    c.dataset.colormap_path = d.value("colormap", c.dataset.colormap_path);
  }
  if (j.contains("channel")) {
    const auto& ch = j["channel"];
    c.channel.b0 = ch.value("b0", c.channel.b0);
    c.channel.m = ch.value("m", c.channel.m);
    c.channel.omega = ch.value("omega", c.channel.omega);
    c.snr_db_min = ch.value("snr_db_min", c.snr_db_min);
    c.snr_db_max = ch.value("snr_db_max", c.snr_db_max);
    c.equalize = ch.value("equalize", c.equalize);
  }
  c.thresholds.gamma1 = j.value("gamma1_db", c.thresholds.gamma1);
  c.thresholds.gamma2 = j.value("gamma2_db", c.thresholds.gamma2);
  c.thresholds.gamma_min = c.snr_db_min;
  c.thresholds.gamma_max = c.snr_db_max;
  if (j.contains("task")) {
    const auto& t = j["task"];
    if (t.contains("classes"))
      c.task.task_classes = std::set<int>(t["classes"].begin(), t["classes"].end());
    if (t.contains("background_fill")) {
      auto bf = t["background_fill"];
      for (int i = 0; i < 3; ++i) c.task.background_fill[i] = bf[i].get<uint8_t>();
    }
  } else {
    c.task.task_classes = {1};
  }
  if (j.contains("blur_policy")) {
    c.blur_policy.tiers.clear();
    for (const auto& t : j["blur_policy"]["tiers"])
      c.blur_policy.tiers.push_back({t.at("threshold").get<double>(), t.at("kernel").get<int>()});
  }
  if (j.contains("training")) {
    const auto& t = j["training"];
    c.training.learning_rate = t.value("learning_rate", c.training.learning_rate);
    c.training.batch_size = t.value("batch_size", c.training.batch_size);
    c.training.epochs = t.value("epochs", c.training.epochs);
    c.training.epochs_per_stage = t.value("epochs_per_stage", c.training.epochs_per_stage);
    c.training.weight_decay = t.value("weight_decay", c.training.weight_decay);
  }
  if (j.contains("eval_model")) {
    const auto& e = j["eval_model"];
    c.eval_model.w0 = e.value("w0", 0.0);
    c.eval_model.w1 = e.value("w1", 0.0);
    c.eval_model.w2 = e.value("w2", 0.0);
    c.eval_model.alpha = e.value("alpha", 0.05);
  }
  c.passthrough_codecs = j.value("passthrough_codecs", c.passthrough_codecs);
  c.use_ground_truth_masks = j.value("use_ground_truth_masks", c.use_ground_truth_masks);
  if (j.contains("checkpoints")) {
    const auto& k = j["checkpoints"];
    c.segnet_checkpoint = k.value("segnet", "");
    c.semcodec_checkpoint = k.value("semcodec", "");
    c.chancodec_checkpoint = k.value("chancodec", "");
  }
  c.validate();
  return c;
}

inline json config_to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["dataset"] = {{"type", c.dataset.type}, {"n", c.dataset.n}, {"size", c.dataset.size},
                  {"num_classes", c.dataset.num_classes}, {"path", c.dataset.path},
                  {"colormap", c.dataset.colormap_path}};
  j["channel"] = {{"b0", c.channel.b0}, {"m", c.channel.m}, {"omega", c.channel.omega},
                  {"snr_db_min", c.snr_db_min}, {"snr_db_max", c.snr_db_max},
                  {"equalize", c.equalize}};
  j["gamma1_db"] = c.thresholds.gamma1;
  j["gamma2_db"] = c.thresholds.gamma2;
  j["task"] = {{"classes", std::vector<int>(c.task.task_classes.begin(), c.task.task_classes.end())},
               {"background_fill", {c.task.background_fill[0], c.task.background_fill[1],
                                    c.task.background_fill[2]}}};
  json tiers = json::array();
  for (const auto& t : c.blur_policy.tiers)
    tiers.push_back({{"threshold", t.upper_threshold}, {"kernel", t.kernel}});
  j["blur_policy"] = {{"tiers", tiers}};
  j["training"] = {{"learning_rate", c.training.learning_rate},
                   {"batch_size", c.training.batch_size}, {"epochs", c.training.epochs},
                   {"epochs_per_stage", c.training.epochs_per_stage},
                   {"weight_decay", c.training.weight_decay}};
  j["eval_model"] = {{"w0", c.eval_model.w0}, {"w1", c.eval_model.w1},
                     {"w2", c.eval_model.w2}, {"alpha", c.eval_model.alpha}};
  j["passthrough_codecs"] = c.passthrough_codecs;
  j["use_ground_truth_masks"] = c.use_ground_truth_masks;
  j["checkpoints"] = {{"segnet", c.segnet_checkpoint}, {"semcodec", c.semcodec_checkpoint},
                      {"chancodec", c.chancodec_checkpoint}};
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot open '" + path + "'");
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigError("config: parse error in '" + path + "': " + e.what());
  }
  return config_from_json(j);
}

}  // namespace irst
