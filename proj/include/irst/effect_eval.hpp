#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <vector>

#include "irst/errors.hpp"
#include "irst/segmentation.hpp"

namespace irst {

struct TaskSpec {
  std::set<int> task_classes;
  std::array<uint8_t, 3> background_fill = {0, 0, 0};

  void validate(int num_classes) const {
    if (task_classes.empty()) throw ConfigError("TaskSpec: task class set is empty");
    for (int c : task_classes)
      if (c < 0 || c >= num_classes)
        throw ConfigError("TaskSpec: class id " + std::to_string(c) + " out of range");
  }
};

struct EvalFeatures {
  double x_s = 0.0;  // task-pixel fraction
  double x_c = 0.0;  // normalized SNR in [0,1]
};

struct EvalModel {
  double w0 = 0.0, w1 = 0.0, w2 = 0.0;
  double alpha = 0.05;
};

struct TrainSample {
  EvalFeatures features;
  double y = 0.0;  // observed task-region PSNR (dB)
};

inline double predict(const EvalModel& m, const EvalFeatures& f) {
  return m.w0 + m.w1 * f.x_s + m.w2 * f.x_c;
}

inline double eval_loss(const EvalModel& m, const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw ConfigError("eval_loss: empty sample set");
  double s = 0.0;
  for (const auto& t : samples) {
    double r = t.y - predict(m, t.features);
    s += r * r;
  }
  return s / static_cast<double>(samples.size());
}

inline std::array<double, 3> eval_gradient(const EvalModel& m,
                                           const std::vector<TrainSample>& samples) {
  if (samples.empty()) throw ConfigError("eval_gradient: empty sample set");
  double g0 = 0.0, g1 = 0.0, g2 = 0.0;
  for (const auto& t : samples) {
    double r = t.y - predict(m, t.features);
    g0 += r;
    g1 += r * t.features.x_s;
    g2 += r * t.features.x_c;
  }
  double c = -2.0 / static_cast<double>(samples.size());
  return {c * g0, c * g1, c * g2};
}

// Full-batch gradient descent on the MSE loss.
inline EvalModel fit_eval(const std::vector<TrainSample>& samples, double alpha,
                          long epochs) {
  if (!(alpha >= 0.0)) throw ConfigError("fit_eval: alpha must be >= 0");
  if (samples.size() < 3) throw ConfigError("fit_eval: need at least 3 samples");
  EvalModel m;
  m.alpha = alpha;
  for (long e = 0; e < epochs; ++e) {
    auto g = eval_gradient(m, samples);
    m.w0 -= alpha * g[0];
    m.w1 -= alpha * g[1];
    m.w2 -= alpha * g[2];
    if (!std::isfinite(m.w0) || !std::isfinite(m.w1) || !std::isfinite(m.w2))
      throw NumericalError("fit_eval: diverged (alpha=" + std::to_string(alpha) + ")");
  }
  return m;
}

// x_s = task-pixel fraction; x_c = SNR normalized over [gamma_min, gamma_max].
inline EvalFeatures extract_features(const SegmentationMap& map, const TaskSpec& task,
                                     double snr_db, double gamma_min, double gamma_max) {
  task.validate(map.num_classes);
  long n = 0;
  for (int c : map.classes)
    if (task.task_classes.count(c)) ++n;
  double xs = static_cast<double>(n) / static_cast<double>(map.classes.size());
  double xc = (snr_db - gamma_min) / (gamma_max - gamma_min);
  return {xs, std::clamp(xc, 0.0, 1.0)};
}

}  // namespace irst
