#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "emoclim/embedding.hpp"
#include "emoclim/gradcheck.hpp"
#include "emoclim/layers.hpp"
#include "emoclim/losses.hpp"
#include "emoclim/probe.hpp"

namespace emoclim {

struct GradCheckEntry {
  std::string name;
  std::uint64_t seed = 0;
  GradCheckResult result;
};

struct GradCheckOptions {
  std::uint64_t seed = 0;
  std::size_t seeds = 20;
  double temperature = 0.07;
  // Test hook: added to one analytic gradient entry of every check, which
  // must make the suite fail.
  double perturb = 0.0;
};

namespace detail {

inline Tensor2<double> random_tensor(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Tensor2<double> t(rows, cols);
  for (double& v : t.values()) v = normal(rng);
  return t;
}

inline double weighted_sum(const Tensor2<double>& a, const Tensor2<double>& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.values()[i] * w.values()[i];
  return s;
}

// Labels cycling over `classes` values, shuffled, so every class occurs at least twice when n >= 2*classes.
inline std::vector<int> balanced_labels(std::size_t n, int classes, Rng& rng) {
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  std::shuffle(labels.begin(), labels.end(), rng);
  return labels;
}

class SuiteRunner {
 public:
  SuiteRunner(const GradCheckOptions& options, std::vector<GradCheckEntry>& out) : options_(options), out_(out) {}

  void check(const std::string& name, std::uint64_t seed, const std::function<double()>& loss,
             std::vector<ParamRef<double>> params, Rng& rng) {
    if (options_.perturb != 0.0 && !params.empty() && !params.front().grad.empty()) {
      params.front().grad[0] += options_.perturb;
    }
    out_.push_back({name, seed, grad_check(loss, params, rng)});
  }

  const GradCheckOptions& options() const { return options_; }

 private:
  const GradCheckOptions& options_;
  std::vector<GradCheckEntry>& out_;
};

inline ParamRef<double> view(const std::string& name, Tensor2<double>& value, Tensor2<double>& grad) {
  return {name, value.values(), grad.values(), false};
}

inline std::vector<ParamRef<double>> without_pre_bn_bias(std::vector<ParamRef<double>> params) {
  // The bias feeding a train-mode batchnorm has an identically zero
  // gradient; relative error is meaningless there.
  std::erase_if(params, [](const ParamRef<double>& p) { return p.name.ends_with(".layer1.bias"); });
  return params;
}

inline void check_layers(SuiteRunner& run, std::uint64_t seed) {
  auto rng = derive_rng(seed, "gradcheck.layers");

  {
    Linear<double> layer(7, 5, rng);
    std::normal_distribution<double> normal(0.0, 0.3);
    for (double& b : layer.bias) b = normal(rng);
    auto x = random_tensor(3, 7, rng);
    const auto w = random_tensor(3, 5, rng);
    auto loss = [&] { return weighted_sum(layer.forward(x), w); };
    layer.zero_grad();
    auto gx = layer.backward(x, w);
    std::vector<ParamRef<double>> params;
    layer.collect("linear", params);
    params.push_back(view("linear.input", x, gx));
    run.check("linear", seed, loss, params, rng);
  }

  {
    BatchNorm<double> bn(4);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (double& g : bn.gamma) g = 1.0 + normal(rng);
    for (double& b : bn.beta) b = normal(rng);
    auto x = random_tensor(6, 4, rng);
    const auto w = random_tensor(6, 4, rng);
    auto loss = [&] {
      const auto y = bn.forward(x, Mode::Train);
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w.values()[i] * y.values()[i] * y.values()[i] + y.values()[i];
      return s;
    };
    const auto y = bn.forward(x, Mode::Train);
    Tensor2<double> gy(6, 4);
    for (std::size_t i = 0; i < y.size(); ++i) gy.values()[i] = 2.0 * w.values()[i] * y.values()[i] + 1.0;
    bn.zero_grad();
    auto gx = bn.backward(gy);
    std::vector<ParamRef<double>> params;
    bn.collect("batchnorm", params);
    params.push_back(view("batchnorm.input", x, gx));
    run.check("batchnorm(train)", seed, loss, params, rng);
  }

  {
    auto x = random_tensor(4, 6, rng);
    const auto w = random_tensor(4, 6, rng);
    auto loss = [&] { return weighted_sum(relu_forward(x), w); };
    auto gx = relu_backward(x, w);
    run.check("relu", seed, loss, {view("relu.input", x, gx)}, rng);
  }

  {
    Dropout<double> dropout(0.3, 0);
    const std::uint64_t mask_seed = derive_seed(seed, "gradcheck.dropout");
    auto x = random_tensor(4, 6, rng);
    const auto w = random_tensor(4, 6, rng);
    auto loss = [&] {
      dropout.reseed(mask_seed);
      return weighted_sum(dropout.forward(x, Mode::Train), w);
    };
    dropout.reseed(mask_seed);
    (void)dropout.forward(x, Mode::Train);
    auto gx = dropout.backward(w);
    run.check("dropout(train)", seed, loss, {view("dropout.input", x, gx)}, rng);
  }

  {
    auto x = random_tensor(4, 5, rng);
    const auto w = random_tensor(4, 5, rng);
    auto loss = [&] { return weighted_sum(l2_normalize_forward(x), w); };
    auto gx = l2_normalize_backward(x, w);
    run.check("l2_normalize", seed, loss, {view("l2_normalize.input", x, gx)}, rng);
  }
}

inline Tensor2<double> random_unit_rows(std::size_t n, std::size_t d, Rng& rng) {
  return l2_normalize_forward(random_tensor(n, d, rng));
}

inline void check_losses(SuiteRunner& run, std::uint64_t seed) {
  auto rng = derive_rng(seed, "gradcheck.losses");
  const double tau = run.options().temperature;
  const std::size_t n = 8, d = 5;
  auto za = random_unit_rows(n, d, rng);
  auto zb = random_unit_rows(n, d, rng);
  const auto ya = balanced_labels(n, 3, rng);
  const auto yb = balanced_labels(n, 3, rng);

  {
    auto r = supcon_cross(za, ya, zb, yb, tau);
    auto loss = [&] { return supcon_cross(za, ya, zb, yb, tau).loss; };
    run.check("supcon image_to_audio", seed, loss,
              {view("anchors", za, r.grad_anchors), view("candidates", zb, r.grad_candidates)}, rng);
  }
  {
    auto r = supcon_cross(zb, yb, za, ya, tau);
    auto loss = [&] { return supcon_cross(zb, yb, za, ya, tau).loss; };
    run.check("supcon audio_to_image", seed, loss,
              {view("anchors", zb, r.grad_anchors), view("candidates", za, r.grad_candidates)}, rng);
  }
  {
    auto r = supcon_intra(za, ya, tau);
    auto loss = [&] { return supcon_intra(za, ya, tau).loss; };
    run.check("supcon image_to_image", seed, loss, {view("embeddings", za, r.grad_anchors)}, rng);
  }
  {
    auto r = supcon_intra(zb, yb, tau);
    auto loss = [&] { return supcon_intra(zb, yb, tau).loss; };
    run.check("supcon audio_to_audio", seed, loss, {view("embeddings", zb, r.grad_anchors)}, rng);
  }
}

inline void check_pipeline(SuiteRunner& run, std::uint64_t seed, Mode mode) {
  auto rng = derive_rng(seed, mode == Mode::Train ? "gradcheck.pipeline.train" : "gradcheck.pipeline.eval");
  const std::size_t n = 8;
  HeadConfig image_cfg{6, 7, 4, 0.25};
  HeadConfig audio_cfg{5, 7, 4, 0.25};
  ProjectionHead<double> image(image_cfg, derive_seed(seed, "image"));
  ProjectionHead<double> audio(audio_cfg, derive_seed(seed, "audio"));
  std::normal_distribution<double> normal(0.0, 0.3);
  for (auto* head : {&image, &audio}) {
    for (double& v : head->bn.running_mean) v = normal(rng);
    for (double& v : head->bn.running_var) v = 1.0 + std::abs(normal(rng));
    for (double& v : head->bn.gamma) v = 1.0 + normal(rng);
    for (double& v : head->bn.beta) v = normal(rng);
    for (double& v : head->layer2.bias) v = normal(rng);
  }
  const auto x_image = random_tensor(n, 6, rng);
  const auto x_audio = random_tensor(n, 5, rng);
  const auto y_image = balanced_labels(n, 3, rng);
  const auto y_audio = balanced_labels(n, 3, rng);
  const LossConfig cfg{run.options().temperature, {0.25, 0.25, 0.25, 0.25}};
  const std::uint64_t mask_seed = derive_seed(seed, "masks");

  auto forward = [&] {
    image.dropout.reseed(mask_seed);
    audio.dropout.reseed(mask_seed + 1);
    const auto zi = image.forward(x_image, mode);
    const auto za = audio.forward(x_audio, mode);
    return total_loss(zi, y_image, za, y_audio, cfg);
  };
  auto loss = [&] { return forward().total; };
  const auto l = forward();
  image.zero_grad();
  audio.zero_grad();
  image.backward(l.grad_image);
  audio.backward(l.grad_audio);
  std::vector<ParamRef<double>> params;
  image.collect("image", params);
  audio.collect("audio", params);
  if (mode == Mode::Train) params = without_pre_bn_bias(std::move(params));
  run.check(mode == Mode::Train ? "projection heads + total loss (train)" : "projection heads + total loss (eval)",
            seed, loss, params, rng);
}

inline void check_probe(SuiteRunner& run, std::uint64_t seed) {
  auto rng = derive_rng(seed, "gradcheck.probe");
  ProbeConfig cfg;
  cfg.seed = seed;
  TagProbe<double> probe(6, 9, 5, cfg);
  auto x = random_tensor(10, 6, rng);
  Tensor2<double> targets(10, 5);
  std::bernoulli_distribution coin(0.4);
  for (double& t : targets.values()) t = coin(rng) ? 1.0 : 0.0;
  auto loss = [&] { return bce_with_logits(probe.forward(x, Mode::Train), targets).loss; };
  const auto bce = bce_with_logits(probe.forward(x, Mode::Train), targets);
  probe.zero_grad();
  auto gx = probe.backward(bce.grad);
  std::vector<ParamRef<double>> params;
  probe.collect("probe", params);
  params = without_pre_bn_bias(std::move(params));
  params.push_back(view("probe.input", x, gx));
  run.check("tag probe + BCE", seed, loss, params, rng);
}

}  // namespace detail

// Every analytic backward pass in the library against f64 central
// differences, repeated over `options.seeds` consecutive seeds.
inline std::vector<GradCheckEntry> run_gradcheck_suite(const GradCheckOptions& options) {
  std::vector<GradCheckEntry> entries;
  detail::SuiteRunner runner(options, entries);
  for (std::uint64_t s = options.seed; s < options.seed + options.seeds; ++s) {
    detail::check_layers(runner, s);
    detail::check_losses(runner, s);
    detail::check_pipeline(runner, s, Mode::Train);
    detail::check_pipeline(runner, s, Mode::Eval);
    detail::check_probe(runner, s);
  }
  return entries;
}

}  // namespace emoclim
