#pragma once

#include <torch/torch.h>

#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace rfseg {

struct FdSample {
  std::string param;
  int64_t flat_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  bool ok = false;
};

struct FdReport {
  std::vector<FdSample> samples;
  int failures = 0;
  double worst_abs_err = 0.0;

  bool all_ok() const { return failures == 0; }
};

// What a gradient check needs from the model under test. `loss` must rebuild
// the forward pass with the model's current dtype; `set_dtype` casts the model
// (and any cached inputs) in place; `params` re-fetches parameter handles,
// which change identity after a cast.
struct FdTarget {
  std::function<torch::Tensor()> loss;
  std::function<void(torch::ScalarType)> set_dtype;
  std::function<std::vector<std::pair<std::string, torch::Tensor>>()> params;
};

// Central-difference check of autograd gradients on randomly sampled scalar
// parameters. The analytic gradient is taken at `check_dtype` (the precision
// the model actually runs at); the finite-difference oracle is evaluated at
// float64 on an exact upcast of the same weights, so the oracle itself adds
// no rounding noise. A sample passes when
//   |fd - analytic| <= atol + rtol * max(|fd|, |analytic|).
inline FdReport finite_difference_check(
    const FdTarget& target, int samples_per_param, std::mt19937_64& rng,
    torch::ScalarType check_dtype = torch::kFloat32, double h = 1e-4,
    double rtol = 1e-3, double atol = 1e-6) {
  FdReport report;

  target.set_dtype(check_dtype);
  std::map<std::string, torch::Tensor> analytic;
  {
    auto params = target.params();
    for (auto& [name, p] : params) {
      if (p.grad().defined()) p.mutable_grad().zero_();
    }
    auto loss = target.loss();
    loss.backward();
    for (auto& [name, p] : params) {
      analytic[name] = p.grad().defined()
                           ? p.grad().flatten().to(torch::kFloat64).clone()
                           : torch::zeros({p.numel()}, torch::kFloat64);
    }
  }

  target.set_dtype(torch::kFloat64);
  for (auto& [name, p] : target.params()) {
    std::uniform_int_distribution<int64_t> pick(0, p.numel() - 1);
    for (int s = 0; s < samples_per_param; ++s) {
      const int64_t idx = pick(rng);
      auto flat = p.flatten();
      const double orig = flat[idx].item<double>();
      {
        torch::NoGradGuard g;
        flat[idx] = orig + h;
      }
      const double lp = target.loss().item<double>();
      {
        torch::NoGradGuard g;
        flat[idx] = orig - h;
      }
      const double lm = target.loss().item<double>();
      {
        torch::NoGradGuard g;
        flat[idx] = orig;
      }
      FdSample sample;
      sample.param = name;
      sample.flat_index = idx;
      sample.analytic = analytic.at(name)[idx].item<double>();
      sample.numeric = (lp - lm) / (2.0 * h);
      sample.abs_err = std::abs(sample.numeric - sample.analytic);
      const double tol = atol + rtol * std::max(std::abs(sample.numeric),
                                                std::abs(sample.analytic));
      sample.ok = sample.abs_err <= tol;
      if (!sample.ok) ++report.failures;
      report.worst_abs_err = std::max(report.worst_abs_err, sample.abs_err);
      report.samples.push_back(std::move(sample));
    }
  }
  target.set_dtype(check_dtype);
  return report;
}

// Convenience wrapper for a single module with fixed input tensors: casts the
// module and the inputs together.
inline FdTarget module_fd_target(
    std::shared_ptr<torch::nn::Module> module,
    std::vector<torch::Tensor> inputs,
    std::function<torch::Tensor(const std::vector<torch::Tensor>&)> loss) {
  auto held = std::make_shared<std::vector<torch::Tensor>>(std::move(inputs));
  FdTarget t;
  t.loss = [module, held, loss] { return loss(*held); };
  t.set_dtype = [module, held](torch::ScalarType dtype) {
    module->to(dtype);
    for (auto& x : *held) {
      if (x.is_floating_point()) x = x.to(dtype);
    }
  };
  t.params = [module] {
    std::vector<std::pair<std::string, torch::Tensor>> out;
    for (auto& p : module->named_parameters()) {
      out.emplace_back(p.key(), p.value());
    }
    return out;
  };
  return t;
}

}  // namespace rfseg
