#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "bfp/buffer.hpp"
#include "bfp/data.hpp"
#include "bfp/error.hpp"
#include "bfp/losses.hpp"
#include "bfp/metrics.hpp"
#include "bfp/network.hpp"
#include "bfp/rng.hpp"

namespace bfp {

enum class BaseMethod { FT, JT, ER, DERpp };
enum class ProjectorChoice { None, FD, BFP, BFP2 };

inline ProjectorKind projector_kind(ProjectorChoice c) {
  switch (c) {
    case ProjectorChoice::FD: return ProjectorKind::Identity;
    case ProjectorChoice::BFP: return ProjectorKind::Linear;
    case ProjectorChoice::BFP2: return ProjectorKind::TwoLayer;
    default: throw InvalidInput("projector_kind: method has no projector");
  }
}

/// A continual-learning method: replay base plus optional backward
/// projection term. FT and JT never touch the buffer (alpha = beta = 0);
/// "FT w/ BFP" applies the projection loss on the online stream only.
struct MethodSpec {
  BaseMethod base = BaseMethod::FT;
  ProjectorChoice projector = ProjectorChoice::None;
  LossWeights weights;

  bool uses_buffer() const { return base == BaseMethod::ER || base == BaseMethod::DERpp; }
  bool uses_projector() const {
    return projector != ProjectorChoice::None && weights.gamma > 0.0;
  }

  void validate() const {
    if ((base == BaseMethod::FT || base == BaseMethod::JT) &&
        (weights.alpha != 0.0 || weights.beta != 0.0))
      throw InvalidInput("MethodSpec: FT/JT require alpha = beta = 0");
    if (base == BaseMethod::JT && projector != ProjectorChoice::None)
      throw InvalidInput("MethodSpec: joint training has no previous-task teacher");
    if (base == BaseMethod::ER && weights.beta != 0.0)
      throw InvalidInput("MethodSpec: ER does not distill logits (beta must be 0)");
    if (weights.alpha < 0.0 || weights.beta < 0.0 || weights.gamma < 0.0)
      throw InvalidInput("MethodSpec: loss weights must be non-negative");
  }

  std::string name() const {
    std::string n;
    switch (base) {
      case BaseMethod::FT: n = "ft"; break;
      case BaseMethod::JT: n = "jt"; break;
      case BaseMethod::ER: n = "er"; break;
      case BaseMethod::DERpp: n = "der++"; break;
    }
    switch (projector) {
      case ProjectorChoice::None: break;
      case ProjectorChoice::FD: n += "/fd"; break;
      case ProjectorChoice::BFP: n += "/bfp"; break;
      case ProjectorChoice::BFP2: n += "/bfp2"; break;
    }
    return n;
  }
};

/// Frozen copy of the model at a task boundary. Never mutated afterwards.
struct Checkpoint {
  NetworkParams params;
};

inline Checkpoint freeze_checkpoint(const NetworkParams& p) { return Checkpoint{p}; }

struct TrainConfig {
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  double lr = 0.05;
  double proj_lr = 0.1;        // projection matrix optimizer
  double proj_momentum = 0.9;
  std::size_t buffer_capacity = 200;
  // Evaluate the projection loss on the online batch as well as the replay
  // batch (both averaged with equal weight). When false only the replay
  // batch contributes, as in the pseudocode's replay-only reading.
  bool bfp_on_stream = true;
  std::vector<std::size_t> hidden_dims = {100, 50};
  bool record_step_parts = false;
};

/// Per-step loss decomposition, recorded when requested.
struct StepParts {
  double ce = 0.0, rep_ce = 0.0, rep_logit = 0.0, bfp = 0.0, total = 0.0;
};

/// Mutable state of one sequential run.
struct RunState {
  NetworkParams params;
  Projector projector;
  ProjectorOptimizer proj_opt;
  MemoryBuffer buffer;
  std::optional<Checkpoint> previous;
  int task_index = 0;  // tasks completed so far
  Rng replay_rng;
  std::uint64_t run_seed = 0;
  long global_step = 0;
  std::vector<StepParts> step_parts;

  RunState(NetworkParams p, std::size_t buffer_capacity, std::uint64_t seed)
      : params(std::move(p)),
        buffer(buffer_capacity, Rng::derive(seed, 2)),
        replay_rng(Rng::derive(seed, 3)),
        run_seed(seed) {}
};

enum class EvalMode { ClassIL, TaskIL };

/// Accuracy on the test sets of tasks 1..upto_task. Class-IL takes the
/// argmax over all logits (ties to the lowest class); Task-IL restricts the
/// argmax to the example's ground-truth task classes.
inline std::vector<double> evaluate(const NetworkParams& params, const TaskStream& stream,
                                    std::size_t upto_task, EvalMode mode) {
  std::vector<double> acc;
  for (std::size_t t = 0; t < upto_task; ++t) {
    const TaskData& task = stream.tasks[t];
    const Matrix logits = logits_only(params, task.test.inputs);
    std::size_t correct = 0;
    for (std::size_t j = 0; j < logits.cols; ++j) {
      int pred;
      if (mode == EvalMode::ClassIL) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.rows; ++i)
          if (logits(i, j) > logits(best, j)) best = i;
        pred = static_cast<int>(best);
      } else {
        pred = task_il_mask(logits.col(j), task.classes);
      }
      if (pred == task.test.labels[j]) ++correct;
    }
    acc.push_back(static_cast<double>(correct) / static_cast<double>(logits.cols));
  }
  return acc;
}

namespace detail {

inline void add_matrix_scaled(Matrix& acc, const Matrix& g, double s) {
  for (std::size_t k = 0; k < acc.data.size(); ++k) acc.data[k] += s * g.data[k];
}

inline void add_projector_grads(ProjectorGrads& acc, const ProjectorGrads& g, double s) {
  add_matrix_scaled(acc.a, g.a, s);
  add_matrix_scaled(acc.w1, g.w1, s);
  add_matrix_scaled(acc.w2, g.w2, s);
}

}  // namespace detail

/// One task of Algorithm-1-style training: cross-entropy on the online
/// stream; from the second task onward, independently sampled replay
/// batches feed the replay cross-entropy, the logit distillation against
/// the frozen previous model, and the backward projection loss. The model
/// takes plain SGD steps, the projector momentum SGD steps, and every
/// online example is offered to the balanced reservoir.
inline void train_task(RunState& state, const TaskData& task, const MethodSpec& method,
                       const TrainConfig& config) {
  const int t = ++state.task_index;
  const std::size_t d = state.params.feature_dim();
  const bool use_buffer = method.uses_buffer();
  const bool use_bfp = method.uses_projector();

  if (use_bfp) {
    state.projector = init_projector(projector_kind(method.projector), d,
                                     Rng::derive(state.run_seed, 0x400 + static_cast<std::uint64_t>(t)));
    state.proj_opt = init_projector_optimizer(state.projector, config.proj_lr,
                                              config.proj_momentum);
  }

  const LossWeights& w = method.weights;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto batches = batch_iter(
        task.train.size(), config.batch_size,
        Rng::derive(state.run_seed,
                    0x100000 + static_cast<std::uint64_t>(t) * 4096 + epoch));
    for (const auto& batch : batches) {
      auto [x, y] = gather(task.train, batch);

      ForwardCache cache;
      Matrix z = forward_features(state.params, x, cache);
      Matrix logits = forward_logits(state.params.head, z);
      LossAndGrad ce = cross_entropy(logits, y);

      NetworkGrads grads = zero_grads(state.params);
      Matrix dz = head_backward(state.params.head, z, ce.grad, grads.head);

      StepParts parts;
      parts.ce = ce.loss;
      ProjectorGrads proj_grads = zero_grads(state.projector);
      bool stepped_projector = false;

      if (t > 1) {
        const NetworkParams& old = state.previous->params;
        const bool bfp_replay = use_bfp && use_buffer && !state.buffer.empty();
        const bool bfp_stream = use_bfp && (config.bfp_on_stream || !use_buffer);
        const double stream_w = bfp_stream ? (bfp_replay ? 0.5 : 1.0) : 0.0;
        const double replay_w = bfp_replay ? (bfp_stream ? 0.5 : 1.0) : 0.0;

        if (bfp_stream) {
          const Matrix z_old = features_only(old, x);
          BfpResult b = bfp_loss(state.projector, z, z_old);
          parts.bfp += stream_w * b.loss;
          detail::add_matrix_scaled(dz, b.dz, w.gamma * stream_w);
          detail::add_projector_grads(proj_grads, b.dproj, w.gamma * stream_w);
          stepped_projector = true;
        }
        if (use_buffer && !state.buffer.empty()) {
          const std::size_t k = config.batch_size;
          if (w.alpha > 0.0) {
            auto [rx, ry] = state.buffer.sample_batch(k, state.replay_rng);
            ForwardCache rcache;
            Matrix rz = forward_features(state.params, rx, rcache);
            Matrix rlogits = forward_logits(state.params.head, rz);
            LossAndGrad rce = cross_entropy(rlogits, ry);
            parts.rep_ce = rce.loss;
            Matrix scaled_grad = scaled(rce.grad, w.alpha);
            Matrix rdz = head_backward(state.params.head, rz, scaled_grad, grads.head);
            features_backward(state.params, rcache, rdz, grads);
          }
          if (w.beta > 0.0) {
            auto [rx, ry] = state.buffer.sample_batch(k, state.replay_rng);
            (void)ry;
            ForwardCache rcache;
            Matrix rz = forward_features(state.params, rx, rcache);
            Matrix rlogits = forward_logits(state.params.head, rz);
            const Matrix old_logits = logits_only(old, rx);
            LossAndGrad dist = logit_distill(rlogits, old_logits);
            parts.rep_logit = dist.loss;
            Matrix scaled_grad = scaled(dist.grad, w.beta);
            Matrix rdz = head_backward(state.params.head, rz, scaled_grad, grads.head);
            features_backward(state.params, rcache, rdz, grads);
          }
          if (bfp_replay) {
            auto [rx, ry] = state.buffer.sample_batch(k, state.replay_rng);
            (void)ry;
            ForwardCache rcache;
            Matrix rz = forward_features(state.params, rx, rcache);
            const Matrix rz_old = features_only(old, rx);
            BfpResult b = bfp_loss(state.projector, rz, rz_old);
            parts.bfp += replay_w * b.loss;
            Matrix rdz = scaled(b.dz, w.gamma * replay_w);
            features_backward(state.params, rcache, rdz, grads);
            detail::add_projector_grads(proj_grads, b.dproj, w.gamma * replay_w);
            stepped_projector = true;
          }
        }
      }

      features_backward(state.params, cache, dz, grads);

      parts.total = total_loss(w, parts.ce, parts.rep_ce, parts.rep_logit, parts.bfp);
      if (!std::isfinite(parts.total))
        throw DivergedRun("train_task: non-finite loss at step " +
                              std::to_string(state.global_step),
                          state.global_step);

      sgd_step(state.params, grads, config.lr);
      if (stepped_projector)
        sgd_momentum_step(state.proj_opt, state.projector, proj_grads);

      if (use_buffer)
        for (std::size_t j = 0; j < batch.size(); ++j)
          state.buffer.balanced_reservoir_insert(x.col(j), y[j]);

      if (config.record_step_parts) state.step_parts.push_back(parts);
      ++state.global_step;
    }
  }
  state.previous = freeze_checkpoint(state.params);
}

/// Everything a run leaves behind for metrics and analysis.
struct RunResult {
  AccuracyMatrix class_il;
  AccuracyMatrix task_il;
  NetworkParams final_params;
  std::vector<NetworkParams> boundary_params;  // model after each task
  std::vector<StepParts> step_parts;
};

namespace detail {

inline std::vector<std::size_t> network_dims(const TaskStream& stream,
                                             const TrainConfig& config) {
  std::vector<std::size_t> dims{stream.input_width()};
  dims.insert(dims.end(), config.hidden_dims.begin(), config.hidden_dims.end());
  return dims;
}

// Joint training: for each boundary t the model is trained from scratch on
// the union of tasks 1..t, so the final column is the usual oracle and the
// intermediate columns show the joint model with a growing class set.
inline RunResult run_joint(const TaskStream& stream, const TrainConfig& config,
                           std::uint64_t seed) {
  RunResult result;
  const auto dims = detail::network_dims(stream, config);
  const std::size_t big_t = stream.task_count();
  for (std::size_t t = 1; t <= big_t; ++t) {
    NetworkParams params = init_params(
        dims, static_cast<std::size_t>(stream.class_count), Rng::derive(seed, 1));
    std::vector<const LabeledDataset*> parts;
    for (std::size_t i = 0; i < t; ++i) parts.push_back(&stream.tasks[i].train);
    const LabeledDataset joint = concat(parts);
    long step = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      const auto batches = batch_iter(
          joint.size(), config.batch_size,
          Rng::derive(seed, 0x100000 + t * 4096 + epoch));
      for (const auto& batch : batches) {
        auto [x, y] = gather(joint, batch);
        ForwardCache cache;
        Matrix z = forward_features(params, x, cache);
        Matrix logits = forward_logits(params.head, z);
        LossAndGrad ce = cross_entropy(logits, y);
        if (!std::isfinite(ce.loss))
          throw DivergedRun("run_joint: non-finite loss at step " + std::to_string(step),
                            step);
        NetworkGrads grads = zero_grads(params);
        Matrix dz = head_backward(params.head, z, ce.grad, grads.head);
        features_backward(params, cache, dz, grads);
        sgd_step(params, grads, config.lr);
        ++step;
      }
    }
    result.class_il.after.push_back(evaluate(params, stream, t, EvalMode::ClassIL));
    result.task_il.after.push_back(evaluate(params, stream, t, EvalMode::TaskIL));
    result.boundary_params.push_back(params);
    if (t == big_t) result.final_params = std::move(params);
  }
  return result;
}

}  // namespace detail

/// Run a full continual-learning experiment: train tasks in order (or
/// jointly for JT), evaluating on all seen tasks after each boundary in
/// both Class-IL and Task-IL modes. Deterministic in
/// (stream, method, config, seed).
inline RunResult run_continual(const TaskStream& stream, const MethodSpec& method,
                               const TrainConfig& config, std::uint64_t seed) {
  method.validate();
  if (stream.tasks.empty()) throw InvalidInput("run_continual: empty stream");
  if (method.base == BaseMethod::JT) return detail::run_joint(stream, config, seed);

  const auto dims = detail::network_dims(stream, config);
  RunState state(init_params(dims, static_cast<std::size_t>(stream.class_count),
                             Rng::derive(seed, 1)),
                 config.buffer_capacity, seed);

  RunResult result;
  for (std::size_t t = 1; t <= stream.task_count(); ++t) {
    if (config.record_step_parts) state.step_parts.clear();
    train_task(state, stream.tasks[t - 1], method, config);
    if (config.record_step_parts)
      result.step_parts.insert(result.step_parts.end(), state.step_parts.begin(),
                               state.step_parts.end());
    result.class_il.after.push_back(evaluate(state.params, stream, t, EvalMode::ClassIL));
    result.task_il.after.push_back(evaluate(state.params, stream, t, EvalMode::TaskIL));
    result.boundary_params.push_back(state.params);
  }
  result.final_params = state.params;
  return result;
}

}  // namespace bfp
