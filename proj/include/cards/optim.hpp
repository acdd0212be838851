#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "cards/net.hpp"

namespace cards::nn {

enum class ScheduleKind : std::uint8_t { constant = 0, cosine = 1, step = 2 };

/// Learning-rate schedule over [0, total_epochs].  `step` drops to the listed
/// rate once the epoch fraction is reached, e.g. {(0.5, 1e-2), (0.75, 1e-3)}.
struct Schedule {
    ScheduleKind kind = ScheduleKind::constant;
    double base_lr = 0.1;
    double total_epochs = 1.0;
    std::vector<std::pair<double, double>> drops;  // (epoch fraction, lr), ascending
};

/// LR at a (possibly fractional) epoch.  Throws std::out_of_range outside
/// [0, total_epochs].
double lr_at(const Schedule& s, double epoch);

Schedule constant_schedule(double lr, double total_epochs);
Schedule cosine_schedule(double base_lr, double total_epochs);

/// The classic 160-epoch shape scaled to `total_epochs`: base rate, x0.1 at
/// half, x0.01 at three quarters.
Schedule step160_schedule(double base_lr, double total_epochs);

/// SGD with classical momentum and (coupled) weight decay.  Velocity buffers
/// are float like the weights; the per-element update runs in double.
struct Optimizer {
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::vector<Tensor> vel_w;  // lazily sized to the network on first step
    std::vector<Tensor> vel_b;

    void reset() {
        vel_w.clear();
        vel_b.clear();
    }
};

/// One update step.  Masked weight positions are skipped outright: neither the
/// weight nor its velocity moves, so a frozen position stays frozen bit-for-bit.
void sgd_step(Network& net, Optimizer& opt, const Grads& g, double lr);

struct StepInfo {
    std::int64_t step = 0;  // global step counter (see TrainOptions.first_step)
    double epoch = 0.0;     // schedule position, fractional
    double lr = 0.0;
    Network* net = nullptr;
    Optimizer* opt = nullptr;
};

struct TrainOptions {
    double epochs = 1.0;          // how many epochs this call runs
    std::int64_t batch_size = 32;
    std::uint64_t seed = 0;
    double epoch_offset = 0.0;    // schedule position at which this segment starts
    std::int64_t first_step = -1;   // step-granular override of epoch_offset
    std::int64_t total_steps = -1;  // step-granular override of epochs
    std::uint64_t shuffle_salt = 0;  // distinguishes segments that revisit epochs
    bool clamp_schedule = false;  // hold the final LR past total_epochs
    std::function<void(StepInfo&)> post_step;           // runs after each update
    std::function<void(Tensor&, std::int64_t)> augment; // (batch, step), before forward
};

/// Deterministic minibatch SGD.  Identical (net, data, options) produce a
/// bit-identical result.  epochs == 0 returns the input unchanged.
Network train(Network net, const Dataset& data, Optimizer& opt, const Schedule& sched,
              const TrainOptions& options);

/// Convenience wrapper: fresh optimizer state, default batch size.
Network train(Network net, const Dataset& data, Optimizer& opt, const Schedule& sched,
              double epochs, std::uint64_t seed);

}  // namespace cards::nn
