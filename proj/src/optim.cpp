#include "cards/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace cards::nn {

double lr_at(const Schedule& s, double epoch) {
    if (epoch < 0.0 || epoch > s.total_epochs)
        throw std::out_of_range("lr_at: epoch " + std::to_string(epoch) +
                                " outside [0, " + std::to_string(s.total_epochs) + "]");
    switch (s.kind) {
        case ScheduleKind::constant:
            return s.base_lr;
        case ScheduleKind::cosine:
            return s.base_lr * 0.5 * (1.0 + std::cos(M_PI * epoch / s.total_epochs));
        case ScheduleKind::step: {
            double lr = s.base_lr;
            for (const auto& [frac, rate] : s.drops)
                if (epoch >= frac * s.total_epochs) lr = rate;
            return lr;
        }
    }
    throw std::runtime_error("lr_at: unknown schedule kind");
}

Schedule constant_schedule(double lr, double total_epochs) {
    return Schedule{ScheduleKind::constant, lr, total_epochs, {}};
}

Schedule cosine_schedule(double base_lr, double total_epochs) {
    return Schedule{ScheduleKind::cosine, base_lr, total_epochs, {}};
}

Schedule step160_schedule(double base_lr, double total_epochs) {
    return Schedule{ScheduleKind::step,
                    base_lr,
                    total_epochs,
                    {{0.5, base_lr * 0.1}, {0.75, base_lr * 0.01}}};
}

void sgd_step(Network& net, Optimizer& opt, const Grads& g, double lr) {
    const std::size_t L = net.layers.size();
    if (opt.vel_w.size() != L) {
        opt.vel_w.assign(L, Tensor{});
        opt.vel_b.assign(L, Tensor{});
        for (std::size_t i = 0; i < L; ++i) {
            if (!net.layers[i].has_params()) continue;
            opt.vel_w[i] = Tensor(net.layers[i].weights.shape);
            if (!net.layers[i].bias.empty()) opt.vel_b[i] = Tensor(net.layers[i].bias.shape);
        }
    }
    for (std::size_t li = 0; li < L; ++li) {
        Layer& l = net.layers[li];
        if (!l.has_params()) continue;
        const bool masked = !l.mask.empty();
        for (std::size_t i = 0; i < l.weights.data.size(); ++i) {
            if (masked && l.mask.data[i] == 0.f) continue;
            const double grad = double(g.w[li].data[i]) + opt.weight_decay * double(l.weights.data[i]);
            const double v = opt.momentum * double(opt.vel_w[li].data[i]) + grad;
            opt.vel_w[li].data[i] = float(v);
            l.weights.data[i] = float(double(l.weights.data[i]) - lr * v);
        }
        if (!l.bias.empty()) {
            for (std::size_t i = 0; i < l.bias.data.size(); ++i) {
                const double grad = double(g.b[li].data[i]) + opt.weight_decay * double(l.bias.data[i]);
                const double v = opt.momentum * double(opt.vel_b[li].data[i]) + grad;
                opt.vel_b[li].data[i] = float(v);
                l.bias.data[i] = float(double(l.bias.data[i]) - lr * v);
            }
        }
    }
}

Network train(Network net, const Dataset& data, Optimizer& opt, const Schedule& sched,
              const TrainOptions& o) {
    if (o.epochs < 0.0) throw std::invalid_argument("train: negative epoch count");
    if (o.epochs == 0.0 && o.total_steps <= 0) return net;
    if (o.batch_size <= 0) throw std::invalid_argument("train: batch_size must be positive");
    const std::int64_t n = data.count();
    const std::int64_t spe = n / o.batch_size;  // drop the ragged tail batch
    if (spe == 0)
        throw std::invalid_argument("train: batch_size " + std::to_string(o.batch_size) +
                                    " exceeds dataset size " + std::to_string(n));
    const std::int64_t steps =
        o.total_steps >= 0 ? o.total_steps : std::llround(o.epochs * double(spe));
    if (steps == 0) return net;
    const Rng root = Rng(o.seed).derive("train-shuffle").derive(o.shuffle_salt);

    std::vector<std::size_t> perm(std::size_t(n), 0);
    std::int64_t perm_epoch = -1;
    std::vector<std::size_t> batch_idx(std::size_t(o.batch_size), 0);
    const std::int64_t first =
        o.first_step >= 0 ? o.first_step : std::llround(o.epoch_offset * double(spe));

    for (std::int64_t s = 0; s < steps; ++s) {
        const std::int64_t gstep = first + s;
        const std::int64_t epoch_idx = gstep / spe;
        const std::int64_t pos = gstep % spe;
        if (epoch_idx != perm_epoch) {
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            Rng er = root.derive(std::uint64_t(epoch_idx));
            er.shuffle(perm);
            perm_epoch = epoch_idx;
        }
        for (std::int64_t k = 0; k < o.batch_size; ++k)
            batch_idx[std::size_t(k)] = perm[std::size_t(pos * o.batch_size + k)];

        const double epoch_f = double(gstep) / double(spe);
        const double sched_epoch =
            o.clamp_schedule ? std::min(epoch_f, sched.total_epochs) : epoch_f;
        const double lr = lr_at(sched, sched_epoch);

        Tensor batch = data.gather(batch_idx);
        if (o.augment) o.augment(batch, gstep);
        std::vector<std::uint8_t> labels(std::size_t(o.batch_size));
        for (std::int64_t k = 0; k < o.batch_size; ++k)
            labels[std::size_t(k)] = data.labels[batch_idx[std::size_t(k)]];

        ForwardTrace trace = forward_trace(net, batch);
        LossOut loss = cross_entropy(trace.acts.back(), labels);
        if (!std::isfinite(loss.loss))
            throw std::runtime_error("train: non-finite loss at step " + std::to_string(gstep) +
                                     " (epoch " + std::to_string(epoch_f) + ", lr " +
                                     std::to_string(lr) + ")");
        Grads g = backward(net, trace, loss.dlogits);
        sgd_step(net, opt, g, lr);

        if (o.post_step) {
            StepInfo info{gstep, epoch_f, lr, &net, &opt};
            o.post_step(info);
        }
    }
    return net;
}

Network train(Network net, const Dataset& data, Optimizer& opt, const Schedule& sched,
              double epochs, std::uint64_t seed) {
    TrainOptions o;
    o.epochs = epochs;
    o.seed = seed;
    return train(std::move(net), data, opt, sched, o);
}

}  // namespace cards::nn
