#include "cards/prune_runs.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace cards::prune {

namespace {

std::int64_t steps_per_epoch(const Dataset& data, const RunConfig& cfg) {
    if (cfg.batch_size <= 0) throw std::invalid_argument("run: batch_size must be positive");
    const std::int64_t spe = data.count() / cfg.batch_size;
    if (spe == 0)
        throw std::invalid_argument("run: batch_size " + std::to_string(cfg.batch_size) +
                                    " exceeds dataset size " + std::to_string(data.count()));
    return spe;
}

std::int64_t base_steps(const Dataset& data, const RunConfig& cfg) {
    if (cfg.epochs <= 0.0) throw std::invalid_argument("run: epochs must be positive");
    const std::int64_t steps = std::llround(cfg.epochs * double(steps_per_epoch(data, cfg)));
    if (steps <= 0) throw std::invalid_argument("run: zero training steps");
    return steps;
}

void check_target(double s) {
    if (!(s >= 0.0 && s < 1.0))
        throw std::invalid_argument("run: target sparsity " + std::to_string(s) +
                                    " outside [0, 1)");
}

nn::TrainOptions segment_options(const RunConfig& cfg) {
    nn::TrainOptions o;
    o.batch_size = cfg.batch_size;
    o.seed = cfg.seed;
    if (cfg.augment) {
        const auto aug = cfg.augment;
        const std::uint64_t seed = cfg.seed;
        o.augment = [aug, seed](Tensor& batch, std::int64_t step) {
            const std::int64_t m = batch.shape[0];
            const std::int64_t c = batch.shape[1];
            const std::int64_t d1 = batch.shape[2];
            const std::int64_t d2 = batch.shape[3];
            const std::int64_t stride = c * d1 * d2;
            Rng root = Rng(seed).derive("augment").derive(std::uint64_t(step));
            for (std::int64_t k = 0; k < m; ++k) {
                Rng r = root.derive(std::uint64_t(k));
                aug(batch.data.data() + k * stride, c, d1, d2, r);
            }
        };
    }
    return o;
}

/// Per-layer cumulative pruned-count targets for the prunable layers.
std::vector<std::int64_t> layer_targets(const nn::Network& net, double sparsity) {
    std::vector<std::int64_t> t;
    for (std::size_t li : net.prunable_layers())
        t.push_back(floor_count(sparsity, std::int64_t(net.layers[li].weights.data.size())));
    return t;
}

void prune_to_fraction(nn::Network& net, double sparsity, Scope scope) {
    if (scope == Scope::global)
        magnitude_mask_to_count(net, floor_count(sparsity, net.weight_count()));
    else
        magnitude_mask_to_count_layerwise(net, layer_targets(net, sparsity));
}

struct ParamCheckpoint {
    std::vector<Tensor> w, b, vw, vb;
};

ParamCheckpoint capture(const nn::Network& net, const nn::Optimizer& opt) {
    ParamCheckpoint ck;
    const std::size_t L = net.layers.size();
    ck.w.resize(L);
    ck.b.resize(L);
    ck.vw.resize(L);
    ck.vb.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
        const nn::Layer& l = net.layers[i];
        if (!l.has_params()) continue;
        ck.w[i] = l.weights;
        ck.b[i] = l.bias;
        // A fresh optimizer has no buffers yet; a checkpoint at step 0 means
        // zero velocity.
        ck.vw[i] = opt.vel_w.size() == L && !opt.vel_w[i].empty() ? opt.vel_w[i]
                                                                 : Tensor(l.weights.shape);
        if (!l.bias.empty())
            ck.vb[i] = opt.vel_b.size() == L && !opt.vel_b[i].empty() ? opt.vel_b[i]
                                                                     : Tensor(l.bias.shape);
    }
    return ck;
}

nn::Network checkpoint_net(const nn::Network& net, const ParamCheckpoint& ck) {
    nn::Network out = net;
    for (std::size_t i = 0; i < out.layers.size(); ++i) {
        nn::Layer& l = out.layers[i];
        if (!l.has_params()) continue;
        l.weights = ck.w[i];
        l.bias = ck.b[i];
        l.mask = Tensor{};
    }
    return out;
}

/// After a shot's prune: lth drops survivors (weights and momentum) back to
/// the checkpoint, lrr keeps the trained values.  Masked velocity is zeroed
/// either way so dead positions carry no state.
void apply_rewind(nn::Network& net, nn::Optimizer& opt, const ParamCheckpoint& ck, Method m) {
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
        nn::Layer& l = net.layers[li];
        if (!l.has_params()) continue;
        const bool masked = !l.mask.empty();
        for (std::size_t i = 0; i < l.weights.data.size(); ++i) {
            const bool live = !masked || l.mask.data[i] != 0.f;
            if (!live) {
                l.weights.data[i] = 0.f;
                opt.vel_w[li].data[i] = 0.f;
            } else if (m == Method::lth) {
                l.weights.data[i] = ck.w[li].data[i];
                opt.vel_w[li].data[i] = ck.vw[li].data[i];
            }
        }
        if (m == Method::lth && !l.bias.empty()) {
            l.bias = ck.b[li];
            opt.vel_b[li] = ck.vb[li];
        }
    }
}

}  // namespace

RunResult run_dense(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    const std::int64_t steps = base_steps(data, cfg);
    Rng init_rng = Rng(cfg.seed).derive("init");
    nn::init_kaiming(arch, init_rng);

    RunResult res;
    res.init = arch;
    res.total_steps = steps;
    nn::Optimizer opt{cfg.momentum, cfg.weight_decay, {}, {}};
    nn::TrainOptions o = segment_options(cfg);
    o.total_steps = steps;
    o.first_step = 0;
    o.post_step = [&res](nn::StepInfo& info) { res.lr_trace.push_back(info.lr); };
    res.net = nn::train(std::move(arch), data, opt, cfg.schedule, o);
    res.achieved_sparsity = res.net.sparsity();
    return res;
}

RunResult run_ft(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    check_target(cfg.target_sparsity);
    if (cfg.finetune_fraction < 0.0)
        throw std::invalid_argument("run_ft: negative finetune_fraction");
    const std::int64_t spe = steps_per_epoch(data, cfg);
    const std::int64_t train_steps = base_steps(data, cfg);
    const std::int64_t tune_steps = std::llround(cfg.finetune_fraction * cfg.epochs * double(spe));
    Rng init_rng = Rng(cfg.seed).derive("init");
    nn::init_kaiming(arch, init_rng);

    RunResult res;
    res.init = arch;
    res.total_steps = train_steps + tune_steps;
    nn::Optimizer opt{cfg.momentum, cfg.weight_decay, {}, {}};
    nn::TrainOptions o = segment_options(cfg);
    o.total_steps = res.total_steps;
    o.first_step = 0;
    o.clamp_schedule = true;  // fine-tune holds the schedule's final rate
    o.post_step = [&res, &cfg, train_steps](nn::StepInfo& info) {
        res.lr_trace.push_back(info.lr);
        if (info.step == train_steps - 1) {
            magnitude_mask(*info.net, cfg.target_sparsity, cfg.scope);
            res.sparsity_trace.push_back(info.net->sparsity());
        }
    };
    res.net = nn::train(std::move(arch), data, opt, cfg.schedule, o);
    res.achieved_sparsity = res.net.sparsity();
    return res;
}

RunResult run_gmp(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    check_target(cfg.target_sparsity);
    const std::int64_t steps = base_steps(data, cfg);
    GmpSchedule sched{0.0, cfg.target_sparsity, cfg.gmp_t0, cfg.gmp_n, cfg.gmp_dt};
    const std::vector<std::int64_t> events = gmp_event_steps(sched);
    if (events.front() < 1 || events.back() > steps)
        throw std::invalid_argument("run_gmp: pruning steps [" + std::to_string(events.front()) +
                                    ", " + std::to_string(events.back()) +
                                    "] fall outside the " + std::to_string(steps) +
                                    "-step run");
    Rng init_rng = Rng(cfg.seed).derive("init");
    nn::init_kaiming(arch, init_rng);

    RunResult res;
    res.init = arch;
    res.total_steps = steps;
    nn::Optimizer opt{cfg.momentum, cfg.weight_decay, {}, {}};
    nn::TrainOptions o = segment_options(cfg);
    o.total_steps = steps;
    o.first_step = 0;
    std::size_t next_event = 0;
    o.post_step = [&](nn::StepInfo& info) {
        res.lr_trace.push_back(info.lr);
        // The event at t fires once t optimizer steps have completed.
        if (next_event < events.size() && info.step + 1 == events[next_event]) {
            prune_to_fraction(*info.net, gmp_sparsity(sched, events[next_event]), cfg.scope);
            res.sparsity_trace.push_back(info.net->sparsity());
            ++next_event;
        }
    };
    res.net = nn::train(std::move(arch), data, opt, cfg.schedule, o);
    res.achieved_sparsity = res.net.sparsity();
    return res;
}

RunResult run_rewinding(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    if (cfg.method != Method::lth && cfg.method != Method::lrr)
        throw std::invalid_argument("run_rewinding: method must be lth or lrr");
    check_target(cfg.target_sparsity);
    const std::int64_t steps = base_steps(data, cfg);
    const std::int64_t shots = rewind_shots_for_target(cfg.target_sparsity, cfg.per_shot_rate);
    const std::int64_t r =
        cfg.rewind_iter >= 0 ? cfg.rewind_iter : std::max<std::int64_t>(1, std::llround(0.03 * double(steps)));
    if (r >= steps)
        throw std::invalid_argument("run_rewinding: rewind step " + std::to_string(r) +
                                    " not before the " + std::to_string(steps) + "-step run");
    Rng init_rng = Rng(cfg.seed).derive("init");
    nn::init_kaiming(arch, init_rng);

    RunResult res;
    res.init = arch;
    res.total_steps = steps + shots * (steps - r);
    nn::Optimizer opt{cfg.momentum, cfg.weight_decay, {}, {}};

    ParamCheckpoint ck;
    bool captured = r == 0;
    if (captured) ck = capture(arch, opt);

    nn::TrainOptions o = segment_options(cfg);
    o.total_steps = steps;
    o.first_step = 0;
    o.post_step = [&](nn::StepInfo& info) {
        res.lr_trace.push_back(info.lr);
        if (!captured && info.step == r - 1) {
            ck = capture(*info.net, *info.opt);
            captured = true;
        }
    };
    nn::Network net = nn::train(std::move(arch), data, opt, cfg.schedule, o);
    res.rewind_net = checkpoint_net(net, ck);

    for (std::int64_t shot = 1; shot <= shots; ++shot) {
        const double cum = rewind_achieved_sparsity(cfg.per_shot_rate, shot);
        prune_to_fraction(net, cum, cfg.scope);
        res.sparsity_trace.push_back(net.sparsity());
        apply_rewind(net, opt, ck, cfg.method);
        if (cfg.on_rewind) cfg.on_rewind(int(shot), net, opt);

        nn::TrainOptions seg = segment_options(cfg);
        seg.first_step = r;
        seg.total_steps = steps - r;
        seg.shuffle_salt = std::uint64_t(shot);
        seg.post_step = [&res](nn::StepInfo& info) { res.lr_trace.push_back(info.lr); };
        net = nn::train(std::move(net), data, opt, cfg.schedule, seg);
    }
    res.net = std::move(net);
    res.achieved_sparsity = res.net.sparsity();
    return res;
}

RunResult run_score_method(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    if (cfg.method != Method::ep && cfg.method != Method::bp)
        throw std::invalid_argument("run_score_method: method must be ep or bp");
    check_target(cfg.target_sparsity);
    const bool bp = cfg.method == Method::bp;
    const std::int64_t spe = steps_per_epoch(data, cfg);
    const std::int64_t steps = base_steps(data, cfg);

    Rng rng(cfg.seed);
    Rng init_rng = rng.derive("init");
    if (bp)
        nn::init_kaiming(arch, init_rng);
    else
        nn::init_signed_constant(arch, init_rng);
    {
        Rng sr = rng.derive("scores");
        for (std::size_t li : arch.prunable_layers()) {
            nn::Layer& l = arch.layers[li];
            l.scores = Tensor(l.weights.shape);
            for (float& s : l.scores.data) s = float(sr.uniform());
        }
    }

    RunResult res;
    res.init = arch;
    res.total_steps = steps;

    nn::Network work = std::move(arch);          // frozen weights + live scores
    nn::Network eff = bp ? work : nn::Network{};  // bp: binarized copy fed forward
    const std::vector<std::size_t> prunable = work.prunable_layers();
    std::vector<Tensor> vel_s(work.layers.size());
    for (std::size_t li : prunable) vel_s[li] = Tensor(work.layers[li].weights.shape);

    const Rng shuffle_root = Rng(cfg.seed).derive("train-shuffle").derive(std::uint64_t(0));
    const std::int64_t n = data.count();
    std::vector<std::size_t> perm(std::size_t(n), 0);
    std::int64_t perm_epoch = -1;
    std::vector<std::size_t> batch_idx(std::size_t(cfg.batch_size), 0);
    nn::TrainOptions aug_opts = segment_options(cfg);  // reuse the augment wiring

    for (std::int64_t s = 0; s < steps; ++s) {
        const std::int64_t epoch_idx = s / spe;
        const std::int64_t pos = s % spe;
        if (epoch_idx != perm_epoch) {
            for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
            Rng er = shuffle_root.derive(std::uint64_t(epoch_idx));
            er.shuffle(perm);
            perm_epoch = epoch_idx;
        }
        for (std::int64_t k = 0; k < cfg.batch_size; ++k)
            batch_idx[std::size_t(k)] = perm[std::size_t(pos * cfg.batch_size + k)];

        score_mask(work, cfg.target_sparsity, cfg.scope);
        nn::Network& fwd = bp ? eff : work;
        if (bp) {
            for (std::size_t li : prunable) {
                const nn::Layer& src = work.layers[li];
                nn::Layer& dst = eff.layers[li];
                dst.mask = src.mask;
                // alpha tracks the current mask: mean |w| over survivors.
                const float a = float(binary_gain_for_layer(src));
                for (std::size_t i = 0; i < src.weights.data.size(); ++i)
                    dst.weights.data[i] = src.weights.data[i] < 0.f ? -a : a;
            }
        }

        Tensor batch = data.gather(batch_idx);
        if (aug_opts.augment) aug_opts.augment(batch, s);
        std::vector<std::uint8_t> labels(std::size_t(cfg.batch_size));
        for (std::int64_t k = 0; k < cfg.batch_size; ++k)
            labels[std::size_t(k)] = data.labels[batch_idx[std::size_t(k)]];

        const double lr = nn::lr_at(cfg.schedule, double(s) / double(spe));
        res.lr_trace.push_back(lr);

        nn::ForwardTrace trace = nn::forward_trace(fwd, batch);
        nn::LossOut loss = nn::cross_entropy(trace.acts.back(), labels);
        if (!std::isfinite(loss.loss))
            throw std::runtime_error("run_score_method: non-finite loss at step " +
                                     std::to_string(s));
        nn::Grads g = nn::backward(fwd, trace, loss.dlogits);

        // Straight-through score update: the mask-free weight gradient times
        // the (pre-mask) effective weight, then plain momentum SGD on scores.
        for (std::size_t li : prunable) {
            nn::Layer& l = work.layers[li];
            const Tensor& base = fwd.layers[li].weights;
            for (std::size_t i = 0; i < l.scores.data.size(); ++i) {
                const double sg = double(g.w[li].data[i]) * double(base.data[i]);
                const double grad = sg + cfg.weight_decay * double(l.scores.data[i]);
                const double v = cfg.momentum * double(vel_s[li].data[i]) + grad;
                vel_s[li].data[i] = float(v);
                l.scores.data[i] = float(double(l.scores.data[i]) - lr * v);
            }
        }
    }

    score_mask(work, cfg.target_sparsity, cfg.scope);
    for (std::size_t li : prunable)
        if (!bit_equal(work.layers[li].weights, res.init.layers[li].weights))
            throw std::runtime_error("run_score_method: frozen weights changed");
    if (bp) {
        // Deployable form: every position holds +-alpha; the mask supplies
        // the zeros, exactly like the signed-constant layers.
        for (std::size_t li : prunable) {
            nn::Layer& l = work.layers[li];
            const double a = binary_gain_for_layer(l);
            const float af = float(a);
            for (float& w : l.weights.data) w = w < 0.f ? -af : af;
            l.precision = nn::Precision::binary1;
            l.binary_gain = a;
        }
    }
    res.net = std::move(work);
    res.achieved_sparsity = res.net.sparsity();
    return res;
}

RunResult run_method(nn::Network arch, const Dataset& data, const RunConfig& cfg) {
    switch (cfg.method) {
        case Method::ft:
            return run_ft(std::move(arch), data, cfg);
        case Method::gmp:
            return run_gmp(std::move(arch), data, cfg);
        case Method::lth:
        case Method::lrr:
            return run_rewinding(std::move(arch), data, cfg);
        case Method::ep:
        case Method::bp:
            return run_score_method(std::move(arch), data, cfg);
    }
    throw std::invalid_argument("run_method: unknown method");
}

}  // namespace cards::prune
