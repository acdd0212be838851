#include "cards/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "cards/augment.hpp"
#include "cards/checkpoint.hpp"
#include "cards/corrupt.hpp"
#include "cards/deck.hpp"
#include "cards/fourier.hpp"
#include "cards/gate.hpp"
#include "cards/prune_runs.hpp"
#include "cards/report.hpp"
#include "cards/synth.hpp"

namespace fs = std::filesystem;

namespace cards::harness {

namespace {

struct CellSpec {
    std::string arch;
    std::string method;  // "dense" or a prune::Method name
    std::string scope;
    double sparsity = 0.0;  // nominal; 0 for dense
    std::string aug;
    std::uint64_t seed = 0;
    std::string name;
};

struct CorruptedEval {
    std::string kind;
    int severity = 0;
    Dataset data;
};

nn::Network build_arch(const std::string& name, std::int64_t channels, std::int64_t d1,
                       std::int64_t d2, std::int64_t classes) {
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= name.size()) {
        const std::size_t dash = name.find('-', pos);
        parts.push_back(name.substr(pos, dash == std::string::npos ? std::string::npos
                                                                   : dash - pos));
        if (dash == std::string::npos) break;
        pos = dash + 1;
    }
    const auto dims = [&](std::size_t from) {
        std::vector<std::int64_t> out;
        for (std::size_t i = from; i < parts.size(); ++i) {
            try {
                std::size_t used = 0;
                out.push_back(std::stoll(parts[i], &used));
                if (used != parts[i].size() || out.back() < 1)
                    throw std::invalid_argument("");
            } catch (const std::exception&) {
                throw std::invalid_argument("architecture '" + name + "' has a bad width '" +
                                            parts[i] + "'");
            }
        }
        return out;
    };
    if (parts.front() == "mlp" && parts.size() >= 2)
        return nn::make_mlp(channels * d1 * d2, dims(1), classes);
    if (parts.front() == "conv" && parts.size() == 3) {
        const std::vector<std::int64_t> c = dims(1);
        return nn::make_conv2(channels, c[0], c[1], classes);
    }
    throw std::invalid_argument("unknown architecture '" + name + "'");
}

nn::Schedule make_schedule(const std::string& kind, double lr, double epochs) {
    if (kind == "constant") return nn::constant_schedule(lr, epochs);
    if (kind == "cosine") return nn::cosine_schedule(lr, epochs);
    if (kind == "step160") return nn::step160_schedule(lr, epochs);
    throw std::invalid_argument("unknown schedule '" + kind + "'");
}

AugmentationSpec augmentation_spec(const std::string& name) {
    AugmentationSpec spec;
    spec.kind = augment_from_string(name);
    return spec;
}

std::string sparsity_tag(double s) {
    std::string t = "s" + format_value(s);
    for (char& c : t)
        if (c == '.') c = 'p';
    return t;
}

std::string corr_column(const std::string& kind, int severity) {
    return "corr_" + kind + "_s" + std::to_string(severity);
}

/// The per-cell metric columns; results.csv appends the two rel_ columns.
std::vector<std::string> cell_columns(const std::vector<CorruptedEval>& suite) {
    std::vector<std::string> cols = {"arch",          "method", "scope",
                                     "sparsity",      "augmentation", "seed",
                                     "achieved_sparsity", "clean_acc"};
    for (const auto& c : suite) cols.push_back(corr_column(c.kind, c.severity));
    cols.push_back("mean_corrupted_acc");
    cols.push_back("memory_bits");
    return cols;
}

struct Plan {
    std::int64_t classes, count, test_count, d1, d2, channels;
    std::uint64_t data_seed, corrupt_seed;
    double epochs, lr, momentum, weight_decay, finetune_fraction;
    std::string schedule;
    std::int64_t batch, rewind_iteration;
    std::int64_t gmp_t0, gmp_n, gmp_dt;  // -1 = span the run automatically
    std::vector<std::string> archs, methods, augs;
    std::vector<double> sparsities;
    std::vector<std::int64_t> seeds;
    std::string scope;
    std::vector<std::pair<std::string, int>> corruptions;  // (kind, severity)
    std::int64_t gate_points;
    bool deck_enable;
    std::vector<std::string> deck_augs;
    bool heatmap_enable;
    double heatmap_eps;
    std::int64_t heatmap_count;
};

Plan read_plan(const Config& cfg) {
    Plan p;
    p.classes = cfg.get_int("data.classes", 4);
    p.count = cfg.get_int("data.count", 480);
    p.test_count = cfg.get_int("data.test_count", 160);
    p.d1 = cfg.get_int("data.d1", 12);
    p.d2 = cfg.get_int("data.d2", 12);
    p.channels = cfg.get_int("data.channels", 1);
    p.data_seed = std::uint64_t(cfg.get_int("data.seed", 1));
    p.corrupt_seed = std::uint64_t(cfg.get_int("corrupt.seed", 7));
    p.epochs = cfg.get_double("train.epochs", 4.0);
    p.lr = cfg.get_double("train.lr", 0.05);
    p.momentum = cfg.get_double("train.momentum", 0.9);
    p.weight_decay = cfg.get_double("train.weight_decay", 1e-4);
    p.finetune_fraction = cfg.get_double("train.finetune_fraction", 0.25);
    p.schedule = cfg.get("train.schedule", "step160");
    p.batch = cfg.get_int("train.batch", 32);
    p.rewind_iteration = cfg.get_int("train.rewind_iteration", -1);
    p.gmp_t0 = cfg.get_int("train.gmp_t0", -1);
    p.gmp_n = cfg.get_int("train.gmp_n", -1);
    p.gmp_dt = cfg.get_int("train.gmp_dt", -1);

    p.archs = cfg.get_list("grid.architectures");
    if (p.archs.empty() && cfg.has("grid.architectures") == false) p.archs = {"mlp-16"};
    p.methods = cfg.get_list("grid.methods");
    if (p.methods.empty() && !cfg.has("grid.methods")) p.methods = {"dense", "ft"};
    p.augs = cfg.get_list("grid.augmentations");
    if (p.augs.empty() && !cfg.has("grid.augmentations")) p.augs = {"clean"};
    p.sparsities = cfg.get_double_list("grid.sparsities");
    if (p.sparsities.empty()) p.sparsities = {0.9};
    p.seeds = cfg.get_int_list("grid.seeds");
    if (p.seeds.empty() && !cfg.has("grid.seeds")) p.seeds = {1};
    p.scope = cfg.get("grid.scope", "global");

    std::vector<std::string> kinds = cfg.get_list("corrupt.kinds");
    if (kinds.empty() && !cfg.has("corrupt.kinds"))
        for (CorruptionKind k : corruption_suite()) kinds.push_back(to_string(k));
    std::vector<std::int64_t> severities = cfg.get_int_list("corrupt.severities");
    if (severities.empty() && !cfg.has("corrupt.severities")) severities = {1, 3, 5};
    for (const std::string& k : kinds)
        for (std::int64_t s : severities) p.corruptions.emplace_back(k, int(s));

    p.gate_points = cfg.get_int("gate.points", 32);
    p.deck_enable = cfg.get_bool("deck.enable", false);
    p.deck_augs = cfg.get_list("deck.augmentations");
    if (p.deck_augs.empty()) {
        for (const std::string& a : p.augs)
            if (a != "clean") p.deck_augs.push_back(a);
    }
    p.heatmap_enable = cfg.get_bool("heatmap.enable", false);
    p.heatmap_eps = cfg.get_double("heatmap.eps", 0.5);
    p.heatmap_count = cfg.get_int("heatmap.count", 32);
    return p;
}

prune::RunConfig cell_run_config(const Plan& p, const CellSpec& cell, const Dataset& train,
                                 std::int64_t total_steps) {
    prune::RunConfig rc;
    if (cell.method != "dense") rc.method = prune::method_from_string(cell.method);
    rc.scope = prune::scope_from_string(cell.scope);
    rc.target_sparsity = cell.sparsity;
    rc.epochs = p.epochs;
    rc.batch_size = p.batch;
    rc.schedule = make_schedule(p.schedule, p.lr, p.epochs);
    rc.momentum = p.momentum;
    rc.weight_decay = p.weight_decay;
    rc.seed = cell.seed;
    rc.finetune_fraction = p.finetune_fraction;
    rc.rewind_iter = p.rewind_iteration;
    if (p.gmp_t0 >= 0 || p.gmp_n >= 0 || p.gmp_dt >= 0) {
        rc.gmp_t0 = p.gmp_t0 >= 0 ? p.gmp_t0 : 5;
        rc.gmp_n = p.gmp_n >= 0 ? p.gmp_n : 105;
        rc.gmp_dt = p.gmp_dt >= 0 ? p.gmp_dt : 1;
    } else {
        // Span the run: first event after a tenth of training, one per step.
        rc.gmp_t0 = std::max<std::int64_t>(1, total_steps / 10);
        rc.gmp_n = std::max<std::int64_t>(1, total_steps - rc.gmp_t0);
        rc.gmp_dt = 1;
    }
    if (cell.aug != "clean") {
        const AugmentationSpec spec = augmentation_spec(cell.aug);
        const float lo = train.value_min, hi = train.value_max;
        rc.augment = [spec, lo, hi](float* px, std::int64_t c, std::int64_t a, std::int64_t b,
                                    Rng& rng) { augment(px, c, a, b, spec, lo, hi, rng); };
    }
    return rc;
}

std::string run_cell(const Plan& p, const CellSpec& cell, const Dataset& train,
                     const Dataset& test, const std::vector<CorruptedEval>& suite,
                     const std::string& cell_dir) {
    nn::Network arch = build_arch(cell.arch, p.channels, p.d1, p.d2, p.classes);
    const std::int64_t spe = train.count() / p.batch;
    if (spe < 1) throw std::invalid_argument("batch size exceeds the training set");
    const prune::RunConfig rc = cell_run_config(p, cell, train, std::llround(p.epochs * double(spe)));
    const prune::RunResult res = cell.method == "dense"
                                     ? prune::run_dense(std::move(arch), train, rc)
                                     : prune::run_method(std::move(arch), train, rc);

    fs::create_directories(cell_dir);
    nn::save_checkpoint(res.net, cell_dir + "/card.ckpt");

    CsvTable row;
    row.columns = cell_columns(suite);
    std::vector<std::string> vals = {cell.arch,
                                     cell.method,
                                     cell.scope,
                                     format_value(cell.sparsity),
                                     cell.aug,
                                     format_value(std::int64_t(cell.seed)),
                                     format_value(res.achieved_sparsity),
                                     format_value(nn::evaluate(res.net, test))};
    double mean_corr = 0.0;
    for (const auto& c : suite) {
        const double acc = nn::evaluate(res.net, c.data);
        vals.push_back(format_value(acc));
        mean_corr += acc;
    }
    vals.push_back(format_value(suite.empty() ? 0.0 : mean_corr / double(suite.size())));
    vals.push_back(format_value(deck::memory_bits(res.net)));
    row.add_row(std::move(vals));
    save_csv(row, cell_dir + "/result.csv");
    return cell_dir + "/result.csv";
}

/// A cell is complete when its checkpoint exists and its result row parses
/// under the current column set (config drift forces a re-run).
bool cell_complete(const std::string& cell_dir, const std::vector<std::string>& columns) {
    if (!fs::exists(cell_dir + "/card.ckpt") || !fs::exists(cell_dir + "/result.csv"))
        return false;
    try {
        const CsvTable t = load_csv(cell_dir + "/result.csv");
        return t.columns == columns && t.rows.size() == 1;
    } catch (const std::exception&) {
        return false;
    }
}

Dataset head_subset(const Dataset& data, std::int64_t count) {
    const std::int64_t n = std::min(count, data.count());
    Dataset out;
    out.images = Tensor({n, data.channels(), data.d1(), data.d2()});
    const std::int64_t stride = data.channels() * data.d1() * data.d2();
    std::copy(data.image_ptr(0), data.image_ptr(0) + n * stride, out.images.data.begin());
    out.labels.assign(data.labels.begin(), data.labels.begin() + n);
    out.value_min = data.value_min;
    out.value_max = data.value_max;
    return out;
}

}  // namespace

ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir) {
    const Plan p = read_plan(cfg);
    ExperimentResult result;
    result.out_dir = out_dir;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir + "/dataset");
    fs::create_directories(out_dir + "/cells");

    // Data: one generated pool, one split, shared by every cell.
    const Dataset full =
        make_synthetic(p.data_seed, p.classes, p.count, p.d1, p.d2, p.channels);
    const Split split = split_dataset(full, p.test_count, p.classes, p.data_seed);
    write_dataset(split.train, p.classes, p.data_seed, out_dir + "/dataset/train");
    write_dataset(split.test, p.classes, p.data_seed, out_dir + "/dataset/test");

    std::vector<CorruptedEval> suite;
    for (const auto& [kind, severity] : p.corruptions) {
        CorruptedEval c;
        c.kind = kind;
        c.severity = severity;
        c.data = corrupt_dataset(split.test, {corruption_from_string(kind), severity},
                                 p.corrupt_seed);
        suite.push_back(std::move(c));
    }
    const std::vector<std::string> columns = cell_columns(suite);

    // Cell enumeration, in config list order.
    std::vector<CellSpec> cells;
    for (const std::string& arch : p.archs)
        for (const std::string& method : p.methods) {
            const std::vector<double> sps =
                method == "dense" ? std::vector<double>{0.0} : p.sparsities;
            for (double sp : sps)
                for (const std::string& aug : p.augs)
                    for (std::int64_t seed : p.seeds) {
                        CellSpec c;
                        c.arch = arch;
                        c.method = method;
                        c.scope = p.scope;
                        c.sparsity = sp;
                        c.aug = aug;
                        c.seed = std::uint64_t(seed);
                        c.name = arch + "_" + method + "_" + p.scope + "_" + sparsity_tag(sp) +
                                 "_" + aug + "_seed" + std::to_string(seed);
                        cells.push_back(std::move(c));
                    }
        }
    result.total_cells = int(cells.size());

    std::vector<std::pair<std::string, std::string>> failures;  // (cell, error)
    std::vector<const CellSpec*> done;
    for (const CellSpec& cell : cells) {
        const std::string cell_dir = out_dir + "/cells/" + cell.name;
        try {
            if (!cell_complete(cell_dir, columns)) {
                run_cell(p, cell, split.train, split.test, suite, cell_dir);
                result.trained_cells += 1;
            }
            if (p.heatmap_enable && !fs::exists(cell_dir + "/heatmap.csv")) {
                const nn::Network net = nn::load_checkpoint(cell_dir + "/card.ckpt");
                const spectral::Heatmap h =
                    spectral::heatmap(net, head_subset(split.test, p.heatmap_count),
                                     p.heatmap_eps, cell.seed, 1, cell.name);
                spectral::save_heatmap_csv(h, cell_dir + "/heatmap.csv");
                spectral::save_heatmap_pgm(h, cell_dir + "/heatmap.pgm");
            }
            done.push_back(&cell);
        } catch (const std::exception& e) {
            failures.emplace_back(cell.name, e.what());
        }
    }
    result.failed_cells = int(failures.size());

    // Assembly always re-reads the per-cell files, so a fresh run and a
    // resumed run produce the same bytes.
    struct Row {
        const CellSpec* cell;
        std::vector<std::string> vals;
    };
    std::vector<Row> rows;
    for (const CellSpec* cell : done) {
        const CsvTable t = load_csv(out_dir + "/cells/" + cell->name + "/result.csv");
        rows.push_back({cell, t.rows.front()});
    }

    const std::size_t clean_col = 7;                   // clean_acc index in `columns`
    const std::size_t mean_col = columns.size() - 2;   // mean_corrupted_acc
    std::map<std::pair<std::string, std::string>, std::pair<double, double>> baseline;
    {
        std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> acc;
        for (const Row& r : rows)
            if (r.cell->method == "dense")
                acc[{r.cell->arch, r.cell->aug}].emplace_back(std::stod(r.vals[clean_col]),
                                                              std::stod(r.vals[mean_col]));
        for (const auto& [key, v] : acc) {
            double c = 0.0, m = 0.0;
            for (const auto& [cv, mv] : v) {
                c += cv;
                m += mv;
            }
            baseline[key] = {c / double(v.size()), m / double(v.size())};
        }
    }

    CsvTable results;
    results.columns = columns;
    results.columns.push_back("rel_clean_pp");
    results.columns.push_back("rel_corrupted_pp");
    for (Row& r : rows) {
        const auto it = baseline.find({r.cell->arch, r.cell->aug});
        if (it == baseline.end()) {
            r.vals.push_back("");
            r.vals.push_back("");
        } else {
            r.vals.push_back(
                format_value((std::stod(r.vals[clean_col]) - it->second.first) * 100.0));
            r.vals.push_back(
                format_value((std::stod(r.vals[mean_col]) - it->second.second) * 100.0));
        }
        results.add_row(std::move(r.vals));
    }
    save_csv(results, out_dir + "/results.csv");

    // Decks: one card per deck augmentation, per (arch, method, sparsity, seed).
    if (p.deck_enable && !p.deck_augs.empty()) {
        fs::create_directories(out_dir + "/gates");
        std::map<std::pair<std::string, std::int64_t>, gate::SignatureIndex> gates;
        const auto gate_for = [&](const std::string& aug, std::int64_t seed) {
            const auto key = std::make_pair(aug, seed);
            auto it = gates.find(key);
            if (it != gates.end()) return it->second;
            const std::string path =
                out_dir + "/gates/" + aug + "_seed" + std::to_string(seed) + ".bin";
            gate::SignatureIndex index;
            if (fs::exists(path)) {
                index = gate::load_index(path);
            } else {
                const Tensor pool =
                    augment_pool(split.train, augmentation_spec(aug), std::uint64_t(seed));
                index = gate::build_index(pool, aug, std::min<std::int64_t>(p.gate_points,
                                                                            split.train.count()),
                                          std::uint64_t(seed), "train-pool");
                gate::save_index(index, path);
            }
            return gates.emplace(key, std::move(index)).first->second;
        };

        CsvTable decks;
        decks.columns = {"arch", "method", "scope", "sparsity", "seed", "mode", "clean_acc"};
        for (const auto& c : suite) decks.columns.push_back(corr_column(c.kind, c.severity));
        decks.columns.push_back("mean_corrupted_acc");
        decks.columns.push_back("memory_bits");
        decks.columns.push_back("forward_passes");

        std::vector<deck::CorruptedSet> deck_suite;
        for (const auto& c : suite) deck_suite.push_back({c.kind, c.severity, c.data});

        for (const std::string& arch : p.archs)
            for (const std::string& method : p.methods) {
                const std::vector<double> sps =
                    method == "dense" ? std::vector<double>{0.0} : p.sparsities;
                for (double sp : sps)
                    for (std::int64_t seed : p.seeds) {
                        std::vector<deck::Card> cards;
                        bool ok = true;
                        for (const std::string& aug : p.deck_augs) {
                            const std::string name = arch + "_" + method + "_" + p.scope + "_" +
                                                     sparsity_tag(sp) + "_" + aug + "_seed" +
                                                     std::to_string(seed);
                            const std::string ckpt = out_dir + "/cells/" + name + "/card.ckpt";
                            if (!cell_complete(out_dir + "/cells/" + name, columns)) {
                                ok = false;
                                break;
                            }
                            nn::Network net = nn::load_checkpoint(ckpt);
                            deck::Compression comp{method, p.scope, net.sparsity()};
                            cards.push_back(deck::make_card(std::move(net), aug, comp));
                        }
                        if (!ok || cards.empty()) continue;
                        std::vector<gate::SignatureIndex> indexes;
                        for (const std::string& aug : p.deck_augs)
                            indexes.push_back(gate_for(aug, seed));
                        const deck::Deck dk = deck::make_deck(std::move(cards), std::move(indexes));
                        for (deck::DeckMode mode :
                             {deck::DeckMode::agnostic, deck::DeckMode::adaptive}) {
                            const deck::DeckReport rep =
                                deck::evaluate_deck(dk, split.test, deck_suite, mode, p.batch);
                            std::vector<std::string> vals = {
                                arch,
                                method,
                                p.scope,
                                format_value(sp),
                                format_value(seed),
                                mode == deck::DeckMode::agnostic ? "agnostic" : "adaptive",
                                format_value(rep.clean_accuracy)};
                            for (const auto& [kind, severity, acc] : rep.corrupted)
                                vals.push_back(format_value(acc));
                            vals.push_back(format_value(rep.mean_corrupted_accuracy));
                            vals.push_back(format_value(rep.memory_bits));
                            vals.push_back(format_value(rep.forward_passes));
                            decks.add_row(std::move(vals));
                            result.deck_rows += 1;
                        }
                    }
            }
        save_csv(decks, out_dir + "/decks.csv");
    }

    if (failures.empty()) {
        fs::remove(out_dir + "/failures.csv");
    } else {
        CsvTable f;
        f.columns = {"cell", "error"};
        for (const auto& [name, what] : failures) f.add_row({name, what});
        save_csv(f, out_dir + "/failures.csv");
    }
    return result;
}

}  // namespace cards::harness
