#include "cards/deck.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <fstream>
#include <set>
#include <stdexcept>
#include <thread>
#include <utility>

#include "cards/checkpoint.hpp"
#include "json.hpp"

namespace cards::deck {

namespace {

std::int64_t layer_nonzero(const nn::Layer& l) {
    if (l.mask.empty()) return l.weights.numel();
    std::int64_t nz = 0;
    for (float m : l.mask.data) nz += m != 0.f;
    return nz;
}

std::string join_path(const std::string& base, const std::string& p) {
    if (base.empty() || p.empty() || p.front() == '/') return p;
    if (base.back() == '/') return base + p;
    return base + "/" + p;
}

/// Every card's softmax output.  Forwards may fan out over workers; outs[k]
/// lands at its card's slot, so the combination order never changes.
std::vector<Tensor> card_outputs(const std::vector<const nn::Network*>& nets,
                                 const Tensor& batch, int workers) {
    std::vector<Tensor> outs(nets.size());
    auto run = [&](std::size_t k) { outs[k] = nn::softmax_rows(nn::forward(*nets[k], batch)); };
    if (workers <= 1 || nets.size() <= 1) {
        for (std::size_t k = 0; k < nets.size(); ++k) run(k);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w)
            pool.emplace_back([&] {
                for (std::size_t k; (k = next.fetch_add(1)) < nets.size();) run(k);
            });
        for (auto& t : pool) t.join();
    }
    return outs;
}

Tensor mean_outputs(const std::vector<Tensor>& outs) {
    const Tensor& first = outs.front();
    std::vector<double> acc(first.data.size(), 0.0);
    for (const Tensor& t : outs)
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += double(t.data[i]);
    Tensor out(first.shape);
    for (std::size_t i = 0; i < acc.size(); ++i)
        out.data[i] = float(acc[i] / double(outs.size()));
    return out;
}

}  // namespace

std::int64_t memory_bits(const nn::Network& net) {
    std::int64_t bits = 0;
    for (const auto& l : net.layers) {
        if (!l.has_params()) continue;
        const std::int64_t per_weight = l.precision == nn::Precision::binary1 ? 1 : 32;
        bits += layer_nonzero(l) * per_weight;
    }
    return bits;
}

Card make_card(nn::Network net, std::string augmentation_id, Compression compression) {
    Card card;
    card.network = std::move(net);
    card.augmentation_id = std::move(augmentation_id);
    card.compression = std::move(compression);
    card.memory_bits = memory_bits(card.network);
    return card;
}

std::int64_t Deck::memory_bits() const {
    std::int64_t bits = 0;
    for (const Card& c : cards) bits += c.memory_bits;
    return bits;
}

Deck make_deck(std::vector<Card> cards, std::vector<gate::SignatureIndex> gate) {
    Deck d;
    d.cards = std::move(cards);
    d.gate = std::move(gate);
    for (std::size_t k = 0; k < d.cards.size(); ++k)
        d.groups[d.cards[k].augmentation_id].push_back(k);
    if (!d.gate.empty()) {
        std::set<std::string> indexed;
        for (const auto& g : d.gate) indexed.insert(g.augmentation_id);
        for (const auto& [aug, members] : d.groups)
            if (indexed.count(aug) == 0)
                throw std::invalid_argument("make_deck: no gate index for augmentation '" + aug +
                                            "'");
    }
    return d;
}

Tensor predict_agnostic(const Deck& deck, const Tensor& batch, int workers) {
    if (deck.cards.empty()) throw std::invalid_argument("predict_agnostic: empty deck");
    std::vector<const nn::Network*> nets;
    nets.reserve(deck.cards.size());
    for (const Card& c : deck.cards) nets.push_back(&c.network);
    return mean_outputs(card_outputs(nets, batch, workers));
}

AdaptiveResult predict_adaptive(const Deck& deck, const Tensor& batch, int workers) {
    if (deck.cards.empty()) throw std::invalid_argument("predict_adaptive: empty deck");
    if (deck.gate.empty())
        throw std::invalid_argument("predict_adaptive: deck has no gate indexes");
    std::vector<const gate::SignatureIndex*> indexes;
    indexes.reserve(deck.gate.size());
    for (const auto& g : deck.gate) indexes.push_back(&g);

    AdaptiveResult res;
    res.decision = gate::select(indexes, batch);
    std::vector<std::size_t> picked;
    for (const std::string& aug : res.decision.selected) {
        const auto it = deck.groups.find(aug);
        if (it == deck.groups.end() || it->second.empty())
            throw std::runtime_error("predict_adaptive: no cards for selected augmentation '" +
                                     aug + "'");
        picked.insert(picked.end(), it->second.begin(), it->second.end());
    }
    std::sort(picked.begin(), picked.end());
    picked.erase(std::unique(picked.begin(), picked.end()), picked.end());

    std::vector<const nn::Network*> nets;
    nets.reserve(picked.size());
    for (std::size_t k : picked) nets.push_back(&deck.cards[k].network);
    res.probs = mean_outputs(card_outputs(nets, batch, workers));
    res.forward_passes = std::int64_t(nets.size());
    return res;
}

namespace {

double dataset_accuracy(const Deck& deck, const Dataset& data, DeckMode mode,
                        std::int64_t batch_size, int workers, DeckReport& report) {
    const std::int64_t n = data.count();
    if (n < 1) throw std::invalid_argument("evaluate_deck: empty dataset");
    std::int64_t correct = 0;
    for (std::int64_t lo = 0; lo < n; lo += batch_size) {
        const std::int64_t hi = std::min(n, lo + batch_size);
        Tensor batch({hi - lo, data.channels(), data.d1(), data.d2()});
        std::copy(data.image_ptr(lo), data.image_ptr(lo) + batch.numel(), batch.data.begin());
        Tensor probs;
        if (mode == DeckMode::agnostic) {
            probs = predict_agnostic(deck, batch, workers);
            report.forward_passes += std::int64_t(deck.cards.size());
        } else {
            AdaptiveResult r = predict_adaptive(deck, batch, workers);
            probs = std::move(r.probs);
            report.forward_passes += r.forward_passes;
            for (const std::string& aug : r.decision.selected) report.gate_histogram[aug] += 1;
        }
        for (std::int64_t row = 0; row < hi - lo; ++row)
            correct += nn::argmax_row(probs, row) == std::int64_t(data.labels[std::size_t(lo + row)]);
    }
    return double(correct) / double(n);
}

}  // namespace

DeckReport evaluate_deck(const Deck& deck, const Dataset& clean,
                         const std::vector<CorruptedSet>& suite, DeckMode mode,
                         std::int64_t batch_size, int workers) {
    if (batch_size < 1) throw std::invalid_argument("evaluate_deck: batch_size must be positive");
    DeckReport report;
    report.memory_bits = deck.memory_bits();
    report.clean_accuracy = dataset_accuracy(deck, clean, mode, batch_size, workers, report);
    double sum = 0.0;
    for (const CorruptedSet& c : suite) {
        const double acc = dataset_accuracy(deck, c.data, mode, batch_size, workers, report);
        report.corrupted.emplace_back(c.corruption, c.severity, acc);
        sum += acc;
    }
    if (!suite.empty()) report.mean_corrupted_accuracy = sum / double(suite.size());
    return report;
}

void save_deck_report_csv(const DeckReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    char line[256];
    out << "metric,corruption,severity,value\n";
    std::snprintf(line, sizeof line, "clean_accuracy,,,%.9g\n", report.clean_accuracy);
    out << line;
    for (const auto& [name, severity, acc] : report.corrupted) {
        std::snprintf(line, sizeof line, "corrupted_accuracy,%s,%d,%.9g\n", name.c_str(),
                      severity, acc);
        out << line;
    }
    std::snprintf(line, sizeof line, "mean_corrupted_accuracy,,,%.9g\n",
                  report.mean_corrupted_accuracy);
    out << line;
    std::snprintf(line, sizeof line, "memory_bits,,,%lld\n",
                  static_cast<long long>(report.memory_bits));
    out << line;
    std::snprintf(line, sizeof line, "forward_passes,,,%lld\n",
                  static_cast<long long>(report.forward_passes));
    out << line;
    for (const auto& [aug, count] : report.gate_histogram) {
        std::snprintf(line, sizeof line, "gate_selections,%s,,%lld\n", aug.c_str(),
                      static_cast<long long>(count));
        out << line;
    }
    if (!out) throw std::runtime_error("short write to " + path);
}

std::string manifest_json(const DeckManifest& m) {
    nlohmann::json j;
    j["mode"] = m.mode;
    j["cards"] = nlohmann::json::array();
    for (const auto& c : m.cards)
        j["cards"].push_back({{"checkpoint", c.checkpoint},
                              {"augmentation_id", c.augmentation_id},
                              {"method", c.method},
                              {"scope", c.scope}});
    j["gate_indexes"] = m.gate_indexes;
    return j.dump(2) + "\n";
}

DeckManifest parse_manifest(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error("deck manifest: malformed JSON");
    DeckManifest m;
    m.mode = j.value("mode", "agnostic");
    if (m.mode != "agnostic" && m.mode != "adaptive")
        throw std::runtime_error("deck manifest: unknown mode '" + m.mode + "'");
    for (const auto& c : j.value("cards", nlohmann::json::array())) {
        if (!c.contains("checkpoint") || !c.contains("augmentation_id"))
            throw std::runtime_error("deck manifest: card needs checkpoint and augmentation_id");
        ManifestCard mc;
        mc.checkpoint = c["checkpoint"].get<std::string>();
        mc.augmentation_id = c["augmentation_id"].get<std::string>();
        mc.method = c.value("method", "dense");
        mc.scope = c.value("scope", "global");
        m.cards.push_back(std::move(mc));
    }
    if (j.contains("gate_indexes"))
        m.gate_indexes = j["gate_indexes"].get<std::map<std::string, std::string>>();
    return m;
}

void save_manifest(const DeckManifest& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << manifest_json(m);
    if (!out) throw std::runtime_error("short write to " + path);
}

DeckManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_manifest(text);
}

Deck load_deck(const DeckManifest& m, const std::string& base_dir) {
    std::vector<Card> cards;
    cards.reserve(m.cards.size());
    for (const auto& mc : m.cards) {
        nn::Network net = nn::load_checkpoint(join_path(base_dir, mc.checkpoint));
        Compression comp{mc.method, mc.scope, net.sparsity()};
        cards.push_back(make_card(std::move(net), mc.augmentation_id, std::move(comp)));
    }
    std::vector<gate::SignatureIndex> gates;
    gates.reserve(m.gate_indexes.size());
    for (const auto& [aug, rel] : m.gate_indexes) {
        gate::SignatureIndex g = gate::load_index(join_path(base_dir, rel));
        if (g.augmentation_id != aug)
            throw std::runtime_error("load_deck: index '" + rel + "' is for augmentation '" +
                                     g.augmentation_id + "', manifest says '" + aug + "'");
        gates.push_back(std::move(g));
    }
    return make_deck(std::move(cards), std::move(gates));
}

}  // namespace cards::deck
