#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cards/data.hpp"
#include "cards/gate.hpp"
#include "cards/net.hpp"
#include "cards/tensor.hpp"

namespace cards::deck {

struct Compression {
    std::string method = "dense";  // dense|ft|gmp|lth|lrr|ep|bp
    std::string scope = "global";  // global|layerwise
    double achieved_sparsity = 0.0;
};

/// One compressed network bound to the augmentation it was trained under.
struct Card {
    nn::Network network;
    std::string augmentation_id;
    Compression compression;
    std::int64_t memory_bits = 0;
};

/// Weight storage cost: nonzero weights x precision bits per parametric
/// layer (binary1 = 1 bit, full32 = 32).  Biases are negligible and omitted.
std::int64_t memory_bits(const nn::Network& net);

/// Fills in memory_bits from the network.
Card make_card(nn::Network net, std::string augmentation_id, Compression compression);

struct Deck {
    std::vector<Card> cards;
    // augmentation_id -> card indices, in card order; the groups partition
    // the deck.
    std::map<std::string, std::vector<std::size_t>> groups;
    std::vector<gate::SignatureIndex> gate;  // one per augmentation in adaptive use

    std::int64_t memory_bits() const;
};

/// Groups the cards by augmentation id.  When gate indexes are supplied,
/// every represented augmentation must have one.
Deck make_deck(std::vector<Card> cards, std::vector<gate::SignatureIndex> gate = {});

/// Mean of every card's softmax output.  Rows are row-stochastic.
/// Per-card forwards fan out over `workers`; the combination is always in
/// card-index order, so the result does not depend on the worker count.
Tensor predict_agnostic(const Deck& deck, const Tensor& batch, int workers = 1);

struct AdaptiveResult {
    Tensor probs;
    gate::GateDecision decision;
    std::int64_t forward_passes = 0;  // == number of cards evaluated
};

/// Routes the batch once through the gate, then averages only the cards of
/// the selected augmentation group (union of the tie set).  Cards outside
/// the selection are not evaluated.
AdaptiveResult predict_adaptive(const Deck& deck, const Tensor& batch, int workers = 1);

enum class DeckMode { agnostic, adaptive };

struct CorruptedSet {
    std::string corruption;
    int severity = 0;
    Dataset data;
};

struct DeckReport {
    double clean_accuracy = 0.0;
    std::vector<std::tuple<std::string, int, double>> corrupted;  // (name, severity, acc)
    double mean_corrupted_accuracy = 0.0;
    std::int64_t memory_bits = 0;
    std::int64_t forward_passes = 0;
    std::map<std::string, std::int64_t> gate_histogram;  // selections per augmentation
};

/// Accuracy on the clean set and each corrupted set, batched prediction in
/// the given mode.  Adaptive mode also tallies the gating decisions.
DeckReport evaluate_deck(const Deck& deck, const Dataset& clean,
                         const std::vector<CorruptedSet>& suite, DeckMode mode,
                         std::int64_t batch_size = 32, int workers = 1);

void save_deck_report_csv(const DeckReport& report, const std::string& path);

// ---- manifest --------------------------------------------------------------

struct ManifestCard {
    std::string checkpoint;  // network checkpoint path
    std::string augmentation_id;
    std::string method = "dense";
    std::string scope = "global";
};

struct DeckManifest {
    std::string mode = "agnostic";  // agnostic|adaptive
    std::vector<ManifestCard> cards;
    std::map<std::string, std::string> gate_indexes;  // augmentation_id -> index path
};

std::string manifest_json(const DeckManifest& m);
DeckManifest parse_manifest(const std::string& text);
void save_manifest(const DeckManifest& m, const std::string& path);
DeckManifest load_manifest(const std::string& path);

/// Loads every checkpoint and gate index named by the manifest.  Relative
/// paths resolve against base_dir when given.  achieved_sparsity is read off
/// the loaded networks.
Deck load_deck(const DeckManifest& m, const std::string& base_dir = "");

}  // namespace cards::deck
