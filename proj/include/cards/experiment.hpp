#pragma once

#include <cstdint>
#include <string>

#include "cards/config.hpp"

namespace cards::harness {

struct ExperimentResult {
    std::string out_dir;
    int total_cells = 0;
    int trained_cells = 0;  // cells run this invocation (the rest resumed)
    int failed_cells = 0;
    int deck_rows = 0;
};

/// Runs the grid described by the config: generates the dataset, trains and
/// compresses every (architecture, method, sparsity, augmentation, seed)
/// cell, evaluates against the corruption suite, optionally builds gate
/// indexes and evaluates decks, and assembles results.csv / decks.csv (plus
/// failures.csv when cells fail — the caller turns failed_cells > 0 into a
/// nonzero exit).  Completed cells are detected by their on-disk artifacts
/// and skipped, so an interrupted run resumes; a repeated run rewrites
/// byte-identical reports.
///
/// Config keys (defaults in parentheses):
///   data.classes (4), data.count (480), data.test_count (160), data.d1 (12),
///     data.d2 (12), data.channels (1), data.seed (1)
///   train.epochs (4), train.batch (32), train.lr (0.05),
///     train.schedule (step160; constant|cosine|step160),
///     train.momentum (0.9), train.weight_decay (1e-4),
///     train.finetune_fraction (0.25), train.rewind_iteration (-1),
///     train.gmp_t0 / train.gmp_n / train.gmp_dt (span the run)
///   grid.architectures (mlp-16; mlp-H[-H2...] or conv-C1-C2),
///     grid.methods (dense,ft), grid.scope (global), grid.sparsities (0.9),
///     grid.augmentations (clean), grid.seeds (1)
///   corrupt.kinds (all five), corrupt.severities (1,3,5), corrupt.seed (7)
///   gate.points (32), deck.enable (false),
///     deck.augmentations (grid augmentations minus clean)
///   heatmap.enable (false), heatmap.eps (0.5), heatmap.count (32)
ExperimentResult run_experiment(const Config& cfg, const std::string& out_dir);

}  // namespace cards::harness
