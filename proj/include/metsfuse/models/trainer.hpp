#pragma once

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "metsfuse/eval/metrics.hpp"
#include "metsfuse/models/fusion.hpp"
#include "metsfuse/models/loss.hpp"

namespace metsfuse::models {

struct StepLog {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double loss = 0.0;
  double ce = 0.0;
  double con = 0.0;
};

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0;      // batch means averaged over the epoch
  double ce = 0.0;
  double con = 0.0;
  eval::Scores val;
};

struct TrainHistory {
  std::vector<EpochLog> epochs;
  std::vector<StepLog> steps;
  std::size_t best_epoch = 0;  // 1-based; 0 before any epoch completes
  double best_auroc = 0.0;
  bool stopped_early = false;
  bool diverged = false;
  std::string error;

  /// One row per epoch: epoch,loss,ce,con,val_acc,val_pre,val_rec,val_f1,val_auroc
  void write_csv(std::ostream& out) const;
  nlohmann::json to_json() const;
};

/// Mini-batch AdamW. Batches are reshuffled every epoch from (seed, epoch); a trailing
/// batch of one joins the previous batch. After each epoch the validation scores are
/// recorded; the parameters of the epoch with the highest validation AUROC are restored at
/// the end. Training stops after `patience` epochs without improvement (patience 0 runs all
/// epochs). A non-finite loss or gradient marks the history as diverged and leaves the
/// best parameters seen so far in place.
TrainHistory train(FusionModel& model, std::span<const Example> train_set, std::span<const Example> val_set);

/// Convenience for tests and callers that need a loss on the tape.
LossParts example_loss(const FusionModel& model, num::Tape& tape, std::span<const Example* const> batch,
                       num::Mode mode, num::Rng& dropout_rng);

}  // namespace metsfuse::models
