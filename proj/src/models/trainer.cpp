#include "metsfuse/models/trainer.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "metsfuse/error.hpp"
#include "metsfuse/log.hpp"
#include "metsfuse/models/loss.hpp"
#include "metsfuse/numerics/adamw.hpp"

namespace metsfuse::models {

namespace {

void require_both_classes(std::span<const Example> set, const char* what) {
  bool pos = false, neg = false;
  for (const auto& e : set) (e.label ? pos : neg) = true;
  if (!pos || !neg) throw DataError(fmt::format("train: the {} set must contain both classes", what));
}

std::vector<int> labels_of(std::span<const Example> set) {
  std::vector<int> y;
  y.reserve(set.size());
  for (const auto& e : set) y.push_back(e.label);
  return y;
}

}  // namespace

void TrainHistory::write_csv(std::ostream& out) const {
  out << "epoch,loss,ce,con,val_acc,val_pre,val_rec,val_f1,val_auroc\n";
  for (const auto& e : epochs) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", e.epoch, e.loss, e.ce, e.con, e.val.acc, e.val.pre, e.val.rec,
                       e.val.f1, e.val.auroc);
  }
}

nlohmann::json TrainHistory::to_json() const {
  nlohmann::json j;
  j["best_epoch"] = best_epoch;
  j["best_auroc"] = best_auroc;
  j["stopped_early"] = stopped_early;
  j["diverged"] = diverged;
  j["error"] = error;
  j["epochs"] = nlohmann::json::array();
  for (const auto& e : epochs) {
    j["epochs"].push_back({{"epoch", e.epoch}, {"loss", e.loss}, {"ce", e.ce}, {"con", e.con}, {"val", e.val.to_json()}});
  }
  return j;
}

LossParts example_loss(const FusionModel& model, num::Tape& tape, std::span<const Example* const> batch,
                       num::Mode mode, num::Rng& dropout_rng) {
  auto out = model.forward(tape, batch, mode, dropout_rng);
  std::vector<int> y;
  y.reserve(batch.size());
  for (const auto* e : batch) y.push_back(e->label);
  return batch_loss(out.probs, out.z, y, model.hyperparams());
}

TrainHistory train(FusionModel& model, std::span<const Example> train_set, std::span<const Example> val_set) {
  require_both_classes(train_set, "training");
  require_both_classes(val_set, "validation");
  const auto& hp = model.hyperparams();
  auto& params = model.params();
  num::AdamW opt(params, {hp.learning_rate, 0.9, 0.999, 1e-8, hp.weight_decay});
  const auto val_labels = labels_of(val_set);

  TrainHistory hist;
  auto best = params.snapshot();
  std::size_t since_best = 0;
  std::size_t global_step = 0;

  for (std::size_t epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    auto order_rng = num::Rng::derive(hp.seed, {num::stream_id("shuffle"), epoch});
    auto drop_rng = num::Rng::derive(hp.seed, {num::stream_id("dropout"), epoch});
    auto order = order_rng.permutation(train_set.size());

    std::vector<std::pair<std::size_t, std::size_t>> batches;
    for (std::size_t s = 0; s < order.size(); s += hp.batch_size) {
      batches.emplace_back(s, std::min(order.size(), s + hp.batch_size));
    }
    if (batches.size() > 1 && batches.back().second - batches.back().first == 1) {
      batches.pop_back();
      batches.back().second = order.size();
    }

    EpochLog log;
    log.epoch = epoch;
    try {
      for (auto [b, e] : batches) {
        std::vector<const Example*> batch;
        for (std::size_t i = b; i < e; ++i) batch.push_back(&train_set[order[i]]);
        num::Tape tape;
        params.zero_grad();
        auto parts = example_loss(model, tape, batch, num::Mode::Train, drop_rng);
        if (!std::isfinite(parts.loss)) throw NumericError(fmt::format("non-finite loss at step {}", global_step));
        tape.backward(parts.total);
        opt.step(params);
        hist.steps.push_back({epoch, ++global_step, parts.loss, parts.ce, parts.con});
        log.loss += parts.loss;
        log.ce += parts.ce;
        log.con += parts.con;
      }
      auto nb = static_cast<double>(batches.size());
      log.loss /= nb;
      log.ce /= nb;
      log.con /= nb;
      log.val = eval::evaluate(model.predict(val_set), val_labels);
    } catch (const NumericError& err) {
      hist.diverged = true;
      hist.error = fmt::format("epoch {}: {}", epoch, err.what());
      logger()->error("training diverged: {}", hist.error);
      break;
    }
    hist.epochs.push_back(log);
    logger()->debug("epoch {} loss {:.4f} (ce {:.4f}, con {:.4f}) val auroc {:.4f}", epoch, log.loss, log.ce, log.con,
                    log.val.auroc);
    if (hist.best_epoch == 0 || log.val.auroc > hist.best_auroc) {
      hist.best_epoch = epoch;
      hist.best_auroc = log.val.auroc;
      best = params.snapshot();
      since_best = 0;
    } else if (hp.patience > 0 && ++since_best >= hp.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  params.restore(best);
  params.zero_grad();
  return hist;
}

}  // namespace metsfuse::models
