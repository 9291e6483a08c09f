#include "luseel/schedule.hpp"

#include <cmath>

#include "luseel/errors.hpp"

namespace luseel {

double lr_at(int64_t step, int halvings, double base_lr, int64_t warmup_steps) {
  if (step < 0 || halvings < 0 || warmup_steps < 0 || !(base_lr > 0.0)) {
    throw ConfigError("lr_at: negative step/halvings/warmup or non-positive base rate");
  }
  if (step < warmup_steps) return base_lr * static_cast<double>(step) / static_cast<double>(warmup_steps);
  return std::ldexp(base_lr, -halvings);
}

PlateauSchedule::PlateauSchedule(int patience_epochs, int early_stop_epochs)
    : patience_(patience_epochs), early_stop_(early_stop_epochs) {
  if (patience_ < 1 || early_stop_ < 1) throw ConfigError("plateau: patience must be positive");
}

PlateauEvent PlateauSchedule::observe(double val_loss) {
  if (!std::isfinite(val_loss)) throw NumericError("validation", "non-finite validation loss");
  if (stopped_) throw Error("plateau: observe() after early stop");
  PlateauEvent ev;
  if (val_loss < best_) {
    best_ = val_loss;
    since_improve_ = 0;
    since_plateau_ = 0;
    ev.improved = true;
    return ev;
  }
  ++since_improve_;
  ++since_plateau_;
  if (since_improve_ >= early_stop_) {
    stopped_ = true;
    ev.stop = true;
    return ev;
  }
  if (since_plateau_ >= patience_) {
    ++halvings_;
    since_plateau_ = 0;
    ev.halved = true;
  }
  return ev;
}

}  // namespace luseel
