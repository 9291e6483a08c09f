#pragma once

#include <cstdint>
#include <limits>

namespace luseel {

// Linear warm-up from 0 to base_lr over warmup_steps, then base_lr halved
// once per plateau trigger.
double lr_at(int64_t step, int halvings, double base_lr, int64_t warmup_steps);

struct PlateauEvent {
  bool improved = false;
  bool halved = false;
  bool stop = false;
};

// Tracks the best validation loss across epochs. The plateau counter resets
// on improvement and on halving; the early-stop counter resets only on
// improvement.
class PlateauSchedule {
 public:
  PlateauSchedule(int patience_epochs = 6, int early_stop_epochs = 10);

  PlateauEvent observe(double val_loss);

  int halvings() const { return halvings_; }
  int epochs_since_improve() const { return since_improve_; }
  int epochs_since_halving() const { return since_plateau_; }
  double best() const { return best_; }
  bool stopped() const { return stopped_; }

 private:
  int patience_;
  int early_stop_;
  int halvings_ = 0;
  int since_improve_ = 0;
  int since_plateau_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
  bool stopped_ = false;
};

}  // namespace luseel
