#include "halfsync/optim/schedule.hpp"

#include <cmath>
#include <limits>

#include "halfsync/errors.hpp"

namespace halfsync::optim {

void LrSchedule::validate() const {
  if (!(base_lr > 0.0)) {
    throw ConfigError("base learning rate must be positive");
  }
  if (!(decay > 0.0 && decay <= 1.0)) {
    throw ConfigError("learning-rate decay must lie in (0, 1]");
  }
  if (!(halving_workers > 0.0)) {
    throw ConfigError("halving worker count must be positive");
  }
  if (!(clip > 0.0)) {
    throw ConfigError("effective learning-rate clip must be positive");
  }
}

double LrSchedule::base_rate(std::size_t workers) const {
  if (workers == 0) {
    throw ConfigError("worker count must be >= 1");
  }
  const double n = static_cast<double>(workers);
  double rate = base_lr / (1.0 + n / halving_workers);
  if (rate * n > clip) {
    rate = clip / n;
    // clip/N can round so that rate*N lands one ulp above clip.
    while (rate * n > clip) {
      rate = std::nextafter(rate, 0.0);
    }
  }
  return rate;
}

double LrSchedule::rate_for_epoch(std::size_t epoch, std::size_t workers) const {
  return base_rate(workers) * std::pow(decay, static_cast<double>(epoch));
}

}  // namespace halfsync::optim
