#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pep {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a set of registered tensors sharing one step
// counter. Call step() once per optimizer iteration, then update() for each
// tensor.
class Adam {
 public:
  explicit Adam(AdamConfig config = {}) : config_(config) {}

  // Returns the slot id used by update().
  std::size_t add_tensor(std::string name, std::size_t size);

  void step() { ++t_; }
  std::uint64_t steps() const { return t_; }

  void update(std::size_t slot, std::span<double> params, std::span<const double> grads);

  // Gradient is zeroed where keep == 0 before the moments see it, and those
  // entries are left untouched.
  void update_masked(std::size_t slot, std::span<double> params, std::span<const double> grads,
                     std::span<const std::uint8_t> keep);

  const AdamConfig& config() const { return config_; }
  const std::vector<double>& first_moment(std::size_t slot) const { return slots_[slot].m; }
  const std::vector<double>& second_moment(std::size_t slot) const { return slots_[slot].v; }

 private:
  struct Slot {
    std::string name;
    std::vector<double> m;
    std::vector<double> v;
  };

  void check(const Slot& s, std::span<double> params, std::span<const double> grads) const;

  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::vector<Slot> slots_;
};

}  // namespace pep
