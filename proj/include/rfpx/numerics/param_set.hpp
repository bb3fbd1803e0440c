#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "rfpx/numerics/tensor.hpp"

namespace rfpx {

/// Named parameter tensors keyed by dotted path ("decoder.0.cross.Wq").
/// Iteration is lexicographic. Copies and views share tensor storage.
class ParamSet {
 public:
  struct Entry {
    Tensor tensor;
    bool trainable = false;
  };

  /// Adds a parameter; the stored leaf requires grad iff `trainable`.
  void add(const std::string& name, const Tensor& value, bool trainable);

  bool contains(std::string_view name) const;
  const Tensor& get(std::string_view name) const;
  bool is_trainable(std::string_view name) const;
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  /// Total scalar count, optionally restricted to trainable entries.
  std::size_t scalar_count(bool trainable_only = false) const;

  std::vector<std::string> names() const;
  /// Entries whose name starts with `prefix`, sharing storage.
  ParamSet with_prefix(std::string_view prefix) const;
  /// Trainable entries only, sharing storage.
  ParamSet trainable_view() const;

  void zero_grad();

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::map<std::string, Entry, std::less<>> entries_;
};

/// Order-sensitive FNV-1a digest over names and raw value bits of the
/// entries selected by `include`. Used for freeze-contract checks.
std::uint64_t checksum(const ParamSet& params, bool (*include)(const std::string&, bool trainable) = nullptr);

}  // namespace rfpx
