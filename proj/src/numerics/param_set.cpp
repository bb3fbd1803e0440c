#include "rfpx/numerics/param_set.hpp"

#include <bit>
#include <cstdint>

#include "rfpx/error.hpp"

namespace rfpx {

void ParamSet::add(const std::string& name, const Tensor& value, bool trainable) {
  if (entries_.contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
  Tensor leaf(value.shape(), std::vector<double>(value.values().begin(), value.values().end()), trainable);
  entries_.emplace(name, Entry{std::move(leaf), trainable});
}

bool ParamSet::contains(std::string_view name) const { return entries_.find(name) != entries_.end(); }

const Tensor& ParamSet::get(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second.tensor;
}

bool ParamSet::is_trainable(std::string_view name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second.trainable;
}

std::size_t ParamSet::scalar_count(bool trainable_only) const {
  std::size_t total = 0;
  for (const auto& [name, entry] : entries_) {
    if (!trainable_only || entry.trainable) total += entry.tensor.numel();
  }
  return total;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) out.push_back(name);
  return out;
}

ParamSet ParamSet::with_prefix(std::string_view prefix) const {
  ParamSet out;
  for (const auto& [name, entry] : entries_) {
    if (std::string_view(name).starts_with(prefix)) out.entries_.emplace(name, entry);
  }
  return out;
}

ParamSet ParamSet::trainable_view() const {
  ParamSet out;
  for (const auto& [name, entry] : entries_) {
    if (entry.trainable) out.entries_.emplace(name, entry);
  }
  return out;
}

void ParamSet::zero_grad() {
  for (auto& [name, entry] : entries_) {
    Tensor t = entry.tensor;
    t.zero_grad();
  }
}

std::uint64_t checksum(const ParamSet& params, bool (*include)(const std::string&, bool)) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t x) {
    for (int b = 0; b < 8; ++b) {
      h ^= (x >> (8 * b)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& [name, entry] : params) {
    if (include && !include(name, entry.trainable)) continue;
    for (char ch : name) mix(static_cast<unsigned char>(ch));
    for (double v : entry.tensor.values()) mix(std::bit_cast<std::uint64_t>(v));
  }
  return h;
}

}  // namespace rfpx
