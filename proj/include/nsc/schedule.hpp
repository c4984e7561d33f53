#pragma once

#include <functional>
#include <string>
#include <variant>
#include <vector>

#include "nsc/errors.hpp"

namespace nsc {

/// Time-indexed sequence of values (system matrices, constraint polytopes,
/// loss weights).  Three storage modes:
///   - constant: the same value at every step (the default, by far the
///     common case);
///   - table: an explicit per-step list for t = 1..table.size();
///   - generator: a callback evaluated lazily at each step.
/// Steps are 1-based to match the run loop.
template <class T>
class Schedule {
public:
    Schedule() = default;
    Schedule(T constant) : storage_(std::move(constant)) {}                       // NOLINT(google-explicit-constructor)
    Schedule(std::vector<T> table) : storage_(std::move(table)) {}                // NOLINT(google-explicit-constructor)
    Schedule(std::function<T(long)> generator) : storage_(std::move(generator)) {} // NOLINT(google-explicit-constructor)

    /// Value at step t (1-based).  Table schedules clamp to their last entry
    /// so that a run can probe one step past the horizon.
    T at(long t) const {
        if (t < 1) throw DimensionError("Schedule::at: step index " + std::to_string(t) + " < 1");
        if (std::holds_alternative<T>(storage_)) return std::get<T>(storage_);
        if (std::holds_alternative<std::vector<T>>(storage_)) {
            const auto& tab = std::get<std::vector<T>>(storage_);
            if (tab.empty()) throw DimensionError("Schedule::at: empty table");
            const size_t i = static_cast<size_t>(t - 1);
            return tab[i < tab.size() ? i : tab.size() - 1];
        }
        return std::get<std::function<T(long)>>(storage_)(t);
    }

    bool is_constant() const { return std::holds_alternative<T>(storage_); }

    /// Visit each eagerly-stored value (constant or table entries); used for
    /// construction-time validation.  Generators cannot be enumerated.
    template <class F>
    void for_each_stored(F&& f) const {
        if (std::holds_alternative<T>(storage_)) {
            f(std::get<T>(storage_));
        } else if (std::holds_alternative<std::vector<T>>(storage_)) {
            for (const auto& v : std::get<std::vector<T>>(storage_)) f(v);
        }
    }

private:
    std::variant<T, std::vector<T>, std::function<T(long)>> storage_;
};

} // namespace nsc
