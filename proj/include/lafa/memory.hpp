#ifndef LAFA_MEMORY_HPP
#define LAFA_MEMORY_HPP

#include <algorithm>
#include <cstddef>

namespace lafa {

/// Analytic byte accounting for gradient computations.
///
/// Algorithms register the buffers they hold (tape checkpoints, Jacobians,
/// workspaces) instead of sampling process RSS, so the numbers depend only on
/// problem shape and are identical across platforms. One ledger per
/// computation; not thread-safe.
class MemoryLedger {
public:
    void acquire(std::size_t bytes) noexcept {
        current_ += bytes;
        peak_ = std::max(peak_, current_);
    }
    void release(std::size_t bytes) noexcept { current_ -= std::min(bytes, current_); }

    std::size_t current() const noexcept { return current_; }
    std::size_t peak() const noexcept { return peak_; }

private:
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
};

/// Holds `bytes` on a ledger for the lifetime of the scope.
class LedgerHold {
public:
    LedgerHold(MemoryLedger& ledger, std::size_t bytes) noexcept : ledger_(&ledger), bytes_(bytes) {
        ledger_->acquire(bytes_);
    }
    ~LedgerHold() { ledger_->release(bytes_); }
    LedgerHold(const LedgerHold&) = delete;
    LedgerHold& operator=(const LedgerHold&) = delete;

private:
    MemoryLedger* ledger_;
    std::size_t bytes_;
};

inline constexpr std::size_t doubles_bytes(std::size_t count) noexcept {
    return count * sizeof(double);
}

}  // namespace lafa

#endif  // LAFA_MEMORY_HPP
