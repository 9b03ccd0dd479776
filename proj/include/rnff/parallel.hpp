#pragma once

#include <exception>
#include <mutex>

namespace rnff {

/// Number of worker threads the kernels would use (1 without OpenMP).
int effective_threads(int requested);

namespace detail {

/// Exceptions cannot cross an OpenMP parallel region; loop bodies run
/// through capture() and the first failure is rethrown after the join.
class ParallelErrors {
  public:
    template <class F>
    void capture(F&& body) noexcept {
        try {
            body();
        } catch (...) {
            const std::lock_guard<std::mutex> lock(mutex_);
            if (!first_) first_ = std::current_exception();
        }
    }

    void rethrow() const {
        if (first_) std::rethrow_exception(first_);
    }

  private:
    std::mutex mutex_;
    std::exception_ptr first_;
};

} // namespace detail
} // namespace rnff
