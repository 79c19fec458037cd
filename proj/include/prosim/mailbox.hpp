#pragma once

#include <mutex>
#include <optional>
#include <utility>

namespace prosim
{

/// Single-slot mailbox: a new value overwrites an unread one, so the consumer
/// only ever sees the latest.
template <typename T>
class LatestValueMailbox
{
public:
  void put(T value)
  {
    std::lock_guard lock(mutex_);
    value_ = std::move(value);
    ++overwrites_;
  }

  std::optional<T> take()
  {
    std::lock_guard lock(mutex_);
    std::optional<T> out;
    out.swap(value_);
    return out;
  }

  std::optional<T> peek() const
  {
    std::lock_guard lock(mutex_);
    return value_;
  }

  void clear()
  {
    std::lock_guard lock(mutex_);
    value_.reset();
  }

  std::size_t puts() const
  {
    std::lock_guard lock(mutex_);
    return overwrites_;
  }

private:
  mutable std::mutex mutex_;
  std::optional<T> value_;
  std::size_t overwrites_ = 0;
};

}  // namespace prosim
