#pragma once

#include <chrono>

namespace cmlp {

class Stopwatch {
  public:
    Stopwatch() : start_(clock::now()) {}

    double seconds() const {
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

  private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

} // namespace cmlp
