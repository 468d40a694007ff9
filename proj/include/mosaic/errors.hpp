#pragma once

#include <stdexcept>
#include <string>

namespace mosaic {

// Error taxonomy mapped to process exit codes by the CLI:
// validation 2, divergence 3, io 4.
class validation_error : public std::runtime_error {
public:
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

class divergence_error : public std::runtime_error {
public:
  explicit divergence_error(const std::string& msg) : std::runtime_error(msg) {}
};

class io_error : public std::runtime_error {
public:
  explicit io_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw validation_error(msg);
}

} // namespace mosaic
