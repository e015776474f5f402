#pragma once

#include <memory>
#include <string>
#include <string_view>

namespace dwbus {

// Incremental SHA-256; digest() returns 64 lower-case hex characters.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  Sha256& update(std::string_view bytes);
  std::string digest();

 private:
  struct State;
  std::unique_ptr<State> state_;
};

std::string sha256_hex(std::string_view bytes);

}  // namespace dwbus
