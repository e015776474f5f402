#pragma once

#include <random>
#include <string>
#include <vector>

#include "dwbus/model.hpp"

namespace testsupport {

// Random schema that satisfies every structural rule: unique identifiers,
// natural keys and levels over declared attributes, grains on resolvable
// levels, summable measures only where numeric, and groups whose members
// share the central fact's bus dimensions.
dwbus::model::Schema random_schema(std::mt19937_64& rng);

// Lines of `text` holding at least one token, 1-based, skipping comments.
struct TokenPos {
  std::size_t line = 0;
  std::size_t begin = 0;  // byte offset in text
  std::size_t length = 0;
};
std::vector<TokenPos> tokens_of(const std::string& text);

// Replaces one token with a lexeme that cannot appear there.
std::string corrupt(const std::string& text, const TokenPos& tok, std::mt19937_64& rng);

}  // namespace testsupport
