#ifndef THERMOWEIGHT_ERRORS_HPP
#define THERMOWEIGHT_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace thermoweight {

// Base class for all library failures.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Structural problems: illegal transitions, non-surjective maps, bad
// depths, degenerate potentials.  Maps to CLI exit code 2.
struct validation_error : error {
  using error::error;
};

// Work-size caps exceeded (word enumeration, alphabet size).  Maps to
// CLI exit code 3.
struct resource_error : error {
  using error::error;
};

struct depth_error : validation_error {
  using validation_error::validation_error;
};

struct invalid_constants_error : validation_error {
  using validation_error::validation_error;
};

// Enumeration / table-size limits shared by all modules.
struct ComputeCaps {
  std::uint64_t max_words = 50'000'000;  // dense tables and streamed passes
  int max_alphabet = 65535;              // higher-block recoding alphabets
};

inline void check_word_cap(std::uint64_t count, const ComputeCaps& caps,
                           const char* what) {
  if (count > caps.max_words)
    throw resource_error(std::string(what) + ": " + std::to_string(count) +
                         " words exceeds cap " +
                         std::to_string(caps.max_words));
}

}  // namespace thermoweight

#endif
