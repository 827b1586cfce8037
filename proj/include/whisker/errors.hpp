#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace whisker {

enum class Errc {
  seed_length,
  exhausted,
  domain,
  usage,
  malformed,
  protocol,
  authentication,  // signature did not verify
  forgery,         // MAC/tag did not verify
  replay,
  no_key,
  stream,
  integrity,
  throttle,
  conflict,
  validation,
  authorization,
  delivery,
  size,
  io,
  timeout,
};

std::string_view to_string(Errc code);
/// Inverse of to_string; Errc::protocol for unknown names.
Errc errc_from_string(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace whisker
