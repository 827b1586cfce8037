#include "whisker/errors.hpp"

namespace whisker {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::seed_length: return "seed_length";
    case Errc::exhausted: return "exhausted";
    case Errc::domain: return "domain";
    case Errc::usage: return "usage";
    case Errc::malformed: return "malformed";
    case Errc::protocol: return "protocol";
    case Errc::authentication: return "authentication";
    case Errc::forgery: return "forgery";
    case Errc::replay: return "replay";
    case Errc::no_key: return "no_key";
    case Errc::stream: return "stream";
    case Errc::integrity: return "integrity";
    case Errc::throttle: return "throttle";
    case Errc::conflict: return "conflict";
    case Errc::validation: return "validation";
    case Errc::authorization: return "authorization";
    case Errc::delivery: return "delivery";
    case Errc::size: return "size";
    case Errc::io: return "io";
    case Errc::timeout: return "timeout";
  }
  return "unknown";
}

Errc errc_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(Errc::timeout); ++i) {
    if (to_string(static_cast<Errc>(i)) == name) return static_cast<Errc>(i);
  }
  return Errc::protocol;
}

}  // namespace whisker
