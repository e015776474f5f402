#include "dwbus/error.hpp"

namespace dwbus {

bool is_io_code(std::string_view code) {
  return code == errc::io_error || code == errc::corrupt_catalog || code == errc::unsupported_format;
}

}  // namespace dwbus
