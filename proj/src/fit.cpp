#include "pbdn/fit.hpp"

#include <charconv>

namespace pbdn {

void write_trace_line(std::ostream& out, const TraceRecord& rec, const char* key) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), rec.value);
  out << "{\"iter\":" << rec.iteration << ",\"k_active\":" << rec.active << ",\"" << key
      << "\":" << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << "}\n";
}

}  // namespace pbdn
