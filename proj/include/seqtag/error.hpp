#pragma once

#include <stdexcept>
#include <string>

namespace seqtag {

// All failures surface as Error with a stable kind prefix, so CLI output
// stays one-line machine-parsable: "<kind>: <message>".
class Error : public std::runtime_error {
 public:
  Error(const std::string& kind, const std::string& message)
      : std::runtime_error(kind + ": " + message), kind_(kind) {}

  const std::string& kind() const { return kind_; }

 private:
  std::string kind_;
};

inline Error parse_error(const std::string& m) { return Error("parse error", m); }
inline Error config_error(const std::string& m) { return Error("config error", m); }
inline Error format_error(const std::string& m) { return Error("format error", m); }
inline Error dimension_error(const std::string& m) { return Error("dimension error", m); }
inline Error lookup_error(const std::string& m) { return Error("lookup error", m); }
inline Error training_error(const std::string& m) { return Error("training error", m); }
inline Error input_error(const std::string& m) { return Error("input error", m); }
inline Error usage_error(const std::string& m) { return Error("usage error", m); }
inline Error validation_error(const std::string& m) { return Error("validation error", m); }
inline Error alignment_error(const std::string& m) { return Error("alignment error", m); }
inline Error load_error(const std::string& m) { return Error("load error", m); }

}  // namespace seqtag
