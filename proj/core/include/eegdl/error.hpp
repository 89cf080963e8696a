#pragma once

#include <stdexcept>
#include <string>

namespace eegdl {

// Error categories map onto distinct CLI exit codes.
enum class ErrorKind { config = 2, data = 3, runtime = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& code() const { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

inline Error config_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::config, std::move(code), msg);
}
inline Error data_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::data, std::move(code), msg);
}
inline Error runtime_error(std::string code, const std::string& msg) {
  return Error(ErrorKind::runtime, std::move(code), msg);
}

}  // namespace eegdl
