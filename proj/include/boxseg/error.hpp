#pragma once

#include <stdexcept>
#include <string>

namespace boxseg {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid geometry (degenerate box, non-finite coordinates).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Two masks (or a mask and an image) disagree on width/height.
class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Malformed or missing dataset files. The message names file and line.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid user configuration (grid files, backend specs, thresholds).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A detector/segmenter backend failed or replied with garbage.
class BackendError : public Error {
 public:
  BackendError(std::string backend, std::string message, std::string excerpt = {})
      : Error(compose(backend, message, excerpt)),
        backend_(std::move(backend)),
        excerpt_(std::move(excerpt)) {}

  const std::string& backend() const noexcept { return backend_; }
  const std::string& excerpt() const noexcept { return excerpt_; }

 private:
  static std::string compose(const std::string& backend, const std::string& message,
                             const std::string& excerpt) {
    std::string out = "backend '" + backend + "': " + message;
    if (!excerpt.empty()) {
      out += " (reply: \"" + excerpt.substr(0, 200) + (excerpt.size() > 200 ? "...\")" : "\")");
    }
    return out;
  }

  std::string backend_;
  std::string excerpt_;
};

}  // namespace boxseg
