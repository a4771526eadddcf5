#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kdsm {

// Every failure raised by the library derives from Error so callers can catch
// one type at a stage boundary.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateTet : public Error {
 public:
  using Error::Error;
};

class OpenMeshError : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class EmptyMesh : public Error {
 public:
  using Error::Error;
};

class DegenerateFrame : public Error {
 public:
  using Error::Error;
};

class MorphSolveFailure : public Error {
 public:
  using Error::Error;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

// A cloth vertex could not be located in any tetrahedron.
class NoParent : public Error {
 public:
  explicit NoParent(std::size_t vertex)
      : Error("no parent tetrahedron for cloth vertex " + std::to_string(vertex)),
        vertex_(vertex) {}
  std::size_t vertex() const noexcept { return vertex_; }

 private:
  std::size_t vertex_;
};

}  // namespace kdsm
