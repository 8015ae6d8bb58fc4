// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace ee2d {

// Base of every domain error. name() is the stable error identifier the CLI
// prints before the message.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(what), name_(std::move(name)) {}

  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define EE2D_DEFINE_ERROR(Type)                                   \
  class Type : public Error {                                     \
   public:                                                        \
    explicit Type(const std::string& what) : Error(#Type, what) {} \
  };

EE2D_DEFINE_ERROR(EmptyInput)
EE2D_DEFINE_ERROR(SchemaError)
EE2D_DEFINE_ERROR(NormalizationError)
EE2D_DEFINE_ERROR(InconsistentShape)
EE2D_DEFINE_ERROR(DimensionMismatch)
EE2D_DEFINE_ERROR(NonFiniteLoss)
EE2D_DEFINE_ERROR(SpecError)
EE2D_DEFINE_ERROR(EmptyFilter)
EE2D_DEFINE_ERROR(NotReachable)
EE2D_DEFINE_ERROR(IoError)
EE2D_DEFINE_ERROR(ConfigError)

#undef EE2D_DEFINE_ERROR

}  // namespace ee2d
