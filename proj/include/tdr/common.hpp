#pragma once

#include <stdexcept>
#include <string>

namespace tdr {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kRasterFormat = "tdr,v1";

// Error taxonomy. The CLI maps these onto exit codes: config/argument/schema
// errors exit 2, data/availability errors exit 3, partial runs exit 4.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class argument_error : public error {
 public:
  using error::error;
};
class dimension_error : public error {
 public:
  using error::error;
};
class index_error : public error {
 public:
  using error::error;
};
class schema_error : public error {
 public:
  using error::error;
};
class data_error : public error {
 public:
  using error::error;
};
class availability_error : public error {
 public:
  using error::error;
};
class config_error : public error {
 public:
  using error::error;
};
class state_error : public error {
 public:
  using error::error;
};
class io_error : public error {
 public:
  using error::error;
};

}  // namespace tdr
