// Exception hierarchy shared by all components.
#pragma once

#include <stdexcept>
#include <string>

namespace sstk {

class Error : public std::runtime_error {
 public:
  Error(std::string category, const std::string& msg)
      : std::runtime_error(category + ": " + msg), category_(std::move(category)) {}
  const std::string& category() const noexcept { return category_; }

 private:
  std::string category_;
};

#define SSTK_DEFINE_ERROR(Name, category)                        \
  class Name : public Error {                                    \
   public:                                                       \
    explicit Name(const std::string& msg) : Error(category, msg) {} \
  }

SSTK_DEFINE_ERROR(ShapeError, "shape");
SSTK_DEFINE_ERROR(EvalError, "evaluation");
SSTK_DEFINE_ERROR(AlignmentError, "alignment");
SSTK_DEFINE_ERROR(ResolutionError, "resolution");
SSTK_DEFINE_ERROR(SamplingError, "sampling");
SSTK_DEFINE_ERROR(ConfigError, "config");
SSTK_DEFINE_ERROR(FusionError, "fusion");
SSTK_DEFINE_ERROR(SequenceError, "sequence");
SSTK_DEFINE_ERROR(LossError, "loss");
SSTK_DEFINE_ERROR(TrainingError, "training");
SSTK_DEFINE_ERROR(ChecksumError, "checksum");
SSTK_DEFINE_ERROR(MetricError, "metric");
SSTK_DEFINE_ERROR(ArgumentError, "argument");
SSTK_DEFINE_ERROR(FileError, "file");
SSTK_DEFINE_ERROR(GenerationError, "generation");

#undef SSTK_DEFINE_ERROR

}  // namespace sstk
