#pragma once

#include <stdexcept>
#include <string>

namespace fgad {

// Base of every error the library raises. The kind tag lets the CLI map
// failures onto exit codes without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind {
    Dimension,
    Domain,
    Parameter,
    Numeric,
    Ingestion,
    Format,
    Configuration,
    Protocol,
    Metric,
    Io,
    Checkpoint,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

#define FGAD_DEFINE_ERROR(Name, KindTag)                               \
  class Name : public Error {                                          \
   public:                                                             \
    explicit Name(const std::string& what) : Error(Kind::KindTag, what) {} \
  };

FGAD_DEFINE_ERROR(DimensionError, Dimension)
FGAD_DEFINE_ERROR(DomainError, Domain)
FGAD_DEFINE_ERROR(ParameterError, Parameter)
FGAD_DEFINE_ERROR(NumericError, Numeric)
FGAD_DEFINE_ERROR(IngestionError, Ingestion)
FGAD_DEFINE_ERROR(FormatError, Format)
FGAD_DEFINE_ERROR(ConfigError, Configuration)
FGAD_DEFINE_ERROR(ProtocolError, Protocol)
FGAD_DEFINE_ERROR(MetricError, Metric)
FGAD_DEFINE_ERROR(IoError, Io)
FGAD_DEFINE_ERROR(CheckpointError, Checkpoint)

#undef FGAD_DEFINE_ERROR

/// Rethrows `e` as the same error type with `context` prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.what();
  switch (e.kind()) {
    case Error::Kind::Dimension: throw DimensionError(msg);
    case Error::Kind::Domain: throw DomainError(msg);
    case Error::Kind::Parameter: throw ParameterError(msg);
    case Error::Kind::Numeric: throw NumericError(msg);
    case Error::Kind::Ingestion: throw IngestionError(msg);
    case Error::Kind::Format: throw FormatError(msg);
    case Error::Kind::Configuration: throw ConfigError(msg);
    case Error::Kind::Protocol: throw ProtocolError(msg);
    case Error::Kind::Metric: throw MetricError(msg);
    case Error::Kind::Io: throw IoError(msg);
    case Error::Kind::Checkpoint: throw CheckpointError(msg);
  }
  throw Error(e.kind(), msg);
}

}  // namespace fgad
