#pragma once

#include <stdexcept>
#include <string>

namespace certpro {

enum class Errc {
  Storage,
  MetaConflict,
  NotFound,
  Integrity,
  DanglingReference,
  Cycle,
  DuplicateProducer,
  Validation,
  Io,
  MissingInput,
  StepFailed,
  MissingOutput,
  Format,
  Registrar,
  Uncertifiable,
  Schema,
  CanonicalForm,
  NotReplayable,
  Replay,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::Storage: return "StorageError";
    case Errc::MetaConflict: return "MetaConflict";
    case Errc::NotFound: return "NotFound";
    case Errc::Integrity: return "IntegrityError";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::Cycle: return "CycleError";
    case Errc::DuplicateProducer: return "DuplicateProducer";
    case Errc::Validation: return "ValidationError";
    case Errc::Io: return "IoError";
    case Errc::MissingInput: return "MissingInput";
    case Errc::StepFailed: return "StepFailed";
    case Errc::MissingOutput: return "MissingOutput";
    case Errc::Format: return "FormatError";
    case Errc::Registrar: return "RegistrarError";
    case Errc::Uncertifiable: return "Uncertifiable";
    case Errc::Schema: return "SchemaError";
    case Errc::CanonicalForm: return "CanonicalFormError";
    case Errc::NotReplayable: return "NotReplayable";
    case Errc::Replay: return "ReplayError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace certpro
