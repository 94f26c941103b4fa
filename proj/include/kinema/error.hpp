#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kinema {

enum class Errc {
  MalformedXml,
  KinematicCycle,
  DisconnectedTree,
  UnknownJointType,
  MissingLink,
  UnsupportedFormat,
  CorruptGeometry,
  UnresolvedMesh,
  DofMismatch,
  UnknownLink,
  NonpositiveDt,
  BehindCamera,
  NonpositiveDepth,
  MissingLinkPose,
  InvalidCamera,
  EmptySequence,
  LengthMismatch,
  ShapeMismatch,
  TooShort,
  EmptyCloud,
  TooFewFrames,
  EmptyFrame,
  FrameTooSmall,
  EmptyInput,
  InvalidArgument,
  IoFailure,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedXml: return "MalformedXml";
    case Errc::KinematicCycle: return "KinematicCycle";
    case Errc::DisconnectedTree: return "DisconnectedTree";
    case Errc::UnknownJointType: return "UnknownJointType";
    case Errc::MissingLink: return "MissingLink";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::CorruptGeometry: return "CorruptGeometry";
    case Errc::UnresolvedMesh: return "UnresolvedMesh";
    case Errc::DofMismatch: return "DofMismatch";
    case Errc::UnknownLink: return "UnknownLink";
    case Errc::NonpositiveDt: return "NonpositiveDt";
    case Errc::BehindCamera: return "BehindCamera";
    case Errc::NonpositiveDepth: return "NonpositiveDepth";
    case Errc::MissingLinkPose: return "MissingLinkPose";
    case Errc::InvalidCamera: return "InvalidCamera";
    case Errc::EmptySequence: return "EmptySequence";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::TooShort: return "TooShort";
    case Errc::EmptyCloud: return "EmptyCloud";
    case Errc::TooFewFrames: return "TooFewFrames";
    case Errc::EmptyFrame: return "EmptyFrame";
    case Errc::FrameTooSmall: return "FrameTooSmall";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoFailure: return "IoFailure";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's error records) can dispatch without string matching.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace kinema
