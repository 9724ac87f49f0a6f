#include "binary_io.hpp"

#include <fstream>
#include <iterator>

namespace octopath {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::FormatError: return "FormatError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::InvalidClass: return "InvalidClass";
    case ErrorCode::HeadMismatch: return "HeadMismatch";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InsufficientLog: return "InsufficientLog";
    case ErrorCode::InsufficientRuns: return "InsufficientRuns";
    case ErrorCode::LabelOutOfWindow: return "LabelOutOfWindow";
    case ErrorCode::WheelSpeedExceeded: return "WheelSpeedExceeded";
    case ErrorCode::DegenerateICR: return "DegenerateICR";
    case ErrorCode::InvalidScenario: return "InvalidScenario";
    case ErrorCode::InvalidGoal: return "InvalidGoal";
    case ErrorCode::NoPath: return "NoPath";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

namespace detail {

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::IoError, "short write to " + path);
}

}  // namespace detail
}  // namespace octopath
