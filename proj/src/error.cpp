// SPDX-License-Identifier: Apache-2.0

#include "layerprobe/error.hpp"

namespace layerprobe {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::CropTooLarge: return "CropTooLarge";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::BadMagic: return "BadMagic";
    case Errc::TruncatedFile: return "TruncatedFile";
    case Errc::TrailingBytes: return "TrailingBytes";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownLayerKind: return "UnknownLayerKind";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::BadTap: return "BadTap";
    case Errc::ShapeUnderflow: return "ShapeUnderflow";
    case Errc::MissingParameter: return "MissingParameter";
    case Errc::NonFiniteWeight: return "NonFiniteWeight";
    case Errc::OutputLargerThanInput: return "OutputLargerThanInput";
    case Errc::DegenerateLandmarks: return "DegenerateLandmarks";
    case Errc::DimMismatch: return "DimMismatch";
    case Errc::DuplicateImageId: return "DuplicateImageId";
    case Errc::BadImage: return "BadImage";
    case Errc::SingleClass: return "SingleClass";
    case Errc::NonFiniteFeature: return "NonFiniteFeature";
    case Errc::SingleClassTruth: return "SingleClassTruth";
    case Errc::MissingFeature: return "MissingFeature";
    case Errc::MissingKind: return "MissingKind";
    case Errc::UnknownAttribute: return "UnknownAttribute";
    case Errc::BadHeader: return "BadHeader";
    case Errc::RowWidthMismatch: return "RowWidthMismatch";
    case Errc::BadLabelValue: return "BadLabelValue";
    case Errc::BadSplitDigit: return "BadSplitDigit";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::FieldCount: return "FieldCount";
    case Errc::NonNumeric: return "NonNumeric";
    case Errc::RegionOutOfBounds: return "RegionOutOfBounds";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& context)
    : std::runtime_error(std::string(errc_name(code)) + ": " + context),
      code_(code),
      context_(context) {}

}  // namespace layerprobe
