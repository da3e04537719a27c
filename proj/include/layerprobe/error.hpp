// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace layerprobe {

enum class Errc {
  // tensor
  LengthMismatch,
  NonFiniteValue,
  CropTooLarge,
  ShapeMismatch,
  // binary formats
  BadMagic,
  TruncatedFile,
  TrailingBytes,
  // manifest / weights
  SyntaxError,
  UnknownLayerKind,
  DuplicateName,
  BadTap,
  ShapeUnderflow,
  MissingParameter,
  NonFiniteWeight,
  // inference
  OutputLargerThanInput,
  // extraction
  DegenerateLandmarks,
  DimMismatch,
  DuplicateImageId,
  BadImage,
  // svm
  SingleClass,
  NonFiniteFeature,
  // evaluation
  SingleClassTruth,
  MissingFeature,
  MissingKind,
  UnknownAttribute,
  // text parsers
  BadHeader,
  RowWidthMismatch,
  BadLabelValue,
  BadSplitDigit,
  DuplicateId,
  FieldCount,
  NonNumeric,
  RegionOutOfBounds,
  // generic
  InvalidArgument,
  IoError,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure raised by the library. what() is a single line of the form
/// "<Code>: <context>" so the CLI can print it verbatim.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& context);

  Errc code() const noexcept { return code_; }
  const std::string& context() const noexcept { return context_; }

 private:
  Errc code_;
  std::string context_;
};

}  // namespace layerprobe
