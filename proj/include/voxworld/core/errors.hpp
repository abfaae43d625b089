// Copyright Contributors to the voxworld Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace voxworld {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Geometry input that cannot support the requested fit (too few or collinear vertices).
class DegenerateGeometry : public Error {
  public:
    using Error::Error;
};

/// A diffusion trajectory produced a non-finite value.
class SamplerDiverged : public Error {
  public:
    using Error::Error;
};

/// Two grids whose lattices cannot be aligned (voxel size or origin offset mismatch).
class IncommensurateGrids : public Error {
  public:
    using Error::Error;
};

/// Two volumes that were expected to share a chunk frame do not.
class FrameMismatch : public Error {
  public:
    using Error::Error;
};

class UnknownInstance : public Error {
  public:
    using Error::Error;
};

/// Malformed record or unexpected message on a plug-in or streaming channel.
class ProtocolError : public Error {
  public:
    using Error::Error;
};

/// Config or input file failed schema validation.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class FormatError : public Error {
  public:
    using Error::Error;
};

} // namespace voxworld
