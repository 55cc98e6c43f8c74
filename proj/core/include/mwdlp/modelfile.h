#pragma once

#include <string>

#include "mwdlp/model.h"

namespace mwdlp {

// Binary model container, magic "MWDL", little-endian throughout, CRC32
// trailer over all preceding bytes. Byte layout documented in
// docs/formats.md. Tensors are stored dense except sparse-GRU recurrent
// kernels with a pruned mask, which use 16x1 block-sparse records.
enum class TensorDtype : uint8_t { F32 = 0, F64 = 1 };

void model_save(const ModelParams& params, const std::string& path,
                TensorDtype dtype = TensorDtype::F32);

ModelParams model_load(const std::string& path);

// Standard IEEE CRC32 (reflected, poly 0xEDB88320), for the file trailer.
uint32_t crc32_update(uint32_t crc, const void* data, size_t len);

}  // namespace mwdlp
