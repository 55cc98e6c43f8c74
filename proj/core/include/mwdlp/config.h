#pragma once

#include <string>

#include "mwdlp/model.h"
#include "mwdlp/train.h"

namespace mwdlp {

// Plain-text key-value training configuration ("key = value" lines, '#'
// comments). Keys default to the 24 kHz paper configuration; see
// docs/formats.md for the full key list.
struct FileConfig {
    NetworkConfig net;
    TrainConfig train;
};

FileConfig parse_config_file(const std::string& path);
FileConfig parse_config_text(const std::string& text);

}  // namespace mwdlp
