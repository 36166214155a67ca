#pragma once

#include <iosfwd>
#include <string>

#include "seqtag/trainer.hpp"

namespace seqtag {

// Single-file model archive: a magic string and format version, a text
// manifest (tag classes, vocabulary, shapes, resolved config), then raw
// little-endian 64-bit float tensor blocks in manifest order. Loading
// reproduces predictions bitwise.
void save_model(Model& model, std::ostream& out);
void save_model(Model& model, const std::string& path);

Model load_model(std::istream& in);
Model load_model(const std::string& path);

}  // namespace seqtag
