#pragma once

#include <string>

#include "bsr/dataset.hpp"
#include "bsr/tensor.hpp"

namespace bsr {

// Writes `data` to a temp file in the target directory then renames, so
// readers never observe a partial file.
void write_file_atomic(const std::string& path, const std::string& data);
std::string read_file(const std::string& path);

// Snaps every value to the 8-bit grid round(255*clamp(v,0,1))/255 so that a
// P6 round trip is bit-exact.
Tensor quantize8(const Tensor& image);
float quantize8(float v);

// Binary P6, 8-bit, RGB. Images are [3,H,W] in [0,1]; writing quantizes.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

// Directory of P6 files plus labels.csv (header filename,class_index).
// Class indices must be dense in [0,k) and image dimensions uniform.
LabeledDataset read_image_directory(const std::string& dir);

}  // namespace bsr
