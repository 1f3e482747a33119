#include "bsr/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace bsr {

void write_file_atomic(const std::string& path, const std::string& data) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw std::runtime_error("cannot open " + tmp + " for writing");
        f.write(data.data(), static_cast<std::streamsize>(data.size()));
        if (!f) throw std::runtime_error("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        std::remove(tmp.c_str());
        throw std::runtime_error("rename to " + path + " failed");
    }
}

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

float quantize8(float v) {
    v = std::clamp(v, 0.0f, 1.0f);
    return std::round(v * 255.0f) / 255.0f;
}

Tensor quantize8(const Tensor& image) {
    Tensor out = image.clone();
    for (float& v : out.data()) v = quantize8(v);
    return out;
}

void write_ppm(const std::string& path, const Tensor& image) {
    if (image.rank() != 3 || image.shape()[0] != 3) {
        throw std::invalid_argument("write_ppm: expected [3,H,W], got " + shape_str(image.shape()));
    }
    const int H = image.shape()[1];
    const int W = image.shape()[2];
    char header[64];
    snprintf(header, sizeof(header), "P6\n%d %d\n255\n", W, H);
    std::string out(header);
    out.reserve(out.size() + static_cast<std::size_t>(3) * H * W);
    auto px = image.data();
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (std::size_t p = 0; p < hw; ++p) {
        for (int ch = 0; ch < 3; ++ch) {
            const float v = std::clamp(px[ch * hw + p], 0.0f, 1.0f);
            out.push_back(static_cast<char>(std::lround(v * 255.0f)));
        }
    }
    write_file_atomic(path, out);
}

namespace {

// Skips PPM whitespace and '#' comments, then parses a decimal token.
int parse_ppm_int(const std::string& bytes, std::size_t& pos, const std::string& path) {
    while (pos < bytes.size()) {
        const char c = bytes[pos];
        if (c == '#') {
            while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
            ++pos;
        } else {
            break;
        }
    }
    if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') {
        throw std::runtime_error("malformed PPM header in " + path);
    }
    int v = 0;
    while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
        v = v * 10 + (bytes[pos] - '0');
        if (v > (1 << 20)) throw std::runtime_error("implausible PPM dimension in " + path);
        ++pos;
    }
    return v;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') {
        throw std::runtime_error(path + " is not a binary P6 pixmap");
    }
    std::size_t pos = 2;
    const int W = parse_ppm_int(bytes, pos, path);
    const int H = parse_ppm_int(bytes, pos, path);
    const int maxval = parse_ppm_int(bytes, pos, path);
    if (maxval != 255) throw std::runtime_error(path + ": only 8-bit pixmaps supported");
    ++pos;  // single whitespace after maxval
    const std::size_t need = static_cast<std::size_t>(3) * H * W;
    if (pos + need > bytes.size()) throw std::runtime_error(path + ": truncated pixel payload");

    Tensor img = Tensor::zeros({3, H, W});
    auto px = img.data();
    const std::size_t hw = static_cast<std::size_t>(H) * W;
    for (std::size_t p = 0; p < hw; ++p) {
        for (int ch = 0; ch < 3; ++ch) {
            const auto byte = static_cast<unsigned char>(bytes[pos + p * 3 + ch]);
            px[ch * hw + p] = static_cast<float>(byte) / 255.0f;
        }
    }
    return img;
}

LabeledDataset read_image_directory(const std::string& dir) {
    const std::string csv_path = dir + "/labels.csv";
    std::string csv;
    try {
        csv = read_file(csv_path);
    } catch (const std::runtime_error&) {
        throw std::runtime_error("missing or unreadable " + csv_path);
    }

    LabeledDataset ds;
    std::istringstream lines(csv);
    std::string line;
    bool first = true;
    int max_label = -1;
    std::set<int> seen;
    while (std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line != "filename,class_index") {
                throw std::runtime_error(csv_path + ": expected header filename,class_index");
            }
            continue;
        }
        const std::size_t comma = line.find(',');
        if (comma == std::string::npos) {
            throw std::runtime_error(csv_path + ": malformed row '" + line + "'");
        }
        const std::string fname = line.substr(0, comma);
        int label = 0;
        try {
            label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw std::runtime_error(csv_path + ": bad class index in row '" + line + "'");
        }
        Tensor img = read_ppm(dir + "/" + fname);
        if (!ds.images.empty() && img.shape() != ds.images[0].shape()) {
            throw std::runtime_error(fname + ": image dimensions differ from the first image");
        }
        ds.images.push_back(std::move(img));
        ds.labels.push_back(label);
        max_label = std::max(max_label, label);
        seen.insert(label);
    }
    if (ds.images.empty()) throw std::runtime_error(csv_path + ": no data rows");
    if (max_label < 0 || static_cast<int>(seen.size()) != max_label + 1) {
        throw std::runtime_error(csv_path + ": class indices not dense in [0,k)");
    }
    for (int l : ds.labels) {
        if (l < 0) throw std::runtime_error(csv_path + ": negative class index");
    }
    ds.num_classes = max_label + 1;
    ds.validate();
    return ds;
}

}  // namespace bsr
