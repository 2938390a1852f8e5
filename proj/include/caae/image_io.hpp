#ifndef CAAE_IMAGE_IO_HPP
#define CAAE_IMAGE_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace caae {

// 8-bit interleaved raster, RGB channel order (or single gray channel).
struct RawImage {
    int h = 0;
    int w = 0;
    int c = 0;
    std::vector<uint8_t> px;

    uint8_t at(int y, int x, int ci) const {
        return px[(static_cast<size_t>(y) * w + x) * c + ci];
    }
    uint8_t& at(int y, int x, int ci) {
        return px[(static_cast<size_t>(y) * w + x) * c + ci];
    }
};

// Decodes PNG or JPEG; converts to the requested channel count (1 or 3).
RawImage read_image(const std::string& path, int channels);
void write_png(const std::string& path, const RawImage& img);

}  // namespace caae

#endif
