#include "caae/image_io.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "caae/tensor.hpp"

namespace caae {

RawImage read_image(const std::string& path, int channels) {
    if (channels != 1 && channels != 3)
        throw ValidationError("read_image: channels must be 1 or 3");
    cv::Mat m = cv::imread(path, channels == 1 ? cv::IMREAD_GRAYSCALE : cv::IMREAD_COLOR);
    if (m.empty()) throw IoError("cannot decode image: " + path);
    RawImage img;
    img.h = m.rows;
    img.w = m.cols;
    img.c = channels;
    img.px.resize(static_cast<size_t>(m.rows) * m.cols * channels);
    for (int y = 0; y < m.rows; ++y)
        for (int x = 0; x < m.cols; ++x) {
            if (channels == 1) {
                img.at(y, x, 0) = m.at<uint8_t>(y, x);
            } else {
                const cv::Vec3b bgr = m.at<cv::Vec3b>(y, x);
                img.at(y, x, 0) = bgr[2];
                img.at(y, x, 1) = bgr[1];
                img.at(y, x, 2) = bgr[0];
            }
        }
    return img;
}

void write_png(const std::string& path, const RawImage& img) {
    if (img.c != 1 && img.c != 3) throw ValidationError("write_png: channels must be 1 or 3");
    cv::Mat m(img.h, img.w, img.c == 1 ? CV_8UC1 : CV_8UC3);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            if (img.c == 1)
                m.at<uint8_t>(y, x) = img.at(y, x, 0);
            else
                m.at<cv::Vec3b>(y, x) =
                    cv::Vec3b(img.at(y, x, 2), img.at(y, x, 1), img.at(y, x, 0));
        }
    if (!cv::imwrite(path, m)) throw IoError("cannot write image: " + path);
}

}  // namespace caae
