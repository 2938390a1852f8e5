#include "caae/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "caae/networks.hpp"

namespace fs = std::filesystem;

namespace caae {

namespace {
// Upper edge (inclusive) of each age bin.
constexpr int kBinUpper[kNumAgeBins] = {5, 10, 15, 20, 30, 40, 50, 60, 70, 80};
}  // namespace

int age_to_bin(Real age_years) {
    if (!(age_years >= 0.0)) throw ValidationError("age must be non-negative");
    const Real floored = std::floor(age_years);
    for (int b = 0; b < kNumAgeBins; ++b)
        if (floored <= static_cast<Real>(kBinUpper[b])) return b;
    return kNumAgeBins - 1;  // clamp above 80
}

Tensor bin_to_label(int bin_index) {
    if (bin_index < 0 || bin_index >= kNumAgeBins)
        throw ValidationError("bin index out of range [0,9]: " + std::to_string(bin_index));
    Tensor l = Tensor::full({kNumAgeBins}, -1.0);
    l[bin_index] = 1.0;
    return l;
}

bool is_valid_label(const Tensor& label) {
    if (label.numel() != kNumAgeBins) return false;
    int ones = 0;
    for (int i = 0; i < kNumAgeBins; ++i) {
        if (label[i] == 1.0)
            ++ones;
        else if (label[i] != -1.0)
            return false;
    }
    return ones == 1;
}

Tensor normalize_image(const Tensor& raw) {
    Tensor out(raw.shape());
    for (int64_t i = 0; i < raw.numel(); ++i) {
        if (!(raw[i] >= 0.0 && raw[i] <= 255.0))
            throw ValidationError("normalize_image: value outside [0,255]");
        out[i] = raw[i] / 127.5 - 1.0;
    }
    return out;
}

Tensor normalize_image(const RawImage& raw) {
    Tensor out({raw.h, raw.w, raw.c});
    for (int64_t i = 0; i < out.numel(); ++i)
        out[i] = static_cast<Real>(raw.px[static_cast<size_t>(i)]) / 127.5 - 1.0;
    return out;
}

RawImage denormalize_image(const Tensor& img) {
    if (img.ndim() != 3) throw ValidationError("denormalize_image: expected (H,W,C)");
    RawImage out;
    out.h = img.dim(0);
    out.w = img.dim(1);
    out.c = img.dim(2);
    out.px.resize(static_cast<size_t>(img.numel()));
    for (int64_t i = 0; i < img.numel(); ++i) {
        const Real v = std::floor((img[i] + 1.0) * 127.5 + 0.5);  // round half up
        out.px[static_cast<size_t>(i)] =
            static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

std::vector<DatasetRecord> load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path);
    const fs::path base = fs::path(path).parent_path();
    std::vector<DatasetRecord> records;
    std::vector<std::string> errors;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto fail = [&](const std::string& msg) {
            errors.push_back("line " + std::to_string(lineno) + ": " + msg);
        };
        nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            fail("malformed JSON object");
            continue;
        }
        if (!j.contains("path") || !j["path"].is_string()) {
            fail("missing field \"path\"");
            continue;
        }
        if (!j.contains("age") || !j["age"].is_number()) {
            fail("missing field \"age\"");
            continue;
        }
        DatasetRecord rec;
        rec.age_years = j["age"].get<Real>();
        if (rec.age_years < 0.0) {
            fail("negative age");
            continue;
        }
        fs::path p = j["path"].get<std::string>();
        rec.image_path = p.is_absolute() ? p.string() : (base / p).string();
        if (j.contains("split")) {
            const std::string s = j["split"].is_string() ? j["split"].get<std::string>() : "";
            if (s == "train")
                rec.split = Split::kTrain;
            else if (s == "eval")
                rec.split = Split::kEval;
            else {
                fail("invalid split value");
                continue;
            }
        }
        records.push_back(std::move(rec));
    }
    if (!errors.empty()) {
        std::ostringstream os;
        os << "manifest " << path << " has " << errors.size() << " invalid line(s):";
        for (const auto& e : errors) os << "\n  " << e;
        throw ValidationError(os.str());
    }
    return records;
}

// ------------------------------------------------------------- synth faces

namespace {

struct Palette {
    std::vector<Real> bg, head, dark;
};

Palette palette(int channels) {
    if (channels == 1) return {{-0.80}, {0.45}, {-0.65}};
    return {{-0.85, -0.80, -0.75}, {0.55, 0.35, 0.15}, {-0.65, -0.70, -0.70}};
}

void paint(Tensor& img, int y, int x, const std::vector<Real>& color) {
    const int h = img.dim(0), w = img.dim(1), c = img.dim(2);
    if (y < 0 || y >= h || x < 0 || x >= w) return;
    for (int ci = 0; ci < c; ++ci)
        img[(static_cast<int64_t>(y) * w + x) * c + ci] = color[static_cast<size_t>(ci)];
}

// One face; geometry is fixed relative to a 64-pixel canvas so that the
// wrinkle oracle's scan bands stay clear of the eyes and mouth.
Tensor render_face(int size, int channels, int stripes, Real cx, Real cy, Real a, Real b) {
    const Palette pal = palette(channels);
    const Real scale = static_cast<Real>(size) / 64.0;
    Tensor img({size, size, channels});
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) paint(img, y, x, pal.bg);

    auto inside = [&](int x, int y, Real margin) {
        const Real dx = (static_cast<Real>(x) - cx) / a;
        const Real dy = (static_cast<Real>(y) - cy) / b;
        return dx * dx + dy * dy <= margin;
    };
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            if (inside(x, y, 1.0)) paint(img, y, x, pal.head);

    // Wrinkles: `stripes` horizontal bars, 2px thick with 2px gaps at
    // 64px scale, centered vertically on the head.
    const int t = std::max(1, static_cast<int>(std::lround(2.0 * scale)));
    if (stripes > 0) {
        const int block = stripes * t + (stripes - 1) * t;
        const int top = static_cast<int>(std::lround(cy)) - block / 2;
        for (int s = 0; s < stripes; ++s) {
            const int y0 = top + s * 2 * t;
            for (int y = y0; y < y0 + t; ++y)
                for (int x = 0; x < size; ++x)
                    if (inside(x, y, 0.94)) paint(img, y, x, pal.dark);
        }
    }

    // Eyes above the wrinkle band, mouth below it.
    const Real eye_y = cy - 21.0 * scale, eye_r = 1.5 * scale;
    for (Real sgn : {-1.0, 1.0}) {
        const Real ex = cx + sgn * 0.30 * a;
        for (int y = static_cast<int>(eye_y - eye_r); y <= static_cast<int>(eye_y + eye_r) + 1;
             ++y)
            for (int x = static_cast<int>(ex - eye_r); x <= static_cast<int>(ex + eye_r) + 1;
                 ++x) {
                const Real dx = x - ex, dy = y - eye_y;
                if (dx * dx + dy * dy <= eye_r * eye_r && inside(x, y, 1.0))
                    paint(img, y, x, pal.dark);
            }
    }
    const int m0 = static_cast<int>(std::lround(cy + 20.0 * scale));
    const int m1 = static_cast<int>(std::lround(cy + 22.0 * scale));
    for (int y = m0; y < m1; ++y)
        for (int x = static_cast<int>(cx - 0.28 * a); x <= static_cast<int>(cx + 0.28 * a); ++x)
            if (inside(x, y, 1.0)) paint(img, y, x, pal.dark);
    return img;
}

}  // namespace

std::vector<std::pair<Tensor, Real>> synth_faces(int count, int image_size, uint64_t seed,
                                                 int channels) {
    if (count <= 0) throw ValidationError("synth_faces: count must be positive");
    if (image_size < 16 || image_size % 16 != 0)
        throw ValidationError("synth_faces: image_size must be a positive multiple of 16");
    if (channels != 1 && channels != 3)
        throw ValidationError("synth_faces: channels must be 1 or 3");
    const Real scale = static_cast<Real>(image_size) / 64.0;
    Rng rng(mix_seed(seed, 0x73796e7468666163ULL));
    std::vector<std::pair<Tensor, Real>> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) {
        const int bin = i % kNumAgeBins;
        const int lo = bin == 0 ? 0 : kBinUpper[bin - 1] + 1;
        const Real age = static_cast<Real>(lo + static_cast<int>(rng.below(
                                                    static_cast<uint64_t>(kBinUpper[bin] - lo + 1))));
        const Real cx = (32.0 + static_cast<Real>(rng.below(5)) - 2.0) * scale;
        const Real cy = (32.0 + static_cast<Real>(rng.below(5)) - 2.0) * scale;
        const Real a = (23.0 + static_cast<Real>(rng.below(5)) - 2.0) * scale;
        const Real b = 27.0 * scale;
        out.emplace_back(render_face(image_size, channels, bin, cx, cy, a, b), age);
    }
    return out;
}

// ----------------------------------------------------------------- Dataset

Dataset::Dataset(int image_size, int channels) : image_size_(image_size), channels_(channels) {
    if (image_size < 16 || image_size % 16 != 0)
        throw ValidationError("Dataset: image_size must be a positive multiple of 16");
    if (channels != 1 && channels != 3) throw ValidationError("Dataset: channels must be 1 or 3");
}

void Dataset::add(const RawImage& img, Real age_years) {
    if (img.h != image_size_ || img.w != image_size_ || img.c != channels_)
        throw ValidationError("Dataset::add: image is " + std::to_string(img.w) + "x" +
                              std::to_string(img.h) + "x" + std::to_string(img.c) +
                              ", dataset expects " + std::to_string(image_size_) + "x" +
                              std::to_string(image_size_) + "x" + std::to_string(channels_));
    if (age_years < 0.0) throw ValidationError("Dataset::add: negative age");
    pixels_.push_back(img.px);
    ages_.push_back(age_years);
}

Dataset Dataset::from_manifest(const std::string& manifest_path, int image_size, int channels,
                               Split split) {
    Dataset ds(image_size, channels);
    for (const auto& rec : load_manifest(manifest_path)) {
        if (rec.split != split) continue;
        ds.add(read_image(rec.image_path, channels), rec.age_years);
    }
    return ds;
}

Dataset Dataset::from_synth(int count, int image_size, uint64_t seed, int channels) {
    Dataset ds(image_size, channels);
    for (const auto& [img, age] : synth_faces(count, image_size, seed, channels))
        ds.add(denormalize_image(img), age);
    return ds;
}

Tensor Dataset::image(int i) const {
    const auto& px = pixels_[static_cast<size_t>(i)];
    Tensor out({image_size_, image_size_, channels_});
    for (int64_t k = 0; k < out.numel(); ++k)
        out[k] = static_cast<Real>(px[static_cast<size_t>(k)]) / 127.5 - 1.0;
    return out;
}

// ------------------------------------------------------------- BatchStream

BatchStream::BatchStream(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch)
    : ds_(ds), batch_size_(batch_size) {
    if (ds.size() == 0) throw ValidationError("make_batches: empty dataset");
    if (batch_size < 1) throw ValidationError("make_batches: batch_size must be >= 1");
    order_.resize(static_cast<size_t>(ds.size()));
    for (int i = 0; i < ds.size(); ++i) order_[static_cast<size_t>(i)] = i;
    Rng rng(mix_seed(seed, static_cast<uint64_t>(epoch) ^ 0x626174636873ULL));
    rng.shuffle(order_);
    count_ = ds.size() / batch_size;  // short final batch dropped
}

Batch BatchStream::batch(int i) const {
    if (i < 0 || i >= count_) throw ValidationError("BatchStream::batch: index out of range");
    const int s = ds_.image_size(), c = ds_.channels();
    Batch b;
    b.images = Tensor({batch_size_, s, s, c});
    b.labels = Tensor({batch_size_, kNumAgeBins});
    const int64_t per = static_cast<int64_t>(s) * s * c;
    for (int k = 0; k < batch_size_; ++k) {
        const int idx = order_[static_cast<size_t>(i) * batch_size_ + k];
        Tensor img = ds_.image(idx);
        std::copy(img.data(), img.data() + per, b.images.data() + k * per);
        Tensor l = bin_to_label(age_to_bin(ds_.age(idx)));
        for (int j = 0; j < kNumAgeBins; ++j) b.labels.at(k, j) = l[j];
    }
    return b;
}

BatchStream make_batches(const Dataset& ds, int batch_size, uint64_t seed, int64_t epoch) {
    return BatchStream(ds, batch_size, seed, epoch);
}

}  // namespace caae
