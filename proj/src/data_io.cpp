#include "fpe/data_io.hpp"

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fpe/errors.hpp"

namespace fpe {

namespace {

std::vector<char> read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open: " + path);
    const std::streamsize size = in.tellg();
    in.seekg(0);
    std::vector<char> bytes(static_cast<std::size_t>(size));
    in.read(bytes.data(), size);
    if (!in) throw FormatError("read failed: " + path);
    return bytes;
}

std::uint32_t be32(const std::vector<char>& b, std::size_t off, const std::string& path) {
    if (off + 4 > b.size())
        throw FormatError(path + ": truncated at byte offset " + std::to_string(off));
    return (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) << 24) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 8) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]));
}

constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

}  // namespace

LabeledMatrixDataset load_idx(const std::string& images_path, const std::string& labels_path) {
    const std::vector<char> img = read_all(images_path);
    if (be32(img, 0, images_path) != kIdxImagesMagic)
        throw FormatError(images_path + ": bad images magic at byte offset 0");
    const std::size_t n = be32(img, 4, images_path);
    const std::size_t rows = be32(img, 8, images_path);
    const std::size_t cols = be32(img, 12, images_path);
    if (rows == 0 || cols == 0)
        throw FormatError(images_path + ": zero image dimension at byte offset 8");
    if (img.size() != 16 + n * rows * cols)
        throw FormatError(images_path + ": payload length " + std::to_string(img.size() - 16) +
                          " inconsistent with header dims at byte offset 4");

    const std::vector<char> lab = read_all(labels_path);
    if (be32(lab, 0, labels_path) != kIdxLabelsMagic)
        throw FormatError(labels_path + ": bad labels magic at byte offset 0");
    const std::size_t n_labels = be32(lab, 4, labels_path);
    if (lab.size() != 8 + n_labels)
        throw FormatError(labels_path + ": payload length inconsistent at byte offset 4");
    if (n_labels != n)
        throw FormatError(labels_path + ": label count " + std::to_string(n_labels) +
                          " != image count " + std::to_string(n));

    LabeledMatrixDataset ds;
    ds.source = "idx:" + images_path;
    const std::size_t d = rows * cols;
    ds.x = Matrix(n, d);
    for (std::size_t i = 0; i < n * d; ++i)
        ds.x.data[i] = static_cast<double>(static_cast<unsigned char>(img[16 + i])) / 255.0;
    ds.y.resize(n);
    int max_label = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ds.y[i] = static_cast<int>(static_cast<unsigned char>(lab[8 + i]));
        max_label = std::max(max_label, ds.y[i]);
    }
    ds.class_count = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

namespace {

template <typename T>
void write_le(std::ofstream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in, const std::string& path, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) throw FormatError(path + ": truncated while reading " + what);
    return value;
}

}  // namespace

void save_fpee(const LabeledMatrixDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write("FPEE", 4);
    write_le<std::uint16_t>(out, 1);
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.x.rows));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.x.cols));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(dataset.class_count));
    for (double v : dataset.x.data) write_le<float>(out, static_cast<float>(v));
    for (int label : dataset.y) write_le<std::uint32_t>(out, static_cast<std::uint32_t>(label));
    if (!out) throw FormatError("write failed: " + path);
}

LabeledMatrixDataset load_fpee(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "FPEE", 4) != 0)
        throw FormatError(path + ": bad magic at byte offset 0");
    const auto version = read_le<std::uint16_t>(in, path, "version");
    if (version != 1)
        throw FormatError(path + ": unsupported version " + std::to_string(version));
    const auto n = read_le<std::uint32_t>(in, path, "n");
    const auto d = read_le<std::uint32_t>(in, path, "d");
    const auto c = read_le<std::uint32_t>(in, path, "C");

    LabeledMatrixDataset ds;
    ds.source = "fpee:" + path;
    ds.class_count = c;
    ds.x = Matrix(n, d);
    std::vector<float> features(static_cast<std::size_t>(n) * d);
    in.read(reinterpret_cast<char*>(features.data()),
            static_cast<std::streamsize>(features.size() * sizeof(float)));
    if (!in) throw FormatError(path + ": feature payload shorter than header n*d");
    // CLIP-style embeddings are stored f32 and promoted to f64 in memory.
    for (std::size_t i = 0; i < features.size(); ++i)
        ds.x.data[i] = static_cast<double>(features[i]);
    ds.y.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto label = read_le<std::uint32_t>(in, path, "labels");
        if (label >= c)
            throw FormatError(path + ": label " + std::to_string(label) +
                              " out of range for C=" + std::to_string(c));
        ds.y[i] = static_cast<int>(label);
    }
    in.peek();
    if (!in.eof()) throw FormatError(path + ": trailing bytes after payload");
    return ds;
}

LabeledMatrixDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path + ": empty file");
    if (line.rfind("label", 0) != 0)
        throw FormatError(path + ": expected header row starting with 'label'");
    const std::size_t d = std::count(line.begin(), line.end(), ',');

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ','))
            throw FormatError(path + ": malformed line " + std::to_string(line_no));
        labels.push_back(std::stoi(cell));
        std::size_t got = 0;
        while (std::getline(ss, cell, ',')) {
            values.push_back(std::stod(cell));
            ++got;
        }
        if (got != d)
            throw FormatError(path + ": line " + std::to_string(line_no) + " has " +
                              std::to_string(got) + " features, expected " + std::to_string(d));
    }
    LabeledMatrixDataset ds;
    ds.source = "csv:" + path;
    ds.x = Matrix(labels.size(), d);
    ds.x.data = std::move(values);
    ds.y = std::move(labels);
    int max_label = 0;
    for (int label : ds.y) {
        if (label < 0) throw FormatError(path + ": negative label");
        max_label = std::max(max_label, label);
    }
    ds.class_count = static_cast<std::size_t>(max_label) + 1;
    return ds;
}

}  // namespace fpe
