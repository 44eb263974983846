#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ddg/errors.hpp"
#include "ddg/rng.hpp"
#include "ddg/tensor.hpp"

namespace ddg {

struct GenerativeFactors {
    double angle_deg = 0.0;
    double thickness = 0.0;
    double dx = 0.0;
    double dy = 0.0;
};

struct Example {
    Tensor image;  // [H,W], values in [0,1]
    std::size_t label = 0;
    std::size_t domain_id = 0;
    GenerativeFactors factors;
};

struct DomainSpec {
    double angle_deg = 0.0;
};

struct Dataset {
    std::vector<DomainSpec> domains;
    std::vector<Example> examples;

    std::size_t size() const { return examples.size(); }

    std::vector<std::size_t> domain_indices(std::size_t domain_id) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < examples.size(); ++i)
            if (examples[i].domain_id == domain_id) out.push_back(i);
        return out;
    }
};

struct DatasetConfig {
    std::uint64_t seed = 0;
    std::size_t n_per_domain = 500;
    std::size_t image_size = 16;
    std::size_t glyph_classes = 5;
    std::vector<double> angles = {0, 15, 30, 45, 60, 75};
    double thickness_lo = 1.2;
    double thickness_hi = 2.2;
    double jitter_px = 1.5;

    void validate() const {
        if (n_per_domain < 1) throw ConfigError("dataset: n_per_domain must be >= 1");
        if (image_size < 4) throw ConfigError("dataset: image_size must be >= 4");
        if (glyph_classes < 2 || glyph_classes > 10)
            throw ConfigError("dataset: glyph_classes must be in [2,10]");
        if (angles.empty()) throw ConfigError("dataset: at least one domain angle required");
        for (std::size_t i = 0; i < angles.size(); ++i)
            for (std::size_t j = i + 1; j < angles.size(); ++j)
                if (angles[i] == angles[j]) throw ConfigError("dataset: duplicate domain angle");
        if (thickness_lo > thickness_hi)
            throw ConfigError("dataset: thickness range lo > hi");
        if (!(jitter_px < static_cast<double>(image_size) / 4.0))
            throw ConfigError("dataset: jitter_px must be < image_size/4");
    }
};

// ---- rotation --------------------------------------------------------------

namespace detail {

// exact permutation for quarter turns, counterclockwise positive
inline Tensor rotate_quarter(const Tensor& img, int quarter) {
    const std::size_t n = img.dim(0);
    Tensor out(img.shape());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            switch (quarter) {
                case 0: out.at(r, c) = img.at(r, c); break;
                case 1: out.at(r, c) = img.at(c, n - 1 - r); break;
                case 2: out.at(r, c) = img.at(n - 1 - r, n - 1 - c); break;
                default: out.at(r, c) = img.at(n - 1 - c, r); break;
            }
        }
    return out;
}

}  // namespace detail

// Rotation about the image center, counterclockwise. Quarter-turn angles use
// an exact index permutation; everything else is bilinear with out-of-bounds
// reads as 0 and output clamped to [0,1].
inline Tensor rotate_image(const Tensor& img, double angle_deg) {
    if (img.rank() != 2 || img.dim(0) != img.dim(1))
        throw ShapeError("rotate_image: expects a square [N,N] image, got " +
                         shape_str(img.shape()));
    const double q = angle_deg / 90.0;
    if (std::abs(q - std::round(q)) < 1e-12) {
        int quarter = static_cast<int>(std::llround(q)) % 4;
        if (quarter < 0) quarter += 4;
        return detail::rotate_quarter(img, quarter);
    }

    const std::size_t n = img.dim(0);
    const double ctr = (static_cast<double>(n) - 1.0) / 2.0;
    const double rad = angle_deg * M_PI / 180.0;
    const double co = std::cos(rad), si = std::sin(rad);
    Tensor out(img.shape());
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            // inverse map output -> source, y-axis pointing up
            const double x = static_cast<double>(c) - ctr;
            const double y = ctr - static_cast<double>(r);
            const double xs = x * co + y * si;
            const double ys = -x * si + y * co;
            const double sc = xs + ctr;
            const double sr = ctr - ys;
            const double fr = std::floor(sr), fc = std::floor(sc);
            const double wr = sr - fr, wc = sc - fc;
            auto sample = [&](double rr, double cc) -> double {
                if (rr < 0 || cc < 0 || rr >= static_cast<double>(n) ||
                    cc >= static_cast<double>(n))
                    return 0.0;
                return img.at(static_cast<std::size_t>(rr), static_cast<std::size_t>(cc));
            };
            double v = (1 - wr) * (1 - wc) * sample(fr, fc) +
                       (1 - wr) * wc * sample(fr, fc + 1) +
                       wr * (1 - wc) * sample(fr + 1, fc) +
                       wr * wc * sample(fr + 1, fc + 1);
            out.at(r, c) = std::clamp(v, 0.0, 1.0);
        }
    return out;
}

// ---- glyph rendering -------------------------------------------------------

namespace detail {

struct Segment {
    double x0, y0, x1, y1;  // unit-square coordinates
};

// One fixed line-segment glyph per class, digit-like strokes in [0.2,0.8]^2.
inline const std::vector<Segment>& glyph_template(std::size_t cls) {
    static const std::array<std::vector<Segment>, 10> templates = {{
        // 0: box
        {{0.3, 0.2, 0.7, 0.2}, {0.7, 0.2, 0.7, 0.8}, {0.7, 0.8, 0.3, 0.8}, {0.3, 0.8, 0.3, 0.2}},
        // 1: vertical stroke with flag
        {{0.5, 0.2, 0.5, 0.8}, {0.5, 0.8, 0.35, 0.65}},
        // 2: top bar, diagonal, bottom bar
        {{0.3, 0.8, 0.7, 0.8}, {0.7, 0.8, 0.3, 0.2}, {0.3, 0.2, 0.7, 0.2}},
        // 3: E mirrored
        {{0.3, 0.8, 0.7, 0.8}, {0.3, 0.5, 0.7, 0.5}, {0.3, 0.2, 0.7, 0.2}, {0.7, 0.2, 0.7, 0.8}},
        // 4: open four
        {{0.3, 0.8, 0.3, 0.5}, {0.3, 0.5, 0.7, 0.5}, {0.7, 0.8, 0.7, 0.2}},
        // 5: S-like
        {{0.7, 0.8, 0.3, 0.8}, {0.3, 0.8, 0.3, 0.5}, {0.3, 0.5, 0.7, 0.5}, {0.7, 0.5, 0.7, 0.2},
         {0.7, 0.2, 0.3, 0.2}},
        // 6: hook with lower box
        {{0.7, 0.8, 0.3, 0.8}, {0.3, 0.8, 0.3, 0.2}, {0.3, 0.2, 0.7, 0.2}, {0.7, 0.2, 0.7, 0.5},
         {0.7, 0.5, 0.3, 0.5}},
        // 7: top bar and diagonal
        {{0.3, 0.8, 0.7, 0.8}, {0.7, 0.8, 0.4, 0.2}},
        // 8: two stacked boxes (shared middle)
        {{0.3, 0.2, 0.7, 0.2}, {0.3, 0.5, 0.7, 0.5}, {0.3, 0.8, 0.7, 0.8}, {0.3, 0.2, 0.3, 0.8},
         {0.7, 0.2, 0.7, 0.8}},
        // 9: upper box with tail
        {{0.7, 0.2, 0.7, 0.8}, {0.7, 0.8, 0.3, 0.8}, {0.3, 0.8, 0.3, 0.5}, {0.3, 0.5, 0.7, 0.5}},
    }};
    return templates[cls % templates.size()];
}

inline double point_segment_dist(double px, double py, const Segment& s) {
    const double vx = s.x1 - s.x0, vy = s.y1 - s.y0;
    const double wx = px - s.x0, wy = py - s.y0;
    const double vv = vx * vx + vy * vy;
    double t = vv > 0 ? (wx * vx + wy * vy) / vv : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = px - (s.x0 + t * vx), dy = py - (s.y0 + t * vy);
    return std::sqrt(dx * dx + dy * dy);
}

// Stroke the template at the given thickness (pixels), jittered by (dx,dy)
// pixels, antialiased over roughly one pixel.
inline Tensor render_glyph(std::size_t cls, std::size_t n, double thickness_px, double dx_px,
                           double dy_px) {
    Tensor img(Shape{n, n});
    const double inv_n = 1.0 / static_cast<double>(n);
    const double half = 0.5 * thickness_px * inv_n;
    const double aa = 0.7 * inv_n;
    const auto& segs = glyph_template(cls);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c) {
            // pixel center in glyph coordinates, y up
            const double px = (static_cast<double>(c) + 0.5) * inv_n - dx_px * inv_n;
            const double py = 1.0 - (static_cast<double>(r) + 0.5) * inv_n - dy_px * inv_n;
            double v = 0.0;
            for (const auto& s : segs) {
                const double d = point_segment_dist(px, py, s);
                v = std::max(v, std::clamp((half + aa - d) / aa, 0.0, 1.0));
            }
            img.at(r, c) = v;
        }
    return img;
}

}  // namespace detail

// Deterministic synthetic dataset: per domain, n_per_domain glyphs with class
// index % glyph_classes, per-example RNG derived from (seed, domain, index).
inline Dataset generate_glyphs(const DatasetConfig& cfg) {
    cfg.validate();
    Dataset ds;
    for (double a : cfg.angles) ds.domains.push_back({a});
    ds.examples.reserve(cfg.angles.size() * cfg.n_per_domain);
    for (std::size_t d = 0; d < cfg.angles.size(); ++d) {
        for (std::size_t i = 0; i < cfg.n_per_domain; ++i) {
            auto rng = make_rng(cfg.seed, d, i);
            std::uniform_real_distribution<double> thick(cfg.thickness_lo, cfg.thickness_hi);
            std::uniform_real_distribution<double> jit(-cfg.jitter_px, cfg.jitter_px);
            Example ex;
            ex.label = i % cfg.glyph_classes;
            ex.domain_id = d;
            ex.factors.angle_deg = cfg.angles[d];
            ex.factors.thickness = thick(rng);
            ex.factors.dx = jit(rng);
            ex.factors.dy = jit(rng);
            Tensor upright = detail::render_glyph(ex.label, cfg.image_size, ex.factors.thickness,
                                                  ex.factors.dx, ex.factors.dy);
            ex.image = rotate_image(upright, cfg.angles[d]);
            ds.examples.push_back(std::move(ex));
        }
    }
    return ds;
}

// ---- stratified split ------------------------------------------------------

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction,
                                         std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        throw ConfigError("split: train_fraction must be in (0,1)");
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>> cells;
    for (std::size_t i = 0; i < ds.size(); ++i)
        cells[{ds.examples[i].domain_id, ds.examples[i].label}].push_back(i);

    Dataset train, holdout;
    train.domains = holdout.domains = ds.domains;
    std::vector<std::size_t> train_idx, hold_idx;
    for (auto& [key, idx] : cells) {
        if (idx.size() < 2)
            throw StratificationError("split: cell (domain=" + std::to_string(key.first) +
                                      ", class=" + std::to_string(key.second) +
                                      ") has fewer than 2 examples");
        auto rng = make_rng(seed, key.first, key.second);
        std::shuffle(idx.begin(), idx.end(), rng);
        auto n_train = static_cast<std::size_t>(
            std::llround(train_fraction * static_cast<double>(idx.size())));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        train_idx.insert(train_idx.end(), idx.begin(), idx.begin() + n_train);
        hold_idx.insert(hold_idx.end(), idx.begin() + n_train, idx.end());
    }
    // stable output ordering independent of cell iteration
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(hold_idx.begin(), hold_idx.end());
    for (std::size_t i : train_idx) train.examples.push_back(ds.examples[i]);
    for (std::size_t i : hold_idx) holdout.examples.push_back(ds.examples[i]);
    return {std::move(train), std::move(holdout)};
}

// ---- IDX -------------------------------------------------------------------

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const char* what) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw FormatError(std::string("IDX: truncated while reading ") + what);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

inline void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace detail

// Loads an IDX image/label pair as a single-domain dataset (angle 0).
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("IDX: cannot open " + images_path);
    std::uint32_t magic = detail::read_u32_be(imgs, "image magic");
    if (magic != 0x00000803) {
        std::ostringstream os;
        os << "IDX: bad image magic 0x" << std::hex << magic << " in " << images_path;
        throw FormatError(os.str());
    }
    const std::uint32_t count = detail::read_u32_be(imgs, "image count");
    const std::uint32_t rows = detail::read_u32_be(imgs, "rows");
    const std::uint32_t cols = detail::read_u32_be(imgs, "cols");
    const std::size_t expect = std::size_t(count) * rows * cols;
    std::vector<unsigned char> pixels(expect);
    imgs.read(reinterpret_cast<char*>(pixels.data()), static_cast<std::streamsize>(expect));
    const auto got = static_cast<std::size_t>(imgs.gcount());
    if (got != expect)
        throw FormatError("IDX: truncated image payload in " + images_path + ": expected " +
                          std::to_string(expect) + " bytes, got " + std::to_string(got));

    std::ifstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("IDX: cannot open " + labels_path);
    magic = detail::read_u32_be(labs, "label magic");
    if (magic != 0x00000801) {
        std::ostringstream os;
        os << "IDX: bad label magic 0x" << std::hex << magic << " in " << labels_path;
        throw FormatError(os.str());
    }
    const std::uint32_t lcount = detail::read_u32_be(labs, "label count");
    std::vector<unsigned char> labels(lcount);
    labs.read(reinterpret_cast<char*>(labels.data()), static_cast<std::streamsize>(lcount));
    if (static_cast<std::size_t>(labs.gcount()) != lcount)
        throw FormatError("IDX: truncated label payload in " + labels_path + ": expected " +
                          std::to_string(lcount) + " bytes, got " + std::to_string(labs.gcount()));

    if (count != lcount)
        throw ConsistencyError("IDX: " + std::to_string(count) + " images but " +
                               std::to_string(lcount) + " labels");

    Dataset ds;
    ds.domains.push_back({0.0});
    ds.examples.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        Example ex;
        ex.label = labels[i];
        ex.domain_id = 0;
        Tensor img(Shape{rows, cols});
        for (std::size_t k = 0; k < std::size_t(rows) * cols; ++k)
            img[k] = pixels[std::size_t(i) * rows * cols + k] / 255.0;
        ex.image = std::move(img);
        ds.examples.push_back(std::move(ex));
    }
    return ds;
}

// Writers for the same format (round-trip fixtures and dataset interchange).
inline void write_idx(const Dataset& ds, const std::string& images_path,
                      const std::string& labels_path) {
    if (ds.examples.empty()) throw ConfigError("write_idx: empty dataset");
    const std::size_t rows = ds.examples[0].image.dim(0);
    const std::size_t cols = ds.examples[0].image.dim(1);
    std::ofstream imgs(images_path, std::ios::binary);
    if (!imgs) throw IoError("write_idx: cannot open " + images_path);
    detail::write_u32_be(imgs, 0x00000803);
    detail::write_u32_be(imgs, static_cast<std::uint32_t>(ds.size()));
    detail::write_u32_be(imgs, static_cast<std::uint32_t>(rows));
    detail::write_u32_be(imgs, static_cast<std::uint32_t>(cols));
    for (const auto& ex : ds.examples) {
        if (ex.image.dim(0) != rows || ex.image.dim(1) != cols)
            throw ShapeError("write_idx: inconsistent image shapes");
        for (std::size_t k = 0; k < ex.image.numel(); ++k) {
            auto b = static_cast<unsigned char>(std::llround(ex.image[k] * 255.0));
            imgs.write(reinterpret_cast<char*>(&b), 1);
        }
    }
    std::ofstream labs(labels_path, std::ios::binary);
    if (!labs) throw IoError("write_idx: cannot open " + labels_path);
    detail::write_u32_be(labs, 0x00000801);
    detail::write_u32_be(labs, static_cast<std::uint32_t>(ds.size()));
    for (const auto& ex : ds.examples) {
        auto b = static_cast<unsigned char>(ex.label);
        labs.write(reinterpret_cast<char*>(&b), 1);
    }
}

// ---- PGM P5 ----------------------------------------------------------------

inline void write_pgm(const Tensor& img, const std::string& path) {
    if (img.rank() != 2) throw ShapeError("write_pgm: expects [H,W], got " + shape_str(img.shape()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("write_pgm: cannot open " + path);
    out << "P5\n" << img.dim(1) << ' ' << img.dim(0) << "\n255\n";
    for (std::size_t k = 0; k < img.numel(); ++k) {
        auto b = static_cast<unsigned char>(
            std::llround(std::clamp(img[k], 0.0, 1.0) * 255.0));
        out.write(reinterpret_cast<char*>(&b), 1);
    }
}

inline Tensor read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("read_pgm: cannot open " + path);
    std::string magic;
    in >> magic;
    if (magic != "P5") throw FormatError("read_pgm: not a P5 file: " + path);
    std::size_t w = 0, h = 0, maxv = 0;
    in >> w >> h >> maxv;
    if (!in || maxv != 255) throw FormatError("read_pgm: unsupported header in " + path);
    in.get();  // single whitespace after maxval
    Tensor img(Shape{h, w});
    std::vector<unsigned char> buf(w * h);
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(in.gcount()) != buf.size())
        throw FormatError("read_pgm: truncated payload in " + path);
    for (std::size_t k = 0; k < buf.size(); ++k) img[k] = buf[k] / 255.0;
    return img;
}

// ---- dataset directory export / import ------------------------------------

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// One subdirectory per domain, PGM per example, CSV manifest at the root.
inline void export_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("export_dataset: cannot create " + dir);
    std::ofstream manifest(dir + "/manifest.csv");
    if (!manifest) throw IoError("export_dataset: cannot open manifest in " + dir);
    manifest << "file,label,domain_id,angle_deg,thickness,dx,dy\n";
    std::vector<std::size_t> counter(ds.domains.size(), 0);
    for (const auto& ex : ds.examples) {
        const std::string sub = "domain_" + std::to_string(ex.domain_id);
        fs::create_directories(fs::path(dir) / sub, ec);
        char name[64];
        std::snprintf(name, sizeof(name), "img_%06zu.pgm", counter[ex.domain_id]++);
        const std::string rel = sub + "/" + name;
        write_pgm(ex.image, dir + "/" + rel);
        manifest << rel << ',' << ex.label << ',' << ex.domain_id << ','
                 << fmt_double(ex.factors.angle_deg) << ',' << fmt_double(ex.factors.thickness)
                 << ',' << fmt_double(ex.factors.dx) << ',' << fmt_double(ex.factors.dy) << '\n';
    }
}

inline Dataset import_dataset(const std::string& dir) {
    std::ifstream manifest(dir + "/manifest.csv");
    if (!manifest) throw IoError("import_dataset: cannot open " + dir + "/manifest.csv");
    std::string line;
    if (!std::getline(manifest, line) || line != "file,label,domain_id,angle_deg,thickness,dx,dy")
        throw FormatError("import_dataset: bad manifest header in " + dir);
    Dataset ds;
    std::map<std::size_t, double> domain_angles;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        Example ex;
        std::getline(row, field, ',');
        const std::string file = field;
        std::getline(row, field, ',');
        ex.label = std::stoul(field);
        std::getline(row, field, ',');
        ex.domain_id = std::stoul(field);
        std::getline(row, field, ',');
        ex.factors.angle_deg = std::stod(field);
        std::getline(row, field, ',');
        ex.factors.thickness = std::stod(field);
        std::getline(row, field, ',');
        ex.factors.dx = std::stod(field);
        if (!std::getline(row, field, ','))
            throw FormatError("import_dataset: short manifest row: " + line);
        ex.factors.dy = std::stod(field);
        ex.image = read_pgm(dir + "/" + file);
        domain_angles[ex.domain_id] = ex.factors.angle_deg;
        ds.examples.push_back(std::move(ex));
    }
    if (ds.examples.empty()) throw FormatError("import_dataset: empty manifest in " + dir);
    const std::size_t max_dom = domain_angles.rbegin()->first;
    ds.domains.resize(max_dom + 1);
    for (auto& [id, angle] : domain_angles) ds.domains[id] = {angle};
    return ds;
}

}  // namespace ddg
