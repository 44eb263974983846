#pragma once

#include <string>
#include <vector>

#include "ddg/dataio.hpp"
#include "ddg/models.hpp"

namespace ddg {

using ImageGrid = std::vector<std::vector<Tensor>>;

// (n+1)x(m+1) swap grid: row 0 holds the variation sources, column 0 the
// semantic sources, top-left is blank; cell (i,j) = D(h_s(sem_i) (+) h_v(var_j)).
inline ImageGrid swap_grid(ModelBundle& model, const std::vector<Tensor>& semantic_sources,
                           const std::vector<Tensor>& variation_sources) {
    if (semantic_sources.empty() || variation_sources.empty())
        throw ConfigError("swap_grid: needs at least one source image per axis");
    const std::size_t n = semantic_sources.size();
    const std::size_t m = variation_sources.size();
    ImageGrid grid(n + 1, std::vector<Tensor>(m + 1));
    grid[0][0] = Tensor(Shape{model.dims.image_h, model.dims.image_w});
    for (std::size_t j = 0; j < m; ++j) grid[0][j + 1] = variation_sources[j];
    std::vector<LatentCode> var_codes;
    for (const Tensor& v : variation_sources) var_codes.push_back(model.encode_variation(v));
    for (std::size_t i = 0; i < n; ++i) {
        grid[i + 1][0] = semantic_sources[i];
        LatentCode s = model.encode_semantic(semantic_sources[i]);
        for (std::size_t j = 0; j < m; ++j) grid[i + 1][j + 1] = model.decode(s, var_codes[j]);
    }
    return grid;
}

inline std::vector<double> default_interpolation_steps() {
    return {1.0, 0.9, 0.8, 0.7, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1};
}

namespace detail {

inline Tensor mix_codes(const Tensor& a, const Tensor& b, double i) {
    Tensor out = Tensor::zeros_like(a);
    for (std::size_t k = 0; k < a.numel(); ++k) out[k] = i * a[k] + (1.0 - i) * b[k];
    return out;
}

}  // namespace detail

// D(h_s(x) (+) (i * h_v(x) + (1-i) * h_v(x_tilde))) for each step i
inline std::vector<Tensor> interpolate_variation(ModelBundle& model, const Tensor& x,
                                                 const Tensor& x_tilde,
                                                 const std::vector<double>& steps =
                                                     default_interpolation_steps()) {
    for (double i : steps)
        if (i < 0.0 || i > 1.0)
            throw ConfigError("interpolate_variation: step outside [0,1]");
    LatentCode s = model.encode_semantic(x);
    LatentCode va = model.encode_variation(x);
    LatentCode vb = model.encode_variation(x_tilde);
    std::vector<Tensor> out;
    out.reserve(steps.size());
    for (double i : steps) {
        LatentCode mixed{CodeKind::variation, detail::mix_codes(va.values, vb.values, i)};
        out.push_back(model.decode(s, mixed));
    }
    return out;
}

// mirror image: semantic codes interpolated, variation fixed to h_v(x)
inline std::vector<Tensor> interpolate_semantic(ModelBundle& model, const Tensor& x,
                                                const Tensor& x_tilde,
                                                const std::vector<double>& steps =
                                                    default_interpolation_steps()) {
    for (double i : steps)
        if (i < 0.0 || i > 1.0)
            throw ConfigError("interpolate_semantic: step outside [0,1]");
    LatentCode sa = model.encode_semantic(x);
    LatentCode sb = model.encode_semantic(x_tilde);
    LatentCode v = model.encode_variation(x);
    std::vector<Tensor> out;
    out.reserve(steps.size());
    for (double i : steps) {
        LatentCode mixed{CodeKind::semantic, detail::mix_codes(sa.values, sb.values, i)};
        out.push_back(model.decode(mixed, v));
    }
    return out;
}

// Tiles cells into one PGM with 1-px separators at max gray.
inline Tensor assemble_grid(const ImageGrid& grid) {
    if (grid.empty() || grid[0].empty()) throw ConfigError("export_grid: empty grid");
    const std::size_t rows = grid.size(), cols = grid[0].size();
    const std::size_t h = grid[0][0].dim(0), w = grid[0][0].dim(1);
    for (const auto& row : grid) {
        if (row.size() != cols) throw ShapeError("export_grid: ragged grid");
        for (const auto& cell : row)
            if (cell.rank() != 2 || cell.dim(0) != h || cell.dim(1) != w)
                throw ShapeError("export_grid: inconsistent cell shapes");
    }
    Tensor out(Shape{rows * h + (rows - 1), cols * w + (cols - 1)});
    out.fill(1.0);  // separators render at max gray
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t c = 0; c < w; ++c)
                    out.at(i * (h + 1) + r, j * (w + 1) + c) = grid[i][j].at(r, c);
    return out;
}

inline void export_grid(const ImageGrid& grid, const std::string& path) {
    write_pgm(assemble_grid(grid), path);
}

}  // namespace ddg
