#pragma once

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pcgpt/common.hpp"

namespace pcgpt {

/// Tile vocabulary. Integer codes are stable: they appear verbatim in dataset
/// files, checkpoints, and the model's item head.
enum class Tile : uint8_t { Empty = 0, Wall = 1, Player = 2, Box = 3, Target = 4 };

constexpr int kTileCount = 5;

inline char tile_glyph(Tile t) {
    switch (t) {
        case Tile::Empty: return '.';
        case Tile::Wall: return '#';
        case Tile::Player: return '@';
        case Tile::Box: return '$';
        case Tile::Target: return '*';
    }
    throw std::invalid_argument("tile_glyph: bad tile");
}

inline Tile tile_from_glyph(char c) {
    switch (c) {
        case '.': return Tile::Empty;
        case '#': return Tile::Wall;
        case '@': return Tile::Player;
        case '$': return Tile::Box;
        case '*': return Tile::Target;
    }
    throw std::invalid_argument(std::string("tile_from_glyph: bad glyph '") + c + "'");
}

inline Tile tile_from_code(int code) {
    if (code < 0 || code >= kTileCount)
        throw std::invalid_argument("tile_from_code: code " + std::to_string(code) + " out of 0..4");
    return static_cast<Tile>(code);
}

/// A rectangular tile grid, row-major. The editable state of a trajectory.
struct LevelMap {
    int width = 5;
    int height = 5;
    std::vector<Tile> tiles;  // tiles[y * width + x]

    LevelMap() : tiles(25, Tile::Empty) {}
    LevelMap(int w, int h, Tile fill = Tile::Empty) : width(w), height(h) {
        if (w < 1 || h < 1) throw std::invalid_argument("LevelMap: non-positive dimensions");
        tiles.assign(static_cast<size_t>(w) * h, fill);
    }

    int cell_count() const { return width * height; }
    bool in_bounds(int x, int y) const { return x >= 0 && x < width && y >= 0 && y < height; }
    Tile at(int x, int y) const { return tiles[static_cast<size_t>(y) * width + x]; }
    void set(int x, int y, Tile t) { tiles[static_cast<size_t>(y) * width + x] = t; }

    bool operator==(const LevelMap& o) const {
        return width == o.width && height == o.height && tiles == o.tiles;
    }
};

/// One tile edit: write `item` at (x, y). Writing the tile already present is
/// the no_action case.
struct EditAction {
    Tile item = Tile::Empty;
    int x = 0;
    int y = 0;

    bool operator==(const EditAction& o) const { return item == o.item && x == o.x && y == o.y; }
};

/// Level-acceptance thresholds shared by the reward, behavior policy, and
/// stopping criteria.
struct GoalSpec {
    int min_solution_length = 18;  // X: optimal solutions this long or longer
    int solver_node_limit = 5000;
    bool require_single_region = true;
};

/// Environment knobs needed to draw initial maps. The default tile odds keep
/// initial boxes sparse: boxes dropped into dead cells (corners, sealed edges)
/// cannot be recovered by single-tile greedy repair, so box-heavy initial maps
/// strand the editing policy on unsolvable plateaus.
struct EnvConfig {
    int width = 5;
    int height = 5;
    std::array<double, kTileCount> tile_probs = {0.65, 0.17, 0.04, 0.07, 0.07};
};

/// Draws every cell i.i.d. from `probs`. Pure function of (seed, probs).
inline LevelMap random_map(uint64_t seed, const std::array<double, kTileCount>& probs,
                           int width = 5, int height = 5) {
    double sum = 0.0;
    for (double p : probs) {
        if (p < 0.0) throw std::invalid_argument("random_map: negative tile probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("random_map: tile probabilities must sum to 1");

    Rng rng(seed);
    LevelMap map(width, height);
    for (int i = 0; i < map.cell_count(); ++i) {
        const double u = rng.uniform();
        double acc = 0.0;
        int code = kTileCount - 1;
        for (int t = 0; t < kTileCount; ++t) {
            acc += probs[static_cast<size_t>(t)];
            if (u < acc) {
                code = t;
                break;
            }
        }
        map.tiles[static_cast<size_t>(i)] = static_cast<Tile>(code);
    }
    return map;
}

inline LevelMap random_map(uint64_t seed, const EnvConfig& env) {
    return random_map(seed, env.tile_probs, env.width, env.height);
}

/// Applies one edit and reports whether the cell content changed.
/// The input map is left untouched.
inline std::pair<LevelMap, bool> apply_edit(const LevelMap& map, const EditAction& action) {
    if (!map.in_bounds(action.x, action.y))
        throw std::invalid_argument("apply_edit: location (" + std::to_string(action.x) + "," +
                                    std::to_string(action.y) + ") out of range");
    LevelMap next = map;
    const bool changed = next.at(action.x, action.y) != action.item;
    next.set(action.x, action.y, action.item);
    return {std::move(next), changed};
}

/// Number of 4-connected components of non-Wall cells.
inline int region_count(const LevelMap& map) {
    const int n = map.cell_count();
    std::vector<uint8_t> seen(static_cast<size_t>(n), 0);
    std::vector<int> stack;
    int regions = 0;
    for (int start = 0; start < n; ++start) {
        if (seen[static_cast<size_t>(start)] || map.tiles[static_cast<size_t>(start)] == Tile::Wall)
            continue;
        ++regions;
        stack.assign(1, start);
        seen[static_cast<size_t>(start)] = 1;
        while (!stack.empty()) {
            const int c = stack.back();
            stack.pop_back();
            const int x = c % map.width;
            const int y = c / map.width;
            const int dx[4] = {0, 0, -1, 1};
            const int dy[4] = {-1, 1, 0, 0};
            for (int d = 0; d < 4; ++d) {
                const int nx = x + dx[d];
                const int ny = y + dy[d];
                if (!map.in_bounds(nx, ny)) continue;
                const int nc = ny * map.width + nx;
                if (seen[static_cast<size_t>(nc)] || map.tiles[static_cast<size_t>(nc)] == Tile::Wall)
                    continue;
                seen[static_cast<size_t>(nc)] = 1;
                stack.push_back(nc);
            }
        }
    }
    return regions;
}

inline std::vector<int> encode_int_grid(const LevelMap& map) {
    std::vector<int> out;
    out.reserve(map.tiles.size());
    for (Tile t : map.tiles) out.push_back(static_cast<int>(t));
    return out;
}

inline LevelMap decode_int_grid(const std::vector<int>& codes, int width, int height) {
    if (static_cast<int>(codes.size()) != width * height)
        throw std::invalid_argument("decode_int_grid: expected " + std::to_string(width * height) +
                                    " codes, got " + std::to_string(codes.size()));
    LevelMap map(width, height);
    for (size_t i = 0; i < codes.size(); ++i) map.tiles[i] = tile_from_code(codes[i]);
    return map;
}

inline std::string render_ascii(const LevelMap& map) {
    std::string out;
    out.reserve(static_cast<size_t>(map.cell_count()) + map.height);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) out.push_back(tile_glyph(map.at(x, y)));
        if (y + 1 < map.height) out.push_back('\n');
    }
    return out;
}

inline LevelMap parse_ascii(const std::string& text) {
    std::vector<std::string> rows;
    std::string row;
    for (char c : text) {
        if (c == '\n') {
            rows.push_back(row);
            row.clear();
        } else {
            row.push_back(c);
        }
    }
    if (!row.empty()) rows.push_back(row);
    if (rows.empty()) throw std::invalid_argument("parse_ascii: empty input");
    const int height = static_cast<int>(rows.size());
    const int width = static_cast<int>(rows[0].size());
    LevelMap map(width, height);
    for (int y = 0; y < height; ++y) {
        if (static_cast<int>(rows[static_cast<size_t>(y)].size()) != width)
            throw std::invalid_argument("parse_ascii: ragged rows");
        for (int x = 0; x < width; ++x)
            map.set(x, y, tile_from_glyph(rows[static_cast<size_t>(y)][static_cast<size_t>(x)]));
    }
    return map;
}

/// Packs the tile sequence into a byte string usable as a hash-map key.
inline std::string map_key(const LevelMap& map) {
    std::string key;
    key.reserve(map.tiles.size());
    for (Tile t : map.tiles) key.push_back(static_cast<char>(t));
    return key;
}

}  // namespace pcgpt
