#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcgpt/sokoban.hpp"

namespace pcgpt {

/// A Sokoban play position: where the player stands and where the boxes are.
/// Box positions are kept sorted so equal states compare and hash equally.
struct PlayState {
    std::pair<int, int> player;                 // (x, y)
    std::vector<std::pair<int, int>> boxes;     // sorted ascending

    bool operator==(const PlayState& o) const { return player == o.player && boxes == o.boxes; }
};

struct SolveResult {
    enum class Kind { Solved, Unsolvable, BudgetExhausted, NotAttempted };

    Kind kind = Kind::NotAttempted;
    int length = 0;          // optimal player-move count, Solved only
    std::string witness;     // move glyphs U/D/L/R, Solved only
    int nodes_expanded = 0;

    static SolveResult solved(int len, std::string moves, int nodes) {
        return {Kind::Solved, len, std::move(moves), nodes};
    }
    static SolveResult unsolvable(int nodes) { return {Kind::Unsolvable, 0, {}, nodes}; }
    static SolveResult budget_exhausted(int nodes) { return {Kind::BudgetExhausted, 0, {}, nodes}; }
    static SolveResult not_attempted() { return {}; }

    bool solved_with(int min_len) const { return kind == Kind::Solved && length >= min_len; }

    std::string to_string() const {
        switch (kind) {
            case Kind::Solved: return "Solved(" + std::to_string(length) + ")";
            case Kind::Unsolvable: return "Unsolvable";
            case Kind::BudgetExhausted: return "BudgetExhausted";
            case Kind::NotAttempted: return "NotAttempted";
        }
        return "?";
    }
};

namespace detail {

// Search-internal board: static walls/targets plus a packed dynamic state.
// Cell indices fit in 6 bits and box sets in a 64-bit mask, so a whole play
// state packs into one uint64 (boxes << 8 | player).
struct Board {
    int width = 0;
    int height = 0;
    uint64_t walls = 0;
    uint64_t targets = 0;
    std::vector<std::pair<int, int>> target_cells;

    int cells() const { return width * height; }
    bool wall(int c) const { return (walls >> c) & 1; }
};

constexpr int kMoveDx[4] = {0, 0, -1, 1};  // U, D, L, R
constexpr int kMoveDy[4] = {-1, 1, 0, 0};
constexpr char kMoveGlyph[4] = {'U', 'D', 'L', 'R'};

inline Board make_board(const LevelMap& map) {
    if (map.cell_count() > 56)
        throw std::invalid_argument("solver: grids larger than 56 cells are not supported");
    Board b;
    b.width = map.width;
    b.height = map.height;
    for (int c = 0; c < map.cell_count(); ++c) {
        const Tile t = map.tiles[static_cast<size_t>(c)];
        if (t == Tile::Wall) b.walls |= uint64_t{1} << c;
        if (t == Tile::Target) {
            b.targets |= uint64_t{1} << c;
            b.target_cells.emplace_back(c % map.width, c / map.width);
        }
    }
    return b;
}

inline uint64_t pack_state(int player_cell, uint64_t boxes) {
    return (boxes << 8) | static_cast<uint64_t>(player_cell);
}
inline int unpack_player(uint64_t s) { return static_cast<int>(s & 0xff); }
inline uint64_t unpack_boxes(uint64_t s) { return s >> 8; }

inline bool is_goal_state(const Board& b, uint64_t state) {
    const uint64_t boxes = unpack_boxes(state);
    return (boxes & ~b.targets) == 0;
}

/// Emits the packed successor reached by moving in direction `dir`, or 0 if
/// the move is illegal. (0 is never a legal packed state for a valid board
/// only when player_cell==0 and no boxes; callers use the bool return.)
inline bool step_state(const Board& b, uint64_t state, int dir, uint64_t* out) {
    const int p = unpack_player(state);
    const uint64_t boxes = unpack_boxes(state);
    const int x = p % b.width;
    const int y = p / b.width;
    const int nx = x + kMoveDx[dir];
    const int ny = y + kMoveDy[dir];
    if (nx < 0 || nx >= b.width || ny < 0 || ny >= b.height) return false;
    const int np = ny * b.width + nx;
    if (b.wall(np)) return false;
    const uint64_t np_bit = uint64_t{1} << np;
    if (boxes & np_bit) {
        const int bx = nx + kMoveDx[dir];
        const int by = ny + kMoveDy[dir];
        if (bx < 0 || bx >= b.width || by < 0 || by >= b.height) return false;
        const int bp = by * b.width + bx;
        const uint64_t bp_bit = uint64_t{1} << bp;
        if (b.wall(bp) || (boxes & bp_bit)) return false;
        *out = pack_state(np, (boxes & ~np_bit) | bp_bit);
    } else {
        *out = pack_state(np, boxes);
    }
    return true;
}

inline int manhattan(int ax, int ay, int bx, int by) {
    return std::abs(ax - bx) + std::abs(ay - by);
}

/// Sum over boxes of distance to the nearest target. Admissible: every move
/// relocates at most one box by at most one cell.
inline int heuristic(const Board& b, uint64_t state) {
    uint64_t boxes = unpack_boxes(state);
    int h = 0;
    while (boxes) {
        const int c = __builtin_ctzll(boxes);
        boxes &= boxes - 1;
        if ((b.targets >> c) & 1) continue;
        const int x = c % b.width;
        const int y = c / b.width;
        int best = std::numeric_limits<int>::max();
        for (const auto& [tx, ty] : b.target_cells) best = std::min(best, manhattan(x, y, tx, ty));
        if (best == std::numeric_limits<int>::max()) best = 0;  // no targets: goal test decides
        h += best;
    }
    return h;
}

struct VisitInfo {
    uint64_t parent;
    char move;
    int depth;
};

inline std::string reconstruct(const std::unordered_map<uint64_t, VisitInfo>& visited,
                               uint64_t goal, uint64_t root) {
    std::string moves;
    uint64_t cur = goal;
    while (cur != root) {
        const auto& info = visited.at(cur);
        moves.push_back(info.move);
        cur = info.parent;
    }
    std::reverse(moves.begin(), moves.end());
    return moves;
}

}  // namespace detail

/// Extracts the play state and target cells from a map. Requires exactly one
/// Player tile.
inline std::pair<PlayState, std::vector<std::pair<int, int>>> initial_state(const LevelMap& map) {
    PlayState state;
    std::vector<std::pair<int, int>> targets;
    int players = 0;
    for (int c = 0; c < map.cell_count(); ++c) {
        const int x = c % map.width;
        const int y = c / map.width;
        switch (map.tiles[static_cast<size_t>(c)]) {
            case Tile::Player:
                ++players;
                state.player = {x, y};
                break;
            case Tile::Box: state.boxes.emplace_back(x, y); break;
            case Tile::Target: targets.emplace_back(x, y); break;
            default: break;
        }
    }
    if (players != 1)
        throw std::invalid_argument("initial_state: map has " + std::to_string(players) +
                                    " players, expected exactly 1");
    std::sort(state.boxes.begin(), state.boxes.end());
    return {std::move(state), std::move(targets)};
}

/// Legal successor states with the move that reaches each, in U, D, L, R order.
inline std::vector<std::pair<PlayState, char>> successors(const PlayState& state,
                                                          const LevelMap& map) {
    const detail::Board board = detail::make_board(map);
    uint64_t boxes = 0;
    for (const auto& [bx, by] : state.boxes) boxes |= uint64_t{1} << (by * map.width + bx);
    const uint64_t packed =
        detail::pack_state(state.player.second * map.width + state.player.first, boxes);

    std::vector<std::pair<PlayState, char>> out;
    for (int dir = 0; dir < 4; ++dir) {
        uint64_t next = 0;
        if (!detail::step_state(board, packed, dir, &next)) continue;
        PlayState ns;
        const int p = detail::unpack_player(next);
        ns.player = {p % map.width, p / map.width};
        uint64_t nb = detail::unpack_boxes(next);
        while (nb) {
            const int c = __builtin_ctzll(nb);
            nb &= nb - 1;
            ns.boxes.emplace_back(c % map.width, c / map.width);
        }
        std::sort(ns.boxes.begin(), ns.boxes.end());
        out.emplace_back(std::move(ns), detail::kMoveGlyph[dir]);
    }
    return out;
}

namespace detail {

inline uint64_t pack_initial(const LevelMap& map) {
    const auto [state, targets] = initial_state(map);
    (void)targets;
    uint64_t boxes = 0;
    for (const auto& [bx, by] : state.boxes) boxes |= uint64_t{1} << (by * map.width + bx);
    return pack_state(state.player.second * map.width + state.player.first, boxes);
}

}  // namespace detail

/// Breadth-first search over play states. The node limit counts expanded
/// (dequeued) states. Returns the optimal move count on success.
inline SolveResult solve_bfs(const LevelMap& map, int node_limit) {
    const detail::Board board = detail::make_board(map);
    const uint64_t root = detail::pack_initial(map);

    std::unordered_map<uint64_t, detail::VisitInfo> visited;
    visited.reserve(1024);
    visited[root] = {root, '-', 0};
    std::queue<uint64_t> frontier;
    frontier.push(root);

    int expanded = 0;
    while (!frontier.empty()) {
        if (expanded >= node_limit) return SolveResult::budget_exhausted(expanded);
        const uint64_t cur = frontier.front();
        frontier.pop();
        ++expanded;
        if (detail::is_goal_state(board, cur)) {
            const int depth = visited.at(cur).depth;
            return SolveResult::solved(depth, detail::reconstruct(visited, cur, root), expanded);
        }
        for (int dir = 0; dir < 4; ++dir) {
            uint64_t next = 0;
            if (!detail::step_state(board, cur, dir, &next)) continue;
            if (visited.count(next)) continue;
            visited[next] = {cur, detail::kMoveGlyph[dir], visited.at(cur).depth + 1};
            frontier.push(next);
        }
    }
    return SolveResult::unsolvable(expanded);
}

/// A* with the nearest-target Manhattan heuristic. Ties break on lower h,
/// then insertion order, so results and node counts are deterministic.
inline SolveResult solve_astar(const LevelMap& map, int node_limit) {
    const detail::Board board = detail::make_board(map);
    const uint64_t root = detail::pack_initial(map);

    struct Entry {
        int f;
        int h;
        uint64_t seq;
        uint64_t state;
        bool operator>(const Entry& o) const {
            if (f != o.f) return f > o.f;
            if (h != o.h) return h > o.h;
            return seq > o.seq;
        }
    };

    std::unordered_map<uint64_t, detail::VisitInfo> visited;  // best-known g + parent
    visited.reserve(1024);
    visited[root] = {root, '-', 0};
    std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> open;
    uint64_t seq = 0;
    open.push({detail::heuristic(board, root), detail::heuristic(board, root), seq++, root});

    std::unordered_map<uint64_t, uint8_t> closed;
    closed.reserve(1024);

    int expanded = 0;
    while (!open.empty()) {
        if (expanded >= node_limit) return SolveResult::budget_exhausted(expanded);
        const Entry e = open.top();
        open.pop();
        if (closed.count(e.state)) continue;  // stale duplicate
        closed[e.state] = 1;
        ++expanded;
        if (detail::is_goal_state(board, e.state)) {
            const int depth = visited.at(e.state).depth;
            return SolveResult::solved(depth, detail::reconstruct(visited, e.state, root),
                                       expanded);
        }
        const int g = visited.at(e.state).depth;
        for (int dir = 0; dir < 4; ++dir) {
            uint64_t next = 0;
            if (!detail::step_state(board, e.state, dir, &next)) continue;
            if (closed.count(next)) continue;
            const int ng = g + 1;
            auto it = visited.find(next);
            if (it != visited.end() && it->second.depth <= ng) continue;
            visited[next] = {e.state, detail::kMoveGlyph[dir], ng};
            const int h = detail::heuristic(board, next);
            open.push({ng + h, h, seq++, next});
        }
    }
    return SolveResult::unsolvable(expanded);
}

/// Replays a witness move string from the map's initial state; true iff every
/// move is legal and the final state is a goal.
inline bool replay_witness(const LevelMap& map, const std::string& moves) {
    const detail::Board board = detail::make_board(map);
    uint64_t state = detail::pack_initial(map);
    for (char m : moves) {
        int dir = -1;
        for (int d = 0; d < 4; ++d)
            if (detail::kMoveGlyph[d] == m) dir = d;
        if (dir < 0) return false;
        uint64_t next = 0;
        if (!detail::step_state(board, state, dir, &next)) return false;
        state = next;
    }
    return detail::is_goal_state(board, state);
}

}  // namespace pcgpt
