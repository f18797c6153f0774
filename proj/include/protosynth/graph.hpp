#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <utility>
#include <vector>

namespace protosynth::graph {

using Adjacency = std::vector<std::vector<std::size_t>>;

// Tarjan's strongly connected components, iterative so deep schemas cannot
// overflow the call stack. Components come out in reverse topological order
// of the condensation; members are sorted ascending.
inline std::vector<std::vector<std::size_t>> strongly_connected_components(const Adjacency& adj) {
    constexpr std::size_t unvisited = std::numeric_limits<std::size_t>::max();
    const std::size_t n = adj.size();
    std::vector<std::size_t> index(n, unvisited), low(n, 0);
    std::vector<bool> on_stack(n, false);
    std::vector<std::size_t> stack;
    std::vector<std::vector<std::size_t>> components;
    std::size_t next_index = 0;

    struct Frame {
        std::size_t node;
        std::size_t edge;
    };
    std::vector<Frame> call;

    for (std::size_t root = 0; root < n; ++root) {
        if (index[root] != unvisited) continue;
        call.push_back({root, 0});
        index[root] = low[root] = next_index++;
        stack.push_back(root);
        on_stack[root] = true;

        while (!call.empty()) {
            Frame& f = call.back();
            if (f.edge < adj[f.node].size()) {
                const std::size_t w = adj[f.node][f.edge++];
                if (index[w] == unvisited) {
                    index[w] = low[w] = next_index++;
                    stack.push_back(w);
                    on_stack[w] = true;
                    call.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[f.node] = std::min(low[f.node], index[w]);
                }
                continue;
            }
            const std::size_t v = f.node;
            call.pop_back();
            if (!call.empty()) low[call.back().node] = std::min(low[call.back().node], low[v]);
            if (low[v] == index[v]) {
                std::vector<std::size_t> comp;
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != v);
                std::sort(comp.begin(), comp.end());
                components.push_back(std::move(comp));
            }
        }
    }
    return components;
}

inline bool has_self_loop(const Adjacency& adj, std::size_t v) {
    return std::find(adj[v].begin(), adj[v].end(), v) != adj[v].end();
}

// Components that contain at least one cycle: size > 1, or a self-loop.
inline std::vector<std::vector<std::size_t>> cyclic_components(const Adjacency& adj) {
    std::vector<std::vector<std::size_t>> out;
    for (auto& comp : strongly_connected_components(adj)) {
        if (comp.size() > 1 || has_self_loop(adj, comp.front())) out.push_back(std::move(comp));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace protosynth::graph
