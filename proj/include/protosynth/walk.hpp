#pragma once

#include <string>

#include "protosynth/message.hpp"
#include "protosynth/schema.hpp"

namespace protosynth {

// Value observed at a folded path. `field` describes the value (the map
// key/value field for map roles); `in_container` is true under any repeated or
// map segment along the path.
struct ValueEvent {
    const std::string& path;
    const FieldInfo& field;
    const Value& value;
    bool in_container;
};

// Walks a message tree, reporting values at folded field paths (see
// PathBranch). Paths deeper than max_depth segments are not reported.
//
// Visitor interface:
//   void node(const std::string& prefix, const Message& m);
//   void value(const ValueEvent& e);            // scalars and messages alike
//   void missing(const std::string& path, const FieldInfo& f, bool in_container);
//   void size(const std::string& path, const FieldInfo& f, std::size_t n);
template <class Visitor>
class InstanceWalker {
public:
    InstanceWalker(Visitor& v, std::size_t max_depth) : v_(v), max_depth_(max_depth) {}

    void walk(const Message& root) {
        branch_ = PathBranch{};
        branch_.enter(root.type, "");
        visit(root, "", false);
        branch_.leave();
    }

private:
    void descend(const Message& child, const std::string& path, bool in_container) {
        if (path_depth(path) >= max_depth_) return;
        const std::string prefix = branch_.enter(child.type, path);
        visit(child, prefix, in_container);
        branch_.leave();
    }

    void visit(const Message& m, const std::string& prefix, bool in_container) {
        v_.node(prefix, m);
        for (const auto& f : m.type->fields) {
            const auto& vals = m.fields[f.index];
            if (f.is_map()) {
                const auto& entry = *f.message_type;
                const std::string kp = join_path(prefix, map_key_segment(f));
                const std::string vp = join_path(prefix, map_value_segment(f));
                v_.size(kp, f, vals.size());
                for (const auto& e : vals) {
                    const auto& em = *std::get<MessagePtr>(e);
                    const auto& kv = em.fields[0];
                    const auto& vv = em.fields[1];
                    if (!kv.empty()) v_.value(ValueEvent{kp, entry.key_field(), kv.front(), true});
                    if (vv.empty()) {
                        v_.missing(vp, entry.value_field(), true);
                        continue;
                    }
                    v_.value(ValueEvent{vp, entry.value_field(), vv.front(), true});
                    if (entry.value_field().is_message()) descend(*std::get<MessagePtr>(vv.front()), vp, true);
                }
                continue;
            }
            const std::string path = join_path(prefix, field_segment(f));
            if (f.is_repeated()) {
                v_.size(path, f, vals.size());
                for (const auto& x : vals) {
                    v_.value(ValueEvent{path, f, x, true});
                    if (f.is_message()) descend(*std::get<MessagePtr>(x), path, true);
                }
                continue;
            }
            if (vals.empty()) {
                v_.missing(path, f, in_container);
                continue;
            }
            v_.value(ValueEvent{path, f, vals.front(), in_container});
            if (f.is_message()) descend(*std::get<MessagePtr>(vals.front()), path, in_container);
        }
    }

    Visitor& v_;
    std::size_t max_depth_;
    PathBranch branch_;
};

template <class Visitor>
void walk_instance(const Message& root, std::size_t max_depth, Visitor& v) {
    InstanceWalker<Visitor>(v, max_depth).walk(root);
}

}  // namespace protosynth
