#include "specfission/task_graph.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

using nlohmann::json;

namespace {

void put_u32(std::string& out, uint32_t n) {
    for (int i = 0; i < 4; ++i) out.push_back(char((n >> (8 * i)) & 0xff));
}

void put_str(std::string& out, const std::string& s) {
    put_u32(out, static_cast<uint32_t>(s.size()));
    out += s;
}

} // namespace

Fingerprint fingerprint_node(const TaskNode& node, const std::vector<Fingerprint>& input_fps) {
    std::string enc;
    switch (node.kind) {
    case TaskNode::Kind::Url:
        enc.push_back('U');
        put_str(enc, node.url);
        put_str(enc, node.format);
        break;
    case TaskNode::Kind::Inline: {
        enc.push_back('I');
        fingerprint_bytes(serialize_table(*node.table)).append_bytes(enc);
        break;
    }
    case TaskNode::Kind::Signal:
        enc.push_back('S');
        encode_value(node.value, enc);
        break;
    case TaskNode::Kind::Transform:
        enc.push_back('T');
        put_str(enc, node.op);
        put_str(enc, node.params.dump());
        put_u32(enc, static_cast<uint32_t>(input_fps.size()));
        for (const auto& fp : input_fps) fp.append_bytes(enc);
        break;
    }
    return fingerprint_bytes(enc);
}

std::vector<Fingerprint> fingerprint_graph(const std::vector<TaskNode>& nodes) {
    std::map<int, size_t> pos;
    for (size_t i = 0; i < nodes.size(); ++i) pos[nodes[i].id] = i;
    std::vector<Fingerprint> fps(nodes.size());
    for (size_t i = 0; i < nodes.size(); ++i) {
        std::vector<Fingerprint> input_fps;
        for (int in : nodes[i].inputs) input_fps.push_back(fps[pos.at(in)]);
        fps[i] = fingerprint_node(nodes[i], input_fps);
    }
    return fps;
}

// ---------------------------------------------------------------------------
// Lowering

namespace {

class GraphBuilder {
  public:
    int add(TaskNode node) {
        std::vector<Fingerprint> input_fps;
        for (int in : node.inputs) input_fps.push_back(fps_[in]);
        Fingerprint fp = fingerprint_node(node, input_fps);
        auto it = seen_.find(fp);
        if (it != seen_.end()) return it->second;
        node.id = static_cast<int>(nodes_.size());
        nodes_.push_back(std::move(node));
        fps_.push_back(fp);
        seen_[fp] = nodes_.back().id;
        return nodes_.back().id;
    }

    std::vector<TaskNode> nodes_;
    std::vector<Fingerprint> fps_;
    std::map<Fingerprint, int> seen_;
};

} // namespace

LoweredGraph lower(const ServerSpec& spec, const std::map<std::string, Value>& signal_values) {
    GraphBuilder b;
    std::map<std::string, int> value_nodes; // extent-declared name -> node id
    std::map<std::string, int> exports;

    for (const auto& sd : spec.datasets) {
        int cur;
        if (const auto* url = std::get_if<UrlSource>(&sd.source)) {
            TaskNode n;
            n.kind = TaskNode::Kind::Url;
            n.url = url->url;
            n.format = url->format;
            cur = b.add(std::move(n));
        } else if (const auto* inl = std::get_if<InlineSource>(&sd.source)) {
            TaskNode n;
            n.kind = TaskNode::Kind::Inline;
            n.table = std::make_shared<Table>(table_from_json_rows(inl->values));
            cur = b.add(std::move(n));
        } else {
            throw Error(ErrorCode::InvariantViolation,
                        "server dataset '" + sd.export_name + "' has no materializable source");
        }

        for (const auto& step : sd.transforms) {
            json params = canonicalize_step_params(step.op, step.params);
            if (step.op == "extent") {
                std::string declared;
                if (params.contains("signal")) {
                    declared = params.at("signal").get<std::string>();
                    params.erase("signal"); // the declared name is binding, not content
                }
                TaskNode n;
                n.kind = TaskNode::Kind::Transform;
                n.op = step.op;
                n.params = params;
                n.inputs = {cur};
                int vid = b.add(std::move(n));
                if (!declared.empty()) value_nodes[declared] = vid;
                continue; // the table flows through unchanged
            }
            std::vector<int> inputs = {cur};
            for (const auto& sig : step_signal_refs(step.op, params)) {
                auto dv = value_nodes.find(sig);
                if (dv != value_nodes.end()) {
                    inputs.push_back(dv->second);
                    continue;
                }
                auto sv = signal_values.find(sig);
                if (sv == signal_values.end())
                    throw Error(ErrorCode::UnboundSignal,
                                "no value for signal '" + sig + "'");
                TaskNode sn;
                sn.kind = TaskNode::Kind::Signal;
                sn.name = sig;
                sn.value = sv->second;
                inputs.push_back(b.add(std::move(sn)));
            }
            TaskNode n;
            n.kind = TaskNode::Kind::Transform;
            n.op = step.op;
            n.params = std::move(params);
            n.inputs = std::move(inputs);
            cur = b.add(std::move(n));
        }
        exports[sd.export_name] = cur;
    }
    LoweredGraph g;
    g.nodes = std::move(b.nodes_);
    g.fps = std::move(b.fps_);
    g.exports = std::move(exports);
    return g;
}

Query LoweredGraph::make_query(const std::vector<std::string>& requested_exports,
                               std::map<std::string, int>* export_ids) const {
    // Ancestor closure of the requested exports.
    std::vector<bool> needed(nodes.size(), false);
    std::vector<int> stack;
    for (const auto& name : requested_exports) stack.push_back(exports.at(name));
    while (!stack.empty()) {
        int id = stack.back();
        stack.pop_back();
        if (needed[id]) continue;
        needed[id] = true;
        for (int in : nodes[id].inputs) stack.push_back(in);
    }
    Query q;
    std::map<int, int> remap;
    for (size_t i = 0; i < nodes.size(); ++i) {
        if (!needed[i]) continue;
        TaskNode n = nodes[i];
        int new_id = static_cast<int>(q.nodes.size());
        remap[n.id] = new_id;
        n.id = new_id;
        for (auto& in : n.inputs) in = remap.at(in);
        q.nodes.push_back(std::move(n));
    }
    std::set<int> req;
    for (const auto& name : requested_exports) {
        int id = remap.at(exports.at(name));
        if (export_ids) (*export_ids)[name] = id;
        req.insert(id);
    }
    q.requested.assign(req.begin(), req.end());
    return q;
}

// ---------------------------------------------------------------------------
// Wire form

json query_to_json(const Query& q) {
    json graph = json::array();
    for (const auto& n : q.nodes) {
        json obj{{"id", n.id}};
        switch (n.kind) {
        case TaskNode::Kind::Url:
            obj["kind"] = "url";
            obj["url"] = n.url;
            obj["format"] = n.format;
            break;
        case TaskNode::Kind::Inline:
            obj["kind"] = "inline";
            obj["table"] = table_to_json(*n.table);
            break;
        case TaskNode::Kind::Signal:
            obj["kind"] = "signal";
            obj["name"] = n.name;
            obj["value"] = value_to_json(n.value);
            break;
        case TaskNode::Kind::Transform:
            obj["kind"] = "transform";
            obj["op"] = n.op;
            obj["params"] = n.params;
            obj["inputs"] = n.inputs;
            break;
        }
        graph.push_back(std::move(obj));
    }
    return {{"type", "query"}, {"graph", std::move(graph)}, {"request", q.requested}};
}

Query query_from_json(const json& j) {
    auto malformed = [](const std::string& msg) -> Error {
        return Error(ErrorCode::MalformedRequest, msg);
    };
    if (!j.is_object() || j.value("type", "") != "query") throw malformed("not a query message");
    if (!j.contains("graph") || !j.at("graph").is_array()) throw malformed("missing graph");
    Query q;
    std::set<int> ids;
    for (const auto& nj : j.at("graph")) {
        if (!nj.is_object() || !nj.contains("id") || !nj.contains("kind"))
            throw malformed("graph node needs id and kind");
        TaskNode n;
        n.id = nj.at("id").get<int>();
        if (!ids.insert(n.id).second) throw malformed("duplicate node id");
        std::string kind = nj.at("kind").get<std::string>();
        try {
            if (kind == "url") {
                n.kind = TaskNode::Kind::Url;
                n.url = nj.at("url").get<std::string>();
                n.format = nj.value("format", "csv");
            } else if (kind == "inline") {
                n.kind = TaskNode::Kind::Inline;
                n.table = std::make_shared<Table>(table_from_json(nj.at("table")));
            } else if (kind == "signal") {
                n.kind = TaskNode::Kind::Signal;
                n.name = nj.at("name").get<std::string>();
                n.value = value_from_json(nj.at("value"));
            } else if (kind == "transform") {
                n.kind = TaskNode::Kind::Transform;
                n.op = nj.at("op").get<std::string>();
                n.params = nj.value("params", json::object());
                for (const auto& in : nj.at("inputs")) {
                    int id = in.get<int>();
                    if (!ids.count(id))
                        throw malformed("input references a later or unknown node");
                    n.inputs.push_back(id);
                }
            } else {
                throw malformed("unknown node kind '" + kind + "'");
            }
        } catch (const json::exception& e) {
            throw malformed(std::string("bad node: ") + e.what());
        } catch (const Error& e) {
            if (e.code() == ErrorCode::MalformedRequest) throw;
            throw malformed(std::string("bad node: ") + e.what());
        }
        q.nodes.push_back(std::move(n));
    }
    if (j.contains("request")) {
        for (const auto& r : j.at("request")) {
            int id = r.get<int>();
            if (!ids.count(id)) throw malformed("requested id not in graph");
            q.requested.push_back(id);
        }
    }
    return q;
}

} // namespace specfission
