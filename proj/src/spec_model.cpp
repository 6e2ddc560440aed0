#include "specfission/spec_model.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

using nlohmann::json;

std::optional<std::string> TransformSpec::declared_signal() const {
    if (op == "extent" && params.contains("signal") && params.at("signal").is_string())
        return params.at("signal").get<std::string>();
    return std::nullopt;
}

SignalDef SignalDef::make(const std::string& name, const Value& initial) {
    SignalDef s;
    s.name = name;
    s.initial = initial;
    s.raw = json{{"name", name}, {"value", value_to_json(initial)}};
    return s;
}

const DatasetDef* VisSpec::find_dataset(const std::string& name) const {
    for (const auto& d : datasets)
        if (d.name == name) return &d;
    return nullptr;
}

const SignalDef* VisSpec::find_signal(const std::string& name) const {
    for (const auto& s : signals)
        if (s.name == name) return &s;
    return nullptr;
}

std::map<std::string, std::pair<std::string, int>> VisSpec::derived_signals() const {
    std::map<std::string, std::pair<std::string, int>> out;
    for (const auto& d : datasets) {
        for (size_t k = 0; k < d.transforms.size(); ++k) {
            if (auto sig = d.transforms[k].declared_signal())
                out[*sig] = {d.name, static_cast<int>(k) + 1};
        }
    }
    return out;
}

std::string DepNode::str() const {
    if (kind == Kind::Signal) return "signal(" + name + ")";
    return name + "[" + std::to_string(step) + "]";
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

std::string infer_format_from_url(const std::string& url) {
    auto dot = url.find_last_of('.');
    if (dot != std::string::npos) {
        std::string ext = url.substr(dot + 1);
        if (ext == "csv") return "csv";
        if (ext == "json") return "json";
    }
    return "json"; // the dialect's default format
}

TransformSpec parse_transform(const json& t) {
    if (!t.is_object() || !t.contains("type") || !t.at("type").is_string())
        throw Error(ErrorCode::MalformedDocument, "transform entry missing \"type\"");
    TransformSpec ts;
    ts.op = t.at("type").get<std::string>();
    ts.params = json::object();
    for (auto it = t.begin(); it != t.end(); ++it)
        if (it.key() != "type") ts.params[it.key()] = it.value();
    for (const auto& [path, text] : expression_params(ts.op, ts.params)) {
        try {
            ts.parsed_exprs.emplace_back(path, parse_expression(text));
        } catch (const Error&) {
            // Not fatal: the step simply cannot be planned to the server.
            ts.unparsed.push_back(path);
        }
    }
    return ts;
}

DatasetDef parse_dataset(const json& d) {
    if (!d.is_object() || !d.contains("name") || !d.at("name").is_string())
        throw Error(ErrorCode::MalformedDocument, "data entry missing \"name\"");
    DatasetDef def;
    def.name = d.at("name").get<std::string>();

    int sources = int(d.contains("url")) + int(d.contains("values")) + int(d.contains("source"));
    if (sources > 1)
        throw Error(ErrorCode::MalformedDocument,
                    "dataset '" + def.name + "' has more than one source");
    if (d.contains("url")) {
        UrlSource src;
        src.url = d.at("url").get<std::string>();
        if (d.contains("format")) {
            src.format_json = d.at("format");
            const json& f = src.format_json;
            if (f.is_object() && f.contains("type") && f.at("type").is_string() &&
                f.size() == 1 &&
                (f.at("type") == "csv" || f.at("type") == "json")) {
                src.format = f.at("type").get<std::string>();
            } else {
                // Unrecognized format configuration: preserved, but step 0
                // cannot run on the server.
                src.format = "";
                src.format_supported = false;
            }
        } else {
            src.format = infer_format_from_url(src.url);
        }
        def.source = std::move(src);
    } else if (d.contains("values")) {
        def.source = InlineSource{d.at("values")};
    } else if (d.contains("source")) {
        if (!d.at("source").is_string())
            throw Error(ErrorCode::MalformedDocument, "dataset source must be a name");
        def.source = NamedSource{d.at("source").get<std::string>()};
    }

    if (d.contains("transform")) {
        if (!d.at("transform").is_array())
            throw Error(ErrorCode::MalformedDocument, "transform must be an array");
        for (const auto& t : d.at("transform")) def.transforms.push_back(parse_transform(t));
    }

    def.extra = json::object();
    for (auto it = d.begin(); it != d.end(); ++it) {
        const std::string& k = it.key();
        if (k != "name" && k != "url" && k != "values" && k != "source" && k != "format" &&
            k != "transform")
            def.extra[k] = it.value();
    }
    return def;
}

SignalDef parse_signal(const json& s) {
    if (!s.is_object() || !s.contains("name") || !s.at("name").is_string())
        throw Error(ErrorCode::MalformedDocument, "signal entry missing \"name\"");
    SignalDef def;
    def.name = s.at("name").get<std::string>();
    def.raw = s;
    if (s.contains("value") && json_representable_as_value(s.at("value")))
        def.initial = value_from_json(s.at("value"));
    def.interactive = s.contains("on") || s.contains("bind");
    if (s.contains("update") && s.at("update").is_string()) {
        try {
            def.update_expr = parse_expression(s.at("update").get<std::string>());
        } catch (const Error&) {
            // Unparseable update expressions only lose dependency edges.
        }
    }
    return def;
}

} // namespace

VisSpec spec_from_json(const json& doc) {
    if (!doc.is_object()) throw Error(ErrorCode::MalformedDocument, "spec must be an object");
    VisSpec spec;
    if (doc.contains("data")) {
        if (!doc.at("data").is_array())
            throw Error(ErrorCode::MalformedDocument, "\"data\" must be an array");
        for (const auto& d : doc.at("data")) spec.datasets.push_back(parse_dataset(d));
    }
    if (doc.contains("signals")) {
        if (!doc.at("signals").is_array())
            throw Error(ErrorCode::MalformedDocument, "\"signals\" must be an array");
        for (const auto& s : doc.at("signals")) spec.signals.push_back(parse_signal(s));
    }
    spec.remainder = json::object();
    for (auto it = doc.begin(); it != doc.end(); ++it)
        if (it.key() != "data" && it.key() != "signals") spec.remainder[it.key()] = it.value();

    // Name uniqueness and namespace disjointness, including signals declared
    // by extent steps.
    std::set<std::string> dataset_names, signal_names;
    for (const auto& d : spec.datasets)
        if (!dataset_names.insert(d.name).second)
            throw Error(ErrorCode::DuplicateName, "duplicate dataset '" + d.name + "'");
    for (const auto& s : spec.signals)
        if (!signal_names.insert(s.name).second)
            throw Error(ErrorCode::DuplicateName, "duplicate signal '" + s.name + "'");
    for (const auto& [name, origin] : spec.derived_signals())
        if (!signal_names.insert(name).second)
            throw Error(ErrorCode::DuplicateName,
                        "extent-declared signal '" + name + "' duplicates another signal");
    for (const auto& n : signal_names)
        if (dataset_names.count(n))
            throw Error(ErrorCode::DuplicateName,
                        "name '" + n + "' is used for both a dataset and a signal");

    for (const auto& d : spec.datasets) {
        if (const auto* named = std::get_if<NamedSource>(&d.source)) {
            if (!dataset_names.count(named->dataset))
                throw Error(ErrorCode::MalformedDocument,
                            "dataset '" + d.name + "' sources unknown dataset '" +
                                named->dataset + "'");
        }
    }
    return spec;
}

VisSpec parse_spec(const std::string& document) {
    json doc = json::parse(document, nullptr, false);
    if (doc.is_discarded())
        throw Error(ErrorCode::MalformedDocument, "document is not well-formed JSON");
    return spec_from_json(doc);
}

// ---------------------------------------------------------------------------
// Emission

json spec_to_json(const VisSpec& spec) {
    json doc = spec.remainder.is_object() ? spec.remainder : json::object();
    json data = json::array();
    for (const auto& d : spec.datasets) {
        json obj = json::object();
        obj["name"] = d.name;
        if (const auto* url = std::get_if<UrlSource>(&d.source)) {
            obj["url"] = url->url;
            if (!url->format_json.is_null()) obj["format"] = url->format_json;
        } else if (const auto* inl = std::get_if<InlineSource>(&d.source)) {
            obj["values"] = inl->values;
        } else if (const auto* named = std::get_if<NamedSource>(&d.source)) {
            obj["source"] = named->dataset;
        }
        if (!d.transforms.empty()) {
            json ts = json::array();
            for (const auto& t : d.transforms) {
                json step = t.params;
                step["type"] = t.op;
                ts.push_back(std::move(step));
            }
            obj["transform"] = std::move(ts);
        }
        for (auto it = d.extra.begin(); it != d.extra.end(); ++it) obj[it.key()] = it.value();
        data.push_back(std::move(obj));
    }
    doc["data"] = std::move(data);
    json sigs = json::array();
    for (const auto& s : spec.signals) sigs.push_back(s.raw);
    doc["signals"] = std::move(sigs);
    return doc;
}

std::string emit_spec(const VisSpec& spec) { return spec_to_json(spec).dump(2); }

bool spec_equal(const VisSpec& a, const VisSpec& b) { return spec_to_json(a) == spec_to_json(b); }

// ---------------------------------------------------------------------------
// Dependency graph

DepGraph dependency_graph(const VisSpec& spec) {
    DepGraph g;
    auto derived = spec.derived_signals();

    for (const auto& s : spec.signals) g.nodes.insert(DepNode::signal(s.name));
    for (const auto& [name, origin] : derived) g.nodes.insert(DepNode::signal(name));

    for (const auto& d : spec.datasets) {
        for (int k = 0; k <= static_cast<int>(d.transforms.size()); ++k)
            g.nodes.insert(DepNode::dataset_step(d.name, k));
        for (int k = 1; k <= static_cast<int>(d.transforms.size()); ++k)
            g.edges.insert({DepNode::dataset_step(d.name, k - 1),
                            DepNode::dataset_step(d.name, k)});
        if (const auto* named = std::get_if<NamedSource>(&d.source)) {
            const DatasetDef* up = spec.find_dataset(named->dataset);
            int last = up ? static_cast<int>(up->transforms.size()) : 0;
            g.edges.insert({DepNode::dataset_step(named->dataset, last),
                            DepNode::dataset_step(d.name, 0)});
        }
        for (size_t k = 0; k < d.transforms.size(); ++k) {
            const TransformSpec& t = d.transforms[k];
            for (const auto& [path, ast] : t.parsed_exprs) {
                for (const auto& sig : analyze(ast).signals)
                    g.edges.insert({DepNode::signal(sig),
                                    DepNode::dataset_step(d.name, static_cast<int>(k) + 1)});
            }
            if (auto sig = t.declared_signal())
                g.edges.insert({DepNode::dataset_step(d.name, static_cast<int>(k) + 1),
                                DepNode::signal(*sig)});
        }
    }

    for (const auto& s : spec.signals) {
        if (!s.update_expr) continue;
        for (const auto& dep : analyze(s.update_expr).signals) {
            if (g.nodes.count(DepNode::signal(dep)))
                g.edges.insert({DepNode::signal(dep), DepNode::signal(s.name)});
        }
    }

    g.topological_order(); // throws CyclicDependency on cycles
    return g;
}

std::vector<DepNode> DepGraph::topological_order() const {
    std::map<DepNode, std::vector<DepNode>> adj;
    std::map<DepNode, int> indeg;
    for (const auto& n : nodes) indeg[n] = 0;
    for (const auto& [from, to] : edges) {
        adj[from].push_back(to);
        ++indeg[to];
    }
    std::vector<DepNode> ready;
    for (const auto& [n, d] : indeg)
        if (d == 0) ready.push_back(n);
    std::vector<DepNode> order;
    while (!ready.empty()) {
        DepNode n = ready.front();
        ready.erase(ready.begin());
        order.push_back(n);
        for (const auto& m : adj[n])
            if (--indeg[m] == 0) ready.push_back(m);
    }
    if (order.size() != nodes.size()) {
        std::string cyclic;
        for (const auto& [n, d] : indeg)
            if (d > 0) cyclic += (cyclic.empty() ? "" : ", ") + n.str();
        throw Error(ErrorCode::CyclicDependency, "dependency cycle through: " + cyclic);
    }
    return order;
}

} // namespace specfission
