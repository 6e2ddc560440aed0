#include "specfission/planner.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/table.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

using nlohmann::json;

bool step_supported(const TransformSpec& step) {
    if (!step.unparsed.empty()) return false;
    return !step_unsupported_reason(step.op, step.params).has_value();
}

namespace {

bool source_server_supported(const VisSpec& spec, const DatasetDef& d,
                             const std::map<std::string, bool>& fully_evaluable) {
    if (const auto* url = std::get_if<UrlSource>(&d.source)) return url->format_supported;
    if (const auto* inl = std::get_if<InlineSource>(&d.source)) {
        try {
            table_from_json_rows(inl->values);
            return true;
        } catch (const Error&) {
            return false;
        }
    }
    if (const auto* named = std::get_if<NamedSource>(&d.source)) {
        auto it = fully_evaluable.find(named->dataset);
        return it != fully_evaluable.end() && it->second;
    }
    return false; // no source: nothing the server could materialize
}

/// Root source and full transform chain with named sources flattened.
void resolve_chain(const VisSpec& spec, const DatasetDef& d, int prefix, DatasetSource& root,
                   std::vector<TransformSpec>& chain) {
    if (const auto* named = std::get_if<NamedSource>(&d.source)) {
        const DatasetDef* up = spec.find_dataset(named->dataset);
        resolve_chain(spec, *up, static_cast<int>(up->transforms.size()), root, chain);
    } else {
        root = d.source;
    }
    chain.insert(chain.end(), d.transforms.begin(), d.transforms.begin() + prefix);
}

} // namespace

namespace {

void collect_remainder_signal_refs(const json& j, std::set<std::string>& out) {
    if (j.is_object()) {
        if (j.contains("signal") && j.at("signal").is_string()) {
            try {
                RefSet refs = analyze(parse_expression(j.at("signal").get<std::string>()));
                out.insert(refs.signals.begin(), refs.signals.end());
            } catch (const Error&) {
            }
        }
        for (auto it = j.begin(); it != j.end(); ++it)
            collect_remainder_signal_refs(it.value(), out);
    } else if (j.is_array()) {
        for (const auto& e : j) collect_remainder_signal_refs(e, out);
    }
}

/// One pass of the prefix computation. `pinned` holds extent steps that must
/// stay on the client because their declared signal has client consumers.
struct PassResult {
    std::map<std::string, int> prefix;           // dataset -> supported transform steps
    std::map<std::string, bool> fully_evaluable; // source + all steps supported
};

PassResult prefix_pass(const VisSpec& spec, const DepGraph& dep,
                       const std::map<std::string, std::pair<std::string, int>>& derived,
                       const std::set<std::pair<std::string, int>>& pinned) {
    PassResult out;
    std::map<std::string, bool> signal_on_server;
    for (const auto& node : dep.topological_order()) {
        if (node.kind == DepNode::Kind::Signal) {
            auto it = derived.find(node.name);
            if (it == derived.end()) continue; // client signals always reachable
            const auto& [ds, step] = it->second;
            signal_on_server[node.name] = out.prefix.count(ds) && out.prefix[ds] >= step;
            continue;
        }
        const DatasetDef* d = spec.find_dataset(node.name);
        if (node.step == 0) {
            bool ok = source_server_supported(spec, *d, out.fully_evaluable);
            out.prefix[d->name] = ok ? 0 : -1;
            if (d->transforms.empty()) out.fully_evaluable[d->name] = ok;
            continue;
        }
        const TransformSpec& t = d->transforms[node.step - 1];
        bool ok = out.prefix[d->name] == node.step - 1 && step_supported(t) &&
                  !pinned.count({d->name, node.step});
        if (ok) {
            for (const auto& sig : step_signal_refs(t.op, t.params)) {
                if (derived.count(sig)) {
                    auto it = signal_on_server.find(sig);
                    ok = ok && it != signal_on_server.end() && it->second;
                } else if (!spec.find_signal(sig)) {
                    ok = false; // reference to an undefined signal
                }
            }
        }
        if (ok) out.prefix[d->name] = node.step;
        if (node.step == static_cast<int>(d->transforms.size()))
            out.fully_evaluable[d->name] = ok;
    }
    return out;
}

} // namespace

PlanResult plan(const VisSpec& spec) {
    DepGraph dep = dependency_graph(spec); // cycle check

    auto derived = spec.derived_signals();

    // Derived signals are computable on the server but never delivered back,
    // so an extent step may move only when nothing client-side consumes its
    // signal. Start with the statically visible client consumers (marks,
    // scales, signal update expressions), then demote extent steps whose
    // consumers end up on the client until the assignment is stable.
    std::set<std::string> client_consumed;
    collect_remainder_signal_refs(spec.remainder, client_consumed);
    for (const auto& s : spec.signals)
        if (s.update_expr)
            for (const auto& ref : analyze(s.update_expr).signals) client_consumed.insert(ref);

    std::set<std::pair<std::string, int>> pinned;
    for (const auto& [sig, origin] : derived)
        if (client_consumed.count(sig)) pinned.insert(origin);

    PassResult pass = prefix_pass(spec, dep, derived, pinned);
    for (;;) {
        bool changed = false;
        for (const auto& d : spec.datasets) {
            int k = pass.prefix[d.name];
            for (size_t s = size_t(std::max(k, 0)); s < d.transforms.size(); ++s) {
                // Client-side step: every derived signal it references pins
                // the declaring extent step to the client as well.
                for (const auto& sig : step_signal_refs(d.transforms[s].op,
                                                        d.transforms[s].params)) {
                    auto it = derived.find(sig);
                    if (it != derived.end() && pinned.insert(it->second).second) changed = true;
                }
            }
        }
        if (!changed) break;
        pass = prefix_pass(spec, dep, derived, pinned);
    }
    std::map<std::string, int>& prefix = pass.prefix;

    PlanResult result;
    result.client_spec.signals = spec.signals;
    result.client_spec.remainder = spec.remainder;

    std::set<std::string> used_signals;
    for (const auto& d : spec.datasets) {
        int k = prefix[d.name];
        if (k < 1) {
            // Zero supported transform prefix: the dataset stays untouched.
            result.client_spec.datasets.push_back(d);
            continue;
        }
        ServerDataset sd;
        sd.export_name = "__sf_" + d.name + "_" + std::to_string(k);
        sd.dataset = d.name;
        sd.prefix = k;
        resolve_chain(spec, d, k, sd.source, sd.transforms);
        for (const auto& t : sd.transforms)
            for (const auto& sig : step_signal_refs(t.op, t.params))
                if (!derived.count(sig)) used_signals.insert(sig);
        result.server_spec.datasets.push_back(std::move(sd));

        DatasetDef placeholder;
        placeholder.name = d.name;
        placeholder.source = InlineSource{json::array()};
        placeholder.transforms.assign(d.transforms.begin() + k, d.transforms.end());
        placeholder.extra = json::object();
        placeholder.extra[kExportField] = result.server_spec.datasets.back().export_name;
        result.client_spec.datasets.push_back(std::move(placeholder));
    }

    for (const auto& s : spec.signals) {
        if (!used_signals.count(s.name)) continue;
        result.server_spec.referenced_signals.emplace_back(
            s.name, s.initial ? *s.initial : Value());
        result.comm_plan.client_to_server.push_back(s.name);
    }
    for (const auto& sd : result.server_spec.datasets)
        result.comm_plan.server_to_client.push_back(sd.export_name);
    return result;
}

// ---------------------------------------------------------------------------
// Validation

PlanReport validate_plan(const VisSpec& spec, const PlanResult& result) {
    PlanReport report;
    auto violation = [&](const std::string& msg) { report.violations.push_back(msg); };
    auto derived = spec.derived_signals();

    std::map<std::string, const ServerDataset*> exports;
    for (const auto& sd : result.server_spec.datasets) {
        exports[sd.export_name] = &sd;
        for (const auto& t : sd.transforms) {
            if (!op_server_supported(t.op))
                violation("unsupported op in server spec: " + t.op);
            else if (auto reason = step_unsupported_reason(t.op, t.params))
                violation("server step " + t.op + " invalid: " + *reason);
        }
        const DatasetDef* d = spec.find_dataset(sd.dataset);
        if (!d) {
            violation("server dataset '" + sd.dataset + "' not in spec");
            continue;
        }
        // Prefix property: the tail of the server chain must equal the
        // dataset's own first `prefix` steps (the head is inlined upstream).
        if (sd.prefix < 1 || sd.prefix > static_cast<int>(d->transforms.size())) {
            violation("bad prefix for dataset '" + sd.dataset + "'");
            continue;
        }
        if (static_cast<int>(sd.transforms.size()) < sd.prefix) {
            violation("server chain shorter than prefix for '" + sd.dataset + "'");
            continue;
        }
        size_t tail = sd.transforms.size() - sd.prefix;
        for (int i = 0; i < sd.prefix; ++i) {
            const TransformSpec& a = sd.transforms[tail + i];
            const TransformSpec& b = d->transforms[i];
            if (a.op != b.op || a.params != b.params)
                violation("server chain step " + std::to_string(i) + " of '" + sd.dataset +
                          "' differs from the spec");
        }
    }

    std::set<std::string> consumed;
    for (const auto& d : result.client_spec.datasets) {
        if (!d.extra.is_object() || !d.extra.contains(kExportField)) continue;
        std::string exp = d.extra.at(kExportField).get<std::string>();
        consumed.insert(exp);
        auto it = exports.find(exp);
        if (it == exports.end()) {
            violation("placeholder '" + d.name + "' references unknown export " + exp);
            continue;
        }
        const DatasetDef* orig = spec.find_dataset(d.name);
        if (!orig) {
            violation("placeholder '" + d.name + "' not in spec");
            continue;
        }
        int k = it->second->prefix;
        if (static_cast<int>(orig->transforms.size()) - k !=
            static_cast<int>(d.transforms.size())) {
            violation("placeholder '" + d.name + "' suffix length mismatch");
            continue;
        }
        for (size_t i = 0; i < d.transforms.size(); ++i)
            if (d.transforms[i].op != orig->transforms[k + i].op ||
                d.transforms[i].params != orig->transforms[k + i].params)
                violation("placeholder '" + d.name + "' suffix step differs from spec");
        // Greediness: the first client-side step must not be supportable.
        if (!d.transforms.empty() && step_supported(d.transforms.front())) {
            bool signals_ok = true;
            for (const auto& sig :
                 step_signal_refs(d.transforms.front().op, d.transforms.front().params)) {
                if (derived.count(sig) || !spec.find_signal(sig)) signals_ok = false;
            }
            if (signals_ok)
                violation("supported step left on the client after dataset '" + d.name + "'");
        }
    }

    std::set<std::string> plan_exports(result.comm_plan.server_to_client.begin(),
                                       result.comm_plan.server_to_client.end());
    for (const auto& [name, sd] : exports)
        if (!plan_exports.count(name)) violation("export " + name + " missing from comm plan");
    for (const auto& name : plan_exports) {
        if (!exports.count(name)) violation("comm plan lists unknown export " + name);
        if (!consumed.count(name)) violation("export " + name + " not consumed by the client");
    }

    std::set<std::string> referenced;
    for (const auto& sd : result.server_spec.datasets)
        for (const auto& t : sd.transforms)
            for (const auto& sig : step_signal_refs(t.op, t.params))
                if (!derived.count(sig)) referenced.insert(sig);
    for (const auto& name : result.comm_plan.client_to_server)
        if (!referenced.count(name))
            violation("signal " + name + " flows client-to-server but no server step uses it");

    for (const auto& d : spec.datasets) {
        PlanReport::Split split;
        split.dataset = d.name;
        split.total_steps = static_cast<int>(d.transforms.size());
        for (const auto& sd : result.server_spec.datasets) {
            if (sd.dataset == d.name) {
                split.server_steps = sd.prefix;
                split.export_name = sd.export_name;
            }
        }
        report.splits.push_back(std::move(split));
    }
    return report;
}

// ---------------------------------------------------------------------------
// JSON forms

namespace {

json source_to_json(const DatasetSource& s) {
    if (const auto* url = std::get_if<UrlSource>(&s))
        return {{"kind", "url"}, {"url", url->url}, {"format", url->format}};
    if (const auto* inl = std::get_if<InlineSource>(&s))
        return {{"kind", "inline"}, {"values", inl->values}};
    if (const auto* named = std::get_if<NamedSource>(&s))
        return {{"kind", "named"}, {"dataset", named->dataset}};
    return {{"kind", "none"}};
}

DatasetSource source_from_json(const json& j) {
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "url") {
        UrlSource s;
        s.url = j.at("url").get<std::string>();
        s.format = j.at("format").get<std::string>();
        return s;
    }
    if (kind == "inline") return InlineSource{j.at("values")};
    if (kind == "named") return NamedSource{j.at("dataset").get<std::string>()};
    return NoSource{};
}

} // namespace

json server_spec_to_json(const ServerSpec& s) {
    json datasets = json::array();
    for (const auto& d : s.datasets) {
        json ts = json::array();
        for (const auto& t : d.transforms) {
            json step = t.params;
            step["type"] = t.op;
            ts.push_back(std::move(step));
        }
        datasets.push_back({{"export", d.export_name},
                            {"dataset", d.dataset},
                            {"prefix", d.prefix},
                            {"source", source_to_json(d.source)},
                            {"transform", std::move(ts)}});
    }
    json signals = json::array();
    for (const auto& [name, value] : s.referenced_signals)
        signals.push_back({{"name", name}, {"value", value_to_json(value)}});
    return {{"datasets", std::move(datasets)}, {"signals", std::move(signals)}};
}

ServerSpec server_spec_from_json(const json& j) {
    ServerSpec s;
    for (const auto& d : j.at("datasets")) {
        ServerDataset sd;
        sd.export_name = d.at("export").get<std::string>();
        sd.dataset = d.value("dataset", std::string());
        sd.prefix = d.value("prefix", 0);
        sd.source = source_from_json(d.at("source"));
        for (const auto& t : d.at("transform")) {
            TransformSpec ts;
            ts.op = t.at("type").get<std::string>();
            ts.params = json::object();
            for (auto it = t.begin(); it != t.end(); ++it)
                if (it.key() != "type") ts.params[it.key()] = it.value();
            sd.transforms.push_back(std::move(ts));
        }
        s.datasets.push_back(std::move(sd));
    }
    for (const auto& sig : j.value("signals", json::array()))
        s.referenced_signals.emplace_back(sig.at("name").get<std::string>(),
                                          value_from_json(sig.at("value")));
    return s;
}

json comm_plan_to_json(const CommunicationPlan& p) {
    return {{"client_to_server", p.client_to_server}, {"server_to_client", p.server_to_client}};
}

CommunicationPlan comm_plan_from_json(const json& j) {
    CommunicationPlan p;
    for (const auto& s : j.at("client_to_server")) p.client_to_server.push_back(s);
    for (const auto& s : j.at("server_to_client")) p.server_to_client.push_back(s);
    return p;
}

} // namespace specfission
