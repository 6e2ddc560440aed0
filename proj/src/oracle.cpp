#include "specfission/oracle.hpp"

#include <nlohmann/json.hpp>

#include "specfission/error.hpp"
#include "specfission/planner.hpp"
#include "specfission/transforms.hpp"

namespace specfission {

ChainEvalOutcome evaluate_chains(const VisSpec& spec,
                                 const std::map<std::string, Value>& signal_values,
                                 const Loader& loader, const ChainEvalOptions& options) {
    DepGraph dep = dependency_graph(spec);
    auto derived = spec.derived_signals();

    ChainEvalOutcome out;
    std::map<std::string, Value> derived_env;
    std::set<std::string> cut; // datasets stopped before their full depth

    auto env = [&](const std::string& name) -> const Value* {
        auto d = derived_env.find(name);
        if (d != derived_env.end()) return &d->second;
        auto s = signal_values.find(name);
        return s == signal_values.end() ? nullptr : &s->second;
    };

    auto stop = [&](const std::string& dataset, const std::string& reason) {
        if (options.strict)
            throw Error(ErrorCode::UnsupportedForOracle,
                        "dataset '" + dataset + "': " + reason);
        cut.insert(dataset);
    };

    for (const auto& node : dep.topological_order()) {
        if (node.kind == DepNode::Kind::Signal) continue;
        const DatasetDef* d = spec.find_dataset(node.name);

        if (node.step == 0) {
            auto st = options.stitched.find(d->name);
            if (st != options.stitched.end()) {
                out.tables[d->name] = st->second.first;
                out.reached[d->name] = st->second.second;
                continue;
            }
            out.reached[d->name] = -1;
            if (const auto* url = std::get_if<UrlSource>(&d->source)) {
                if (!url->format_supported) {
                    stop(d->name, "unsupported data format");
                    continue;
                }
                out.tables[d->name] = loader.load(url->url, url->format);
            } else if (const auto* inl = std::get_if<InlineSource>(&d->source)) {
                out.tables[d->name] = table_from_json_rows(inl->values);
            } else if (const auto* named = std::get_if<NamedSource>(&d->source)) {
                const DatasetDef* up = spec.find_dataset(named->dataset);
                bool complete = out.reached.count(up->name) &&
                                out.reached[up->name] ==
                                    static_cast<int>(up->transforms.size());
                if (!complete) {
                    stop(d->name, "source dataset '" + up->name + "' was not fully evaluated");
                    continue;
                }
                out.tables[d->name] = out.tables[up->name];
            } else {
                out.tables[d->name] = Table(); // a data container without a source
            }
            out.reached[d->name] = 0;
            continue;
        }

        if (cut.count(d->name)) continue;
        if (out.reached[d->name] != node.step - 1) continue; // stitched past, or unavailable
        const TransformSpec& t = d->transforms[node.step - 1];

        if (!step_supported(t)) {
            stop(d->name, "step " + std::to_string(node.step) + " (" + t.op +
                              ") is not evaluable by this engine");
            continue;
        }
        bool refs_ok = true;
        for (const auto& sig : step_signal_refs(t.op, t.params)) {
            if (!env(sig)) {
                stop(d->name, "step " + std::to_string(node.step) + " references signal '" +
                                  sig + "' which has no value here");
                refs_ok = false;
                break;
            }
        }
        if (!refs_ok) continue;

        TransformResult r = apply_transform(t.op, t.params, out.tables[d->name], env);
        if (auto* value = std::get_if<Value>(&r)) {
            if (auto sig = t.declared_signal()) derived_env[*sig] = *value;
        } else {
            out.tables[d->name] = std::move(std::get<Table>(r));
        }
        out.reached[d->name] = node.step;
    }
    return out;
}

std::map<std::string, Table> oracle_evaluate(const VisSpec& spec,
                                             const std::map<std::string, Value>& signal_values,
                                             const Loader& loader) {
    // Fill unset client signals with their declared initial values.
    std::map<std::string, Value> env = signal_values;
    for (const auto& s : spec.signals)
        if (!env.count(s.name)) env[s.name] = s.initial ? *s.initial : Value();

    ChainEvalOutcome out = evaluate_chains(spec, env, loader, ChainEvalOptions{});
    return std::move(out.tables);
}

} // namespace specfission
