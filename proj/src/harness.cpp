// SPDX-License-Identifier: Apache-2.0
#include "dni/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dni/synth_digits.hpp"

namespace dni {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- enum codecs --------------------------------------------------------------

std::string to_string(ExperimentKind kind) {
    switch (kind) {
        case ExperimentKind::ff_mnist: return "ff-mnist";
        case ExperimentKind::ff_stochastic: return "ff-stochastic";
        case ExperimentKind::ff_unlock: return "ff-unlock";
        case ExperimentKind::rnn_copy: return "rnn-copy";
        case ExperimentKind::rnn_repeat: return "rnn-repeat";
        case ExperimentKind::rnn_chars: return "rnn-chars";
        case ExperimentKind::multi_net: return "multi-net";
        case ExperimentKind::bp_lambda_check: return "bp-lambda-check";
    }
    throw std::logic_error("unreachable experiment kind");
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    for (ExperimentKind k :
         {ExperimentKind::ff_mnist, ExperimentKind::ff_stochastic, ExperimentKind::ff_unlock,
          ExperimentKind::rnn_copy, ExperimentKind::rnn_repeat, ExperimentKind::rnn_chars,
          ExperimentKind::multi_net, ExperimentKind::bp_lambda_check}) {
        if (to_string(k) == name) return k;
    }
    throw std::invalid_argument("config: unknown experiment kind '" + name + "'");
}

std::string to_string(FfMethod method) {
    switch (method) {
        case FfMethod::backprop: return "backprop";
        case FfMethod::dni: return "dni";
        case FfMethod::stale: return "stale";
    }
    throw std::logic_error("unreachable ff method");
}

FfMethod parse_ff_method(const std::string& name) {
    for (FfMethod m : {FfMethod::backprop, FfMethod::dni, FfMethod::stale})
        if (to_string(m) == name) return m;
    throw std::invalid_argument("config: unknown ff method '" + name + "'");
}

std::string to_string(TwoNetMode mode) {
    switch (mode) {
        case TwoNetMode::locked: return "locked";
        case TwoNetMode::decoupled_dni: return "decoupled-dni";
        case TwoNetMode::decoupled_no_feedback: return "decoupled-no-feedback";
    }
    throw std::logic_error("unreachable two-net mode");
}

TwoNetMode parse_two_net_mode(const std::string& name) {
    for (TwoNetMode m :
         {TwoNetMode::locked, TwoNetMode::decoupled_dni, TwoNetMode::decoupled_no_feedback})
        if (to_string(m) == name) return m;
    throw std::invalid_argument("config: unknown two-net mode '" + name + "'");
}

namespace {

std::string placement_to_string(DniPlacement p) {
    switch (p) {
        case DniPlacement::none: return "none";
        case DniPlacement::single: return "single";
        case DniPlacement::every: return "every";
    }
    throw std::logic_error("unreachable placement");
}

DniPlacement parse_placement(const std::string& name) {
    for (DniPlacement p : {DniPlacement::none, DniPlacement::single, DniPlacement::every})
        if (placement_to_string(p) == name) return p;
    throw std::invalid_argument("config: unknown placement '" + name + "'");
}

std::string conditioning_to_string(Conditioning c) {
    return c == Conditioning::none ? "none" : "label-one-hot";
}

Conditioning parse_conditioning(const std::string& name) {
    if (name == "none") return Conditioning::none;
    if (name == "label-one-hot") return Conditioning::label_one_hot;
    throw std::invalid_argument("config: unknown conditioning '" + name + "'");
}

// ---- json helpers --------------------------------------------------------------

void require_keys(const json& j, const std::string& where,
                  std::initializer_list<const char*> allowed) {
    if (!j.is_object())
        throw std::invalid_argument("config: '" + where + "' must be a JSON object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : allowed)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known)
            throw std::invalid_argument("config: unknown key '" + it.key() + "' in " + where);
    }
}

FfOptions ff_from_json(const json& j) {
    require_keys(j, "ff",
                 {"method", "hidden", "depth", "placement", "single_at", "conditioning",
                  "sg_hidden_layers", "sg_hidden_width", "lr", "sg_lr", "p_update", "lr_decay"});
    FfOptions o;
    o.method = parse_ff_method(j.value("method", to_string(o.method)));
    o.hidden = j.value("hidden", o.hidden);
    o.depth = j.value("depth", o.depth);
    o.placement = parse_placement(j.value("placement", placement_to_string(o.placement)));
    o.single_at = j.value("single_at", o.single_at);
    o.conditioning =
        parse_conditioning(j.value("conditioning", conditioning_to_string(o.conditioning)));
    o.sg_hidden_layers = j.value("sg_hidden_layers", o.sg_hidden_layers);
    o.sg_hidden_width = j.value("sg_hidden_width", o.sg_hidden_width);
    o.lr = j.value("lr", o.lr);
    o.sg_lr = j.value("sg_lr", o.sg_lr);
    o.p_update = j.value("p_update", o.p_update);
    o.lr_decay = j.value("lr_decay", o.lr_decay);
    return o;
}

json ff_to_json(const FfOptions& o) {
    return json{{"method", to_string(o.method)},
                {"hidden", o.hidden},
                {"depth", o.depth},
                {"placement", placement_to_string(o.placement)},
                {"single_at", o.single_at},
                {"conditioning", conditioning_to_string(o.conditioning)},
                {"sg_hidden_layers", o.sg_hidden_layers},
                {"sg_hidden_width", o.sg_hidden_width},
                {"lr", o.lr},
                {"sg_lr", o.sg_lr},
                {"p_update", o.p_update},
                {"lr_decay", o.lr_decay}};
}

RnnOptions rnn_from_json(const json& j) {
    require_keys(j, "rnn",
                 {"T", "dni", "aux", "sg_scale", "sg_into_core", "units", "data_bits", "lr",
                  "sg_lr"});
    RnnOptions o;
    o.T = j.value("T", o.T);
    o.dni = j.value("dni", o.dni);
    o.aux = j.value("aux", o.aux);
    o.sg_scale = j.value("sg_scale", o.sg_scale);
    o.sg_into_core = j.value("sg_into_core", o.sg_into_core);
    o.units = j.value("units", o.units);
    o.data_bits = j.value("data_bits", o.data_bits);
    o.lr = j.value("lr", o.lr);
    o.sg_lr = j.value("sg_lr", o.sg_lr);
    return o;
}

json rnn_to_json(const RnnOptions& o) {
    return json{{"T", o.T},           {"dni", o.dni},
                {"aux", o.aux},       {"sg_scale", o.sg_scale},
                {"sg_into_core", o.sg_into_core}, {"units", o.units},
                {"data_bits", o.data_bits},       {"lr", o.lr},
                {"sg_lr", o.sg_lr}};
}

TwoNetOptions two_net_from_json(const json& j) {
    require_keys(j, "two_net",
                 {"mode", "T", "fcn_width", "a_units", "b_units", "message_dim",
                  "sg_feedback_scale", "lr", "sg_lr", "eval_windows"});
    TwoNetOptions o;
    o.mode = parse_two_net_mode(j.value("mode", to_string(o.mode)));
    o.T = j.value("T", o.T);
    o.fcn_width = j.value("fcn_width", o.fcn_width);
    o.a_units = j.value("a_units", o.a_units);
    o.b_units = j.value("b_units", o.b_units);
    o.message_dim = j.value("message_dim", o.message_dim);
    o.sg_feedback_scale = j.value("sg_feedback_scale", o.sg_feedback_scale);
    o.lr = j.value("lr", o.lr);
    o.sg_lr = j.value("sg_lr", o.sg_lr);
    o.eval_windows = j.value("eval_windows", o.eval_windows);
    return o;
}

json two_net_to_json(const TwoNetOptions& o) {
    return json{{"mode", to_string(o.mode)},
                {"T", o.T},
                {"fcn_width", o.fcn_width},
                {"a_units", o.a_units},
                {"b_units", o.b_units},
                {"message_dim", o.message_dim},
                {"sg_feedback_scale", o.sg_feedback_scale},
                {"lr", o.lr},
                {"sg_lr", o.sg_lr},
                {"eval_windows", o.eval_windows}};
}

}  // namespace

// ---- experiment config ----------------------------------------------------------

void ExperimentConfig::validate() const {
    if (metrics_every == 0) throw std::invalid_argument("config: metrics_every must be >= 1");
    if (batch == 0) throw std::invalid_argument("config: batch must be >= 1");
    if (out_dir.empty()) throw std::invalid_argument("config: out_dir must not be empty");
    if (ff.p_update < 0.0 || ff.p_update > 1.0)
        throw std::invalid_argument("config: p_update must lie in [0, 1]");
    if (kind == ExperimentKind::rnn_copy || kind == ExperimentKind::rnn_repeat ||
        kind == ExperimentKind::rnn_chars) {
        TbpttConfig t;
        t.T = rnn.T;
        t.dni_enabled = rnn.dni;
        t.aux_enabled = rnn.aux;
        t.sg_scale = rnn.sg_scale;
        t.backprop_sg_error_into_core = rnn.sg_into_core;
        t.validate();
        if (rnn.units == 0) throw std::invalid_argument("config: rnn units must be >= 1");
        if (rnn.data_bits == 0) throw std::invalid_argument("config: data_bits must be >= 1");
    }
    if (kind == ExperimentKind::multi_net) {
        TwoNetConfig c;
        c.T = two_net.T;
        c.fcn_width = two_net.fcn_width;
        c.a_units = two_net.a_units;
        c.b_units = two_net.b_units;
        c.message_dim = two_net.message_dim;
        c.validate();
    }
    if (kind == ExperimentKind::ff_mnist || kind == ExperimentKind::ff_stochastic ||
        kind == ExperimentKind::ff_unlock) {
        if (ff.hidden == 0 || ff.depth == 0)
            throw std::invalid_argument("config: ff hidden and depth must be >= 1");
    }
    if (!sweep.parameter.empty() && sweep.values.empty())
        throw std::invalid_argument("config: sweep has a parameter but no values");
}

ExperimentConfig config_from_json_text(const std::string& text) {
    const json j = json::parse(text);
    require_keys(j, "top level",
                 {"kind", "seed", "budget", "out_dir", "batch", "metrics_every", "eval_every",
                  "checkpoint_every", "data_dir", "chars_path", "ff", "rnn", "two_net", "sweep"});
    ExperimentConfig c;
    c.kind = parse_experiment_kind(j.value("kind", to_string(c.kind)));
    c.seed = j.value("seed", c.seed);
    c.budget = j.value("budget", c.budget);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.batch = j.value("batch", c.batch);
    c.metrics_every = j.value("metrics_every", c.metrics_every);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.data_dir = j.value("data_dir", c.data_dir);
    c.chars_path = j.value("chars_path", c.chars_path);
    if (j.contains("ff")) c.ff = ff_from_json(j.at("ff"));
    if (j.contains("rnn")) c.rnn = rnn_from_json(j.at("rnn"));
    if (j.contains("two_net")) c.two_net = two_net_from_json(j.at("two_net"));
    if (j.contains("sweep")) {
        require_keys(j.at("sweep"), "sweep", {"parameter", "values"});
        c.sweep.parameter = j.at("sweep").value("parameter", std::string());
        c.sweep.values = j.at("sweep").value("values", std::vector<double>());
    }
    c.validate();
    return c;
}

std::string config_to_json_text(const ExperimentConfig& c) {
    json j{{"kind", to_string(c.kind)},
           {"seed", c.seed},
           {"budget", c.budget},
           {"out_dir", c.out_dir},
           {"batch", c.batch},
           {"metrics_every", c.metrics_every},
           {"eval_every", c.eval_every},
           {"checkpoint_every", c.checkpoint_every},
           {"data_dir", c.data_dir},
           {"chars_path", c.chars_path},
           {"ff", ff_to_json(c.ff)},
           {"rnn", rnn_to_json(c.rnn)},
           {"two_net", two_net_to_json(c.two_net)}};
    if (!c.sweep.parameter.empty())
        j["sweep"] = json{{"parameter", c.sweep.parameter}, {"values", c.sweep.values}};
    return j.dump(2) + "\n";
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return config_from_json_text(ss.str());
}

// ---- checkpoint serializers -------------------------------------------------------

namespace {

void ckpt_put(CheckpointWriter& w, const std::string& p, const AdamState& s) {
    w.put_tensor(p + ".m", s.m);
    w.put_tensor(p + ".v", s.v);
    w.put_u64(p + ".t", s.t);
    w.put_f64(p + ".lr", s.cfg.lr);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, AdamState& s) {
    r.tensor_into(p + ".m", s.m);
    r.tensor_into(p + ".v", s.v);
    s.t = r.u64(p + ".t");
    s.cfg.lr = r.f64(p + ".lr");
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const LinearLayer& l) {
    w.put_tensor(p + ".W", l.W);
    w.put_tensor(p + ".b", l.b);
    ckpt_put(w, p + ".wopt", l.w_state);
    ckpt_put(w, p + ".bopt", l.b_state);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, LinearLayer& l) {
    r.tensor_into(p + ".W", l.W);
    r.tensor_into(p + ".b", l.b);
    ckpt_get(r, p + ".wopt", l.w_state);
    ckpt_get(r, p + ".bopt", l.b_state);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const BatchNormLayer& l) {
    w.put_tensor(p + ".gamma", l.gamma);
    w.put_tensor(p + ".beta", l.beta);
    w.put_tensor(p + ".rmean", l.running_mean);
    w.put_tensor(p + ".rvar", l.running_var);
    ckpt_put(w, p + ".gopt", l.gamma_state);
    ckpt_put(w, p + ".bopt", l.beta_state);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, BatchNormLayer& l) {
    r.tensor_into(p + ".gamma", l.gamma);
    r.tensor_into(p + ".beta", l.beta);
    r.tensor_into(p + ".rmean", l.running_mean);
    r.tensor_into(p + ".rvar", l.running_var);
    ckpt_get(r, p + ".gopt", l.gamma_state);
    ckpt_get(r, p + ".bopt", l.beta_state);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const LstmCore& c) {
    w.put_tensor(p + ".W", c.W);
    w.put_tensor(p + ".b", c.b);
    ckpt_put(w, p + ".wopt", c.w_state);
    ckpt_put(w, p + ".bopt", c.b_state);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, LstmCore& c) {
    r.tensor_into(p + ".W", c.W);
    r.tensor_into(p + ".b", c.b);
    ckpt_get(r, p + ".wopt", c.w_state);
    ckpt_get(r, p + ".bopt", c.b_state);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const SgModel& m) {
    for (std::size_t i = 0; i < m.hidden.size(); ++i)
        ckpt_put(w, p + ".h" + std::to_string(i), m.hidden[i]);
    for (std::size_t i = 0; i < m.norms.size(); ++i)
        ckpt_put(w, p + ".n" + std::to_string(i), m.norms[i]);
    ckpt_put(w, p + ".out", m.out);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, SgModel& m) {
    for (std::size_t i = 0; i < m.hidden.size(); ++i)
        ckpt_get(r, p + ".h" + std::to_string(i), m.hidden[i]);
    for (std::size_t i = 0; i < m.norms.size(); ++i)
        ckpt_get(r, p + ".n" + std::to_string(i), m.norms[i]);
    ckpt_get(r, p + ".out", m.out);
}

/// Shapes of a carried cache vary with history (tensors may be empty), so the
/// cache round-trips value-for-value with no shape precondition.
void ckpt_put(CheckpointWriter& w, const std::string& p, const LstmCache& c) {
    w.put_tensor(p + ".z", c.z);
    w.put_tensor(p + ".c_prev", c.c_prev);
    w.put_tensor(p + ".i", c.i);
    w.put_tensor(p + ".f", c.f);
    w.put_tensor(p + ".g", c.g);
    w.put_tensor(p + ".o", c.o);
    w.put_tensor(p + ".c", c.c);
    w.put_tensor(p + ".tanh_c", c.tanh_c);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, LstmCache& c) {
    c.z = r.tensor(p + ".z");
    c.c_prev = r.tensor(p + ".c_prev");
    c.i = r.tensor(p + ".i");
    c.f = r.tensor(p + ".f");
    c.g = r.tensor(p + ".g");
    c.o = r.tensor(p + ".o");
    c.c = r.tensor(p + ".c");
    c.tanh_c = r.tensor(p + ".tanh_c");
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const RnnDniModel& m) {
    ckpt_put(w, p + ".core", m.core);
    ckpt_put(w, p + ".readout", m.readout);
    ckpt_put(w, p + ".sg", m.sg);
    ckpt_put(w, p + ".aux", m.aux);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, RnnDniModel& m) {
    ckpt_get(r, p + ".core", m.core);
    ckpt_get(r, p + ".readout", m.readout);
    ckpt_get(r, p + ".sg", m.sg);
    ckpt_get(r, p + ".aux", m.aux);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const RnnTrainWindow& win) {
    w.put_tensor(p + ".h", win.h);
    w.put_tensor(p + ".c", win.c);
    w.put_tensor(p + ".pending", win.pending_pred);
    w.put_u64(p + ".has_pending", win.has_pending ? 1 : 0);
    ckpt_put(w, p + ".bcache", win.boundary_cache);
    w.put_u64(p + ".has_bcache", win.has_boundary_cache ? 1 : 0);
    w.put_u64(p + ".windows_done", win.windows_done);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, RnnTrainWindow& win) {
    r.tensor_into(p + ".h", win.h);
    r.tensor_into(p + ".c", win.c);
    win.pending_pred = r.tensor(p + ".pending");
    win.has_pending = r.u64(p + ".has_pending") != 0;
    ckpt_get(r, p + ".bcache", win.boundary_cache);
    win.has_boundary_cache = r.u64(p + ".has_bcache") != 0;
    win.windows_done = r.u64(p + ".windows_done");
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const Episode& e) {
    w.put_tensor(p + ".inputs", e.inputs);
    w.put_tensor(p + ".targets", e.targets);
    w.put_tensor(p + ".mask", e.mask);
    w.put_u64(p + ".t_task", e.t_task);
    w.put_u64(p + ".n", e.n);
    w.put_u64(p + ".r", e.r);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, Episode& e) {
    e.inputs = r.tensor(p + ".inputs");
    e.targets = r.tensor(p + ".targets");
    e.mask = r.tensor(p + ".mask");
    e.t_task = r.u64(p + ".t_task");
    e.n = r.u64(p + ".n");
    e.r = r.u64(p + ".r");
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const TaskStreamState& s) {
    w.put_u64(p + ".rng", s.rng.raw_state());
    w.put_u64(p + ".has_pending", s.has_pending ? 1 : 0);
    w.put_tensor(p + ".pending", s.pending);
    w.put_u64(p + ".pending_r", s.pending_r);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, TaskStreamState& s) {
    s.rng.set_raw_state(r.u64(p + ".rng"));
    s.has_pending = r.u64(p + ".has_pending") != 0;
    s.pending = r.tensor(p + ".pending");
    s.pending_r = r.u64(p + ".pending_r");
}

Tensor doubles_to_tensor(const std::vector<double>& v) {
    if (v.empty()) return Tensor();
    return Tensor({v.size()}, v);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const CurriculumState& s) {
    w.put_u64(p + ".n", s.n);
    w.put_u64(p + ".r", s.r);
    w.put_u64(p + ".next_is_n", s.next_increment_is_n ? 1 : 0);
    w.put_tensor(p + ".recent", doubles_to_tensor(s.recent));
}

void ckpt_get(const CheckpointReader& r, const std::string& p, CurriculumState& s) {
    s.n = r.u64(p + ".n");
    s.r = r.u64(p + ".r");
    s.next_increment_is_n = r.u64(p + ".next_is_n") != 0;
    const Tensor recent = r.tensor(p + ".recent");
    s.recent.assign(recent.data(), recent.data() + recent.size());
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const CurriculumTrainer& tr) {
    ckpt_put(w, p + ".model", tr.model);
    ckpt_put(w, p + ".window", tr.window);
    w.put_u64(p + ".episodes", tr.result.episodes_consumed);
    w.put_u64(p + ".max_solved", tr.result.max_t_task_solved);
    w.put_u64(p + ".windows", tr.result.windows);
    ckpt_put(w, p + ".cur", tr.result.curriculum);
    w.put_u64(p + ".trace.count", tr.result.trace.size());
    if (!tr.result.trace.empty()) {
        Tensor t({tr.result.trace.size(), 2});
        for (std::size_t i = 0; i < tr.result.trace.size(); ++i) {
            t(i, 0) = static_cast<double>(tr.result.trace[i].samples);
            t(i, 1) = static_cast<double>(tr.result.trace[i].t_task);
        }
        w.put_tensor(p + ".trace", t);
    }
    w.put_u64(p + ".streams", tr.streams.size());
    for (std::size_t s = 0; s < tr.streams.size(); ++s) {
        const std::string sp = p + ".s" + std::to_string(s);
        ckpt_put(w, sp + ".task", tr.streams[s].task);
        w.put_u64(sp + ".cursor", tr.streams[s].cursor);
        w.put_u64(sp + ".live", tr.streams[s].live.size());
        for (std::size_t i = 0; i < tr.streams[s].live.size(); ++i) {
            const std::string rp = sp + ".live" + std::to_string(i);
            ckpt_put(w, rp + ".ep", tr.streams[s].live[i].ep);
            w.put_tensor(rp + ".probs", tr.streams[s].live[i].probs);
            w.put_u64(rp + ".rows", tr.streams[s].live[i].rows_filled);
        }
    }
}

void ckpt_get(const CheckpointReader& r, const std::string& p, CurriculumTrainer& tr) {
    ckpt_get(r, p + ".model", tr.model);
    ckpt_get(r, p + ".window", tr.window);
    tr.result.episodes_consumed = r.u64(p + ".episodes");
    tr.result.max_t_task_solved = r.u64(p + ".max_solved");
    tr.result.windows = r.u64(p + ".windows");
    ckpt_get(r, p + ".cur", tr.result.curriculum);
    tr.result.trace.clear();
    const std::uint64_t trace_count = r.u64(p + ".trace.count");
    if (trace_count > 0) {
        const Tensor t = r.tensor(p + ".trace");
        for (std::uint64_t i = 0; i < trace_count; ++i)
            tr.result.trace.push_back({static_cast<std::size_t>(t(i, 0)),
                                       static_cast<std::size_t>(t(i, 1))});
    }
    const std::uint64_t n_streams = r.u64(p + ".streams");
    if (n_streams != tr.streams.size())
        throw std::runtime_error("checkpoint: stream count does not match the config");
    for (std::size_t s = 0; s < tr.streams.size(); ++s) {
        const std::string sp = p + ".s" + std::to_string(s);
        ckpt_get(r, sp + ".task", tr.streams[s].task);
        tr.streams[s].cursor = r.u64(sp + ".cursor");
        tr.streams[s].live.clear();
        const std::uint64_t live = r.u64(sp + ".live");
        for (std::uint64_t i = 0; i < live; ++i) {
            const std::string rp = sp + ".live" + std::to_string(i);
            EpisodeRecord rec;
            ckpt_get(r, rp + ".ep", rec.ep);
            rec.probs = r.tensor(rp + ".probs");
            rec.rows_filled = r.u64(rp + ".rows");
            tr.streams[s].live.push_back(std::move(rec));
        }
    }
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const TwoNetSystem& sys) {
    ckpt_put(w, p + ".fcn1", sys.fcn1);
    ckpt_put(w, p + ".bn1", sys.bn1);
    ckpt_put(w, p + ".fcn2", sys.fcn2);
    ckpt_put(w, p + ".bn2", sys.bn2);
    ckpt_put(w, p + ".a_core", sys.a_core);
    ckpt_put(w, p + ".a_cls", sys.a_classifier);
    ckpt_put(w, p + ".msg", sys.msg_head);
    ckpt_put(w, p + ".b_core", sys.b_core);
    ckpt_put(w, p + ".b_cls", sys.b_classifier);
    ckpt_put(w, p + ".msg_sg", sys.msg_sg);
    w.put_tensor(p + ".a_h", sys.a_h);
    w.put_tensor(p + ".a_c", sys.a_c);
    w.put_tensor(p + ".b_h", sys.b_h);
    w.put_tensor(p + ".b_c", sys.b_c);
    w.put_u64(p + ".steps_done", sys.steps_done);
    w.put_u64(p + ".a_updates", sys.a_updates);
    w.put_u64(p + ".b_updates", sys.b_updates);
    w.put_u64(p + ".staged", sys.staged_messages.size());
    for (std::size_t i = 0; i < sys.staged_messages.size(); ++i) {
        const std::string ip = p + ".staged" + std::to_string(i);
        w.put_tensor(ip + ".msg", sys.staged_messages[i]);
        ckpt_put(w, ip + ".cache", sys.staged_b_caches[i]);
    }
    std::vector<double> threes(sys.staged_threes.begin(), sys.staged_threes.end());
    w.put_tensor(p + ".threes", doubles_to_tensor(threes));
}

void ckpt_get(const CheckpointReader& r, const std::string& p, TwoNetSystem& sys) {
    ckpt_get(r, p + ".fcn1", sys.fcn1);
    ckpt_get(r, p + ".bn1", sys.bn1);
    ckpt_get(r, p + ".fcn2", sys.fcn2);
    ckpt_get(r, p + ".bn2", sys.bn2);
    ckpt_get(r, p + ".a_core", sys.a_core);
    ckpt_get(r, p + ".a_cls", sys.a_classifier);
    ckpt_get(r, p + ".msg", sys.msg_head);
    ckpt_get(r, p + ".b_core", sys.b_core);
    ckpt_get(r, p + ".b_cls", sys.b_classifier);
    ckpt_get(r, p + ".msg_sg", sys.msg_sg);
    r.tensor_into(p + ".a_h", sys.a_h);
    r.tensor_into(p + ".a_c", sys.a_c);
    r.tensor_into(p + ".b_h", sys.b_h);
    r.tensor_into(p + ".b_c", sys.b_c);
    sys.steps_done = r.u64(p + ".steps_done");
    sys.a_updates = r.u64(p + ".a_updates");
    sys.b_updates = r.u64(p + ".b_updates");
    const std::uint64_t staged = r.u64(p + ".staged");
    sys.staged_messages.clear();
    sys.staged_b_caches.clear();
    for (std::uint64_t i = 0; i < staged; ++i) {
        const std::string ip = p + ".staged" + std::to_string(i);
        sys.staged_messages.push_back(r.tensor(ip + ".msg"));
        LstmCache cache;
        ckpt_get(r, ip + ".cache", cache);
        sys.staged_b_caches.push_back(std::move(cache));
    }
    const Tensor threes = r.tensor(p + ".threes");
    sys.staged_threes.assign(threes.size(), 0);
    for (std::size_t i = 0; i < threes.size(); ++i)
        sys.staged_threes[i] = static_cast<std::size_t>(threes[i]);
}

void ckpt_put(CheckpointWriter& w, const std::string& p, const FfNetwork& net) {
    for (std::size_t i = 0; i < net.hidden.size(); ++i) {
        const std::string hp = p + ".h" + std::to_string(i);
        ckpt_put(w, hp + ".lin", net.hidden[i].lin);
        ckpt_put(w, hp + ".bn", net.hidden[i].bn);
    }
    ckpt_put(w, p + ".cls", net.classifier);
    for (std::size_t i = 0; i < net.sg.size(); ++i)
        ckpt_put(w, p + ".sg" + std::to_string(i), net.sg[i]);
    for (std::size_t i = 0; i < net.input_models.size(); ++i)
        ckpt_put(w, p + ".in" + std::to_string(i), net.input_models[i]);
}

void ckpt_get(const CheckpointReader& r, const std::string& p, FfNetwork& net) {
    for (std::size_t i = 0; i < net.hidden.size(); ++i) {
        const std::string hp = p + ".h" + std::to_string(i);
        ckpt_get(r, hp + ".lin", net.hidden[i].lin);
        ckpt_get(r, hp + ".bn", net.hidden[i].bn);
    }
    ckpt_get(r, p + ".cls", net.classifier);
    for (std::size_t i = 0; i < net.sg.size(); ++i)
        ckpt_get(r, p + ".sg" + std::to_string(i), net.sg[i]);
    for (std::size_t i = 0; i < net.input_models.size(); ++i)
        ckpt_get(r, p + ".in" + std::to_string(i), net.input_models[i]);
}

// ---- runners ----------------------------------------------------------------------

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_finite(const std::vector<double>& v) {
    double sum = 0.0;
    std::size_t n = 0;
    for (double x : v)
        if (std::isfinite(x)) {
            sum += x;
            ++n;
        }
    return n == 0 ? kNaN : sum / static_cast<double>(n);
}

class FfRunner final : public Runner {
  public:
    explicit FfRunner(const ExperimentConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        const std::string root = resolve_data_root(cfg.data_dir);
        train_ = load_mnist_split(root, "train");
        test_ = load_mnist_split(root, "t10k");
        FfNetworkSpec spec;
        spec.input_dim = train_.images.cols();
        spec.hidden = cfg.ff.hidden;
        spec.classes = 10;
        spec.depth = cfg.ff.depth;
        spec.placement = effective_placement(cfg);
        spec.single_at = cfg.ff.single_at;
        spec.conditioning = cfg.ff.conditioning;
        spec.sg_hidden_layers = cfg.ff.sg_hidden_layers;
        spec.sg_hidden_width = cfg.ff.sg_hidden_width;
        spec.adam.lr = cfg.ff.lr;
        spec.sg_adam.lr = cfg.ff.sg_lr;
        net_ = FfNetwork::create(spec, rng_);
        if (cfg.kind == ExperimentKind::ff_unlock) net_.attach_input_models(rng_);
        sched_.p_update = cfg.ff.p_update;
        sched_.rng = rng_.split();
    }

    static DniPlacement effective_placement(const ExperimentConfig& cfg) {
        if (cfg.kind == ExperimentKind::ff_unlock) return DniPlacement::every;
        if (cfg.kind == ExperimentKind::ff_mnist && cfg.ff.method == FfMethod::backprop)
            return DniPlacement::none;
        return cfg.ff.placement;
    }

    std::vector<std::string> columns() const override { return {"loss", "sg_loss", "eval_error"}; }
    bool done() const override { return steps_ >= cfg_.budget; }

    MetricsRow advance() override {
        const std::uint64_t step = steps_ + 1;
        if (cfg_.ff.lr_decay && cfg_.budget > 0) {
            double mult = 1.0;
            if (step > cfg_.budget * 4 / 5)
                mult = 0.01;
            else if (step > cfg_.budget * 3 / 5)
                mult = 0.1;
            if (mult != lr_mult_) {
                lr_mult_ = mult;
                set_learning_rate(net_, cfg_.ff.lr * mult);
            }
        }
        const MnistBatch batch = sample_batch(train_, cfg_.batch, rng_);
        TrainStepReport rep;
        switch (cfg_.kind) {
            case ExperimentKind::ff_mnist:
                rep = cfg_.ff.method == FfMethod::backprop ? backprop_step(net_, batch)
                      : cfg_.ff.method == FfMethod::stale  ? stale_gradient_step(net_, batch, stale_)
                                                           : dni_step(net_, batch);
                break;
            case ExperimentKind::ff_stochastic:
                rep = stochastic_dni_step(net_, batch, sched_);
                break;
            default:
                rep = complete_unlock_step(net_, batch, sched_);
                break;
        }
        steps_ = step;
        const bool want_eval =
            (cfg_.eval_every > 0 && step % cfg_.eval_every == 0) || step == cfg_.budget;
        MetricsRow row;
        row.step = step;
        row.samples = step * cfg_.batch;
        row.values = {rep.loss, mean_finite(rep.sg_loss),
                      want_eval ? eval_error(net_, test_) : kNaN};
        return row;
    }

    void save(CheckpointWriter& w) const override {
        w.put_u64("run.steps", steps_);
        w.put_u64("run.rng", rng_.raw_state());
        w.put_u64("run.sched_rng", sched_.rng.raw_state());
        w.put_f64("run.lr_mult", lr_mult_);
        ckpt_put(w, "net", net_);
        w.put_u64("stale.count", stale_.ema.size());
        for (std::size_t i = 0; i < stale_.ema.size(); ++i)
            w.put_tensor("stale." + std::to_string(i), stale_.ema[i]);
    }

    void load(const CheckpointReader& r) override {
        steps_ = r.u64("run.steps");
        rng_.set_raw_state(r.u64("run.rng"));
        sched_.rng.set_raw_state(r.u64("run.sched_rng"));
        lr_mult_ = r.f64("run.lr_mult");
        ckpt_get(r, "net", net_);
        stale_.ema.clear();
        const std::uint64_t n = r.u64("stale.count");
        for (std::uint64_t i = 0; i < n; ++i)
            stale_.ema.push_back(r.tensor("stale." + std::to_string(i)));
    }

  private:
    ExperimentConfig cfg_;
    RngState rng_;
    MnistDataset train_, test_;
    FfNetwork net_;
    UpdateScheduler sched_;
    StaleGradientCache stale_;
    std::uint64_t steps_ = 0;
    double lr_mult_ = 1.0;
};

CurriculumRunConfig to_curriculum_config(const ExperimentConfig& cfg) {
    CurriculumRunConfig c;
    c.kind = cfg.kind == ExperimentKind::rnn_repeat ? CurriculumState::Kind::repeat_copy
                                                    : CurriculumState::Kind::copy;
    c.tbptt.T = cfg.rnn.T;
    c.tbptt.dni_enabled = cfg.rnn.dni;
    c.tbptt.aux_enabled = cfg.rnn.aux;
    c.tbptt.sg_scale = cfg.rnn.sg_scale;
    c.tbptt.backprop_sg_error_into_core = cfg.rnn.sg_into_core;
    c.batch = cfg.batch;
    c.units = cfg.rnn.units;
    c.data_bits = cfg.rnn.data_bits;
    c.budget_episodes = cfg.budget;
    c.lr = cfg.rnn.lr;
    c.sg_lr = cfg.rnn.sg_lr;
    c.seed = cfg.seed;
    return c;
}

class RnnRunner final : public Runner {
  public:
    explicit RnnRunner(const ExperimentConfig& cfg)
        : trainer_(CurriculumTrainer::create(to_curriculum_config(cfg))) {}

    std::vector<std::string> columns() const override {
        return {"window_loss", "sg_loss", "t_task", "max_t_task_solved"};
    }
    bool done() const override {
        return trainer_.result.episodes_consumed >= trainer_.cfg.budget_episodes;
    }

    MetricsRow advance() override {
        if (!trainer_.step()) throw std::logic_error("rnn runner advanced past its budget");
        MetricsRow row;
        row.step = trainer_.result.windows;
        row.samples = trainer_.result.episodes_consumed;
        row.values = {trainer_.last_loss, trainer_.last_sg_loss,
                      static_cast<double>(trainer_.result.curriculum.t_task()),
                      static_cast<double>(trainer_.result.max_t_task_solved)};
        return row;
    }

    void save(CheckpointWriter& w) const override { ckpt_put(w, "trainer", trainer_); }
    void load(const CheckpointReader& r) override { ckpt_get(r, "trainer", trainer_); }

  private:
    CurriculumTrainer trainer_;
};

/// Built-in corpus for rnn_chars when no text file is configured.
constexpr const char* kSampleText =
    "the quiet machine room hums at a steady pitch. every belt and bearing "
    "tells on itself when you listen closely: a new rattle means a loose "
    "guard, a slow whine means a dry shaft. keep the log honest, oil what "
    "squeaks, and measure twice before you swap a part. small habits carry "
    "the whole plant through the busy season, and a short checklist beats "
    "luck every single time the pressure rises.";

class CharsRunner final : public Runner {
  public:
    explicit CharsRunner(const ExperimentConfig& cfg) : cfg_(cfg) {
        std::vector<unsigned char> bytes;
        if (cfg.chars_path.empty()) {
            const std::string s = kSampleText;
            bytes.assign(s.begin(), s.end());
        } else {
            std::ifstream f(cfg.chars_path, std::ios::binary);
            if (!f) throw std::runtime_error("chars: cannot open '" + cfg.chars_path + "'");
            bytes.assign((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        }
        stream_ = char_stream(bytes);
        if (stream_.size() < cfg.batch)
            throw std::invalid_argument("chars: the stream is shorter than the batch");
        stride_ = stream_.size() / cfg.batch;
        RngState rng(cfg.seed);
        const std::size_t v = stream_.vocab.size();
        model_ = RnnDniModel::create(v, cfg.rnn.units, v, rng,
                                     {cfg.rnn.lr, 0.9, 0.999, 1e-8},
                                     {cfg.rnn.sg_lr, 0.9, 0.999, 1e-8});
        TbpttConfig t;
        t.T = cfg.rnn.T;
        t.dni_enabled = cfg.rnn.dni;
        t.aux_enabled = cfg.rnn.aux;
        t.sg_scale = cfg.rnn.sg_scale;
        t.backprop_sg_error_into_core = cfg.rnn.sg_into_core;
        window_ = RnnTrainWindow::start(t, cfg.batch, cfg.rnn.units);
    }

    std::vector<std::string> columns() const override {
        return {"window_loss", "loss_per_step", "sg_loss"};
    }
    bool done() const override { return steps_ >= cfg_.budget; }

    MetricsRow advance() override {
        const std::size_t T = cfg_.rnn.T;
        const std::size_t B = cfg_.batch;
        const std::size_t V = stream_.vocab.size();
        std::vector<Tensor> xs(T), targets(T), masks(T);
        for (std::size_t t = 0; t < T; ++t) {
            xs[t] = Tensor({B, V});
            targets[t] = Tensor({B, V});
            masks[t] = Tensor::full({B}, 1.0);
            for (std::size_t s = 0; s < B; ++s) {
                const std::size_t idx = (s * stride_ + pos_ + t) % stream_.size();
                xs[t](s, stream_.input_at(idx)) = 1.0;
                targets[t](s, stream_.target_at(idx)) = 1.0;
            }
        }
        const WindowReport rep = window_step(model_, window_, xs, targets, masks);
        pos_ = (pos_ + T) % stream_.size();
        steps_ += 1;
        MetricsRow row;
        row.step = steps_;
        row.samples = steps_ * T * B;  // characters consumed
        row.values = {rep.loss, rep.loss / static_cast<double>(T), rep.sg_loss};
        return row;
    }

    void save(CheckpointWriter& w) const override {
        w.put_u64("run.steps", steps_);
        w.put_u64("run.pos", pos_);
        ckpt_put(w, "model", model_);
        ckpt_put(w, "window", window_);
    }

    void load(const CheckpointReader& r) override {
        steps_ = r.u64("run.steps");
        pos_ = r.u64("run.pos");
        ckpt_get(r, "model", model_);
        ckpt_get(r, "window", window_);
    }

  private:
    ExperimentConfig cfg_;
    CharStream stream_;
    std::size_t stride_ = 0;
    RnnDniModel model_;
    RnnTrainWindow window_;
    std::uint64_t steps_ = 0;
    std::size_t pos_ = 0;
};

TwoNetConfig to_two_net_config(const ExperimentConfig& cfg, std::size_t input_dim) {
    TwoNetConfig c;
    c.T = cfg.two_net.T;
    c.input_dim = input_dim;
    c.fcn_width = cfg.two_net.fcn_width;
    c.a_units = cfg.two_net.a_units;
    c.b_units = cfg.two_net.b_units;
    c.message_dim = cfg.two_net.message_dim;
    c.sg_feedback_scale = cfg.two_net.sg_feedback_scale;
    c.mode = cfg.two_net.mode;
    c.adam.lr = cfg.two_net.lr;
    c.sg_adam.lr = cfg.two_net.sg_lr;
    return c;
}

class MultiNetRunner final : public Runner {
  public:
    explicit MultiNetRunner(const ExperimentConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {
        const std::string root = resolve_data_root(cfg.data_dir);
        train_ = load_mnist_split(root, "train");
        test_ = load_mnist_split(root, "t10k");
        sys_ = TwoNetSystem::create(to_two_net_config(cfg, train_.images.cols()), cfg.batch, rng_);
    }

    std::vector<std::string> columns() const override {
        return {"loss_a", "loss_b", "sg_loss", "a_error", "b_error", "chance_b_error"};
    }
    bool done() const override { return steps_ >= cfg_.budget; }

    MetricsRow advance() override {
        const std::size_t n =
            cfg_.two_net.mode == TwoNetMode::locked ? cfg_.two_net.T * cfg_.two_net.T
                                                    : cfg_.two_net.T;
        std::vector<Tensor> xs(n);
        std::vector<std::vector<std::size_t>> labels(n);
        for (std::size_t t = 0; t < n; ++t)
            sample_digit_step(train_, cfg_.batch, rng_, xs[t], labels[t]);

        double loss_a = kNaN, loss_b = kNaN, sg_loss = kNaN;
        if (cfg_.two_net.mode == TwoNetMode::locked) {
            const LockedReport rep = locked_joint_step(sys_, xs, labels);
            loss_a = mean_finite(rep.odd_losses);
            loss_b = rep.threes_loss;
        } else {
            const DecoupledReport rep = decoupled_step(sys_, xs, labels);
            loss_a = rep.odd_loss;
            loss_b = rep.threes_loss;
            sg_loss = rep.sg_loss;
        }
        steps_ += 1;
        const bool want_eval =
            (cfg_.eval_every > 0 && steps_ % cfg_.eval_every == 0) || steps_ == cfg_.budget;
        double a_err = kNaN, b_err = kNaN, chance = kNaN;
        if (want_eval) {
            const TwoNetEval ev = evaluate_stream(
                sys_, test_, cfg_.two_net.eval_windows,
                RngState(cfg_.seed ^ (0x9E3779B97F4A7C15ULL * (steps_ + 1))));
            a_err = ev.a_error;
            b_err = ev.b_error;
            chance = ev.chance_b_error;
        }
        MetricsRow row;
        row.step = steps_;
        row.samples = steps_ * n * cfg_.batch;  // digit presentations
        row.values = {loss_a, loss_b, sg_loss, a_err, b_err, chance};
        return row;
    }

    void save(CheckpointWriter& w) const override {
        w.put_u64("run.steps", steps_);
        w.put_u64("run.rng", rng_.raw_state());
        ckpt_put(w, "sys", sys_);
    }

    void load(const CheckpointReader& r) override {
        steps_ = r.u64("run.steps");
        rng_.set_raw_state(r.u64("run.rng"));
        ckpt_get(r, "sys", sys_);
    }

  private:
    ExperimentConfig cfg_;
    RngState rng_;
    MnistDataset train_, test_;
    TwoNetSystem sys_;
    std::uint64_t steps_ = 0;
};

class BpLambdaRunner final : public Runner {
  public:
    explicit BpLambdaRunner(const ExperimentConfig& cfg) : cfg_(cfg) {}

    std::vector<std::string> columns() const override {
        return {"chain_divergence", "simplex_deviation", "oracle_error", "rnn_divergence"};
    }
    bool done() const override { return steps_ >= cfg_.budget; }

    MetricsRow advance() override {
        steps_ += 1;
        const std::uint64_t seed = cfg_.seed + steps_;
        MetricsRow row;
        row.step = steps_;
        row.samples = steps_;
        row.values = {bp_lambda_chain_divergence(4, 6, 4, 10, seed),
                      lambda_simplex_deviation(100, seed), oracle_mixture_error(20, seed),
                      rnn_window_recurrence_divergence(3, 2, seed)};
        return row;
    }

    void save(CheckpointWriter& w) const override { w.put_u64("run.steps", steps_); }
    void load(const CheckpointReader& r) override { steps_ = r.u64("run.steps"); }

  private:
    ExperimentConfig cfg_;
    std::uint64_t steps_ = 0;
};

}  // namespace

std::unique_ptr<Runner> make_runner(const ExperimentConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case ExperimentKind::ff_mnist:
        case ExperimentKind::ff_stochastic:
        case ExperimentKind::ff_unlock:
            return std::make_unique<FfRunner>(cfg);
        case ExperimentKind::rnn_copy:
        case ExperimentKind::rnn_repeat:
            return std::make_unique<RnnRunner>(cfg);
        case ExperimentKind::rnn_chars:
            return std::make_unique<CharsRunner>(cfg);
        case ExperimentKind::multi_net:
            return std::make_unique<MultiNetRunner>(cfg);
        case ExperimentKind::bp_lambda_check:
            return std::make_unique<BpLambdaRunner>(cfg);
    }
    throw std::logic_error("unreachable experiment kind");
}

// ---- driver ----------------------------------------------------------------------

namespace {

std::string format_value(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text_file(const fs::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    f << text;
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::string& resume_path) {
    cfg.validate();
    fs::create_directories(cfg.out_dir);
    std::unique_ptr<Runner> runner = make_runner(cfg);

    std::uint64_t start_step = 0;
    if (!resume_path.empty()) {
        const CheckpointReader reader = CheckpointReader::load(resume_path);
        const std::string kind = reader.bytes("meta.kind");
        if (kind != to_string(cfg.kind))
            throw std::runtime_error("resume: checkpoint holds a '" + kind +
                                     "' run, config says '" + to_string(cfg.kind) + "'");
        runner->load(reader);
        start_step = reader.u64("meta.step");
    }

    const std::string config_text = config_to_json_text(cfg);
    write_text_file(fs::path(cfg.out_dir) / "config.json", config_text);

    const fs::path metrics_path = fs::path(cfg.out_dir) / "metrics.csv";
    std::ofstream csv(metrics_path, std::ios::trunc);
    if (!csv) throw std::runtime_error("cannot open '" + metrics_path.string() + "' for writing");
    csv << "step,samples";
    for (const std::string& col : runner->columns()) csv << "," << col;
    csv << "\n";

    const fs::path ckpt_path = fs::path(cfg.out_dir) / "checkpoint.bin";
    std::uint64_t last_step = start_step;
    const auto save_checkpoint = [&]() {
        CheckpointWriter w;
        w.put_bytes("meta.kind", to_string(cfg.kind));
        w.put_u64("meta.step", last_step);
        w.put_bytes("meta.config", config_text);
        runner->save(w);
        w.save(ckpt_path.string());
    };

    while (!runner->done()) {
        const MetricsRow row = runner->advance();
        last_step = row.step;
        // The final row always lands in the csv; it carries the closing eval.
        if (row.step % cfg.metrics_every == 0 || runner->done()) {
            csv << row.step << "," << row.samples;
            for (double v : row.values) csv << "," << format_value(v);
            csv << "\n";
            csv.flush();  // rows are visible while the run is still going
        }
        if (cfg.checkpoint_every > 0 && row.step % cfg.checkpoint_every == 0) save_checkpoint();
    }
    csv.flush();
    save_checkpoint();

    RunResult rr;
    rr.steps = last_step;
    rr.metrics_path = metrics_path.string();
    rr.checkpoint_path = ckpt_path.string();
    return rr;
}

namespace {

void apply_sweep_value(ExperimentConfig& cfg, const std::string& parameter, double value) {
    const bool rnn_kind = cfg.kind == ExperimentKind::rnn_copy ||
                          cfg.kind == ExperimentKind::rnn_repeat ||
                          cfg.kind == ExperimentKind::rnn_chars;
    if (parameter == "p_update") {
        cfg.ff.p_update = value;
    } else if (parameter == "lr") {
        if (rnn_kind)
            cfg.rnn.lr = value;
        else if (cfg.kind == ExperimentKind::multi_net)
            cfg.two_net.lr = value;
        else
            cfg.ff.lr = value;
    } else if (parameter == "sg_lr") {
        if (rnn_kind)
            cfg.rnn.sg_lr = value;
        else if (cfg.kind == ExperimentKind::multi_net)
            cfg.two_net.sg_lr = value;
        else
            cfg.ff.sg_lr = value;
    } else if (parameter == "sg_scale") {
        cfg.rnn.sg_scale = value;
    } else if (parameter == "budget") {
        cfg.budget = static_cast<std::uint64_t>(value);
    } else if (parameter == "seed") {
        cfg.seed = static_cast<std::uint64_t>(value);
    } else {
        throw std::invalid_argument("sweep: unsupported parameter '" + parameter + "'");
    }
}

}  // namespace

std::vector<RunResult> run_sweep(const ExperimentConfig& base) {
    base.validate();
    if (base.sweep.parameter.empty() || base.sweep.values.empty())
        throw std::invalid_argument("sweep: the config carries no sweep section");
    fs::create_directories(base.out_dir);

    std::vector<RunResult> results;
    json manifest;
    manifest["parameter"] = base.sweep.parameter;
    manifest["runs"] = json::array();
    for (std::size_t i = 0; i < base.sweep.values.size(); ++i) {
        const double value = base.sweep.values[i];
        char name[16];
        std::snprintf(name, sizeof name, "run_%03zu", i);
        ExperimentConfig cfg = base;
        cfg.sweep = SweepSpec{};
        apply_sweep_value(cfg, base.sweep.parameter, value);
        if (base.sweep.parameter != "seed") cfg.seed = base.seed + i;
        cfg.out_dir = (fs::path(base.out_dir) / name).string();
        results.push_back(run_experiment(cfg));
        manifest["runs"].push_back(json{{"index", i},
                                        {"value", value},
                                        {"seed", cfg.seed},
                                        {"dir", std::string(name)},
                                        {"metrics", std::string(name) + "/metrics.csv"}});
    }
    write_text_file(fs::path(base.out_dir) / "sweep_manifest.json", manifest.dump(2) + "\n");
    return results;
}

}  // namespace dni
