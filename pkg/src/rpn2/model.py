"""Head/layer/model composition, training and diagnostics.

A head computes, per channel,
    inst_post.T @ [ inst_prior.T @ kappa(X @ attr_prior) @ attr_post ] @ psi(w).T
plus the remainder of the head input, with processors applied at their
stations. Heads are fused per layer, layers are stacked.

Data-dependent parameter-free interdependence matrices are constants of the
batch (no gradient flows through them); parametric ones (bilinear and friends)
are differentiated.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fusion as fu
from . import interdependence as itd
from . import reconciliation as rc
from . import transformation as tf
from .numeric_core import (Tape, as_dense, blocks_dot, cross_entropy_node,
                           l1_normalize_node, norm, softmax_node)


@dataclass
class HeadConfig:
    m: int
    n: int
    expansion: tf.ExpansionSpec
    reconciliation: rc.ReconciliationSpec
    channels: int = 1
    remainder: str = "zero"  # zero | identity | linear
    attr_prior: object = None
    attr_post: object = None
    inst_prior: object = None
    inst_post: object = None
    channel_fusion: fu.FusionSpec = field(default_factory=lambda: fu.FusionSpec("sum"))
    processors: dict = field(default_factory=dict)  # input | expansion | output
    # duplicated padding heads use the flexible blockwise path
    dup_blocks: tuple = ()  # (p_count, p) when reconciliation is duplicated_padding


@dataclass
class LayerConfig:
    heads: list
    head_fusion: fu.FusionSpec = field(default_factory=lambda: fu.FusionSpec("average"))


@dataclass
class ModelConfig:
    layers: list


class ParameterStore:
    """Flat parameter vector with a named slot map."""

    def __init__(self):
        self.vector = np.zeros(0)
        self.slots = {}  # name -> (offset, length, shape)

    def add_slot(self, name, shape, init=None):
        length = int(np.prod(shape)) if shape else 0
        off = self.vector.size
        self.slots[name] = (off, length, tuple(shape))
        self.vector = np.concatenate([self.vector, np.zeros(length)])
        if init is not None:
            self.set(name, init)
        return name

    def get(self, name):
        off, length, shape = self.slots[name]
        return self.vector[off: off + length].reshape(shape)

    def set(self, name, values):
        off, length, shape = self.slots[name]
        self.vector[off: off + length] = np.asarray(values, dtype=float).reshape(-1)

    def total(self):
        return self.vector.size


def _interdep_names(k, h):
    return ["attr_prior", "attr_post", "inst_prior", "inst_post"]


def init_store(model, seed=0):
    from .numeric_core import Prng
    store = ParameterStore()
    prng = Prng(seed)
    for k, layer in enumerate(model.layers):
        for h, head in enumerate(layer.heads):
            scale = 1.0 / np.sqrt(max(1, head.m))
            for tag in _interdep_names(k, h):
                spec = getattr(head, tag)
                if spec is None:
                    continue
                l = itd.param_length(spec)
                if l:
                    name = "l%d.h%d.%s" % (k, h, tag)
                    init = (prng.derive(name).uniforms((l,)) * 2 - 1) * scale
                    store.add_slot(name, (l,), init)
            for c in range(head.channels):
                l = rc.param_length(head.reconciliation)
                if l:
                    name = "l%d.h%d.c%d.psi" % (k, h, c)
                    init = (prng.derive(name).uniforms((l,)) * 2 - 1) * scale
                    store.add_slot(name, (l,), init)
            if head.remainder == "linear":
                name = "l%d.h%d.pi" % (k, h)
                init = (prng.derive(name).uniforms((head.m, head.n)) * 2 - 1) * scale
                store.add_slot(name, (head.m, head.n), init)
            l = fu.param_length(head.channel_fusion)
            if l:
                name = "l%d.h%d.cfuse" % (k, h)
                init = (prng.derive(name).uniforms((l,)) * 2 - 1) * scale
                store.add_slot(name, (l,), init)
        l = fu.param_length(layer.head_fusion)
        if l:
            name = "l%d.hfuse" % k
            init = (prng.derive(name).uniforms((l,)) * 2 - 1)
            store.add_slot(name, (l,), init)
    return store


def make_param_nodes(tape, store):
    return {name: tape.parameter(store.get(name), name=name) for name in store.slots}


# ---------------------------------------------------------------------------
# interdependence on the tape


def _post_norm_node(a, post_norm, r):
    if post_norm == "none":
        return a
    if post_norm == "row_l1":
        return l1_normalize_node(a, axis="row")
    if post_norm == "col_l1":
        return l1_normalize_node(a, axis="col")
    if post_norm == "col_softmax":
        return softmax_node(a, axis="col", r=1)
    if post_norm == "scaled_col_softmax":
        return softmax_node(a, axis="col", r=r)
    raise ValueError("unknown post_norm %r" % post_norm)


def build_interdep_node(spec, x_node, param_node):
    """Relation matrix as a tape node; parameter-free data-dependent variants
    become constants of the batch."""
    tape = x_node.tape
    v = spec.variant
    if itd.param_length(spec) == 0:
        a = itd.build_matrix(spec, x_node.value)
        return tape.constant(as_dense(a))
    if isinstance(v, itd.Parameterized):
        if v.reconciliation == "full":
            a = param_node.reshape((v.m, v.m_prime))
        else:
            flat = param_node.reshape((1, -1))
            na = v.m * v.rank
            l = itd.param_length(spec)
            sel_a = np.zeros((l, na))
            sel_a[np.arange(na), np.arange(na)] = 1.0
            sel_b = np.zeros((l, l - na))
            sel_b[na + np.arange(l - na), np.arange(l - na)] = 1.0
            wa = flat.matmul(sel_a).reshape((v.m, v.rank))
            wb = flat.matmul(sel_b).reshape((v.m_prime, v.rank))
            a = wa.matmul(wb.transpose())
    elif isinstance(v, (itd.Bilinear, itd.LowRankBilinear)):
        data = x_node.transpose() if spec.axis == "instance" else x_node
        if isinstance(v, itd.Bilinear):
            w = param_node.reshape((v.dim, v.dim))
            a = data.transpose().matmul(w).matmul(data)
        else:
            flat = param_node.reshape((1, -1))
            half = v.dim * v.rank
            sel_p = np.zeros((2 * half, half))
            sel_p[np.arange(half), np.arange(half)] = 1.0
            sel_q = np.zeros((2 * half, half))
            sel_q[half + np.arange(half), np.arange(half)] = 1.0
            wp = flat.matmul(sel_p).reshape((v.dim, v.rank))
            wq = flat.matmul(sel_q).reshape((v.dim, v.rank))
            left = data.transpose().matmul(wp)
            right = data.transpose().matmul(wq)
            a = left.matmul(right.transpose())
    elif isinstance(v, itd.RpnHead):
        data = x_node.value.T if spec.axis == "instance" else x_node.value
        flat = data.reshape(1, -1)
        expanded = tape.constant(tf.expand(flat, v.expansion))
        psi = rc.reconcile_node(v.reconciliation, param_node)
        out = expanded.matmul(psi.transpose())
        if v.remainder is not None:
            out = out + tape.constant(np.asarray(v.remainder, dtype=float).reshape(1, -1))
        a = out.reshape((v.m, v.m_prime))
    else:
        # parametric hybrids fall back to the dense path without gradients
        a = tape.constant(as_dense(itd.build_matrix(spec, x_node.value,
                                                    param_node.value)))
    return _post_norm_node(a, spec.post_norm, spec.norm_r)


# ---------------------------------------------------------------------------
# forward


def _apply_processor(node, tag):
    if tag in (None, "", "none"):
        return node
    if tag == "tanh":
        return node.tanh()
    if tag == "sigmoid":
        return node.sigmoid()
    if tag == "relu":
        return node.relu()
    if tag == "softmax":
        return softmax_node(node, axis="row", r=1)
    raise ValueError("unknown processor %r" % tag)


def _expand_node(cur, spec):
    tape = cur.tape
    if spec.family == "identity":
        return cur
    if spec.family == "wavelet":
        # wavelet expansion is only supported at the network input
        return tape.constant(tf.expand_wavelet(cur.value, spec))
    # polynomial recurrence, elementwise on the tape, degree-major blocks
    one = tape.constant(np.ones_like(cur.value))
    if spec.family == "hermite":
        p0, p1 = one, cur
    elif spec.family == "laguerre":
        p0, p1 = one, (cur.scale(-1.0) + one.scale(1.0 + spec.alpha))
    elif spec.family == "legendre":
        p0, p1 = one, cur
    elif spec.family == "gegenbauer":
        p0, p1 = one, cur.scale(2.0 * spec.alpha)
    elif spec.family in ("bessel", "reverse_bessel"):
        p0, p1 = one, cur + one
    elif spec.family == "fibonacci":
        p0, p1 = one.scale(0.0), one
    elif spec.family == "lucas":
        p0, p1 = one.scale(2.0), cur
    else:
        raise ValueError("unknown polynomial family %r" % spec.family)
    cols = [p1]
    for n in range(2, spec.d + 1):
        if spec.family == "hermite":
            nxt = cur * p1 - p0.scale(n - 1.0)
        elif spec.family == "laguerre":
            nxt = ((one.scale(2 * n - 1 + spec.alpha) - cur) * p1
                   - p0.scale(n - 1 + spec.alpha)).scale(1.0 / n)
        elif spec.family == "legendre":
            nxt = (cur.scale(2 * n - 1) * p1 - p0.scale(n - 1.0)).scale(1.0 / n)
        elif spec.family == "gegenbauer":
            nxt = (cur.scale(2.0 * (n - 1 + spec.alpha)) * p1
                   - p0.scale(n + 2 * spec.alpha - 2)).scale(1.0 / n)
        elif spec.family == "bessel":
            nxt = cur.scale(2 * n - 1.0) * p1 + p0
        elif spec.family == "reverse_bessel":
            nxt = p1.scale(2 * n - 1.0) + (cur * cur) * p0
        else:  # fibonacci / lucas share the recurrence
            nxt = cur * p1 + p0
        cols.append(nxt)
        p0, p1 = p1, nxt
    from .numeric_core import concat_nodes
    return concat_nodes(cols, axis=1)


def head_forward(x_node, head, param_nodes, k=0, h=0, trace=None):
    tape = x_node.tape
    cur = _apply_processor(x_node, head.processors.get("input"))
    x_station = cur

    def interdep(tag):
        spec = getattr(head, tag)
        if spec is None:
            return None
        pname = "l%d.h%d.%s" % (k, h, tag)
        pnode = param_nodes.get(pname)
        return build_interdep_node(spec, x_station, pnode)

    a_ap = interdep("attr_prior")
    if a_ap is not None:
        cur = cur.matmul(a_ap)
    cur = _expand_node(cur, head.expansion)
    cur = _apply_processor(cur, head.processors.get("expansion"))
    a_post = interdep("attr_post")
    if a_post is not None:
        cur = cur.matmul(a_post)
    a_ip = interdep("inst_prior")
    if a_ip is not None:
        cur = a_ip.transpose().matmul(cur)
    if trace is not None and a_ip is not None:
        trace.setdefault("instance_matrices", []).append(
            ("l%d.h%d.inst_prior" % (k, h), a_ip.value))

    spec = head.reconciliation
    outs = []
    for c in range(head.channels):
        l = rc.param_length(spec)
        if l:
            w_node = param_nodes["l%d.h%d.c%d.psi" % (k, h, c)]
        else:
            w_node = None
        if spec.method == "duplicated_padding":
            outs.append(blocks_dot(cur, w_node, spec.p_count, spec.p))
        elif spec.method == "constant_eye":
            psi = tape.constant(rc.reconcile(spec))
            outs.append(cur.matmul(psi.transpose()))
        else:
            psi = rc.reconcile_node(spec, w_node)
            if cur.value.shape[1] != psi.value.shape[1]:
                raise ValueError(
                    "station reconciliation: expanded width %d != declared D %d"
                    % (cur.value.shape[1], psi.value.shape[1]))
            outs.append(cur.matmul(psi.transpose()))
    if len(outs) == 1:
        out = outs[0]
    else:
        cf_param = param_nodes.get("l%d.h%d.cfuse" % (k, h))
        out = fu.fuse_nodes(outs, head.channel_fusion, cf_param)
    a_iq = interdep("inst_post")
    if a_iq is not None:
        out = a_iq.transpose().matmul(out)

    if head.remainder == "identity":
        if head.m != head.n and not head.dup_blocks:
            raise ValueError("identity remainder needs matching widths")
        out = out + x_station
    elif head.remainder == "linear":
        w_pi = param_nodes["l%d.h%d.pi" % (k, h)]
        out = out + x_station.matmul(w_pi)
    elif head.remainder != "zero":
        raise ValueError("unknown remainder %r" % head.remainder)
    return _apply_processor(out, head.processors.get("output"))


def layer_forward(x_node, layer, param_nodes, k=0, trace=None):
    outs = [head_forward(x_node, head, param_nodes, k, h, trace)
            for h, head in enumerate(layer.heads)]
    if len(outs) == 1:
        return outs[0]
    hf_param = param_nodes.get("l%d.hfuse" % k)
    return fu.fuse_nodes(outs, layer.head_fusion, hf_param)


def model_forward_nodes(x, model, store, tape=None, param_nodes=None, trace=None):
    tape = tape or Tape()
    if param_nodes is None:
        param_nodes = make_param_nodes(tape, store)
    cur = tape.constant(np.asarray(x, dtype=float))
    for k, layer in enumerate(model.layers):
        cur = layer_forward(cur, layer, param_nodes, k, trace)
    return cur, tape, param_nodes


def model_forward(x, model, store):
    out, _, _ = model_forward_nodes(x, model, store)
    return out.value


# ---------------------------------------------------------------------------
# training


def _flatten_grads(store, grads):
    flat = np.zeros_like(store.vector)
    for name, g in grads.items():
        off, length, _ = store.slots[name]
        flat[off: off + length] = np.asarray(g).reshape(-1)
    return flat


class History:
    def __init__(self):
        self.epochs = []

    def append(self, epoch, loss, metric):
        self.epochs.append({"epoch": epoch, "loss": loss, "metric": metric})


def train(model, x, y, loss="mse", optimizer=None, epochs=100, seed=0, store=None):
    """Full-batch gradient training; deterministic given the seed."""
    opt = dict(optimizer or {})
    kind = opt.get("kind", "sgd")
    lr = float(opt.get("lr", 0.01))
    if store is None:
        store = init_store(model, seed)
    x = np.asarray(x, dtype=float)
    velocity = np.zeros_like(store.vector)
    m1 = np.zeros_like(store.vector)
    m2 = np.zeros_like(store.vector)
    history = History()
    for epoch in range(epochs):
        out, tape, _ = model_forward_nodes(x, model, store)
        if loss == "mse":
            target = tape.constant(np.asarray(y, dtype=float))
            diff = out - target
            loss_node = (diff * diff).mean()
            metric = float(np.asarray(loss_node.value).reshape(-1)[0])
        elif loss == "cross_entropy":
            labels = np.asarray(y, dtype=int)
            loss_node = cross_entropy_node(out, labels)
            metric = float((np.argmax(out.value, axis=1) == labels).mean())
        else:
            raise ValueError("unknown loss %r" % loss)
        lv = float(np.asarray(loss_node.value).reshape(-1)[0])
        if not np.isfinite(lv):
            raise FloatingPointError("non-finite loss at epoch %d" % epoch)
        history.append(epoch, lv, metric)
        grads = tape.backward(loss_node)
        g = _flatten_grads(store, grads)
        if kind == "sgd":
            mom = float(opt.get("momentum", 0.0))
            velocity = mom * velocity - lr * g
            store.vector = store.vector + velocity
        elif kind == "adaptive_moments":
            b1 = float(opt.get("beta1", 0.9))
            b2 = float(opt.get("beta2", 0.999))
            eps = float(opt.get("eps", 1e-8))
            m1 = b1 * m1 + (1 - b1) * g
            m2 = b2 * m2 + (1 - b2) * g * g
            t = epoch + 1
            m1h = m1 / (1 - b1 ** t)
            m2h = m2 / (1 - b2 ** t)
            store.vector = store.vector - lr * m1h / (np.sqrt(m2h) + eps)
        else:
            raise ValueError("unknown optimizer %r" % kind)
    return history, store


# ---------------------------------------------------------------------------
# diagnostics


def diagnostics(model, x, store):
    """Per layer: numerical rank and norm terms of instance interdependence
    matrices, nonzero ratios, and the exact learnable parameter totals."""
    trace = {}
    out, _, _ = model_forward_nodes(x, model, store, trace=trace)
    report = {"layers": [], "parameter_total": store.total(),
              "slots": {name: store.slots[name][1] for name in store.slots}}
    x = np.asarray(x, dtype=float)
    for name, a in trace.get("instance_matrices", []):
        applied = a.T  # the matrix that left-multiplies the batch
        s = np.linalg.svd(applied, compute_uv=False)
        rank = int(np.sum(s > 1e-10 * (s[0] if s.size else 1.0)))
        entry = {
            "matrix": name,
            "rank": rank,
            "vc_rank_bound": min(rank, x.shape[1]),
            "norm_infinity": norm(applied, "infinity"),
            "nnz": int(np.count_nonzero(applied)),
            "nnz_ratio": float(np.count_nonzero(applied)) / applied.size,
        }
        if applied.shape[1] == x.shape[0]:
            entry["norm_two_to_infinity_ax"] = norm(applied @ x, "two_to_infinity")
        report["layers"].append(entry)
    report["output_shape"] = list(out.value.shape)
    return report
