"""Fusion functions combining relation matrices or head/channel outputs."""

from dataclasses import dataclass

import numpy as np

from .numeric_core import as_dense


@dataclass(frozen=True)
class FusionSpec:
    strategy: str  # weighted_sum | average | sum | metric | hadamard | concat_linear
    weights: tuple = ()          # weighted_sum fixed weights (when not learnable)
    learnable: bool = False
    metric: str = "max"
    target: int = 0              # concat_linear output width n
    low_rank: int = 0
    input_count: int = 0         # for learnable parameter sizing
    input_widths: tuple = ()     # concat_linear n_i list


def param_length(spec):
    if not spec.learnable:
        return 0
    if spec.strategy == "weighted_sum":
        return spec.input_count
    if spec.strategy == "concat_linear":
        total = sum(spec.input_widths)
        if spec.low_rank:
            return (total + spec.target) * spec.low_rank
        return total * spec.target
    return 0


def fuse(inputs, spec, params=None):
    mats = [as_dense(a) for a in inputs]
    k = len(mats)
    if k == 0:
        raise ValueError("nothing to fuse")
    if spec.strategy != "concat_linear":
        shape = mats[0].shape
        for a in mats[1:]:
            if a.shape != shape:
                raise ValueError("fusion inputs must share a shape")
    if spec.strategy == "weighted_sum":
        if spec.learnable:
            w = np.asarray(params, dtype=float).reshape(-1)
        else:
            w = np.asarray(spec.weights, dtype=float)
        if w.size != k:
            raise ValueError("need one weight per input")
        return sum(wi * a for wi, a in zip(w, mats))
    if spec.strategy == "average":
        return sum(mats) / k
    if spec.strategy == "sum":
        return sum(mats)
    if spec.strategy == "metric":
        stack = np.stack(mats)
        if spec.metric == "max":
            return stack.max(axis=0)
        if spec.metric == "min":
            return stack.min(axis=0)
        if spec.metric == "prod":
            return stack.prod(axis=0)
        if spec.metric == "median":
            return np.median(stack, axis=0)
        raise ValueError("unknown fusion metric %r" % spec.metric)
    if spec.strategy == "hadamard":
        out = mats[0].copy()
        for a in mats[1:]:
            out = out * a
        return out
    if spec.strategy == "concat_linear":
        rows = mats[0].shape[0]
        for a in mats:
            if a.shape[0] != rows:
                raise ValueError("concat_linear inputs must share row counts")
        cat = np.concatenate(mats, axis=1)
        total = cat.shape[1]
        params = np.asarray(params, dtype=float).reshape(-1)
        if spec.low_rank:
            r = spec.low_rank
            p = params[: total * r].reshape(total, r)
            q = params[total * r:].reshape(spec.target, r)
            return cat @ p @ q.T
        return cat @ params.reshape(total, spec.target)
    raise ValueError("unknown fusion strategy %r" % spec.strategy)


def fuse_nodes(nodes, spec, param_node=None):
    """Tape version for head/channel outputs inside the model."""
    from .numeric_core import concat_nodes
    k = len(nodes)
    tape = nodes[0].tape
    if spec.strategy == "sum":
        out = nodes[0]
        for n in nodes[1:]:
            out = out + n
        return out
    if spec.strategy == "average":
        out = nodes[0]
        for n in nodes[1:]:
            out = out + n
        return out.scale(1.0 / k)
    if spec.strategy == "weighted_sum":
        if spec.learnable:
            flat = param_node.reshape((1, -1))
            out = None
            for i, n in enumerate(nodes):
                sel = np.zeros((k, 1))
                sel[i, 0] = 1.0
                wi = flat.matmul(sel)  # 1x1
                term = n * wi
                out = term if out is None else out + term
            return out
        out = None
        for wi, n in zip(spec.weights, nodes):
            term = n.scale(float(wi))
            out = term if out is None else out + term
        return out
    if spec.strategy == "hadamard":
        out = nodes[0]
        for n in nodes[1:]:
            out = out * n
        return out
    if spec.strategy == "metric":
        # not differentiable in general; evaluated on values
        return tape.constant(fuse([n.value for n in nodes], spec))
    if spec.strategy == "concat_linear":
        cat = concat_nodes(nodes, axis=1)
        total = cat.value.shape[1]
        flat = param_node.reshape((1, -1))
        if spec.low_rank:
            r = spec.low_rank
            np_len = total * r
            sel_p = np.zeros((flat.value.shape[1], np_len))
            sel_p[np.arange(np_len), np.arange(np_len)] = 1.0
            sel_q = np.zeros((flat.value.shape[1], spec.target * r))
            sel_q[np_len + np.arange(spec.target * r), np.arange(spec.target * r)] = 1.0
            p = flat.matmul(sel_p).reshape((total, r))
            q = flat.matmul(sel_q).reshape((spec.target, r))
            return cat.matmul(p).matmul(q.transpose())
        w = param_node.reshape((total, spec.target))
        return cat.matmul(w)
    raise ValueError("unknown fusion strategy %r" % spec.strategy)
