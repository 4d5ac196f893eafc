"""Parameter reconciliation: fabricate the n x D coefficient matrix from a
short parameter vector, plus the additive remainder functions.

The fabricated matrix is laid out n x D and is applied as `expanded @ psi.T`.
Frozen random factors are drawn once per (method, seed) with Box-Muller over
the package's splitmix stream, so reconstruction from the same seed is
bit-identical.
"""

from dataclasses import dataclass

import numpy as np

from .numeric_core import Prng


@dataclass(frozen=True)
class ReconciliationSpec:
    method: str  # identity | constant_eye | duplicated_padding | lorr | vera | hypernet_lowrank
    n: int
    D: int
    rank: int = 0
    mid: int = 0          # hypernet hidden width d
    input_len: int = 0    # hypernet declared |w|
    p: int = 0            # duplicated_padding block length
    p_count: int = 0
    seed: int = 0


def param_length(spec):
    if spec.method == "identity":
        return spec.n * spec.D
    if spec.method == "constant_eye":
        return 0
    if spec.method == "duplicated_padding":
        return spec.p
    if spec.method == "lorr":
        return (spec.n + spec.D) * spec.rank
    if spec.method == "vera":
        return spec.n + spec.rank
    if spec.method == "hypernet_lowrank":
        return spec.input_len
    raise ValueError("unknown reconciliation method %r" % spec.method)


class FrozenRandoms:
    """Immutable random factors for vera / hypernet reconciliation."""

    def __init__(self, spec):
        prng = Prng(spec.seed)
        if spec.method == "vera":
            self.A = prng.derive("vera_a").normals((spec.n, spec.rank))
            self.B = prng.derive("vera_b").normals((spec.D, spec.rank))
        elif spec.method == "hypernet_lowrank":
            self.P = prng.derive("hyper_p").normals((spec.input_len, spec.rank))
            self.Q = prng.derive("hyper_q").normals((spec.mid, spec.rank))
            self.S = prng.derive("hyper_s").normals((spec.mid, spec.rank))
            self.T = prng.derive("hyper_t").normals((spec.n * spec.D, spec.rank))
        else:
            raise ValueError("no frozen randoms for %r" % spec.method)


_FROZEN_CACHE = {}


def frozen_randoms(spec):
    key = (spec.method, spec.n, spec.D, spec.rank, spec.mid, spec.input_len, spec.seed)
    if key not in _FROZEN_CACHE:
        _FROZEN_CACHE[key] = FrozenRandoms(spec)
    return _FROZEN_CACHE[key]


def _check_length(spec, w):
    w = np.asarray(w, dtype=float).reshape(-1)
    need = param_length(spec)
    if w.size != need:
        raise ValueError("reconciliation expects %d parameters, got %d" % (need, w.size))
    return w


def reconcile(spec, w=None):
    """n x D coefficient matrix from the parameter vector."""
    w = _check_length(spec, w if w is not None else np.zeros(0))
    if spec.method == "identity":
        return w.reshape(spec.n, spec.D)
    if spec.method == "constant_eye":
        out = np.zeros((spec.n, spec.D))
        np.fill_diagonal(out, 1.0)
        return out
    if spec.method == "duplicated_padding":
        # block layout: row j carries w at columns j*p .. (j+1)*p
        out = np.zeros((spec.p_count, spec.p * spec.p_count))
        for j in range(spec.p_count):
            out[j, j * spec.p: (j + 1) * spec.p] = w
        return out
    if spec.method == "lorr":
        a = w[: spec.n * spec.rank].reshape(spec.n, spec.rank)
        b = w[spec.n * spec.rank:].reshape(spec.D, spec.rank)
        return a @ b.T
    if spec.method == "vera":
        fr = frozen_randoms(spec)
        lam1 = w[: spec.n]
        lam2 = w[spec.n:]
        return (lam1[:, None] * (fr.A * lam2[None, :])) @ fr.B.T
    if spec.method == "hypernet_lowrank":
        fr = frozen_randoms(spec)
        hidden = 1.0 / (1.0 + np.exp(-(w[None, :] @ fr.P) @ fr.Q.T))
        return (((hidden @ fr.S) @ fr.T.T)).reshape(spec.n, spec.D)
    raise ValueError("unknown reconciliation method %r" % spec.method)


def reconcile_node(spec, w_node):
    """Tape version; w_node is a 1 x l (or l,) parameter node."""
    if spec.method == "identity":
        return w_node.reshape((spec.n, spec.D))
    if spec.method == "constant_eye":
        return w_node.tape.constant(reconcile(spec))
    if spec.method == "lorr":
        flat = w_node.reshape((-1,))
        a = flat.reshape((1, -1))
        # slices via constant selection matrices keep the op set small
        na = spec.n * spec.rank
        sel_a = np.zeros((param_length(spec), na))
        sel_a[np.arange(na), np.arange(na)] = 1.0
        nb = spec.D * spec.rank
        sel_b = np.zeros((param_length(spec), nb))
        sel_b[na + np.arange(nb), np.arange(nb)] = 1.0
        wa = a.matmul(sel_a).reshape((spec.n, spec.rank))
        wb = a.matmul(sel_b).reshape((spec.D, spec.rank))
        return wa.matmul(wb.transpose())
    if spec.method == "vera":
        fr = frozen_randoms(spec)
        flat = w_node.reshape((1, -1))
        sel1 = np.zeros((param_length(spec), spec.n))
        sel1[np.arange(spec.n), np.arange(spec.n)] = 1.0
        sel2 = np.zeros((param_length(spec), spec.rank))
        sel2[spec.n + np.arange(spec.rank), np.arange(spec.rank)] = 1.0
        lam1 = flat.matmul(sel1).reshape((spec.n, 1))
        lam2 = flat.matmul(sel2).reshape((1, spec.rank))
        scaled = (lam1 * w_node.tape.constant(fr.A)) * lam2
        return scaled.matmul(w_node.tape.constant(fr.B.T))
    if spec.method == "hypernet_lowrank":
        fr = frozen_randoms(spec)
        flat = w_node.reshape((1, -1))
        t = w_node.tape
        hidden = flat.matmul(t.constant(fr.P)).matmul(t.constant(fr.Q.T)).sigmoid()
        out = hidden.matmul(t.constant(fr.S)).matmul(t.constant(fr.T.T))
        return out.reshape((spec.n, spec.D))
    raise ValueError("no tape path for %r" % spec.method)


# ---------------------------------------------------------------------------
# remainders


def remainder(x, kind, w_pi=None):
    x = np.asarray(x, dtype=float)
    if kind == "zero":
        return np.zeros_like(x)
    if kind == "identity":
        return x
    if kind == "linear":
        w_pi = np.asarray(w_pi, dtype=float)
        if w_pi.shape[0] != x.shape[1]:
            raise ValueError("remainder matrix rows must equal the input width")
        return x @ w_pi
    raise ValueError("unknown remainder kind %r" % kind)
