"""Data transformation functions: expansions into polynomial/wavelet bases and
compressions (elementwise, linear, patch, feature selection, dimension
reduction, probabilistic sampling).

Polynomial expansions evaluate the family recurrence elementwise and
concatenate the degree blocks [P_1(X) .. P_d(X)], so the output width is m*d;
the degree-0 constant column is excluded.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import grid_geometry as gg


@dataclass(frozen=True)
class ExpansionSpec:
    family: str = "identity"
    d: int = 1
    alpha: float = 0.5
    wavelet: str = "haar"
    s_max: int = 1
    t_max: int = 1
    a: float = 2.0
    b: float = 1.0
    order: int = 1
    wavelet_params: dict = field(default_factory=dict)

    def out_width(self, m):
        if self.family == "identity":
            return m
        if self.family == "wavelet":
            base = self.s_max * self.t_max * m
            return base * base if self.order == 2 else base
        return m * self.d


# ---------------------------------------------------------------------------
# polynomial families


def _poly_seed(family, x, alpha):
    """(P0, P1) of the recurrence."""
    one = np.ones_like(x)
    if family == "hermite":
        return one, x
    if family == "laguerre":
        return one, 1.0 + alpha - x
    if family == "legendre":
        return one, x
    if family == "gegenbauer":
        return one, 2.0 * alpha * x
    if family in ("bessel", "reverse_bessel"):
        return one, x + 1.0
    if family == "fibonacci":
        return np.zeros_like(x), one
    if family == "lucas":
        return 2.0 * one, x
    raise ValueError("unknown polynomial family %r" % family)


def _poly_step(family, x, n, p1, p0, alpha):
    """P_n from P_{n-1}=p1 and P_{n-2}=p0."""
    if family == "hermite":
        return x * p1 - (n - 1) * p0
    if family == "laguerre":
        return ((2 * n - 1 + alpha - x) * p1 - (n - 1 + alpha) * p0) / n
    if family == "legendre":
        return (x * (2 * n - 1) * p1 - (n - 1) * p0) / n
    if family == "gegenbauer":
        if alpha == 0:
            raise ValueError("gegenbauer alpha must be nonzero")
        return (2.0 * x * (n - 1 + alpha) * p1 - (n + 2 * alpha - 2) * p0) / n
    if family == "bessel":
        return (2 * n - 1) * x * p1 + p0
    if family == "reverse_bessel":
        return (2 * n - 1) * p1 + x * x * p0
    if family == "fibonacci":
        return x * p1 + p0
    if family == "lucas":
        return x * p1 + p0
    raise ValueError("unknown polynomial family %r" % family)


def polynomial_values(family, x, d, alpha=0.5):
    """[P_1(x) .. P_d(x)] stacked on the last axis."""
    if d < 1:
        raise ValueError("d must be >= 1")
    x = np.asarray(x, dtype=float)
    p0, p1 = _poly_seed(family, x, alpha)
    cols = [p1]
    for n in range(2, d + 1):
        p0, p1 = p1, _poly_step(family, x, n, p1, p0, alpha)
        cols.append(p1)
    return np.stack(cols, axis=-1)


def expand_polynomial(x, family, d, alpha=0.5):
    x = np.asarray(x, dtype=float)
    b, m = x.shape
    vals = polynomial_values(family, x, d, alpha)  # b x m x d
    # degree-major blocks: [P_1(X), P_2(X), ..., P_d(X)]
    return vals.transpose(0, 2, 1).reshape(b, m * d)


# ---------------------------------------------------------------------------
# wavelets


def mother_wavelet(kind, tau, params=None):
    p = dict(params or {})
    tau = np.asarray(tau, dtype=float)
    if kind == "haar":
        return np.where((tau >= 0) & (tau < 0.5), 1.0,
                        np.where((tau >= 0.5) & (tau < 1.0), -1.0, 0.0))
    if kind == "beta":
        alpha = p.get("alpha", 2.0)
        beta = p.get("beta", 2.0)
        if alpha < 1 or beta < 1:
            raise ValueError("beta wavelet needs alpha, beta >= 1")
        bnorm = math.gamma(alpha) * math.gamma(beta) / math.gamma(alpha + beta)
        inside = (tau > 0) & (tau < 1)
        t = np.where(inside, tau, 0.5)
        return np.where(inside, t ** (alpha - 1) * (1 - t) ** (beta - 1) / bnorm, 0.0)
    if kind == "ricker":
        sigma = p.get("sigma", 1.0)
        amp = 2.0 / (np.sqrt(3.0 * sigma) * np.pi ** 0.25)
        return amp * (1.0 - (tau / sigma) ** 2) * np.exp(-tau ** 2 / (2 * sigma ** 2))
    if kind == "shannon":
        out = np.ones_like(tau)  # limit value at tau = 0
        nz = tau != 0
        out[nz] = (np.sin(2 * np.pi * tau[nz]) - np.sin(np.pi * tau[nz])) / (np.pi * tau[nz])
        return out
    if kind == "dog":
        s1 = p.get("sigma1", 1.0)
        s2 = p.get("sigma2", 2.0)
        g1 = np.exp(-tau ** 2 / (2 * s1 * s1)) / (s1 * np.sqrt(2 * np.pi))
        g2 = np.exp(-tau ** 2 / (2 * s2 * s2)) / (s2 * np.sqrt(2 * np.pi))
        return g1 - g2
    if kind == "meyer":
        out = np.full_like(tau, 2.0 / 3.0 + 4.0 / (3.0 * np.pi))
        nz = tau != 0
        t = tau[nz]
        out[nz] = (np.sin(2 * np.pi / 3 * t) + 4.0 / 3.0 * t * np.cos(4 * np.pi / 3 * t)) \
            / (np.pi * t - 16 * np.pi / 9 * t ** 3)
        return out
    raise ValueError("unknown wavelet kind %r" % kind)


def child_wavelet(kind, x, s, t, a=2.0, b=1.0, params=None):
    """phi_{s,t}(x) = a^{-s/2} phi(x / a^s - t*b)."""
    if a <= 1 or b <= 0:
        raise ValueError("wavelet needs a > 1 and b > 0")
    x = np.asarray(x, dtype=float)
    tau = x / (a ** s) - t * b
    return a ** (-s / 2.0) * mother_wavelet(kind, tau, params)


def expand_wavelet(x, spec):
    x = np.asarray(x, dtype=float)
    nb, m = x.shape
    cols = []
    for s in range(spec.s_max):
        for t in range(spec.t_max):
            cols.append(child_wavelet(spec.wavelet, x, s, t, spec.a, spec.b,
                                      spec.wavelet_params))
    order1 = np.concatenate(cols, axis=1)  # b x (s_max*t_max*m)
    if spec.order == 1:
        return order1
    if spec.order == 2:
        width = order1.shape[1]
        return (order1[:, :, None] * order1[:, None, :]).reshape(nb, width * width)
    raise ValueError("wavelet order must be 1 or 2")


def expand(x, spec):
    if spec.family == "identity":
        return np.asarray(x, dtype=float)
    if spec.family == "wavelet":
        return expand_wavelet(x, spec)
    return expand_polynomial(x, spec.family, spec.d, spec.alpha)


# ---------------------------------------------------------------------------
# compression


@dataclass(frozen=True)
class CompressionSpec:
    method: str
    # linear
    matrix: object = None
    # patch
    grid: object = None
    shape: object = None
    packing: object = None
    mapping: str = "operator"   # norm | entropy | metric | operator
    mapping_kind: object = "max"  # p for norm; kind tags otherwise
    # selection / reduction / probabilistic
    k: int = 0
    mode: str = ""
    s: float = 1.0
    d: int = 0
    tuple_k: int = 1
    distribution: str = "uniform"
    log_likelihood: bool = False


def compress_elementwise(x, method, matrix=None):
    x = np.asarray(x, dtype=float)
    if method == "identity":
        return x
    if method == "reciprocal":
        if np.any(np.abs(x) < 1e-12):
            raise ValueError("reciprocal compression needs entries away from zero")
        return 1.0 / x
    if method == "linear":
        c = np.asarray(matrix, dtype=float)
        if c.shape[0] != x.shape[1]:
            raise ValueError("linear compression matrix row mismatch")
        return x @ c
    raise ValueError("unknown elementwise method %r" % method)


def _patch_map(vals, mapping, kind):
    if mapping == "norm":
        p = kind
        if p == 1:
            return float(np.sum(np.abs(vals)))
        if p == 2:
            return float(np.sqrt(np.sum(vals ** 2)))
        if p in ("inf", np.inf):
            return float(np.max(np.abs(vals))) if vals.size else 0.0
        raise ValueError("norm p must be 1, 2 or inf")
    if mapping == "entropy":
        if np.any(vals <= 0):
            raise ValueError("entropy mapping needs positive patch values")
        p = vals / vals.sum()
        return float(-np.sum(p * np.log(p)))
    if mapping == "metric":
        if kind == "variance":
            return float(np.var(vals))
        if kind == "std":
            return float(np.std(vals))
        if kind == "skewness":
            sd = np.std(vals)
            if sd == 0:
                return 0.0
            return float(np.mean(((vals - vals.mean()) / sd) ** 3))
        raise ValueError("unknown metric kind %r" % kind)
    if mapping == "operator":
        if kind == "max":
            return float(np.max(vals))
        if kind == "min":
            return float(np.min(vals))
        if kind == "sum":
            return float(np.sum(vals))
        if kind == "prod":
            return float(np.prod(vals))
        if kind == "arith_mean":
            return float(np.mean(vals))
        if kind == "geo_mean":
            if np.any(vals <= 0):
                return 0.0  # defined only for positive data
            return float(np.exp(np.mean(np.log(vals))))
        if kind == "harmonic_mean":
            if np.any(vals <= 0):
                return 0.0
            return float(len(vals) / np.sum(1.0 / vals))
        if kind == "median":
            return float(np.median(vals))
        if kind == "mode":
            uniq, counts = np.unique(vals, return_counts=True)
            return float(uniq[np.argmax(counts)])
        raise ValueError("unknown operator kind %r" % kind)
    raise ValueError("unknown patch mapping %r" % mapping)


def compress_patch(x, grid, shape, packing, mapping="operator", kind="max"):
    """Per instance, per packing center: gather the (zero-padded) patch and
    apply the scalar mapping. Output width = number of patches."""
    x = np.asarray(x, dtype=float)
    if x.shape[1] != grid.size:
        raise ValueError("batch width must equal the grid size")
    offsets = gg.patch_offsets(shape)
    centers = gg.packing_centers(grid, packing, shape)
    p = len(offsets)
    cols = []
    for center in centers:
        cells = gg.patch_cells(center, offsets, grid)
        vals = np.zeros((x.shape[0], p))
        if cells:
            vals[:, : len(cells)] = x[:, cells]
        cols.append([_patch_map(vals[i], mapping, kind) for i in range(x.shape[0])])
    return np.asarray(cols, dtype=float).T


# -- incremental feature selection ------------------------------------------


class SelectorState:
    def __init__(self, m, mode="variance", k=1, early_stop_epoch=None):
        if k > m:
            raise ValueError("k cannot exceed the attribute count")
        self.m = m
        self.mode = mode
        self.k = k
        self.early_stop_epoch = early_stop_epoch
        self.v_bar = np.zeros(m)
        self.t = 0
        self.sim_acc = np.zeros((m, m))
        self.frozen = False
        self.selected = None

    def freeze(self):
        self.frozen = True


def _greedy_clusters(sim, k):
    """Deterministic partition: seeds are the k mutually most dissimilar
    attributes (greedy farthest-first from attribute 0), the rest join the
    most similar seed."""
    m = sim.shape[0]
    seeds = [0]
    while len(seeds) < k:
        best, best_score = None, None
        for cand in range(m):
            if cand in seeds:
                continue
            score = max(sim[cand, s] for s in seeds)
            if best_score is None or score < best_score or \
                    (score == best_score and cand < best):
                best, best_score = cand, score
        seeds.append(best)
    clusters = {s: [s] for s in seeds}
    for i in range(m):
        if i in seeds:
            continue
        nearest = max(seeds, key=lambda s: (sim[i, s], -s))
        clusters[nearest].append(i)
    return [sorted(clusters[s]) for s in sorted(clusters)]


def select_features(state, x, mode=None, k=None):
    """Streaming selection; the running variance record follows the
    batch-averaging rule v_bar <- ((t-1) v_bar + v) / t."""
    x = np.asarray(x, dtype=float)
    mode = mode or state.mode
    k = k or state.k
    if k > state.m:
        raise ValueError("k cannot exceed the attribute count")
    if not state.frozen:
        v = x.var(axis=0)
        state.t += 1
        state.v_bar = ((state.t - 1) * state.v_bar + v) / state.t
        if mode == "cluster":
            xc = x - x.mean(axis=0)
            nrm = np.sqrt(np.sum(xc * xc, axis=0))
            nrm = np.where(nrm > 0, nrm, 1.0)
            z = xc / nrm
            cos = np.abs(z.T @ z)
            state.sim_acc = ((state.t - 1) * state.sim_acc + cos) / state.t
        if state.early_stop_epoch is not None and state.t >= state.early_stop_epoch:
            state.frozen = True
    if mode == "variance":
        order = np.lexsort((np.arange(state.m), -state.v_bar))
        selected = sorted(order[:k].tolist())
    elif mode == "cluster":
        clusters = _greedy_clusters(state.sim_acc, k)
        selected = sorted(max(c, key=lambda i: (state.v_bar[i], -i)) for c in clusters)
    else:
        raise ValueError("unknown selection mode %r" % mode)
    state.selected = selected
    return state, x[:, selected], selected


# -- dimension reduction -----------------------------------------------------


class PcaState:
    """Streaming mean/covariance accumulator; the projection basis is the
    top-k eigenvectors of the running covariance."""

    def __init__(self, m, k):
        if k > m:
            raise ValueError("k cannot exceed the attribute count")
        self.m = m
        self.k = k
        self.count = 0
        self.mean = np.zeros(m)
        self.second = np.zeros((m, m))
        self.basis = None
        self.frozen = False

    def update(self, x):
        if self.frozen:
            return
        for row in x:
            self.count += 1
            delta = row - self.mean
            self.mean += delta / self.count
            self.second += np.outer(delta, row - self.mean)
        cov = self.second / max(self.count - 1, 1)
        vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
        order = np.argsort(vals)[::-1]
        self.basis = vecs[:, order[: self.k]]


def reduce_dimension(state, x, mode, k, prng=None, s=1.0):
    x = np.asarray(x, dtype=float)
    m = x.shape[1]
    if k > m:
        raise ValueError("k cannot exceed the attribute count")
    if mode == "ipca":
        if state is None:
            state = PcaState(m, k)
        state.update(x)
        return state, (x - state.mean) @ state.basis
    if mode in ("random_projection_gaussian", "random_projection_sparse"):
        if state is None:
            if prng is None:
                raise ValueError("random projection needs a seeded stream")
            if mode.endswith("gaussian"):
                r = prng.normals((m, k)) / np.sqrt(k)
            else:
                r = _sparse_projection(prng, m, k, s)
            state = {"matrix": r}
        return state, x @ state["matrix"]
    raise ValueError("unknown reduction mode %r" % mode)


def _sparse_projection(prng, m, k, s):
    """Entries +-sqrt(1/(s*k)) each with probability s/2, zero otherwise."""
    if not (0.0 < s <= 1.0):
        raise ValueError("s must be in (0, 1]")
    mag = np.sqrt(1.0 / (s * k))
    out = np.zeros((m, k))
    for i in range(m):
        for j in range(k):
            u = prng.uniform()
            if u < s / 2.0:
                out[i, j] = mag
            elif u < s:
                out[i, j] = -mag
    return out


def sparse_projection_matrix(prng, m, k, s=1.0):
    return _sparse_projection(prng, m, k, s)


# -- probabilistic compression ----------------------------------------------


def _softmax_scores(row):
    z = row - row.max()
    e = np.exp(z)
    return e / e.sum()


def compress_probabilistic(x, spec, prng):
    """Sampling-based compression.

    naive: per instance, d attributes drawn without replacement, weighted by
    softmax scores over the instance. combinatorial: d tuples drawn uniformly
    from the order-1..tuple_k combinations (uniform tuple sampling; the paper
    leaves the law unspecified), summarized by the tuple sum. The optional
    log-likelihood output maps sampled values through the standard Gaussian
    log-density.
    """
    x = np.asarray(x, dtype=float)
    b, m = x.shape
    d = spec.d
    out = np.zeros((b, d))
    if spec.mode == "naive":
        if d > m:
            raise ValueError("d cannot exceed the attribute count")
        for i in range(b):
            weights = _softmax_scores(x[i]).tolist()
            avail = list(range(m))
            picks = []
            for _ in range(d):
                j = prng.choice_weighted([weights[a] for a in avail])
                picks.append(avail.pop(j))
            out[i] = x[i, picks]
    elif spec.mode == "combinatorial":
        if not (1 <= spec.tuple_k <= 3):
            raise ValueError("tuple order must be between 1 and 3")
        import itertools
        tuples = []
        for order in range(1, spec.tuple_k + 1):
            tuples.extend(itertools.combinations(range(m), order))
        for i in range(b):
            for j in range(d):
                t = tuples[prng.randint(len(tuples))]
                out[i, j] = x[i, list(t)].sum()
    else:
        raise ValueError("unknown probabilistic mode %r" % spec.mode)
    if spec.log_likelihood:
        out = -0.5 * out ** 2 - 0.5 * np.log(2.0 * np.pi)
    return out
