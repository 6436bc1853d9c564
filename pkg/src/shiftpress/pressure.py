"""Topological pressure three ways: transfer-operator spectral radius,
variational maximization over Markov measures, and the Caratheodory
cylinder-cover construction, plus the equilibrium measures that witness
the variational value.
"""

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from ._graphs import build_graph
from .errors import ConvergenceError, EnumerationCapError, PreconditionError
from .measures import MarkovMeasure, entropy, integrate, stationary_distribution
from .sft import enumerate_word_array, primitivity, word_code

EIGEN_TOL = 1e-13
EIGEN_MAX_ITER = 1_000_000


@dataclass(frozen=True)
class PressureResult:
    """A pressure value with the method that produced it and its residual."""

    value: float
    method: str
    residual: float
    witness: Optional[MarkovMeasure] = None

    def to_json(self):
        doc = {"value": self.value, "method": self.method, "residual": self.residual}
        return json.dumps(doc, sort_keys=True)


@dataclass(frozen=True)
class TransferOperator:
    """Perron data of the weighted transfer matrix exp(phi) on the block graph."""

    graph: object
    matrix: np.ndarray     # exp(edge phi - shift)
    shift: float
    lam: float             # Perron root of `matrix`
    right: np.ndarray
    left: np.ndarray
    residual: float

    @property
    def pressure(self):
        return self.shift + float(np.log(self.lam))

    def edge_measure(self):
        """Gibbs probability of each edge: l_u M_uv r_v / (lam * l.r)."""
        u, v = self.graph.edges_u, self.graph.edges_v
        mass = self.left[u] * self.matrix[u, v] * self.right[v]
        return mass / mass.sum()

    def moments(self, edge_value_rows):
        """Integrals of edge-local observables against the Gibbs measure."""
        mu = self.edge_measure()
        return np.array([float(mu @ vals) for vals in edge_value_rows])


def require_primitive(spec):
    ok, power = primitivity(spec)
    if not ok:
        raise PreconditionError("transfer matrix is not primitive")
    return power


def transfer_operator(spec, phi, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER):
    """Build and diagonalize the transfer operator for a locally constant phi."""
    require_primitive(spec)
    graph = build_graph(spec, phi.depth)
    weights = graph.edge_values(phi)
    shift = float(weights.max())
    mat = graph.dense(np.exp(weights - shift))
    lam_r, right, res_r, _ = _kernels.power_iteration(mat, tol, max_iter)
    lam_l, left, res_l, _ = _kernels.power_iteration(mat.T, tol, max_iter)
    residual = max(res_r, res_l)
    if residual > tol:
        raise ConvergenceError(
            f"power iteration stalled at residual {residual:.3e}", best=(lam_r, lam_l)
        )
    lam = float(left @ mat @ right / (left @ right))
    return TransferOperator(graph, mat, shift, lam, right, left, residual)


def spectral_pressure(spec, phi, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER):
    """log of the Perron eigenvalue of the transfer operator."""
    op = transfer_operator(spec, phi, tol, max_iter)
    return PressureResult(op.pressure, "spectral", op.residual)


def equilibrium_measure(spec, phi, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER):
    """The Gibbs-Markov measure attaining the variational supremum for phi."""
    op = transfer_operator(spec, phi, tol, max_iter)
    return _measure_from_operator(op)


def _measure_from_operator(op):
    graph = op.graph
    p = op.matrix * op.right[None, :] / (op.lam * op.right[:, None])
    p /= p.sum(axis=1, keepdims=True)
    pi = stationary_distribution(p)
    return MarkovMeasure(graph.spec, graph.depth - 1, p, pi)


def variational_pressure(spec, phi, order=None, tol=EIGEN_TOL, max_iter=EIGEN_MAX_ITER):
    """sup of entropy + integral over Markov measures, with its maximizer.

    The maximizer is the Gibbs-Markov measure; the reported value is
    recomputed from the witness as entropy(mu) + integral(phi, mu), an
    arithmetic path independent of the eigenvalue logarithm.
    """
    op = transfer_operator(spec, phi, tol, max_iter)
    mu = _measure_from_operator(op)
    natural = op.graph.depth - 1
    if order is not None:
        if order < phi.depth - 1:
            raise PreconditionError("order must be at least the potential depth minus one")
        if order > natural:
            mu = mu.lift(order)
    value = entropy(mu) + integrate(phi, mu)
    return PressureResult(value, "variational", op.residual + 1e-14, witness=mu)


def _sup_birkhoff_by_cylinder(spec, phi, n, cylinders):
    """Exact sup of S_n phi over each cylinder, via base sums plus a
    max-plus tail over the free symbols past the cylinder depth."""
    m = spec.alphabet_size
    k = phi.depth
    length = cylinders.shape[1]
    table = np.nan_to_num(phi.table, nan=-np.inf)
    n_inside = min(n, length - k + 1)
    base = np.zeros(len(cylinders))
    for i in range(n_inside):
        codes = np.zeros(len(cylinders), dtype=np.int64)
        for j in range(k):
            codes = codes * m + cylinders[:, i + j]
        base += table[codes]
    missing = n - n_inside
    if missing == 0:
        return base
    graph = build_graph(spec, k)
    weights = graph.edge_values(phi)
    value = np.zeros(graph.n_states)
    for _ in range(missing):
        nxt = np.full(graph.n_states, -np.inf)
        np.maximum.at(nxt, graph.edges_u, weights + value[graph.edges_v])
        value = nxt
    index = {word_code(row, m): i for i, row in enumerate(graph.states)}
    tail_states = np.array(
        [index[word_code(row[-(graph.depth - 1) :], m)] for row in cylinders], dtype=np.int64
    )
    return base + value[tail_states]


def cover_pressure(
    spec,
    phi,
    n,
    epsilon_index=0,
    restrict_to=None,
    cap=None,
    bisect_tol=1e-12,
):
    """Finite-n Caratheodory pressure from an equal-depth cylinder cover.

    Covers the shift space by cylinders of depth n + epsilon_index, sums
    exp(-t n + sup of the n-term Birkhoff sum over each cylinder), and
    bisects in t for the value where the sum crosses 1.  ``restrict_to``
    confines the cover to a sub-collection of cylinders (monotonicity
    checks on subsets of the space).
    """
    if n < 1:
        raise PreconditionError("cover length must be >= 1")
    if epsilon_index < 0:
        raise PreconditionError("epsilon_index must be >= 0")
    depth = n + epsilon_index
    if depth < phi.depth:
        raise PreconditionError("cylinders shallower than the potential depth")
    try:
        cylinders = enumerate_word_array(spec, depth, cap)
    except EnumerationCapError:
        raise
    if restrict_to is not None:
        wanted = {word_code(w.symbols, spec.alphabet_size) for w in restrict_to}
        keep = [
            i
            for i, row in enumerate(cylinders)
            if word_code(row, spec.alphabet_size) in wanted
        ]
        if not keep:
            raise PreconditionError("restriction matches no admissible cylinder")
        cylinders = cylinders[keep]
    sups = _sup_birkhoff_by_cylinder(spec, phi, n, cylinders)

    def log_cover_sum(t):
        return float(logsumexp(sups - t * n))

    lo = float(sups.min() / n) - 1.0
    hi = float(logsumexp(sups) / n) + 1.0
    if log_cover_sum(lo) < 0 or log_cover_sum(hi) > 0:
        raise ConvergenceError("cover-sum bracket failed")
    while hi - lo > bisect_tol:
        mid = 0.5 * (lo + hi)
        if log_cover_sum(mid) > 0:
            lo = mid
        else:
            hi = mid
    value = 0.5 * (lo + hi)
    return PressureResult(value, "cover", 0.5 * (hi - lo) + bisect_tol)
