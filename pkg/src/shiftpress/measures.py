"""Markov and empirical measures on a subshift: entropy, integration,
Birkhoff sums, and a truncated weak* metric.

A Markov measure of order r lives on the admissible r-blocks of the shift;
it assigns every admissible word a cylinder probability through the usual
product formula, which is what integration and the weak* metric consume.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _kernels
from .errors import ConvergenceError, PreconditionError
from .sft import Potential, Word, enumerate_word_array, word_code

STATIONARY_TOL = 1e-14
STATIONARY_MAX_ITER = 1_000_000


def block_states(spec, order):
    """Admissible order-blocks (lex sorted) with their successor structure.

    Returns ``(blocks, index, succ)`` where ``blocks`` is an (B, order)
    array, ``index`` maps a block code to its row, and ``succ[u][v]`` is
    True when block v may follow block u (overlap plus one transfer step).
    """
    blocks = enumerate_word_array(spec, order)
    m = spec.alphabet_size
    index = {word_code(row, m): i for i, row in enumerate(blocks)}
    count = len(blocks)
    succ = np.zeros((count, count), dtype=bool)
    for u, row in enumerate(blocks):
        for s in np.flatnonzero(spec.transfer[row[-1]]):
            nxt = np.append(row[1:], s) if order > 1 else np.array([s])
            succ[u, index[word_code(nxt, m)]] = True
    return blocks, index, succ


def stationary_distribution(transition, tol=STATIONARY_TOL, max_iter=STATIONARY_MAX_ITER):
    """Unique stationary vector of a stochastic matrix with one recurrent class.

    Power-iterates the lazy chain (P + I)/2, which shares the stationary
    vector and converges for periodic supports; a support with more than
    one recurrent class is rejected.
    """
    p = np.asarray(transition, dtype=np.float64)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise PreconditionError("transition matrix must be square")
    if (p < 0).any() or np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
        raise PreconditionError("transition matrix must be row-stochastic")
    n_comp, labels = connected_components(csr_matrix(p > 0), directed=True, connection="strong")
    sinks = set(range(n_comp))
    for u, v in zip(*np.nonzero(p > 0)):
        if labels[u] != labels[v]:
            sinks.discard(labels[u])
    if len(sinks) != 1:
        raise PreconditionError("transition support is reducible: no unique recurrent class")
    pi = np.full(p.shape[0], 1.0 / p.shape[0])
    lazy = 0.5 * (p + np.eye(p.shape[0]))
    for it in range(1, max_iter + 1):
        nxt = pi @ lazy
        nxt /= nxt.sum()
        if it % 8 == 0:
            res = np.abs(pi @ p - pi).max()
            if res <= tol:
                return nxt / nxt.sum()
        pi = nxt
    res = float(np.abs(pi @ p - pi).max())
    if res > tol:
        raise ConvergenceError(f"stationary vector residual {res:.3e} > {tol:.1e}", best=pi)
    return pi


@dataclass(frozen=True)
class MarkovMeasure:
    """Shift-invariant Markov measure on admissible order-blocks."""

    spec: object
    order: int
    transition: np.ndarray
    stationary: np.ndarray

    def __post_init__(self):
        blocks, _, succ = block_states(self.spec, self.order)
        p = np.asarray(self.transition, dtype=np.float64)
        pi = np.asarray(self.stationary, dtype=np.float64)
        if p.shape != (len(blocks), len(blocks)) or pi.shape != (len(blocks),):
            raise PreconditionError("transition/stationary sized for the admissible blocks")
        if ((p > 0) & ~succ).any():
            raise PreconditionError("transition mass on a non-successor block pair")
        if np.abs(p.sum(axis=1) - 1.0).max() > 1e-9:
            raise PreconditionError("transition rows must sum to 1")
        if pi.min() < -1e-15 or abs(pi.sum() - 1.0) > 1e-9:
            raise PreconditionError("stationary vector must be a probability vector")
        if np.abs(pi @ p - pi).max() > 1e-12:
            raise PreconditionError("stationary vector fails pi P = pi at 1e-12")
        p = p.copy()
        p.setflags(write=False)
        pi = np.clip(pi, 0.0, None)
        pi.setflags(write=False)
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "stationary", pi)

    @classmethod
    def from_transition(cls, spec, order, transition):
        pi = stationary_distribution(transition)
        return cls(spec, order, transition, pi)

    @classmethod
    def bernoulli(cls, spec, probs):
        """Independent symbol draws; requires a full shift."""
        if not spec.transfer.all():
            raise PreconditionError("a Bernoulli measure needs the full shift")
        probs = np.asarray(probs, dtype=np.float64)
        p = np.tile(probs, (spec.alphabet_size, 1))
        return cls(spec, 1, p, probs)

    @classmethod
    def from_cycle(cls, spec, word):
        """Uniform measure on the periodic orbit of an admissible cycle word."""
        symbols = word.symbols if isinstance(word, Word) else np.asarray(word)
        if not spec.transfer[symbols[-1], symbols[0]]:
            raise PreconditionError("cycle word does not close up")
        m = spec.alphabet_size
        p = np.zeros((m, m))
        for a, b in zip(symbols, np.roll(symbols, -1)):
            p[a, b] += 1.0
        for a in range(m):
            if p[a].sum() > 0:
                p[a] /= p[a].sum()
            else:
                allowed = spec.transfer[a].astype(np.float64)
                p[a] = allowed / allowed.sum()
        return cls.from_transition(spec, 1, p)

    def lift(self, order):
        """The same measure represented on deeper blocks."""
        if order < self.order:
            raise PreconditionError("can only lift to a greater or equal order")
        if order == self.order:
            return self
        blocks, _, succ = block_states(self.spec, order)
        pi = np.array([self.word_probability(row) for row in blocks])
        p = np.zeros((len(blocks), len(blocks)))
        for u, row in enumerate(blocks):
            for v in np.flatnonzero(succ[u]):
                tail = blocks[v]
                p[u, v] = self._step_probability(np.append(row, tail[-1]))
        return MarkovMeasure(self.spec, order, p, pi)

    def _step_probability(self, window):
        """P(next symbol | last `order` symbols) read from the block chain."""
        _, index, _ = _states_cached(self.spec, self.order)
        m = self.spec.alphabet_size
        u = index[word_code(window[-self.order - 1 : -1], m)]
        v = index[word_code(window[-self.order :], m)]
        return self.transition[u, v]

    def word_probability(self, symbols):
        """Cylinder probability of an admissible word of any length."""
        symbols = np.asarray(symbols, dtype=np.int64)
        r = self.order
        blocks, index, _ = _states_cached(self.spec, r)
        m = self.spec.alphabet_size
        if len(symbols) >= r:
            prob = self.stationary[index[word_code(symbols[:r], m)]]
            for i in range(len(symbols) - r):
                u = index[word_code(symbols[i : i + r], m)]
                v = index[word_code(symbols[i + 1 : i + 1 + r], m)]
                prob *= self.transition[u, v]
            return float(prob)
        lead = len(symbols)
        total = 0.0
        for b, row in enumerate(blocks):
            if np.array_equal(row[:lead], symbols):
                total += self.stationary[b]
        return float(total)

    def cylinder_probability(self, symbols):
        return self.word_probability(symbols)


def _states_cached(spec, order, _cache={}):
    key = (spec, order)
    if key not in _cache:
        _cache[key] = block_states(spec, order)
    return _cache[key]


def entropy(mu):
    """Kolmogorov-Sinai entropy of a Markov measure, in nats."""
    p = mu.transition
    with np.errstate(divide="ignore", invalid="ignore"):
        plogp = np.where(p > 0, p * np.log(p), 0.0)
    return float(-(mu.stationary @ plogp.sum(axis=1)))


def integrate(phi, mu):
    """Integral of a locally constant potential against a Markov measure."""
    if phi.spec != mu.spec:
        raise PreconditionError("potential and measure live on different subshifts")
    words = enumerate_word_array(phi.spec, phi.depth)
    m = phi.spec.alphabet_size
    total = 0.0
    for row in words:
        total += mu.word_probability(row) * phi.table[word_code(row, m)]
    return float(total)


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Depth-k cylinder statistics of the first n windows of a word."""

    spec: object
    depth: int
    counts: np.ndarray
    n: int

    def __post_init__(self):
        counts = np.asarray(self.counts, dtype=np.int64)
        if counts.sum() != self.n:
            raise PreconditionError("window counts must sum to the window length")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    def cylinder_probability(self, symbols):
        """Empirical frequency of a word of length <= depth (marginalized exactly)."""
        symbols = np.asarray(symbols, dtype=np.int64)
        k = len(symbols)
        if k > self.depth:
            raise PreconditionError("empirical depth too shallow for this cylinder")
        m = self.spec.alphabet_size
        lo = word_code(symbols, m) * m ** (self.depth - k)
        hi = lo + m ** (self.depth - k)
        return float(self.counts[lo:hi].sum() / self.n)


def empirical_measure(x, depth, n):
    """Depth-k window counts over the first n positions of a word."""
    if len(x) < n + depth - 1:
        raise PreconditionError("word too short for the requested window")
    counts = _kernels.count_blocks(x.symbols, x.spec.alphabet_size, depth, n)
    return EmpiricalMeasure(x.spec, depth, counts, n)


@dataclass(frozen=True)
class DiracWord:
    """Cylinder probabilities of the point measure at a (finite) word."""

    word: Word

    def cylinder_probability(self, symbols):
        symbols = np.asarray(symbols, dtype=np.int64)
        if len(symbols) > len(self.word):
            raise PreconditionError("word too short to decide this cylinder")
        return 1.0 if np.array_equal(self.word.symbols[: len(symbols)], symbols) else 0.0


def shifted_word(x, offset):
    """The word T^offset x (drops the first `offset` symbols)."""
    return Word(x.spec, x.symbols[offset:])


def dense_family(spec, count):
    """First `count` functions of the fixed dense family: cylinder indicators
    enumerated by depth, then lexicographically."""
    family = []
    depth = 1
    while len(family) < count:
        for row in enumerate_word_array(spec, depth):
            family.append(row)
            if len(family) == count:
                break
        depth += 1
    return family


def family_depth(spec, count):
    """Deepest cylinder among the first `count` test functions."""
    return max(len(w) for w in dense_family(spec, count))


@dataclass(frozen=True)
class RhoResult:
    value: float
    tail_bound: float

    @property
    def upper(self):
        return self.value + self.tail_bound


def rho_distance(a, b, spec, truncation=20):
    """Truncated weak* distance sum_k |a(f_k) - b(f_k)| / 2^k.

    The test family is the fixed cylinder-indicator enumeration; the
    reported tail bound 2^-truncation certifies the untruncated value.
    """
    total = 0.0
    for k, cyl in enumerate(dense_family(spec, truncation), start=1):
        total += abs(a.cylinder_probability(cyl) - b.cylinder_probability(cyl)) / 2.0**k
    return RhoResult(float(total), 2.0 ** (-truncation))


def birkhoff_average(x, phi, n):
    """Average of phi over the first n windows of x."""
    if len(x) < n + phi.depth - 1:
        raise PreconditionError("word too short for the requested window")
    table = np.nan_to_num(phi.table, nan=0.0)
    sums = _kernels.birkhoff_sums(
        x.symbols, table, x.spec.alphabet_size, phi.depth, np.array([n], dtype=np.int64)
    )
    return float(sums[0] / n)


def birkhoff_profile(x, phi, positions):
    """Birkhoff averages of phi at each window length in `positions`."""
    positions = np.asarray(positions, dtype=np.int64)
    if len(positions) and len(x) < positions.max() + phi.depth - 1:
        raise PreconditionError("word too short for the requested windows")
    table = np.nan_to_num(phi.table, nan=0.0)
    sums = _kernels.birkhoff_sums(x.symbols, table, x.spec.alphabet_size, phi.depth, positions)
    return sums / np.maximum(positions, 1)
