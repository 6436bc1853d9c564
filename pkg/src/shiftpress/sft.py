"""Subshifts of finite type: admissible words, locally constant potentials,
and the word-space ultrametric induced by a positive potential.

A subshift is given by a 0/1 transfer matrix over an alphabet {0..m-1}; a
potential of depth k is a real table on admissible k-words, evaluated on a
sequence by reading the window starting at each position.
"""

from dataclasses import dataclass, field
from functools import reduce
from itertools import product

import numpy as np

from .errors import EnumerationCapError, PreconditionError

ENUMERATION_CAP = 1 << 26


def _frozen(arr):
    arr = np.asarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SubshiftSpec:
    """Alphabet size and 0/1 transfer matrix defining the shift space."""

    transfer: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.transfer, dtype=np.uint8)
        if t.ndim != 2 or t.shape[0] != t.shape[1]:
            raise PreconditionError("transfer matrix must be square")
        if not np.isin(t, (0, 1)).all():
            raise PreconditionError("transfer entries must be 0 or 1")
        if (t.sum(axis=1) == 0).any() or (t.sum(axis=0) == 0).any():
            raise PreconditionError("every symbol needs an outgoing and an incoming transition")
        object.__setattr__(self, "transfer", _frozen(t))

    @property
    def alphabet_size(self):
        return self.transfer.shape[0]

    def __eq__(self, other):
        return isinstance(other, SubshiftSpec) and np.array_equal(self.transfer, other.transfer)

    def __hash__(self):
        return hash(self.transfer.tobytes())

    @classmethod
    def full_shift(cls, m):
        return cls(np.ones((m, m), dtype=np.uint8))

    @classmethod
    def golden_mean(cls):
        return cls([[1, 1], [1, 0]])

    def word_count(self, n):
        """Number of admissible words of length n (sum of entries of A^(n-1))."""
        if n < 1:
            raise PreconditionError("word length must be >= 1")
        a = self.transfer.astype(object)
        power = reduce(lambda x, _: x @ a, range(n - 1), np.eye(self.alphabet_size, dtype=object))
        return int(power.sum())


def primitivity(spec):
    """Least power p with A^p entrywise positive, or (False, None).

    Searches p up to the Wielandt bound (m-1)^2 + 1, above which no power
    of a non-primitive matrix becomes positive.
    """
    m = spec.alphabet_size
    a = spec.transfer.astype(bool)
    power = a.copy()
    for p in range(1, (m - 1) ** 2 + 2):
        if power.all():
            return True, p
        power = power @ a
    return False, None


@dataclass(frozen=True)
class Word:
    """A finite admissible symbol sequence."""

    spec: SubshiftSpec
    symbols: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.symbols, dtype=np.int64)
        if s.ndim != 1 or len(s) == 0:
            raise PreconditionError("a word is a nonempty 1-d symbol sequence")
        if s.min() < 0 or s.max() >= self.spec.alphabet_size:
            raise PreconditionError("symbol out of alphabet range")
        if len(s) > 1 and not self.spec.transfer[s[:-1], s[1:]].all():
            raise PreconditionError("word contains a forbidden transition")
        object.__setattr__(self, "symbols", _frozen(s))

    @classmethod
    def from_string(cls, spec, text):
        return cls(spec, [int(c) for c in text])

    def __len__(self):
        return len(self.symbols)

    def __str__(self):
        return "".join(str(int(c)) for c in self.symbols)

    def __eq__(self, other):
        return (
            isinstance(other, Word)
            and self.spec == other.spec
            and np.array_equal(self.symbols, other.symbols)
        )

    def __hash__(self):
        return hash((self.spec, self.symbols.tobytes()))


def enumerate_words(spec, n, cap=None):
    """All admissible words of length n in lexicographic order."""
    return [Word(spec, row) for row in enumerate_word_array(spec, n, cap)]


def enumerate_word_array(spec, n, cap=None):
    """Admissible length-n words as an int64 array of shape (count, n)."""
    if n < 1:
        raise PreconditionError("word length must be >= 1")
    cap = ENUMERATION_CAP if cap is None else cap
    count = spec.word_count(n)
    if count > cap:
        raise EnumerationCapError(f"{count} words of length {n} exceed the cap {cap}")
    words = np.arange(spec.alphabet_size, dtype=np.int64)[:, None]
    for _ in range(n - 1):
        rows = []
        for row in words:
            for s in np.flatnonzero(spec.transfer[row[-1]]):
                rows.append(np.append(row, s))
        words = np.array(rows, dtype=np.int64)
    return words


def word_code(symbols, m):
    """Big-endian base-m code of a symbol window."""
    code = 0
    for s in symbols:
        code = code * m + int(s)
    return code


@dataclass(frozen=True)
class Potential:
    """A locally constant function of fixed depth on admissible words.

    The dense ``table`` is indexed by the base-m code of a depth-k word;
    entries at inadmissible codes are NaN and must never be read.
    """

    spec: SubshiftSpec
    depth: int
    table: np.ndarray
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.depth < 1:
            raise PreconditionError("potential depth must be >= 1")
        m = self.spec.alphabet_size
        table = np.asarray(self.table, dtype=np.float64)
        if table.shape != (m**self.depth,):
            raise PreconditionError("table size must be alphabet_size**depth")
        mask = admissible_code_mask(self.spec, self.depth)
        if np.isnan(table[mask]).any():
            raise PreconditionError("table is missing an admissible word")
        table = table.copy()
        table[~mask] = np.nan
        object.__setattr__(self, "table", _frozen(table))

    @classmethod
    def constant(cls, spec, value, depth=1, name=""):
        return cls(spec, depth, np.full(spec.alphabet_size**depth, float(value)), name=name)

    @classmethod
    def from_dict(cls, spec, depth, values, name=""):
        """Build from a {word-as-string: value} mapping over admissible words."""
        m = spec.alphabet_size
        table = np.full(m**depth, np.nan)
        mask = admissible_code_mask(spec, depth)
        for text, val in values.items():
            w = Word.from_string(spec, text)
            if len(w) != depth:
                raise PreconditionError(f"word {text!r} does not have depth {depth}")
            table[word_code(w.symbols, m)] = float(val)
        got = ~np.isnan(table)
        if (got & ~mask).any():
            raise PreconditionError("table contains an inadmissible word")
        if (mask & ~got).any():
            raise PreconditionError("table is missing an admissible word")
        return cls(spec, depth, table, name=name)

    @classmethod
    def indicator(cls, spec, text, name=""):
        """Indicator of a word's cylinder; identically zero if the word is
        inadmissible (the cylinder is empty in this subshift)."""
        symbols = np.array([int(c) for c in text], dtype=np.int64)
        if len(symbols) == 0 or symbols.min() < 0 or symbols.max() >= spec.alphabet_size:
            raise PreconditionError("indicator word must be a nonempty string over the alphabet")
        m = spec.alphabet_size
        table = np.zeros(m ** len(symbols))
        code = word_code(symbols, m)
        if admissible_code_mask(spec, len(symbols))[code]:
            table[code] = 1.0
        return cls(spec, len(symbols), table, name=name or f"1[{text}]")

    def value(self, symbols):
        """Value on the admissible window ``symbols`` (length == depth)."""
        v = self.table[word_code(symbols, self.spec.alphabet_size)]
        if np.isnan(v):
            raise PreconditionError("potential read at an inadmissible word")
        return float(v)

    def values_dict(self):
        words = enumerate_words(self.spec, self.depth)
        return {str(w): self.value(w.symbols) for w in words}

    def lift(self, depth):
        """The same function represented on deeper words."""
        if depth < self.depth:
            raise PreconditionError("can only lift to a greater or equal depth")
        if depth == self.depth:
            return self
        m = self.spec.alphabet_size
        table = np.full(m**depth, np.nan)
        for row in enumerate_word_array(self.spec, depth):
            table[word_code(row, m)] = self.table[word_code(row[: self.depth], m)]
        return Potential(self.spec, depth, table, name=self.name)

    def _binary(self, other, op):
        if isinstance(other, Potential):
            if other.spec != self.spec:
                raise PreconditionError("potentials live on different subshifts")
            depth = max(self.depth, other.depth)
            a, b = self.lift(depth), other.lift(depth)
            with np.errstate(invalid="ignore"):
                return Potential(self.spec, depth, op(a.table, b.table))
        with np.errstate(invalid="ignore"):
            return Potential(self.spec, self.depth, op(self.table, float(other)), name=self.name)

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        with np.errstate(invalid="ignore"):
            return Potential(self.spec, self.depth, self.table * float(scalar), name=self.name)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def min_value(self):
        return float(np.nanmin(self.table))

    def max_value(self):
        return float(np.nanmax(self.table))


def admissible_code_mask(spec, depth):
    """Boolean mask over base-m codes marking admissible depth-k words."""
    m = spec.alphabet_size
    mask = np.ones(m, dtype=bool)
    for _ in range(depth - 1):
        # extend each admissible word code by one symbol
        allowed = spec.transfer.astype(bool)
        new = np.zeros(len(mask) * m, dtype=bool)
        last = np.arange(len(mask)) % m
        for s in range(m):
            new[np.flatnonzero(mask & allowed[last, s]) * m + s] = True
        mask = new
    return mask


def disagreement_index(x, y):
    """1-based index of the first differing symbol; min(len)+1 for a proper prefix."""
    a, b = x.symbols, y.symbols
    n = min(len(a), len(b))
    diff = np.flatnonzero(a[:n] != b[:n])
    if len(diff):
        return int(diff[0]) + 1
    return n + 1


def d_phi_distance(x, y, phi):
    """Ultrametric distance exp(-min S_nu phi) between two admissible words.

    The minimum of the nu-term Birkhoff sum runs over admissible sequences
    agreeing with x on the first nu-1 symbols; only the final ``depth``
    symbols are free, so the minimum is taken exactly over all admissible
    completions.
    """
    if phi.min_value() <= 0.0:
        raise PreconditionError("the scale potential must be strictly positive")
    if len(x) == len(y) and np.array_equal(x.symbols, y.symbols):
        return 0.0
    nu = disagreement_index(x, y)
    if nu == 1:
        return 1.0
    m = phi.spec.alphabet_size
    k = phi.depth
    prefix = x.symbols[: nu - 1]
    # windows 0..nu-1 of S_nu phi; those ending inside the prefix are fixed
    base = 0.0
    for i in range(nu):
        if i + k <= nu - 1:
            base += phi.value(prefix[i : i + k])
    free = k  # free symbols beyond the pinned prefix reached by some window
    best = np.inf
    last = int(prefix[-1])
    for tail in product(range(m), repeat=free):
        prev = last
        ok = True
        for s in tail:
            if not phi.spec.transfer[prev, s]:
                ok = False
                break
            prev = s
        if not ok:
            continue
        z = np.concatenate([prefix, np.array(tail, dtype=np.int64)])
        total = base
        for i in range(max(0, nu - k), nu):
            total += phi.value(z[i : i + k])
        best = min(best, total)
    return float(np.exp(-best))
