"""Recurrent iterated function systems: scale potentials, symbolic-to-
geometric projection, and Hausdorff dimensions of projected level sets.

Each allowed transition (i, j) of the subshift carries an affine
similarity; the attractor pieces satisfy E_i = union over allowed j of
map_ij(E_j).  With constant contraction ratios the scale function is an
exact depth-2 potential, and the dimension of a projected level set is
the Bowen root of the corresponding constrained pressure.
"""

import json
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError
from .sft import Potential, SubshiftSpec, word_code
from .spectra import TargetSet, bowen_root, bs_dimension_set


@dataclass(frozen=True)
class Similarity:
    """x -> ratio * orthogonal @ x + translate on R^n."""

    ratio: float
    orthogonal: np.ndarray
    translate: np.ndarray

    def __post_init__(self):
        o = np.atleast_2d(np.asarray(self.orthogonal, dtype=np.float64))
        t = np.atleast_1d(np.asarray(self.translate, dtype=np.float64))
        if not 0.0 < self.ratio < 1.0:
            raise PreconditionError("similarity ratio must lie in (0, 1)")
        if o.shape[0] != o.shape[1] or o.shape[0] != len(t):
            raise PreconditionError("orthogonal part and translation disagree on dimension")
        if np.abs(o @ o.T - np.eye(len(t))).max() > 1e-9:
            raise PreconditionError("orthogonal part must satisfy O O^T = I")
        object.__setattr__(self, "orthogonal", o)
        object.__setattr__(self, "translate", t)

    def apply(self, x):
        return self.ratio * (self.orthogonal @ np.asarray(x, dtype=np.float64)) + self.translate

    def fixed_point(self):
        n = len(self.translate)
        return np.linalg.solve(np.eye(n) - self.ratio * self.orthogonal, self.translate)


@dataclass(frozen=True)
class RecurrentIFS:
    """A similarity per allowed transition of the subshift."""

    spec: SubshiftSpec
    maps: dict

    def __post_init__(self):
        allowed = {
            (i, j)
            for i in range(self.spec.alphabet_size)
            for j in np.flatnonzero(self.spec.transfer[i])
        }
        keys = {(int(i), int(j)) for i, j in self.maps}
        if keys != {(int(i), int(j)) for i, j in allowed}:
            raise PreconditionError("maps must exist exactly where the transfer matrix is 1")
        dims = {len(sim.translate) for sim in self.maps.values()}
        if len(dims) != 1:
            raise PreconditionError("all maps must act on the same space")

    @property
    def geo_dim(self):
        return len(next(iter(self.maps.values())).translate)

    @classmethod
    def from_json(cls, doc):
        spec = SubshiftSpec(doc["transfer"])
        maps = {}
        for key, entry in doc["maps"].items():
            i, j = (int(c) for c in key)
            maps[(i, j)] = Similarity(
                float(entry["ratio"]),
                np.asarray(entry["orthogonal"], dtype=np.float64),
                np.asarray(entry["translate"], dtype=np.float64),
            )
        return cls(spec, maps)

    def to_json(self):
        return {
            "transfer": self.spec.transfer.astype(int).tolist(),
            "maps": {
                f"{i}{j}": {
                    "ratio": sim.ratio,
                    "orthogonal": sim.orthogonal.tolist(),
                    "translate": sim.translate.tolist(),
                }
                for (i, j), sim in self.maps.items()
            },
        }

    @classmethod
    def interval_maps(cls, ratios, translates=None):
        """Classic one-dimensional IFS on the full shift: map i has the given
        ratio, translates default to an equal spread in [0, 1]."""
        m = len(ratios)
        spec = SubshiftSpec.full_shift(m)
        if translates is None:
            translates = [i / (m - 1) * (1 - r) for i, r in zip(range(m), ratios)] if m > 1 else [0.0]
        maps = {}
        for i in range(m):
            for j in range(m):
                maps[(i, j)] = Similarity(float(ratios[i]), [[1.0]], [float(translates[i])])
        return cls(spec, maps)


def scale_potential(ifs):
    """Depth-2 potential -log s_ij; strictly positive since ratios are < 1."""
    m = ifs.spec.alphabet_size
    table = np.full(m * m, np.nan)
    for (i, j), sim in ifs.maps.items():
        table[word_code([i, j], m)] = -np.log(sim.ratio)
    return Potential(ifs.spec, 2, table, name="scale")


def attractor_radius(ifs):
    """Radius bound: every piece lies in the ball of this radius at 0."""
    t_max = max(float(np.linalg.norm(sim.translate)) for sim in ifs.maps.values())
    s_max = max(sim.ratio for sim in ifs.maps.values())
    return t_max / (1.0 - s_max)


def project_point(ifs, x, depth):
    """Apply the first `depth` edge maps of the word to a seed point.

    Returns (point, radius_bound): the true projection of any extension of
    the word lies within the bound of the returned point.
    """
    symbols = x.symbols if hasattr(x, "symbols") else np.asarray(x, dtype=np.int64)
    if len(symbols) < depth + 1:
        raise PreconditionError("word too short: projection depth needs depth+1 symbols")
    seed = ifs.maps[(int(symbols[depth - 1]), int(symbols[depth]))].fixed_point()
    point = seed
    shrink = 1.0
    for i in range(depth - 1, -1, -1):
        sim = ifs.maps[(int(symbols[i]), int(symbols[i + 1]))]
        point = sim.apply(point)
        shrink *= sim.ratio
    return point, 2.0 * attractor_radius(ifs) * shrink


def piece_hulls(ifs, sweeps=200):
    """Interval hulls [a_i, b_i] of the attractor pieces (1-d systems)."""
    if ifs.geo_dim != 1:
        raise PreconditionError("interval hulls are only computed for 1-d systems")
    m = ifs.spec.alphabet_size
    r = attractor_radius(ifs)
    lo = np.full(m, -r)
    hi = np.full(m, r)
    for _ in range(sweeps):
        new_lo = np.full(m, np.inf)
        new_hi = np.full(m, -np.inf)
        for (i, j), sim in ifs.maps.items():
            ends = [sim.apply([lo[j]])[0], sim.apply([hi[j]])[0]]
            new_lo[i] = min(new_lo[i], min(ends))
            new_hi[i] = max(new_hi[i], max(ends))
        lo, hi = new_lo, new_hi
    return lo, hi


def check_open_set_condition(ifs, tol=1e-9):
    """Numeric separation check for 1-d systems: within each piece the
    first-level images may share at most endpoints."""
    lo, hi = piece_hulls(ifs)
    for i in range(ifs.spec.alphabet_size):
        images = []
        for j in np.flatnonzero(ifs.spec.transfer[i]):
            sim = ifs.maps[(i, int(j))]
            ends = sorted([sim.apply([lo[j]])[0], sim.apply([hi[j]])[0]])
            images.append(ends)
        images.sort()
        for (a_lo, a_hi), (b_lo, b_hi) in zip(images[:-1], images[1:]):
            if b_lo < a_hi - tol:
                return False
    return True


def hausdorff_dimension(ifs, obs=None, target=None, mode="sup", osc="check"):
    """Hausdorff dimension of the projected level set of observable averages.

    Delegates to the constrained Bowen root with the scale potential of the
    system; `osc` controls the open set condition: "check" verifies 1-d
    separation numerically (warning on failure), "strict" makes a failed
    check an error, "assume" trusts the caller.  Returns (value, metadata).
    """
    psi = scale_potential(ifs)
    meta = {"osc": osc, "scale_table": {}}
    from .sft import enumerate_words

    for w in enumerate_words(ifs.spec, 2):
        meta["scale_table"][str(w)] = psi.value(w.symbols)
    if osc != "assume":
        if ifs.geo_dim == 1:
            ok = check_open_set_condition(ifs)
            meta["osc"] = "checked-pass" if ok else "checked-fail"
            if not ok:
                if osc == "strict":
                    raise PreconditionError("open set condition check failed")
                warnings.warn("open set condition check failed; dimension is an upper value")
        else:
            meta["osc"] = "assumed"
    if obs is None or target is None:
        value = bowen_root(ifs.spec, psi)
        return value, meta
    value = bs_dimension_set(target, psi, obs, mode=mode)
    return value, meta
