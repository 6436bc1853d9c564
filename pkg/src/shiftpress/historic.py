"""Constructive synthesis of orbits whose accumulation set of observable
averages equals a prescribed compact connected target.

The construction concatenates blocks: block k has empirical average within
a shrinking tolerance of the k-th point of a dense chain through the
target, and is repeated until it dominates everything before it.  The
repetition counts obey the two schedule inequalities

    n_{k+1} <= zeta_k * sum_{j<=k} n_j N_j        (next block stays small)
    sum_{j<k} n_j N_j <= zeta_k * sum_{j<=k} n_j N_j   (history washes out)

so the running average tracks the chain and its accumulation set sweeps
exactly through the target.  On shifts that are not full, primitivity
connectors of bounded length glue the blocks; their mass is accounted in
the tolerances.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import ConvergenceError, PreconditionError
from .measures import birkhoff_profile
from .pressure import require_primitive, transfer_operator
from .sft import Potential, Word
from .spectra import LambdaEvaluator, ObservableSet, TargetSet, feasible_domain

DEFAULT_BLOCK_LEN = 240
ZETA_CAP = 0.95


class DenseChain:
    """A sequence sweeping a compact connected target so that every tail is
    dense and consecutive gaps shrink level by level.

    Level 1 visits both ends of the path through the target; level l
    ping-pongs across a 2^(1-l)-net of the path parameter.  The attached
    resolution schedule decreases slowly (a power law), dominating the
    tail covering radius while keeping downstream block schedules short.
    """

    def __init__(self, target, levels=4, zeta0=0.92, zeta_gamma=0.05, domain=None):
        path = _target_path(target)
        if domain is not None:
            for vertex in path:
                if not domain.contains(vertex):
                    raise PreconditionError("target leaves the achievable average set")
        self.target = target
        self.path = path
        self.zeta0 = float(zeta0)
        self.zeta_gamma = float(zeta_gamma)
        self._params = [0.0]
        self._levels_done = 0
        self.extend_levels(levels)

    @property
    def dim(self):
        return self.path.shape[1]

    @property
    def diameter(self):
        if len(self.path) == 1:
            return 0.0
        spans = self.path.max(axis=0) - self.path.min(axis=0)
        return float(np.linalg.norm(spans))

    def extend_levels(self, levels):
        while self._levels_done < levels:
            level = self._levels_done + 1
            h = 2.0 ** (1 - level)
            ups = [i * h for i in range(1, round(1.0 / h) + 1)]
            downs = [1.0 - i * h for i in range(1, round(1.0 / h) + 1)]
            self._params.extend(ups + downs)
            self._levels_done = level

    def _ensure(self, count):
        while len(self._params) < count:
            self.extend_levels(self._levels_done + 1)

    def points(self, count):
        self._ensure(count)
        ts = np.asarray(self._params[:count])
        return _path_points(self.path, ts)

    def schedule(self, count):
        ks = np.arange(1, count + 1, dtype=np.float64)
        return np.minimum(self.zeta0 * ks**-self.zeta_gamma, ZETA_CAP)

    def envelope(self, count):
        """Upper bound on the gap to the next chain point, per index."""
        self._ensure(count + 1)
        length = _path_length(self.path)
        gaps = []
        for j in range(count):
            gaps.append(abs(self._params[j + 1] - self._params[j]) * length)
        return np.asarray(gaps)

    def turn_flags(self, count):
        """Marks indices where the sweep touches an end of the path."""
        self._ensure(count)
        ts = np.asarray(self._params[:count])
        return (ts == 0.0) | (ts == 1.0)

    def tail_cover_radius(self, start, count):
        """Covering radius of the target by chain points with index > start."""
        pts = self.points(count)[start:]
        probes = _path_points(self.path, np.linspace(0.0, 1.0, 257))
        dists = np.linalg.norm(probes[:, None, :] - pts[None, :, :], axis=2)
        return float(dists.min(axis=1).max())


def _target_path(target):
    if target.kind == "point":
        return target.data[0][None, :]
    if target.kind == "box":
        lo, hi = target.data
        if len(lo) != 1:
            raise PreconditionError("dense chains need a point, an interval, or a polyline")
        return np.array([[lo[0]], [hi[0]]])
    if target.kind == "convex-polytope":
        return target.data[0]
    if target.kind == "finite-point-list" and len(target.data[0]) == 1:
        return target.data[0]
    raise PreconditionError("dense chains need a connected point/interval/polyline target")


def _path_length(path):
    if len(path) == 1:
        return 0.0
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def _path_points(path, ts):
    if len(path) == 1:
        return np.repeat(path, len(ts), axis=0)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    out = np.empty((len(ts), path.shape[1]))
    for i, t in enumerate(np.asarray(ts, dtype=np.float64)):
        s = min(max(t, 0.0), 1.0) * total
        j = int(np.searchsorted(cum[1:], s, side="right"))
        j = min(j, len(seg) - 1)
        frac = 0.0 if seg[j] == 0 else (s - cum[j]) / seg[j]
        out[i] = path[j] + frac * (path[j + 1] - path[j])
    return out


def make_dense_chain(target, levels=4, domain=None, zeta0=0.92, zeta_gamma=0.05):
    """Dense chain through a compact connected target (Lemma-style sweep)."""
    if not target.is_connected():
        raise PreconditionError("dense chains need a connected target")
    return DenseChain(target, levels=levels, zeta0=zeta0, zeta_gamma=zeta_gamma, domain=domain)


@dataclass(frozen=True)
class Segment:
    """One schedule entry: a block, its repeat count, and the glue to the next."""

    unit: np.ndarray          # block plus its self-connector; admissible, self-gluing
    core_len: int             # block length before the connector
    reps: int
    bridge: np.ndarray        # glue toward the next segment (possibly empty)
    alpha: np.ndarray         # chain point this block tracks
    unit_mean: np.ndarray     # periodic observable average of the unit
    zeta: float
    lag_budget: float

    @property
    def unit_len(self):
        return len(self.unit)

    @property
    def length(self):
        return self.reps * len(self.unit) + len(self.bridge)


@dataclass
class HistoricBlueprint:
    """A fully materialized block schedule realizing a dense chain."""

    spec: object
    obs_depth: int
    segments: list
    seed: int
    target: Optional[TargetSet] = None
    meta: dict = field(default_factory=dict)

    @property
    def checkpoints(self):
        lengths = np.array([seg.length for seg in self.segments], dtype=np.int64)
        return np.cumsum(lengths)

    @property
    def zetas(self):
        return np.array([seg.zeta for seg in self.segments])

    def schedule_ok(self):
        """Both schedule inequalities, checked for every k."""
        totals = self.checkpoints
        zetas = self.zetas
        for k in range(len(self.segments)):
            if k + 1 < len(self.segments):
                if self.segments[k + 1].unit_len > zetas[k] * totals[k] + 1e-9:
                    return False
            if k >= 1 and totals[k - 1] > zetas[k] * totals[k] + 1e-9:
                return False
        return True

    def to_json(self):
        doc = {
            "alphabet": int(self.spec.alphabet_size),
            "transfer": self.spec.transfer.astype(int).tolist(),
            "obs_depth": int(self.obs_depth),
            "seed": int(self.seed),
            "target": self.target.to_json() if self.target is not None else None,
            "meta": self.meta,
            "segments": [
                {
                    "unit": "".join(str(int(s)) for s in seg.unit),
                    "core_len": int(seg.core_len),
                    "reps": int(seg.reps),
                    "bridge": "".join(str(int(s)) for s in seg.bridge),
                    "alpha": seg.alpha.tolist(),
                    "unit_mean": seg.unit_mean.tolist(),
                    "zeta": float(seg.zeta),
                    "lag_budget": float(seg.lag_budget),
                }
                for seg in self.segments
            ],
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @classmethod
    def from_json(cls, text):
        from .sft import SubshiftSpec

        doc = json.loads(text)
        spec = SubshiftSpec(doc["transfer"])
        segments = [
            Segment(
                unit=np.array([int(c) for c in entry["unit"]], dtype=np.int64),
                core_len=entry["core_len"],
                reps=entry["reps"],
                bridge=np.array([int(c) for c in entry["bridge"]], dtype=np.int64),
                alpha=np.asarray(entry["alpha"], dtype=np.float64),
                unit_mean=np.asarray(entry["unit_mean"], dtype=np.float64),
                zeta=entry["zeta"],
                lag_budget=entry["lag_budget"],
            )
            for entry in doc["segments"]
        ]
        target = TargetSet.from_json(doc["target"]) if doc.get("target") else None
        return cls(spec, doc["obs_depth"], segments, doc["seed"], target, doc.get("meta", {}))


def _connector(spec, last, first):
    """Shortest admissible symbol path gluing `last` to `first` (exclusive)."""
    if spec.transfer[last, first]:
        return np.empty(0, dtype=np.int64)
    frontier = {last: []}
    for _ in range(spec.alphabet_size + 1):
        nxt = {}
        for state, path in frontier.items():
            for s in np.flatnonzero(spec.transfer[state]):
                cand = path + [int(s)]
                if spec.transfer[s, first]:
                    return np.array(cand, dtype=np.int64)
                if s not in nxt:
                    nxt[int(s)] = cand
        frontier = nxt
    raise PreconditionError("no connector found; transfer matrix is not primitive")


def _periodic_unit_mean(unit, obs):
    """Observable averages of the bi-infinite periodic word unit^infinity."""
    depth = obs.depth
    doubled = np.concatenate([unit, unit[: depth - 1]]) if depth > 1 else unit
    out = np.empty(obs.dim)
    m = obs.spec.alphabet_size
    for i, f in enumerate(obs.observables):
        table = np.nan_to_num(f.lift(depth).table, nan=0.0)
        sums = _kernels.birkhoff_sums(
            doubled, table, m, depth, np.array([len(unit)], dtype=np.int64)
        )
        out[i] = sums[0] / len(unit)
    return out


class _BlockSampler:
    """Draws admissible blocks whose averages hit a chain point.

    Blocks are sampled from the equilibrium measure of the tilted
    potential whose mean matches the requested point, so the synthesized
    orbit retains near-maximal complexity; a deterministic splice of the
    extremal-mean cycle serves as fallback at the edge of the domain.
    """

    def __init__(self, spec, obs, rng, eigen_tol=1e-13):
        self.spec = spec
        self.obs = obs
        self.rng = rng
        zero = Potential.constant(spec, 0.0)
        self.evaluator = LambdaEvaluator(zero, obs, eigen_tol=eigen_tol)
        self.graph = self.evaluator.graph
        self._tilt_cache = {}

    def _tilted_chain(self, alpha):
        key = tuple(np.round(alpha, 12))
        if key in self._tilt_cache:
            return self._tilt_cache[key]
        point = self.evaluator.value(np.asarray(alpha, dtype=np.float64))
        if point.dual is None:
            chain = None  # edge of the domain: no finite tilt
        else:
            parts = [float(q) * f for q, f in zip(point.dual, self.obs.observables)]
            tilt = parts[0]
            for part in parts[1:]:
                tilt = tilt + part
            op = transfer_operator(self.spec, tilt)
            mu = _gibbs_transition(op)
            chain = (op.graph, mu)
        self._tilt_cache[key] = chain
        return chain

    def sample_block(self, alpha, length, tol, tries=64, batch=16):
        """An admissible block of the given length with periodic-average
        within tol of alpha, plus its self-connector."""
        chain = self._tilted_chain(alpha)
        best = None
        if chain is not None:
            graph, (rows_cum, pi_cum) = chain
            for _ in range(tries):
                units = self._draw_batch(graph, rows_cum, pi_cum, length, batch)
                for unit in units:
                    glued = self._glue(unit)
                    mean = _periodic_unit_mean(glued, self.obs)
                    err = float(np.abs(mean - alpha).max())
                    if best is None or err < best[0]:
                        best = (err, glued, mean)
                    if err <= tol:
                        return glued, mean, err
        cycle_unit = self._cycle_block(alpha, length)
        if cycle_unit is not None:
            glued = self._glue(cycle_unit)
            mean = _periodic_unit_mean(glued, self.obs)
            err = float(np.abs(mean - alpha).max())
            if best is None or err < best[0]:
                best = (err, glued, mean)
            if err <= tol:
                return glued, mean, err
        raise ConvergenceError(
            f"block tolerance {tol:.3g} unreachable at length {length}"
            f" (best achievable {best[0]:.3g})",
            best=best,
        )

    def _draw_batch(self, graph, rows_cum, pi_cum, length, batch):
        order = graph.depth - 1
        units = []
        for _ in range(batch):
            u0 = int(np.searchsorted(pi_cum, self.rng.random(), side="right"))
            u0 = min(u0, len(pi_cum) - 1)
            steps = _kernels.sample_path(
                rows_cum, u0, length - order, self.rng.random(length - order)
            )
            symbols = np.concatenate(
                [graph.states[u0], graph.states[steps][:, -1]]
            )
            units.append(symbols.astype(np.int64))
        return units

    def _cycle_block(self, alpha, length):
        """Deterministic fallback: repeat the extremal cycle nearest alpha."""
        if self.obs.dim != 1:
            return None
        from ._graphs import extremal_cycle

        weights = self.evaluator.rows[0]
        lo_val, lo_cyc = extremal_cycle(self.graph, weights, maximize=False)
        hi_val, hi_cyc = extremal_cycle(self.graph, weights, maximize=True)
        cyc = lo_cyc if abs(alpha[0] - lo_val) <= abs(alpha[0] - hi_val) else hi_cyc
        symbols = np.array([self.graph.states[u][-1] for u in cyc], dtype=np.int64)
        reps = max(1, length // len(symbols))
        return np.tile(symbols, reps)

    def _glue(self, unit):
        conn = _connector(self.spec, int(unit[-1]), int(unit[0]))
        return np.concatenate([unit, conn]) if len(conn) else unit


def _gibbs_transition(op):
    """Row-cumulative Gibbs transition and stationary cumulative, for sampling."""
    p = op.matrix * op.right[None, :] / (op.lam * op.right[:, None])
    p = np.clip(p, 0.0, None)
    p /= p.sum(axis=1, keepdims=True)
    pi = op.left * op.right
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return np.cumsum(p, axis=1), np.cumsum(pi)


def plan_blueprint(
    spec,
    obs,
    chain,
    steps,
    seed=0,
    block_len=DEFAULT_BLOCK_LEN,
    lag_edge=0.04,
    lag_fraction=0.5,
    budget=10**7,
    sample_tries=64,
):
    """Plan the block schedule realizing the first `steps` chain points.

    Each block is sampled at tolerance min(zeta_k/8, 1.5%) around its chain
    point; repeat counts satisfy both schedule inequalities and drive the
    running average within a lag budget of the chain point.  The lag
    budget is zeta_k * lag_fraction generically and `lag_edge` at the last
    visits to the ends of the target path, which pins the extremes of the
    accumulation set.  All sampling flows from `seed`.
    """
    connector_bound = require_primitive(spec)
    rng = np.random.default_rng(seed)
    sampler = _BlockSampler(spec, obs, rng)
    alphas = chain.points(steps)
    zetas = chain.schedule(steps)
    turns = chain.turn_flags(steps)
    d = obs.dim

    tight = set()
    if chain.diameter > 0:
        ends = {}
        pts = chain.points(steps)
        for k in range(steps):
            if turns[k]:
                key = tuple(np.round(pts[k], 9))
                ends[key] = k
        tight = set(ends.values())

    segments = []
    totals = 0.0
    sums = np.zeros(d)
    for k in range(steps):
        zeta = float(zetas[k])
        tol = max(1.5 / block_len, min(0.015, zeta / 8.0))
        unit, unit_mean, err = sampler.sample_block(
            alphas[k], block_len, tol, tries=sample_tries
        )
        lag = lag_edge if k in tight else max(lag_fraction * zeta, 2.0 * tol)
        ulen = len(unit)
        unit_sum = unit_mean * ulen

        reps = 1
        if k > 0:
            # history washes out: T_{k-1} <= zeta_k T_k, with slack for bridges
            zeta_eff = 0.98 * zeta
            reps = max(reps, int(np.ceil(totals * (1.0 - zeta_eff) / (zeta_eff * ulen))))
        if k + 1 < steps:
            # next block stays small: u_{k+1} <= zeta_k T_k
            next_unit_bound = block_len + connector_bound
            reps = max(reps, int(np.ceil((next_unit_bound / (0.98 * zeta) - totals) / ulen)))
        # tracking: |running average - alpha_k| <= lag after this run
        for i in range(d):
            excess = sums[i] - alphas[k][i] * totals
            drift = abs(unit_mean[i] - alphas[k][i])
            if lag > drift:
                need = (abs(excess) - lag * totals) / ((lag - drift) * ulen)
                if need > reps:
                    reps = int(np.ceil(need))
        new_total = totals + reps * ulen
        if new_total > budget:
            raise PreconditionError(
                f"schedule exceeds the symbol budget {budget} at step {k + 1};"
                " relax lag/tolerance parameters or shorten the chain"
            )
        bridge = np.empty(0, dtype=np.int64)
        segments.append(
            Segment(unit, block_len, reps, bridge, alphas[k].copy(), unit_mean, zeta, lag)
        )
        totals = new_total
        sums = sums + reps * unit_sum

    # glue consecutive segments; bridge symbols join unit tails to next heads
    for k in range(steps - 1):
        seg = segments[k]
        nxt = segments[k + 1]
        conn = _connector(spec, int(seg.unit[-1]), int(nxt.unit[0]))
        segments[k] = Segment(
            seg.unit, seg.core_len, seg.reps, conn, seg.alpha, seg.unit_mean, seg.zeta,
            seg.lag_budget,
        )

    bp = HistoricBlueprint(
        spec,
        obs.depth,
        segments,
        seed,
        target=chain.target,
        meta={"block_len": block_len, "lag_edge": lag_edge, "budget": budget},
    )
    if not bp.schedule_ok():
        raise AssertionError("planned schedule violates its own inequalities")
    return bp


def synthesize_symbols(bp, length=None):
    """Symbol stream of the blueprint, padded periodically past the end."""
    total = int(bp.checkpoints[-1])
    if length is None:
        length = total + max(bp.obs_depth - 1, 0)
    chunks = []
    for seg in bp.segments:
        chunks.append(np.tile(seg.unit, seg.reps))
        if len(seg.bridge):
            chunks.append(seg.bridge)
    stream = np.concatenate(chunks)
    if length > len(stream):
        last = bp.segments[-1]
        pad_reps = int(np.ceil((length - len(stream)) / len(last.unit)))
        stream = np.concatenate([stream, np.tile(last.unit, pad_reps)])
    return stream[:length]


def synthesize_point(bp, length=None):
    """The synthesized orbit prefix as an admissible Word."""
    return Word(bp.spec, synthesize_symbols(bp, length))


@dataclass
class AccumulationEstimate:
    """Visited observable averages at checkpoint windows, clustered."""

    sample_lengths: np.ndarray
    sample_values: np.ndarray      # (n_samples, d)
    points: np.ndarray             # cluster representatives
    largest_gap: float
    hausdorff: Optional[float] = None


def checkpoint_windows(checkpoints, samples_per_window=64):
    """Log-spaced window lengths inside each checkpoint interval."""
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    ns = [int(checkpoints[0])]
    for lo, hi in zip(checkpoints[:-1], checkpoints[1:]):
        grid = np.unique(
            np.round(np.exp(np.linspace(np.log(lo + 1), np.log(hi), samples_per_window)))
        ).astype(np.int64)
        ns.extend(int(v) for v in grid if lo < v <= hi)
    return np.unique(np.asarray(ns, dtype=np.int64))


def accumulation_estimate(
    x,
    obs,
    checkpoints,
    samples_per_window=64,
    resolution=0.01,
    reference=None,
):
    """Estimate the accumulation set of observable averages along a word.

    Evaluates the running averages at log-spaced lengths inside each
    checkpoint interval, clusters the visited points at `resolution`, and
    reports the largest internal gap (a connectivity proxy) plus the
    Hausdorff distance to a reference target when given.
    """
    checkpoints = np.asarray(checkpoints, dtype=np.int64)
    if len(checkpoints) == 0 or (np.diff(checkpoints) <= 0).any():
        raise PreconditionError("checkpoints must be strictly increasing")
    usable = len(x) - (obs.depth - 1)
    if checkpoints[-1] > usable:
        raise PreconditionError("checkpoints run past the usable word length")
    ns = checkpoint_windows(checkpoints, samples_per_window)
    values = np.column_stack([birkhoff_profile(x, f, ns) for f in obs.observables])
    points = _cluster(values, resolution)
    gap = _largest_gap(points)
    hausdorff = None
    if reference is not None:
        hausdorff = _hausdorff_to_target(values, reference, resolution)
    return AccumulationEstimate(ns, values, points, gap, hausdorff)


def _cluster(values, resolution):
    if values.shape[1] == 1:
        ordered = np.sort(values[:, 0])
        reps = [ordered[0]]
        for v in ordered[1:]:
            if v - reps[-1] > resolution:
                reps.append(v)
        return np.asarray(reps)[:, None]
    reps = []
    for v in values:
        if not reps or min(np.linalg.norm(v - r) for r in reps) > resolution:
            reps.append(v)
    return np.asarray(reps)


def _largest_gap(points):
    if len(points) <= 1:
        return 0.0
    if points.shape[1] == 1:
        return float(np.diff(np.sort(points[:, 0])).max())
    dists = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    np.fill_diagonal(dists, np.inf)
    return float(dists.min(axis=1).max())


def _target_samples(target, spacing):
    if target.kind == "point":
        return target.data[0][None, :]
    path = _target_path(target)
    length = _path_length(path)
    count = max(2, int(np.ceil(length / max(spacing, 1e-9))) + 1)
    return _path_points(path, np.linspace(0.0, 1.0, count))


def _hausdorff_to_target(values, target, resolution):
    probes = _target_samples(target, resolution / 4.0)
    d_vp = np.linalg.norm(values[:, None, :] - probes[None, :, :], axis=2)
    visited_to_target = float(d_vp.min(axis=1).max())
    target_to_visited = float(d_vp.min(axis=0).max())
    return max(visited_to_target, target_to_visited)
