"""Constrained entropy spectra and level-set pressure formulas.

Lambda(y, phi) is the supremum of entropy plus the integral of phi over
invariant measures whose observable averages equal y, and -inf off the
achievable set.  Level sets of accumulation behavior get their pressure
from Lambda: inf over the target for equality/superset constraints, sup
for subset constraints, and an explicit bracket when only the weaker
containment hypothesis holds.  Dimensions come from the root of the
pressure in -s * scale.
"""

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from ._graphs import build_graph, extremal_cycle, karp_mean_value, tight_components
from .errors import ConvergenceError, PreconditionError
from .measures import stationary_distribution
from .pressure import EIGEN_TOL, spectral_pressure, transfer_operator
from .sft import Potential

GEOMETRY_TOL = 1e-9
DEGENERATE_WIDTH = 1e-11


class _EmptySentinel:
    """Marker for level sets that are empty by the structure theorems."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"


EMPTY = _EmptySentinel()


def is_empty(value):
    return value is EMPTY


@dataclass(frozen=True)
class PressureBracket:
    """Certified enclosure [lower, upper] for a level-set pressure."""

    lower: float
    upper: float


@dataclass(frozen=True)
class ObservableSet:
    """A finite vector of potentials defining the deformation mu -> (int f_i dmu)."""

    observables: tuple

    def __init__(self, observables):
        observables = tuple(observables)
        if not observables:
            raise PreconditionError("need at least one observable")
        spec = observables[0].spec
        if any(f.spec != spec for f in observables):
            raise PreconditionError("observables live on different subshifts")
        object.__setattr__(self, "observables", observables)

    @property
    def spec(self):
        return self.observables[0].spec

    @property
    def dim(self):
        return len(self.observables)

    @property
    def depth(self):
        return max(f.depth for f in self.observables)


@dataclass(frozen=True)
class TargetSet:
    """A target region in observable space.

    Kinds: ``point``, ``box``, ``convex-polytope``, ``finite-point-list``,
    ``box-union``; geometry is restricted to these so connectivity and
    hulls are exact.
    """

    kind: str
    data: tuple

    @classmethod
    def point(cls, y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        return cls("point", (y,))

    @classmethod
    def interval(cls, a, b):
        return cls.box([a], [b])

    @classmethod
    def box(cls, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        if lo.shape != hi.shape or (lo > hi).any():
            raise PreconditionError("box needs lo <= hi per coordinate")
        return cls("box", (lo, hi))

    @classmethod
    def polytope(cls, vertices):
        verts = np.atleast_2d(np.asarray(vertices, dtype=np.float64))
        if len(verts) < 1:
            raise PreconditionError("polytope needs at least one vertex")
        return cls("convex-polytope", (verts,))

    @classmethod
    def points(cls, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        if len(pts) < 1:
            raise PreconditionError("point list needs at least one point")
        return cls("finite-point-list", (pts,))

    @classmethod
    def box_union(cls, boxes):
        los = np.atleast_2d(np.asarray([b[0] for b in boxes], dtype=np.float64))
        his = np.atleast_2d(np.asarray([b[1] for b in boxes], dtype=np.float64))
        if (los > his).any():
            raise PreconditionError("box needs lo <= hi per coordinate")
        return cls("box-union", (los, his))

    @classmethod
    def from_json(cls, doc):
        kind = doc["kind"]
        if kind == "point":
            return cls.point(doc["point"])
        if kind == "box":
            return cls.box(doc["lo"], doc["hi"])
        if kind == "interval":
            return cls.interval(doc["lo"], doc["hi"])
        if kind == "convex-polytope":
            return cls.polytope(doc["vertices"])
        if kind == "finite-point-list":
            return cls.points(doc["points"])
        if kind == "box-union":
            return cls.box_union([(b["lo"], b["hi"]) for b in doc["boxes"]])
        raise PreconditionError(f"unknown target kind {kind!r}")

    @property
    def dim(self):
        if self.kind == "point":
            return len(self.data[0])
        if self.kind in ("box", "box-union"):
            return self.data[0].shape[-1]
        return self.data[0].shape[1]

    def sample_points(self):
        """Finitely many points pinning the set: vertices/corners/list entries."""
        if self.kind == "point":
            return self.data[0][None, :]
        if self.kind == "box":
            lo, hi = self.data
            return _box_corners(lo, hi)
        if self.kind == "convex-polytope":
            return self.data[0]
        if self.kind == "finite-point-list":
            return self.data[0]
        los, his = self.data
        return np.vstack([_box_corners(lo, hi) for lo, hi in zip(los, his)])

    def components(self, tol=GEOMETRY_TOL):
        """Connected components, each again a TargetSet."""
        if self.kind in ("point", "box", "convex-polytope"):
            return [self]
        if self.kind == "finite-point-list":
            return [TargetSet.point(p) for p in self.data[0]]
        los, his = self.data
        n = len(los)
        label = list(range(n))

        def find(i):
            while label[i] != i:
                label[i] = label[label[i]]
                i = label[i]
            return i

        for i in range(n):
            for j in range(i + 1, n):
                touch = (los[i] <= his[j] + tol).all() and (los[j] <= his[i] + tol).all()
                if touch:
                    label[find(i)] = find(j)
        groups = {}
        for i in range(n):
            groups.setdefault(find(i), []).append(i)
        return [
            TargetSet.box_union([(los[i], his[i]) for i in idx]) for idx in groups.values()
        ]

    def is_connected(self, tol=GEOMETRY_TOL):
        if self.kind in ("point", "box", "convex-polytope"):
            return True
        if self.kind == "finite-point-list":
            return len(self.data[0]) == 1
        return len(self.components(tol)) == 1

    def contains_point(self, y, tol=GEOMETRY_TOL):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if self.kind == "point":
            return bool(np.abs(self.data[0] - y).max() <= tol)
        if self.kind == "box":
            lo, hi = self.data
            return bool((y >= lo - tol).all() and (y <= hi + tol).all())
        if self.kind == "finite-point-list":
            return bool((np.abs(self.data[0] - y).max(axis=1) <= tol).any())
        if self.kind == "box-union":
            los, his = self.data
            return bool(((y >= los - tol).all(axis=1) & (y <= his + tol).all(axis=1)).any())
        return _in_hull(self.data[0], y, tol)

    def convex_hull(self):
        pts = self.sample_points()
        if len(pts) == 1:
            return TargetSet.point(pts[0])
        if pts.shape[1] == 1:
            return TargetSet.interval(float(pts.min()), float(pts.max()))
        return TargetSet.polytope(_hull_vertices(pts))

    def to_json(self):
        if self.kind == "point":
            return {"kind": "point", "point": self.data[0].tolist()}
        if self.kind == "box":
            return {"kind": "box", "lo": self.data[0].tolist(), "hi": self.data[1].tolist()}
        if self.kind == "convex-polytope":
            return {"kind": "convex-polytope", "vertices": self.data[0].tolist()}
        if self.kind == "finite-point-list":
            return {"kind": "finite-point-list", "points": self.data[0].tolist()}
        los, his = self.data
        return {
            "kind": "box-union",
            "boxes": [{"lo": lo.tolist(), "hi": hi.tolist()} for lo, hi in zip(los, his)],
        }


def _box_corners(lo, hi):
    d = len(lo)
    corners = []
    for mask in range(1 << d):
        corners.append([hi[i] if mask >> i & 1 else lo[i] for i in range(d)])
    return np.asarray(corners, dtype=np.float64)


def _hull_vertices(pts):
    from scipy.spatial import ConvexHull

    uniq = np.unique(np.round(pts, 12), axis=0)
    if len(uniq) <= pts.shape[1]:
        return uniq
    try:
        hull = ConvexHull(uniq)
        return uniq[hull.vertices]
    except Exception:
        return uniq


def _in_hull(vertices, y, tol):
    """Sup-norm distance from y to conv(vertices) is at most tol (via LP).

    Minimizes t subject to lambda >= 0, sum lambda = 1 and
    |V^T lambda - y| <= t componentwise.
    """
    from scipy.optimize import linprog

    vertices = np.atleast_2d(vertices)
    n, d = vertices.shape
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    a_ub = np.zeros((2 * d, n + 1))
    a_ub[:d, :n] = vertices.T
    a_ub[d:, :n] = -vertices.T
    a_ub[:, -1] = -1.0
    b_ub = np.concatenate([y, -y])
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    res = linprog(
        cost,
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=a_eq,
        b_eq=[1.0],
        bounds=[(0, None)] * n + [(0, None)],
        method="highs",
    )
    return bool(res.status == 0 and res.fun <= tol + 1e-12)


@dataclass(frozen=True)
class FeasibleDomain:
    """The set of achievable observable averages Xi(M(X,T)).

    Exact interval for one observable (extremal mean cycles); for several
    observables an inner polytope approximation sampled by support
    directions.
    """

    dim: int
    lo: Optional[float] = None
    hi: Optional[float] = None
    vertices: Optional[np.ndarray] = None

    @property
    def width(self):
        if self.dim == 1:
            return self.hi - self.lo
        span = self.vertices.max(axis=0) - self.vertices.min(axis=0)
        return float(span.max())

    def is_degenerate(self, tol=DEGENERATE_WIDTH):
        return self.width <= tol

    @property
    def center(self):
        if self.dim == 1:
            return np.array([0.5 * (self.lo + self.hi)])
        return self.vertices.mean(axis=0)

    def contains(self, y, tol=GEOMETRY_TOL):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if self.dim == 1:
            return bool(self.lo - tol <= y[0] <= self.hi + tol)
        return _in_hull(self.vertices, y, tol)

    def classify(self, y, tol=GEOMETRY_TOL):
        """'outside' | 'boundary' | 'interior' relative to the achievable set."""
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if self.is_degenerate():
            return "degenerate" if np.abs(y - self.center).max() <= max(tol, 1e-9) else "outside"
        if not self.contains(y, tol):
            return "outside"
        if self.dim == 1:
            if min(y[0] - self.lo, self.hi - y[0]) <= tol:
                return "boundary"
            return "interior"
        shrunk = self.center + (1.0 - 1e-7) * (self.vertices - self.center)
        return "interior" if _in_hull(shrunk, y, 0.0) else "boundary"


def feasible_domain(obs, directions=64, seed=7):
    """Achievable averages of the observables over invariant measures."""
    graph = build_graph(obs.spec, obs.depth)
    rows = [graph.edge_values(f) for f in obs.observables]
    if obs.dim == 1:
        lo = karp_mean_value(graph, rows[0], maximize=False)
        hi = karp_mean_value(graph, rows[0], maximize=True)
        return FeasibleDomain(1, lo=float(lo), hi=float(hi))
    rng = np.random.default_rng(seed)
    dirs = [np.eye(obs.dim)[i] for i in range(obs.dim)]
    dirs += [-d for d in dirs]
    if obs.dim == 2:
        angles = np.linspace(0.0, 2 * np.pi, directions, endpoint=False)
        dirs += [np.array([np.cos(a), np.sin(a)]) for a in angles]
    else:
        raw = rng.normal(size=(directions, obs.dim))
        dirs += list(raw / np.linalg.norm(raw, axis=1, keepdims=True))
    points = []
    for direction in dirs:
        weights = sum(c * r for c, r in zip(direction, rows))
        _, cycle = extremal_cycle(graph, weights, maximize=True)
        cyc_edges = _cycle_edge_indices(graph, cycle)
        points.append([float(np.mean(r[cyc_edges])) for r in rows])
    return FeasibleDomain(obs.dim, vertices=_hull_vertices(np.asarray(points)))


def _cycle_edge_indices(graph, cycle):
    lookup = {}
    for idx, (u, v) in enumerate(zip(graph.edges_u, graph.edges_v)):
        lookup[(int(u), int(v))] = idx
    idxs = []
    for i, u in enumerate(cycle):
        v = cycle[(i + 1) % len(cycle)]
        idxs.append(lookup[(u, v)])
    return np.array(idxs, dtype=np.int64)


@dataclass(frozen=True)
class LambdaPoint:
    value: float
    dual: Optional[np.ndarray]
    flag: str


class LambdaEvaluator:
    """Evaluates Lambda(y, phi) by convex duality against the pressure.

    q -> P(phi + q . f) is smooth and convex with gradient equal to the
    observable averages of the tilted equilibrium state, so the
    constrained entropy supremum at interior y is the Legendre value
    inf_q [P(phi + q.f) - q.y].  Endpoint targets are handled exactly by
    restricting to the subshift of mean-extremal cycles; those values are
    flagged 'boundary'.
    """

    def __init__(self, phi, obs, grad_tol=1e-10, boundary_tol=GEOMETRY_TOL, eigen_tol=EIGEN_TOL):
        if phi.spec != obs.spec:
            raise PreconditionError("potential and observables live on different subshifts")
        from .pressure import require_primitive

        require_primitive(obs.spec)
        self.phi = phi
        self.obs = obs
        self.grad_tol = grad_tol
        self.boundary_tol = boundary_tol
        self.eigen_tol = eigen_tol
        self.eigen_max_iter = 200_000
        self.graph = build_graph(obs.spec, max(phi.depth, obs.depth))
        self.base = self.graph.edge_values(phi)
        self.rows = np.vstack([self.graph.edge_values(f) for f in obs.observables])
        self.row_spans = self.rows.max(axis=1) - self.rows.min(axis=1)
        self.domain = feasible_domain(obs)
        self._warm = None

    def _tilt_saturated(self, q):
        """Past this tilt the moments sit on the domain face to below every
        tolerance in the package; the dual has run away."""
        return float(np.abs(q) @ self.row_spans) > 80.0

    def _tilted(self, q):
        weights = self.base + q @ self.rows
        shift = float(weights.max())
        mat = self.graph.dense(np.exp(weights - shift))
        warm_r, warm_l = self._warm if self._warm is not None else (None, None)
        lam, right, res_r, _ = _kernels.power_iteration(
            mat, self.eigen_tol, self.eigen_max_iter, v0=warm_r
        )
        lam_l, left, res_l, _ = _kernels.power_iteration(
            mat.T, self.eigen_tol, self.eigen_max_iter, v0=warm_l
        )
        self._warm = (right, left)
        lam = float(left @ mat @ right / (left @ right))
        if max(res_r, res_l) > self.eigen_tol:
            raise ConvergenceError("tilted transfer operator did not converge")
        u, v = self.graph.edges_u, self.graph.edges_v
        mass = left[u] * mat[u, v] * right[v]
        mass /= mass.sum()
        pressure = shift + float(np.log(lam))
        moments = self.rows @ mass
        return pressure, moments

    def pressure_at(self, q):
        return self._tilted(np.atleast_1d(np.asarray(q, dtype=np.float64)))[0]

    def value(self, y):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        if len(y) != self.obs.dim:
            raise PreconditionError("target point has the wrong dimension")
        where = self.domain.classify(y, self.boundary_tol)
        if where == "outside":
            return LambdaPoint(-np.inf, None, "outside")
        if where == "degenerate":
            return LambdaPoint(spectral_pressure(self.obs.spec, self.phi).value, None, "degenerate")
        if where == "boundary":
            return LambdaPoint(self._boundary_value(y), None, "boundary")
        if self.obs.dim == 1:
            return self._interior_1d(float(y[0]))
        try:
            return self._interior_newton(y)
        except ConvergenceError:
            # the dual runs away: y sits numerically at the edge of the domain
            return LambdaPoint(self._boundary_value(y), None, "boundary")

    def _interior_1d(self, y):
        def grad(q):
            _, moments = self._tilted(np.array([q]))
            return float(moments[0]) - y

        lo, hi = -1.0, 1.0
        glo, ghi = grad(lo), grad(hi)
        while glo > 0.0 and not self._tilt_saturated(np.array([lo])):
            lo *= 2.0
            glo = grad(lo)
        while ghi < 0.0 and not self._tilt_saturated(np.array([hi])):
            hi *= 2.0
            ghi = grad(hi)
        if glo > 0.0 or ghi < 0.0:
            # the dual runs away: y is achievable only at the edge of the domain
            return LambdaPoint(self._boundary_value(np.array([y])), None, "boundary")
        q_star = brentq(grad, lo, hi, xtol=1e-14, rtol=8.9e-16, maxiter=200)
        residual = abs(grad(q_star))
        if residual > self.grad_tol:
            raise ConvergenceError(
                f"dual gradient {residual:.2e} above tolerance", best=(lo, hi)
            )
        pressure, _ = self._tilted(np.array([q_star]))
        return LambdaPoint(pressure - q_star * y, np.array([q_star]), "interior")

    def _interior_newton(self, y):
        q = np.zeros(self.obs.dim)
        best = None
        stalled = 0
        for _ in range(120):
            if self._tilt_saturated(q):
                raise ConvergenceError("dual tilt runaway: target at the domain edge", best=best)
            pressure, moments = self._tilted(q)
            g = moments - y
            norm = np.abs(g).max()
            if best is None or norm < 0.7 * best[0]:
                best = (norm, q.copy())
                stalled = 0
            else:
                stalled += 1
                if stalled >= 6:
                    raise ConvergenceError("dual Newton made no progress", best=best)
            if norm <= self.grad_tol:
                return LambdaPoint(pressure - float(q @ y), q.copy(), "interior")
            h = np.empty((self.obs.dim, self.obs.dim))
            step = 1e-6 * (1.0 + np.abs(q))
            for i in range(self.obs.dim):
                dq = np.zeros_like(q)
                dq[i] = step[i]
                _, m_plus = self._tilted(q + dq)
                _, m_minus = self._tilted(q - dq)
                h[:, i] = (m_plus - m_minus) / (2 * step[i])
            try:
                delta = np.linalg.solve(h, -g)
            except np.linalg.LinAlgError:
                delta = -g
            t = 1.0
            while t > 1e-12:
                _, m_try = self._tilted(q + t * delta)
                if np.abs(m_try - y).max() < norm:
                    break
                t *= 0.5
            q = q + t * delta
        raise ConvergenceError("dual Newton iteration stalled", best=best)

    def _boundary_value(self, y):
        if self.obs.dim != 1:
            # one-sided limit estimate: nudge toward the domain center until
            # the dual stabilizes
            for nudge in (1e-7, 1e-5, 1e-3, 1e-2):
                inner = y + nudge * (self.domain.center - y)
                try:
                    return self._interior_newton(inner).value
                except ConvergenceError:
                    continue
            raise ConvergenceError("boundary estimate failed at every nudge")
        weights = self.rows[0]
        target = float(y[0])
        maximize = abs(target - self.domain.hi) <= abs(target - self.domain.lo)
        comps = tight_components(self.graph, weights, target, maximize)
        if not comps:
            return -np.inf
        best = -np.inf
        for members, internal in comps:
            best = max(best, self._restricted_pressure(members, internal))
        return best

    def _restricted_pressure(self, members, edge_mask):
        pos = -np.ones(self.graph.n_states, dtype=np.int64)
        pos[members] = np.arange(len(members))
        weights = self.base[edge_mask]
        shift = float(weights.max())
        mat = np.zeros((len(members), len(members)))
        mat[pos[self.graph.edges_u[edge_mask]], pos[self.graph.edges_v[edge_mask]]] = np.exp(
            weights - shift
        )
        lam, _, res, _ = _kernels.power_iteration(mat, self.eigen_tol)
        if res > max(self.eigen_tol, 1e-12):
            raise ConvergenceError("restricted transfer operator did not converge")
        return shift + float(np.log(lam))


def lambda_value(y, phi, obs, **kwargs):
    """Lambda(y, phi): constrained entropy supremum at target average y."""
    return LambdaEvaluator(phi, obs, **kwargs).value(y).value


def lambda_point(y, phi, obs, **kwargs):
    """Lambda(y, phi) together with the dual minimizer and a location flag."""
    return LambdaEvaluator(phi, obs, **kwargs).value(y)


class _PrimalProgram:
    """Edge-frequency form of the constrained entropy maximization.

    Variables are stationary edge probabilities x_e on the order-r block
    graph; entropy + integral is concave in x, the circulation conditions
    are affine, and the observable constraints are driven to zero by an
    augmented-Lagrangian outer loop around a null-space Newton ascent.
    """

    def __init__(self, phi, obs, order=None):
        from scipy.linalg import null_space

        depth = max(phi.depth, obs.depth, 2)
        if order is not None:
            if order < depth - 1:
                raise PreconditionError("order must be at least max potential depth - 1")
            depth = order + 1
        self.graph = build_graph(obs.spec, depth)
        self.phi_e = self.graph.edge_values(phi)
        self.rows = np.vstack([self.graph.edge_values(f) for f in obs.observables])
        n_e = self.graph.n_edges
        n_s = self.graph.n_states
        a = np.zeros((1 + n_s, n_e))
        a[0] = 1.0
        for e, (u, v) in enumerate(zip(self.graph.edges_u, self.graph.edges_v)):
            a[1 + u, e] += 1.0
            a[1 + v, e] -= 1.0
        self.basis = null_space(a)  # orthonormal feasible directions
        self.tails = self.graph.edges_u

    def start(self):
        """Uniform-transition circulation: strictly positive and feasible."""
        n_s = self.graph.n_states
        p = np.zeros((n_s, n_s))
        for u, v in zip(self.graph.edges_u, self.graph.edges_v):
            p[u, v] = 1.0
        p /= p.sum(axis=1, keepdims=True)
        pi = stationary_distribution(p)
        return pi[self.graph.edges_u] * p[self.graph.edges_u, self.graph.edges_v]

    def objective(self, x):
        node = np.zeros(self.graph.n_states)
        np.add.at(node, self.tails, x)
        mask = x > 0
        h = float(-(x[mask] @ np.log(x[mask] / node[self.tails][mask])))
        return h + float(x @ self.phi_e)

    def gradient(self, x):
        node = np.zeros(self.graph.n_states)
        np.add.at(node, self.tails, x)
        safe_x = np.maximum(x, 1e-300)
        safe_node = np.maximum(node[self.tails], 1e-300)
        return self.phi_e - np.log(safe_x / safe_node)

    def hessian(self, x, rho):
        """Entropy Hessian (-1/x on the diagonal, +1/x_u between edges
        sharing a tail) minus the quadratic-penalty curvature."""
        node = np.zeros(self.graph.n_states)
        np.add.at(node, self.tails, x)
        h = np.diag(-1.0 / np.maximum(x, 1e-300))
        inv_node = 1.0 / np.maximum(node, 1e-300)
        same_tail = self.tails[:, None] == self.tails[None, :]
        h += same_tail * inv_node[self.tails][None, :]
        h -= rho * self.rows.T @ self.rows
        return h

    def moments(self, x):
        return self.rows @ x

    def solve(self, y, inner_max=60, outer_max=60, constraint_tol=1e-10):
        y = np.atleast_1d(np.asarray(y, dtype=np.float64))
        x = self.start()
        lam = np.zeros(len(y))
        rho = 100.0
        prev_violation = np.inf
        for _ in range(outer_max):
            x = self._inner(x, y, lam, rho, inner_max)
            c = self.moments(x) - y
            violation = np.abs(c).max()
            if violation <= constraint_tol:
                return self.objective(x), x
            lam = lam + rho * c
            if violation > 0.25 * prev_violation:
                rho = min(rho * 10.0, 1e14)
            prev_violation = violation
        raise ConvergenceError(
            f"constraint violation {prev_violation:.2e} after augmented-Lagrangian loop",
            best=x,
        )

    def _inner(self, x, y, lam, rho, inner_max):
        def value(z):
            c = self.moments(z) - y
            return self.objective(z) - float(lam @ c) - 0.5 * rho * float(c @ c)

        basis = self.basis
        cur = value(x)
        for _ in range(inner_max):
            c = self.moments(x) - y
            g = self.gradient(x) - (lam + rho * c) @ self.rows
            g_red = basis.T @ g
            if np.abs(g_red).max() <= 1e-11:
                break
            h_red = basis.T @ self.hessian(x, rho) @ basis
            try:
                step_red = np.linalg.solve(
                    -h_red + 1e-12 * np.eye(len(h_red)), g_red
                )
            except np.linalg.LinAlgError:
                step_red = g_red
            direction = basis @ step_red
            if float(direction @ g) <= 0.0:
                direction = basis @ g_red
            neg = direction < 0
            t_max = 0.95 * float(np.min(-x[neg] / direction[neg])) if neg.any() else 1.0
            t = min(1.0, t_max)
            improved = False
            slope = float(direction @ g)
            for _ in range(60):
                z = x + t * direction
                if z.min() > 0.0:
                    cand = value(z)
                    if cand >= cur + 1e-4 * t * slope:
                        x, cur = z, cand
                        improved = True
                        break
                t *= 0.5
            if not improved:
                break
        return x


def lambda_direct(y, phi, obs, order=None, **kwargs):
    """Primal evaluation of Lambda(y, phi) over order-r Markov measures.

    Independent of the dual path: maximizes entropy + integral in edge
    frequencies under the circulation and moment constraints.  Serves as
    the oracle for lambda_value on interior targets.
    """
    value, _ = _PrimalProgram(phi, obs, order).solve(y, **kwargs)
    return value


def _subset_of_domain(target, domain, tol=GEOMETRY_TOL):
    return all(domain.contains(p, tol) for p in target.sample_points())


def _refine_minimum(fn, a, b, coarse=33, xtol=1e-7):
    """Minimum of fn on [a, b] by grid search plus local bracket refinement."""
    if b - a <= 1e-15:
        return fn(0.5 * (a + b))
    xs = np.linspace(a, b, coarse)
    vals = np.array([fn(x) for x in xs])
    i = int(np.argmin(vals))
    best = float(vals[i])
    lo = xs[max(0, i - 1)]
    hi = xs[min(len(xs) - 1, i + 1)]
    while hi - lo > xtol:
        xs = np.linspace(lo, hi, 9)
        vals = np.array([fn(x) for x in xs])
        i = int(np.argmin(vals))
        best = min(best, float(vals[i]))
        lo = xs[max(0, i - 1)]
        hi = xs[min(len(xs) - 1, i + 1)]
    return best


def _refine_maximum(fn, a, b, coarse=33, xtol=1e-8):
    return -_refine_minimum(lambda x: -fn(x), a, b, coarse, xtol)


def _inf_over_target(point_fn, target, domain):
    """Infimum of a pointwise map over a target region inside the domain."""
    if target.kind == "point":
        return point_fn(target.data[0])
    if target.kind == "finite-point-list":
        return min(point_fn(p) for p in target.data[0])
    if target.kind == "box":
        lo, hi = target.data
        if target.dim == 1:
            return _refine_minimum(lambda t: point_fn(np.array([t])), float(lo[0]), float(hi[0]))
        corners = _box_corners(lo, hi)
        mids = 0.5 * (corners[:, None, :] + corners[None, :, :]).reshape(-1, target.dim)
        pts = np.vstack([corners, mids, [0.5 * (lo + hi)]])
        return min(point_fn(p) for p in pts)
    if target.kind == "convex-polytope":
        verts = target.data[0]
        mids = 0.5 * (verts[:, None, :] + verts[None, :, :]).reshape(-1, target.dim)
        pts = np.vstack([verts, mids, [verts.mean(axis=0)]])
        return min(point_fn(p) for p in pts)
    los, his = target.data
    return min(
        _inf_over_target(point_fn, TargetSet.box(lo, hi), domain) for lo, hi in zip(los, his)
    )


def _sup_over_target(point_fn, target, domain, tol=GEOMETRY_TOL):
    """Supremum of a pointwise map over target intersected with the domain.

    Returns -inf when the intersection is empty.  One-dimensional pieces
    use bracket refinement (the maps used here are unimodal along the
    domain: Lambda is concave, the dimension root is quasiconcave).
    """
    best = -np.inf
    if target.kind in ("point", "finite-point-list"):
        pts = target.sample_points()
        for p in pts:
            if domain.contains(p, tol):
                best = max(best, point_fn(p))
        return best
    if target.kind == "box-union":
        los, his = target.data
        for lo, hi in zip(los, his):
            best = max(best, _sup_over_target(point_fn, TargetSet.box(lo, hi), domain, tol))
        return best
    if target.dim == 1:
        lo, hi = target.data if target.kind == "box" else (None, None)
        if target.kind == "convex-polytope":
            verts = target.data[0]
            lo, hi = verts.min(axis=0), verts.max(axis=0)
        a = max(float(lo[0]), domain.lo)
        b = min(float(hi[0]), domain.hi)
        if a > b + tol:
            return -np.inf
        b = max(a, b)
        return _refine_maximum(lambda t: point_fn(np.array([min(max(t, a), b)])), a, b)
    pts = [p for p in target.sample_points() if domain.contains(p, tol)]
    if domain.contains(domain.center, tol) and target.contains_point(domain.center, tol):
        pts.append(domain.center)
    for v in domain.vertices if domain.vertices is not None else []:
        if target.contains_point(v, tol):
            pts.append(v)
    for p in pts:
        best = max(best, point_fn(p))
    return best


def pressure_equ(target, phi, obs, **kwargs):
    """Pressure of the level set whose accumulation set equals the target.

    EMPTY when the target is not a compact connected subset of the
    achievable averages; otherwise the infimum of Lambda over the target.
    """
    ev = LambdaEvaluator(phi, obs, **kwargs)
    if not target.is_connected():
        return EMPTY
    if not _subset_of_domain(target, ev.domain):
        return EMPTY
    return _inf_over_target(lambda p: ev.value(p).value, target, ev.domain)


def pressure_sub(target, phi, obs, **kwargs):
    """Pressure of the level set whose accumulation set contains the target."""
    ev = LambdaEvaluator(phi, obs, **kwargs)
    if not _subset_of_domain(target, ev.domain):
        return EMPTY
    return _inf_over_target(lambda p: ev.value(p).value, target, ev.domain)


def pressure_sup(target, phi, obs, **kwargs):
    """Pressure of the level set whose accumulation set stays inside the target."""
    ev = LambdaEvaluator(phi, obs, **kwargs)
    return _sup_over_target(lambda p: ev.value(p).value, target, ev.domain)


def pressure_between(inner, outer, phi, obs, **kwargs):
    """Pressure of {x : inner <= accumulation set <= outer}.

    Empty inner target delegates to the subset formula; an inner set whose
    closed convex hull sits inside one connected component of the outer
    set yields inf over the inner set; an inner set split across
    components is EMPTY; otherwise an explicit [lower, upper] bracket is
    returned (the lower bound certified by connected candidate unions).
    """
    ev = LambdaEvaluator(phi, obs, **kwargs)
    if inner is None:
        return _sup_over_target(lambda p: ev.value(p).value, outer, ev.domain)
    if not _subset_of_domain(inner, ev.domain):
        return EMPTY
    comps = outer.components()
    pts = inner.sample_points()
    home = None
    for comp in comps:
        if all(comp.contains_point(p) for p in pts):
            home = comp
            break
    if home is None:
        return EMPTY
    hull = inner.convex_hull()
    inf_inner = _inf_over_target(lambda p: ev.value(p).value, inner, ev.domain)
    if _hull_inside(hull, home):
        return inf_inner
    lower = -np.inf
    for q in _candidate_connectors(inner, home):
        lower = max(lower, _inf_over_target(lambda p: ev.value(p).value, q, ev.domain))
    return PressureBracket(lower, inf_inner)


def _hull_inside(hull, region, tol=GEOMETRY_TOL):
    pts = hull.sample_points()
    if not all(region.contains_point(p, tol) for p in pts):
        return False
    if hull.kind == "point" or region.kind in ("box", "convex-polytope"):
        return True
    # union geometry: sample segments between hull vertices
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            for t in np.linspace(0.0, 1.0, 17):
                if not region.contains_point(pts[i] + t * (pts[j] - pts[i]), tol):
                    return False
    return True


def _candidate_connectors(inner, component):
    """Connected sub-unions of the component's boxes that still cover `inner`."""
    if component.kind != "box-union":
        return [component]
    los, his = component.data
    n = len(los)
    if n > 12:
        return [component]
    pts = inner.sample_points()
    needed = set()
    for p in pts:
        for i in range(n):
            if (p >= los[i] - GEOMETRY_TOL).all() and (p <= his[i] + GEOMETRY_TOL).all():
                needed.add(i)
                break
    candidates = []
    for mask in range(1, 1 << n):
        idx = [i for i in range(n) if mask >> i & 1]
        if not needed.issubset(idx):
            continue
        sub = TargetSet.box_union([(los[i], his[i]) for i in idx])
        if sub.is_connected():
            candidates.append(sub)
    return candidates or [component]


def relative_spectrum(f, g, alpha, psi, **kwargs):
    """sup of entropy + integral of psi subject to int f / int g = alpha.

    Reformulated through the single observable f - alpha*g with target 0;
    requires the achievable averages of g to exclude zero.
    """
    g_domain = feasible_domain(ObservableSet([g]))
    if g_domain.lo <= 0.0 <= g_domain.hi:
        raise PreconditionError("the denominator observable must be sign-definite")
    shifted = f - g * float(alpha)
    return lambda_value(0.0, psi, ObservableSet([shifted]), **kwargs)


def bowen_root(spec, psi, xtol=1e-12):
    """Unique root of P(-s psi) = 0 for strictly positive psi."""
    if psi.min_value() <= 0.0:
        raise PreconditionError("scale potential must be strictly positive")

    def fn(s):
        return spectral_pressure(spec, psi * (-s)).value

    hi = (np.log(spec.alphabet_size) + 1.0) / psi.min_value() + 1.0
    if fn(0.0) <= 0.0:
        return 0.0
    return float(brentq(fn, 0.0, hi, xtol=xtol, rtol=8.9e-16))


def bs_dimension_point(y, psi, obs, xtol=1e-12, **kwargs):
    """Root s of Lambda(y, -s psi) = 0: constrained entropy over scale.

    Equals sup of entropy / integral(psi) over measures with average y;
    psi must be strictly positive.
    """
    if psi.min_value() <= 0.0:
        raise PreconditionError("scale potential must be strictly positive")
    domain = feasible_domain(obs)
    y_arr = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if not domain.contains(y_arr):
        raise PreconditionError("target average outside the achievable set")

    def fn(s):
        return LambdaEvaluator(psi * (-s), obs, **kwargs).value(y_arr).value

    at_zero = fn(0.0)
    if at_zero <= 0.0:
        return 0.0
    hi = (np.log(obs.spec.alphabet_size) + 1.0) / psi.min_value() + 1.0
    return float(brentq(fn, 0.0, hi, xtol=xtol, rtol=8.9e-16))


def bs_dimension_set(target, psi, obs, mode="sup", xtol=1e-10, **kwargs):
    """Dimension of an accumulation level set: inf (equ/sub) or sup over targets.

    Mirrors the pressure_* geometry; infeasible equ/sub targets give EMPTY
    and a sup target disjoint from the domain gives -inf.
    """
    if psi.min_value() <= 0.0:
        raise PreconditionError("scale potential must be strictly positive")
    domain = feasible_domain(obs)

    def point_fn(p):
        return bs_dimension_point(p, psi, obs, xtol=xtol, **kwargs)

    if mode == "equ":
        if not target.is_connected() or not _subset_of_domain(target, domain):
            return EMPTY
        return _inf_over_target(point_fn, target, domain)
    if mode == "sub":
        if not _subset_of_domain(target, domain):
            return EMPTY
        return _inf_over_target(point_fn, target, domain)
    if mode == "sup":
        return _sup_over_target(point_fn, target, domain)
    raise PreconditionError(f"unknown dimension mode {mode!r}")


@dataclass
class SpectrumCurve:
    """Lambda sampled over a grid of target averages."""

    grid: np.ndarray
    values: np.ndarray
    dual: np.ndarray
    flags: list = field(default_factory=list)

    def to_csv(self, stream):
        d = self.grid.shape[1]
        writer = csv.writer(stream, lineterminator="\n")
        writer.writerow(
            [f"y_{i + 1}" for i in range(d)]
            + ["lambda"]
            + [f"dual_q_{i + 1}" for i in range(d)]
            + ["flags"]
        )
        for row, val, dual, flag in zip(self.grid, self.values, self.dual, self.flags):
            writer.writerow(
                [repr(float(c)) for c in row]
                + [repr(float(val))]
                + [repr(float(c)) for c in dual]
                + [flag]
            )

    def csv_text(self):
        buf = io.StringIO()
        self.to_csv(buf)
        return buf.getvalue()


def spectrum_curve(phi, obs, grid=101, lo=None, hi=None, workers=1, **kwargs):
    """Evaluate Lambda over an inclusive 1-d grid spanning the feasible domain."""
    ev = LambdaEvaluator(phi, obs, **kwargs)
    if obs.dim != 1:
        raise PreconditionError("spectrum curves are one-dimensional; grid the caller's slice")
    a = ev.domain.lo if lo is None else float(lo)
    b = ev.domain.hi if hi is None else float(hi)
    xs = np.linspace(a, b, int(grid))
    points = _map_lambda(ev, xs, workers)
    values = np.array([p.value for p in points])
    dual = np.array([[np.nan] if p.dual is None else p.dual for p in points])
    flags = [p.flag for p in points]
    return SpectrumCurve(xs[:, None], values, dual, flags)


def _map_lambda(ev, xs, workers):
    if workers <= 1:
        return [ev.value(np.array([x])) for x in xs]
    from concurrent.futures import ProcessPoolExecutor

    chunks = np.array_split(np.arange(len(xs)), workers)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_eval_chunk, ev.phi, ev.obs, xs[idx]) for idx in chunks]
        results = [f.result() for f in futures]
    out = []
    for part in results:
        out.extend(part)
    return out


def _eval_chunk(phi, obs, xs):
    ev = LambdaEvaluator(phi, obs)
    return [ev.value(np.array([x])) for x in xs]


def serialize_level_value(value):
    """JSON-safe rendering: EMPTY -> "EMPTY", -inf -> "-inf", brackets -> dict."""
    if is_empty(value):
        return "EMPTY"
    if isinstance(value, PressureBracket):
        return {
            "lower": serialize_level_value(value.lower),
            "upper": serialize_level_value(value.upper),
        }
    if isinstance(value, float) and np.isinf(value):
        return "-inf" if value < 0 else "inf"
    return float(value)


def level_result_json(value, method, residual):
    return json.dumps(
        {"value": serialize_level_value(value), "method": method, "residual": residual},
        sort_keys=True,
    )
