"""The acceptance suite: oracle- and invariant-based checks at desk scale.

Each criterion is a function returning a CriterionResult; `run_selftest`
executes all of them, printing one pass/fail line per criterion.  The CLI
`selftest` subcommand and tests/test_acceptance.py both drive this module,
so the gate is identical everywhere.
"""

import filecmp
import json
import shutil
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .historic import accumulation_estimate, make_dense_chain, plan_blueprint, synthesize_point
from .ifs import RecurrentIFS, hausdorff_dimension
from .measures import (
    DiracWord,
    MarkovMeasure,
    birkhoff_profile,
    empirical_measure,
    rho_distance,
    shifted_word,
)
from .pressure import cover_pressure, equilibrium_measure, spectral_pressure, variational_pressure
from .measures import entropy, integrate
from .sft import Potential, SubshiftSpec, Word, enumerate_word_array, primitivity
from .spectra import (
    LambdaEvaluator,
    ObservableSet,
    TargetSet,
    lambda_direct,
    lambda_value,
    pressure_equ,
    pressure_sub,
    pressure_sup,
    relative_spectrum,
)


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    seconds: float


def _random_primitive_spec(rng, max_symbols=5):
    while True:
        m = int(rng.integers(2, max_symbols + 1))
        transfer = (rng.random((m, m)) < 0.6).astype(int)
        if (transfer.sum(axis=1) == 0).any() or (transfer.sum(axis=0) == 0).any():
            continue
        spec = SubshiftSpec(transfer)
        if primitivity(spec)[0]:
            return spec


def _random_potential(rng, spec, depth=2, scale=1.0):
    m = spec.alphabet_size
    table = np.full(m**depth, np.nan)
    for row in enumerate_word_array(spec, depth):
        code = 0
        for s in row:
            code = code * m + int(s)
        table[code] = scale * rng.normal()
    return Potential(spec, depth, table)


def criterion_pressure_agreement(seed):
    rng = np.random.default_rng(seed)
    worst_pair = 0.0
    worst_witness = 0.0
    for _ in range(25):
        spec = _random_primitive_spec(rng)
        phi = _random_potential(rng, spec, depth=2)
        spectral = spectral_pressure(spec, phi)
        variational = variational_pressure(spec, phi)
        worst_pair = max(worst_pair, abs(spectral.value - variational.value))
        mu = variational.witness
        worst_witness = max(
            worst_witness, abs(entropy(mu) + integrate(phi, mu) - spectral.value)
        )
    passed = worst_pair <= 1e-10 and worst_witness <= 1e-10
    return passed, f"max |spectral-variational| {worst_pair:.2e}, witness gap {worst_witness:.2e}"


def criterion_known_values(seed):
    full = SubshiftSpec.full_shift(2)
    golden = SubshiftSpec.golden_mean()
    checks = []
    p_full = spectral_pressure(full, Potential.constant(full, 0.0)).value
    checks.append(("full 2-shift", abs(p_full - np.log(2.0)), 1e-12))
    p_gold = spectral_pressure(golden, Potential.constant(golden, 0.0)).value
    checks.append(("golden mean", abs(p_gold - np.log((1 + np.sqrt(5)) / 2)), 1e-10))
    cantor, _ = hausdorff_dimension(RecurrentIFS.interval_maps([1 / 3, 1 / 3], [0.0, 2 / 3]))
    checks.append(("cantor pair", abs(cantor - np.log(2) / np.log(3)), 1e-9))
    mixed, _ = hausdorff_dimension(RecurrentIFS.interval_maps([0.5, 0.25], [0.0, 0.75]))
    target = np.log((1 + np.sqrt(5)) / 2) / np.log(2)
    checks.append(("ratios (1/2,1/4)", abs(mixed - target), 1e-9))
    passed = all(err <= tol for _, err, tol in checks)
    detail = ", ".join(f"{name} {err:.1e}" for name, err, tol in checks)
    return passed, detail


def criterion_spectrum_oracle(seed):
    full = SubshiftSpec.full_shift(2)
    zero = Potential.constant(full, 0.0)
    obs = ObservableSet([Potential.indicator(full, "1")])
    evaluator = LambdaEvaluator(zero, obs)
    grid = np.linspace(0.01, 0.99, 99)
    worst_oracle = 0.0
    worst_gap = 0.0
    for alpha in grid:
        dual = evaluator.value(np.array([alpha])).value
        oracle = -alpha * np.log(alpha) - (1 - alpha) * np.log(1 - alpha)
        worst_oracle = max(worst_oracle, abs(dual - oracle))
        primal = lambda_direct(alpha, zero, obs)
        worst_gap = max(worst_gap, abs(dual - primal))
    passed = worst_oracle <= 1e-6 and worst_gap <= 1e-5
    return passed, f"oracle sup-norm {worst_oracle:.2e}, dual-primal gap {worst_gap:.2e}"


def criterion_theorem_consistency(seed):
    rng = np.random.default_rng(seed + 1)
    full = SubshiftSpec.full_shift(2)
    obs = ObservableSet([Potential.indicator(full, "1")])
    worst_sup = 0.0
    worst_hull = 0.0
    worst_single = 0.0
    for _ in range(10):
        phi = _random_potential(rng, full, depth=2)
        sup_val = pressure_sup(TargetSet.interval(-2.0, 3.0), phi, obs)
        p_val = spectral_pressure(full, phi).value
        worst_sup = max(worst_sup, abs(sup_val - p_val))
        pts = np.sort(rng.uniform(0.05, 0.95, size=rng.integers(2, 5)))
        c_pts = TargetSet.points(pts[:, None])
        hull = TargetSet.interval(float(pts.min()), float(pts.max()))
        worst_hull = max(worst_hull, abs(pressure_sub(c_pts, phi, obs) - pressure_sub(hull, phi, obs)))
        y = float(rng.uniform(0.1, 0.9))
        singleton = TargetSet.point(y)
        worst_single = max(
            worst_single, abs(pressure_equ(singleton, phi, obs) - pressure_sub(singleton, phi, obs))
        )
    passed = worst_sup <= 1e-6 and worst_hull <= 1e-6 and worst_single <= 1e-12
    return passed, (
        f"sup-vs-P {worst_sup:.2e}, hull identity {worst_hull:.2e},"
        f" singleton identity {worst_single:.2e}"
    )


def criterion_concavity(seed):
    rng = np.random.default_rng(seed + 2)
    full = SubshiftSpec.full_shift(2)
    obs = ObservableSet([Potential.indicator(full, "1")])
    worst = np.inf
    for phi in [Potential.constant(full, 0.0), _random_potential(rng, full, depth=2)]:
        evaluator = LambdaEvaluator(phi, obs)
        grid = np.linspace(0.05, 0.95, 13)
        values = {y: evaluator.value(np.array([y])).value for y in grid}
        for y1 in grid:
            for y2 in grid:
                if y2 <= y1:
                    continue
                for lam in (0.25, 0.5, 0.75):
                    mid = lam * y1 + (1 - lam) * y2
                    mid_val = evaluator.value(np.array([mid])).value
                    slack = mid_val - (lam * values[y1] + (1 - lam) * values[y2])
                    worst = min(worst, slack)
    passed = worst >= -1e-8
    return passed, f"min midpoint slack {worst:.2e}"


def criterion_cover_convergence(seed):
    golden = SubshiftSpec.golden_mean()
    zero = Potential.constant(golden, 0.0)
    target = spectral_pressure(golden, zero).value
    gaps = []
    for n in range(8, 15):
        gaps.append(abs(cover_pressure(golden, zero, n).value - target))
    monotone = all(b <= a + 1e-12 for a, b in zip(gaps[:-1], gaps[1:]))
    passed = monotone and gaps[-1] <= 0.05
    return passed, f"gaps {['%.4f' % g for g in gaps]}"


def criterion_historic(seed):
    full = SubshiftSpec.full_shift(2)
    obs = ObservableSet([Potential.indicator(full, "1")])
    target = TargetSet.interval(0.3, 0.7)
    chain = make_dense_chain(target, levels=5)
    bp = plan_blueprint(full, obs, chain, 20, seed=seed, budget=10**7)
    if not bp.schedule_ok():
        return False, "schedule inequalities failed"
    total = int(bp.checkpoints[-1])
    if total > 10**7:
        return False, f"prefix length {total} exceeds 1e7"
    x = synthesize_point(bp)
    est = accumulation_estimate(x, obs, bp.checkpoints, reference=target)
    haus_ok = est.hausdorff <= 0.05
    gap_ok = est.largest_gap <= 0.05
    prev = np.inf
    monotone = True
    for j in range(16, 21):
        e = accumulation_estimate(x, obs, bp.checkpoints[:j], reference=target)
        if e.hausdorff > prev + 1e-9:
            monotone = False
        prev = e.hausdorff
    point_target = TargetSet.point(0.5)
    chain_pt = make_dense_chain(point_target, levels=3)
    bp_pt = plan_blueprint(full, obs, chain_pt, 12, seed=seed + 1)
    x_pt = synthesize_point(bp_pt)
    cps = bp_pt.checkpoints
    window = np.arange(cps[-2] + 1, cps[-1] + 1, dtype=np.int64)
    deviations = np.abs(birkhoff_profile(x_pt, obs.observables[0], window) - 0.5)
    conv_ok = float(deviations.max()) <= 2.0 * bp_pt.zetas[-1]
    passed = haus_ok and gap_ok and monotone and conv_ok
    return passed, (
        f"length {total}, hausdorff {est.hausdorff:.4f}, gap {est.largest_gap:.4f},"
        f" monotone {monotone}, point-target dev {deviations.max():.4f}"
    )


def criterion_empirical_metric(seed):
    rng = np.random.default_rng(seed + 3)
    full = SubshiftSpec.full_shift(2)
    golden = SubshiftSpec.golden_mean()
    truncation = 20
    depth = 5
    worst_ratio = 0.0
    certified = True
    for _ in range(1000):
        spec = full if rng.random() < 0.5 else golden
        n = int(rng.integers(1, 400))
        length = n + depth + 1
        symbols = [int(rng.integers(spec.alphabet_size))]
        while len(symbols) < length:
            nxt = np.flatnonzero(spec.transfer[symbols[-1]])
            symbols.append(int(rng.choice(nxt)))
        x = Word(spec, np.array(symbols, dtype=np.int64))
        emp_n = empirical_measure(x, depth, n)
        emp_n1 = empirical_measure(x, depth, n + 1)
        rho = rho_distance(emp_n, emp_n1, spec, truncation)
        worst_ratio = max(worst_ratio, rho.value * (n + 1))
        dirac = DiracWord(shifted_word(x, n))
        rho_dirac = rho_distance(emp_n, dirac, spec, truncation)
        if rho_dirac.value + rho_dirac.tail_bound > 1.0 + 1e-12:
            certified = False
        if abs(rho.value - rho_dirac.value / (n + 1)) > 1e-12:
            certified = False
    passed = worst_ratio <= 1.0 + 1e-12 and certified
    return passed, f"max (n+1)*rho {worst_ratio:.6f}, identity+tail certified {certified}"


def criterion_relative_spectrum(seed):
    full = SubshiftSpec.full_shift(2)
    f = Potential.indicator(full, "1")
    g = Potential.constant(full, 1.0) + Potential.indicator(full, "0")
    psi = Potential.constant(full, 0.0)
    worst = 0.0
    alphas = np.linspace(0.04, 0.96, 21)
    for alpha in alphas:
        dual = relative_spectrum(f, g, float(alpha), psi)
        shifted = f - g * float(alpha)
        primal = lambda_direct(0.0, psi, ObservableSet([shifted]))
        worst = max(worst, abs(dual - primal))
    passed = worst <= 1e-5
    return passed, f"max |relative - constrained primal| {worst:.2e} over {len(alphas)} alphas"


def _determinism_artifacts(seed, outdir):
    from .cli import main as cli_main

    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    system = out / "system.json"
    system.write_text(
        json.dumps(
            {
                "alphabet": 2,
                "transfer": [[1, 1], [1, 1]],
                "potentials": {
                    "ones": {"depth": 1, "values": {"0": 0.0, "1": 1.0}},
                },
            },
            sort_keys=True,
        )
    )
    target = out / "target.json"
    target.write_text(json.dumps({"kind": "interval", "lo": 0.35, "hi": 0.65}))
    art = out / "artifacts"
    rc = 0
    rc |= cli_main(
        ["pressure", "--system", str(system), "--phi", "zero", "--output", str(art)]
    )
    rc |= cli_main(
        ["spectrum", "--system", str(system), "--f", "ones", "--grid", "31",
         "--output", str(art)]
    )
    rc |= cli_main(
        ["historic", "plan", "--system", str(system), "--f", "ones", "--target",
         str(target), "--steps", "10", "--seed", str(seed), "--levels", "4",
         "--block-len", "120", "--output", str(art)]
    )
    rc |= cli_main(
        ["historic", "verify", "--blueprint", str(art / "blueprint.json"), "--system",
         str(system), "--f", "ones", "--output", str(art)]
    )
    return rc, art


def criterion_determinism(seed):
    import contextlib
    import io

    with tempfile.TemporaryDirectory() as tmp:
        with contextlib.redirect_stdout(io.StringIO()):
            rc1, art1 = _determinism_artifacts(seed, Path(tmp) / "run1")
            rc2, art2 = _determinism_artifacts(seed, Path(tmp) / "run2")
        if rc1 != 0 or rc2 != 0:
            return False, f"pipeline exit codes {rc1}, {rc2}"
        names = sorted(p.name for p in art1.iterdir())
        names2 = sorted(p.name for p in art2.iterdir())
        if names != names2:
            return False, f"artifact sets differ: {names} vs {names2}"
        mismatches = [
            name for name in names if not filecmp.cmp(art1 / name, art2 / name, shallow=False)
        ]
        passed = not mismatches
        return passed, f"{len(names)} artifacts byte-compared, mismatches: {mismatches or 'none'}"


CRITERIA = [
    ("pressure-agreement", criterion_pressure_agreement),
    ("known-values", criterion_known_values),
    ("spectrum-oracle", criterion_spectrum_oracle),
    ("theorem-consistency", criterion_theorem_consistency),
    ("concavity", criterion_concavity),
    ("cover-convergence", criterion_cover_convergence),
    ("historic-synthesis", criterion_historic),
    ("empirical-metric", criterion_empirical_metric),
    ("relative-spectrum", criterion_relative_spectrum),
    ("determinism", criterion_determinism),
]


def run_selftest(seed=2024, output=None, only=None):
    results = []
    for index, (name, fn) in enumerate(CRITERIA, start=1):
        if only is not None and index not in only:
            continue
        start = time.perf_counter()
        try:
            passed, detail = fn(seed)
        except Exception as err:  # a crash is a failure, not an abort
            passed, detail = False, f"exception: {err!r}"
        elapsed = time.perf_counter() - start
        results.append(CriterionResult(index, name, passed, detail, elapsed))
        status = "PASS" if passed else "FAIL"
        print(f"{status}  {index:2d}  {name:<22s} {detail} [{elapsed:.1f}s]")
    if output:
        out = Path(output)
        out.mkdir(parents=True, exist_ok=True)
        doc = [
            {
                "index": r.index,
                "name": r.name,
                "passed": r.passed,
                "detail": r.detail,
                "seconds": round(r.seconds, 3),
            }
            for r in results
        ]
        (out / "selftest.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    return results
