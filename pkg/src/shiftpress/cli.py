"""Command-line interface: every pipeline with file-based inputs and
reproducible outputs.

System documents are JSON: {"alphabet": m, "transfer": [[...]],
"potentials": {"name": {"depth": k, "values": {"word": v}}}}.  Potential
names may also be builtins: "zero", "one", "const:<c>", "ind:<word>".
Exit codes: 0 success, 2 precondition violation, 3 non-convergence.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import ConvergenceError, PreconditionError
from .historic import (
    HistoricBlueprint,
    accumulation_estimate,
    make_dense_chain,
    plan_blueprint,
    synthesize_point,
    synthesize_symbols,
)
from .ifs import RecurrentIFS, hausdorff_dimension
from .measures import birkhoff_profile
from .pressure import cover_pressure, spectral_pressure, variational_pressure
from .sft import Potential, SubshiftSpec, Word
from .spectra import (
    ObservableSet,
    TargetSet,
    bs_dimension_set,
    bowen_root,
    pressure_between,
    pressure_equ,
    pressure_sub,
    pressure_sup,
    relative_spectrum,
    serialize_level_value,
    spectrum_curve,
)


def _load_json(path):
    try:
        with open(path) as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise PreconditionError(f"{path}: file not found")
    except json.JSONDecodeError as err:
        raise PreconditionError(f"{path}:{err.lineno}:{err.colno}: {err.msg}")


def load_system(path):
    doc = _load_json(path)
    if "transfer" not in doc:
        raise PreconditionError(f"{path}: missing 'transfer'")
    spec = SubshiftSpec(doc["transfer"])
    if "alphabet" in doc and int(doc["alphabet"]) != spec.alphabet_size:
        raise PreconditionError(f"{path}: alphabet size disagrees with the transfer matrix")
    potentials = {}
    for name, entry in doc.get("potentials", {}).items():
        potentials[name] = Potential.from_dict(
            spec, int(entry["depth"]), entry["values"], name=name
        )
    return spec, potentials


def resolve_potential(spec, potentials, name):
    if name in potentials:
        return potentials[name]
    if name == "zero":
        return Potential.constant(spec, 0.0, name="zero")
    if name == "one":
        return Potential.constant(spec, 1.0, name="one")
    if name.startswith("const:"):
        return Potential.constant(spec, float(name.split(":", 1)[1]), name=name)
    if name.startswith("ind:"):
        return Potential.indicator(spec, name.split(":", 1)[1], name=name)
    raise PreconditionError(f"unknown potential {name!r}")


def _emit(args, filename, text):
    if args.output:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        (out / filename).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _result_line(value, method, residual):
    return f"value={serialize_level_value(value)} method={method} residual={residual:.3e}"


def cmd_pressure(args):
    spec, pots = load_system(args.system)
    phi = resolve_potential(spec, pots, args.phi)
    if args.method == "spectral":
        res = spectral_pressure(spec, phi)
    elif args.method == "variational":
        res = variational_pressure(spec, phi, order=args.order)
    else:
        res = cover_pressure(spec, phi, args.length, epsilon_index=args.eps_index)
    print(_result_line(res.value, res.method, res.residual))
    _emit(args, "result.json", res.to_json() + "\n")
    return 0


def cmd_spectrum(args):
    spec, pots = load_system(args.system)
    phi = resolve_potential(spec, pots, args.phi)
    obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
    curve = spectrum_curve(phi, obs, grid=args.grid, workers=args.workers)
    _emit(args, "spectrum.csv", curve.csv_text())
    finite = curve.values[np.isfinite(curve.values)]
    print(
        f"value={float(finite.max())} method=spectrum-grid residual={1e-10:.3e}"
        f" points={len(curve.values)}"
    )
    return 0


def _load_target(path):
    return TargetSet.from_json(_load_json(path))


def cmd_level_pressure(args):
    spec, pots = load_system(args.system)
    phi = resolve_potential(spec, pots, args.phi)
    obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
    target = _load_target(args.target)
    if args.mode == "equ":
        value = pressure_equ(target, phi, obs)
    elif args.mode == "sub":
        value = pressure_sub(target, phi, obs)
    elif args.mode == "sup":
        value = pressure_sup(target, phi, obs)
    else:
        inner = target if args.target2 else None
        outer = _load_target(args.target2) if args.target2 else target
        value = pressure_between(inner, outer, phi, obs)
    print(_result_line(value, f"level-{args.mode}", 1e-6))
    doc = {"mode": args.mode, "value": serialize_level_value(value), "residual": 1e-6}
    _emit(args, "result.json", json.dumps(doc, sort_keys=True) + "\n")
    return 0


def cmd_relative(args):
    spec, pots = load_system(args.system)
    f = resolve_potential(spec, pots, args.f)
    g = resolve_potential(spec, pots, args.g)
    psi = resolve_potential(spec, pots, args.psi)
    if args.alpha is not None:
        alphas = [args.alpha]
    else:
        lo, hi, count = args.alphas.split(":")
        alphas = list(np.linspace(float(lo), float(hi), int(count)))
    rows = ["alpha,value,flags"]
    for alpha in alphas:
        value = relative_spectrum(f, g, alpha, psi)
        rows.append(f"{alpha!r},{serialize_level_value(value)},relative")
    text = "\n".join(rows) + "\n"
    _emit(args, "spectrum.csv", text)
    print(f"value={serialize_level_value(value)} method=relative residual={1e-10:.3e}")
    return 0


def cmd_dimension(args):
    if args.ifs:
        ifs = RecurrentIFS.from_json(_load_json(args.ifs))
        spec = ifs.spec
        pots = {}
        if args.target:
            _, pots_sys = load_system(args.system) if args.system else (spec, {})
            pots = pots_sys
            obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
            value, meta = hausdorff_dimension(
                ifs, obs, _load_target(args.target), mode=args.mode, osc=args.osc
            )
        else:
            value, meta = hausdorff_dimension(ifs, osc=args.osc)
        print(_result_line(value, f"ifs-dimension-{args.mode}", 1e-9))
        doc = {
            "value": serialize_level_value(value),
            "mode": args.mode,
            "residual": 1e-9,
            "meta": meta,
        }
        _emit(args, "result.json", json.dumps(doc, sort_keys=True) + "\n")
        return 0
    spec, pots = load_system(args.system)
    psi = resolve_potential(spec, pots, args.psi)
    if args.target:
        obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
        value = bs_dimension_set(_load_target(args.target), psi, obs, mode=args.mode)
    else:
        value = bowen_root(spec, psi)
    print(_result_line(value, f"bs-dimension-{args.mode}", 1e-9))
    doc = {"value": serialize_level_value(value), "mode": args.mode, "residual": 1e-9}
    _emit(args, "result.json", json.dumps(doc, sort_keys=True) + "\n")
    return 0


def cmd_historic_plan(args):
    spec, pots = load_system(args.system)
    obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
    target = _load_target(args.target)
    from .spectra import feasible_domain

    chain = make_dense_chain(target, levels=args.levels, domain=feasible_domain(obs))
    bp = plan_blueprint(
        spec,
        obs,
        chain,
        args.steps,
        seed=args.seed,
        block_len=args.block_len,
        budget=args.budget,
    )
    _emit(args, "blueprint.json", bp.to_json() + "\n")
    print(
        f"value={int(bp.checkpoints[-1])} method=historic-plan residual=0.0"
        f" segments={len(bp.segments)}"
    )
    return 0


def _load_blueprint(path):
    return HistoricBlueprint.from_json(Path(path).read_text())


def cmd_historic_synth(args):
    bp = _load_blueprint(args.blueprint)
    symbols = synthesize_symbols(bp, args.length)
    text = "".join(str(int(s)) for s in symbols)
    if args.output:
        _emit(args, "point.txt", text + "\n")
        print(f"value={len(symbols)} method=historic-synth residual=0.0")
    else:
        # stream the symbols alone on stdout; the status line goes to stderr
        for i in range(0, len(text), 1 << 16):
            sys.stdout.write(text[i : i + (1 << 16)])
        sys.stdout.write("\n")
        print(f"value={len(symbols)} method=historic-synth residual=0.0", file=sys.stderr)
    return 0


def cmd_historic_verify(args):
    bp = _load_blueprint(args.blueprint)
    spec = bp.spec
    pots = {}
    if args.system:
        spec, pots = load_system(args.system)
    obs = ObservableSet([resolve_potential(spec, pots, name) for name in args.f])
    x = synthesize_point(bp)
    est = accumulation_estimate(
        x,
        obs,
        bp.checkpoints,
        samples_per_window=args.samples,
        reference=bp.target,
    )
    rows = [",".join(["n"] + [f"y_{i + 1}" for i in range(obs.dim)] + ["dist_to_target"])]
    probes = None
    if bp.target is not None:
        from .historic import _target_samples

        probes = _target_samples(bp.target, 0.0025)
    for n, val in zip(est.sample_lengths, est.sample_values):
        dist = ""
        if probes is not None:
            dist = repr(float(np.linalg.norm(probes - val, axis=1).min()))
        rows.append(",".join([str(int(n))] + [repr(float(v)) for v in val] + [dist]))
    _emit(args, "checkpoints.csv", "\n".join(rows) + "\n")
    summary = {
        "largest_gap": est.largest_gap,
        "hausdorff": est.hausdorff,
        "checkpoints": int(len(bp.checkpoints)),
        "length": int(bp.checkpoints[-1]),
    }
    if args.output:
        _emit(args, "result.json", json.dumps(summary, sort_keys=True) + "\n")
    print(
        f"value={est.hausdorff if est.hausdorff is not None else est.largest_gap}"
        f" method=historic-verify residual={est.largest_gap:.6e}"
    )
    return 0


def cmd_selftest(args):
    from .selftest import run_selftest

    results = run_selftest(seed=args.seed, output=args.output)
    return 0 if all(r.passed for r in results) else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="shiftpress",
        description="Pressure, spectra, historic orbits, and IFS dimensions on subshifts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pressure", help="topological pressure of the full shift space")
    p.add_argument("--system", required=True)
    p.add_argument("--phi", default="zero")
    p.add_argument("--method", choices=["spectral", "variational", "cover"], default="spectral")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--length", type=int, default=10, help="cover length n")
    p.add_argument("--eps-index", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_pressure)

    p = sub.add_parser("spectrum", help="Lambda curve over a grid of averages")
    p.add_argument("--system", required=True)
    p.add_argument("--f", action="append", required=True)
    p.add_argument("--phi", default="zero")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("level-pressure", help="pressure of accumulation level sets")
    p.add_argument("--system", required=True)
    p.add_argument("--mode", choices=["equ", "sub", "sup", "between"], required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--target2", help="outer target for mode=between")
    p.add_argument("--f", action="append", required=True)
    p.add_argument("--phi", default="zero")
    p.add_argument("--output")
    p.set_defaults(fn=cmd_level_pressure)

    p = sub.add_parser("relative", help="relative spectrum of ratio averages")
    p.add_argument("--system", required=True)
    p.add_argument("--f", required=True)
    p.add_argument("--g", required=True)
    p.add_argument("--psi", default="zero")
    p.add_argument("--alpha", type=float)
    p.add_argument("--alphas", default="0.1:0.9:17", help="lo:hi:count grid")
    p.add_argument("--output")
    p.set_defaults(fn=cmd_relative)

    p = sub.add_parser("dimension", help="BS/Hausdorff dimension via the Bowen root")
    p.add_argument("--system")
    p.add_argument("--psi", default="zero")
    p.add_argument("--ifs", help="recurrent IFS JSON; uses its scale potential")
    p.add_argument("--target")
    p.add_argument("--f", action="append", default=[])
    p.add_argument("--mode", choices=["equ", "sub", "sup"], default="sup")
    p.add_argument("--osc", choices=["check", "strict", "assume"], default="check")
    p.add_argument("--output")
    p.set_defaults(fn=cmd_dimension)

    p = sub.add_parser("historic", help="plan / synthesize / verify historic orbits")
    hsub = p.add_subparsers(dest="historic_command", required=True)

    hp = hsub.add_parser("plan")
    hp.add_argument("--system", required=True)
    hp.add_argument("--f", action="append", required=True)
    hp.add_argument("--target", required=True)
    hp.add_argument("--steps", type=int, default=20)
    hp.add_argument("--seed", type=int, default=0)
    hp.add_argument("--levels", type=int, default=5)
    hp.add_argument("--block-len", type=int, default=240)
    hp.add_argument("--budget", type=int, default=10**7)
    hp.add_argument("--output")
    hp.set_defaults(fn=cmd_historic_plan)

    hs = hsub.add_parser("synth")
    hs.add_argument("--blueprint", required=True)
    hs.add_argument("--length", type=int, default=None)
    hs.add_argument("--output")
    hs.set_defaults(fn=cmd_historic_synth)

    hv = hsub.add_parser("verify")
    hv.add_argument("--blueprint", required=True)
    hv.add_argument("--system")
    hv.add_argument("--f", action="append", required=True)
    hv.add_argument("--samples", type=int, default=64)
    hv.add_argument("--output")
    hv.set_defaults(fn=cmd_historic_verify)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--output")
    p.set_defaults(fn=cmd_selftest)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except PreconditionError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except ConvergenceError as err:
        print(f"error: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
