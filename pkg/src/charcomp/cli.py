"""Command-line front end.

Subcommands read and write JSON. Every report embeds the resolved config, and
all randomness derives from one root seed, so identical invocations produce
byte-identical output. Flags ``--seed``, ``--shots``, ``--threshold``,
``--starts`` and ``--noise`` can also be set through ``CHARCOMP_SEED``,
``CHARCOMP_SHOTS``, ``CHARCOMP_THRESHOLD``, ``CHARCOMP_STARTS`` and
``CHARCOMP_NOISE``; explicit flags win.

Exit codes: 0 on success, 2 on invalid input, 3 on synthesis or fit failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
import zlib
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .characterize import (
    ControlledPulseModel,
    CrCoefficients,
    NoiseSpec,
    TomographyConfig,
    characterize,
    controlled_c1,
    controlled_unitary,
    cr_to_model,
    model_to_cr,
)
from .circuit import (
    BenchNoiseModel,
    Circuit,
    compile_circuit,
    equivalent,
    exact_trotter_magnetization,
    qft_circuit,
    replicate_gateset,
    MAX_UNITARY_QUBITS,
)
from .coverage import GateSet, build_coverage_set, example_gateset
from .errors import CharCompError, SynthesisError, ValidationError
from .linalg import process_infidelity
from .synth_numeric import OptimizerConfig

ENV_PREFIX = "CHARCOMP_"
EXIT_OK, EXIT_INVALID, EXIT_FAILURE = 0, 2, 3
BUILTINS = {"qft3": "qft3.json", "example": "example_gateset.json"}

log = logging.getLogger("charcomp")


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def derive_seed(root: int, label: str) -> int:
    """Child seed for a named subsystem."""
    seq = np.random.SeedSequence([int(root), zlib.crc32(label.encode())])
    return int(seq.generate_state(1)[0])


def _env(name: str, cast):
    raw = os.environ.get(ENV_PREFIX + name.upper())
    if raw is None:
        return None
    try:
        return cast(raw)
    except ValueError as exc:
        raise UsageError(f"environment variable {ENV_PREFIX}{name.upper()}={raw!r} is invalid") from exc


def _resolve(args, name: str, cast, default):
    val = getattr(args, name, None)
    if val is not None:
        return val
    env = _env(name, cast)
    return default if env is None else env


def _load_json(spec: str):
    if spec.startswith("builtin:"):
        name = spec.split(":", 1)[1]
        if name not in BUILTINS:
            raise UsageError(f"unknown builtin {name!r}; choose from {sorted(BUILTINS)}")
        text = resources.files("charcomp").joinpath("data", BUILTINS[name]).read_text()
    else:
        path = Path(spec)
        if not path.is_file():
            raise UsageError(f"input file {spec!r} does not exist")
        text = path.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"{spec!r} is not valid JSON: {exc}") from exc


def _check_output(path: str | None):
    if path and not Path(path).resolve().parent.is_dir():
        raise UsageError(f"output directory for {path!r} does not exist")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_default) + "\n"


def _default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _emit(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def load_gatesets(data) -> dict:
    """Pair map from gate-set JSON.

    Accepts a single gate set, a gate set with a ``"pairs"`` list (the same
    pulses on every listed pair) or ``{"gatesets": [...]}``.
    """
    if isinstance(data, dict) and "gatesets" in data:
        out = {}
        for item in data["gatesets"]:
            out.update(load_gatesets(item))
        return out
    if not isinstance(data, dict):
        raise UsageError("gate-set JSON must be an object")
    gs = GateSet.from_json(data)
    pairs = data.get("pairs")
    if pairs:
        return replicate_gateset(gs, [tuple(p) for p in pairs])
    return {gs.pair: (gs, build_coverage_set(gs))}


# -- subcommands --------------------------------------------------------------------


def cmd_characterize(args) -> dict:
    data = _load_json(args.input)
    seed = _resolve(args, "seed", int, 0)
    shots = _resolve(args, "shots", int, 128)
    noise = NoiseSpec(_resolve(args, "noise", float, 1e-2))
    iterations = tuple(args.iterations) if args.iterations else (1, 2, 4, 8)
    entries = data.get("pulses") if isinstance(data, dict) else None
    if not entries:
        raise UsageError("characterize input needs a non-empty 'pulses' list")
    rows = []
    for idx, entry in enumerate(entries):
        label = str(entry.get("label", f"pulse{idx}"))
        pair = [int(q) for q in entry.get("pair", (0, 1))]
        if "cr" in entry:
            nu = CrCoefficients(**{k: float(v) for k, v in entry["cr"].items()})
            truth = cr_to_model(nu)
        elif "model" in entry:
            nu = None
            truth = ControlledPulseModel.from_json(entry["model"])
        else:
            raise UsageError(f"pulse {label!r} needs a 'cr' or 'model' ground truth")
        config = TomographyConfig(iterations, shots, derive_seed(seed, f"characterize/{idx}/{label}"),
                                  exact=args.exact)
        result = characterize(truth, config, noise, float(entry.get("duration", 0.0)), label)
        row = {
            "label": label,
            "pair": pair,
            "truth": truth.to_json(),
            "fit": result.model.to_json(),
            "c1": controlled_c1(result.model),
            "coords": list(result.gate.coords),
            "infidelity": process_infidelity(controlled_unitary(result.model), controlled_unitary(truth)),
            "diagnostics": result.diagnostics.to_json(),
            "gate": result.gate.to_json(),
        }
        if nu is not None:
            row["cr_truth"] = nu.to_json()
            row["cr_fit_equivalent"] = model_to_cr(result.model).to_json()
        rows.append(row)
    return {"config": {"seed": seed, "shots": shots, "iteration_set": list(iterations), "exact": args.exact,
                       "noise": noise.to_json()},
            "pulses": rows}


def cmd_coverage(args) -> dict:
    table = load_gatesets(_load_json(args.gateset))
    out = []
    for pair, (gs, cov) in sorted(table.items()):
        out.append({"gateset": gs.to_json(), "coverage": cov.to_json()})
    return {"config": {"gateset": args.gateset}, "coverage_sets": out}


def _optimizer(args) -> OptimizerConfig:
    seed = _resolve(args, "seed", int, 0)
    return OptimizerConfig(max_steps=100, n_starts=_resolve(args, "starts", int, 5),
                           threshold=_resolve(args, "threshold", float, 1e-10), seed=derive_seed(seed, "optimizer"))


def cmd_compile(args) -> dict:
    circuit = Circuit.from_json(_load_json(args.circuit))
    table = load_gatesets(_load_json(args.gateset))
    config = _optimizer(args)
    modes = ("extended", "spe_only") if args.mode == "both" else (args.mode,)
    report: dict = {"config": {"circuit": args.circuit, "gateset": args.gateset, "mode": args.mode,
                               "optimizer": config.to_json()}}
    for mode in modes:
        compiled = compile_circuit(circuit, table, mode, config)
        entry = compiled.to_json()
        if circuit.num_qubits <= MAX_UNITARY_QUBITS:
            entry["process_infidelity"] = equivalent(circuit, compiled.circuit)
        report[mode] = entry
    if len(modes) == 2:
        ext = report["extended"]["total_two_qubit_duration"]
        base = report["spe_only"]["total_two_qubit_duration"]
        report["comparison"] = {"extended_duration": ext, "baseline_duration": base,
                                "ratio": ext / base if base else None}
    return report


def _bench_gatesets(args, n: int, line: bool) -> dict:
    if args.gateset:
        data = _load_json(args.gateset)
        gs = GateSet.from_json(data["gatesets"][0] if "gatesets" in data else data)
    else:
        gs = example_gateset()
    pairs = [(i, i + 1) for i in range(n - 1)] if line else itertools.combinations(range(n), 2)
    return replicate_gateset(gs, pairs)


def _bench_noise(args) -> BenchNoiseModel:
    return BenchNoiseModel(_resolve(args, "noise", float, 1e-2), args.reference_duration)


def cmd_bench_qft(args) -> dict:
    from .circuit import simulate_counts

    seed = _resolve(args, "seed", int, 0)
    shots = _resolve(args, "shots", int, 4096)
    noise = _bench_noise(args)
    modes = ("extended", "spe_only") if args.mode == "both" else (args.mode,)
    table = _bench_gatesets(args, max(args.n), line=False)
    rows = []
    for n in args.n:
        rng = np.random.default_rng(derive_seed(seed, f"qft/{n}/targets"))
        per_seed = []
        for s in range(args.seeds):
            target = "".join(rng.choice(["0", "1"], size=n))
            c = qft_circuit(n, target)
            rec: dict = {"seed": s, "target": target}
            for mode in modes:
                compiled = compile_circuit(c, table, mode)
                counts = simulate_counts(compiled.circuit, shots, noise, derive_seed(seed, f"qft/{n}/{s}/{mode}"))
                rec[mode] = {"success_probability": counts.get(target, 0) / shots,
                             "duration": compiled.total_two_qubit_duration}
            per_seed.append(rec)
        row: dict = {"n": n, "runs": per_seed}
        for mode in modes:
            row[f"{mode}_mean"] = float(np.mean([r[mode]["success_probability"] for r in per_seed]))
        if len(modes) == 2:
            row["extended_at_least_baseline"] = float(np.mean(
                [r["extended"]["success_probability"] >= r["spe_only"]["success_probability"] for r in per_seed]))
        rows.append(row)
    return {"config": {"seed": seed, "shots": shots, "seeds": args.seeds, "widths": list(args.n),
                       "mode": args.mode, "noise": noise.to_json()},
            "table": rows}


def cmd_bench_trotter(args) -> dict:
    from .acceptance import trotter_runs

    seed = _resolve(args, "seed", int, 0)
    shots = _resolve(args, "shots", int, 4096)
    noise = _bench_noise(args)
    table = _bench_gatesets(args, args.qubits, line=True)
    exact = exact_trotter_magnetization(args.qubits, args.steps)
    runs = []
    for s in range(args.seeds):
        traj = trotter_runs(args.qubits, args.steps, table, noise, shots, derive_seed(seed, f"trotter/{s}"))
        mse = {mode: {axis: float(np.mean([(a - b) ** 2 for a, b in zip(traj[mode][axis], exact[axis])]))
                      for axis in ("Y", "Z")} for mode in traj}
        runs.append({"seed": s, "trajectories": traj, "mse": mse})
    summary = {mode: {axis: float(np.mean([r["mse"][mode][axis] for r in runs])) for axis in ("Y", "Z")}
               for mode in ("extended", "spe_only")}
    return {"config": {"seed": seed, "shots": shots, "seeds": args.seeds, "qubits": args.qubits,
                       "steps": args.steps, "noise": noise.to_json()},
            "exact": exact, "runs": runs, "mean_mse": summary}


def cmd_selftest(args) -> dict:
    from .acceptance import run_all

    results = run_all(quick=not args.full, only=set(args.only) if args.only else None)
    for r in results:
        print(r.line(), file=sys.stderr)
    return {"config": {"full": args.full, "only": args.only}, "passed": all(r.passed for r in results),
            "results": [r.to_json() for r in results]}


def _qft_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = [k for k in ("extended_mean", "spe_only_mean", "extended_at_least_baseline") if k in report["table"][0]]
    w.writerow(["n"] + keys)
    for row in report["table"]:
        w.writerow([row["n"]] + [row[k] for k in keys])
    return buf.getvalue()


def _trotter_csv(report: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["seed", "mode", "axis", "step", "value", "exact"])
    for run in report["runs"]:
        for mode, traj in run["trajectories"].items():
            for axis, vals in traj.items():
                for step, v in enumerate(vals):
                    w.writerow([run["seed"], mode, axis, step, v, report["exact"][axis][step]])
    return buf.getvalue()


# -- parser ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, *flags: str):
    p.add_argument("-o", "--output", help="write the report here instead of stdout")
    if "seed" in flags:
        p.add_argument("--seed", type=int, help="root seed (env CHARCOMP_SEED)")
    if "shots" in flags:
        p.add_argument("--shots", type=int, help="shots per circuit (env CHARCOMP_SHOTS)")
    if "noise" in flags:
        p.add_argument("--noise", type=float, help="depolarizing probability (env CHARCOMP_NOISE)")
    if "opt" in flags:
        p.add_argument("--threshold", type=float, help="invariant-loss threshold (env CHARCOMP_THRESHOLD)")
        p.add_argument("--starts", type=int, help="optimizer starts (env CHARCOMP_STARTS)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="charcomp", description="Characterize pulses and compile circuits with them.")
    parser.add_argument("--version", action="version", version=f"charcomp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("characterize", help="simulate tomography of ground-truth pulses and fit them")
    p.add_argument("input", help="JSON with a 'pulses' list of {label, pair, duration, cr | model}")
    p.add_argument("--iterations", type=int, nargs="+", help="pulse iteration counts (default 1 2 4 8)")
    p.add_argument("--exact", action="store_true", help="fit exact probabilities instead of counts")
    _common(p, "seed", "shots", "noise")
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("coverage", help="dump the coverage set of a gate set")
    p.add_argument("gateset", help="gate-set JSON path or builtin:example")
    _common(p)
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("compile", help="compile a circuit with a gate set")
    p.add_argument("circuit", help="circuit JSON path or builtin:qft3")
    p.add_argument("gateset", help="gate-set JSON path or builtin:example")
    p.add_argument("--mode", choices=("extended", "spe_only", "both"), default="both")
    _common(p, "seed", "opt")
    p.set_defaults(func=cmd_compile)

    bench = sub.add_parser("bench", help="noisy desk-scale benchmarks")
    bsub = bench.add_subparsers(dest="bench", parser_class=_Parser)
    p = bsub.add_parser("qft", help="inverse-QFT success probability per width")
    p.add_argument("--n", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--mode", choices=("extended", "spe_only", "both"), default="both")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--gateset", help="gate-set JSON replicated on every pair (default: built-in example)")
    p.add_argument("--reference-duration", type=float, default=320.0)
    p.add_argument("--csv", action="store_true", help="emit the summary table as CSV")
    _common(p, "seed", "shots", "noise")
    p.set_defaults(func=cmd_bench_qft, csv_writer=_qft_csv)
    p = bsub.add_parser("trotter", help="transverse-field Ising magnetization trajectories")
    p.add_argument("--qubits", type=int, default=4)
    p.add_argument("--steps", type=int, default=6)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--gateset", help="gate-set JSON replicated on every bond (default: built-in example)")
    p.add_argument("--reference-duration", type=float, default=320.0)
    p.add_argument("--csv", action="store_true", help="emit trajectories as CSV")
    _common(p, "seed", "shots", "noise")
    p.set_defaults(func=cmd_bench_trotter, csv_writer=_trotter_csv)

    p = sub.add_parser("selftest", help="run the acceptance checks (reduced sizes unless --full)")
    p.add_argument("--full", action="store_true")
    p.add_argument("--only", type=int, nargs="+", help="criterion numbers to run")
    _common(p)
    p.set_defaults(func=cmd_selftest)
    return parser


def _error(exc: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
                                sort_keys=True) + "\n")
    return code


def run(argv: Sequence[str] | None = None) -> int:
    """Execute one invocation and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None or (args.command == "bench" and args.bench is None):
            raise UsageError("a subcommand is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        _check_output(getattr(args, "output", None))
        report = args.func(args)
        if getattr(args, "csv", False):
            text = args.csv_writer(report)
        else:
            text = dumps(report)
        _emit(text, args.output)
        if args.command == "selftest" and not report["passed"]:
            return EXIT_FAILURE
        return EXIT_OK
    except ValidationError as exc:
        return _error(exc, EXIT_INVALID)
    except SynthesisError as exc:
        return _error(exc, EXIT_FAILURE)
    except CharCompError as exc:
        return _error(exc, EXIT_FAILURE)
    except (ValueError, KeyError, TypeError) as exc:
        return _error(exc, EXIT_INVALID)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
