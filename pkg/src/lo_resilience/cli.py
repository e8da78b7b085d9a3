"""Command-line front end.

Every command prints (or writes with --out) a run record:

    {"schema", "command", "inputs", "outputs", "seed", "version", "wall_time_ms"}

``inputs`` echoes every parameter that affects the result, so
``lo-resilience replay RECORD`` re-executes the run and compares outputs.

Weights files hold whitespace- or newline-separated integers, or rationals
p/q (scaled by the LCM of the denominators, and the target with them), or a
JSON document {"name": ..., "weights": [...], "params": {...}}. Lines
starting with '#' are ignored. Sign strings use '+' and '-', one character
per position, matching bit 1 = '+'.

Exit codes: 0 success, 2 usage or parse error, 3 resource limit,
4 construction error, 1 replay mismatch.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .basis import build_basis, optimal_basis_bruteforce, square_bound_ceil
from .core import SignVector, WeightSequence, evaluate
from .errors import ResilienceError, UsageError
from .families import Family, FamilySpec, certify, generate
from .hypercube import EXHAUSTIVE_LIMIT, hypercube_profile, qk_exact
from .solver import Exceeded, resilience, resilience_bounded, resilience_dp
from .stats import (berry_esseen_check, certificate_success, estimate_resilience_prob,
                    exact_resilience_prob, max_atom_probability, parse_grid, sweep)

SCHEMA = "lo-resilience/run-record/1"
THREADS_ENV = "LO_RESILIENCE_THREADS"
# parameters that never change a result and are left out of the echo
_NOT_ECHOED = {"command", "func", "out", "format", "threads", "no_timing"}

CSV_HELP = """CSV output: profile writes columns d,count and sweep writes
n,samples,estimate,estimate_exact,ci_low,ci_high[,wall_time][,error], one row
per entry. Every other command writes a single row with one column per
output field; lists are space-joined and nested maps are JSON."""


# ------------------------------------------------------------- parsing


def _parse_number(token: str, where: str) -> Fraction:
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"{where}: cannot parse {token!r} as an integer or p/q") from None


def parse_weights_text(text: str, source: str = "<weights>") -> WeightSequence:
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"{source}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if "weights" not in doc:
            raise UsageError(f"{source}: JSON weights document needs a 'weights' field")
        values = [_parse_number(str(v), f"{source}: weights[{i}]")
                  for i, v in enumerate(doc["weights"])]
        name, params = doc.get("name"), dict(doc.get("params") or {})
    else:
        values = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.split("#", 1)[0]
            values.extend(_parse_number(tok, f"{source}:{lineno}") for tok in line.split())
        name, params = None, {}
    if not values:
        raise UsageError(f"{source}: no weights found")
    if any(v == 0 for v in values):
        raise UsageError(f"{source}: weights must be nonzero")
    a, scale = WeightSequence.from_rationals(values, name)
    return WeightSequence(a.weights, name, {**params, **({"scale": scale} if scale != 1 else {})})


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def load_sequence(args) -> WeightSequence:
    if getattr(args, "weights", None):
        return parse_weights_text(args.weights, "--weights")
    if getattr(args, "weights_file", None):
        path = args.weights_file
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read {path}: {exc.strerror}") from None
        want = getattr(args, "weights_sha256", None)
        if want and want != _digest(path):
            raise UsageError(f"{path} changed since the record was written")
        return parse_weights_text(text, path)
    if getattr(args, "family", None):
        return generate(_spec(args))
    raise UsageError("give --weights, --weights-file or --family")


def _spec(args) -> FamilySpec:
    if args.n is None:
        raise UsageError("--family needs --n")
    eps = Fraction(args.epsilon) if args.epsilon is not None else None
    return FamilySpec(args.family, args.n, args.k_order, eps, args.g)


def _target(a: WeightSequence, x: str) -> int | None:
    """Target scaled like the weights; None when it cannot be an integer sum."""
    value = _parse_number(x, "--x") * a.params.get("scale", 1)
    return int(value) if value.denominator == 1 else None


def _require_seed(args) -> int:
    if args.seed is None:
        raise UsageError(f"{args.command} is randomized and needs --seed")
    return args.seed


def _frac(f: Fraction) -> str:
    return f"{f.numerator}/{f.denominator}"


# ------------------------------------------------------------ commands


def cmd_resilience(args) -> dict:
    a = load_sequence(args)
    xi = SignVector.from_string(args.signs)
    x = _target(a, args.x)
    if x is None:
        return {"value": "inf", "witness": [], "algorithm": "scaling"}
    algo = args.algorithm
    if algo == "bounded" or (algo == "auto" and args.kmax is not None):
        kmax = a.n if args.kmax is None else args.kmax
        res = resilience_bounded(a, xi, x, kmax)
        algo = "bounded"
    elif algo == "dp":
        res = resilience_dp(a, xi, x)
    else:
        res = resilience(a, xi, x)
        algo = "auto"
    witness = [] if isinstance(res, Exceeded) or res.witness is None else list(res.witness)
    return {"value": str(res), "witness": witness, "algorithm": algo, "X": evaluate(a, xi)}


def cmd_profile(args) -> dict:
    a = load_sequence(args)
    x = _target(a, args.x)
    prof = hypercube_profile(a, x if x is not None else 0, args.limit, args.threads)
    if x is None:
        prof = type(prof)(0, a.n, {})
    rows = [{"d": d, "count": c} for d, c in sorted(prof.counts.items())]
    return {"target": x, "n": a.n, "achievable": prof.achievable, "rows": rows}


def cmd_qk(args) -> dict:
    a = load_sequence(args)
    cands = None
    if args.candidates:
        cands = [_target(a, c) for c in args.candidates.replace(",", " ").split()]
        cands = [c for c in cands if c is not None]
    res = qk_exact(a, args.k, cands, args.limit, args.threads)
    return {"value": _frac(res.value), "value_float": float(res.value), "argmax": res.argmax,
            "ties": res.ties, "k": res.k}


def cmd_basis(args) -> dict:
    basis = (optimal_basis_bruteforce if args.bruteforce else build_basis)(args.order, args.range)
    return {"elements": list(basis.elements), "sum_of_squares": basis.sum_of_squares,
            "bound": square_bound_ceil(args.order, args.range), "verified": basis.verify()}


def cmd_construct(args) -> dict:
    a = generate(_spec(args))
    return {"name": a.name, "n": a.n, "weights": list(a.weights), "params": dict(a.params),
            "total_sum": a.total_sum()}


def cmd_certify(args) -> dict:
    a = load_sequence(args)
    kwargs = {"L": args.L} if a.name == "janson_spencer" else {}
    if args.signs:
        res = certify(a, SignVector.from_string(args.signs), **kwargs)
        if not res.ok:
            return {"ok": False, "reason": res.reason, "stage": res.stage,
                    "strategy": res.strategy.value}
        return {"ok": True, "flips": list(res.flips), "size": res.size,
                "strategy": res.strategy.value, "bound": res.details.get("bound")}
    seed = _require_seed(args)
    return certificate_success(a, args.samples, seed, args.threads, **kwargs).to_dict()


def cmd_estimate(args) -> dict:
    a = load_sequence(args)
    x = _target(a, args.x)
    if x is None:
        raise UsageError("target is not an integer after scaling")
    if args.exact:
        rep = exact_resilience_prob(a, x, args.k, args.limit, args.threads)
    else:
        rep = estimate_resilience_prob(a, x, args.k, args.samples, _require_seed(args),
                                       args.threads)
    out = rep.to_dict()
    out.update(ci_low_exact=_frac(rep.ci_low), ci_high_exact=_frac(rep.ci_high))
    return out


def cmd_sweep(args) -> dict:
    seed = _require_seed(args)
    spec = _spec(argparse.Namespace(**{**vars(args), "n": 1}))
    res = sweep(spec, args.k, parse_grid(args.n_grid), args.samples, seed, args.x, args.threads)
    return res.to_dict(timing=not args.no_timing)


def cmd_bestats(args) -> dict:
    a = load_sequence(args)
    seed = _require_seed(args) if args.mode == "monte_carlo" else None
    be = berry_esseen_check(a, args.mode, args.samples, seed, args.limit, args.threads)
    atom = max_atom_probability(a, args.mode, args.samples, seed, args.limit, args.threads)
    return {**be.to_dict(), "max_atom": atom.to_dict()}


COMMANDS = {
    "resilience": cmd_resilience, "profile": cmd_profile, "qk": cmd_qk, "basis": cmd_basis,
    "construct": cmd_construct, "certify": cmd_certify, "estimate": cmd_estimate,
    "sweep": cmd_sweep, "bestats": cmd_bestats,
}


# ---------------------------------------------------------- run records


def _inputs(args) -> dict:
    out = {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_ECHOED}
    if out.get("weights_file"):
        out["weights_sha256"] = _digest(out["weights_file"])
    return out


def _csv(outputs: dict) -> str:
    buf = io.StringIO()
    rows = outputs.get("rows")
    if not rows:
        rows = [{k: (" ".join(map(str, v)) if isinstance(v, list) else
                     json.dumps(v, sort_keys=True) if isinstance(v, dict) else v)
                 for k, v in outputs.items() if k != "rows"}]
    fields = []
    for r in rows:
        fields.extend(k for k in r if k not in fields)
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def run(args) -> dict:
    start = time.perf_counter()
    outputs = args.func(args)
    record = {
        "schema": SCHEMA, "command": args.command, "inputs": _inputs(args), "outputs": outputs,
        "seed": getattr(args, "seed", None), "version": __version__,
        "wall_time_ms": 0 if args.no_timing else int((time.perf_counter() - start) * 1000),
    }
    return record


def render(record: dict, fmt: str) -> str:
    if fmt == "csv":
        return _csv(record["outputs"])
    return json.dumps(record, indent=2, sort_keys=True) + "\n"


def cmd_replay(args) -> int:
    try:
        record = json.loads(Path(args.record).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read run record {args.record}: {exc}") from None
    if record.get("schema") != SCHEMA:
        raise UsageError(f"{args.record} is not a run record")
    func = COMMANDS.get(record.get("command"))
    if func is None:
        raise UsageError(f"unknown command {record.get('command')!r} in {args.record}")
    ns = argparse.Namespace(**record["inputs"], command=record["command"], func=func,
                            threads=args.threads, no_timing=True, out=None, format="json")
    outputs = func(ns)
    if record["command"] == "sweep":
        for row in record["outputs"].get("rows", []):
            row.pop("wall_time", None)
    same = json.loads(json.dumps(outputs, sort_keys=True)) == record["outputs"]
    print("match" if same else "MISMATCH")
    return 0 if same else 1


# -------------------------------------------------------------- parser


def _default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="64-bit seed (required by randomized commands)")
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default from ${THREADS_ENV}, else 1)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--no-timing", action="store_true",
                   help="zero all wall-clock fields so repeated runs are byte-identical")


def _add_sequence(p: argparse.ArgumentParser, family: bool = True) -> None:
    p.add_argument("--weights", help='inline weights, e.g. "1 1 1 1" or "1/2 3"')
    p.add_argument("--weights-file", help="weights file (integers, p/q, or JSON)")
    if family:
        _add_family(p, required=False)


def _add_family(p: argparse.ArgumentParser, required: bool) -> None:
    p.add_argument("--family", choices=[f.value for f in Family], required=required)
    p.add_argument("--n", type=int)
    p.add_argument("--k-order", type=int, help="basis order for pk_lower")
    p.add_argument("--epsilon", help="rational in (0,1), default 1/10")
    p.add_argument("--g", type=int, help="p1_sharp tail length")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lo-resilience", description="Resilience of Rademacher sums.",
        epilog=CSV_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("resilience", help="exact R_x for one sign vector")
    _add_sequence(p)
    p.add_argument("--signs", required=True, help="sign string over {+,-}")
    p.add_argument("--x", default="0", help="target value (default 0)")
    p.add_argument("--kmax", type=int, help="only search up to this many flips")
    p.add_argument("--algorithm", choices=("auto", "dp", "bounded"), default="auto")
    p.set_defaults(func=cmd_resilience)

    p = sub.add_parser("profile", help="exact distribution of R_x over the cube")
    _add_sequence(p)
    p.add_argument("--x", default="0")
    p.add_argument("--limit", type=int, default=EXHAUSTIVE_LIMIT)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("qk", help="exact q_k = max_x Pr[R_x <= k]")
    _add_sequence(p)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--candidates", help="targets to consider (default: every atom)")
    p.add_argument("--limit", type=int, default=EXHAUSTIVE_LIMIT)
    p.set_defaults(func=cmd_qk)

    p = sub.add_parser("basis", help="order-h additive basis of [n]")
    p.add_argument("--order", type=int, required=True)
    p.add_argument("--range", type=int, required=True)
    p.add_argument("--bruteforce", action="store_true", help="exact optimum (range <= 24)")
    p.set_defaults(func=cmd_basis)

    p = sub.add_parser("construct", help="generate a family member")
    _add_family(p, required=True)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("certify", help="flip certificates for R_0")
    _add_sequence(p)
    p.add_argument("--signs", help="certify one sign vector")
    p.add_argument("--samples", type=int, default=1000, help="random sign vectors")
    p.add_argument("--L", type=float, default=20.0, help="janson_spencer start threshold")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("estimate", help="estimate Pr[R_x <= k]")
    _add_sequence(p)
    p.add_argument("--x", default="0")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--exact", action="store_true", help="exhaustive instead of Monte Carlo")
    p.add_argument("--limit", type=int, default=EXHAUSTIVE_LIMIT)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="Pr[R_x <= k] over a grid of n with a log-log fit")
    _add_family(p, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n-grid", required=True, help="start:stop:xF, start:stop:+S or a,b,c")
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--x", type=int, default=0)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bestats", help="normal approximation and largest atom")
    _add_sequence(p)
    p.add_argument("--mode", choices=("exhaustive", "monte_carlo"), default="exhaustive")
    p.add_argument("--samples", type=int)
    p.add_argument("--limit", type=int, default=EXHAUSTIVE_LIMIT)
    p.set_defaults(func=cmd_bestats)

    for sp in sub.choices.values():
        _add_common(sp)

    p = sub.add_parser("replay", help="re-execute a JSON run record and compare outputs")
    p.add_argument("record")
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.threads is None:
            args.threads = _default_threads()
        if args.threads < 1:
            raise UsageError("--threads must be >= 1")
        if args.command == "replay":
            return cmd_replay(args)
        text = render(run(args), args.format)
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    except ResilienceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
