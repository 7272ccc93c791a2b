"""Command-line front end: parameter sweeps and protocol runs written as CSV."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from pathlib import Path

import numpy as np

from . import confkey, coqkd, states, teleport
from ._engine import check_seed

TMES_COLUMNS = ("p", "minus_lower_left", "unitarity_residual", "state_distance")
CLASSIFY_COLUMNS = ("family", "p", "a", "entropies", "label", "controllers", "key_pair")
COQKD4_COLUMNS = ("path", "alpha", "beta", "m", "outcome", "probability", "q_formula", "qber_analytic",
                  "agree", "qber_mc")

SCHEMAS = {
    "classify": CLASSIFY_COLUMNS,
    "coqkd": coqkd.REPORT_COLUMNS,
    "coqkd4": COQKD4_COLUMNS,
    "conference": confkey.CSV_COLUMNS,
    "teleport": teleport.CSV_COLUMNS,
    "tmes-check": TMES_COLUMNS,
}

DEFAULTS = {"rounds": 100_000, "seed": 0}


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (stop included within 1e-12), a comma list, or one value."""
    text = str(text).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid {text!r} must look like start:stop:step")
        a, b, s = (float(x) for x in parts)
        if s <= 0 or b < a:
            raise ConfigError(f"grid {text!r} needs step > 0 and stop >= start")
        count = int(math.floor((b - a) / s)) + 2
        vals = [round(a + i * s, 12) for i in range(count) if a + i * s <= b + 1e-12]
    else:
        vals = [float(x) for x in text.split(",") if x.strip()]
    if not vals:
        raise ConfigError(f"grid {text!r} is empty")
    return vals


def parse_complex(text: str) -> complex:
    """Accept ``re+imi`` style values (``0.5+0.2i``, ``-1i``, ``0.3``)."""
    try:
        return complex(str(text).strip().replace(" ", "").replace("i", "j"))
    except ValueError as exc:
        raise ConfigError(f"cannot read complex value {text!r}") from exc


def read_config(path: str) -> dict[str, str]:
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for raw in lines:
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed config line {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        values[k.replace("-", "_").lower()] = v
    return values


def point_seed(seed: int, index: int) -> int:
    """Independent 64-bit seed for grid point ``index``."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


# -- commands ------------------------------------------------------------------


def _p_values(args, allow_edges=False) -> list[float]:
    if args.p_grid is not None:
        return parse_grid(args.p_grid)
    if args.p is not None:
        return [float(args.p)]
    raise ConfigError("need --p or --p-grid")


def cmd_classify(args):
    kets = [getattr(args, f"phi{i}") for i in range(1, 5)]
    kets = tuple(k if k in states.BELL_KETS else np.array([parse_complex(x) for x in k.split(",")])
                 for k in kets if k is not None)
    spec = states.ResourceSpec(args.family, p=None if args.p is None else float(args.p),
                               a=None if args.a is None else float(args.a), kets=kets)
    verdict = states.classify(states.build(spec))
    row = [spec.family, fmt(spec.p), fmt(spec.a), ";".join(fmt(float(s)) for s in verdict.marginal_entropies),
           verdict.label, "".join(verdict.controllers), "".join(verdict.key_pair)]
    summary = [f"{spec.family}: entropies {', '.join(f'{s:.6f}' for s in verdict.marginal_entropies)}"
               f" -> {verdict.label}"]
    return [row], summary


def cmd_coqkd(args):
    mode = coqkd.WITH_SECURITY if args.mode.lower() in ("security", "with_security") else coqkd.KEYRATE_ONLY
    rows, summary = [], []
    for i, (p, n) in enumerate((p, n) for p in _p_values(args) for n in parse_grid(args.n_grid)):
        kw = dict(basis_n=parse_complex(args.basis_n), flip_prob=float(args.flip_prob),
                  intercept_prob=float(args.intercept_prob))
        seed = point_seed(args.seed, i)
        if args.branch == "mix":
            _, rep = coqkd.run_controlled(p, n, args.rounds, mode, seed, **kw)
        else:
            _, rep = coqkd.run_branch(p, n, args.branch, args.rounds, mode, seed, **kw)
        rows.append(rep.row())
        summary.append(f"p={p:<8g} n={n:<8g} QBER analytic={rep.qber_analytic:.6f} mc={rep.qber_mc:.6f}"
                       f" delta={rep.qber_mc - rep.qber_analytic:+.2e}  {rep.verdict}")
    return rows, summary


def cmd_coqkd4(args):
    rows, summary = [], []
    if args.m_grid is not None:
        points = [dict(m=m) for m in parse_grid(args.m_grid)]
    else:
        points = [dict(alpha=a, beta=b) for a in parse_grid(args.alpha) for b in parse_grid(args.beta)]
    for i, pt in enumerate(points):
        rep = coqkd.four_qubit_run(rounds=args.rounds, seed=point_seed(args.seed, i), **pt)
        rows.append([rep.path, fmt(pt.get("alpha")), fmt(pt.get("beta")), fmt(pt.get("m")), rep.outcome,
                     fmt(rep.probability), fmt(rep.q_formula), fmt(rep.qber_analytic), fmt(rep.agree),
                     fmt(rep.qber_mc)])
        tag = ", ".join(f"{k}={v:g}" for k, v in pt.items())
        summary.append(f"{tag}: formula={rep.q_formula:.6f} oracle={rep.qber_analytic:.6f}"
                       f" mc={rep.qber_mc:.6f} agree={rep.agree}")
    return rows, summary


def cmd_conference(args):
    rows, summary = [], []
    for i, p in enumerate(_p_values(args)):
        _, rep = confkey.run_conference(p, args.rounds, point_seed(args.seed, i), args.secure,
                                        intercept_prob=float(args.intercept_prob))
        rows.append(rep.row())
        q = rep.qber_expected["overall"]
        summary.append(f"p={p:<8g} QBER analytic={q:.6f} mc={rep.qber_mc['overall']:.6f}"
                       f" delta={rep.qber_mc['overall'] - q:+.2e}  {rep.verdict}")
    return rows, summary


def cmd_teleport(args):
    rows, summary = [], []
    inp = None
    if args.input is not None:
        th, ph = (float(x) for x in args.input.split(","))
        inp = (th, ph)
    i = 0
    for p in _p_values(args):
        for n in parse_grid(args.n_grid):
            pt = teleport.sweep_point(p, n)
            sim = teleport.simulate_roundtrip(p, n, inp, point_seed(args.seed, i), args.rounds)
            i += 1
            rows.append([fmt(v) for v in (p, n, pt.p_plus, pt.F_plus, pt.F_minus, pt.F_avg, pt.C_avg, sim.mean)])
            summary.append(f"p={p:<8g} n={n:<8g} F_avg={pt.F_avg:.6f} C_avg={pt.C_avg:.6f}"
                           f" F_sim={sim.mean:.6f}+-{sim.stderr:.1e}")
    return rows, summary


def cmd_tmes(args):
    rows, summary = [], []
    failed = False
    for p in _p_values(args):
        u = states.tmes_unitary(p, args.minus_lower_left)
        res = states.unitarity_residual(u)
        built = states.tmes_construct(p, args.minus_lower_left).amplitudes
        dist = float(np.linalg.norm(built - states.nmm(p).amplitudes))
        ok = res < 1e-12 and dist < 1e-12
        failed |= not ok
        rows.append([fmt(p), fmt(args.minus_lower_left), fmt(res), fmt(dist)])
        summary.append(f"p={p:g} unitarity residual={res:.2e} state distance={dist:.2e}"
                       f" {'ok' if ok else 'MISMATCH'}")
    return rows, summary, failed


COMMANDS = {
    "classify": cmd_classify, "coqkd": cmd_coqkd, "coqkd4": cmd_coqkd4,
    "conference": cmd_conference, "teleport": cmd_teleport, "tmes-check": cmd_tmes,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="controlled-qkd",
        description="Controlled key distribution, conference key and teleportation experiments.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="CSV schemas:\n" + "\n".join(f"  {k}: {', '.join(v)}" for k, v in SCHEMAS.items()),
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; command-line flags take precedence")
    common.add_argument("--rounds", type=int, default=None, help="Monte Carlo rounds per point (default 100000)")
    common.add_argument("--seed", type=int, default=None, help="64-bit master seed (default 0)")
    common.add_argument("--out", help="CSV output path (default: CSV to stdout, no summary)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text,
                            description=f"{help_text}\n\nCSV columns: {', '.join(SCHEMAS[name])}",
                            formatter_class=argparse.RawDescriptionHelpFormatter)
        return sp

    sp = add("classify", "marginal-entropy suitability of a resource state")
    sp.add_argument("--family")
    sp.add_argument("--p")
    sp.add_argument("--a")
    for i in range(1, 5):
        sp.add_argument(f"--phi{i}", help="Bell name or four re+imi amplitudes, comma separated")

    sp = add("coqkd", "controlled two-party key distribution over NMM(p)")
    sp.add_argument("--p")
    sp.add_argument("--p-grid")
    sp.add_argument("--n-grid")
    sp.add_argument("--mode", help="keyrate (default) or security")
    sp.add_argument("--branch", help="'+' (default), '-' or 'mix' for Charlie's announced outcome")
    sp.add_argument("--basis-n", help="Alice/Bob second-basis parameter (re+imi, default 1)")
    sp.add_argument("--flip-prob", help="probability Bob's announcement is flipped")
    sp.add_argument("--intercept-prob", help="intercept-resend probability on Bob's qubit")

    sp = add("coqkd4", "four-qubit controlled key distribution")
    sp.add_argument("--alpha", help="Charlie's basis parameter grid")
    sp.add_argument("--beta", help="Dennis's basis parameter grid")
    sp.add_argument("--m-grid", help="joint generalized-Bell-basis parameter grid")

    sp = add("conference", "three-party conference key")
    sp.add_argument("--p")
    sp.add_argument("--p-grid")
    sp.add_argument("--secure", action="store_true", default=None, help="add the tripartite Bell test")
    sp.add_argument("--intercept-prob")

    sp = add("teleport", "cooperative teleportation sweep")
    sp.add_argument("--p")
    sp.add_argument("--p-grid")
    sp.add_argument("--n-grid")
    sp.add_argument("--input", help="fixed input Bloch angles theta,phi (default: 20-point design)")

    sp = add("tmes-check", "unitarity and state check of the TMES construction")
    sp.add_argument("--p")
    sp.add_argument("--p-grid")
    sp.add_argument("--minus-lower-left", action="store_true", default=None)
    return parser


COMMAND_DEFAULTS = {
    "coqkd": {"n_grid": "0:1:0.05", "mode": "keyrate", "branch": "+", "basis_n": "1",
              "flip_prob": "0", "intercept_prob": "0"},
    "coqkd4": {"alpha": "0", "beta": "0"},
    "conference": {"secure": False, "intercept_prob": "0"},
    "teleport": {"n_grid": "0:1:0.05"},
    "tmes-check": {"minus_lower_left": False},
}
BOOL_KEYS = {"secure", "minus_lower_left"}


def resolve(args) -> argparse.Namespace:
    """Fill unset flags from the config file, then from defaults."""
    file_values = read_config(args.config) if args.config else {}
    known = set(vars(args))
    for key, val in file_values.items():
        if key not in known or key in ("command", "config"):
            raise ConfigError(f"unknown config key {key!r} for command {args.command}")
        if getattr(args, key) is None:
            if key in BOOL_KEYS:
                val = val.lower() in ("1", "true", "yes", "on")
            setattr(args, key, val)
    for key, val in {**DEFAULTS, **COMMAND_DEFAULTS.get(args.command, {})}.items():
        if getattr(args, key, None) is None:
            setattr(args, key, val)
    try:
        args.rounds = int(args.rounds)
        args.seed = check_seed(int(args.seed))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.rounds < 1:
        raise ConfigError("rounds must be at least 1")
    if args.command == "coqkd" and args.branch not in ("+", "-", "mix"):
        raise ConfigError(f"branch must be '+', '-' or 'mix', got {args.branch!r}")
    return args


def write_csv(rows, columns, stream):
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        if len(r) != len(columns):
            raise RuntimeError("row width does not match the schema")
        w.writerow(r)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = resolve(args)
        result = COMMANDS[args.command](args)
    except (ValueError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows, summary = result[0], result[1]
    failed = result[2] if len(result) > 2 else False
    buf = io.StringIO()
    write_csv(rows, SCHEMAS[args.command], buf)
    if args.out:
        try:
            Path(args.out).write_text(buf.getvalue())
        except OSError as exc:
            print(f"error: cannot write {args.out}: {exc}", file=sys.stderr)
            return 2
        print("\n".join(summary))
    else:
        sys.stdout.write(buf.getvalue())
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
