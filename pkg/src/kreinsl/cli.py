"""Command-line front end.

Every run writes its tables as CSV (17 significant digits) plus a
``manifest.json`` with the parameters, version, wall time and the sha256 of
each output.  Exit codes: 0 success, 1 error, 2 numerical advisory.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .model import Bump, ConfigError, DomainError, make_problem, spec_from_config, spec_to_config
from .odeint import IntegrationError, phi_eval
from .oracle import RefinementAdvisory, oracle_eigenvalues
from .spectral import (SpectralAdvisory, classify_endpoint, eigenvalues_truncated,
                       measure_family, measure_to_csv, measure_to_record, parseval_check,
                       spectral_measure_approx)
from .transform import directing_functional, resolvent_residual

EXIT_OK, EXIT_ERROR, EXIT_ADVISORY = 0, 1, 2
PARSEVAL_TOL = 1e-3
RESOLVENT_TOL = 1e-6
ORACLE_TOL = 1e-5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for advisories here
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def fmt(v) -> str:
    return f"{float(v):.17g}"


def parse_grid(text: str) -> np.ndarray:
    """``lo:hi:n`` for a uniform grid, or a comma list; complex entries allowed in lists."""
    if text.count(":") == 2:
        lo, hi, n = text.split(":")
        return np.linspace(float(lo), float(hi), int(n))
    vals = [complex(t) for t in text.split(",") if t.strip()]
    if not vals:
        raise UsageError(f"empty grid {text!r}")
    arr = np.array(vals)
    return arr.real.copy() if np.all(arr.imag == 0) else arr


def parse_pair(text: str, what: str):
    try:
        lo, hi = (float(t) for t in text.split(":"))
    except ValueError:
        raise UsageError(f"{what} must look like lo:hi (got {text!r})") from None
    if not lo < hi:
        raise UsageError(f"{what} needs lo < hi (got {text!r})")
    return lo, hi


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--problem", help="config file with a [problem] section")
    common.add_argument("--c", type=float, help="truncation point")
    common.add_argument("--theta", default="0", help="boundary angle(s) at c, comma separated")
    common.add_argument("--window", help="lambda window lo:hi")
    common.add_argument("--support", help="support window lo:hi for random test functions")
    common.add_argument("--seed", type=int, default=0, help="seed for random test functions")
    common.add_argument("--out", default=".", help="output directory")
    common.add_argument("--oracle", action="store_true", help="cross-check against the FD oracle")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--scan-pts", type=int, default=400)
    common.add_argument("--dump-config", action="store_true",
                        help="print the parsed problem config and exit")

    parser = _Parser(prog="kreinsl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phi", parents=[common], help="entire solution on an x grid")
    p.add_argument("--lam", required=True, help="lambda grid lo:hi:n or list")
    p.add_argument("--x", required=True, help="x grid lo:hi:n or list")
    sub.add_parser("eig", parents=[common], help="eigenvalues of the truncated problem")
    sub.add_parser("measure", parents=[common], help="step spectral measure(s)")
    sub.add_parser("parseval", parents=[common], help="Parseval check for a random bump")
    p = sub.add_parser("transform", parents=[common], help="directing functional of a bump")
    p.add_argument("--lam", required=True, help="lambda grid lo:hi:n or list")
    p = sub.add_parser("classify", parents=[common], help="Weyl alternative at both endpoints")
    p.add_argument("--lam-probe", type=float)
    p = sub.add_parser("resolvent-check", parents=[common], help="residual of the resolvent")
    p.add_argument("--lam", default="1j", help="spectral parameter (complex allowed)")
    p = sub.add_parser("replay", help="re-run a manifest and compare output digests")
    p.add_argument("manifest")
    return parser


# --------------------------------------------------------------------------


class Run:
    """Collects outputs and advisories of one invocation."""

    def __init__(self, args):
        self.args = args
        self.out = Path(args.out)
        self.outputs = {}
        self.advisories = []
        self.summary = {}

    def write(self, name: str, text: str):
        self.out.mkdir(parents=True, exist_ok=True)
        data = text.encode()
        (self.out / name).write_bytes(data)
        self.outputs[name] = hashlib.sha256(data).hexdigest()

    def table(self, name, header, rows):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([v if isinstance(v, str) else fmt(v) for v in row])
        self.write(name, buf.getvalue())

    def advise(self, msg):
        self.advisories.append(str(msg))


def load_problem(args):
    if not args.problem:
        raise UsageError("--problem is required")
    try:
        text = Path(args.problem).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {args.problem}: {exc.strerror}") from None
    spec, b = spec_from_config(text)
    return spec, b, make_problem(spec, b)


def default_c(problem, spec):
    if problem.right_kind == "regular":
        return problem.b
    return {"legendre": 1.0 - 1e-6, "laguerre": 40.0}.get(spec.name, problem.a + 1.0)


def thetas_of(args):
    try:
        vals = [float(t) for t in args.theta.split(",")]
    except ValueError:
        raise UsageError(f"bad --theta {args.theta!r}") from None
    return vals


def window_of(args):
    if not args.window:
        raise UsageError("--window lo:hi is required")
    return parse_pair(args.window, "--window")


def random_bump(args, problem, c) -> Bump:
    """Seeded C-infinity bump inside ``--support`` (default: the middle of (a, c))."""
    if args.support:
        lo, hi = parse_pair(args.support, "--support")
    else:
        span = c - problem.a
        lo, hi = problem.a + 0.2 * span, problem.a + 0.8 * span
    if not (problem.a < lo and hi < min(c, problem.b)):
        raise UsageError(f"support ({lo}, {hi}) must lie inside ({problem.a}, {c})")
    rng = np.random.default_rng(args.seed)
    half = 0.5 * (hi - lo)
    width = half * rng.uniform(0.3, 0.9)
    center = rng.uniform(lo + width, hi - width)
    return Bump(float(center), float(width), float(rng.uniform(0.5, 2.0)))


# --------------------------------------------------------------------------
# subcommands


def cmd_phi(run, spec, problem):
    lam = parse_grid(run.args.lam)
    x = parse_grid(run.args.x).real
    sv = phi_eval(problem, spec, lam, x)
    y = np.asarray(sv.y).reshape(len(x), len(lam))
    v = np.asarray(sv.quasi_d).reshape(len(x), len(lam))
    rows = []
    for j, lv in enumerate(lam):
        for i, xv in enumerate(x):
            rows.append((xv, y[i, j].real, np.imag(y[i, j]), v[i, j].real, np.imag(v[i, j]),
                         np.real(lv)))
    run.table("phi.csv", ["x", "re_phi", "im_phi", "re_quasi_d", "im_quasi_d", "lambda"], rows)


def cmd_eig(run, spec, problem):
    c = run.args.c if run.args.c is not None else default_c(problem, spec)
    window = window_of(run.args)
    rows = []
    for theta in thetas_of(run.args):
        recs = eigenvalues_truncated(problem, spec, c, theta, window, run.args.scan_pts)
        rows += [(r.lambda_n, r.wronskian_residual, r.norm_sq, r.theta, r.c) for r in recs]
        if run.args.oracle and recs:
            _oracle_compare(run, problem, c, theta, np.array([r.lambda_n for r in recs]))
    run.table("eig.csv", ["lambda", "wronskian_residual", "norm_sq", "theta", "c"], rows)
    run.summary["eigenvalues"] = len(rows)


def _oracle_compare(run, problem, c, theta, lams):
    k = len(lams)
    ref = oracle_eigenvalues(problem, c, theta, k + 2)
    # oracle modes are the lowest of the standard form; pair them from that end
    ours = np.sort(lams) if problem.sign > 0 else np.sort(lams)[::-1]
    ref = np.sort(ref) if problem.sign > 0 else np.sort(ref)[::-1]
    n = 0
    while n < len(ref) and not np.isclose(ref[n], ours[0], rtol=1e-3, atol=1e-3):
        n += 1
    ref = ref[n:n + k]
    if len(ref) < k:
        run.advise("oracle could not pair every eigenvalue")
        return
    err = np.abs(ref - ours) / np.maximum(np.abs(ours), 1.0)
    run.summary["oracle_max_rel_err"] = float(err.max())
    if err.max() > ORACLE_TOL:
        run.advise(f"oracle mismatch {err.max():.3g} above {ORACLE_TOL:g}")


def cmd_measure(run, spec, problem):
    c = run.args.c if run.args.c is not None else default_c(problem, spec)
    window = window_of(run.args)
    thetas = thetas_of(run.args)
    if len(thetas) > 1 and problem.right_kind == "regular" and c == problem.b:
        measures = measure_family(problem, spec, thetas, window, run.args.scan_pts,
                                  threads=run.args.threads)
    else:
        measures = {t: spectral_measure_approx(problem, spec, c, t, window, run.args.scan_pts)
                    for t in thetas}
    for i, (theta, m) in enumerate(sorted(measures.items())):
        stem = "measure" if len(measures) == 1 else f"measure_theta{i}"
        run.write(f"{stem}.csv", measure_to_csv(m))
        run.write(f"{stem}.json", measure_to_record(m) + "\n")
    run.summary["atoms"] = {repr(t): len(m) for t, m in measures.items()}


def cmd_parseval(run, spec, problem):
    c = run.args.c if run.args.c is not None else default_c(problem, spec)
    window = window_of(run.args)
    bump = random_bump(run.args, problem, c)
    f = bump.as_function()
    rows = []
    worst = 0.0
    for theta in thetas_of(run.args):
        m = spectral_measure_approx(problem, spec, c, theta, window, run.args.scan_pts)
        rep = parseval_check(problem, spec, m, f)
        rows.append((theta, rep.relative_error, rep.norm_sq, rep.spectral_sum,
                     rep.atoms_used, rep.tail_term))
        worst = max(worst, rep.relative_error)
    run.table("parseval.csv", ["theta", "relative_error", "norm_sq", "spectral_sum",
                               "atoms_used", "tail_term"], rows)
    run.summary.update(bump=[bump.center, bump.width, bump.amplitude], relative_error=worst)
    print(f"relative_error {fmt(worst)}")
    if worst > PARSEVAL_TOL:
        run.advise(f"Parseval relative error {worst:.3g} above {PARSEVAL_TOL:g}")


def cmd_transform(run, spec, problem):
    lam = parse_grid(run.args.lam)
    c = run.args.c if run.args.c is not None else default_c(problem, spec)
    bump = random_bump(run.args, problem, c)
    vals = directing_functional(problem, spec, bump.as_function(), lam)
    rows = [(np.real(l), np.imag(l), np.real(v), np.imag(v)) for l, v in zip(lam, vals)]
    run.table("transform.csv", ["re_lambda", "im_lambda", "re_Phi", "im_Phi"], rows)
    run.summary["bump"] = [bump.center, bump.width, bump.amplitude]


def cmd_classify(run, spec, problem):
    rows = []
    for end in ("left", "right"):
        rep = classify_endpoint(problem, end, run.args.lam_probe)
        ratios = list(rep.decade_ratio) + [math.nan] * (2 - len(rep.decade_ratio))
        probe = math.nan if rep.lam_probe is None else rep.lam_probe
        rows.append((end, rep.kind, probe, *ratios))
        if rep.kind == "unknown":
            run.advise(f"{end} endpoint could not be classified")
    run.table("classify.csv", ["endpoint", "kind", "lam_probe", "ratio_1", "ratio_2"], rows)
    for row in rows:
        print(f"{row[0]} {row[1]}")


def cmd_resolvent_check(run, spec, problem):
    lam = complex(run.args.lam)
    c = run.args.c if run.args.c is not None else default_c(problem, spec)
    theta = thetas_of(run.args)[0]
    bump = random_bump(run.args, problem, c)
    f = bump.as_function()
    lo, hi = bump.support
    x = np.linspace(problem.a + 0.05 * (c - problem.a), c - 0.05 * (c - problem.a), 20)
    x = np.sort(np.concatenate([x, np.linspace(lo, hi, 22)[1:-1]]))
    res = resolvent_residual(problem, spec, c, theta, lam, f, x)
    fnorm = float(np.max(np.abs(f(x)))) or 1.0
    rel = np.abs(res) / fnorm
    run.table("resolvent.csv", ["x", "abs_residual"], zip(x, np.abs(res)))
    worst = float(rel.max())
    run.summary["max_relative_residual"] = worst
    print(f"max_relative_residual {fmt(worst)}")
    if worst > RESOLVENT_TOL:
        run.advise(f"resolvent residual {worst:.3g} above {RESOLVENT_TOL:g}")


COMMANDS = {
    "phi": cmd_phi, "eig": cmd_eig, "measure": cmd_measure, "parseval": cmd_parseval,
    "transform": cmd_transform, "classify": cmd_classify,
    "resolvent-check": cmd_resolvent_check,
}


def _params(args):
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("out",)}


_VALUE_FLAGS = ("--window", "--support", "--lam", "--x", "--theta", "--c", "--lam-probe")


def _glue_values(argv):
    """``--window -3:1`` would read as a flag; rewrite such pairs as ``--window=-3:1``."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        if a in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def execute(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_values(argv))
    if args.command == "replay":
        return replay(args.manifest)
    spec, b, problem = load_problem(args)
    if args.dump_config:
        sys.stdout.write(spec_to_config(spec, b))
        return EXIT_OK
    run = Run(args)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", SpectralAdvisory)
        warnings.simplefilter("always", RefinementAdvisory)
        COMMANDS[args.command](run, spec, problem)
    for w in caught:
        if issubclass(w.category, (SpectralAdvisory, RefinementAdvisory)):
            run.advise(w.message)
        else:
            warnings.warn_explicit(w.message, w.category, w.filename, w.lineno)
    manifest = {
        "command": args.command,
        "argv": _absolute_problem(argv),
        "parameters": _params(args),
        "problem_config": spec_to_config(spec, b),
        "version": __version__,
        "wall_time_s": time.perf_counter() - t0,
        "outputs": run.outputs,
        "advisories": run.advisories,
        "summary": run.summary,
    }
    run.out.mkdir(parents=True, exist_ok=True)
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                      default=str) + "\n")
    for msg in run.advisories:
        print(f"advisory: {msg}", file=sys.stderr)
    return EXIT_ADVISORY if run.advisories else EXIT_OK


def replay(path) -> int:
    """Re-run the recorded argv into a scratch directory and compare digests."""
    import tempfile

    man = json.loads(Path(path).read_text())
    argv = list(man["argv"])
    with tempfile.TemporaryDirectory() as tmp:
        argv = _replace_out(argv, tmp)
        code = execute(argv)
        if code == EXIT_ERROR:
            return code
        fresh = json.loads((Path(tmp) / "manifest.json").read_text())["outputs"]
    bad = sorted(k for k in man["outputs"] if fresh.get(k) != man["outputs"][k])
    if bad:
        print("digest mismatch: " + ", ".join(bad), file=sys.stderr)
        return EXIT_ERROR
    print(f"replayed {len(man['outputs'])} outputs, all digests match")
    return EXIT_OK


def _absolute_problem(argv):
    """Record the config path absolutely so a replay works from any directory."""
    argv = list(argv)
    for i, a in enumerate(argv):
        if a == "--problem" and i + 1 < len(argv):
            argv[i + 1] = str(Path(argv[i + 1]).resolve())
        elif a.startswith("--problem="):
            argv[i] = "--problem=" + str(Path(a.split("=", 1)[1]).resolve())
    return argv


def _replace_out(argv, out):
    argv = list(argv)
    for i, a in enumerate(argv):
        if a == "--out" and i + 1 < len(argv):
            argv[i + 1] = out
            return argv
        if a.startswith("--out="):
            argv[i] = f"--out={out}"
            return argv
    return argv + ["--out", out]


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return execute(argv)
    except (UsageError, ConfigError, DomainError, ValueError, IntegrationError,
            ArithmeticError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
