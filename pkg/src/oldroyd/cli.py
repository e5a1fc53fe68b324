"""Command line entry point.

    oldroyd run --config FILE [--out DIR] [--resume CHECKPOINT]
    oldroyd experiment run NAME [--config FILE] [--out DIR]
    oldroyd analyze SERIES.csv [--quantity NAME] [--k K] [--window T0 T1]
    oldroyd analyze STATE.chk [--field tau] [--s S] [--p P]
    oldroyd spectrum --k K [K ...] [--xi-max R] [--dim D] [--out FILE]
    oldroyd report DIR [DIR ...]

Exit codes: 0 all criteria passed, 1 some criterion failed, 2 execution
error (bad config, I/O, blow-up in a plain run). ``OLDROYD_THREADS`` sets
the FFT thread count.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import diagnostics as diag
from .checkpoint import CheckpointError, read_checkpoint, write_checkpoint
from .config import ConfigError, RunConfig, format_config, format_scenario, parse_config
from .experiments import SCENARIOS, run_scenario
from .fourier_field import gradient
from .integrator import SimulationBlowup, make_state, run_until
from .linear_oracle import mode_matrix
from .littlewood_paley import BesovParams, besov_terms
from .oldroyd_rhs import ModelParams

log = logging.getLogger("oldroyd")

EXIT_OK, EXIT_FAILED, EXIT_ERROR = 0, 1, 2


def fresh_dir(base, name: str) -> Path:
    """``base/name``, or ``base/name-<timestamp>`` if that already exists."""
    base = Path(base)
    base.mkdir(parents=True, exist_ok=True)
    path = base / name
    if path.exists():
        stamp = time.strftime("%Y%m%d-%H%M%S")
        path = base / f"{name}-{stamp}"
        i = 1
        while path.exists():
            path = base / f"{name}-{stamp}-{i}"
            i += 1
    path.mkdir()
    return path


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.bool_):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj).__name__}")


def _dump(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, default=_json_default, allow_nan=True))


def _load_config(path) -> RunConfig:
    return parse_config(Path(path).read_text())


def cmd_run(args) -> int:
    cfg = _load_config(args.config)
    out = fresh_dir(args.out or cfg.output_dir, "run")
    (out / "config.echo").write_text(format_config(cfg))
    if args.resume:
        state, saved = read_checkpoint(args.resume, expect_grid=cfg.grid)
        if saved != cfg.params:
            log.warning("checkpoint params %s differ from config %s; using config", saved, cfg.params)
    else:
        u, tau = cfg.data.generate(cfg.grid)
        state = make_state(u, tau)
    rec = diag.Recorder(cfg.params, cfg.diagnostics)
    code = EXIT_OK
    try:
        final = run_until(state, cfg.params, cfg.stepper, rec)
    except SimulationBlowup as exc:
        log.error("%s", exc)
        final = exc.last_good
        code = EXIT_ERROR
    diag.emit_series(rec.records, out / "series.csv")
    if cfg.checkpoint:
        write_checkpoint(final, cfg.params, out / "final.chk")
    fits = {}
    t = rec.times
    if len(t) >= 2 * diag.MIN_SAMPLES:
        q = rec.series("h1_u") + cfg.params.k * rec.series("l2_tau")
        for name, fn in (("exponential", diag.fit_exponential_rate),
                         ("polynomial", diag.fit_polynomial_rate)):
            try:
                fits[name] = fn(t, q)
            except ValueError as exc:
                fits[name] = {"error": str(exc)}
    diag.write_fit_summary(out / "fit.json", fits, {"quantity": "h1_u + k*l2_tau",
                                                    "t_final": final.t})
    print(out)
    return code


def _records_to_csv(report: dict, out: Path) -> None:
    records = report.pop("_records", {})
    for label, recs in records.items():
        safe = label.replace("=", "").replace(" ", "_").replace("(", "").replace(")", "")
        run_dir = out / safe
        run_dir.mkdir(exist_ok=True)
        diag.emit_series(recs, run_dir / "series.csv")


def cmd_experiment(args) -> int:
    if args.config:
        cfg = _load_config(args.config)
        sc = cfg.build_scenario(args.name)
        out_base = args.out or cfg.output_dir
    else:
        from .experiments import default_scenario
        sc = default_scenario(args.name)
        out_base = args.out or "runs"
    out = fresh_dir(out_base, args.name)
    (out / "config.echo").write_text(format_scenario(sc))
    report = run_scenario(sc)
    _records_to_csv(report, out)
    _dump(out / "report.json", report)
    for c in report["criteria"]:
        mark = {True: "PASS", False: "FAIL", None: "INFO"}[c["passed"]]
        print(f"{mark} {report['scenario']}: {c['name']} value={c['value']} threshold={c['threshold']}")
    print(out)
    return EXIT_OK if report["passed"] else EXIT_FAILED


def block_table(state, field: str, bp: BesovParams):
    """``[(j, 2^{js} ||Delta_j f||_Lp)]`` for one field of a checkpointed state."""
    f = {"u": state.u_hat, "tau": state.tau_hat}.get(field)
    if field == "grad_u":
        f = gradient(state.u_hat)
    if f is None:
        raise ValueError(f"unknown field {field!r}; use u, grad_u or tau")
    return besov_terms(f, bp)


def cmd_analyze(args) -> int:
    if args.series.endswith(".chk"):
        state, _ = read_checkpoint(args.series)
        bp = BesovParams(s=args.s, p=args.p)
        w = csv.writer(sys.stdout)
        w.writerow(["j", "weighted_block_norm"])
        for j, v in block_table(state, args.field, bp):
            w.writerow([j, "%.17g" % v])
        return EXIT_OK
    records = diag.read_series(args.series)
    t = np.array([r.t for r in records])
    if args.quantity == "decay":
        y = np.array([r.h1_u + args.k * r.l2_tau for r in records])
    else:
        y = np.array([getattr(r, args.quantity) for r in records])
    window = tuple(args.window) if args.window else None
    summary = {"quantity": args.quantity}
    for name, fn in (("exponential", diag.fit_exponential_rate),
                     ("polynomial", diag.fit_polynomial_rate)):
        try:
            summary[name] = fn(t, y, window).to_dict()
        except ValueError as exc:
            summary[name] = {"error": str(exc)}
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def spectrum_rows(ks, xi_max: float, dim: int = 2, base: ModelParams = ModelParams()):
    """``(|xi|, k, Re, Im)`` of the slowest physical eigenvalue per lattice norm."""
    rows = []
    norms = np.sqrt(np.arange(1, int(math.floor(xi_max ** 2)) + 1))
    for k in ks:
        params = ModelParams(k=k, b=base.b, nu=base.nu, eta=base.eta, mu=base.mu, alpha=base.alpha)
        for r in norms:
            xi = np.zeros(dim)
            xi[0] = r
            ev = mode_matrix(xi, params).physical_eigenvalues()
            lead = ev[np.argmax(ev.real)]
            rows.append((float(r), float(k), float(lead.real), float(lead.imag)))
    return rows


def cmd_spectrum(args) -> int:
    rows = spectrum_rows(args.k, args.xi_max, args.dim)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh)
        w.writerow(["xi_norm", "k", "re_lambda", "im_lambda"])
        for row in rows:
            w.writerow(["%.17g" % v for v in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_report(args) -> int:
    all_ok = True
    found = 0
    for d in args.dirs:
        for path in sorted(Path(d).rglob("report.json")):
            found += 1
            rep = json.loads(path.read_text())
            ok = bool(rep.get("passed"))
            all_ok &= ok
            print(f"{'PASS' if ok else 'FAIL'} {rep.get('scenario')} ({path.parent})")
            for c in rep.get("criteria", []):
                if c.get("passed") is False:
                    print(f"    failed: {c['name']} value={c.get('value')}")
    if not found:
        print("no report.json found", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if all_ok else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oldroyd", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="single simulation from a config file")
    r.add_argument("--config", required=True)
    r.add_argument("--out")
    r.add_argument("--resume", help="checkpoint to continue from")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("experiment", help="scenario harness")
    esub = e.add_subparsers(dest="action", required=True)
    er = esub.add_parser("run")
    er.add_argument("name", choices=SCENARIOS)
    er.add_argument("--config")
    er.add_argument("--out")
    er.set_defaults(func=cmd_experiment)

    a = sub.add_parser("analyze", help="fit decay laws to a series CSV, or block norms of a checkpoint")
    a.add_argument("series", help="series.csv, or a .chk checkpoint for the block table")
    a.add_argument("--quantity", default="decay",
                   help="a CSV column, or 'decay' for h1_u + k*l2_tau")
    a.add_argument("--k", type=float, default=0.0)
    a.add_argument("--window", type=float, nargs=2, metavar=("T0", "T1"))
    a.add_argument("--field", default="tau", help="checkpoint field: u, grad_u or tau")
    a.add_argument("--s", type=float, default=0.0, help="Besov regularity index")
    a.add_argument("--p", type=float, default=2.0, help="Besov Lebesgue exponent")
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("spectrum", help="slowest linear eigenvalue per |xi|")
    s.add_argument("--k", type=float, nargs="+", required=True)
    s.add_argument("--xi-max", type=float, default=16.0)
    s.add_argument("--dim", type=int, default=2, choices=(2, 3))
    s.add_argument("--out")
    s.set_defaults(func=cmd_spectrum)

    rp = sub.add_parser("report", help="summarize report.json files")
    rp.add_argument("dirs", nargs="+")
    rp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error:\n{exc}", file=sys.stderr)
        return EXIT_ERROR
    except (CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
