"""Command-line front end: ``ratedouble {study,audit,verify,demo}``.

Configuration is an INI file.  Every key must be known; see ``CONFIG_KEYS``
for the accepted sections and keys.  Exit status is 0 when every audit and
verdict passes, 1 when one fails (reports are still written) and 2 on
configuration or I/O errors.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import logging
import math
import os
import sys
from pathlib import Path

from . import korobov, study

__all__ = ["main", "emit_report", "load_config", "ConfigError", "CONFIG_KEYS", "CSV_HEADER"]

log = logging.getLogger("ratedouble")

CSV_HEADER = ["setting", "n", "l2_err", "l2_bound", "h_err", "h_bound", "b_norm",
              "audit_A", "audit_B", "flags"]

_INT_LIST = "int_list"
_FLOAT_LIST = "float_list"
_STR_LIST = "str_list"

# section -> key -> type
CONFIG_KEYS = {
    "study": {
        "setting": str, "alpha": float, "gamma": _FLOAT_LIST, "d": int,
        "basis": str, "basis_param": float, "nodes": str, "z": _INT_LIST,
        "n_values": _INT_LIST, "targets": _STR_LIST, "cutoff": int,
        "trig_degree": int, "fine_size": int, "truncation": int, "panels": int,
        "order": int, "window": int, "slack": float, "seed": int, "threads": int,
        "n_dual": int,
    },
    "audit": {"trials": int, "pairs": int, "support": int},
    "output": {"dir": str},
}

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class ConfigError(ValueError):
    pass


def _parse_value(kind, raw: str, where: str):
    raw = raw.strip()
    try:
        if kind in (_INT_LIST, _FLOAT_LIST, _STR_LIST):
            items = [p.strip() for p in raw.replace(";", ",").split(",") if p.strip()]
            conv = {_INT_LIST: int, _FLOAT_LIST: float, _STR_LIST: str}[kind]
            return tuple(conv(p) for p in items)
        if raw.lower() in ("", "none") and kind is not str:
            return None
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r}: {exc}") from None


def load_config(path: str | None = None, overrides=()) -> dict:
    """Read and validate a config file plus ``section.key=value`` overrides.

    Returns {section: {key: parsed value}} holding only the keys that were set.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"),
                                       interpolation=None)
    parser.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            parser.read_string(p.read_text(), source=str(p))
        except (configparser.Error, OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from None
    out: dict = {name: {} for name in CONFIG_KEYS}
    for section in parser.sections():
        if section not in CONFIG_KEYS:
            raise ConfigError(f"unknown section [{section}]; expected one of {sorted(CONFIG_KEYS)}")
        for key, raw in parser.items(section):
            if key not in CONFIG_KEYS[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            out[section][key] = _parse_value(CONFIG_KEYS[section][key], raw, f"[{section}] {key}")
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        lhs, raw = item.split("=", 1)
        section, _, key = lhs.strip().rpartition(".")
        section = section or "study"
        if section not in CONFIG_KEYS or key not in CONFIG_KEYS[section]:
            raise ConfigError(f"unknown override key {lhs.strip()!r}")
        out[section][key] = _parse_value(CONFIG_KEYS[section][key], raw, f"--set {lhs.strip()}")
    return out


def _study_configs(cfg: dict) -> list[study.StudyConfig]:
    params = {k: v for k, v in cfg["study"].items() if v is not None}
    targets = params.pop("targets", None)
    if targets is None:
        targets = ("smooth", "rough")
    try:
        return [study.StudyConfig(target=t, **params) for t in targets]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid study configuration: {exc}") from None


def _fmt(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _jsonable(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else None
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def _fit_json(fit: study.RateFit | None):
    if fit is None:
        return None
    return {"kappa": fit.kappa, "c": fit.c, "log_c": fit.log_c, "window": list(fit.window),
            "residual": fit.residual, "excluded": list(fit.excluded)}


def sweep_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for rep in reports:
        rows = sorted(zip(rep.triples, rep.audit_column("A"), rep.audit_column("B"), rep.flags),
                      key=lambda r: r[0].n)
        for t, a, b, flags in rows:
            w.writerow([rep.label, t.n, _fmt(t.l2_err), _fmt(t.l2_bound), _fmt(t.h_err),
                        _fmt(t.h_bound), _fmt(t.b_norm), a, b, ";".join(flags)])
    return buf.getvalue()


def _plot_script(reports, verdict) -> str:
    lines = [
        "# gnuplot script: log-log error curves with fitted reference slopes",
        "set datafile separator ','",
        "set logscale xy",
        "set xlabel 'n'",
        "set ylabel 'error'",
        "set key outside right",
        "set grid",
    ]
    plots = []
    for i, rep in enumerate(reports):
        lab = rep.label
        sel = f"(strcol(1) eq '{lab}' ? $2 : 1/0)"
        plots.append(f"'sweep.csv' skip 1 using {sel}:3 with linespoints title '{lab} L2'")
        plots.append(f"'sweep.csv' skip 1 using {sel}:5 with linespoints dt 2 title '{lab} H'")
        fit = rep.fits.get("l2")
        if fit is not None:
            k = fit.kappa
            lines.append(f"c{i} = {_fmt(fit.c)}")
            lines.append(f"n{i} = {fit.window[0]}")
            lines.append(f"ref{i}a(x) = c{i} * x**(-{_fmt(k)})")
            # steeper reference through the same anchor point
            lines.append(f"ref{i}b(x) = ref{i}a(n{i}) * (x / n{i})**(-{_fmt(2 * k)})")
            plots.append(f"ref{i}a(x) dt 3 title '{lab} slope -{k:.3g}'")
            plots.append(f"ref{i}b(x) dt 4 title '{lab} slope -{2 * k:.3g}'")
    if verdict is not None:
        lines.append(f"set title 'doubling verdict: {'pass' if verdict.passed else 'fail'}'")
    if plots:
        lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def rates_json(reports, verdict=None) -> dict:
    out = {"reports": [], "verdict": None}
    for rep in reports:
        fits = {k: _fit_json(rep.fits.get(k)) for k in ("l2", "h")}
        cfg = rep.config
        out["reports"].append({
            "setting": rep.label,
            "n": list(rep.n_values),
            "window": list(cfg.n_values[-cfg.effective_window:]),
            "fits": fits,
            "notes": dict(rep.fit_notes),
            "degenerate": any(f is None for f in fits.values()) or not rep.triples,
            "audits_passed": rep.audits_passed,
            "config": {k: v for k, v in vars(cfg).items() if k != "out"},
        })
    out["degenerate"] = not out["reports"] or any(r["degenerate"] for r in out["reports"])
    if verdict is not None:
        out["verdict"] = {
            "passed": verdict.passed,
            "kappa_smooth_l2": verdict.kappa_smooth_l2,
            "kappa_smooth_h": verdict.kappa_smooth_h,
            "kappa_rough_l2": verdict.kappa_rough_l2,
            "rough_target": verdict.rough_label,
            "deficit_l2": verdict.deficit_l2,
            "deficit_h": verdict.deficit_h,
            "slack": verdict.slack,
            "audits_passed": verdict.audits_passed,
            "notes": verdict.notes,
        }
    return _jsonable(out)


def emit_report(reports, outdir, verdict=None) -> list[Path]:
    """Write sweep.csv, rates.json and plot.gp into ``outdir``."""
    if isinstance(reports, study.StudyReport):
        reports = [reports]
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {
        "sweep.csv": sweep_csv(reports),
        "rates.json": json.dumps(rates_json(reports, verdict), indent=2, sort_keys=True) + "\n",
        "plot.gp": _plot_script(reports, verdict),
    }
    paths = []
    for name, text in files.items():
        path = outdir / name
        path.write_text(text)
        paths.append(path)
    return paths


def _print_report(rep: study.StudyReport, stream):
    print(f"== {rep.label}", file=stream)
    print(f"{'n':>6} {'l2_err':>11} {'h_err':>11} {'b_norm':>10}  A     B     flags", file=stream)
    for t, a, b, fl in zip(rep.triples, rep.audit_column("A"), rep.audit_column("B"), rep.flags):
        print(f"{t.n:>6} {t.l2_err:11.4e} {t.h_err:11.4e} {t.b_norm:10.4g}  {a:<5} {b:<5} "
              f"{';'.join(fl)}", file=stream)
    for key in ("l2", "h"):
        fit = rep.fits.get(key)
        if fit is not None:
            print(f"   {key} rate: kappa = {fit.kappa:.4f}, c = {fit.c:.4g}, "
                  f"window n = {list(fit.window)}", file=stream)
        else:
            print(f"   {key} rate: {rep.fit_notes.get(key, 'n/a')}", file=stream)


def _print_verdict(v: study.Verdict, stream):
    print(f"doubling verdict: {'PASS' if v.passed else 'FAIL'} "
          f"(smooth L2 {v.kappa_smooth_l2:.3f} vs 2 x {v.rough_label} {v.kappa_rough_l2:.3f}, "
          f"deficit {v.deficit_l2:.3f}; smooth H {v.kappa_smooth_h:.3f}, deficit {v.deficit_h:.3f}; "
          f"slack {v.slack})", file=stream)


def _run_study(cfg: dict, outdir: Path, stream) -> int:
    configs = _study_configs(cfg)
    reports = []
    for c in configs:
        log.info("running %s over n = %s", c.label, list(c.n_values))
        rep = study.run_sweep(c)
        reports.append(rep)
        _print_report(rep, stream)
    pair = study.verdict_pair(reports)
    verdict = None
    if pair is not None:
        verdict = study.doubling_verdict(*pair)
        _print_verdict(verdict, stream)
    emit_report(reports, outdir, verdict)
    # rbf rates have no computable B-norm behind them: reported, not gated
    gated = verdict is not None and configs[0].setting != "rbf"
    ok = all(r.audits_passed for r in reports) and (not gated or verdict.passed)
    return EXIT_OK if ok else EXIT_FAIL


def _run_audit(cfg: dict, outdir: Path, stream) -> int:
    s = cfg["study"]
    if s.get("setting", "korobov") != "korobov":
        raise ConfigError("the audit subcommand works in the korobov setting")
    a = cfg["audit"]
    d = s.get("d") or 1
    gamma = s.get("gamma") or (1.0,)
    space = korobov.KorobovSpace.create(s.get("alpha") or 1.0, d,
                                        gamma if len(gamma) > 1 else gamma[0])
    n_values = s.get("n_values") or (4, 8, 16, 32)
    seed = s.get("seed") or 0
    support = a.get("support") or 8
    results = study.audit_batch(space, n_values, a.get("trials") or 100, support, seed)
    worst, failures = study.duality_batch(space, a.get("pairs") or 2000, support, seed)
    outdir.mkdir(parents=True, exist_ok=True)
    with open(outdir / "audit.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["trial", "n", "l2_err", "h_err", "b_norm", "lhs_A", "rhs_A", "slack_A",
                    "audit_A", "audit_B", "galerkin_max"])
        for trial, n, au in results:
            w.writerow([trial, n, _fmt(au.l2_err), _fmt(au.h_err), _fmt(au.b_norm),
                        _fmt(au.lhs_A), _fmt(au.rhs_A), _fmt(au.slack_A),
                        {None: "skip", True: "pass", False: "fail"}[au.audit_A],
                        "pass" if au.audit_B else "fail", _fmt(au.galerkin_max)])
    bad = sum(not au.passed for *_, au in results)
    print(f"inequality audit: {len(results) - bad}/{len(results)} instances pass", file=stream)
    print(f"duality: {failures} failures, worst ratio {worst:.4f}", file=stream)
    return EXIT_OK if bad == 0 and failures == 0 else EXIT_FAIL


def _run_verify(stream) -> int:
    checks = study.identity_suite()
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.value:.3e} (tol {c.tol:.1e})",
              file=stream)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAIL


def _run_demo(cfg: dict, outdir: Path | None, stream) -> int:
    s = dict(cfg["study"])
    s.setdefault("n_values", (16, 32, 64, 128, 256))
    s.setdefault("targets", ("smooth", "rough"))
    cfg = dict(cfg, study=s)
    if outdir is None:
        configs = _study_configs(cfg)
        reports = [study.run_sweep(c) for c in configs]
        for rep in reports:
            _print_report(rep, stream)
        pair = study.verdict_pair(reports)
        if pair is not None:
            v = study.doubling_verdict(*pair)
            _print_verdict(v, stream)
            return EXIT_OK if v.passed else EXIT_FAIL
        return EXIT_OK
    return _run_study(cfg, outdir, stream)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ratedouble",
                                description="Kernel interpolation convergence studies.")
    p.add_argument("subcommand", choices=("study", "audit", "verify", "demo"))
    p.add_argument("--config", help="INI config file")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override a config entry (repeatable)")
    p.add_argument("--seed", type=int, help="override [study] seed")
    p.add_argument("--threads", type=int,
                   help="worker threads for per-n runs (default: RATEDOUBLE_THREADS or 1)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config, args.overrides)
        if args.seed is not None:
            cfg["study"]["seed"] = args.seed
        threads = args.threads
        if threads is None and "threads" not in cfg["study"]:
            env = os.environ.get("RATEDOUBLE_THREADS")
            if env:
                try:
                    threads = int(env)
                except ValueError:
                    raise ConfigError(f"RATEDOUBLE_THREADS={env!r} is not an integer") from None
        if threads is not None:
            cfg["study"]["threads"] = threads
        out = args.out or cfg["output"].get("dir")
        outdir = Path(out) if out else None
        if args.subcommand == "verify":
            return _run_verify(sys.stdout)
        if args.subcommand == "demo":
            return _run_demo(cfg, outdir, sys.stdout)
        outdir = outdir or Path("ratedouble_out")
        if args.subcommand == "study":
            return _run_study(cfg, outdir, sys.stdout)
        return _run_audit(cfg, outdir, sys.stdout)
    except ConfigError as exc:
        print(f"ratedouble: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"ratedouble: I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
