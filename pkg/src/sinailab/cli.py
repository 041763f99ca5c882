"""Command-line surface: lyapunov, entropy, sweep, and diagnose.

Every command writes its data files plus a run manifest (command, resolved
config, seed, version, wall clock, output digests) into the --out
directory and nowhere else. Reruns with identical flags and seed produce
byte-identical data files; only the manifest's wall-clock field varies.

Exit codes: 0 success, 2 usage/config error, 3 runtime/orbit error,
4 sweep failure threshold exceeded.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .entropy import (
    JACOBIAN_F,
    LEDRAPPIER_STRELCYN,
    PESIN,
    cross_validate,
    jacobian_formula_entropy,
    ls_entropy,
    pesin_entropy,
)
from .errors import ConfigError, SinaiLabError, SweepAbortError
from .measures import (
    birkhoff_sample,
    bounded_jacobian_check,
    holder_parameter_check,
    ls1_fit,
    ls2_integral,
)
from .oseledets import benettin_spectrum, domination_report, estimate_bundles_many
from .serialize import (
    entropy_csv_rows,
    spectrum_csv_rows,
    sha256_file,
    svg_line_chart,
    sweep_csv_rows,
    write_csv,
    write_json,
)
from .sweep import (
    SweepConfig,
    continuity_modulus,
    neighborhood_split_entropy,
    run_sweep,
    usc_check,
)
from .systems import FAMILIES, build_system

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_SWEEP_FAILURES = 4

_METHOD_ALIASES = {
    "pesin": PESIN,
    "ls": LEDRAPPIER_STRELCYN,
    "jacobian": JACOBIAN_F,
    "all": "all",
}


def _default_workers() -> int:
    env = os.environ.get("SINAILAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _parse_params(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigError(f"--param expects key=value, got {pair!r}")
        key, value = pair.split("=", 1)
        try:
            out[key] = int(value)
        except ValueError:
            try:
                out[key] = float(value)
            except ValueError:
                raise ConfigError(f"--param {key}: {value!r} is not a number")
    return out


def _steps(text) -> int:
    return int(float(text))


class _Manifest:
    def __init__(self, command: str, config: dict, out_dir: Path):
        self.command = command
        self.config = config
        self.out_dir = out_dir
        self.outputs = {}
        self.t0 = time.perf_counter()

    def add(self, name: str) -> None:
        self.outputs[name] = sha256_file(self.out_dir / name)

    def write(self) -> None:
        write_json(self.out_dir / "manifest.json", {
            "command": self.command,
            "config": self.config,
            "version": __version__,
            "wall_clock_s": time.perf_counter() - self.t0,
            "outputs": self.outputs,
        })


def _prepare_out(ns) -> Path:
    out = Path(ns.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# lyapunov
# ---------------------------------------------------------------------------


def cmd_lyapunov(ns) -> int:
    out = _prepare_out(ns)
    params = _parse_params(ns.param)
    try:
        system = build_system(ns.system, params)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = {"system": ns.system, "params": params, "seed": ns.seed,
              "steps": _steps(ns.steps), "burn_in": _steps(ns.burn_in),
              "blocks": ns.blocks}
    manifest = _Manifest("lyapunov", config, out)
    spectrum = benettin_spectrum(system, seed=ns.seed,
                                 burn_in=config["burn_in"],
                                 n_steps=config["steps"], blocks=ns.blocks)
    write_json(out / "spectrum.json", spectrum.to_json_dict())
    header, rows = spectrum_csv_rows(spectrum)
    write_csv(out / "spectrum.csv", header, rows)
    manifest.add("spectrum.json")
    manifest.add("spectrum.csv")
    manifest.write()
    print("exponents:", " ".join(f"{e:.6f}" for e in spectrum.exponents))
    return EXIT_OK


# ---------------------------------------------------------------------------
# entropy
# ---------------------------------------------------------------------------


def cmd_entropy(ns) -> int:
    out = _prepare_out(ns)
    params = _parse_params(ns.param)
    try:
        system = build_system(ns.system, params)
        method = _METHOD_ALIASES[ns.method]
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = {"system": ns.system, "params": params, "seed": ns.seed,
              "method": method, "length": _steps(ns.length),
              "burn_in": _steps(ns.burn_in), "n_max": ns.nmax,
              "dim_f": ns.dimf, "tolerance": ns.tol}
    manifest = _Manifest("entropy", config, out)
    measure = birkhoff_sample(system, seed=ns.seed,
                              burn_in=config["burn_in"],
                              length=config["length"])
    if method == "all":
        report = cross_validate(system, measure, dim_f=ns.dimf, n_max=ns.nmax,
                                tolerance=ns.tol)
        write_json(out / "entropy.json", report.to_json_dict())
        header, rows = entropy_csv_rows(list(report.estimates.values()))
        verdict = "Sinai-consistent" if report.sinai_consistent else "inconsistent"
        print(f"cross-validation: {verdict}; gaps "
              + " ".join(f"{k}={v:.4f}" for k, v in report.gaps.items()))
    else:
        if method == PESIN:
            spectrum = benettin_spectrum(system, seed=ns.seed,
                                         burn_in=config["burn_in"],
                                         n_steps=config["length"])
            est = pesin_entropy(spectrum)
        elif method == LEDRAPPIER_STRELCYN:
            est = ls_entropy(system, measure, ns.nmax,
                             early_stop=not ns.no_early_stop)
        else:
            dim_f = ns.dimf if ns.dimf is not None else system.space.dim
            est = jacobian_formula_entropy(system, measure, dim_f, seed=ns.seed)
        write_json(out / "entropy.json", est.to_json_dict())
        header, rows = entropy_csv_rows([est])
        print(f"{est.method}: {est.value:.6f} (se {est.std_error:.2e})")
    write_csv(out / "entropy.csv", header, rows)
    manifest.add("entropy.json")
    manifest.add("entropy.csv")
    manifest.write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _parse_grid(text: str):
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid range must be start:stop:count, got {text!r}")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ConfigError("grid count must be >= 1")
        if count == 1:
            return (start,)
        return tuple(np.linspace(start, stop, count))
    return tuple(float(v) for v in text.split(","))


def load_sweep_config(path, workers=None) -> tuple:
    """Parse the INI-style sweep config; returns (SweepConfig, checks dict)."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except configparser.Error as exc:
        # configparser errors carry line numbers in their messages
        raise ConfigError(f"malformed config: {exc}")
    if not parser.has_section("sweep"):
        raise ConfigError("missing [sweep] section")
    s = parser["sweep"]
    try:
        estimators = tuple(
            _METHOD_ALIASES[e.strip()]
            for e in s.get("estimators", "pesin").split(",") if e.strip()
        )
    except KeyError as exc:
        raise ConfigError(f"unknown estimator {exc}")
    if "all" in estimators:
        estimators = (PESIN, LEDRAPPIER_STRELCYN, JACOBIAN_F)
    try:
        config = SweepConfig(
            family=s.get("family", "mp"),
            grid=_parse_grid(s.get("grid", "0.0:0.9:10")),
            estimators=estimators,
            seed=s.getint("seed", 0),
            burn_in=s.getint("burn_in", 10_000),
            length=int(float(s.get("length", "100000"))),
            ulam_resolution=s.getint("ulam_resolution", fallback=None),
            n_max=s.getint("n_max", 40),
            dim_f=s.getint("dim_f", fallback=None),
            tolerance=s.getfloat("tolerance", 0.02),
            workers=workers if workers is not None
            else s.getint("workers", 0) or _default_workers(),
        )
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad sweep config: {exc}")
    checks = {}
    if parser.has_section("checks"):
        c = parser["checks"]
        checks["usc_window"] = c.getint("usc_window", 1)
        checks["usc_slack"] = c.getfloat("usc_slack", 0.05)
    return config, checks


def cmd_sweep(ns) -> int:
    out = _prepare_out(ns)
    env_workers = os.environ.get("SINAILAB_WORKERS")
    workers = ns.workers
    if env_workers:
        try:
            workers = max(1, int(env_workers))  # env overrides the flag
        except ValueError:
            pass
    try:
        config, checks = load_sweep_config(ns.config, workers=workers)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    manifest = _Manifest("sweep", {"config_file": str(ns.config),
                                   **config.to_json_dict()}, out)
    try:
        result = run_sweep(config)
    except SweepAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SWEEP_FAILURES
    payload = result.to_json_dict()
    n_ok = sum(1 for r in result.rows if r.ok)
    if n_ok >= 3:
        report = usc_check(result, window=checks.get("usc_window", 1),
                           slack=checks.get("usc_slack", 0.05))
        payload["usc_check"] = report.to_json_dict()
        print(f"usc_check: {'pass' if report.passed else 'FAIL'} "
              f"({len(report.witnesses)} witnesses)")
    if n_ok >= 2:
        modulus = continuity_modulus(result)
        payload["continuity_modulus"] = modulus.to_json_dict()
        for method, info in modulus.per_method.items():
            print(f"max adjacent gap [{method}]: {info['max_gap']:.6f} "
                  f"at t in {info['at']}")
    write_json(out / "sweep.json", payload)
    header, rows = sweep_csv_rows(result)
    write_csv(out / "sweep.csv", header, rows)
    manifest.add("sweep.json")
    manifest.add("sweep.csv")
    if ns.svg:
        series = []
        for method in config.estimators:
            ts, vs, es = result.curve(method)
            if ts.shape[0]:
                series.append((method, ts.tolist(), vs.tolist(), es.tolist()))
        if series:
            svg_line_chart(out / "sweep.svg", series,
                           title=f"entropy vs parameter ({config.family})",
                           xlabel="parameter", ylabel="entropy (nats/iter)")
            manifest.add("sweep.svg")
    manifest.write()
    return EXIT_OK


# ---------------------------------------------------------------------------
# diagnose
# ---------------------------------------------------------------------------


def cmd_diagnose(ns) -> int:
    out = _prepare_out(ns)
    params = _parse_params(ns.param)
    try:
        system = build_system(ns.system, params)
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    config = {"system": ns.system, "params": params, "seed": ns.seed,
              "length": _steps(ns.length), "burn_in": _steps(ns.burn_in),
              "dim_f": ns.dimf, "bound": ns.bound, "delta": ns.delta}
    manifest = _Manifest("diagnose", config, out)
    measure = birkhoff_sample(system, seed=ns.seed,
                              burn_in=config["burn_in"],
                              length=config["length"])
    report = {"system": ns.system, "params": params}
    if system.singular_set:
        report["ls1"] = ls1_fit(system, measure, np.logspace(-3, -1, 9))
    report["ls2"] = ls2_integral(system, measure)
    report["bounded_jacobian"] = bounded_jacobian_check(system, measure, ns.bound)
    family_id = {"mp": "mp", "da": "da", "viana": "viana"}.get(ns.system)
    if family_id is not None:
        handle = FAMILIES[family_id]
        t0 = float(params.get(handle.parameter_name,
                              system.params[handle.parameter_name]))
        half = 0.02
        grid = [max(handle.lo, t0 - half), t0, min(handle.hi, t0 + half)]
        grid = sorted(set(grid))
        if len(grid) >= 2:
            rng = np.random.default_rng(ns.seed)
            cand = system.space.uniform(rng, 400)
            keep = system.singular_distance(cand) > 1e-3
            pts = cand[keep][:100]
            report["holder"] = holder_parameter_check(handle, grid, pts)
    if system.singular_set:
        fam_for_split = family_id or ns.system
        try:
            report["neighborhood_split"] = neighborhood_split_entropy(
                fam_for_split,
                float(params.get("alpha", params.get("eps", 0.0))),
                ns.delta, seed=ns.seed, burn_in=config["burn_in"],
                length=config["length"])
        except (KeyError, ValueError):
            pass
    if ns.dimf is not None:
        rng = np.random.default_rng([ns.seed, 1])
        anchors = system.space.uniform(rng, 3)
        splitting = estimate_bundles_many(system, anchors, ns.dimf)
        dom = domination_report(system, splitting, n_grid=range(1, 13))
        report["domination"] = dom.to_json_dict()
        print(f"domination: {dom.verdict} (rho {dom.rho:.6f}, C {dom.C:.3f})")
    write_json(out / "diagnose.json", report)
    manifest.add("diagnose.json")
    manifest.write()
    if "ls1" in report:
        print(f"ls1: beta {report['ls1']['beta']:.4f} C {report['ls1']['C']:.4f}")
    print(f"ls2: forward {report['ls2']['forward']:.6f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p, length_default="100000"):
    p.add_argument("--out", default="sinailab_out", help="output directory")
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--burn-in", dest="burn_in", default="10000",
                   help="orbit burn-in steps")
    p.add_argument("--param", action="append", metavar="KEY=VALUE",
                   help="system parameter (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sinailab",
        description="Lyapunov spectra, SRB/Sinai measures, and entropy "
                    "estimators for explicit map families",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("lyapunov", help="Benettin QR Lyapunov spectrum")
    p.add_argument("--system", required=True)
    p.add_argument("--steps", default="1000000")
    p.add_argument("--blocks", type=int, default=20)
    _add_common(p)
    p.set_defaults(func=cmd_lyapunov)

    p = sub.add_parser("entropy", help="entropy estimates and cross-validation")
    p.add_argument("--system", required=True)
    p.add_argument("--method", choices=sorted(_METHOD_ALIASES), default="all")
    p.add_argument("--length", default="100000", help="measure orbit length")
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--dimf", type=int, default=None)
    p.add_argument("--tol", type=float, default=0.02)
    p.add_argument("--no-early-stop", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_entropy)

    p = sub.add_parser("sweep", help="parameter sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--svg", action="store_true", help="emit a line chart")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: config or machine)")
    p.add_argument("--out", default="sinailab_out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("diagnose", help="singular-set and splitting diagnostics")
    p.add_argument("--system", required=True)
    p.add_argument("--length", default="100000")
    p.add_argument("--dimf", type=int, default=None)
    p.add_argument("--bound", type=float, default=100.0,
                   help="bound for the Jacobian integral check")
    p.add_argument("--delta", type=float, default=0.01,
                   help="singular neighborhood radius for the entropy split")
    _add_common(p)
    p.set_defaults(func=cmd_diagnose)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        return ns.func(ns)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SweepAbortError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SWEEP_FAILURES
    except SinaiLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
