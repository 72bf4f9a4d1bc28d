"""Command-line runner.

Usage: ``clickgbs SUBCOMMAND CONFIG.json [-o OUT.csv] [--threads N] [--swap]``

Every CSV starts with one ``#`` metadata line (config hash, seed, git
revision, timestamp); the body after it depends only on the configuration.
Exit codes: 0 success, 1 domain error, 2 configuration error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import io
import logging
import subprocess
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig, load_config
from .functionals import FunctionalError
from .gaussian import assemble_and_propagate, haar_random_unitary, make_thermalized_squeezed
from .orbits import (
    OrbitId,
    OrbitTable,
    characteristic_function,
    direct_orbit_table,
    inverse_dft,
    select_folding_params,
)
from .probability import UnsupportedRoute, pattern_probability
from .sampling import propagate_batch, sample_classical_patterns, sample_positive_p
from .subsets import default_threads
from .validation import bayesian_confidence, chi_square, orbit_table_from_samples

__all__ = ["main", "run", "quantum_orbit_table", "classical_samples", "build_setup"]

log = logging.getLogger("clickgbs")

SUBCOMMANDS = ("orbits", "classical-sample", "chi2", "bayes", "functional", "conformance")


def git_revision() -> str:
    try:
        out = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() or "unknown"


def _header(cmd: str, cfg: ExperimentConfig | None) -> str:
    stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
    digest = cfg.digest() if cfg else "-"
    seed = cfg.seed if cfg else "-"
    return f"clickgbs {cmd} config_sha256={digest} seed={seed} git={git_revision()} created={stamp}"


def _g(x: float) -> str:
    return f"{x:.17g}"


# --------------------------------------------------------------------------
# pipelines (also used directly by tests)
# --------------------------------------------------------------------------


def build_setup(cfg: ExperimentConfig):
    """``(state, U, r)`` for the configured device."""
    r = cfg.squeezing
    U = haar_random_unitary(cfg.M, seed=cfg.unitary_seed)
    inputs = [make_thermalized_squeezed(r, cfg.epsilon)] * cfg.M_prime
    return assemble_and_propagate(inputs, U, cfg.eta), U, r


def quantum_orbit_table(cfg: ExperimentConfig, threads: int | None = None) -> OrbitTable:
    state, U, r = build_setup(cfg)
    det = cfg.make_detector()
    est = cfg.estimator
    if est.method == "direct":
        orbits = [
            OrbitId(m1, m2)
            for n in range(est.max_clicks + 1)
            for m2 in range(n // 2 + 1)
            for m1 in [n - 2 * m2]
            if m1 + m2 <= cfg.M
        ]
        return direct_orbit_table(state, det, orbits, est.N_S, cfg.seed, threads)
    batch = sample_positive_p([(r, cfg.epsilon)] * cfg.M_prime, cfg.M, est.E_S, cfg.seed, threads)
    batch = propagate_batch(batch, U, cfg.eta)
    grid, D, J = est.grid, est.D, est.J
    if grid == "auto":
        choice = select_folding_params(state, est.E_S)
        grid, D, J = ("folded", choice.D, choice.J) if choice.feasible else ("full", None, None)
    table = characteristic_function(batch, det, grid, D, J, threads=threads)
    return inverse_dft(table)


def classical_samples(cfg: ExperimentConfig, threads: int | None = None):
    """Classical look-alike of the device: same per-input mean photon number."""
    _, U, r = build_setup(cfg)
    n_th = [np.sinh(r) ** 2] * cfg.M_prime
    return sample_classical_patterns(
        cfg.classical.state, n_th, U, cfg.eta, cfg.make_detector(), cfg.classical.N, cfg.seed + 1, threads
    )


def _orbits_csv(cfg, threads):
    return quantum_orbit_table(cfg, threads).to_csv()


def _classical_csv(cfg, threads):
    s = classical_samples(cfg, threads)
    buf = io.StringIO()
    buf.write("sample," + ",".join(f"n{i + 1}" for i in range(cfg.M)) + "\n")
    for i, row in enumerate(s.patterns):
        buf.write(f"{i}," + ",".join(str(int(v)) for v in row) + "\n")
    return buf.getvalue()


def _chi2_csv(cfg, threads):
    quantum = quantum_orbit_table(cfg, threads)
    classical = classical_samples(cfg, threads)
    buf = io.StringIO()
    buf.write("test,l,statistic,k_l,N_l,seed\n")
    for l in cfg.validation.l:
        try:
            res = chi_square(quantum, classical, l, cfg.validation.min_count)
        except ValueError as exc:
            log.warning("chi2 at l=%d skipped: %s", l, exc)
            continue
        buf.write(f"chi2,{l},{_g(res.chi2)},{res.k},{res.N},{cfg.seed}\n")
    return buf.getvalue()


def _bayes_csv(cfg, threads):
    quantum = quantum_orbit_table(cfg, threads)
    classical = orbit_table_from_samples(classical_samples(cfg, threads))
    v = cfg.validation
    res = bayesian_confidence(quantum, classical, v.N_O, cfg.seed + 2, swap=v.swap)
    buf = io.StringIO()
    buf.write("test,l,statistic,stderr,k_l,N_l,floored,seed\n")
    buf.write(
        f"bayes{'-swapped' if v.swap else ''},all,{_g(res.delta_h)},{_g(res.stderr)},"
        f"{len(quantum.entries)},{res.N_O},{res.floored},{cfg.seed}\n"
    )
    return buf.getvalue()


def _functional_csv(cfg, threads):
    if cfg.pattern is None:
        raise ConfigError("pattern", "the functional subcommand needs a pattern")
    state, _, _ = build_setup(cfg)
    p = pattern_probability(state, cfg.make_detector(), cfg.pattern, threads=threads)
    return "pattern,probability\n" + " ".join(map(str, cfg.pattern)) + f",{_g(p)}\n"


def _conformance_csv(cfg, threads):
    from .conformance import run_conformance

    checks = run_conformance()
    buf = io.StringIO()
    buf.write("suite,check,value,reference,error,tol,passed\n")
    for c in checks:
        name = c.name.replace(",", ";")
        buf.write(f"{c.suite},{name},{_g(c.value)},{_g(c.reference)},{_g(c.error)},{_g(c.tol)},{int(c.passed)}\n")
    failed = [c for c in checks if not c.passed]
    return buf.getvalue(), not failed


_RUNNERS = {
    "orbits": _orbits_csv,
    "classical-sample": _classical_csv,
    "chi2": _chi2_csv,
    "bayes": _bayes_csv,
    "functional": _functional_csv,
}


def run(cmd: str, cfg: ExperimentConfig | None, threads: int | None = None) -> tuple[str, bool]:
    """CSV body for a subcommand and whether it succeeded."""
    if cmd == "conformance":
        return _conformance_csv(cfg, threads)
    if cfg is None:
        raise ConfigError("config", f"{cmd} needs a configuration file")
    return _RUNNERS[cmd](cfg, threads), True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clickgbs", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("config", nargs="?", help="JSON experiment configuration")
    parser.add_argument("-o", "--output", help="CSV output path (default: config 'output' or stdout)")
    parser.add_argument("--threads", type=int, help="worker threads (default: $CLICKGBS_THREADS or all cores)")
    parser.add_argument("--swap", action="store_true", help="bayes: draw from the classical table")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        cfg = load_config(args.config) if args.config else None
        if cfg is not None and args.swap:
            cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "validation": {**cfg.to_dict()["validation"], "swap": True}})
        threads = args.threads or (cfg.threads if cfg else None) or default_threads()
        body, ok = run(args.command, cfg, threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedRoute as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 1
    except (FunctionalError, FloatingPointError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    text = f"# {_header(args.command, cfg)}\n{body}"
    out = args.output or (cfg.output if cfg else None)
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
