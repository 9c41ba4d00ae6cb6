"""Experiment commands. Each writes one artifact and returns its path."""

import logging
from argparse import Namespace
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import pandas as pd

from thermo.errors import ConfigError
from thermo.pgm import convergence_test, hubbard_stratonovich_check
from thermo.quadratic import equilibrium_states, quadratic_pressure
from thermo.xy import laplace_tail, xy_critical_point, xy_limit_check

from .output import build_header, write_csv, write_json
from .schema import ModelConfig

logger = logging.getLogger(__name__)

DEFAULT_HS_POINTS = [[0.5], [1.0], [2.0], [1.0, 1.0], [0.5, -1.5], [2.0, 0.0]]


def _axis(lo: float, hi: float, steps: int) -> np.ndarray:
    if steps < 1 or hi < lo:
        raise ConfigError(f"Need steps >= 1 and max >= min, got [{lo}, {hi}] x {steps}")
    return np.linspace(lo, hi, steps + 1)


def _grid(pf, lo: float, hi: float, steps: int) -> np.ndarray:
    if pf.q > 2:
        raise ConfigError(f"Grids are emitted for q <= 2, model has q={pf.q}")
    axis = _axis(lo, hi, steps)
    mesh = np.meshgrid(*[axis] * pf.q, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _search(args: Namespace) -> dict:
    """find_maxima options from the command line."""
    return {"K": args.K, "grid_step": args.grid, "multistarts": args.multistarts, "radial": args.radial}


def _header(command: str, config: ModelConfig, args: Namespace, **parameters) -> dict:
    return build_header(command, config.model_dump(), config.seed, parameters)


def run_spectral(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    t = np.asarray(args.t if args.t is not None else [0.0] * pf.q, dtype=float)
    spectral = pf.spectral(t)
    body = {
        "t": t,
        **spectral.to_dict(),
        "mu": spectral.mu,
        "states": pf.family.states,
        "psi": {"q": pf.q, "depth": pf.psi.depth, "sup_norm": pf.psi.sup_norm, "lip_bound": pf.psi.lip_bound},
    }
    logger.info(f"spectral: r={spectral.r!r} gap={spectral.gap:.3e} ({spectral.solver})")
    return write_json(out_dir / "spectral.json", _header("spectral", config, args, t=t), body)


def run_pressure_surface(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    T = _grid(pf, args.t_min, args.t_max, args.steps)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        points = list(pool.map(pf.pressure, T))

    columns = {f"t{i + 1}": T[:, i] for i in range(pf.q)}
    columns["P"] = [p.P for p in points]
    for i in range(pf.q):
        columns[f"dP{i + 1}"] = [p.grad[i] for p in points]
    header = _header("pressure-surface", config, args, t_min=args.t_min, t_max=args.t_max, steps=args.steps)
    return write_csv(out_dir / "pressure-surface.csv", header, pd.DataFrame(columns))


def run_entropy(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    Z = _grid(pf, args.z_min, args.z_max, args.steps)
    entropies = pf.entropy_profile(Z)

    columns = {f"z{i + 1}": Z[:, i] for i in range(pf.q)}
    columns["H"] = [e.H for e in entropies]
    columns["status"] = [e.status.value for e in entropies]
    header = _header("entropy", config, args, z_min=args.z_min, z_max=args.z_max, steps=args.steps)
    return write_csv(out_dir / "entropy.csv", header, pd.DataFrame(columns))


def run_maxima(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    result = quadratic_pressure(pf, config.beta, **_search(args))
    states = equilibrium_states(pf, result.maxima)
    body = {
        **result.maxima.to_dict(),
        "coincidence_gap": result.coincidence_gap,
        "equilibrium_states": [
            {"t": s.t, "z": s.z, "expectation": s.expectation, "residual": s.residual}
            for s in states
        ],
    }
    header = _header("maxima", config, args, beta=config.beta, **_search(args))
    return write_json(out_dir / "maxima.json", header, body)


def run_p2_sweep(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    betas = _axis(args.beta_min, args.beta_max, args.steps)
    with ThreadPoolExecutor(max_workers=max(1, args.threads)) as pool:
        results = list(pool.map(lambda b: quadratic_pressure(pf, b, **_search(args)), betas))

    frame = pd.DataFrame(
        {
            "beta": betas,
            "P2": [r.P2 for r in results],
            "maxima": [len(r.maxima.maxima) for r in results],
            "degenerate": [r.maxima.degenerate for r in results],
            "max_norm_z": [max(float(np.linalg.norm(m.z)) for m in r.maxima.maxima) for r in results],
            "coincidence_gap": [r.coincidence_gap for r in results],
        }
    )
    header = _header(
        "p2-sweep", config, args, beta_min=args.beta_min, beta_max=args.beta_max, steps=args.steps, **_search(args)
    )
    return write_csv(out_dir / "p2-sweep.csv", header, frame)


def run_pgm_converge(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    pf = config.build(args.threads)
    observable = config.build_observable(pf)
    if pf.alphabet.is_circle and config.potential.kind == "xy":
        table = xy_limit_check(
            config.beta,
            observable,
            args.n,
            samples=args.samples,
            seed=config.seed,
            m=pf.alphabet.size,
            threads=args.threads,
            tolerance=args.tolerance,
        )
    else:
        table = convergence_test(
            pf,
            config.beta,
            observable,
            args.n,
            method=args.method,
            samples=args.samples,
            seed=config.seed,
            tolerance=args.tolerance,
            proposal=args.proposal,
            threads=args.threads,
            cap=config.solver.dp_cap,
        )

    frame = pd.DataFrame(
        {
            "n": [r.n for r in table.rows],
            "value": [r.value for r in table.rows],
            "prediction": [r.prediction for r in table.rows],
            "gap": [r.gap for r in table.rows],
            "stderr": [np.nan if r.stderr is None else r.stderr for r in table.rows],
        }
    )
    verdict = "PASS" if table.passed else "FAIL"
    print(f"{verdict} final gap={table.rows[-1].gap:.6g} tolerance={table.tolerance}")
    header = _header(
        "pgm-converge",
        config,
        args,
        n=args.n,
        method=args.method,
        samples=args.samples,
        proposal=args.proposal,
        tolerance=args.tolerance,
    )
    header["result"] = verdict
    return write_csv(out_dir / "pgm-converge.csv", header, frame)


def run_hs_check(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    points = [args.xi] if args.xi else DEFAULT_HS_POINTS
    errors = [hubbard_stratonovich_check(xi, args.nodes) for xi in points]
    frame = pd.DataFrame(
        {
            "xi": [" ".join(repr(float(x)) for x in xi) for xi in points],
            "q": [len(xi) for xi in points],
            "nodes": args.nodes,
            "relative_error": errors,
        }
    )
    header = _header("hs-check", config, args, nodes=args.nodes)
    return write_csv(out_dir / "hs-check.csv", header, frame)


def run_xy_phase(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    betas = _axis(args.beta_min, args.beta_max, args.steps)
    rows = [xy_critical_point(float(b)).to_dict() for b in betas]
    frame = pd.DataFrame(rows)[["beta", "regime", "r_star", "phi_max", "second_derivative", "residual"]]
    header = _header("xy-phase", config, args, beta_min=args.beta_min, beta_max=args.beta_max, steps=args.steps)
    return write_csv(out_dir / "xy-phase.csv", header, frame)


def run_laplace_check(args: Namespace, config: ModelConfig, out_dir: Path) -> Path:
    rows = []
    for n in args.n:
        b_n = float(n) ** (-args.b_power) if args.b_power is not None else np.inf
        tail = laplace_tail(args.alpha, args.gamma, float(n), b_n)
        rows.append(
            {"n": n, "b_n": b_n, "integral": tail.integral, "asymptotic": tail.asymptotic, "ratio": tail.ratio}
        )
    header = _header("laplace-check", config, args, alpha=args.alpha, gamma=args.gamma, b_power=args.b_power)
    return write_csv(out_dir / "laplace-check.csv", header, pd.DataFrame(rows))


COMMANDS: dict[str, Callable[[Namespace, ModelConfig, Path], Path]] = {
    "spectral": run_spectral,
    "pressure-surface": run_pressure_surface,
    "entropy": run_entropy,
    "maxima": run_maxima,
    "p2-sweep": run_p2_sweep,
    "pgm-converge": run_pgm_converge,
    "hs-check": run_hs_check,
    "xy-phase": run_xy_phase,
    "laplace-check": run_laplace_check,
}
