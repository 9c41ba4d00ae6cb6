import argparse
import json
import logging
import subprocess
import sys
from importlib.metadata import version
from pathlib import Path

from omegaconf import OmegaConf
from omegaconf.errors import OmegaConfBaseException
from pydantic import ValidationError

from lib.commands import COMMANDS
from lib.logs_config import configure_logging
from lib.runs_config import ensure_runs_dir, get_preset_path, list_presets
from lib.schema import ModelConfig, ObservableConfig
from thermo.errors import ConfigError, ThermoError

logger = logging.getLogger(__name__)

CONFIG_ERROR_EXIT = 2


def get_git_commit_hash() -> str:
    """
    Get the current git commit hash.

    Returns:
        Git commit hash if available, otherwise a fallback message.
    """
    try:
        result = subprocess.run(
            ["git", "rev-parse", "--short", "HEAD"],
            capture_output=True,
            text=True,
            timeout=5,  # 5 second timeout
            cwd=Path(__file__).parent,  # Run in the project directory
        )
        if result.returncode == 0:
            return result.stdout.strip()
        else:
            return "unknown (not a git repository)"
    except (subprocess.TimeoutExpired, subprocess.CalledProcessError):
        return "unknown (git error)"
    except FileNotFoundError:
        return "unknown (git not installed)"
    except Exception:
        return "unknown"


def print_version_info():
    """Print version information."""
    try:
        pkg_version = version("thermo-scope")
    except Exception:
        pkg_version = "unknown"

    print(f"thermo-scope: {pkg_version}")
    print(f"git commit: {get_git_commit_hash()}")


def load_config(args: argparse.Namespace) -> ModelConfig:
    """Preset, then config file, then command-line overrides."""
    layers = []
    if args.model:
        path = get_preset_path(args.model)
        if path is None:
            raise ConfigError(
                f"No preset or file named {args.model!r}; presets: {', '.join(list_presets())}"
            )
        layers.append(OmegaConf.load(path))
    if args.config:
        layers.append(OmegaConf.load(args.config))
    merged = OmegaConf.merge(*layers) if layers else OmegaConf.create({})
    data = OmegaConf.to_container(merged, resolve=True)

    if args.seed is not None:
        data["seed"] = args.seed
    if args.beta is not None:
        data["beta"] = args.beta
    if args.tol is not None:
        data.setdefault("solver", {})["tol"] = args.tol
    if getattr(args, "observable", None):
        data["observable"] = ObservableConfig.model_validate(json.loads(args.observable)).model_dump()

    return ModelConfig.model_validate(data)


def _int_list(text: str) -> list[int]:
    """'100,400' or '100' as a list of positive ints."""
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from e
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError(f"word lengths must be positive, got {text!r}")
    return values


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Model config file (YAML or JSON)")
    common.add_argument("--model", help="Bundled preset name or config path")
    common.add_argument("--out", help="Output directory (default: ~/.thermo-scope/runs)")
    common.add_argument("--seed", type=int, help="Monte-Carlo seed")
    common.add_argument("--threads", type=int, default=1, help="Worker threads (default: 1)")
    common.add_argument("--tol", type=float, help="Eigen residual tolerance")
    common.add_argument("--beta", type=float, help="Inverse temperature")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--K", type=float, help="Search box half-width (default: 4|psi| + 1)")
    search.add_argument("--grid", type=float, help="Scan step (default: K/1000 in 1D, K/10 otherwise)")
    search.add_argument("--multistarts", type=int, default=4, help="Ascents started per grid peak (default: 4)")
    search.add_argument("--radial", action="store_true", help="Rotation-invariant q=2 search")

    parser = argparse.ArgumentParser(
        description="thermo-scope - transfer operators, pressure and mean-field Gibbs measures"
    )
    parser.add_argument(
        "--version",
        action="store_true",
        help="Show version information and exit",
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("spectral", parents=[common], help="Leading eigendata at one t")
    p.add_argument("--t", type=float, nargs="+", help="Parameter vector (default: 0)")

    p = sub.add_parser("pressure-surface", parents=[common], help="P and grad P on a grid")
    p.add_argument("--t-min", type=float, default=-3.0)
    p.add_argument("--t-max", type=float, default=3.0)
    p.add_argument("--steps", type=int, default=20)

    p = sub.add_parser("entropy", parents=[common], help="Legendre entropy on a grid")
    p.add_argument("--z-min", type=float, default=-1.0)
    p.add_argument("--z-max", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=20)

    p = sub.add_parser("maxima", parents=[common, search], help="Maximizers of phi_beta")

    p = sub.add_parser("p2-sweep", parents=[common, search], help="Quadratic pressure over beta")
    p.add_argument("--beta-min", type=float, default=0.5)
    p.add_argument("--beta-max", type=float, default=4.0)
    p.add_argument("--steps", type=int, default=35)

    p = sub.add_parser("pgm-converge", parents=[common], help="PGM values against the limit mixture")
    p.add_argument("--n", type=_int_list, nargs="+", default=[[100, 400, 1600]], help="Word lengths, space or comma separated")
    p.add_argument("--method", choices=["exact", "mc"], default="exact")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--proposal", choices=["product", "hubbard-stratonovich"], default="product")
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--obs", "--observable", dest="observable", help='JSON descriptor, e.g. {"kind": "cylinder", "pattern": [1, 1]}')

    p = sub.add_parser("hs-check", parents=[common], help="Gauss-Hermite check of the HS identity")
    p.add_argument("--xi", type=float, nargs="+")
    p.add_argument("--nodes", type=int, default=64)

    p = sub.add_parser("xy-phase", parents=[common], help="XY maximizer across beta")
    p.add_argument("--beta-min", type=float, default=0.5)
    p.add_argument("--beta-max", type=float, default=6.0)
    p.add_argument("--steps", type=int, default=100)

    p = sub.add_parser("laplace-check", parents=[common], help="Laplace tail integrals")
    p.add_argument("--alpha", type=float, default=2.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--n", type=float, nargs="+", default=[1e2, 1e3, 1e4])
    p.add_argument("--b-power", type=float, help="Use b_n = n^(-p) (default: infinity)")

    return parser


def run(argv: list[str] | None = None) -> int:
    """Run one command; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.version:
        print_version_info()
        return 0
    if args.command is None:
        parser.print_help()
        return CONFIG_ERROR_EXIT
    if args.command == "pgm-converge":
        args.n = [n for chunk in args.n for n in chunk]

    root_logger = logging.getLogger()
    existing_handlers = list(root_logger.handlers)
    log_file = configure_logging(args.command, args.verbose)
    try:
        config = load_config(args)
        out_dir = ensure_runs_dir(args.out)
        logger.info(f"run: {args.command} (log file {log_file})")
        path = COMMANDS[args.command](args, config, out_dir)
        print(path)
        return 0
    except ThermoError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except (ValidationError, OmegaConfBaseException, json.JSONDecodeError, OSError) as e:
        logger.error(f"Invalid configuration: {e}")
        return CONFIG_ERROR_EXIT
    except Exception as e:
        logger.exception(f"Unexpected error: {e}")
        return 1
    finally:
        for handler in root_logger.handlers[:]:
            if handler not in existing_handlers:
                root_logger.removeHandler(handler)
                handler.close()


def main():
    """Main entry point for the thermo-scope command."""
    sys.exit(run())


if __name__ == "__main__":
    main()
