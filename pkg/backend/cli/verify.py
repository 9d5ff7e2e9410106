import argparse
import csv
import io
import json
import math
import re
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Add project root to path
sys.path.append(str(Path(__file__).parent.parent))

from pydantic import ValidationError

from app.core.config import settings
from app.core.canonicalize import round_floats, to_builtin
from app.core.engine_version import ENGINE_VERSION
from app.core.logging import configure_logging
from app.db.schemas import SUITE_ORDER, ComputationReport, Environment, SuiteConfig
from app.engine.builder import BuildError
from app.engine.elliptic import (
    EllipticParams,
    jz_theta,
    weights_from_elliptic,
    yang_baxter_residual,
    zeta_and_jz_consistency,
    zeta_theta,
)
from app.engine.hilbert import rng_for, supersymmetric_couplings, xyz_hamiltonian
from app.engine.report import CHECK_ERRORS, run_suite
from app.engine.spectral import eig_dense_general, eig_dense_hermitian
from app.engine.suites import stroganov_passed
from app.engine.susy import KernelDimensionError, ground_state_check, susy_algebra_residuals, susy_kernel
from app.engine.vertex import VertexWeights, solve_d, stroganov_check, transfer_matrix_dense, word_sum

_ANGLE = re.compile(r"^\s*(?:([0-9.eE+-]+)\s*\*\s*)?pi\s*(?:/\s*([0-9.eE+-]+))?\s*$")


class UsageError(Exception):
    """Malformed flag values detected after argparse."""
    pass


class CliParser(argparse.ArgumentParser):
    """argparse with single-line diagnostics and exit status 2."""

    def error(self, message: str):
        self.exit(2, f"{self.prog}: error: {message}\n")


# --- Flag value parsers ---

def parse_lengths(text: str) -> List[int]:
    """'3,5,7' or '2..9'."""
    try:
        if ".." in text:
            lo, hi = (int(part) for part in text.split("..", 1))
            if hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid length list {text!r} (use '3,5' or '2..9')")


def parse_floats(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number list {text!r}")


def parse_angle(text: str) -> float:
    """A plain number or a multiple of pi: 'pi/3', '2*pi/3'."""
    match = _ANGLE.match(text)
    try:
        if match:
            factor = float(match.group(1)) if match.group(1) else 1.0
            divisor = float(match.group(2)) if match.group(2) else 1.0
            return factor * math.pi / divisor
        return float(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"invalid angle {text!r}")


def parse_tolerances(items: Optional[List[str]]) -> Dict[str, float]:
    overrides: Dict[str, float] = {}
    for item in items or []:
        for pair in item.split(","):
            if "=" not in pair:
                raise UsageError(f"--tol expects key=value, got {pair!r}")
            key, value = pair.split("=", 1)
            try:
                overrides[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"--tol value for {key.strip()!r} is not a number: {value!r}")
    return overrides


# --- Parser ---

def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="Write the payload to this path instead of stdout")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="Payload format (csv: spectrum only)")
    p.add_argument("--log-level", default=None, help="Log level for the JSON stderr log")
    p.add_argument("--tol", action="append", metavar="KEY=VALUE", help="Tolerance override (repeatable)")
    p.add_argument("--dense-limit", type=int, help="Dense solver budget as log2 of the dimension")


def _add_weights(p: argparse.ArgumentParser) -> None:
    group = p.add_mutually_exclusive_group()
    group.add_argument("--weights", type=parse_floats, help="a,b,c,d or a,b,c (d solved from the constraint)")
    group.add_argument("--from-elliptic", action="store_true", help="Take the weights from --eta/--nome/--u")
    p.add_argument("--allow-unconstrained", action="store_true", help="Run quadruples that violate the constraint")


def _add_elliptic(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta", type=parse_angle, help="Crossing parameter, e.g. pi/3")
    p.add_argument("--nome", type=float, help="Nome p in [0, 1)")
    p.add_argument("--u", type=float, help="Spectral parameter")
    p.add_argument("--v", type=float, help="Second spectral parameter")
    p.add_argument("--rho", type=float, help="Overall normalisation of the weights")


def build_parser() -> CliParser:
    parser = CliParser(prog="verify", description="Supersymmetric eight-vertex / XYZ verifier")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("verify", help="Run verification suites and print the report")
    p.add_argument("--config", help="SuiteConfig JSON file; flags override its values")
    suites = p.add_mutually_exclusive_group()
    suites.add_argument("--suite", choices=SUITE_ORDER + ["all"], help="Suite to run")
    suites.add_argument("--all", action="store_true", help="Run every suite")
    p.add_argument("--L", type=parse_lengths, help="Chain lengths: '3,5' or '2..9'")
    p.add_argument("--zeta", type=float, help="Anisotropy for the spin-chain suites")
    p.add_argument("--n-max", type=int, help="Largest n of the word-sum sweep")
    p.add_argument("--samples", type=int, help="Random weight samples when no weights are given")
    p.add_argument("--seed", type=int, help="Master seed")
    p.add_argument("--workers", type=int, help="Thread pool size for the checks")
    _add_weights(p)
    _add_elliptic(p)
    _add_common(p)

    p = sub.add_parser("spectrum", help="Dense spectrum of T (weights) or H_XYZ (--operator xyz)")
    p.add_argument("--L", type=int, required=True, help="Chain length")
    p.add_argument("--operator", choices=("transfer", "xyz"), default="transfer")
    p.add_argument("--zeta", type=float, help="Anisotropy for --operator xyz")
    _add_weights(p)
    _add_elliptic(p)
    _add_common(p)

    p = sub.add_parser("stroganov", help="Locate (a+b)^(2n+1) in the spectrum of T")
    p.add_argument("--n", type=int, required=True, help="L = 2n+1")
    _add_weights(p)
    _add_elliptic(p)
    _add_common(p)

    p = sub.add_parser("susy", help="Kernel, ground state and algebra residuals of the SUSY chain")
    p.add_argument("--L", type=int, required=True, help="Chain length")
    p.add_argument("--zeta", type=float, required=True, help="Anisotropy")
    p.add_argument("--seed", type=int, help="Seed for the random test states")
    _add_common(p)

    p = sub.add_parser("elliptic", help="Elliptic weights and their theta identities")
    _add_elliptic(p)
    _add_common(p)

    p = sub.add_parser("yangbaxter", help="Yang-Baxter residual of the elliptic R-matrix")
    _add_elliptic(p)
    _add_common(p)

    p = sub.add_parser("word-sum", help="Position-tuple word sum against (a+b)^(2n+1)")
    p.add_argument("--n", type=int, required=True, help="L = 2n+1")
    p.add_argument("--weights", type=parse_floats, required=True, help="a,b")
    _add_common(p)
    return parser


# --- Commands ---

def _elliptic_params(args: argparse.Namespace) -> EllipticParams:
    return EllipticParams(
        eta=math.pi / 3 if args.eta is None else args.eta,
        nome=0.2 if args.nome is None else args.nome,
        u=0.4 if args.u is None else args.u,
        rho=1.0 if args.rho is None else args.rho,
    )


def _tolerances(args: argparse.Namespace) -> Dict[str, float]:
    overrides = parse_tolerances(args.tol)
    unknown = set(overrides) - set(settings.DEFAULT_TOLERANCES)
    if unknown:
        raise UsageError(f"unknown tolerance keys {sorted(unknown)}")
    return {**settings.DEFAULT_TOLERANCES, **overrides}


def _weights(args: argparse.Namespace, tolerances: Dict[str, float]) -> VertexWeights:
    if args.from_elliptic:
        return weights_from_elliptic(_elliptic_params(args))
    if args.weights is None:
        raise UsageError("weights are required: --weights a,b,c[,d] or --from-elliptic")
    if len(args.weights) == 3:
        return solve_d(*args.weights)
    if len(args.weights) != 4:
        raise UsageError(f"--weights takes 3 or 4 values, got {len(args.weights)}")
    w = VertexWeights(*args.weights)
    if w.constraint_residual > tolerances["constraint"] and not args.allow_unconstrained:
        raise UsageError(f"weights {args.weights} violate the constraint "
                         f"(residual {w.constraint_residual:.3e}); pass --allow-unconstrained")
    return w


def _computation(command: str, inputs: Dict[str, Any], result: Dict[str, Any], passed: bool) -> ComputationReport:
    return ComputationReport(
        command=command,
        inputs=round_floats(to_builtin(inputs)),
        result=round_floats(to_builtin(result)),
        passed=passed,
        environment=Environment(engine_version=str(ENGINE_VERSION)),
    )


def cmd_verify(args: argparse.Namespace):
    data: Dict[str, Any] = {}
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}")

    flags = {
        "L_list": args.L,
        "zeta": args.zeta,
        "n_max": args.n_max,
        "samples": args.samples,
        "seed": args.seed,
        "workers": args.workers,
        "eta": args.eta,
        "nome": args.nome,
        "u": args.u,
        "v": args.v,
        "rho": args.rho,
        "dense_limit": args.dense_limit,
    }
    data.update({key: value for key, value in flags.items() if value is not None})
    if args.all:
        data["suite"] = "all"
    elif args.suite:
        data["suite"] = args.suite
    if args.weights is not None:
        data["weights"] = args.weights
        data["weight_source"] = "solve-d" if len(args.weights) == 3 else "explicit"
    elif args.from_elliptic:
        data["weight_source"] = "elliptic"
    if args.allow_unconstrained:
        data["allow_unconstrained"] = True
    if args.tol:
        data["tolerance_overrides"] = {**data.get("tolerance_overrides", {}), **parse_tolerances(args.tol)}

    config = SuiteConfig(**data)
    return run_suite(config)


def cmd_spectrum(args: argparse.Namespace):
    if args.operator == "xyz":
        if args.zeta is None:
            raise UsageError("--operator xyz needs --zeta")
        couplings = supersymmetric_couplings(args.zeta)
        spectrum = eig_dense_hermitian(xyz_hamiltonian(args.L, *couplings), dense_limit=args.dense_limit)
        inputs = {"operator": "xyz", "L": args.L, "zeta": args.zeta, "couplings": couplings}
    else:
        w = _weights(args, _tolerances(args))
        spectrum = eig_dense_general(transfer_matrix_dense(w, args.L), dense_limit=args.dense_limit, with_vectors=False)
        inputs = {"operator": "transfer", "L": args.L, "weights": list(w.as_tuple())}
    if args.format == "csv":
        return spectrum
    return _computation("spectrum", inputs, spectrum.summary(), True)


def cmd_stroganov(args: argparse.Namespace):
    tolerances = _tolerances(args)
    w = _weights(args, tolerances)
    report = stroganov_check(w, args.n, dense_limit=args.dense_limit)
    return _computation("stroganov", {"n": args.n, "weights": list(w.as_tuple())}, report.summary(),
                        stroganov_passed(report, tolerances))


def cmd_susy(args: argparse.Namespace):
    tolerances = _tolerances(args)
    seed = settings.DEFAULT_SEED if args.seed is None else args.seed
    kernel = susy_kernel(args.L, args.zeta, dense_limit=args.dense_limit, zero_tol=tolerances["kernel_zero"])
    expected = 0 if args.L % 2 == 0 else 2
    residuals = susy_algebra_residuals(args.L, args.zeta, rng_for(seed, "susy", args.L))
    result: Dict[str, Any] = {
        "kernel_dimension": kernel.dimension,
        "expected_dimension": expected,
        "gap": kernel.gap,
        "lowest": kernel.lowest,
        "method": kernel.method,
        "algebra_residuals": residuals,
    }
    passed = kernel.dimension == expected and max(residuals.values()) <= tolerances["nilpotency"]
    if args.L % 2 == 1:
        ground = ground_state_check(args.L, args.zeta, dense_limit=args.dense_limit)
        result["ground_state"] = {"expected": ground.expected, "minimum": ground.minimum,
                                  "multiplicity": ground.multiplicity, "relative_error": ground.relative_error}
        passed = passed and ground.relative_error <= tolerances["ground_state"] and ground.multiplicity == 2
    return _computation("susy", {"L": args.L, "zeta": args.zeta}, result, passed)


def cmd_elliptic(args: argparse.Namespace):
    tolerances = _tolerances(args)
    params = _elliptic_params(args)
    report = zeta_and_jz_consistency(params)
    result = report.summary()
    result["zeta_theta"] = zeta_theta(params.eta, params.nome)
    result["jz_theta"] = jz_theta(params.eta, params.nome)
    passed = report.zeta_residual <= tolerances["theta_identity"] and report.jz_residual <= tolerances["theta_identity"]
    if math.isclose(params.eta, math.pi / 3, rel_tol=0.0, abs_tol=1e-12):
        passed = passed and report.constraint_residual <= tolerances["constraint"]
    return _computation("elliptic", vars(params), result, passed)


def cmd_yangbaxter(args: argparse.Namespace):
    tolerances = _tolerances(args)
    params = _elliptic_params(args)
    v = 0.3 if args.v is None else args.v
    residual = yang_baxter_residual(params.eta, params.nome, params.u, v, params.rho)
    return _computation("yangbaxter", {**vars(params), "v": v}, {"residual": residual},
                        residual <= tolerances["yang_baxter"])


def cmd_word_sum(args: argparse.Namespace):
    tolerances = _tolerances(args)
    if len(args.weights) != 2:
        raise UsageError(f"word-sum --weights takes a,b; got {len(args.weights)} values")
    a, b = args.weights
    report = word_sum(a, b, args.n)
    result = {"value": report.literal, "brute_force": report.brute_force, "expected": report.expected,
              "relative_error": report.relative_error}
    return _computation("word-sum", {"n": args.n, "a": a, "b": b}, result,
                        report.relative_error <= tolerances["word_sum"])


COMMANDS = {
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "stroganov": cmd_stroganov,
    "susy": cmd_susy,
    "elliptic": cmd_elliptic,
    "yangbaxter": cmd_yangbaxter,
    "word-sum": cmd_word_sum,
}


def spectrum_csv(spectrum) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["re", "im", "multiplicity"])
    for c in spectrum.clusters:
        writer.writerow([repr(float(c.value.real)), repr(float(c.value.imag)), c.multiplicity])
    return buffer.getvalue()


def _emit(payload: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(payload)
    else:
        sys.stdout.write(payload)


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        configure_logging(args.log_level or settings.LOG_LEVEL)
        if args.format == "csv" and args.command != "spectrum":
            raise UsageError("--format csv is only available for the spectrum command")

        # 1. Compute
        result = COMMANDS[args.command](args)

        # 2. Output
        if args.format == "csv":
            _emit(spectrum_csv(result), args.out)
            return 0
        _emit(result.model_dump_json(indent=2) + "\n", args.out)

        # 3. Exit Code
        return 0 if result.passed else 1

    except ValidationError as e:
        details = "; ".join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        print(f"Error: Invalid configuration: {details}", file=sys.stderr)
        return 2
    except (UsageError, BuildError) as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except KernelDimensionError as e:
        print(f"Falsified: {e}", file=sys.stderr)
        return 1
    except CHECK_ERRORS as e:
        # domain errors and solver failures
        print(f"Error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"Internal Error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
