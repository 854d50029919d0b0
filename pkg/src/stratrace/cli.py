"""Command-line front end.

Each subcommand configures one experiment, runs it through the library, and
writes a pair of files: `<out>.json` holding {"payload": ..., "env": ...} and
`<out>.csv` with the plot-ready table regenerated from the payload alone.
Scientific payloads are deterministic for a fixed config and seed; wall time
and host details are quarantined in the env block.

Exit codes: 0 when the experiment ran and converged (or has no convergence
notion), 2 when it ran but did not converge, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import platform
import sys
import time
from dataclasses import dataclass, fields
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .basis import FAMILIES, Interval, OrthonormalBasis
from .coeffs import (
    CacheCorruptError,
    cached_coefficient_matrix,
    tensor_coefficients,
)
from .kernel import (
    ComplexExponential,
    MonomialMax,
    MonomialMin,
    SeparableRankOne,
    SymmetrizedVolterra,
    VolterraProduct,
    default_eps_schedule,
)
from .quadrature import QuadratureConfig, QuadratureError
from .reports import jsonable
from .stochastic import brownian_midpoint_oracle, mc_campaign
from .trace import (
    basis_independence,
    tensor_neighbor_trace,
    tensor_nonneighbor_trace,
    two_route_kernel_trace,
    verify_kernel_trace,
    verify_symmetric_pair_sum,
    verify_volterra_trace,
)
from .weights import PolynomialWeight, TabulatedWeight, TrigSumWeight

__all__ = ["main", "parse_weight", "parse_kernel", "csv_from_payload", "ConfigError"]

EXPERIMENTS = (
    "coeffs",
    "theorem2",
    "theorem1",
    "eq7",
    "basis-independence",
    "tensor-trace",
    "kernel-trace",
    "simulate",
)


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


# ---------------------------------------------------------------------------
# grammars


def parse_weight(text: str, interval: Interval):
    """Weight grammar: "poly:c0,c1,..." | "trig:k,s,c;..." | "table:@file.csv"."""
    if not isinstance(text, str):
        raise ValueError(f"weight spec must be a string, got {text!r}")
    if text.startswith("poly:"):
        body = text[len("poly:"):]
        try:
            coeffs = tuple(float(c) for c in body.split(","))
        except ValueError:
            raise ValueError(f"malformed polynomial coefficients in {text!r}") from None
        return PolynomialWeight(coeffs, interval)
    if text.startswith("trig:"):
        body = text[len("trig:"):]
        terms = []
        for chunk in body.split(";"):
            parts = chunk.split(",")
            if len(parts) != 3:
                raise ValueError(f"trig term {chunk!r} must be k,s,c")
            try:
                terms.append((int(parts[0]), float(parts[1]), float(parts[2])))
            except ValueError:
                raise ValueError(f"malformed trig term {chunk!r}") from None
        return TrigSumWeight(tuple(terms), interval)
    if text.startswith("table:@"):
        path = text[len("table:@"):]
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except OSError:
            raise ValueError(f"cannot read table file {path!r}") from None
        except ValueError:
            raise ValueError(f"table file {path!r} is not two-column numeric CSV") from None
        if data.shape[1] != 2:
            raise ValueError(f"table file {path!r} must have exactly two columns")
        return TabulatedWeight(data[:, 0], data[:, 1], interval)
    raise ValueError(f"unknown weight spec {text!r}; use poly:, trig:, or table:@")


def parse_kernel(text: str, interval: Interval, phi=None, psi=None):
    """Kernel grammar: "sym" | "volterra" | "rank1" (all need --phi/--psi)
    | "min:n,m" | "max:n,m" | "cexp:n,m"."""

    def int_pair(body: str):
        parts = body.split(",")
        if len(parts) != 2:
            raise ValueError(f"kernel parameters {body!r} must be n,m")
        try:
            return int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"kernel parameters {body!r} must be integers") from None

    if text in ("sym", "volterra", "rank1"):
        if phi is None or psi is None:
            raise ValueError(f"kernel {text!r} needs both --phi and --psi")
        cls = {"sym": SymmetrizedVolterra, "volterra": VolterraProduct,
               "rank1": SeparableRankOne}[text]
        return cls(phi, psi)
    if text.startswith("min:"):
        n, m = int_pair(text[len("min:"):])
        return MonomialMin(n, m, interval)
    if text.startswith("max:"):
        n, m = int_pair(text[len("max:"):])
        return MonomialMax(n, m, interval)
    if text.startswith("cexp:"):
        n, m = int_pair(text[len("cexp:"):])
        return ComplexExponential(n, m, interval)
    raise ValueError(
        f"unknown kernel spec {text!r}; use sym | volterra | rank1 | min:n,m | max:n,m | cexp:n,m"
    )


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    experiment: str
    t0: float = 0.0
    T: float = 1.0
    phi: str | None = None
    psi: str | None = None
    w1: str | None = None
    w2: str | None = None
    w3: str | None = None
    kernel: str | None = None
    basis: str | None = None
    bases: str | None = None
    nmax: int = 128
    tol: float = 1e-3
    eps_kmin: int = 3
    eps_kmax: int = 12
    pair: str = "12"
    n_reduced: int = 8
    seed: int = 0
    paths: int = 10_000
    workers: int = 1
    distinct: bool = False
    oracle_draws: int = 0
    oracle_mesh: int = 2048
    scheme: str = "expansion"
    mesh: int = 2 ** 14
    panels: int = 16
    nodes: int = 8
    cache_dir: str | None = None
    out: str | None = None

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError("experiment", f"unknown experiment {self.experiment!r}")
        if not (self.T > self.t0):
            raise ConfigError("T", f"need T > t0, got [{self.t0}, {self.T}]")
        if self.nmax < 1:
            raise ConfigError("nmax", f"must be >= 1, got {self.nmax}")
        if not (self.tol > 0.0):
            raise ConfigError("tol", f"must be positive, got {self.tol}")
        if self.eps_kmin > self.eps_kmax:
            raise ConfigError("eps_kmin", "schedule must decrease: need eps_kmin <= eps_kmax")
        if self.pair not in ("12", "23", "13"):
            raise ConfigError("pair", f"must be one of 12, 23, 13, got {self.pair!r}")
        if self.n_reduced < 1:
            raise ConfigError("n_reduced", f"must be >= 1, got {self.n_reduced}")
        if self.paths < 2:
            raise ConfigError("paths", f"must be >= 2, got {self.paths}")
        if self.workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {self.workers}")
        if self.oracle_draws < 0:
            raise ConfigError("oracle_draws", f"must be >= 0, got {self.oracle_draws}")
        if self.oracle_mesh < 1:
            raise ConfigError("oracle_mesh", f"must be >= 1, got {self.oracle_mesh}")
        if self.scheme not in ("expansion", "brownian"):
            raise ConfigError("scheme", f"must be expansion or brownian, got {self.scheme!r}")
        if self.mesh < 1:
            raise ConfigError("mesh", f"must be >= 1, got {self.mesh}")
        if self.panels < 1:
            raise ConfigError("panels", f"must be >= 1, got {self.panels}")
        if self.nodes < 1:
            raise ConfigError("nodes", f"must be >= 1, got {self.nodes}")

    @property
    def interval(self) -> Interval:
        return Interval(self.t0, self.T)

    @property
    def quadrature(self) -> QuadratureConfig:
        return QuadratureConfig(panels=self.panels, nodes_per_panel=self.nodes)

    def weight(self, field_name: str):
        text = getattr(self, field_name)
        if text is None:
            raise ConfigError(field_name, "required for this experiment")
        try:
            return parse_weight(text, self.interval)
        except ValueError as exc:
            raise ConfigError(field_name, str(exc)) from None

    def make_basis(self, family: str | None = None) -> OrthonormalBasis:
        family = family if family is not None else self.basis
        if family is None:
            raise ConfigError("basis", "required for this experiment")
        try:
            return OrthonormalBasis(family, self.interval, self.nmax - 1)
        except ValueError as exc:
            raise ConfigError("basis", str(exc)) from None

    def basis_list(self) -> list:
        text = self.bases if self.bases is not None else ",".join(FAMILIES)
        families = [f.strip() for f in text.split(",") if f.strip()]
        if not families:
            raise ConfigError("bases", "need at least one basis family")
        return [self.make_basis(f) for f in families]

    def make_kernel(self):
        if self.kernel is None:
            raise ConfigError("kernel", "required for this experiment")
        phi = self.weight("phi") if self.phi is not None else None
        psi = self.weight("psi") if self.psi is not None else None
        try:
            return parse_kernel(self.kernel, self.interval, phi, psi)
        except ValueError as exc:
            raise ConfigError("kernel", str(exc)) from None


def _merge_config(args: argparse.Namespace) -> ExperimentConfig:
    """Flags override config-file values, which override defaults."""
    file_values = {}
    if args.config is not None:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config!r}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{args.config!r} is not valid JSON: {exc}") from None
        if not isinstance(file_values, dict):
            raise ConfigError("config", f"{args.config!r} must hold a JSON object")

    kwargs = {"experiment": args.experiment}
    for f in fields(ExperimentConfig):
        if f.name == "experiment":
            continue
        flag_value = getattr(args, f.name, None)
        if flag_value is not None:
            kwargs[f.name] = flag_value
        elif f.name in file_values:
            kwargs[f.name] = file_values[f.name]
    unknown = set(file_values) - {f.name for f in fields(ExperimentConfig)}
    if unknown:
        raise ConfigError("config", f"unknown fields {sorted(unknown)}")
    config = ExperimentConfig(**kwargs)
    config.validate()
    return config


# ---------------------------------------------------------------------------
# output


def _cell(value) -> str:
    """Deterministic CSV cell: shortest-repr floats, complex as re+imj."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return repr(complex(value[0], value[1]))
    return str(value)


def csv_from_payload(payload: dict) -> str:
    """Regenerate the CSV table from a JSON payload alone."""
    experiment = payload.get("experiment")
    if experiment == "simulate":
        header = "n_paths,N,mean,variance,ci95,target_trace,target_half_inner"
        row = ",".join(_cell(payload[k]) for k in (
            "n_paths", "N", "mean", "variance", "ci95", "target_trace", "target_half_inner"
        ))
        return header + "\n" + row + "\n"
    if experiment == "coeffs":
        lines = ["i,j,entry"]
        for i, row in enumerate(payload["entries"]):
            for j, entry in enumerate(row):
                lines.append(f"{i},{j},{_cell(entry)}")
        return "\n".join(lines) + "\n"
    lines = ["N,partial_sum,target,error"]
    target = _cell(payload["target"])
    for n, s, e in zip(payload["N_values"], payload["partial_sums"], payload["errors"]):
        lines.append(f"{_cell(n)},{_cell(s)},{target},{_cell(e)}")
    return "\n".join(lines) + "\n"


def _write_outputs(out_prefix: str, payload: dict, wall_ms: float) -> None:
    env = {
        "wall_time_ms": wall_ms,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "stratrace": __version__,
        },
        "host": platform.node(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    Path(out_prefix + ".json").write_text(
        json.dumps({"payload": payload, "env": env}, indent=2) + "\n", encoding="utf-8"
    )
    Path(out_prefix + ".csv").write_text(csv_from_payload(payload), encoding="utf-8", newline="")


# ---------------------------------------------------------------------------
# experiments


def _run(config: ExperimentConfig) -> int:
    started = time.perf_counter()
    quad = config.quadrature

    if config.experiment == "coeffs":
        matrix = cached_coefficient_matrix(
            config.weight("phi"), config.weight("psi"), config.make_basis(),
            config.nmax, quad, directory=config.cache_dir,
        )
        payload = jsonable({
            "experiment": "coeffs",
            "basis": matrix.basis_id,
            "weights": list(matrix.weight_ids),
            "N": matrix.count,
            "quad": matrix.quad_fingerprint,
            "trace": matrix.trace,
            "entries": matrix.entries,
        })
        converged = True
    elif config.experiment == "theorem2":
        report = verify_volterra_trace(
            config.weight("phi"), config.weight("psi"), config.make_basis(),
            config.nmax, quad, tol=config.tol,
        )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "theorem1":
        spec = config.make_kernel()
        schedule = default_eps_schedule(config.interval, config.eps_kmin, config.eps_kmax)
        report = two_route_kernel_trace(
            spec, config.make_basis(), config.nmax, schedule, quad, tol=config.tol,
        )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "eq7":
        report = verify_symmetric_pair_sum(
            config.weight("phi"), config.weight("psi"), config.make_basis(),
            config.nmax, quad, tol=config.tol,
        )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "basis-independence":
        report = basis_independence(
            config.weight("phi"), config.weight("psi"), config.basis_list(),
            config.nmax, quad, tol=config.tol,
        )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "tensor-trace":
        w1, w2, w3 = config.weight("w1"), config.weight("w2"), config.weight("w3")
        basis = config.make_basis()
        tensor = tensor_coefficients(w1, w2, w3, basis, config.nmax, quad)
        if config.pair == "13":
            report = tensor_nonneighbor_trace(tensor, tol=config.tol)
        else:
            pair = (1, 2) if config.pair == "12" else (2, 3)
            report = tensor_neighbor_trace(
                tensor, w1, w2, w3, basis, pair=pair,
                n_reduced=config.n_reduced, quad=quad, tol=config.tol,
            )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "kernel-trace":
        report = verify_kernel_trace(
            config.make_kernel(), config.make_basis(), config.nmax, quad, tol=config.tol,
        )
        payload, converged = report.payload(), report.converged
    elif config.experiment == "simulate":
        phi, psi = config.weight("phi"), config.weight("psi")
        if config.scheme == "brownian":
            report = brownian_midpoint_oracle(
                phi, psi, config.interval, seed=config.seed,
                n_paths=config.paths, mesh=config.mesh,
            )
        else:
            report = mc_campaign(
                phi, psi, config.make_basis(), config.nmax, config.paths,
                seed=config.seed, same_process=not config.distinct,
                workers=config.workers, oracle_draws=config.oracle_draws,
                oracle_mesh=config.oracle_mesh, quad=quad,
            )
        payload = report.payload()
        standard_error = (report.variance / report.n_paths) ** 0.5
        converged = abs(report.mean - report.target_trace) <= 3.0 * standard_error
    else:  # pragma: no cover - validate() already rejects this
        raise ConfigError("experiment", f"unknown experiment {config.experiment!r}")

    wall_ms = (time.perf_counter() - started) * 1000.0
    out_prefix = config.out if config.out is not None else config.experiment
    _write_outputs(out_prefix, payload, wall_ms)
    print(f"{config.experiment}: wrote {out_prefix}.json and {out_prefix}.csv "
          f"({'converged' if converged else 'NOT converged'})")
    return 0 if converged else 2


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; this front end reserves 2
    for non-converged experiments, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--t0", type=float, help="interval start (default 0)")
    p.add_argument("--T", type=float, help="interval end (default 1)")
    p.add_argument("--panels", type=int, help="quadrature panels (default 16)")
    p.add_argument("--nodes", type=int, help="quadrature nodes per panel (default 8)")
    p.add_argument("--out", help="output file prefix (default: experiment name)")


def build_parser() -> _Parser:
    parser = _Parser(prog="stratrace", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)

    def weights_flags(p, phi=True, psi=True):
        if phi:
            p.add_argument("--phi", help='first weight, e.g. "poly:1"')
        if psi:
            p.add_argument("--psi", help='second weight, e.g. "poly:0,1"')

    p = sub.add_parser("coeffs", help="compute (and cache) a coefficient matrix")
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int, help="matrix size (default 128)")
    p.add_argument("--cache-dir", dest="cache_dir", help="override STRC_CACHE_DIR")
    _add_common(p)

    p = sub.add_parser("theorem2", help="diagonal sums against half the inner product")
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("theorem1", help="kernel trace by expansion and by box averaging")
    p.add_argument("--kernel", help='"min:n,m" | "max:n,m" | "cexp:n,m" | sym | volterra | rank1')
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int, help="expansion truncation (default 128)")
    p.add_argument("--eps-kmin", dest="eps_kmin", type=int, help="schedule starts at L/2^kmin")
    p.add_argument("--eps-kmax", dest="eps_kmax", type=int, help="schedule ends at L/2^kmax")
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("eq7", help="symmetric pair sums against the full inner product")
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("basis-independence", help="diagonal sums across bases")
    weights_flags(p)
    p.add_argument("--bases", help="comma-separated families (default: all three)")
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("tensor-trace", help="order-3 partial traces")
    p.add_argument("--w1", help="innermost weight")
    p.add_argument("--w2", help="middle weight")
    p.add_argument("--w3", help="outermost weight")
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int)
    p.add_argument("--pair", choices=("12", "23", "13"), help="slots to trace over")
    p.add_argument("--n-reduced", dest="n_reduced", type=int)
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("kernel-trace", help="expansion diagonal sums of a kernel")
    p.add_argument("--kernel")
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int)
    p.add_argument("--tol", type=float)
    _add_common(p)

    p = sub.add_parser("simulate", help="Monte Carlo iterated integrals")
    weights_flags(p)
    p.add_argument("--basis", choices=FAMILIES)
    p.add_argument("--nmax", type=int, help="truncation order")
    p.add_argument("--paths", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--distinct", action="store_const", const=True,
                   help="use independent noises in the two layers")
    p.add_argument("--oracle-draws", dest="oracle_draws", type=int)
    p.add_argument("--oracle-mesh", dest="oracle_mesh", type=int)
    p.add_argument("--scheme", choices=("expansion", "brownian"))
    p.add_argument("--mesh", type=int, help="Brownian oracle mesh")
    _add_common(p)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _merge_config(args)
        return _run(config)
    except ConfigError as exc:
        print(f"stratrace: error: {exc}", file=sys.stderr)
        return 1
    except (QuadratureError, CacheCorruptError, ValueError, OSError) as exc:
        print(f"stratrace: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
