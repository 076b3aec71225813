"""Reproducible experiment runner: one subcommand per artifact.

Output files are written atomically (temp file + rename) with the resolved
experiment spec, tool version, and root seed embedded in ``#``-prefixed
header lines (CSV) or a ``meta`` object (JSON).  Floats print with 17
significant digits so every file re-parses losslessly, and identical
(spec, seed, version) triples produce byte-identical files regardless of
the worker count.

Exit codes: 0 success, 1 computation error, 2 validation error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, core, exact, montecarlo, rate
from .experiment import ExperimentSpec, ValidationError

__all__ = ["main", "rows_for_spec", "render_output", "read_spec"]

SUBCOMMANDS = (
    "thresholds",
    "exact-free-energy",
    "second-moment",
    "uncentered-ratio",
    "rate-gap",
    "kl-check",
    "ldp-check",
    "shell-count",
    "gauge-check",
    "moment-check",
    "tail-bound",
    "mc-free-energy",
)


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


# ---------------------------------------------------------------------------
# Handlers: spec -> (columns, rows)


def _run_thresholds(spec: ExperimentSpec):
    cols = ["kappa", "beta_kappa", "branch", "ew90_critical", "balanced_gse_upper", "breaks_at_zero_temp"]
    rows = []
    for kappa in range(3, spec.kappa_max + 1):
        th = rate.high_temperature_threshold(kappa)
        zt = rate.zero_temperature_bounds(kappa)
        rows.append(
            [kappa, th.beta, th.branch, rate.ferro_potts_critical_coupling(kappa), zt.balanced_upper, zt.breaks]
        )
    return cols, rows


def _run_exact_free_energy(spec: ExperimentSpec):
    cols = ["n", "beta", "replica", "seed", "stream", "log_z", "free_energy"]
    rows = []
    for n in spec.n:
        spec.check_cap(n)
        for beta in spec.beta:
            one = spec.replace(n=(n,), beta=(beta,))
            result = exact.quenched_free_energy(one, workers=spec.workers)
            for idx, s in enumerate(result.samples):
                rows.append([n, beta, idx, s.seed, s.stream, s.log_z, s.free_energy])
    return cols, rows


def _run_second_moment(spec: ExperimentSpec):
    cols = ["n", "beta", "ratio", "log_ratio"]
    rows = []
    for n in spec.n:
        if n % spec.kappa:
            raise ValidationError(f"second moment needs kappa | n; n={n}, kappa={spec.kappa}")
        for beta in spec.beta:
            ratio = exact.second_moment_ratio(n, beta, spec.kappa)
            rows.append([n, beta, ratio, math.log(ratio)])
    return cols, rows


def _run_uncentered_ratio(spec: ExperimentSpec):
    cols = ["n", "beta", "sector", "ratio", "lower_bound", "exceeds_bound"]
    rows = []
    for n in spec.n:
        for beta in spec.beta:
            ratio = exact.uncentered_ratio(n, beta, spec.kappa, spec.sector, cap=spec.cap)
            bound = exact.uncentered_lower_bound(n, beta, spec.kappa, spec.sector)
            rows.append([n, beta, spec.sector, ratio, bound, ratio >= bound])
    return cols, rows


def _run_rate_gap(spec: ExperimentSpec):
    kappa = spec.kappa
    result = rate.exponent_gap(kappa, spec.beta[0], spec.delta, seed=spec.seed)
    cols = ["kappa", "beta", "delta", "minimum", "source", "converged", "restarts", "iterations"]
    cols += [f"argmin_{a}{b}" for a in range(kappa) for b in range(kappa)]
    row = [kappa, spec.beta[0], spec.delta, result.value, result.source, result.converged,
           result.restarts, result.iterations]
    row += [float(v) for v in result.argmin.ravel()]
    return cols, [row]


def _run_kl_check(spec: ExperimentSpec):
    rng = core.philox_generator(spec.seed, 0)
    holds = 0
    violations = 0
    worst = math.inf
    skipped = 0
    for _ in range(spec.trials):
        dim = int(rng.integers(2, 10))
        q = rng.dirichlet(np.ones(dim))
        if q.min() <= 0:
            skipped += 1
            continue
        direction = rng.standard_normal(dim)
        direction -= direction.mean()
        scale = rng.random() * 0.5 * q.min() / max(np.abs(direction).max(), 1e-300)
        p = q + scale * direction
        if p.min() < 0:
            skipped += 1
            continue
        res = rate.local_expansion_check(p, q)
        if not res.precondition_ok:
            skipped += 1
            continue
        worst = min(worst, res.rhs_bound - res.lhs_gap)
        if res.holds:
            holds += 1
        else:
            violations += 1
    cols = ["trials", "checked", "holds", "violations", "worst_margin"]
    return cols, [[spec.trials, holds + violations, holds, violations, worst]]


def _run_ldp_check(spec: ExperimentSpec):
    cols = ["n", "exact_log_p", "asymptotic_log_p", "gap"]
    rows = []
    kappa = spec.kappa
    for n in spec.n:
        if n % kappa ** 2:
            raise ValidationError(f"uniform table needs kappa^2 | n; n={n}, kappa={kappa}")
        table = np.full((kappa, kappa), n // kappa ** 2, dtype=np.int64)
        ex, asym = exact.ldp_log_probability(n, kappa, table)
        rows.append([n, ex, asym, ex - asym])
    return cols, rows


def _run_shell_count(spec: ExperimentSpec):
    cols = ["n", "l", "count", "bound_ratio"]
    rows = []
    expo = (spec.kappa - 1) ** 2 / 2.0
    for n in spec.n:
        hist = exact.shell_histogram(n, spec.kappa)
        for l in range(1, n + 1):
            cnt = int(hist[l - 1])
            if cnt:
                rows.append([n, l, cnt, cnt / (l * n) ** expo])
    return cols, rows


def _run_gauge_check(spec: ExperimentSpec):
    n = spec.n[0]
    beta = spec.beta[0]
    rng = core.philox_generator(spec.seed, 0)
    cols = ["trial", "stream", "flip_site", "value", "value_flipped", "pair_sum"]
    rows = []
    worst = 0.0
    for trial in range(spec.trials):
        g = core.CouplingMatrix.from_seed(n, spec.seed, trial)
        m = int(rng.integers(1, 6))
        sites = [int(s) for s in rng.integers(0, n, size=m)]
        degrees = {s: sites.count(s) for s in sites}
        if all(d % 2 == 0 for d in degrees.values()):
            sites.append(int(rng.integers(0, n)))  # force an odd-degree site
        res = exact.gauge_pair_check(g, beta, sites, cap=spec.cap)
        worst = max(worst, abs(res.pair_sum))
        rows.append([trial, trial, res.flip_site, res.value, res.value_flipped, res.pair_sum])
    print(f"max |pair sum| = {worst:.3e}")
    return cols, rows


def _run_moment_check(spec: ExperimentSpec):
    cols = ["m", "n", "beta", "estimate", "stderr", "bound", "satisfied"]
    rows = []
    for n in spec.n:
        for beta in spec.beta:
            for m in spec.moments or (1, 2):
                est = exact.magnetization_moment_exact(
                    n, beta, m, replicas=spec.replicas, seed=spec.seed, cap=spec.cap
                )
                rows.append([m, n, beta, est.value, est.stderr, est.bound, est.satisfied])
    return cols, rows


def _run_tail_bound(spec: ExperimentSpec):
    cols = ["n", "beta", "epsilon", "estimate", "stderr", "bound", "within_bound", "flagged"]
    rows = []
    for n in spec.n:
        for beta in spec.beta:
            one = spec.replace(n=(n,), beta=(beta,))
            for est in montecarlo.estimate_tail(one, spec.epsilon or (0.25,)):
                ok = est.bound is None or est.estimate <= est.bound + 3.0 * est.stderr
                rows.append([n, beta, est.epsilon, est.estimate, est.stderr, est.bound, ok, est.flagged])
    return cols, rows


def _run_mc_free_energy(spec: ExperimentSpec):
    cols = ["n", "beta_max", "sector", "kind", "ti_value", "stderr", "quad_error", "exact_value", "flagged"]
    rows = []
    for n in spec.n:
        g = core.CouplingMatrix.from_seed(n, spec.seed, 0)
        res = montecarlo.free_energy_ti(
            g, spec.kappa, spec.beta_max, spec.n_grid, spec.sector, spec.kind,
            seed=spec.seed, sweeps=spec.sweeps, burn_in=spec.burn_in,
        )
        try:
            spec.check_cap(n)
            exact_val = exact.log_partition(
                g, spec.beta_max, spec.kappa, spec.sector, spec.kind, cap=spec.cap
            ).free_energy
        except ValidationError:
            exact_val = math.nan
        rows.append([n, spec.beta_max, spec.sector, spec.kind, res.value, res.stderr,
                     res.quad_error, exact_val, res.flagged])
    return cols, rows


_HANDLERS = {
    "thresholds": _run_thresholds,
    "exact-free-energy": _run_exact_free_energy,
    "second-moment": _run_second_moment,
    "uncentered-ratio": _run_uncentered_ratio,
    "rate-gap": _run_rate_gap,
    "kl-check": _run_kl_check,
    "ldp-check": _run_ldp_check,
    "shell-count": _run_shell_count,
    "gauge-check": _run_gauge_check,
    "moment-check": _run_moment_check,
    "tail-bound": _run_tail_bound,
    "mc-free-energy": _run_mc_free_energy,
}


def rows_for_spec(spec: ExperimentSpec):
    """Dispatch a validated spec to its handler (pure; no output I/O)."""
    spec.validate()
    return _HANDLERS[spec.command](spec)


# ---------------------------------------------------------------------------
# Output


def render_output(spec: ExperimentSpec, columns, rows) -> str:
    if spec.fmt == "json":
        payload = {
            "meta": {"tool": "pottsglass", "version": __version__, "seed": spec.seed,
                     "spec": json.loads(spec.to_json())},
            "rows": [
                {c: (None if isinstance(v, float) and math.isnan(v) else v)
                 for c, v in zip(columns, row)}
                for row in rows
            ],
        }
        return json.dumps(payload, sort_keys=True, indent=2, default=_fmt) + "\n"
    lines = [
        f"# pottsglass {__version__}",
        f"# seed: {spec.seed}",
        f"# spec: {spec.to_json()}",
        ",".join(columns),
    ]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def read_spec(path: str) -> ExperimentSpec:
    """Recover the embedded spec from an output file (CSV or JSON)."""
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        return ExperimentSpec.from_json(json.dumps(json.loads(text)["meta"]["spec"]))
    for line in text.splitlines():
        if line.startswith("# spec: "):
            return ExperimentSpec.from_json(line[len("# spec: "):])
    raise ValueError(f"no spec header found in {path}")


def _write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _output_path(spec: ExperimentSpec) -> str | None:
    if spec.out:
        return spec.out
    outdir = os.environ.get("POTTSGLASS_OUTDIR")
    if outdir:
        return os.path.join(outdir, f"{spec.command}.{spec.fmt}")
    return None


# ---------------------------------------------------------------------------
# Argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="root seed (Philox key)")
    p.add_argument("--out", type=str, default=None, help="output file (default: $POTTSGLASS_OUTDIR or stdout)")
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1,
                   help="replica-level parallelism; results are worker-count invariant")
    p.add_argument("--cap", type=int, default=20_000_000, help="exact-enumeration state cap")


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _beta_value(text: str) -> float:
    return math.inf if text.lower() in ("inf", "infinity") else float(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pottsglass", description=__doc__)
    parser.add_argument("--version", action="version", version=f"pottsglass {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("thresholds", help="closed-form threshold table per color count")
    p.add_argument("--kappa-max", type=int, default=100)
    _add_common(p)

    p = sub.add_parser("exact-free-energy", help="per-replica exact quenched free energies")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(6,))
    p.add_argument("--beta", type=_float_list, default=(1.0,))
    p.add_argument("--sector", choices=("all", "balanced"), default="balanced")
    p.add_argument("--kind", choices=("raw", "centered"), default="centered")
    p.add_argument("--replicas", type=int, default=8)
    _add_common(p)

    p = sub.add_parser("second-moment", help="exact centered balanced second-moment ratio")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(3, 6, 9))
    p.add_argument("--beta", type=_float_list, default=(1.0,))
    _add_common(p)

    p = sub.add_parser("uncentered-ratio", help="raw-Hamiltonian moment ratio and its divergence floor")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(3, 6, 9))
    p.add_argument("--beta", type=_float_list, default=(1.0,))
    p.add_argument("--sector", choices=("all", "balanced"), default="all")
    _add_common(p)

    p = sub.add_parser("rate-gap", help="constrained minimum of the shell rate objective")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--beta", type=_float_list, default=(1.0,))
    p.add_argument("--delta", type=float, default=0.01)
    _add_common(p)

    p = sub.add_parser("kl-check", help="randomized sweep of the local KL expansion bound")
    p.add_argument("--trials", type=int, default=10000)
    _add_common(p)

    p = sub.add_parser("ldp-check", help="exact vs Stirling-asymptotic table log-probability")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(9, 18, 27, 36))
    _add_common(p)

    p = sub.add_parser("shell-count", help="admissible-table counts per Frobenius shell")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(6, 9, 12))
    _add_common(p)

    p = sub.add_parser("gauge-check", help="two-color gauge antisymmetry over random cases")
    p.add_argument("--n", type=_int_list, default=(6,))
    p.add_argument("--beta", type=_beta_value, default=1.0)
    p.add_argument("--trials", type=int, default=1000)
    _add_common(p)

    p = sub.add_parser("moment-check", help="two-color magnetization moments vs closed-form bounds")
    p.add_argument("--n", type=_int_list, default=(4, 8))
    p.add_argument("--beta", type=_beta_value, default=1.0)
    p.add_argument("--m", dest="moments", type=_int_list, default=(1, 2, 4))
    p.add_argument("--replicas", type=int, default=200)
    _add_common(p)

    p = sub.add_parser("tail-bound", help="magnetization tail estimates vs 2 exp(-eps^2 n)")
    p.add_argument("--kappa", type=int, default=2)
    p.add_argument("--n", type=_int_list, default=(8,))
    p.add_argument("--beta", type=_beta_value, default=1.0)
    p.add_argument("--epsilon", type=_float_list, default=(0.25, 0.5))
    p.add_argument("--replicas", type=int, default=64)
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=500)
    p.add_argument("--thinning", type=int, default=4)
    p.add_argument("--ladder", type=_float_list, default=())
    _add_common(p)

    p = sub.add_parser("mc-free-energy", help="thermodynamic-integration free energy vs exact")
    p.add_argument("--kappa", type=int, default=3)
    p.add_argument("--n", type=_int_list, default=(6,))
    p.add_argument("--beta-max", dest="beta_max", type=float, default=1.0)
    p.add_argument("--n-grid", dest="n_grid", type=int, default=13)
    p.add_argument("--sector", choices=("all", "balanced"), default="balanced")
    p.add_argument("--kind", choices=("raw", "centered"), default="centered")
    p.add_argument("--sweeps", type=int, default=2000)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=500)
    _add_common(p)

    return parser


def _spec_from_args(args: argparse.Namespace) -> ExperimentSpec:
    payload = {k: v for k, v in vars(args).items() if v is not None}
    payload.pop("version", None)
    allowed = set(ExperimentSpec.__dataclass_fields__)
    return ExperimentSpec(**{k: v for k, v in payload.items() if k in allowed})


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        spec = _spec_from_args(args)
        columns, rows = rows_for_spec(spec)
    except (ValidationError, core.DivisibilityError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except (core.EnumerationCapError, core.SectorError, ValueError, RuntimeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    text = render_output(spec, columns, rows)
    path = _output_path(spec)
    if path is None:
        sys.stdout.write(text)
    else:
        _write_atomic(path, text)
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
