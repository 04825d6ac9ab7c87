"""Command-line front end.

Subcommands: ``analyze`` (bound sweep for one matrix), ``sweep-run``
(per-generation best bounds for a run directory), ``simulate`` (Monte Carlo
runtime estimation, optionally checked against the bound), ``genpop``
(fixture generation), and ``verify`` (built-in self checks).

Exit codes: 0 success, 1 property/bound violation, 2 input error, 3 clique
budget exhausted under --require-exact.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import bounds, engine, popgen, simulate
from .core import (
    DedupProfile,
    ErrorMatrix,
    LossKind,
    MatrixError,
    RngStream,
    deduplicate,
    identity_profile,
    read_matrix_csv,
    write_matrix_csv,
)
from .diversity import epsilon_cluster_similarity, similarity_bruteforce

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3

SEED_ENV = "LEXIBOUND_SEED"
DEFAULT_TRIALS = 10_000
DEFAULT_BUDGET = 10_000_000
DEFAULT_GRID = "0.05:0.60:0.05"

_GEN_FILE = re.compile(r"^gen_(\d+)\.csv$")


def _fail(message: str) -> None:
    print(f"lexibound: error: {message}", file=sys.stderr)


def _resolve_seed(value) -> int:
    if value is not None:
        return value
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from exc


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_profile(path: str, delta) -> tuple[ErrorMatrix, DedupProfile, float]:
    """Read a matrix and build its analysis profile.

    Discrete matrices are deduplicated (delta forced to 0); real ones keep
    every row and require an explicit --delta.
    """
    matrix = read_matrix_csv(path)
    if matrix.kind is LossKind.DISCRETE:
        if delta not in (None, 0, 0.0):
            raise ValueError("--delta must be omitted or 0 for discrete matrices")
        return matrix, deduplicate(matrix), 0.0
    if delta is None:
        raise ValueError("--delta is required for real-valued matrices")
    if delta < 0:
        raise ValueError(f"--delta must be >= 0, got {delta}")
    return matrix, identity_profile(matrix), float(delta)


def _epsilon_grid(args):
    if getattr(args, "epsilon", None) is not None:
        return (bounds.exact_fraction(args.epsilon),)
    return bounds.parse_epsilon_grid(args.epsilon_grid)


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def cmd_analyze(args) -> int:
    try:
        matrix, profile, delta = _load_profile(args.matrix, args.delta)
        grid = _epsilon_grid(args)
        reports = bounds.sweep(profile, grid, delta, args.budget)
    except (MatrixError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_INPUT
    print(
        f"# {args.matrix}: kind={matrix.kind.value} n_original={matrix.n_individuals} "
        f"n_unique={profile.n_unique} cases={matrix.n_cases}",
        file=sys.stderr,
    )
    inexact = [r.epsilon for r in reports if not r.exact_k]
    if inexact and args.require_exact:
        _fail(f"clique budget exhausted at epsilon {inexact} (re-run with a larger --budget)")
        return EXIT_BUDGET
    text = bounds.reports_to_json(reports) if args.format == "json" else bounds.reports_to_csv(reports)
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep-run
# ---------------------------------------------------------------------------


def _scan_run_directory(path: Path) -> list[tuple[int, Path]]:
    if not path.is_dir():
        raise ValueError(f"not a directory: {path}")
    found = []
    for entry in path.iterdir():
        match = _GEN_FILE.match(entry.name)
        if match:
            found.append((int(match.group(1)), entry))
    if not found:
        raise ValueError(f"no gen_<index>.csv files in {path}")
    found.sort()
    return found


def cmd_sweep_run(args) -> int:
    try:
        generations = _scan_run_directory(Path(args.run_directory))
        grid = _epsilon_grid(args)
    except (MatrixError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_INPUT

    rows = []
    n_cases = None
    any_inexact = False
    for index, file_path in generations:
        try:
            matrix, profile, delta = _load_profile(str(file_path), args.delta)
            if n_cases is None:
                n_cases = matrix.n_cases
            elif matrix.n_cases != n_cases:
                raise ValueError(
                    f"{file_path}: {matrix.n_cases} cases, earlier generations had {n_cases}"
                )
            reports = bounds.sweep(profile, grid, delta, args.budget)
        except (MatrixError, ValueError) as exc:
            _fail(str(exc))
            return EXIT_INPUT
        any_inexact = any_inexact or any(not r.exact_k for r in reports)
        best = bounds.best_epsilon(reports)
        rows.append(
            {
                "generation": index,
                "epsilon": best.epsilon,
                "k": best.k,
                "total": best.total,
                "worst_case": best.worst_case,
                "ratio": best.ratio,
            }
        )
    if any_inexact and args.require_exact:
        _fail("clique budget exhausted in at least one generation")
        return EXIT_BUDGET

    if args.format == "json":
        text = json.dumps(rows, indent=2) + "\n"
    else:
        header = "generation,epsilon,k,total,worst_case,ratio"
        lines = [header]
        for row in rows:
            lines.append(
                f"{row['generation']},{row['epsilon']!r},{row['k']},"
                f"{row['total']!r},{row['worst_case']!r},{row['ratio']!r}"
            )
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    try:
        seed = _resolve_seed(args.seed)
        matrix = read_matrix_csv(args.matrix)
        if matrix.kind is LossKind.REAL:
            if not args.binarize_mad:
                raise ValueError(
                    "selection needs discrete losses; pass --binarize-mad to apply "
                    "the static-epsilon transform with per-case MAD thresholds"
                )
            matrix = engine.static_epsilon_binarize(matrix, engine.mad_thresholds(matrix))
        profile = deduplicate(matrix)
        stats = simulate.estimate_runtime(profile, args.trials, RngStream(seed))
    except (MatrixError, ValueError) as exc:
        _fail(str(exc))
        return EXIT_INPUT

    payload = {
        "matrix": args.matrix,
        "seed": seed,
        "n_original": matrix.n_individuals,
        "n_unique": profile.n_unique,
        "cases": matrix.n_cases,
        "trials": stats.trials,
        "mean_evaluations": stats.mean_evaluations,
        "std_error": stats.std_error,
        "min_evaluations": stats.min_evaluations,
        "max_evaluations": stats.max_evaluations,
        "mean_iterations": stats.mean_iterations,
        "pool_size_profile": list(stats.pool_size_profile),
    }

    code = EXIT_OK
    if args.check_bound:
        try:
            grid = _epsilon_grid(args)
            reports = bounds.sweep(profile, grid, 0.0, args.budget)
        except ValueError as exc:
            _fail(str(exc))
            return EXIT_INPUT
        margin = stats.mean_evaluations + 3.0 * stats.std_error
        checks = []
        violations = []
        for report in reports:
            entry = {
                "epsilon": report.epsilon,
                "k": report.k,
                "exact_k": report.exact_k,
                "bound": report.total,
                "mean_plus_3se": margin,
                "satisfied": bool(margin <= report.total) if report.exact_k else None,
            }
            checks.append(entry)
            if report.exact_k and margin > report.total:
                violations.append(report.epsilon)
        payload["bound_checks"] = checks
        if violations:
            _fail(f"bound violated at epsilon {violations}: mean + 3*SE = {margin}")
            code = EXIT_VIOLATION
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return code


# ---------------------------------------------------------------------------
# genpop
# ---------------------------------------------------------------------------


def cmd_genpop(args) -> int:
    try:
        if args.spec is not None:
            spec_path = Path(args.spec)
            text = spec_path.read_text() if spec_path.exists() else args.spec
            spec = popgen.GenSpec.from_json(text)
        else:
            if args.kind is None or args.n is None or args.c is None:
                raise ValueError("either --spec or all of --kind/--n/--c are required")
            params = {}
            if args.levels is not None:
                params["levels"] = args.levels
            if args.clusters is not None:
                params["clusters"] = args.clusters
            if args.spread is not None:
                params["spread"] = args.spread
            spec = popgen.GenSpec(
                kind=popgen.GenKind(args.kind),
                n=args.n,
                c=args.c,
                seed=_resolve_seed(args.seed),
                params=params,
            )
        matrix = popgen.generate(spec)
    except (MatrixError, ValueError, popgen.GenerationError) as exc:
        _fail(str(exc))
        return EXIT_INPUT
    write_matrix_csv(matrix, args.out, header=True)
    print(
        f"# wrote {matrix.n_individuals}x{matrix.n_cases} {spec.kind.value} matrix to {args.out}",
        file=sys.stderr,
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _tv_distance(a, b) -> float:
    return 0.5 * float(np.abs(np.asarray(a) - np.asarray(b)).sum())


def _matrix(rows) -> ErrorMatrix:
    return ErrorMatrix(np.array(rows, dtype=np.float64), kind=LossKind.DISCRETE)


def _small_profiles(seed: int) -> list[tuple[str, DedupProfile]]:
    profiles = [
        ("dominated-triple", deduplicate(_matrix([[0, 1], [1, 0], [0, 0]]))),
        ("symmetric-pair", deduplicate(_matrix([[0, 1], [1, 0]]))),
        ("clone-pair", deduplicate(_matrix([[0, 1], [0, 1], [1, 0]]))),
        ("adversarial-4x5", deduplicate(popgen.gen_adversarial_single_case(4, 5))),
        ("log-binary-4x3", deduplicate(popgen.gen_log_binary(4, 3))),
    ]
    for i, (n, c, levels) in enumerate([(5, 4, 3), (6, 6, 2)]):
        matrix = popgen.gen_random_uniform(n, c, levels, RngStream(seed, 90 + i))
        profiles.append((f"random-{n}x{c}", deduplicate(matrix)))
    return profiles


def _check_oracle_equivalence(seed: int, trials: int, tolerance: float) -> tuple[bool, str]:
    worst = 0.0
    worst_name = ""
    for i, (name, profile) in enumerate(_small_profiles(seed)):
        exact = simulate.oracle_distribution(profile)
        sampled = simulate.selection_distribution(profile, trials, RngStream(seed).substream(i))
        tv = _tv_distance(exact, sampled)
        if tv > worst:
            worst, worst_name = tv, name
    ok = worst <= tolerance
    return ok, f"worst TV {worst:.4f} on {worst_name} (tolerance {tolerance}, {trials} trials)"


def _check_definition_equivalence(seed: int) -> tuple[bool, str]:
    grid = bounds.default_epsilon_grid()
    checked = 0
    for i in range(20):
        n = 4 + (i % 7)
        c = 5 + (i % 4)  # keeps levels^c comfortably above n
        levels = 2 + (i % 2)
        profile = deduplicate(popgen.gen_random_uniform(n, c, levels, RngStream(seed, 300 + i)))
        for eps in grid:
            direct = similarity_bruteforce(profile, eps)
            via_clique = epsilon_cluster_similarity(profile, eps).k
            if direct != via_clique:
                return False, (
                    f"set-form k={direct} vs clique-form k={via_clique} at eps={eps} "
                    f"on random {n}x{c} profile {i}"
                )
            checked += 1
    return True, f"{checked} (profile, epsilon) points agree"


def _check_monotonicity(seed: int) -> tuple[bool, str]:
    fixtures = [
        ("two-cluster-6x10", deduplicate(popgen.gen_two_cluster(6, 10))),
        ("adversarial-6x10", deduplicate(popgen.gen_adversarial_single_case(6, 10))),
        ("random-8x8", deduplicate(popgen.gen_random_uniform(8, 8, 2, RngStream(seed, 700)))),
    ]
    for name, profile in fixtures:
        reports = bounds.sweep(profile)
        for a, b in zip(reports, reports[1:]):
            if b.k < a.k:
                return False, f"k decreased from {a.k} to {b.k} on {name}"
            if b.term_pool >= a.term_pool:
                return False, f"pool term not strictly decreasing on {name}"
            if b.term_cases < a.term_cases:
                return False, f"case term decreased on {name}"
    return True, f"{len(fixtures)} fixtures over the default grid"


def _check_drift_inequality(seed: int, trials: int) -> tuple[bool, str]:
    profile = deduplicate(popgen.gen_clustered(24, 40, 3, 0.05, RngStream(seed, 800)))
    eps = 0.2
    result = epsilon_cluster_similarity(profile, eps)
    if not result.exact:
        return False, "clique budget exhausted on the drift fixture"
    table = simulate.drift_check(profile, eps, result.k, trials, RngStream(seed, 801))
    flagged = [e.pool_size for e in table if e.flagged]
    ok = not flagged
    return ok, (
        f"k={result.k}, {len(table)} pool sizes >= {2 * result.k} checked, flagged: {flagged or 'none'}"
    )


def _check_bound_validity(seed: int, trials: int) -> tuple[bool, str]:
    fixtures = [
        ("adversarial-30x30", deduplicate(popgen.gen_adversarial_single_case(30, 30))),
        ("two-cluster-12x20", deduplicate(popgen.gen_two_cluster(12, 20))),
        ("log-binary-16x24", deduplicate(popgen.gen_log_binary(16, 24))),
        ("random-30x30", deduplicate(popgen.gen_random_uniform(30, 30, 3, RngStream(seed, 900)))),
        ("clustered-24x40", deduplicate(popgen.gen_clustered(24, 40, 3, 0.05, RngStream(seed, 901)))),
    ]
    points = 0
    for i, (name, profile) in enumerate(fixtures):
        stats = simulate.estimate_runtime(profile, trials, RngStream(seed, 910 + i))
        margin = stats.mean_evaluations + 3.0 * stats.std_error
        for report in bounds.sweep(profile):
            if report.exact_k:
                points += 1
                if margin > report.total:
                    return False, (
                        f"mean + 3*SE = {margin:.1f} exceeds bound {report.total:.1f} "
                        f"at eps={report.epsilon} on {name}"
                    )
    return True, f"{points} exact-k grid points satisfied"


def cmd_verify(args) -> int:
    try:
        seed = _resolve_seed(args.seed)
    except ValueError as exc:
        _fail(str(exc))
        return EXIT_INPUT

    if args.inject_fault == "elite-filter":
        engine._elite_slack = 1
        print("verify: injected elite-filter fault (expect failures)", file=sys.stderr)

    if args.level == "fast":
        checks = [
            ("oracle-equivalence", lambda: _check_oracle_equivalence(seed, 20_000, 0.03)),
            ("definition-equivalence", lambda: _check_definition_equivalence(seed)),
            ("bound-monotonicity", lambda: _check_monotonicity(seed)),
        ]
    else:
        checks = [
            ("oracle-equivalence", lambda: _check_oracle_equivalence(seed, 100_000, 0.02)),
            ("definition-equivalence", lambda: _check_definition_equivalence(seed)),
            ("bound-monotonicity", lambda: _check_monotonicity(seed)),
            ("drift-inequality", lambda: _check_drift_inequality(seed, 10_000)),
            ("bound-validity", lambda: _check_bound_validity(seed, 10_000)),
        ]

    failed = []
    try:
        for name, run in checks:
            ok, detail = run()
            status = "PASS" if ok else "FAIL"
            print(f"verify {name}: {status} ({detail})")
            if not ok:
                failed.append(name)
    finally:
        engine._elite_slack = 0
    if failed:
        _fail(f"failing properties: {', '.join(failed)}")
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_grid_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--epsilon", help="single epsilon value (exact decimal, e.g. 0.25)")
    group.add_argument(
        "--epsilon-grid",
        default=DEFAULT_GRID,
        help=f"inclusive grid start:stop:step (default {DEFAULT_GRID})",
    )
    parser.add_argument("--delta", type=float, help="loss tolerance (required for real matrices)")
    parser.add_argument(
        "--budget",
        type=int,
        default=DEFAULT_BUDGET,
        help=f"clique search node budget (default {DEFAULT_BUDGET})",
    )
    parser.add_argument(
        "--require-exact",
        action="store_true",
        help="exit 3 instead of reporting bracketed k when the budget is exhausted",
    )


def _add_output_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--out", help="output file (default: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lexibound",
        description="Lexicase selection runtime bounds from population diversity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="bound sweep for one error matrix")
    p.add_argument("matrix", help="CSV error matrix")
    _add_grid_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("sweep-run", help="per-generation best bounds for a run directory")
    p.add_argument("run_directory", help="directory of gen_<index>.csv files")
    _add_grid_flags(p)
    _add_output_flags(p)
    p.set_defaults(func=cmd_sweep_run)

    p = sub.add_parser("simulate", help="Monte Carlo runtime estimation")
    p.add_argument("matrix", help="CSV error matrix")
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument(
        "--binarize-mad",
        action="store_true",
        help="binarize real losses with per-case MAD thresholds before selection",
    )
    p.add_argument("--check-bound", action="store_true", help="verify mean + 3*SE <= 4N/eps + 2kC")
    _add_grid_flags(p)
    p.add_argument("--out", help="output file (default: standard output)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("genpop", help="generate a fixture population")
    p.add_argument("--spec", help="GenSpec JSON (inline or a file path)")
    p.add_argument("--kind", choices=[k.value for k in popgen.GenKind])
    p.add_argument("--n", type=int, help="population size")
    p.add_argument("--c", type=int, help="number of cases")
    p.add_argument("--levels", type=int, help="loss levels (random_uniform)")
    p.add_argument("--clusters", type=int, help="cluster count (clustered)")
    p.add_argument("--spread", type=float, help="within-cluster spread fraction (clustered)")
    p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_genpop)

    p = sub.add_parser("verify", help="run the built-in self checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--seed", type=int, help=f"RNG seed (default ${SEED_ENV} or 0)")
    p.add_argument(
        "--inject-fault",
        choices=("elite-filter",),
        help="deliberately corrupt the elite comparison (negative control for the checks)",
    )
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
