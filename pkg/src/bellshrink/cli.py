"""Command-line entry point.

Subcommands: fit, estimate, theory, simulate, bootstrap.  Exit codes:
0 success, 1 usage error (bad flags, missing files, malformed config),
2 numerical failure (non-convergence, singular systems, bad data values).
Every failure prints a one-line machine-parseable `error: <category>: ...`
to stderr, followed by any longer detail.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np
from scipy.stats import chi2

from .application import (
    BootstrapConfig,
    DataFormatError,
    bootstrap_bre,
    load_dataset,
    model_comparison,
    write_bre_csv,
)
from .asymptotics import LocalAlternative, asymptotic_amse, asymptotic_bias
from .bell_glm import aic, fit
from .linalg import SingularMatrixError, spd_inverse, spd_solve
from .montecarlo import (
    ConvergenceError,
    SimConfig,
    run_simulation,
    write_curves_csv,
    write_table_csv,
)
from .shrinkage import compute_all, load_restriction

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

_DEFAULT_SEED = 0


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1
        raise UsageError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def _parse_floats(text: str, what: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _build_parser() -> _Parser:
    parser = _Parser(prog="bellshrink", description=__doc__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_data_flags(p):
        p.add_argument("--data", required=True, help="input CSV with a header row")
        p.add_argument("--response", required=True, help="name of the count response column")
        p.add_argument(
            "--covariates", required=True, help="comma-separated covariate column names"
        )

    p_fit = sub.add_parser("fit", help="fit the unrestricted regression")
    add_data_flags(p_fit)
    p_fit.add_argument("--out", help="write coefficient table CSV here")
    p_fit.set_defaults(func=_cmd_fit)

    p_est = sub.add_parser("estimate", help="compute the full estimator suite")
    add_data_flags(p_est)
    p_est.add_argument("--restriction", required=True, help="restriction file (H | h rows)")
    p_est.add_argument("--alpha", type=float, default=0.05, help="pretest level (default 0.05)")
    p_est.add_argument("--out", help="write estimator table CSV here")
    p_est.set_defaults(func=_cmd_estimate)

    p_th = sub.add_parser("theory", help="asymptotic bias and AMSE-trace curves")
    p_th.add_argument("--restriction", required=True, help="restriction file; h entries ignored")
    p_th.add_argument("--fisher", help="CSV of the k x k information limit (default identity)")
    p_th.add_argument("--alpha", type=float, default=0.05, help="pretest level (default 0.05)")
    p_th.add_argument("--gamma", help="drift vector, comma-separated (scalar broadcasts)")
    p_th.add_argument("--delta-grid", dest="delta_grid", help="comma-separated noncentralities")
    p_th.add_argument("--direction", help="drift direction for --delta-grid (default first axis)")
    p_th.add_argument("--out", help="write the curve/point CSV here")
    p_th.set_defaults(func=_cmd_theory)

    p_sim = sub.add_parser("simulate", help="run relative-efficiency experiments")
    p_sim.add_argument("--config", required=True, help="key-value experiment file")
    p_sim.add_argument("--seed", type=int, help="override the config seed")
    p_sim.add_argument("--threads", type=int, default=1, help="worker processes (default 1)")
    p_sim.add_argument("--out", required=True, help="write the results CSV here")
    p_sim.set_defaults(func=_cmd_simulate)

    p_boot = sub.add_parser("bootstrap", help="bootstrap relative efficiencies")
    add_data_flags(p_boot)
    p_boot.add_argument("--restriction", required=True, help="restriction file (H | h rows)")
    p_boot.add_argument("--alpha", type=float, default=0.05, help="pretest level (default 0.05)")
    p_boot.add_argument("--resample-size", dest="resample_size", type=int, default=40)
    p_boot.add_argument("--replications", type=int, default=1000)
    p_boot.add_argument("--seed", type=int, default=_DEFAULT_SEED)
    p_boot.add_argument("--out", help="write the BRE report CSV here")
    p_boot.set_defaults(func=_cmd_bootstrap)
    return parser


def _require_files(args) -> None:
    for flag in ("data", "restriction", "config", "fisher"):
        path = getattr(args, flag, None)
        if path is not None and not os.path.exists(path):
            raise UsageError(f"--{flag} file not found: {path}")


def _print_table(headers, rows) -> None:
    cells = [[str(c) for c in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    print("  ".join(h.ljust(w) for h, w in zip(headers, widths)))
    for row in cells:
        print("  ".join(c.ljust(w) for c, w in zip(row, widths)))


def _load(args):
    covs = [c.strip() for c in args.covariates.split(",") if c.strip()]
    if not covs:
        raise UsageError(f"--covariates must name at least one column, got {args.covariates!r}")
    return load_dataset(args.data, args.response, covs)


def _coef_names(summary) -> tuple[str, ...]:
    return ("intercept", *summary.covariate_columns)


def _cmd_fit(args) -> int:
    data, summary = _load(args)
    print(
        f"n = {summary.n_rows} rows; response mean {summary.response_mean:.6g}, "
        f"variance {summary.response_variance:.6g} "
        f"(overdispersion ratio {summary.overdispersion:.6g})"
    )
    model = fit(data)
    if not model.converged:
        raise ConvergenceError(f"fit did not converge in {model.n_iter} iterations")
    se = np.sqrt(np.diag(spd_inverse(model.fisher_info)))
    names = _coef_names(summary)
    _print_table(
        ["coefficient", "estimate", "se"],
        [[n, _fmt(b), _fmt(s)] for n, b, s in zip(names, model.beta, se)],
    )
    print(f"loglik = {_fmt(model.loglik)}")
    print(f"AIC = {_fmt(aic(model))}")
    if args.out:
        lines = ["coefficient,estimate,se"]
        lines += [f"{n},{_fmt(b)},{_fmt(s)}" for n, b, s in zip(names, model.beta, se)]
        _write_lines(args.out, lines)
    return EXIT_OK


def _estimator_table(est_set):
    rows = []
    for est in ("UN", "RE", "JSE", "PJSE", "PTE"):
        vec = getattr(est_set, est.lower())
        if vec is None:
            continue
        rows.append((est, vec))
    return rows


def _cmd_estimate(args) -> int:
    data, summary = _load(args)
    rest = load_restriction(args.restriction)
    model = fit(data)
    if not model.converged:
        raise ConvergenceError(f"fit did not converge in {model.n_iter} iterations")
    est_set = compute_all(model, rest, args.alpha)
    r = rest.n_restrictions
    p_value = float(chi2.sf(est_set.f_stat, r))
    names = _coef_names(summary)
    rows = _estimator_table(est_set)
    _print_table(
        ["estimator", *names],
        [[est, *(_fmt(v) for v in vec)] for est, vec in rows],
    )
    print(f"F_n = {_fmt(est_set.f_stat)} on {r} restriction(s), p-value = {_fmt(p_value)}")
    if r < 3:
        print("note: James-Stein estimators need at least 3 restrictions; skipped")
    if args.out:
        lines = ["estimator,coefficient,estimate,f_stat,p_value"]
        for est, vec in rows:
            for n, v in zip(names, vec):
                lines.append(f"{est},{n},{_fmt(v)},{_fmt(est_set.f_stat)},{_fmt(p_value)}")
        _write_lines(args.out, lines)
    return EXIT_OK


def _read_fisher(path, k: int) -> np.ndarray:
    mat = np.loadtxt(path, delimiter=",", ndmin=2)
    if mat.shape != (k, k):
        raise UsageError(f"--fisher must be a {k}x{k} matrix, got shape {mat.shape}")
    return mat


def _theory_estimators(r: int):
    return ("UN", "RE", "JSE", "PJSE", "PTE") if r >= 3 else ("UN", "RE", "PTE")


def _cmd_theory(args) -> int:
    rest = load_restriction(args.restriction)
    r, k = rest.H.shape
    fisher = _read_fisher(args.fisher, k) if args.fisher else np.eye(k)
    if (args.gamma is None) == (args.delta_grid is None):
        raise UsageError("theory needs exactly one of --gamma or --delta-grid")
    ests = _theory_estimators(r)
    if args.gamma is not None:
        gamma = _parse_floats(args.gamma, "--gamma")
        if len(gamma) == 1:
            gamma = gamma * r
        if len(gamma) != r:
            raise UsageError(f"--gamma needs {r} entries (or one to broadcast), got {len(gamma)}")
        la = LocalAlternative(gamma=np.array(gamma), fisher=fisher, restriction=rest)
        lines = ["estimator,component,bias,amse_diag,amse_trace"]
        table = []
        for est in ests:
            bias = np.zeros(k) if est == "UN" else asymptotic_bias(est, la, alpha=args.alpha)
            amse = asymptotic_amse(est, la, alpha=args.alpha)
            tr = float(np.trace(amse))
            table.append([est, _fmt(la.delta), _fmt(float(bias @ bias) ** 0.5), _fmt(tr)])
            for i in range(k):
                lines.append(f"{est},{i},{_fmt(bias[i])},{_fmt(amse[i, i])},{_fmt(tr)}")
        _print_table(["estimator", "delta", "bias_norm", "amse_trace"], table)
        if args.out:
            _write_lines(args.out, lines)
        return EXIT_OK
    deltas = _parse_floats(args.delta_grid, "--delta-grid")
    if any(d < 0 for d in deltas):
        raise UsageError("--delta-grid entries must be >= 0")
    direction = np.zeros(r)
    direction[0] = 1.0
    if args.direction:
        vals = _parse_floats(args.direction, "--direction")
        if len(vals) != r:
            raise UsageError(f"--direction needs {r} entries, got {len(vals)}")
        direction = np.array(vals)
        if not np.any(direction != 0.0):
            raise UsageError("--direction must be a nonzero vector")
    # Scale the direction so the stated delta is the realized noncentrality.
    m = rest.H @ spd_solve(fisher, rest.H.T)
    unit = direction / np.sqrt(float(direction @ spd_solve(m, direction)))
    lines = ["delta,estimator,bias_norm,amse_trace"]
    for d in deltas:
        la = LocalAlternative(gamma=np.sqrt(d) * unit, fisher=fisher, restriction=rest)
        for est in ests:
            bias = np.zeros(k) if est == "UN" else asymptotic_bias(est, la, alpha=args.alpha)
            amse = asymptotic_amse(est, la, alpha=args.alpha)
            lines.append(
                f"{_fmt(d)},{est},{_fmt(float(np.sqrt(bias @ bias)))},"
                f"{_fmt(float(np.trace(amse)))}"
            )
    for line in lines[: min(len(lines), 12)]:
        print(line)
    if len(lines) > 12:
        print(f"... {len(lines) - 1} rows total")
    if args.out:
        _write_lines(args.out, lines)
    return EXIT_OK


_SIM_KEYS = {"n", "p", "tau", "replications", "alpha", "seed", "fixed_design"}


def _parse_sim_config(path) -> dict:
    values: dict = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, _, val = line.partition("=")
            key = key.strip().lower()
            val = val.strip()
            if key not in _SIM_KEYS:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r} (known: {sorted(_SIM_KEYS)})")
            values[key] = (val, lineno)
    for required in ("n", "p", "tau"):
        if required not in values:
            raise UsageError(f"{path}: missing required key {required!r}")

    def ints(key):
        val, lineno = values[key]
        try:
            return [int(tok) for tok in val.split(",") if tok.strip()]
        except ValueError:
            raise UsageError(f"{path}:{lineno}: {key} must be comma-separated integers") from None

    out = {"n": ints("n"), "p": ints("p")}
    val, lineno = values["tau"]
    try:
        out["tau"] = [float(tok) for tok in val.split(",") if tok.strip()]
    except ValueError:
        raise UsageError(f"{path}:{lineno}: tau must be comma-separated numbers") from None
    for key, cast in (("replications", int), ("alpha", float), ("seed", int)):
        if key in values:
            val, lineno = values[key]
            try:
                out[key] = cast(val)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: {key} must be a {cast.__name__}") from None
    if "fixed_design" in values:
        val, lineno = values["fixed_design"]
        low = val.lower()
        if low not in ("true", "false", "0", "1", "yes", "no"):
            raise UsageError(f"{path}:{lineno}: fixed_design must be a boolean")
        out["fixed_design"] = low in ("true", "1", "yes")
    return out


def _cmd_simulate(args) -> int:
    raw = _parse_sim_config(args.config)
    seed = args.seed if args.seed is not None else raw.get("seed", _DEFAULT_SEED)
    grid = []
    for n in raw["n"]:
        for p in raw["p"]:
            cfg = SimConfig(
                n=n,
                p=p,
                tau_grid=tuple(raw["tau"]),
                replications=raw.get("replications", 1000),
                alpha=raw.get("alpha", 0.05),
                seed=seed,
                fixed_design=raw.get("fixed_design", False),
            )
            result = run_simulation(cfg, threads=max(1, args.threads))
            grid.extend(result.grid)
            for gp in result.grid:
                print(
                    f"(n={gp.n}, p={gp.p}, tau={gp.tau:g}): "
                    + "  ".join(f"SRE[{e}]={gp.sre[e]:.4f}" for e in ("RE", "JSE", "PJSE", "PTE"))
                    + f"  retries={gp.n_retry}"
                )
    write_table_csv(grid, args.out)
    stem, ext = os.path.splitext(args.out)
    curves_path = f"{stem}_curves{ext or '.csv'}"
    write_curves_csv(grid, curves_path)
    print(f"wrote {len(grid) * 4} rows to {args.out} and curves to {curves_path}")
    return EXIT_OK


def _cmd_bootstrap(args) -> int:
    data, summary = _load(args)
    rest = load_restriction(args.restriction)
    print(
        f"n = {summary.n_rows} rows; overdispersion ratio {summary.overdispersion:.6g}"
    )
    comparison = model_comparison(data, rest, args.alpha)
    print(
        f"AIC full = {_fmt(comparison['aic_full'])}, "
        f"restricted = {_fmt(comparison['aic_restricted'])}; "
        f"F_n = {_fmt(comparison['f_stat'])}"
    )
    cfg = BootstrapConfig(
        restriction=rest,
        resample_size=args.resample_size,
        replications=args.replications,
        alpha=args.alpha,
        seed=args.seed,
    )
    report = bootstrap_bre(data, cfg, coef_names=_coef_names(summary))
    _print_table(
        ["estimator", "bre", *report.coef_names],
        [
            [row.name, _fmt(row.bre), *(f"{b:.6g} ({s:.3g})" for b, s in zip(row.coefficients, row.se))]
            for row in report.rows
        ],
    )
    print(f"failed refits: {report.n_retry} of {report.replications} replications")
    if args.out:
        write_bre_csv(report, args.out)
    return EXIT_OK


def _write_lines(path, lines) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def main(argv=None) -> int:
    try:
        parser = _build_parser()
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help and friends
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        _require_files(args)
        return args.func(args)
    except UsageError as exc:
        print(f"error: usage: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"error: data: {_first_line(exc)}", file=sys.stderr)
        _detail(exc)
        return EXIT_NUMERICAL
    except (ConvergenceError, SingularMatrixError) as exc:
        print(f"error: numerical: {_first_line(exc)}", file=sys.stderr)
        _detail(exc)
        return EXIT_NUMERICAL
    except (ValueError, RuntimeError, np.linalg.LinAlgError, OverflowError) as exc:
        print(f"error: numerical: {_first_line(exc)}", file=sys.stderr)
        _detail(exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: io: {_first_line(exc)}", file=sys.stderr)
        return EXIT_NUMERICAL


def _first_line(exc) -> str:
    text = str(exc) or exc.__class__.__name__
    return text.splitlines()[0]


def _detail(exc) -> None:
    text = str(exc)
    if "\n" in text:
        print(text, file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
