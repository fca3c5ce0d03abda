"""Command-line entry point ``eotlab``.

Subcommands: ``rates``, ``run``, ``oracle``, ``verify`` and
``coupling-check``.  Exit codes: 0 success, 1 assertion failure,
2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from . import experiment as E
from .config import ConfigError, parse_config
from .coupling import randomized_suite
from .oracle import oracle_profile_check, schrodinger_residual, solve_gaussian
from .rates import MU, NU

EXIT_OK, EXIT_ASSERT, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _emit(text: str, out: str | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.suffix == "":
        path.mkdir(parents=True, exist_ok=True)
        path = path / name
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def rates_table(cert, n_rows: int) -> str:
    """Aligned text table of the rate sequences."""
    head = f"{'k':>4} {'gamma_mu':>14} {'gamma_nu':>14} {'hat_mu':>14} {'hat_nu':>14} {'product':>14}"
    lines = [head]
    for k in range(n_rows):
        lines.append(
            f"{k:>4d} {cert.gamma(MU, k):>14.8g} {cert.gamma(NU, k):>14.8g} "
            f"{cert.hat(MU, k):>14.8g} {cert.hat(NU, k):>14.8g} {cert.product(k + 1):>14.8g}"
        )
    lines.append(
        f"rho={cert.product_rho:.8g} certified={cert.contraction_certified} "
        f"pointwise_rho={cert.pointwise_rho:.8g} certified={cert.pointwise_certified} A={cert.A:.8g} B={cert.B:.8g}"
    )
    return "\n".join(lines) + "\n"


def cmd_rates(args) -> int:
    cfg = parse_config(args.config)
    setup = E.prepare(cfg)
    doc = {
        "certificate": setup.certificate.to_dict(),
        "rate_params": E.rate_params_to_dict(setup.params),
        "sufficient_T": E.sufficient_T(setup.params),
        "reference": setup.reference.summary(),
    }
    _emit(E.dumps(doc) + "\n", args.out, "rates.json")
    if args.table:
        sys.stderr.write(rates_table(setup.certificate, min(cfg.max_iters, 10)))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    result = E.run(cfg)
    csv_path, cert_path = E.write_run(result, args.out or cfg.output_path)
    print(f"{result.iterations} iterations; wrote {csv_path} and {cert_path}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    cfg = parse_config(args.config)
    if not cfg.both_gaussian:
        raise ConfigError("the oracle needs both marginals Gaussian")
    pm, pn = cfg.family_mu.params, cfg.family_nu.params
    sol = solve_gaussian(pm["mean"], pm["variance"], pn["mean"], pn["variance"], cfg.T)
    setup_cert = E.certify(E.RateParams.from_marginals(cfg.family_mu, cfg.family_nu, cfg.T), 2, sol.b_phi, sol.b_psi)
    doc = {
        "oracle": sol.to_dict(),
        "plan_covariance": sol.plan_covariance().tolist(),
        "schrodinger_residual": schrodinger_residual(sol),
        "profile_check": oracle_profile_check(sol, setup_cert.alpha_phi_star, setup_cert.alpha_psi_star),
    }
    _emit(E.dumps(doc) + "\n", args.out, "oracle.json")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        rep = E.verify_files(args.csv, args.certificate)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read run files: {exc}") from exc
    total = sum(rep.checked.values())
    for v in rep.advisories:
        print(f"advisory: {v}")
    if rep.ok:
        print(f"all {total} checks passed across {len(rep.checked)} assertions")
        return EXIT_OK
    for name in rep.violated():
        bad = [v for v in rep.violations if v.assertion == name]
        print(f"VIOLATED {name}: {len(bad)} row(s); first: {bad[0]}")
    return EXIT_ASSERT


def cmd_coupling_check(args) -> int:
    cfg = parse_config(args.config)
    cases = randomized_suite(cfg.n_cases, cfg.seed, cfg.n_nodes)
    setup = E.prepare(cfg)
    probes = E.conditional_coupling_sweep(setup, n_max=min(10, cfg.max_iters))
    lines = ["kind,index,n,x,lhs,rhs,slack,passed"]
    for c in cases:
        lines.append(f"pair,{c.index},,,{c.lhs:.17g},{c.rhs:.17g},{c.slack:.17g},{int(c.passed)}")
    for i, p in enumerate(probes):
        lines.append(f"conditional,{i},{p.n},{p.x:.17g},{p.lhs:.17g},{p.rhs:.17g},{p.rhs - p.lhs:.17g},{int(p.passed)}")
    _emit("\n".join(lines) + "\n", args.out, "coupling.csv")
    n_bad = sum(not c.passed for c in cases) + sum(not p.passed for p in probes)
    print(f"{len(cases)} pair cases, {len(probes)} conditional probes, {n_bad} failures", file=sys.stderr)
    return EXIT_OK if n_bad == 0 else EXIT_ASSERT


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eotlab", description="Certified Sinkhorn rates for one-dimensional entropic OT.")
    sub = ap.add_subparsers(dest="command", required=True)

    def with_config(name, func, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", required=True, help="JSON config file or inline JSON")
        sp.add_argument("--out", help="output file or directory")
        sp.set_defaults(func=func)
        return sp

    with_config("rates", cmd_rates, "certified rate constants as JSON").add_argument(
        "--table", action="store_true", help="also print an aligned table to stderr"
    )
    with_config("run", cmd_run, "diagnostic Sinkhorn run: history CSV and certificate JSON")
    with_config("oracle", cmd_oracle, "closed-form Gaussian potentials")
    with_config("coupling-check", cmd_coupling_check, "coupling inequality suites as CSV")
    sp = sub.add_parser("verify", help="re-check every bound on a recorded run")
    sp.add_argument("csv", help="history CSV")
    sp.add_argument("certificate", help="certificate JSON")
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    threads = os.environ.get("EOTLAB_THREADS")
    try:
        limit = threadpool_limits(int(threads)) if threads else nullcontext()
    except ValueError:
        print("EOTLAB_THREADS must be an integer", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with limit:
            return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (E.NumericalFailure, FloatingPointError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
