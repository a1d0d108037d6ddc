"""Command-line front end: ``qdistill <subcommand> [flags]``.

Subcommands write CSV (header first, ``,`` separated, LF line endings) to
``--out`` or stdout.  Options may also come from ``--config FILE`` holding
``key = value`` lines; command-line flags win.  On failure a single line
``error: <kind>: <message>`` goes to stderr and the exit status is nonzero.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from contextlib import contextmanager
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from . import improve, oracle, protocols, states, zmod

EXIT_FAIL = 1
EXIT_USAGE = 2


class CLIError(Exception):
    def __init__(self, kind: str, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.kind = kind
        self.code = code


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


@contextmanager
def _sink(path: Optional[str]):
    if path in (None, "-"):
        yield sys.stdout
        return
    try:
        fh = open(path, "w", newline="", encoding="utf-8")
    except OSError as exc:
        raise CLIError("io", str(exc), EXIT_FAIL) from exc
    with fh:
        yield fh


def write_csv(path: Optional[str], header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    with _sink(path) as fh:
        fh.write(buf.getvalue())


def read_config(path: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out = {}
    try:
        lines = open(path, encoding="utf-8").read().splitlines()
    except OSError as exc:
        raise CLIError("io", str(exc), EXIT_FAIL) from exc
    for num, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CLIError("config", f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


# -- rates -------------------------------------------------------------------


def _f_grid(args) -> np.ndarray:
    if args.f_points < 2:
        raise CLIError("config", "--f-points must be >= 2")
    if not 0.0 <= args.f_start < args.f_stop <= 1.0:
        raise CLIError("config", "need 0 <= f-start < f-stop <= 1")
    return np.linspace(args.f_start, args.f_stop, args.f_points)


def _log2_int(d: int) -> Optional[int]:
    m = d.bit_length() - 1
    return m if d == 1 << m else None


def expand_strategies(d: int, tokens: Sequence[str], keep: str) -> list[tuple[str, object]]:
    """Turn strategy tokens into ``(column_stem, rate_function_of_f)`` pairs."""
    m = _log2_int(d)
    out = []
    for tok in tokens:
        tok = tok.strip()
        if not tok:
            continue
        name, _, arg = tok.partition(":")
        if name == "hashing":
            out.append(("hashing", lambda f: states.isotropic_hashing_rate(d, f)))
        elif name == "er":
            out.append(("er", lambda f: states.er_isotropic(d, f)))
        elif name == "recurrence":
            k = int(arg or 1)
            out.append((f"recurrence{k}_{keep}", lambda f, k=k: improve.recurrence_then_hash_rate(d, f, k, keep)))
        elif name == "subspace":
            try:
                part = improve.Partition(d, tuple(int(q) for q in arg.replace(",", "+").split("+")))
            except ValueError as exc:
                raise CLIError("config", f"bad partition {arg!r}: {exc}") from exc
            out.append((f"subspace_{'+'.join(map(str, part.blocks))}", lambda f, p=part: improve.subspace_rate(d, f, p)))
        elif name == "blocks":
            q = int(arg)
            try:
                part = improve.Partition.equal(d, q)
            except ValueError as exc:
                raise CLIError("config", str(exc)) from exc
            out.append((f"blocks{q}", lambda f, p=part: improve.subspace_rate(d, f, p)))
        elif name == "pow2":
            if m is None:
                raise CLIError("config", f"pow2 needs d a power of two, got {d}")
            for j in range(1, m):
                part = improve.Partition.equal(d, 2**j)
                out.append((f"blocks{2**j}", lambda f, p=part: improve.subspace_rate(d, f, p)))
        elif name == "envelope":
            fam = improve.power_of_two_partitions(d) if m is not None else improve.candidate_partitions(d)
            out.append(("envelope", lambda f, fam=fam: improve.subspace_envelope(d, f, fam)[0]))
        elif name == "qubit":
            if m is None:
                raise CLIError("config", f"qubit-level rate needs d a power of two, got {d}")
            out.append(("qubit", lambda f: improve.qubit_level_rate(m, f)))
        elif name == "best":
            out.append(("best", lambda f: improve.best_strategy_rate(d, f, keep=keep)[1]))
        else:
            raise CLIError("config", f"unknown strategy {tok!r}")
    return out


def cmd_rates(args) -> int:
    d = args.d
    if d < 2:
        raise CLIError("config", "--d must be >= 2")
    tokens = [t for t in args.strategies.split(",") if t.strip()]
    if args.partition:
        tokens.append("subspace:" + args.partition)
    if args.recurrence_k is not None:
        tokens.append(f"recurrence:{args.recurrence_k}")
    strategies = expand_strategies(d, tokens, args.keep)
    grid = _f_grid(args)
    scale = math.log2(d)
    header = ["f"]
    for stem, _ in strategies:
        header += [f"{stem}_bits", f"{stem}_norm"]
    rows = []
    for f in grid:
        row = [float(f)]
        for _, fn in strategies:
            r = float(fn(float(f)))
            row += [r, r / scale]
        rows.append(row)
    write_csv(args.out, header, rows)
    return 0


# -- simulate ----------------------------------------------------------------


def cmd_simulate(args) -> int:
    mode = args.mode
    if mode == "hashing-prime-power":
        if args.dprime is None:
            raise CLIError("config", "hashing-prime-power needs --dprime and --p")
        state = protocols.prime_power_distribution(args.dprime, args.p, args.f)
    else:
        state = states.isotropic(args.d, args.f)
    stats = protocols.simulate_identification(
        state,
        args.n,
        mode=mode,
        max_rounds=args.rounds,
        trials=args.trials,
        delta=args.delta,
        seed=args.seed,
        method=args.method,
        dprime=args.dprime if mode == "breeding-crossdim" else None,
        target=args.target,
    )
    rows = zip(stats.rounds, stats.success_prob, stats.mean_yield, stats.stderr, stats.singleton_prob)
    write_csv(
        args.out,
        ["rounds", "success_prob", "mean_yield_bits_per_copy", "stderr", "singleton_prob"],
        ([int(r), float(s), float(y), float(e), float(p)] for r, s, y, e, p in rows),
    )
    return 0


# -- lemma1 ------------------------------------------------------------------


def lemma1_table(d_list: Sequence[int], m_max: int) -> list[list]:
    rows = []
    for d in d_list:
        for m in range(1, m_max + 1):
            probs = []
            agree = True
            witness = ""
            for delta in zmod.iter_nonzero_vectors(m, d):
                p = zmod.collision_probability(delta, d, method="brute")
                agree &= p == zmod.collision_probability(delta, d, method="closed")
                if not witness and p > Fraction(1, d):
                    witness = "(" + " ".join(str(int(x)) for x in delta) + ")"
                probs.append(p)
            prime = zmod.is_prime(d)
            if prime:
                ok = all(p == Fraction(1, d) for p in probs)
                verdict = "pass" if ok and agree else "FAIL"
            else:
                verdict = ("counterexample" if witness else "no-counterexample") if agree else "FAIL"
            rows.append([d, m, prime, len(probs), str(min(probs)), str(max(probs)), witness, verdict])
    return rows


def cmd_lemma1(args) -> int:
    d_list = [int(x) for x in args.d_list.split(",") if x.strip()]
    rows = lemma1_table(d_list, args.m_max)
    write_csv(
        args.out,
        ["d", "m", "prime", "vectors", "min_probability", "max_probability", "witness", "verdict"],
        rows,
    )
    bad = [r for r in rows if r[-1] == "FAIL"]
    if bad:
        raise CLIError("lemma1", f"collision check failed for d={bad[0][0]} m={bad[0][1]}", EXIT_FAIL)
    return 0


# -- oracle-verify -----------------------------------------------------------


def _hashing_row(d: int) -> oracle.VerificationRow:
    n = 2
    failures = []
    count = 0
    for S in np.indices((d,) * (2 * n)).reshape(2 * n, -1).T:
        for row in np.indices((d,) * (2 * n - 1)).reshape(2 * n - 1, -1).T:
            M, g = row[:-1], int(row[-1])
            count += 1
            plan = protocols.MeasurementPlan(zmod.IndexVector(M, d), g)
            Sv = zmod.IndexVector(S, d)
            try:
                out, rest = oracle.hashing_round_dense(d, S, M, g)
            except oracle.OracleMismatch as exc:
                failures.append(exc.indices)
                continue
            if out != protocols.hashing_outcome(Sv, plan) or rest != protocols.hashing_update(Sv, plan).tolist():
                failures.append((tuple(S), tuple(M), g))
    detail = f"first failure {failures[0]}" if failures else ""
    return oracle.VerificationRow("hashing round", d, count, 0.0 if not failures else 1.0, not failures, detail, failures)


def referee_rows(ds=(2, 3), fs=(0.3, 0.6, 0.9)) -> list[oracle.VerificationRow]:
    """Dense recurrence vs. the closed forms; the keep-probability row names the confirmed formula."""
    rows = []
    for d in ds:
        dev_f = 0.0
        dev_single = dev_total = 0.0
        for f in fs:
            o = oracle.recurrence_dense(d, f)
            r = improve.recurrence_step(d, f)
            dev_f = max(dev_f, abs(o.f_prime - r.f_prime))
            dev_single = max(dev_single, abs(o.p_keep - r.p_single))
            dev_total = max(dev_total, abs(o.p_keep - r.p_total))
        rows.append(oracle.VerificationRow("recurrence f'", d, len(fs), dev_f, dev_f <= 1e-10))
        single_ok, total_ok = dev_single <= 1e-10, dev_total <= 1e-10
        verdict = "single" if single_ok and not total_ok else "total" if total_ok and not single_ok else "undecided"
        rows.append(
            oracle.VerificationRow(
                "keep probability referee",
                d,
                len(fs),
                min(dev_single, dev_total),
                verdict != "undecided",
                f"confirmed={verdict} single_dev={dev_single:.3g} total_dev={dev_total:.3g}",
            )
        )
    return rows


def oracle_rows(d_max: int) -> list[oracle.VerificationRow]:
    if d_max > oracle.MAX_ORACLE_D:
        raise CLIError("refused", f"d_max={d_max} exceeds oracle cap {oracle.MAX_ORACLE_D}")
    if d_max < 2:
        raise CLIError("config", "--d-max must be >= 2")
    rows = oracle.verification_table(d_max)
    rows += [_hashing_row(d) for d in (2, 3) if d <= d_max]
    rows += referee_rows(tuple(d for d in (2, 3) if d <= d_max))
    return rows


def cmd_oracle_verify(args) -> int:
    rows = oracle_rows(args.d_max)
    write_csv(
        args.out,
        ["equation", "d", "cases", "max_infidelity", "status", "detail"],
        ([r.equation, r.d, r.cases, r.max_infidelity, "PASS" if r.passed else "FAIL", r.detail] for r in rows),
    )
    bad = [r for r in rows if not r.passed]
    if bad:
        raise CLIError("oracle", f"{bad[0].equation} d={bad[0].d}: {bad[0].detail}", EXIT_FAIL)
    return 0


# -- lowrank -----------------------------------------------------------------


def lowrank_report(d: int, samples: int, seed) -> dict:
    rng = zmod.make_rng(seed)
    worst = 0.0
    for mu in rng.dirichlet(np.ones(d), size=samples):
        spectrum = states.LowRankSpectrum(tuple(mu))
        rate = states.hashing_rate(states.low_rank_state(spectrum))
        worst = max(worst, abs(rate - states.er_bound_low_rank(spectrum)))
    uniform = states.hashing_rate(states.low_rank_state(states.LowRankSpectrum((1.0 / d,) * d)))
    point = states.hashing_rate(states.low_rank_state(states.LowRankSpectrum((1.0,) + (0.0,) * (d - 1))))
    return {
        "d": d,
        "samples": samples,
        "max_abs_deviation": worst,
        "uniform_rate": uniform,
        "point_mass_rate": point,
        "log2_d": math.log2(d),
        "equal": worst <= 1e-12,
    }


def cmd_lowrank(args) -> int:
    rep = lowrank_report(args.d, args.samples, args.seed)
    write_csv(args.out, list(rep), [list(rep.values())])
    if not rep["equal"]:
        raise CLIError("lowrank", f"rate differs from bound by {rep['max_abs_deviation']}", EXIT_FAIL)
    return 0


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--out", default=None, help="output CSV path (default stdout)")
    common.add_argument("--seed", type=int, default=0)

    p = argparse.ArgumentParser(prog="qdistill", description="Qudit breeding/hashing rate analysis and simulation")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("rates", parents=[common], help="rate curves for isotropic states")
    r.add_argument("--d", type=int, default=2)
    r.add_argument("--f-start", type=float, default=0.0)
    r.add_argument("--f-stop", type=float, default=1.0)
    r.add_argument("--f-points", type=int, default=101)
    r.add_argument("--strategies", default="hashing,er", help="comma list: hashing, er, recurrence:K, subspace:3+4, blocks:Q, pow2, envelope, qubit, best")
    r.add_argument("--partition", help="extra subspace strategy, e.g. 3,4")
    r.add_argument("--recurrence-k", type=int, help="extra recurrence strategy with K rounds")
    r.add_argument("--keep", choices=improve.KEEP_CONVENTIONS, default=improve.DEFAULT_KEEP)
    r.set_defaults(func=cmd_rates)

    s = sub.add_parser("simulate", parents=[common], help="finite-n identification Monte Carlo")
    s.add_argument("--mode", choices=protocols.MODES, default="breeding")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--dprime", type=int, default=None)
    s.add_argument("--p", type=int, default=1, help="prime-power exponent, d = dprime^p")
    s.add_argument("--f", type=float, default=0.95, help="isotropic fidelity")
    s.add_argument("--n", type=int, default=4)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--rounds", type=int, default=None, help="maximum rounds")
    s.add_argument("--delta", type=float, default=1e-6)
    s.add_argument("--method", choices=("auto", "exact", "typical"), default="auto")
    s.add_argument("--target", choices=("last", "random"), default="last")
    s.set_defaults(func=cmd_simulate)

    l1 = sub.add_parser("lemma1", parents=[common], help="exhaustive collision-probability check")
    l1.add_argument("--d-list", default="2,3,5,7,4,6,8,9")
    l1.add_argument("--m-max", type=int, default=3)
    l1.set_defaults(func=cmd_lemma1)

    o = sub.add_parser("oracle-verify", parents=[common], help="dense-matrix check of every index rule")
    o.add_argument("--d-max", type=int, default=3)
    o.set_defaults(func=cmd_oracle_verify)

    lr = sub.add_parser("lowrank", parents=[common], help="hashing rate vs. relative-entropy bound for rank-d states")
    lr.add_argument("--d", type=int, default=3)
    lr.add_argument("--samples", type=int, default=1000)
    lr.set_defaults(func=cmd_lowrank)
    return p


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        cfg = read_config(args.config)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        defaults = {}
        for key, value in cfg.items():
            if key not in known or key in ("config", "help"):
                raise CLIError("config", f"unknown config key {key!r}")
            action = known[key]
            defaults[key] = action.type(value) if action.type else value
        sub.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = parse_args(argv)
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc.kind}: {exc}", file=sys.stderr)
        return exc.code
    except protocols.PrimeDimensionRequired as exc:
        print(f"error: prime-dimension: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: value: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
