"""Command line entry point.

    divlab <subcommand> [--config FILE] [--window-start N] [--h0 H0] [--h H] ...

Exit status: 0 on success, 1 for usage, parameter or capacity errors, 2 when
a checked inequality or identity fails (a reproducer file is written).
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .config import SECTION_KEYS, RunConfig, load_config
from .errors import CapacityError, DivlabError, ParameterError, PreconditionError, VerificationError

COMMANDS = tuple(SECTION_KEYS)
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="divlab", description="Divisibility-operator experiments.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", metavar="{" + ",".join(COMMANDS) + "}")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config")
        sp.add_argument("--window-start", type=int)
        sp.add_argument("--window-len", type=int)
        sp.add_argument("--h0", type=int)
        sp.add_argument("--h", type=int)
        sp.add_argument("--k-exclude", dest="K", type=float)
        sp.add_argument("--ell", type=int)
        sp.add_argument("--k", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", dest="thread_count", type=int)
        sp.add_argument("--out", dest="output_dir")
        for key, (typ, _) in SECTION_KEYS[name].items():
            sp.add_argument("--" + key.replace("_", "-"), dest="sec_" + key,
                            type=str if typ is list else typ)
    return ap


def resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    for key in ("window_start", "window_len", "h0", "h", "K", "ell", "k", "seed",
                "thread_count", "output_dir"):
        v = getattr(args, key, None)
        if v is not None:
            setattr(cfg, key, v)
    env = os.environ.get("DIVLAB_THREADS")
    if env:
        try:
            cfg.thread_count = int(env)
        except ValueError:
            raise ParameterError(f"DIVLAB_THREADS={env!r} is not an integer") from None
    block = dict(cfg.sections.get(args.command, {}))
    for key, (typ, _) in SECTION_KEYS[args.command].items():
        v = getattr(args, "sec_" + key, None)
        if v is not None:
            block[key] = [int(float(t)) for t in v.split(",")] if typ is list else v
    if block:
        cfg.sections[args.command] = block
    return cfg.validate()


# --- subcommands ------------------------------------------------------------
# Each returns a list of reports.Table; VerificationError signals a failed check.

def _window(cfg):
    from .arith import sieve_primes
    return sieve_primes(cfg.h0, cfg.h)


def cmd_primes(cfg):
    from .reports import Table
    pw = _window(cfg)
    rows = [(p, 1.0 / p) for p in pw.primes]
    return [Table("primes", ["p", "inv_p"], rows,
                  {"h0": cfg.h0, "h": cfg.h, "count": len(pw.primes), "mertens": pw.mertens,
                   "mertens_float": pw.L})]


def cmd_spectrum(cfg):
    import numpy as np
    from .divgraph import DENSE_LIMIT, assemble_dense, compute_X0_mask, compute_Yl_mask, make_operator
    from .reports import Table
    from .spectral import dense_spectrum, extreme_eigenvalues
    pw = _window(cfg)
    method = cfg.param("spectrum", "method")
    count = cfg.param("spectrum", "count")
    if method not in ("auto", "dense", "lanczos"):
        raise ParameterError(f"unknown spectrum method {method!r}")
    if method == "dense" and cfg.window_len > DENSE_LIMIT:
        raise CapacityError(f"dense spectrum limited to windows of {DENSE_LIMIT}, got {cfg.window_len}")
    if method == "auto":
        method = "dense" if cfg.window_len <= 2000 else "lanczos"
    op = make_operator(cfg.window_start, cfg.window_len, pw)
    x0 = compute_X0_mask(op.table, cfg.K)
    yl = compute_Yl_mask(op.table, pw, cfg.ell)
    scale = math.sqrt(cfg.K * pw.L)
    rows, tops = [], {}
    for name, mask in (("full", None), ("X0", x0), ("X0&Yl", x0 & yl)):
        spec = op if mask is None else op.restricted(mask)
        if method == "dense":
            w = dense_spectrum(assemble_dense(spec))
            order = np.argsort(-np.abs(w), kind="stable")[:count]
            vals, res = w[order], np.zeros(order.size)
        else:
            r = extreme_eigenvalues(spec, count=count, seed=cfg.seed)
            vals, res = r.values, r.residuals
        tops[name] = float(np.max(np.abs(vals))) if len(vals) else 0.0
        for i, (v, e) in enumerate(zip(vals, res)):
            rows.append((name, spec.support.cardinality, i, float(v), float(e), abs(float(v)) / scale))
    tol = 1e-8 * max(1.0, tops["full"])
    if tops["X0&Yl"] > tops["full"] + tol or tops["X0"] > tops["full"] + tol:
        raise VerificationError("restricted spectral radius exceeds the full one",
                                instance={"window_start": cfg.window_start, "window_len": cfg.window_len,
                                          "h0": cfg.h0, "h": cfg.h, "K": cfg.K, "ell": cfg.ell,
                                          "tops": tops})
    meta = {"method": method, "L": pw.L, "sqrt_KL": scale, "tops": tops,
            "x0_excluded": cfg.window_len - x0.cardinality,
            "union_excluded": cfg.window_len - (x0 & yl).cardinality}
    return [Table("spectrum", ["support", "size", "index", "eigenvalue", "residual", "ratio_sqrt_KL"],
                  rows, meta)]


def cmd_trace(cfg):
    from .divgraph import DENSE_LIMIT, assemble_dense, make_operator
    from .reports import Table
    from .spectral import trace_dense_power, trace_stochastic, trace_walk_sum
    pw = _window(cfg)
    op = make_operator(cfg.window_start, cfg.window_len, pw)
    samples = cfg.param("trace", "samples")
    rows = []
    results = {}
    for k in range(1, cfg.k + 1):
        if cfg.window_len <= DENSE_LIMIT:
            results[("dense-power", k)] = trace_dense_power(assemble_dense(op), k)
        try:
            results[("walk-sum", k)] = trace_walk_sum(op, k)
        except CapacityError:
            pass
        results[("stochastic", k)] = trace_stochastic(op, k, samples=samples, seed=cfg.seed + k)
        d, w = results.get(("dense-power", k)), results.get(("walk-sum", k))
        if d and w and abs(d.value - w.value) > 1e-9 * max(1.0, abs(d.value)):
            raise VerificationError("dense and walk-sum traces disagree",
                                    instance={"k": k, "dense": d.value, "walk": w.value,
                                              "window_start": cfg.window_start,
                                              "window_len": cfg.window_len, "primes": pw.primes})
    for (method, k), r in sorted(results.items(), key=lambda t: (t[0][1], t[0][0])):
        rows.append((k, method, r.value, r.stderr))
    return [Table("trace", ["k", "method", "value", "stderr"], rows, {"samples": samples})]


def cmd_sieve_selftest(cfg):
    import numpy as np
    from .reports import Table
    from .sievekit import (check_inclusion_exclusion, crosscut_all_collections, random_downset,
                           random_family, sieve_pointwise_check)
    trials = cfg.param("sieve-selftest", "trials")
    window = cfg.param("sieve-selftest", "window")
    rng = np.random.default_rng(cfg.seed)
    rows = []
    for t in range(trials):
        nq = int(rng.integers(1, 11))
        mods = [int(m) for m in rng.integers(2, 31, size=nq)]
        res = [int(rng.integers(m)) for m in mods]
        props = [lambda n, m=m, r=r: n % m == r for m, r in zip(mods, res)]
        vals = rng.integers(-3, 4, size=1 << nq)
        vals[0] = 1
        gs = [lambda S: 1 if S == 0 else 0, lambda S, v=vals: int(v[S])]
        rep = check_inclusion_exclusion(props, range(1, window + 1), gs)
        if not rep.ok:
            raise VerificationError("inclusion-exclusion identity failed",
                                    instance={"moduli": mods, "residues": res,
                                              "violations": rep.violations[:5]})
        row = ["identity", t, nq, rep.checked, 0]
        if t < 50:
            fam = random_family(rng, int(rng.integers(2, 7)), [2, 3, 5, 6, 10, 15, 30])
            D = random_downset(rng, fam)
            sr = sieve_pointwise_check(fam, D, 1, window)
            if not sr.ok:
                raise VerificationError("sieve error envelope violated",
                                        instance={"family": [str(P) for P in fam.members],
                                                  "kept": sorted(str(R) for R in D.members),
                                                  "report": sr})
            rows.append(("sieve", t, len(fam.members), sr.n_checked, sr.max_coeff_ratio))
        rows.append(tuple(row))
    cc = crosscut_all_collections(4)
    if int(abs(cc).max()) > 16:
        raise VerificationError("crosscut sum exceeds 2^|X|", instance={"max": int(abs(cc).max())})
    rows.append(("crosscut", 0, 4, int(cc.size), int(abs(cc).max())))
    return [Table("sieve_selftest", ["check", "trial", "size", "checked", "extra"], rows,
                  {"trials": trials, "window": window, "seed": cfg.seed})]


def cmd_kubilius(cfg):
    from fractions import Fraction
    from .reports import Table
    from .sievekit import (KubiliusSpec, is_squarefree, iter_patterns, kubilius_compare,
                           kubilius_total_probability, pattern_histogram)
    pw = _window(cfg)
    q = cfg.param("kubilius", "q")
    N = cfg.param("kubilius", "N")
    if not is_squarefree(q):
        raise ParameterError("kubilius q must be squarefree")
    min_prob = Fraction(cfg.param("kubilius", "min_prob")).limit_denominator(10**9)
    shifts = tuple(range(cfg.ell))
    rows = []
    for a in range(q):
        total = kubilius_total_probability(pw, a, q, shifts)
        if total != 1:
            raise VerificationError("model probabilities do not sum to 1",
                                    instance={"a": a, "q": q, "total": total})
        hist = pattern_histogram(pw, N, a, q, shifts)
        for pat, _ in iter_patterns(pw, a, q, shifts, min_prob * q):
            c = kubilius_compare(KubiliusSpec(a, q, shifts, pat), pw, N, hist)
            active = ";".join(f"{p}:{''.join(map(str, b))}" for p, b in pat if any(b))
            rows.append((a, active or "-", float(c.model_value), float(c.exact_density), c.count,
                         c.relative_error))
    return [Table("kubilius", ["a", "pattern", "model", "density", "count", "relative_error"], rows,
                  {"q": q, "N": N, "shifts": shifts, "min_prob": min_prob,
                   "max_relative_error": max((r[5] for r in rows), default=0.0)})]


def cmd_walks(cfg):
    from .arith import build_factor_table
    from .reports import Table
    from .walkshapes import evaluate_walk_sums
    pw = _window(cfg)
    table = build_factor_table(cfg.window_start, cfg.window_len, pw)
    r = evaluate_walk_sums(pw, table, cfg.K, cfg.ell, cfg.k, mode=cfg.param("walks", "mode"),
                           seed=cfg.seed, samples=cfg.param("walks", "samples"))
    return [Table("walks", ["sum", "value", "stderr"], r.rows(),
                  {"mode": r.mode, "samples": r.samples, "members": r.members, "k": cfg.k})]


def cmd_graphcore_selftest(cfg):
    import networkx as nx
    import numpy as np
    from .graphcore import (SimpleGraph, blue_selection, inboundary_subset, max_leaf_spanning_tree,
                            mindeg3_graphs, petersen, tour_arrows)
    from .reports import Table
    max_n = cfg.param("graphcore-selftest", "max_n")
    inst = cfg.param("graphcore-selftest", "instances")
    rng = np.random.default_rng(cfg.seed)
    rows = []
    graphs = [SimpleGraph.from_networkx(g) for g in mindeg3_graphs(max_n)] + [petersen()]
    worst = math.inf
    for g in graphs:
        t = max_leaf_spanning_tree(g)
        worst = min(worst, t.leaf_count - (g.n / 4 + 2))
    rows.append(("max-leaf", len(graphs), worst))
    done = 0
    while done < inst:
        n = int(rng.integers(2, 13))
        g = nx.gnp_random_graph(n, float(rng.uniform(0.2, 0.7)), seed=int(rng.integers(2**31)),
                                directed=True)
        if any(d == 0 for _, d in g.in_degree()):
            continue
        sg = SimpleGraph(n, frozenset(), frozenset(g.edges()))
        S = [v for v in range(n) if rng.random() < 0.6] or [0]
        inboundary_subset(sg, S)
        done += 1
    rows.append(("in-boundary", inst, 0))
    done = 0
    while done < inst:
        n = int(rng.integers(4, 15))
        g = nx.gnp_random_graph(n, float(rng.uniform(0.3, 0.8)), seed=int(rng.integers(2**31)))
        if not nx.is_connected(g) or sum(1 for _, d in g.degree() if d > 2) < 1:
            continue
        blue_selection(tour_arrows(SimpleGraph.from_networkx(g), int(rng.integers(2**31))))
        done += 1
    rows.append(("blue-selection", inst, 0))
    return [Table("graphcore_selftest", ["check", "instances", "min_margin"], rows,
                  {"max_n": max_n, "seed": cfg.seed})]


def cmd_chowla(cfg):
    from .correlations import chowla_log_average, z_series
    from .reports import Table
    xs = cfg.param("chowla", "x")
    w = cfg.param("chowla", "w")
    rows = []
    for x in xs:
        for kind in ("liouville", "constant"):
            r = chowla_log_average(x, w, kind, kind)
            rows.append((x, w, kind, r.value))
    mags = [abs(r[3]) for r in rows if r[2] == "liouville"]
    monotone = all(b <= a for a, b in zip(mags, mags[1:]))
    tables = [Table("chowla", ["x", "w", "function", "log_average"], rows,
                    {"monotone_nonincreasing": monotone})]
    pw = _window(cfg)
    zs = z_series(xs[0], w, cfg.param("chowla", "grid"), pw)
    za = z_series(xs[0], w, cfg.param("chowla", "grid"), pw, absolute=True)
    tables.append(Table("chowla_z_series", ["T", "Z", "Zcirc", "terms"],
                        [(float(t), float(a), float(b), int(c))
                         for t, a, b, c in zip(zs.T, zs.values, za.values, zs.n_terms)],
                        {"x": xs[0], "w": w, "primes": len(pw.primes)}))
    return tables


def cmd_scales(cfg):
    from .correlations import z_integral_residual, scale_average_abs
    from .reports import Table
    pw = _window(cfg)
    x = cfg.param("scales", "x")
    w = cfg.param("scales", "w")
    rows = []
    for kind in ("liouville", "constant"):
        r = z_integral_residual(x, w, pw, kind, kind)
        if not r.ok:
            raise VerificationError("log sum and Z integral differ by more than the bound",
                                    instance={"x": x, "w": w, "kind": kind, "result": r,
                                              "h0": cfg.h0, "h": cfg.h})
        s = scale_average_abs(x, w, pw, kind, kind)
        rows.append((kind, x, w, r.log_sum, r.z_integral, r.residual, r.bound, s.value,
                     s.extra["zcirc"], s.extra["slack"]))
    return [Table("scales", ["function", "x", "w", "log_sum", "z_integral", "residual", "bound",
                             "abs_scale_average", "zcirc_average", "slack"], rows, {"L": pw.L})]


def cmd_report(cfg):
    """Summarize every table already present in the output directory."""
    from .reports import Table, read_table
    rows = []
    for path in sorted(Path(cfg.output_dir).glob("*.json")):
        if path.name in ("manifest.json", "summary.json", "reproducer.json"):
            continue
        t = read_table(path)
        rows.append((t.name, len(t.rows), ",".join(t.columns)))
    return [Table("summary", ["table", "rows", "columns"], rows)]


HANDLERS = {
    "primes": cmd_primes, "spectrum": cmd_spectrum, "trace": cmd_trace,
    "sieve-selftest": cmd_sieve_selftest, "kubilius": cmd_kubilius, "walks": cmd_walks,
    "graphcore-selftest": cmd_graphcore_selftest, "chowla": cmd_chowla, "scales": cmd_scales,
    "report": cmd_report,
}


def run_command(cfg: RunConfig, command: str) -> int:
    from .reports import RunManifest, emit_report, plain
    if command not in HANDLERS:
        raise UsageError(f"unknown subcommand {command!r}")
    for var in THREAD_VARS:
        os.environ[var] = str(cfg.thread_count)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.digest(), __version__)
    cfg_path = out / "config.txt"
    from .config import serialize
    cfg_path.write_text(serialize(cfg))
    manifest.files.append(cfg_path)
    status = 0
    try:
        with manifest.stage(command):
            tables = HANDLERS[command](cfg)
        manifest.files += emit_report(tables, out)
    except VerificationError as exc:
        rep = out / "reproducer.json"
        rep.write_text(json.dumps({"command": command, "message": str(exc),
                                   "config": serialize(cfg), "instance": plain(exc.instance)},
                                  indent=1) + "\n")
        manifest.files.append(rep)
        print(f"divlab: verification failed: {exc} (reproducer: {rep})", file=sys.stderr)
        status = 2
    manifest.write(out, status)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise UsageError(parser.format_usage() + "divlab: error: a subcommand is required")
        cfg = resolve_config(args)
        return run_command(cfg, args.command)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (ParameterError, CapacityError, PreconditionError) as exc:
        print(f"divlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except DivlabError as exc:
        print(f"divlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
