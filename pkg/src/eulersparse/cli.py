"""Command-line interface.

Every command writes a JSON report (to ``--report`` or stdout) carrying a
``schema`` field and a run manifest with SHA-256 digests of its inputs
and outputs.  Exit code 0 means success, 2 means a precondition or input
error; the error is then reported as JSON with ``"error"`` set.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field

SCHEMA = "eulersparse.report/1"
EXIT_OK = 0
EXIT_ERROR = 2


@dataclass
class RunManifest:
    """What was run, on what, and what came out."""

    command: str
    config: dict
    seed: int | None
    input_digest: dict = field(default_factory=dict)
    output_digest: dict = field(default_factory=dict)
    wall_time: float = 0.0
    report_path: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _jsonable(x):
    import numpy as np

    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        x = float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _emit(report: dict, path: str | None) -> None:
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_vector(path, x) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in x:
            fh.write(f"{float(v)!r}\n")


def _read_vector(path):
    import numpy as np

    from .errors import ParseError

    try:
        with open(path, "r", encoding="utf-8") as fh:
            vals = [float(tok) for ln in fh for tok in ln.split() if not ln.startswith("#")]
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    return np.asarray(vals, dtype=np.float64)


def _read_chain(path):
    """Transition matrix from an edge list of ``u v P_uv``; self-loops allowed."""
    import scipy.sparse as sp

    from .errors import ParseError

    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        n, m = int(lines[0][0]), int(lines[0][1])
        rows = [(int(u), int(v), float(p)) for u, v, p in lines[1:]]
    except (IndexError, ValueError) as exc:
        raise ParseError(f"{path}: expected 'n m' then 'u v p' lines") from exc
    if len(rows) != m or any(not (0 <= u < n and 0 <= v < n) for u, v, _ in rows):
        raise ParseError(f"{path}: edge count or vertex range does not match the header")
    u, v, p = zip(*rows) if rows else ((), (), ())
    return sp.csr_matrix((p, (u, v)), shape=(n, n))


def _profile(name: str) -> str:
    return {"paper": "paper_faithful", "paper_faithful": "paper_faithful",
            "practical": "practical"}[name]


# ---------------------------------------------------------------------------
# commands; each returns (report, manifest inputs, manifest outputs, config)


def cmd_gen(a):
    from .graph_core import random_bidirected, random_eulerian, random_undirected, write_edge_list

    # default density 8n, capped at half of all possible pairs
    m = a.m if a.m is not None else min(8 * a.n, a.n * (a.n - 1) // 2)
    if a.kind == "eulerian":
        G = random_eulerian(a.n, m, U=a.U, seed=a.seed)
    elif a.kind == "bidirected":
        G = random_bidirected(a.n, a.m, U=a.U, seed=a.seed)
    else:
        G = random_undirected(a.n, m, U=a.U, seed=a.seed)
    write_edge_list(G, a.output)
    cfg = {"kind": a.kind, "n": a.n, "m": a.m, "U": a.U}
    return {"n": G.n, "m": G.m}, {}, {"output": a.output}, cfg


def cmd_sparsify(a):
    from .dense_oracle import MAX_N, verify_sparsifier
    from .graph_core import read_edge_list, write_edge_list
    from .sparsify import SparsifyConfig, run_fast_sparsify

    G = read_edge_list(a.input)
    kw = {}
    if a.target_constant is not None:
        kw["target_constant"] = a.target_constant
    if a.rounds is not None:
        kw["rounds"] = a.rounds
    cfg = SparsifyConfig(eps=a.eps, delta=a.delta, seed=a.seed, profile=_profile(a.profile),
                         track_error=a.track_error, **kw)
    res = run_fast_sparsify(G, config=cfg)
    write_edge_list(res.graph, a.output)
    rep = {"info": res.info, "trajectory": res.trajectory}
    if G.n <= MAX_N:
        rep["verification"] = verify_sparsifier(G, res.graph, a.eps).to_dict()
    return rep, {"input": a.input}, {"output": a.output}, cfg.to_dict()


def cmd_sketch(a):
    import numpy as np

    from .dense_oracle import MAX_N, sparsifier_error
    from .graph_core import orient_undirected, read_edge_list, write_edge_list
    from .sketch import (SketchConfig, bilinear_errors, inverse_quadratic_errors, pair_family,
                         quadratic_errors, run_spectral_sketch, undirected_sketch)

    G = read_edge_list(a.input)
    cfg = SketchConfig(eps=a.eps, delta=a.delta, beta=a.beta, seed=a.seed,
                       profile=_profile(a.profile))
    rep = {"mode": a.mode}
    if a.mode == "eulerian":
        res = run_spectral_sketch(G, config=cfg)
        H = res.graph
        rep.update(info=res.info, trajectory=res.trajectory)
    else:
        G = orient_undirected(G)
        H = undirected_sketch(G, config=cfg)
    write_edge_list(H, a.output)
    rep["nnz_in"], rep["nnz_out"] = G.m, H.m
    if G.n <= MAX_N and a.vectors > 0:
        # vectors come from a seed stream separate from the sketch's
        A, Z = pair_family(G.n, a.vectors, seed=[a.seed, 7919])
        if a.mode == "eulerian":
            e = bilinear_errors(G, H, A, Z)
            rep["pairs_within_eps"] = float(np.mean(e <= a.eps))
            rep["sparsifier_error"] = sparsifier_error(G, H)
            rep["sqrt_eps_clause"] = rep["sparsifier_error"] <= math.sqrt(a.eps)
        else:
            q = quadratic_errors(G, H, A)
            rep["vectors_within_eps"] = float(np.mean(q <= a.eps))
            iq = inverse_quadratic_errors(G, H, A[:50])
            rep["inverse_max_ratio"] = float(iq.max())
            rep["inverse_within_7eps"] = bool(iq.max() <= 7 * a.eps)
        rep["max_pair_error"] = float(np.max(e if a.mode == "eulerian" else q))
    return rep, {"input": a.input}, {"output": a.output}, cfg.to_dict()


def cmd_solve(a):
    from .graph_core import read_edge_list
    from .solver_apps import eulerian_solve

    G = read_edge_list(a.input)
    b = _read_vector(a.rhs)
    res = eulerian_solve(G, b, eps=a.eps, delta=a.delta, preconditioner=a.preconditioner)
    _write_vector(a.output, res.x)
    rep = {"iterations": res.iterations, "preconditioner_nnz": res.preconditioner_nnz,
           "achieved_error": res.achieved_error, "condition": res.condition}
    cfg = {"eps": a.eps, "delta": a.delta, "preconditioner": a.preconditioner}
    return rep, {"input": a.input, "rhs": a.rhs}, {"output": a.output}, cfg


def cmd_stationary(a):
    from .solver_apps import stationary_distribution

    P = _read_chain(a.chain)
    res = stationary_distribution(P, eps=a.eps, return_info=True)
    _write_vector(a.output, res.pi)
    rep = {"iterations": res.iterations, "residual": res.residual, "n": P.shape[0]}
    return rep, {"chain": a.chain}, {"output": a.output}, {"eps": a.eps}


def cmd_decompose(a):
    from .decomposition import er_decomp, expander_decomp, verify_decomposition
    from .dense_oracle import MAX_N
    from .graph_core import read_edge_list

    G = read_edge_list(a.input)
    if a.kind == "er":
        D = er_decomp(G, a.r, a.delta, seed=a.seed)
    else:
        D = expander_decomp(G, a.r, a.delta, seed=a.seed)
    rep = {"decomposition": D.to_dict()}
    if G.n <= MAX_N:
        rep["verification"] = verify_decomposition(G, D).to_dict()
    return rep, {"input": a.input}, {}, {"kind": a.kind, "r": a.r, "delta": a.delta}


def cmd_verify(a):
    from .dense_oracle import verify_sparsifier
    from .graph_core import read_edge_list

    G = read_edge_list(a.ref)
    H = read_edge_list(a.test)
    rep = {"verification": verify_sparsifier(G, H, a.eps, max_n=a.max_n).to_dict()}
    rep["pass"] = rep["verification"]["pass"]
    return rep, {"ref": a.ref, "test": a.test}, {}, {"eps": a.eps}


def fit_near_linear(ms, ts) -> tuple[float, float]:
    """Least-squares ``(a, c)`` in ``log t = log a + log m + c log log m``."""
    import numpy as np

    ms = np.asarray(ms, dtype=np.float64)
    ts = np.asarray(ts, dtype=np.float64)
    y = np.log(ts) - np.log(ms)
    X = np.column_stack([np.ones_like(ms), np.log(np.log(ms))])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(math.exp(coef[0])), float(coef[1])


def cmd_bench(a):
    from .graph_core import random_eulerian
    from .sparsify import SparsifyConfig, run_fast_sparsify

    sizes = [int(s) for s in a.sizes.split(",")]
    rows = []
    for n in sizes:
        G = random_eulerian(n, a.density * n, U=1, seed=[a.seed, n])
        cfg = SparsifyConfig(eps=a.eps, delta=a.delta, seed=a.seed, profile=_profile(a.profile),
                             target_constant=a.target_constant, rounds=a.rounds,
                             piece_guard=False if a.no_piece_guard else None)
        t0 = time.perf_counter()
        res = run_fast_sparsify(G, config=cfg)
        rows.append({"n": n, "m": G.m, "wall_time": time.perf_counter() - t0,
                     "nnz_out": res.graph.m, "rounds": res.info.get("rounds", 0)})
    with open(a.output, "w", newline="", encoding="utf-8") as fh:
        wr = csv.DictWriter(fh, fieldnames=["n", "m", "wall_time", "nnz_out", "rounds"])
        wr.writeheader()
        wr.writerows(rows)
    rep = {"rows": rows}
    if len(rows) >= 2:
        coef_a, c = fit_near_linear([r["m"] for r in rows], [r["wall_time"] for r in rows])
        rep.update(fit_a=coef_a, fit_c=c, near_linear=c <= 4.0)
        if c > 4.0:
            print(f"warning: fitted exponent c = {c:.2f} exceeds 4", file=sys.stderr)
    cfg = {"sizes": sizes, "density": a.density, "eps": a.eps, "target_constant": a.target_constant,
           "rounds": a.rounds, "piece_guard": not a.no_piece_guard}
    return rep, {}, {"output": a.output}, cfg


# ---------------------------------------------------------------------------
# parser


def _common(p, eps=0.25, seed=True):
    p.add_argument("--eps", type=float, default=eps)
    p.add_argument("--delta", type=float, default=0.01)
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--profile", choices=["paper", "practical"], default="practical")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--report", default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eulersparse", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="random graph to an edge list")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--U", type=int, default=1)
    p.add_argument("--kind", choices=["eulerian", "bidirected", "undirected"], default="eulerian")
    p.add_argument("--output", default="graph.el")
    _common(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("sparsify", help="Eulerian sparsifier")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="sparsified.el")
    p.add_argument("--target-constant", type=float, default=None)
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--track-error", action="store_true")
    _common(p)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("sketch", help="graphical spectral sketch")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default="sketch.el")
    p.add_argument("--mode", choices=["eulerian", "undirected"], default="eulerian")
    p.add_argument("--vectors", type=int, default=500)
    p.add_argument("--beta", type=float, default=None)
    _common(p, eps=0.5)
    p.set_defaults(func=cmd_sketch)

    p = sub.add_parser("solve", help="solve vL x = b for an Eulerian graph")
    p.add_argument("--input", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--output", default="x.txt")
    p.add_argument("--preconditioner", choices=["sparsify", "exact"], default="sparsify")
    _common(p, eps=1e-6)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("stationary", help="stationary distribution of a Markov chain")
    p.add_argument("--chain", required=True, help="edge list 'u v P_uv'")
    p.add_argument("--output", default="pi.txt")
    _common(p, eps=1e-8)
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("decompose", help="ER or expander decomposition")
    p.add_argument("--input", required=True)
    p.add_argument("--kind", choices=["er", "expander"], default="er")
    p.add_argument("--r", type=float, default=2.0)
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="dense-oracle check of a sparsifier")
    p.add_argument("--ref", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--max-n", type=int, default=None)
    _common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="wall time of fast_sparsify over a size sweep")
    p.add_argument("--sizes", default="256,512,1024,2048,4096,8192")
    p.add_argument("--density", type=int, default=8)
    p.add_argument("--target-constant", type=float, default=0.0)
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--no-piece-guard", action="store_true",
                   help="walk every piece so the sweep times the reweighting too")
    p.add_argument("--output", default="bench.csv")
    _common(p)
    p.set_defaults(func=cmd_bench)
    return ap


def _limit_threads(k: int | None) -> None:
    if k is None:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[var] = str(k)


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    # BLAS reads these once at import; all numerics are imported below
    _limit_threads(a.threads)
    from .errors import EulerSparseError

    t0 = time.perf_counter()
    manifest = RunManifest(command=a.command, config={}, seed=getattr(a, "seed", None),
                           report_path=a.report)
    try:
        rep, inputs, outputs, cfg = a.func(a)
    except (EulerSparseError, OSError, KeyError) as exc:
        err = exc.to_dict() if isinstance(exc, EulerSparseError) else {
            "error": type(exc).__name__, "message": str(exc)}
        manifest.wall_time = time.perf_counter() - t0
        _emit({"schema": SCHEMA, "command": a.command, "error": err,
               "manifest": manifest.to_dict()}, a.report)
        return EXIT_ERROR
    manifest.config = cfg
    manifest.input_digest = {k: file_digest(v) for k, v in inputs.items()}
    manifest.output_digest = {k: file_digest(v) for k, v in outputs.items()}
    manifest.wall_time = time.perf_counter() - t0
    _emit({"schema": SCHEMA, "command": a.command, "error": None, **rep,
           "manifest": manifest.to_dict()}, a.report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
