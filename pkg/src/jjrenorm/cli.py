"""Command-line driver: config ingestion, pipeline orchestration, and
machine-readable result emission.

Subcommands: renorm | iterate | oracle | darboux | diagnose.  Reports are
deterministic: keys sorted, floats at 17 significant digits, LF endings, and
a config hash for reproducibility.  Exit codes: 0 all enabled checks pass,
1 a numerical check failed, 2 config/schema error.
"""

import argparse
import csv
import hashlib
import itertools
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__, darboux, limitper, measures, poly, renorm
from .exceptions import JJRenormError
from .jacobi import JacobiWindow

DEFAULT_TOLS = {
    "recurrence": 1e-9,
    "t01": 1e-7,
    "re1": 1e-8,
    "re2": 1e-8,
    "re0": 1e-8,
    "sigma": 1e-9,
}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated knob set for one pipeline run."""

    command: str
    poly_specs: list
    branch: str = "-"
    seed_spec: str = "constant:6,0"
    steps: int = 8
    window: tuple = (-256, 255)
    tol_scale: float = 1.0
    tol_overrides: dict = field(default_factory=dict)
    depth: int = 12
    n_coeffs: int = 32
    out_dir: str = "."
    rng_seed: int | None = None
    threads: int = 1
    pairs: int = 8
    sweep: tuple = (12.0, 15.0, 20.0, 30.0)
    rho: float = 12.0
    run_checks: bool = False
    compare_path: str | None = None
    ruelle: bool = False

    def tolerances(self) -> dict:
        tol = dict(DEFAULT_TOLS)
        tol.update(self.tol_overrides)
        floor = 100 * np.finfo(float).eps
        out = {}
        for k, v in tol.items():
            scaled = float(v) * self.tol_scale
            if scaled < floor:
                raise ConfigError(
                    f"tolerance {k}={scaled:g} below 100*eps; not meaningful"
                )
            out[k] = scaled
        return out

    def canonical(self) -> dict:
        return {
            "command": self.command,
            "poly_specs": self.poly_specs,
            "branch": self.branch,
            "seed_spec": self.seed_spec,
            "steps": self.steps,
            "window": list(self.window),
            "tol_scale": self.tol_scale,
            "tol_overrides": self.tol_overrides,
            "depth": self.depth,
            "n_coeffs": self.n_coeffs,
            "rng_seed": self.rng_seed,
            "pairs": self.pairs,
            "sweep": list(self.sweep),
            "rho": self.rho,
        }

    def hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# deterministic JSON with 17-significant-digit floats

def _fmt(obj, indent=0) -> str:
    pad = " " * indent
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = []
        for k in sorted(obj):
            items.append(f'{pad} "{k}": {_fmt(obj[k], indent + 1).lstrip()}')
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad} {_fmt(v, indent + 1).lstrip()}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (float, np.floating)):
        return f"{float(obj):.17g}"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj)


def write_report(path, obj):
    with open(path, "w", newline="") as fh:
        fh.write(_fmt(obj))
        fh.write("\n")


# ---------------------------------------------------------------------------
# seed / poly parsing

def _emission_window(J: JacobiWindow, requested: tuple) -> tuple:
    """Exactly periodic outputs are defined everywhere; windowed outputs are
    clipped to their stored range."""
    if J.is_exactly_periodic:
        return requested
    return max(J.lo, requested[0]), min(J.hi, requested[1])


def parse_seed(text: str) -> JacobiWindow:
    if text.startswith("constant:"):
        parts = text[len("constant:"):].split(",")
        if len(parts) != 2:
            raise ConfigError(f"constant seed needs 'constant:p,q': {text!r}")
        p, q = float(parts[0]), float(parts[1])
        return JacobiWindow.from_cycle([p], [q])
    if text.startswith("periodic:"):
        body = text[len("periodic:"):]
        try:
            p_str, q_str = body.split(";")
            pc = [float(v) for v in p_str.split(",")]
            qc = [float(v) for v in q_str.split(",")]
        except ValueError:
            raise ConfigError(
                f"periodic seed needs 'periodic:p1,..;q1,..': {text!r}")
        if len(pc) != len(qc):
            raise ConfigError("periodic seed cycles must have equal length")
        return JacobiWindow.from_cycle(pc, qc)
    if os.path.exists(text):
        return JacobiWindow.load_json(text)
    raise ConfigError(f"seed spec not understood and not a file: {text!r}")


def parse_poly_arg(text: str) -> dict:
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"--poly is neither a file nor JSON: {e}")


# ---------------------------------------------------------------------------
# subcommand bodies

def run_renorm(cfg: RunConfig) -> int:
    T = poly.from_spec(cfg.poly_specs[0])
    M = poly.to_monic(T)
    seed = parse_seed(cfg.seed_spec)
    d = M.degree
    if cfg.branch == "all":
        branches = [renorm.BranchVector(s) for s in
                    itertools.product((-1, 1), repeat=d - 1)]
    else:
        branches = [renorm.BranchVector.parse(cfg.branch)]
        if len(branches[0]) != d - 1:
            raise ConfigError(
                f"branch string length {len(branches[0])} != d-1 = {d - 1}")
    tols = cfg.tolerances()
    os.makedirs(cfg.out_dir, exist_ok=True)
    report = {"config_hash": cfg.hash(), "version": __version__,
              "branches": {}}
    all_pass = True
    for bv in branches:
        J = renorm.renormalize(seed, bv, M, cfg.window)
        tag = str(bv)
        lo, hi = _emission_window(J, cfg.window)
        J.slice_window(lo, hi).save_csv(
            os.path.join(cfg.out_dir, f"coefficients_{tag}.csv"))
        J.slice_window(lo, hi).save_json(
            os.path.join(cfg.out_dir, f"window_{tag}.json"))
        entry = {}
        if cfg.run_checks:
            s_hi = max(2, min(16, hi // d - 1))
            blocks = renorm.compute_blocks(seed, bv, M, -s_hi, s_hi)
            checks = {}
            checks["recurrence"] = renorm.check_recurrence(blocks, seed, M)
            with ThreadPoolExecutor(max_workers=max(1, cfg.threads)) as ex:
                f_t01 = ex.submit(renorm.check_renorm_equation, J, seed, M,
                                  None, min(600, hi - lo))
                f_pf = ex.submit(renorm.check_polynomial_form, J, seed, M,
                                 None, min(400, hi - lo))
                f_re0 = ex.submit(renorm.check_re0, J, seed, M)
                checks["t01"] = f_t01.result()
                checks["re1"], checks["re2"] = f_pf.result()
                checks["re0"] = f_re0.result()
            checks["sigma"] = max(
                renorm.critical_point_measure(b, M)[1] for b in blocks)
            entry["checks"] = {}
            for name, resid in checks.items():
                ok = resid <= tols[name]
                entry["checks"][name] = {"residual": resid,
                                         "tol": tols[name], "pass": ok}
                all_pass = all_pass and ok
        report["branches"][tag] = entry
    write_report(os.path.join(cfg.out_dir, "report.json"), report)
    if cfg.run_checks and not all_pass:
        failing = [f"{b}:{n}" for b, e in report["branches"].items()
                   for n, c in e.get("checks", {}).items() if not c["pass"]]
        print(f"FAILED checks: {', '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def run_iterate(cfg: RunConfig) -> int:
    Ts = [poly.from_spec(s) for s in cfg.poly_specs]
    seed = parse_seed(cfg.seed_spec)
    os.makedirs(cfg.out_dir, exist_ok=True)
    if "," in cfg.branch:
        cycle = [renorm.BranchVector.parse(s) for s in cfg.branch.split(",")]
        policy = [cycle[k % len(cycle)] for k in range(cfg.steps)]
    else:
        policy = renorm.BranchVector.parse(cfg.branch)
    if len(Ts) == 1 and not isinstance(policy, list):
        M = poly.to_monic(Ts[0])
        trace = limitper.iterate_fixed(M, policy, seed, cfg.steps, cfg.window)
        degrees = [M.degree] * cfg.steps
        xi = M.xi
    else:
        # mixed towers run in unit normalization so xi matches across steps
        steps = [Ts[k % len(Ts)] for k in range(cfg.steps)]
        trace = limitper.iterate_sequence(steps, policy, seed, cfg.window)
        degrees = [t.degree for t in steps]
        xi = 1.0
    final = trace.final
    lo, hi = _emission_window(final, cfg.window)
    final.slice_window(lo, hi).save_csv(
        os.path.join(cfg.out_dir, "coefficients.csv"))
    profile = limitper.ap_profile(final, degrees, min(6, cfg.steps), 3, xi,
                                  (lo, hi))
    with open(os.path.join(cfg.out_dir, "ap_profile.csv"), "w",
              newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["layer", "j", "shift", "rho"])
        for l, j, k, rho in profile.entries:
            w.writerow([l, j, k, repr(float(rho))])
    split = limitper.split_check(trace, xi, degrees[0])
    write_report(os.path.join(cfg.out_dir, "split_report.json"), split)
    trace_doc = {
        "config_hash": cfg.hash(),
        "version": __version__,
        "step_distances": [float(v) for v in trace.step_distances],
        "empirical_ratios": [float(v) for v in trace.empirical_ratios],
        "kappa_emp": profile.kappa_emp,
        "stopped_early": trace.stopped_early,
        "final_window": final.slice_window(lo, hi).to_json_dict(),
    }
    write_report(os.path.join(cfg.out_dir, "trace.json"), trace_doc)
    return 0


def run_oracle(cfg: RunConfig) -> int:
    T = poly.from_spec(cfg.poly_specs[0])
    M = poly.to_monic(T)
    os.makedirs(cfg.out_dir, exist_ok=True)
    m = measures.balanced_measure(M, cfg.depth)
    with open(os.path.join(cfg.out_dir, "measure.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["point", "weight"])
        for x, wt in zip(m.points, m.weights):
            w.writerow([repr(float(x)), repr(float(wt))])
    al, be = measures.jacobi_from_measure(m, cfg.n_coeffs)
    with open(os.path.join(cfg.out_dir, "coeffs.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "q", "p_next"])
        for i in range(cfg.n_coeffs):
            w.writerow([i, repr(float(al[i])), repr(float(be[i]))])
    comparison = {"config_hash": cfg.hash(), "version": __version__}
    status = 0
    if cfg.compare_path:
        with open(cfg.compare_path) as fh:
            doc = json.load(fh)
        final = JacobiWindow.from_json_dict(doc["final_window"])
        dev = measures.compare_fixedpoint_balanced(M, cfg.depth,
                                                   cfg.n_coeffs, final)
        comparison["balanced_vs_fixed_point"] = {
            "deviation": dev, "tol": 1e-5, "pass": dev <= 1e-5}
        status = 0 if dev <= 1e-5 else 1
        if cfg.ruelle:
            eig, rho_r = measures.ruelle_l2_eigen(M)
            n_left = min(cfg.n_coeffs, max(4, -final.lo // 2))
            dev_l = measures.compare_fixedpoint_ruelle(M, eig, n_left, final)
            comparison["ruelle_vs_fixed_point"] = {
                "deviation": dev_l, "tol": 1e-4, "pass": dev_l <= 1e-4,
                "rho_ruelle": rho_r}
            status = status or (0 if dev_l <= 1e-4 else 1)
    elif cfg.ruelle:
        eig, rho_r = measures.ruelle_l2_eigen(M)
        comparison["rho_ruelle"] = rho_r
    write_report(os.path.join(cfg.out_dir, "comparison.json"), comparison)
    return status


def run_darboux(cfg: RunConfig) -> int:
    if cfg.rng_seed is None:
        raise ConfigError("darboux randomized sweep requires --seed")
    rng = np.random.default_rng(cfg.rng_seed)
    os.makedirs(cfg.out_dir, exist_ok=True)
    seed = parse_seed(cfg.seed_spec)
    T = poly.quadratic(cfg.rho)
    J = renorm.renormalize(seed, renorm.BranchVector.all_minus(2), T,
                           (-96, 96))
    phi, resid = darboux.split_even_odd(J, window=(-96, 96))
    res_in, res_out, darb = darboux.check_darboux(phi, seed, cfg.rho)
    with open(os.path.join(cfg.out_dir, "phi.csv"), "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["m", "main", "upper"])
        for i in range(len(phi.main)):
            w.writerow([phi.offset + i, repr(float(phi.main[i])),
                        repr(float(phi.upper[i]))])
    sweep = darboux.lipschitz_sweep(cfg.sweep, cfg.pairs, rng)
    report = {
        "config_hash": cfg.hash(), "version": __version__,
        "zero_diag_residual": {"residual": resid, "tol": 1e-10,
                               "pass": resid <= 1e-10},
        "res_in": {"residual": res_in, "tol": 1e-9, "pass": res_in <= 1e-9},
        "res_out": {"residual": res_out, "tol": 1e-9,
                    "pass": res_out <= 1e-9},
        "lipschitz": {
            "C_fit": sweep["C_fit"],
            "coeff_variation": sweep["coeff_variation"],
            "cv_tol": 0.5,
            "envelope_ok": sweep["envelope_ok"],
            "per_rho_max_ratio": {str(d["rho"]): d["max_ratio"]
                                  for d in sweep["per_rho"]},
        },
    }
    write_report(os.path.join(cfg.out_dir, "darboux_report.json"), report)
    ok = (resid <= 1e-10 and res_in <= 1e-9 and res_out <= 1e-9
          and sweep["coeff_variation"] <= 0.5 and sweep["envelope_ok"])
    return 0 if ok else 1


def run_diagnose(cfg: RunConfig) -> int:
    T = poly.from_spec(cfg.poly_specs[0])
    gap = poly.hyperbolicity_gap(T)
    suff = gap >= limitper.DEFAULT_GAP_A
    lines = [
        f"polynomial degree: {T.degree}",
        f"hyperbolicity gap: {gap:.6g}",
        f"expanding: {'yes' if gap > 0 else 'no'}",
        f"sufficiently hyperbolic at A=10: {'yes' if suff else 'no'}"
        + ("" if suff else " -- contraction not guaranteed, measurement mode"),
    ]
    if gap > 0:
        kappa, kglue = renorm.contraction_bounds(T)
        lines.append(f"entry contraction bound: {kappa:.6g}")
        lines.append(f"glue contraction bound: {kglue:.6g}")
        kref = max(kappa, kglue)
        ladder = ", ".join(f"{2 * T.xi * kref ** l:.3g}" for l in range(1, 7))
        lines.append(f"predicted shift-distance ladder 2*xi*k^l: {ladder}")
    lines.append(
        f"window budget: exact for constant/periodic tails at any depth; "
        f"truncated seeds must cover the requested window plus "
        f"{2 * T.degree} sites")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# argument handling

def _add_common(sp):
    sp.add_argument("--config", help="JSON file with defaults for any flag")
    sp.add_argument("--out", default=".", help="output directory")
    sp.add_argument("--tol-scale", type=float, default=1.0)
    sp.add_argument("--tol", action="append", default=[],
                    help="per-check tolerance override, e.g. --tol t01=1e-8")
    sp.add_argument("--threads", default="1",
                    help="worker threads for independent checks (or 'auto')")
    sp.add_argument("--seed-rng", type=int, default=None, dest="seed_rng",
                    help="RNG seed (mandatory for randomized subcommands)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="jjrenorm",
        description="Renormalization of Jacobi matrices over polynomial "
                    "Julia sets")
    sub = ap.add_subparsers(dest="command", required=True)

    p_ren = sub.add_parser("renorm", help="solve one renormalization step")
    p_ren.add_argument("--poly", required=True)
    p_ren.add_argument("--seed", default="constant:6,0")
    p_ren.add_argument("--branch", default="-")
    p_ren.add_argument("--window", default="-64:63")
    p_ren.add_argument("--check", action="store_true")
    _add_common(p_ren)

    p_it = sub.add_parser("iterate", help="drive a renormalization tower")
    p_it.add_argument("--poly", action="append", required=True,
                      help="repeatable for mixed towers")
    p_it.add_argument("--seed", default="constant:6,0")
    p_it.add_argument("--branch-policy", default="fixed:-",
                      dest="branch_policy",
                      help="'fixed:<+->' or 'sequence:<file>'")
    p_it.add_argument("--steps", type=int, default=8)
    p_it.add_argument("--window", default="-256:255")
    _add_common(p_it)

    p_or = sub.add_parser("oracle", help="measure-side oracles")
    p_or.add_argument("--poly", required=True)
    p_or.add_argument("--depth", type=int, default=12)
    p_or.add_argument("--n-coeffs", type=int, default=32, dest="n_coeffs")
    p_or.add_argument("--compare", default=None,
                      help="trace.json from 'iterate' to compare against")
    p_or.add_argument("--ruelle", action="store_true")
    _add_common(p_or)

    p_dx = sub.add_parser("darboux", help="quadratic factorization suite")
    p_dx.add_argument("--rho", type=float, default=12.0)
    p_dx.add_argument("--seed", default="constant:0.5,0")
    p_dx.add_argument("--pairs", type=int, default=8)
    p_dx.add_argument("--sweep", default="12,15,20,30")
    _add_common(p_dx)

    p_dg = sub.add_parser("diagnose", help="hypothesis and budget summary")
    p_dg.add_argument("--poly", required=True)
    _add_common(p_dg)
    return ap


def _apply_config_file(args):
    if getattr(args, "config", None):
        with open(args.config) as fh:
            doc = json.load(fh)
        for key, val in doc.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr):
                setattr(args, attr, val)
    return args


def _threads_value(text) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    n = int(text)
    if n < 1:
        raise ConfigError("--threads must be >= 1 or 'auto'")
    return n


def config_from_args(args) -> RunConfig:
    window = (-256, 255)
    if hasattr(args, "window"):
        try:
            lo, hi = args.window.split(":")
            window = (int(lo), int(hi))
        except ValueError:
            raise ConfigError(f"--window must be 'lo:hi': {args.window!r}")
        if window[0] >= window[1]:
            raise ConfigError("--window must satisfy lo < hi")
    threads_text = getattr(args, "threads", "1")
    if threads_text == "1" and os.environ.get("JJ_THREADS"):
        threads_text = os.environ["JJ_THREADS"]
    cfg = RunConfig(
        command=args.command,
        poly_specs=[parse_poly_arg(p) for p in (
            args.poly if isinstance(getattr(args, "poly", None), list)
            else [args.poly])] if hasattr(args, "poly") else [],
        branch=getattr(args, "branch", "-"),
        seed_spec=getattr(args, "seed", "constant:6,0"),
        steps=getattr(args, "steps", 8),
        window=window,
        tol_scale=getattr(args, "tol_scale", 1.0),
        depth=getattr(args, "depth", 12),
        n_coeffs=getattr(args, "n_coeffs", 32),
        out_dir=getattr(args, "out", "."),
        rng_seed=getattr(args, "seed_rng", None),
        threads=_threads_value(threads_text),
        pairs=getattr(args, "pairs", 8),
        rho=getattr(args, "rho", 12.0),
        run_checks=getattr(args, "check", False),
        compare_path=getattr(args, "compare", None),
        ruelle=getattr(args, "ruelle", False),
    )
    for item in getattr(args, "tol", []):
        try:
            name, val = item.split("=")
        except ValueError:
            raise ConfigError(f"--tol expects name=value: {item!r}")
        if name not in DEFAULT_TOLS:
            raise ConfigError(
                f"unknown check {name!r}; known: {sorted(DEFAULT_TOLS)}")
        cfg.tol_overrides[name] = float(val)
    if hasattr(args, "branch_policy"):
        bp = args.branch_policy
        if bp.startswith("fixed:"):
            cfg.branch = bp[len("fixed:"):]
        elif bp.startswith("sequence:"):
            with open(bp[len("sequence:"):]) as fh:
                cfg.branch = ",".join(line.strip() for line in fh
                                      if line.strip())
        else:
            raise ConfigError(
                f"--branch-policy must be 'fixed:..' or 'sequence:..': {bp!r}")
    if hasattr(args, "sweep"):
        cfg.sweep = tuple(float(v) for v in args.sweep.split(","))
    return cfg


DISPATCH = {
    "renorm": run_renorm,
    "iterate": run_iterate,
    "oracle": run_oracle,
    "darboux": run_darboux,
    "diagnose": run_diagnose,
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        args = _apply_config_file(args)
        cfg = config_from_args(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (ValueError, OSError, json.JSONDecodeError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    try:
        return DISPATCH[cfg.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except JJRenormError as e:
        print(f"numerical failure: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
