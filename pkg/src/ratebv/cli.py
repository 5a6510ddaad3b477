"""
Command-line entry point ``ratebv``.

Exit codes: 0 success, 1 certificate failed, 2 config schema error,
3 unreadable input, 4 numerical failure.  Every non-zero exit writes a JSON
error report to stderr and, when possible, to ``<out>/error.json``.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback
from pathlib import Path

import numpy as np

from . import io
from .certify import certify, component_transient, detect_G, g_components, lambda_recover
from .control import (FDGradientDescent, FullExtraction, NelderMead, Surrogate, optimize)
from .errors import (ArgumentError, EvaluationError, InvariantViolation, NumericalError)
from .model import ControlObjective
from .reparam import extract_bv, reparametrize
from .viscous import edb_residual, solve_autonomous, solve_viscous

EXIT_OK, EXIT_CERT, EXIT_SCHEMA, EXIT_READ, EXIT_NUMERIC = 0, 1, 2, 3, 4

SUBCOMMANDS = ("solve-viscous", "solve-autonomous", "reparam", "extract-bv", "certify",
               "jump-transient", "optimize")


class _Run:
    """State shared by the subcommand handlers."""

    def __init__(self, cfg, out, threads, input_path):
        self.cfg = cfg
        self.out = out
        self.threads = threads
        self.input = input_path
        self.hash = io.config_hash(cfg)
        self.spec = cfg.problem()
        self.load = cfg.load_path()
        self.z0 = cfg.initial_state()
        self.formats = set(cfg.output.formats)

    def json(self, name, payload):
        if "json" in self.formats:
            io.write_json(self.out / name, payload, self.hash)

    def param(self, name, ptraj):
        if "csv" in self.formats:
            io.write_param_csv(self.out / f"{name}.csv", ptraj, self.hash)
        self.json(f"{name}.json", io.param_to_dict(ptraj))

    def viscous(self, name, traj, extra=None):
        if "csv" in self.formats:
            io.write_viscous_csv(self.out / f"{name}.csv", traj, self.hash)
        payload = io.viscous_to_dict(traj)
        payload.update(extra or {})
        self.json(f"{name}.json", payload)

    def with_G(self, ptraj):
        thr = self.cfg.certify.gap_threshold
        if thr is not None:
            ptraj = ptraj.copy(gap_threshold=thr)
        g = detect_G(ptraj)
        lam, _ = lambda_recover(self.spec, self.load, ptraj, g)
        return ptraj.copy(g_mask=g, lam=lam)

    def extract(self):
        r = self.cfg.reparam
        ptraj, report = extract_bv(self.spec, self.load, self.z0, r.eps_list,
                                   lambda e: r.tau_ratio * e, r.s_samples,
                                   extend_constant=r.extend_constant,
                                   excise_jumps=r.excise_jumps, workers=self.threads)
        return self.with_G(ptraj), report

    def param_input(self):
        if self.input is None:
            return self.extract()[0]
        path = Path(self.input)
        sidecar = path.with_suffix(".json")
        thr = self.cfg.certify.gap_threshold
        prov = ()
        if sidecar.exists():
            meta = io.read_json(sidecar)
            thr = thr if thr is not None else meta.get("gap_threshold")
            prov = [tuple(p) for p in meta.get("provenance", [])]
        if thr is None:
            from .reparam import default_gap_threshold
            thr = default_gap_threshold(self.spec)
        ptraj = io.read_param_csv(path, gap_threshold=thr, provenance=prov)
        if ptraj.n != self.spec.n:
            raise ArgumentError("trajectory dimension does not match the model")
        return ptraj


def _solve_viscous(run):
    s = run.cfg.solver
    traj = solve_viscous(run.spec, run.load, run.z0, s.epsilon, s.tau)
    res = edb_residual(run.spec, traj, run.load)
    run.viscous("viscous", traj, {"edb_residual_max": float(np.max(np.abs(res)))})
    return EXIT_OK


def _solve_autonomous(run):
    s = run.cfg.solver
    ell = s.ell_star if s.ell_star is not None else run.load(0.0)
    traj = solve_autonomous(run.spec, np.asarray(ell, dtype=float), run.z0, delta=s.delta,
                            tau=s.tau, stop_gap=s.stop_gap, horizon_cap=s.horizon_cap)
    run.viscous("autonomous", traj)
    return EXIT_OK if traj.converged else EXIT_NUMERIC


def _reparam(run):
    s = run.cfg.solver
    if run.input is not None:
        traj = io.read_viscous_csv(run.input, s.epsilon, s.tau)
    else:
        traj = solve_viscous(run.spec, run.load, run.z0, s.epsilon, s.tau)
    ptraj = reparametrize(run.spec, traj, run.load, run.cfg.reparam.s_samples,
                          excise_jumps=run.cfg.reparam.excise_jumps,
                          gap_threshold=run.cfg.certify.gap_threshold)
    run.param("param_trajectory", run.with_G(ptraj))
    return EXIT_OK


def _extract_bv(run):
    ptraj, report = run.extract()
    run.param("param_trajectory", ptraj)
    run.json("convergence.json", report)
    return EXIT_OK


def _certify(run):
    ptraj = run.param_input()
    rep = certify(run.spec, run.load, run.z0, ptraj, run.cfg.certify.profile)
    run.json("certificate.json", rep)
    return EXIT_OK if rep.passed else EXIT_CERT


def _jump_transient(run):
    ptraj = run.param_input()
    s = run.cfg.solver
    results = []
    for i, comp in enumerate(g_components(detect_G(ptraj))):
        orbit, z_b, dist = component_transient(run.spec, run.load, ptraj, comp, delta=s.delta,
                                               tau=s.tau, stop_gap=s.stop_gap,
                                               horizon_cap=s.horizon_cap)
        run.viscous(f"transient_{i}", orbit)
        results.append({"component": i, "i_start": comp[0], "i_end": comp[1], "z_b": z_b,
                        "z_hat_end": ptraj.z_hat[min(comp[1] + 1, ptraj.s_grid.size - 1)],
                        "distance_V": dist, "converged": orbit.converged,
                        "terminal_gap": orbit.terminal_gap})
    run.json("transients.json", {"components": results})
    return EXIT_OK if all(r["converged"] for r in results) else EXIT_NUMERIC


def _optimize(run):
    c = run.cfg.control
    if c.objective is None:
        raise io.ConfigError("optimize needs control.objective", ["control.objective"])
    obj = ControlObjective(np.array(c.objective.z_des), c.objective.alpha)
    o = c.optimizer.model_dump()
    o.pop("kind")
    opt = NelderMead(**o) if c.optimizer.kind == "nelder_mead" else FDGradientDescent(**o)
    f = c.fidelity.model_dump()
    f.pop("kind")
    fid = Surrogate(**f) if c.fidelity.kind == "surrogate" else FullExtraction(
        tuple(f["eps_list"]), f["tau_ratio"], f["s_samples"])
    res = optimize(run.spec, run.z0, obj, run.load, opt, c.budget, fid, seed=c.seed,
                   workers=run.threads, certify_profile=run.cfg.certify.profile)
    run.json("control_result.json", {
        "best_J": res.best_J, "best_j": res.best_j, "best_h1": res.best_h1,
        "alpha": res.alpha, "search_J": res.search_J, "history": res.history,
        "evaluations": res.evaluations, "successful_evaluations": res.successful_evaluations,
        "converged": res.converged, "notes": res.notes, "best_load": res.best_load,
        "trace": res.trace, "certificate": res.certificate,
    })
    run.json("best_load.json", res.best_load.to_dict())
    run.param("param_trajectory", res.state)
    return EXIT_OK if res.certificate.passed else EXIT_CERT


HANDLERS = {
    "solve-viscous": _solve_viscous, "solve-autonomous": _solve_autonomous,
    "reparam": _reparam, "extract-bv": _extract_bv, "certify": _certify,
    "jump-transient": _jump_transient, "optimize": _optimize,
}


def build_parser():
    p = argparse.ArgumentParser(prog="ratebv", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--seed", type=int, help="overrides control.seed")
    p.add_argument("--threads", type=int, help="worker processes (fallback: RATEBV_THREADS)")
    p.add_argument("--profile", choices=("strict", "standard"), help="overrides certify.profile")
    p.add_argument("--input", help="trajectory CSV for reparam, certify and jump-transient")
    return p


def _error(code, exc, out_dir, fields=None):
    report = {"exit_code": code, "error": type(exc).__name__, "message": str(exc)}
    if fields:
        report["fields"] = fields
    for attr in ("residual", "step"):
        value = io.to_jsonable(getattr(exc, attr, None))
        if value is not None:
            report[attr] = value
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if out_dir is not None:
        try:
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None):
    args = build_parser().parse_args(argv)
    out = Path(args.out) if args.out else None
    try:
        cfg = io.parse_config(args.config)
    except io.ConfigReadError as exc:
        return _error(EXIT_READ, exc, out)
    except io.ConfigError as exc:
        return _error(EXIT_SCHEMA, exc, out, exc.fields)
    updates = {}
    if args.seed is not None:
        updates["control"] = {**cfg.control.model_dump(), "seed": args.seed}
    if args.profile is not None:
        updates["certify"] = {**cfg.certify.model_dump(), "profile": args.profile}
    if updates:
        cfg = io.parse_config({**cfg.model_dump(mode="json"), **updates})
    out = out or Path(cfg.output.directory)
    threads = args.threads or int(os.environ.get("RATEBV_THREADS", "1") or 1)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.effective.json").write_text(io.dump_config(cfg))
        run = _Run(cfg, out, max(1, threads), args.input)
        return HANDLERS[args.subcommand](run)
    except io.ConfigError as exc:
        return _error(EXIT_SCHEMA, exc, out, exc.fields)
    except (NumericalError, EvaluationError, InvariantViolation, FloatingPointError) as exc:
        return _error(EXIT_NUMERIC, exc, out)
    except OSError as exc:
        return _error(EXIT_READ, exc, out)
    except ArgumentError as exc:
        # malformed input trajectories are unreadable inputs
        return _error(EXIT_READ, exc, out)
    except Exception as exc:  # pragma: no cover - last-resort report
        exc.args = (f"{exc}\n{traceback.format_exc()}",)
        return _error(EXIT_NUMERIC, exc, out)


if __name__ == "__main__":
    sys.exit(main())
