"""Command-line orchestration of the pricing pipeline.

One JSON config per run; every resolved setting is echoed to
defaults.json in the output directory so runs are reproducible from
their artifacts alone.  Exit codes: 0 success, 2 validation problem,
3 numerical failure.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import circuits, extraction, grid, inversion, oracle
from .errors import QasianError, ValidationError, InfeasibleScaleError

DEFAULT_CONFIG = {
    "params": {
        "sigma": 0.3,
        "r": 0.05,
        "q": 0.0,
        "T": 1.0,
        "K": 1.0,
        "eta_max": 4.0,
        "kind": "avg_rate_call",
    },
    "n_eta": 4,
    "n_tau1": None,          # None -> chosen by make_grid
    "eps_target": 1e-3,
    "scale_c": 1.0,
    "band": 1.5,
    "c_smooth": 1.0,
    "extraction": {
        "M_eta": 6,
        "M_tau1": 4,
        "Delta": None,       # None -> T/4
        "ae_mode": "exact",
        "ae_eps": 1e-4,
        "seed": 0,
    },
    "oracle": {
        "S0": 1.0,
        "n_paths": 100000,
        "n_steps": 64,
        "seed": 1,
        "cn_refine": 8,      # oracle grid = refine x quantum grid
    },
    "mode": "exact-inversion",
    "dense_cap": grid.DENSE_CAP,
    "outdir": "qasian-out",
    "kink_shift": 0.0,
}

PRESETS = {
    # smoke raises sigma so the smoothing inequality is satisfiable at
    # the coarsest spatial grid
    "smoke": {"n_eta": 3, "params": {"sigma": 0.5},
              "extraction": {"M_eta": 4, "M_tau1": 2}},
    "kink-study": {"n_eta": 5, "params": {"sigma": 0.5},
                   "extraction": {"M_eta": 6, "M_tau1": 3}},
}


def _deep_update(base, overrides):
    out = dict(base)
    for k, v in (overrides or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_update(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, preset=None, overrides=None):
    cfg = dict(DEFAULT_CONFIG)
    if preset:
        if preset not in PRESETS:
            raise ValidationError(f"unknown preset {preset!r}")
        cfg = _deep_update(cfg, PRESETS[preset])
    if path:
        with open(path) as fh:
            cfg = _deep_update(cfg, json.load(fh))
    if overrides:
        cfg = _deep_update(cfg, overrides)
    return cfg


def _market(cfg):
    return grid.MarketParams(**cfg["params"])


def _spec(cfg, params):
    if cfg.get("n_tau1"):
        return grid.grid_spec_direct(params, cfg["n_eta"], cfg["n_tau1"],
                                     eps_target=cfg["eps_target"],
                                     Delta=cfg["extraction"]["Delta"])
    return grid.make_grid(params, cfg["n_eta"], cfg["eps_target"],
                          scale_c=cfg["scale_c"], band=cfg["band"],
                          c_smooth=cfg["c_smooth"],
                          Delta=cfg["extraction"]["Delta"])


def _estimator(cfg):
    e = cfg["extraction"]
    return extraction.AmplitudeEstimator(
        mode=e["ae_mode"], eps_prime=e["ae_eps"], seed=e["seed"])


def _outdir(cfg):
    out = cfg["outdir"]
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, "defaults.json"), "w") as fh:
        json.dump(cfg, fh, indent=2)
    return out


def _write_summary(out, summary):
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, default=float)


def run_pipeline(cfg):
    """Full pipeline: build, precondition, solve, extract, price."""
    out = _outdir(cfg)
    summary = {"stage": "build", "errors": {}}
    try:
        params = _market(cfg)
        spec = _spec(cfg, params)
        summary["grid"] = {"n_eta": spec.n_eta, "n_tau1": spec.n_tau1,
                           "delta_tau1": spec.delta_tau1,
                           "delta_eta_hat": spec.delta_eta_hat}

        summary["stage"] = "solve"
        psi_tilde, norm_b, report = inversion.solve_pricing_system(
            spec, params, kink_shift=cfg["kink_shift"])
        with open(os.path.join(out, "condition_report.json"), "w") as fh:
            fh.write(report.to_json())
        summary["condition"] = json.loads(report.to_json())
        summary["errors"]["norm_b"] = norm_b

        summary["stage"] = "extract"
        sol_norm = float(np.linalg.norm(psi_tilde))
        state = circuits.StateVector(psi_tilde / sol_norm,
                                     {"tau1": (spec.n_eta, spec.n_tau1),
                                      "eta": (0, spec.n_eta)})
        est = _estimator(cfg)
        e = cfg["extraction"]
        ecfg = {"M_eta": e["M_eta"], "M_tau1": e["M_tau1"],
                "eta_max": params.eta_max}
        if e["Delta"] is not None:
            ecfg["Delta"] = e["Delta"]
        result = extraction.extract_psi_2d(
            state, spec, ecfg, est, scale=norm_b * sol_norm ** 2)
        summary["errors"]["extraction_bound"] = result.err_bound
        summary["extraction"] = {"ae_calls": result.ae_calls,
                                 "ae_cost": result.ae_cost}
        _emit_extraction_csvs(out, spec, params, result)

        summary["stage"] = "price"
        quote = _price_from_result(result, spec, params, cfg)
        summary["price"] = {"value": quote.value, "method": quote.method}
        with open(os.path.join(out, "quotes.csv"), "w") as fh:
            fh.write("method,value,stderr\n")
            fh.write(f"{quote.method},{quote.value:.12g},{quote.stderr:.12g}\n")

        summary["stage"] = "done"
        return summary, result, quote
    finally:
        _write_summary(out, summary)


def _price_from_result(result, spec, params, cfg):
    """Price today (t = 0, no accumulated average) from the interpolant.

    tau1 = T sits just outside the interior lattice, so the surface is
    read at the last interior time node; the gap is O(delta_tau1).
    """
    S0 = cfg["oracle"]["S0"]
    eta0, _ = oracle.eta_of(S0, 0.0, 0.0, params)
    interp = result.interpolant
    tau1_eval = spec.delta_tau1 * (interp.t_lo + interp.Nt_win)
    psi_val = interp.psi(tau1_eval, eta0)
    return oracle.price_from_psi(psi_val, S0, 0.0, 0.0, params)


def _emit_extraction_csvs(out, spec, params, result):
    interp = result.interpolant
    nidx_t, s_t = interp.nodes_t
    nidx_x, s_x = interp.nodes_x
    with open(os.path.join(out, "nodes.csv"), "w") as fh:
        fh.write("t_index,s_t,x_index,s_x,raw_integral,psi\n")
        for k in range(len(nidx_t)):
            for l in range(len(nidx_x)):
                fh.write(f"{nidx_t[k]},{s_t[k]:.12g},{nidx_x[l]},"
                         f"{s_x[l]:.12g},{result.raw_integrals[k, l]:.12g},"
                         f"{result.psi_nodes[k, l]:.12g}\n")
    eta = grid.eta_nodes(spec, params)
    tau1 = spec.delta_tau1 * (interp.t_lo + 1 + np.arange(interp.Nt_win))
    with open(os.path.join(out, "surface.csv"), "w") as fh:
        fh.write("tau1,eta,psi\n")
        for t in tau1:
            vals = interp.psi(t, eta)
            for x, v in zip(eta, np.atleast_1d(vals)):
                fh.write(f"{t:.12g},{x:.12g},{v:.12g}\n")


def run_compare(cfg):
    """Pipeline price vs Monte-Carlo on the configured scenario."""
    summary, result, quote = run_pipeline(cfg)
    o = cfg["oracle"]
    params = _market(cfg)
    mc = oracle.monte_carlo_price(params, o["S0"], o["n_paths"],
                                  o["n_steps"], seed=o["seed"])
    gap = abs(quote.value - mc.value)
    tol = max(3 * mc.stderr, result.err_bound)
    comparison = {
        "pipeline": quote.value,
        "mc": mc.value,
        "mc_stderr": mc.stderr,
        "gap": gap,
        "tolerance": tol,
        "consistent": bool(gap <= tol),
    }
    out = cfg["outdir"]
    with open(os.path.join(out, "compare.json"), "w") as fh:
        json.dump(comparison, fh, indent=2)
    return comparison


def run_convergence(cfg, levels):
    """Error/cost table over successive spatial refinements.

    Truth is the direct statevector readout, which simulation makes
    available; the table exhibits how extraction error and accounted
    amplitude-estimation cost move as the grid refines.
    """
    if levels < 3:
        raise ValidationError("convergence study needs >= 3 levels")
    out = _outdir(cfg)
    params = _market(cfg)
    rows = []
    for lvl in range(levels):
        n_eta = cfg["n_eta"] + lvl
        spec = grid.make_grid(params, n_eta, cfg["eps_target"],
                              scale_c=cfg["scale_c"], band=cfg["band"],
                              c_smooth=cfg["c_smooth"])
        psi_tilde, norm_b, _ = inversion.solve_pricing_system(spec, params)
        sol_norm = float(np.linalg.norm(psi_tilde))
        state = circuits.StateVector(psi_tilde / sol_norm)
        est = _estimator(cfg)
        e = cfg["extraction"]
        ecfg = {"M_eta": e["M_eta"], "M_tau1": min(e["M_tau1"], spec.N_tau1),
                "eta_max": params.eta_max}
        result = extraction.extract_psi_2d(state, spec, ecfg, est,
                                           scale=norm_b * sol_norm ** 2)
        truth = _direct_readout(psi_tilde, norm_b, spec, result)
        err = float(np.max(np.abs(result.psi_nodes - truth)))
        rows.append({"n_eta": n_eta, "n_tau1": spec.n_tau1, "error": err,
                     "ae_calls": result.ae_calls, "ae_cost": result.ae_cost})
    with open(os.path.join(out, "convergence.csv"), "w") as fh:
        fh.write("n_eta,n_tau1,error,ae_calls,ae_cost\n")
        for r in rows:
            fh.write(f"{r['n_eta']},{r['n_tau1']},{r['error']:.12g},"
                     f"{r['ae_calls']},{r['ae_cost']:.12g}\n")
    return rows


def _direct_readout(psi_tilde, norm_b, spec, result):
    """|psi| read straight off the solution vector at the node grid."""
    surface = math.sqrt(norm_b) * np.abs(
        np.asarray(psi_tilde).reshape(spec.N_tau1, spec.N_eta))
    nidx_t, _ = result.interpolant.nodes_t
    nidx_x, _ = result.interpolant.nodes_x
    return surface[np.ix_(nidx_t, nidx_x)]


def run_dump_encoding(cfg, which):
    out = _outdir(cfg)
    params = _market(cfg)
    spec = _spec(cfg, params)
    if which == "ctau1":
        be = circuits.build_ctau1_encoding(spec)
    elif which == "eta":
        be = circuits.encode_eta(spec)
    elif which == "spectral":
        be = circuits.encode_spectral(spec)
    else:
        raise ValidationError(f"unknown encoding {which!r}")
    desc = circuits.encoding_report(be)
    with open(os.path.join(out, f"encoding_{which}.json"), "w") as fh:
        json.dump(desc, fh, indent=2)
    grid.matrix_to_csv(be.top_block(),
                       os.path.join(out, f"encoding_{which}.csv"))
    return desc


def run_build(cfg):
    out = _outdir(cfg)
    params = _market(cfg)
    spec = _spec(cfg, params)
    ops = grid.build_operators(spec, params, kink_shift=cfg["kink_shift"])
    for name, mat in (("C_tau1", ops.C_tau1), ("C_eta1", ops.C_eta1),
                      ("C_eta2", ops.C_eta2), ("A1", ops.A1), ("A2", ops.A2)):
        grid.matrix_to_csv(mat, os.path.join(out, f"{name}.csv"))
        with open(os.path.join(out, f"{name}.json"), "w") as fh:
            fh.write(grid.operator_descriptor(name, spec))
    return {"n_eta": spec.n_eta, "n_tau1": spec.n_tau1,
            "norm_b": ops.norm_b, "outdir": out}


def run_solve(cfg):
    out = _outdir(cfg)
    params = _market(cfg)
    spec = _spec(cfg, params)
    psi_tilde, norm_b, report = inversion.solve_pricing_system(
        spec, params, kink_shift=cfg["kink_shift"])
    with open(os.path.join(out, "condition_report.json"), "w") as fh:
        fh.write(report.to_json())
    grid.matrix_to_csv(psi_tilde.reshape(spec.N_tau1, spec.N_eta),
                       os.path.join(out, "solution.csv"))
    return {"norm_b": norm_b, "kappa_W": report.kappa_W, "outdir": out}


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="qasian",
        description="Simulated quantum-preconditioned Asian-option pricer")
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--preset", help="named preset "
                        f"({', '.join(PRESETS)})")
    parser.add_argument("--outdir", help="output directory override")
    parser.add_argument("--n-eta", type=int, dest="n_eta")
    parser.add_argument("--ae-mode", dest="ae_mode",
                        choices=["exact", "stochastic", "adversarial", "shots"])
    parser.add_argument("--ae-eps", dest="ae_eps", type=float)
    parser.add_argument("--seed", type=int)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("build", help="build and export the discrete operators")
    sub.add_parser("solve", help="assemble, precondition and solve")
    sub.add_parser("extract", help="solve and extract the psi surface")
    sub.add_parser("price", help="full pipeline ending in a price quote")
    sub.add_parser("compare", help="pipeline price vs Monte-Carlo")
    conv = sub.add_parser("converge", help="refinement study")
    conv.add_argument("--levels", type=int, default=3)
    dump = sub.add_parser("dump-encoding", help="export a block-encoding")
    dump.add_argument("which", choices=["ctau1", "eta", "spectral"])

    args = parser.parse_args(argv)
    overrides = {}
    if args.outdir:
        overrides["outdir"] = args.outdir
    if args.n_eta:
        overrides["n_eta"] = args.n_eta
    ext_over = {}
    if args.ae_mode:
        ext_over["ae_mode"] = args.ae_mode
    if args.ae_eps is not None:
        ext_over["ae_eps"] = args.ae_eps
    if args.seed is not None:
        ext_over["seed"] = args.seed
    if ext_over:
        overrides["extraction"] = ext_over

    try:
        cfg = load_config(args.config, args.preset, overrides)
        if args.command == "build":
            print(json.dumps(run_build(cfg), indent=2))
        elif args.command == "solve":
            print(json.dumps(run_solve(cfg), indent=2))
        elif args.command in ("extract", "price"):
            summary, _, _ = run_pipeline(cfg)
            print(json.dumps(summary, indent=2, default=float))
        elif args.command == "compare":
            print(json.dumps(run_compare(cfg), indent=2))
        elif args.command == "converge":
            rows = run_convergence(cfg, args.levels)
            print(json.dumps(rows, indent=2, default=float))
        elif args.command == "dump-encoding":
            print(json.dumps(run_dump_encoding(cfg, args.which), indent=2))
    except (ValidationError, InfeasibleScaleError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 2
    except QasianError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
