"""Command-line front end.

Subcommands
-----------
check          cascade / resilience verdict for a network JSON
compensate     synthesize the supervisory compensator and verify it
attack-search  constructive destabilizer search (scalar channels)
simulate       autonomous response of the (optionally compensated) network
grid-demo      five-generator experiment: tracking, attacks, recovery
norms          H-infinity norm of the interconnected network

Exit codes: check 0 resilient / 2 not resilient / 3 unknown;
compensate 4 on nonzero coupling feedthrough, 5 on verification failure;
norms 5 on an unstable network; 1 on malformed input anywhere.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .compensator import (attach_compensator, performance_bound,
                          synthesize_compensator,
                          synthesize_observer_compensator, verify_triangular)
from .export import plot_commands, plot_outputs, trajectory_csv
from .lti import default_grid, eval_frequency, spectral_abscissa
from .network import NetworkedSystem, interconnect, is_cascade, is_weakly_resilient
from .powergrid import find_destabilizing_attack, grid_network
from .simulate import (ReferenceSignal, Scenario, max_step, run_scenario,
                       simulate)
from .synthesis import SynthesisError, hinf_norm
from .youla import destabilizer_search


def _load_network(path: str) -> NetworkedSystem:
    try:
        return NetworkedSystem.from_json(path)
    except (OSError, json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise SystemExit(f"error: cannot load network from {path}: {exc}") from exc


def _ensure_out(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _dump(obj, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
    print(f"wrote {path}")


def cmd_check(args) -> int:
    ns = _load_network(args.system)
    out = _ensure_out(args)
    cascade = is_cascade(ns)
    print(f"cascade structure: {cascade.value}")
    report = is_weakly_resilient(ns, certify=not args.no_certificate, seed=args.seed)
    print(f"resilience verdict: {report.verdict} (exact={report.exact})")
    for note in report.notes:
        print(f"  note: {note}")
    payload = {"cascade": cascade.value, "verdict": report.verdict,
               "exact": report.exact, "notes": list(report.notes)}
    if report.certificate is not None:
        cert = report.certificate.report()
        payload["certificate"] = cert
        _dump(cert, os.path.join(out, "destabilizer.json"))
        print(f"certified destabilizer: omega={cert['omega']:.4g} "
              f"local={cert['local_abscissa']:.3e} global={cert['global_abscissa']:.3e}")
    _dump(payload, os.path.join(out, "check_report.json"))
    return {"resilient": 0, "not_resilient": 2, "unknown": 3}[report.verdict]


def cmd_compensate(args) -> int:
    ns = _load_network(args.system)
    out = _ensure_out(args)
    try:
        comp = synthesize_compensator(ns, theta_policy=args.theta_policy)
    except SynthesisError as exc:
        if "feedthrough" in str(exc):
            print(f"error: {exc}", file=sys.stderr)
            return 4
        raise
    comp.to_json(os.path.join(out, "compensator.json"))
    print(f"wrote {os.path.join(out, 'compensator.json')} (cut={comp.cut})")
    sysc = attach_compensator(ns, comp)
    tol = args.tol if args.tol is not None else 1e-7
    rep = verify_triangular(sysc, [ns.sub1.decoupled(), ns.sub2.decoupled()], tol=tol)
    pb = performance_bound(comp, ns)
    print(f"triangular: {rep.passed} (ordering={rep.ordering}, "
          f"offdiag={min(rep.offdiag_residual.values()):.2e}, diag={rep.diag_residual:.2e})")
    print(f"performance bound: gamma={pb.gamma:.6g}, factor={pb.factor:.6g}")
    _dump({"cut": comp.cut, "triangular_passed": rep.passed,
           "ordering": rep.ordering, "offdiag_residual": rep.offdiag_residual,
           "diag_residual": rep.diag_residual, "tol": tol,
           "gamma": pb.gamma, "factor": pb.factor},
          os.path.join(out, "compensate_report.json"))
    return 0 if rep.passed else 5


def cmd_attack_search(args) -> int:
    ns = _load_network(args.system)
    out = _ensure_out(args)
    res = destabilizer_search(ns, seed=args.seed)
    _dump(res.report(), os.path.join(out, "destabilizer.json"))
    if res.found:
        print(f"destabilizer found: omega={res.omega:.4g} k={res.allpass.k:.4g} "
              f"a={res.allpass.a:.4g} local={res.local_abscissa:.3e} "
              f"global={res.global_abscissa:.3e}")
        return 0
    print(f"inconclusive: {res.reason}")
    return 3


def cmd_simulate(args) -> int:
    ns = _load_network(args.system)
    out = _ensure_out(args)
    if args.compensator:
        from .compensator import Compensator

        comp = Compensator.from_json(args.compensator)
        plant = attach_compensator(ns, comp)
        n_phi = ns.n
    else:
        plant = interconnect(ns)
        n_phi = 0
    rng = np.random.default_rng(args.seed)
    x0 = np.zeros(plant.n)
    x0[n_phi:n_phi + ns.n] = rng.standard_normal(ns.n)
    h = min(args.h, 0.5 * max_step(plant.A))
    traj = simulate(plant, x0, None, T=args.T, h=h, store_every=args.store_every)
    # split the compensator block out for the CSV layout
    from .simulate import Trajectory

    traj = Trajectory(times=traj.times, states=traj.states[:, n_phi:],
                      comp_states=traj.states[:, :n_phi], outputs=traj.outputs,
                      inputs=traj.inputs, h=traj.h, diverged=traj.diverged,
                      commands=traj.inputs)
    csv_path = os.path.join(out, "trajectory.csv")
    trajectory_csv(traj, csv_path)
    print(f"wrote {csv_path} ({traj.times.size} samples, diverged={traj.diverged})")
    plot_outputs(traj, out)
    return 0


def cmd_norms(args) -> int:
    ns = _load_network(args.system)
    out = _ensure_out(args)
    plant = interconnect(ns)
    absc = spectral_abscissa(plant.A)
    grid = default_grid()
    payload = {"spectral_abscissa": absc}
    try:
        res = hinf_norm(plant, tol=args.tol if args.tol is not None else 1e-4)
    except SynthesisError as exc:
        print(f"error: {exc}", file=sys.stderr)
        _dump(payload, os.path.join(out, "norms.json"))
        return 5
    sig = np.linalg.svd(eval_frequency(plant, grid).values, compute_uv=False)[:, 0]
    payload.update({"hinf_norm": res.norm, "peak_omega": res.peak_omega,
                    "iterations": res.iterations, "grid_max": float(sig.max())})
    print(json.dumps(payload, indent=1))
    _dump(payload, os.path.join(out, "norms.json"))
    return 0


def _segment_tracking_errors(traj, reports):
    """RMS tracking error over the trailing quarter of each segment."""
    errs = {}
    bounds = [r.t_start for r in reports] + [np.inf]
    for i, r in enumerate(reports):
        mask = (traj.times >= bounds[i]) & (traj.times < bounds[i + 1])
        if not np.any(mask):
            errs[f"{r.t_start:g}:{r.key}"] = None
            continue
        idx = np.where(mask)[0]
        tail = idx[3 * len(idx) // 4:]
        e = traj.outputs[tail] - traj.inputs[tail]
        errs[f"{r.t_start:g}:{r.key}"] = float(np.sqrt(np.mean(e * e)))
    return errs


def cmd_grid_demo(args) -> int:
    out = _ensure_out(args)
    gm, ns, k1, k2, ref_ignored, seed_used = grid_network(args.seed)
    summary = {"seed": args.seed, "seed_used": seed_used,
               "compensated": not args.no_compensator, "observer": args.observer}

    comp = None
    if not args.no_compensator:
        if args.observer:
            comp = synthesize_observer_compensator(ns, theta_policy=args.theta_policy)
            pb = performance_bound(comp.base, ns)
        else:
            comp = synthesize_compensator(ns, theta_policy=args.theta_policy)
            pb = performance_bound(comp, ns)
        summary["gamma"] = pb.gamma
        summary["bound_factor"] = pb.factor

    controllers = {"nominal": (k1.realize(), k2.realize())}
    segments = [(0.0, "nominal")]
    if args.attack_at is not None:
        attack = find_destabilizing_attack(ns, k1, k2, seed=seed_used)
        if attack is None:
            print("warning: no destabilizing random attack found; "
                  "falling back to detuned trackers", file=sys.stderr)
            from .powergrid import design_tracking_controllers

            ka1, ka2, _ = design_tracking_controllers(ns, r_scale=1e4, seed=seed_used)
            controllers["attacked"] = (ka1.realize(), ka2.realize())
            summary["attack"] = {"kind": "detuned", "r_scale": 1e4}
        else:
            controllers["attacked"] = (attack.kappa1, attack.kappa2)
            summary["attack"] = {"kind": "free_parameter", "trial": attack.trial,
                                 "gain": attack.gain,
                                 "local_abscissae": list(attack.local_abscissae),
                                 "open_loop_global_abscissa": attack.global_abscissa}
        segments.append((float(args.attack_at), "attacked"))
        if args.recover_at is not None:
            segments.append((float(args.recover_at), "nominal"))

    horizon = args.t_final if args.t_final is not None else segments[-1][0] + 400.0
    rng = np.random.default_rng(seed_used)
    r1 = ReferenceSignal.random_levels(rng, horizon, args.dwell, ns.sub1.q, shared=True)
    r2 = ReferenceSignal.random_levels(rng, horizon, args.dwell, ns.sub2.q, shared=True)
    reference = ReferenceSignal(r1.times, np.hstack([r1.levels, r2.levels]))

    from .simulate import StepSizeError

    h, stride = args.h, args.store_every
    for _ in range(6):
        scenario = Scenario(segments=tuple(segments), horizon=horizon,
                            x0=np.zeros(ns.n), h=h, reference=reference,
                            store_every=stride)
        try:
            traj, reports = run_scenario(ns, comp, scenario, controllers)
            break
        except StepSizeError:
            # tighten the step to meet the stability-resolving guard
            h, stride = h / 2, stride * 2
            print(f"step guard: retrying with h={h:g}", file=sys.stderr)
    else:
        raise StepSizeError("step guard not satisfiable within six halvings")
    summary["h"] = h

    csv_path = os.path.join(out, "trajectory.csv")
    trajectory_csv(traj, csv_path)
    summary["segments"] = [{"t_start": r.t_start, "key": r.key,
                            "abscissa": r.abscissa, "stable": r.stable}
                           for r in reports]
    summary["tracking_rms"] = _segment_tracking_errors(traj, reports)
    summary["diverged"] = traj.diverged
    summary["samples"] = int(traj.times.size)
    files = [csv_path]
    files += plot_outputs(traj, out, reference=traj.inputs)
    upath = plot_commands(traj, out)
    if upath:
        files.append(upath)
    summary["files"] = files
    _dump(summary, os.path.join(out, "summary.json"))
    print(f"grid demo done: diverged={traj.diverged}, "
          f"segments={[(r.key, r.stable) for r in reports]}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netresil",
                                description="networked-system resilience toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--tol", type=float, default=None,
                        help="tolerance override (command specific)")

    sp = sub.add_parser("check", help="cascade / resilience verdict")
    sp.add_argument("system", help="network JSON")
    sp.add_argument("--no-certificate", action="store_true",
                    help="skip the destabilizer search on dense couplings")
    common(sp)
    sp.set_defaults(fn=cmd_check)

    sp = sub.add_parser("compensate", help="synthesize and verify the compensator")
    sp.add_argument("system")
    sp.add_argument("--theta-policy", choices=("gamma_scan", "lqr"),
                    default="gamma_scan")
    common(sp)
    sp.set_defaults(fn=cmd_compensate)

    sp = sub.add_parser("attack-search", help="constructive destabilizer search")
    sp.add_argument("system")
    common(sp)
    sp.set_defaults(fn=cmd_attack_search)

    sp = sub.add_parser("simulate", help="autonomous network response")
    sp.add_argument("system")
    sp.add_argument("--compensator", default=None, help="compensator JSON")
    sp.add_argument("--T", type=float, default=20.0)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--store-every", type=int, default=10)
    common(sp)
    sp.set_defaults(fn=cmd_simulate)

    sp = sub.add_parser("grid-demo", help="five-generator experiment")
    sp.add_argument("--no-compensator", action="store_true")
    sp.add_argument("--observer", action="store_true",
                    help="use the observer-fed compensator")
    sp.add_argument("--attack-at", type=float, default=None)
    sp.add_argument("--recover-at", type=float, default=None)
    sp.add_argument("--t-final", type=float, default=None)
    sp.add_argument("--h", type=float, default=1e-3)
    sp.add_argument("--dwell", type=float, default=100.0,
                    help="reference level dwell time [s]")
    sp.add_argument("--store-every", type=int, default=100)
    sp.add_argument("--theta-policy", choices=("gamma_scan", "lqr"),
                    default="gamma_scan")
    common(sp)
    sp.set_defaults(fn=cmd_grid_demo)

    sp = sub.add_parser("norms", help="H-infinity norm of the network")
    sp.add_argument("system")
    common(sp)
    sp.set_defaults(fn=cmd_norms)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "recover_at", None) is not None and args.attack_at is None:
        print("error: --recover-at requires --attack-at", file=sys.stderr)
        return 1
    try:
        return args.fn(args)
    except SystemExit as exc:
        if isinstance(exc.code, str):
            print(exc.code, file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
