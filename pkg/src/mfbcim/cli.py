"""Command-line driver.

Subcommands: gen-problem, run-total, run-conditional, oracle, experiment,
analyze. Exit codes: 0 success, 2 configuration/usage error, 3 numerical
divergence, 4 capacity error.

All CSV/JSON outputs carry a provenance header with the resolved config and
seed, use shortest round-trip float formatting, and are byte-identical for
equal seeds at any thread count.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import backend
from .config import ConfigError, parse_config, provenance_lines, resolve_threads
from .density_oracle import FockOps, TraceDriftError, run_unconditional, validate_state
from .experiments import (
    energy_histogram,
    run_experiment_a,
    run_experiment_b,
    run_experiment_c,
    run_ramp_experiment,
    spins_from_x,
    success_probability,
)
from .model import CimParams, RampSchedule
from .problems import (
    CapacityError,
    brute_force_ground_state,
    ising_energy,
    random_graph_problem,
    read_problem,
    ring_afm,
    write_problem,
)
from .sde_conditional import run_conditional
from .sde_total import DivergenceError, run_total


def _fmt(v):
    return repr(float(v))


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _json_dump(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _load_config(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    if args.seed is not None:
        cfg.run["seed"] = args.seed
    return cfg


def _outdir(args):
    os.makedirs(args.out, exist_ok=True)
    return args.out


def cmd_gen_problem(args):
    if args.ring is not None:
        problem = ring_afm(args.ring)
    elif args.random is not None:
        n, p = int(args.random[0]), float(args.random[1])
        problem = random_graph_problem(n, p, args.seed if args.seed is not None else 0)
    else:
        raise ConfigError("gen-problem needs --ring N or --random N P")
    write_problem(problem, args.out)
    print(f"wrote {problem.n}-spin problem to {args.out}")
    return 0


def _trace_csv_total(cfg, rec):
    lines = provenance_lines(cfg, {"backend": rec.meta["backend"], "seed": rec.seed})
    lines.append("t,mode,mean_re_x,mean_im_x,sem_re_x")
    for k, t in enumerate(rec.times):
        for m in range(rec.mean_x.shape[1]):
            lines.append(
                f"{_fmt(t)},{m},{_fmt(rec.mean_x[k, m].real)},"
                f"{_fmt(rec.mean_x[k, m].imag)},{_fmt(rec.sem_x[k, m])}"
            )
    return lines


def cmd_run_total(args):
    cfg = _load_config(args)
    out = _outdir(args)
    ec = cfg.experiment_config(threads=args.threads)
    rec = run_total(ec.problem, ec.params, ec.schedule, ec.n_traj, ec.n_steps,
                    ec.seed, record_stride=ec.stride, scheme=ec.scheme)
    _write_lines(os.path.join(out, "trace.csv"), _trace_csv_total(cfg, rec))
    final = provenance_lines(cfg, {"backend": rec.meta["backend"], "seed": rec.seed})
    final.append("traj,mode,re_alpha,im_alpha,re_beta,im_beta")
    for s in range(rec.final.n_traj):
        for m in range(rec.final.n_modes):
            a, b = rec.final.alpha[s, m], rec.final.beta[s, m]
            final.append(f"{s},{m},{_fmt(a.real)},{_fmt(a.imag)},{_fmt(b.real)},{_fmt(b.imag)}")
    _write_lines(os.path.join(out, "final.txt"), final)
    spins = spins_from_x(rec.final.x)
    energies = ising_energy(ec.problem, spins)
    _json_dump(os.path.join(out, "summary.json"), {
        "seed": rec.seed,
        "backend": rec.meta["backend"],
        "final_mean_energy": float(energies.mean()),
        "final_mean_x_re": rec.mean_x[-1].real,
        "final_sem_x_re": rec.sem_x[-1],
        "t_final": float(rec.times[-1]),
    })
    print(f"run-total: {rec.final.n_traj} trajectories, final <E> = {energies.mean():.6g} -> {out}")
    return 0


def cmd_run_conditional(args):
    cfg = _load_config(args)
    out = _outdir(args)
    ec = cfg.experiment_config(threads=args.threads)
    if ec.params.gamma_m <= 0:
        raise ConfigError("[params] conditional run needs gamma_m > 0")
    rec = run_conditional(ec.problem, ec.params, ec.schedule, ec.n_traj, ec.n_steps,
                          ec.eps_thr, ec.seed, record_stride=ec.stride)
    lines = provenance_lines(cfg, {"backend": rec.meta["backend"], "seed": rec.seed})
    lines.append("t,mode,wmean_re_x,wmean_im_x,weight_min,weight_max,weight_mean,breed_count")
    for k, t in enumerate(rec.times):
        for m in range(rec.wmean_x.shape[1]):
            lines.append(
                f"{_fmt(t)},{m},{_fmt(rec.wmean_x[k, m].real)},{_fmt(rec.wmean_x[k, m].imag)},"
                f"{_fmt(rec.weight_min[k])},{_fmt(rec.weight_max[k])},"
                f"{_fmt(rec.weight_mean[k])},{rec.breed_counts[k]}"
            )
    _write_lines(os.path.join(out, "trace.csv"), lines)
    spin_lines = provenance_lines(cfg, {"seed": rec.seed})
    spin_lines.append("spins " + " ".join(str(int(s)) for s in rec.spins))
    spin_lines.append(f"energy {_fmt(rec.energy)}")
    _write_lines(os.path.join(out, "spins.txt"), spin_lines)
    _json_dump(os.path.join(out, "summary.json"), {
        "seed": rec.seed,
        "backend": rec.meta["backend"],
        "spins": rec.spins,
        "energy": rec.energy,
        "breed_count": int(rec.breed_counts[-1]),
    })
    print(f"run-conditional: energy {rec.energy:.6g}, {int(rec.breed_counts[-1])} breed events -> {out}")
    return 0


def cmd_oracle(args):
    out = _outdir(args)
    params = CimParams(args.gamma_s, args.gamma_m, args.gamma_p, args.kappa)
    schedule = RampSchedule.constant(args.t_max, args.eps_p)
    ops = FockOps(args.modes, args.cutoff, params.gamma_m)
    checkpoints = np.linspace(0.0, args.t_max, args.checkpoints + 1)[1:]
    dt = args.t_max / args.n_steps
    times, moments = run_unconditional(ops, params, schedule, dt, args.n_steps,
                                       record_times=checkpoints)
    records = []
    for k, t in enumerate(times):
        records.append({
            "t": float(t),
            "x": moments["x"][k],
            "x2": moments["x2"][k],
            "n": moments["n"][k],
        })
    _json_dump(os.path.join(out, "oracle.json"), {"records": records, "cutoff": args.cutoff})
    if not args.compare_total:
        print(f"oracle: {len(records)} checkpoints -> {out}")
        return 0

    if args.modes != 1:
        raise ConfigError("--compare-total supports a single mode")
    from .problems import IsingProblem

    problem = IsingProblem(np.zeros((1, 1)))
    rec = run_total(problem, params, schedule, args.n_traj, args.n_steps,
                    args.seed if args.seed is not None else 1,
                    record_stride=max(1, args.n_steps // args.checkpoints))
    # near-zero references (e.g. <x> in a symmetric run) are compared on an
    # absolute scale of 1 instead of blowing up a relative ratio
    worst = 0.0
    for k, t in enumerate(times):
        idx = int(np.argmin(np.abs(rec.times - t)))
        for key, sde in (("x", rec.mean_x[idx, 0].real),
                         ("x2", rec.mean_x2[idx, 0].real),
                         ("n", rec.mean_n[idx, 0].real)):
            ref = float(moments[key][k][0])
            scale = max(abs(ref), 1.0)
            worst = max(worst, abs(sde - ref) / scale)
    print(f"oracle comparison: max relative deviation {worst:.6g} "
          f"({args.n_traj} trajectories, cutoff {args.cutoff})")
    return 0


def cmd_experiment(args):
    cfg = _load_config(args)
    out = _outdir(args)
    ec = cfg.experiment_config(threads=args.threads)
    which = cfg.run["experiment"]
    runner = {"a": run_experiment_a, "b": run_experiment_b, "c": run_experiment_c,
              "none": run_ramp_experiment}[which]
    summary = runner(ec)
    payload = {
        "experiment": which,
        "seed": ec.seed,
        "backend": backend.active_name(),
        "histogram_edges": summary.histogram["edges"],
        "histogram_mass": summary.histogram["mass"],
        "mean_energy": float(summary.energies.mean()),
    }
    if summary.success is not None:
        payload["success"] = summary.success
        payload["success_err"] = summary.success_err
        payload["ground_energy"] = summary.ground_energy
    _json_dump(os.path.join(out, "summary.json"), payload)
    lines = provenance_lines(cfg, {"seed": ec.seed})
    lines.append("energy")
    lines.extend(_fmt(e) for e in summary.energies)
    _write_lines(os.path.join(out, "energies.csv"), lines)
    if summary.mean_energy_trace is not None:
        tr = provenance_lines(cfg, {"seed": ec.seed})
        tr.append("t,mean_energy,std_energy")
        tr.extend(f"{_fmt(a)},{_fmt(b)},{_fmt(c)}" for a, b, c in summary.mean_energy_trace)
        _write_lines(os.path.join(out, "mean_energy.csv"), tr)
    msg = f"experiment {which}: mean energy {summary.energies.mean():.6g}"
    if summary.success is not None:
        msg += f", success {summary.success:.4f} +- {summary.success_err:.4f}"
    print(msg + f" ({summary.elapsed:.1f}s) -> {out}")
    return 0


def cmd_analyze(args):
    problem = read_problem(args.problem)
    with open(args.final) as fh:
        rows = [ln for ln in fh if ln.strip() and not ln.startswith("#")]
    if not rows or not rows[0].startswith("traj,"):
        raise ConfigError(f"{args.final}: not a final-state table")
    data = np.array([[float(v) for v in ln.split(",")] for ln in rows[1:]])
    n_rows = data.shape[0]
    n_traj = int(data[:, 0].max()) + 1
    if n_rows != n_traj * problem.n:
        raise ConfigError(
            f"final-state table has {n_rows} rows, expected n_traj*{problem.n}"
        )
    x = (data[:, 2] + data[:, 4]).reshape(n_traj, problem.n)
    spins = spins_from_x(x)
    energies = ising_energy(problem, spins)
    hist = energy_histogram(energies, args.bins)
    payload = {
        "mean_energy": float(energies.mean()),
        "min_energy": float(energies.min()),
        "histogram_edges": hist["edges"],
        "histogram_mass": hist["mass"],
    }
    if problem.n <= 24:
        ground, ground_energy = brute_force_ground_state(problem)
        p, err = success_probability(spins, ground)
        payload.update(ground_energy=ground_energy, success=p, success_err=err)
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    _json_dump(args.out, payload)
    print(f"analyze: {n_traj} states, mean energy {energies.mean():.6g} -> {args.out}")
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="mfbcim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_default="mfbcim-out"):
        p.add_argument("--seed", type=int, default=None, help="override the run seed")
        p.add_argument("--threads", type=int, default=0, help="worker threads (0 = auto)")
        p.add_argument("--out", default=out_default, help="output directory or file")

    g = sub.add_parser("gen-problem", help="write a coupling file")
    g.add_argument("--ring", type=int, default=None, metavar="N")
    g.add_argument("--random", nargs=2, default=None, metavar=("N", "P"))
    common(g, out_default="problem.txt")
    g.set_defaults(fn=cmd_gen_problem)

    for name, fn in (("run-total", cmd_run_total), ("run-conditional", cmd_run_conditional),
                     ("experiment", cmd_experiment)):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        common(p)
        p.set_defaults(fn=fn)

    o = sub.add_parser("oracle", help="density-matrix reference run / SDE comparison")
    o.add_argument("--modes", type=int, default=1, choices=(1, 2))
    o.add_argument("--cutoff", type=int, default=24)
    o.add_argument("--compare-total", action="store_true")
    o.add_argument("--gamma-s", type=float, default=0.9)
    o.add_argument("--gamma-m", type=float, default=0.1)
    o.add_argument("--gamma-p", type=float, default=2.0)
    o.add_argument("--kappa", type=float, default=0.5)
    o.add_argument("--eps-p", type=float, default=6.0)
    o.add_argument("--t-max", type=float, default=5.0)
    o.add_argument("--n-steps", type=int, default=2500)
    o.add_argument("--n-traj", type=int, default=20000)
    o.add_argument("--checkpoints", type=int, default=10)
    common(o)
    o.set_defaults(fn=cmd_oracle)

    a = sub.add_parser("analyze", help="summaries from saved final states")
    a.add_argument("--problem", required=True)
    a.add_argument("--final", required=True)
    a.add_argument("--bins", type=int, default=50)
    common(a, out_default="analysis.json")
    a.set_defaults(fn=cmd_analyze)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    threads = resolve_threads(args.threads) if hasattr(args, "threads") else 1
    args.threads = threads
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DivergenceError, TraceDriftError) as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return 3
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 4
    except (ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
