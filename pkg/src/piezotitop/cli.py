"""
Batch front-end.

::

    piezotitop build table1.yaml --out out/
    piezotitop bode --config table1.yaml --omega-min 10 --omega-max 1e5 --points 400
    piezotitop locus table1.yaml --gains 1:1e5:60,log
    piezotitop reproduce-paper --out out/

Exit status: 0 ok, 2 configuration error, 3 numerical error, 4 ill-posed
interconnection.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path
from typing import Optional

import numpy as np

from . import analysis as an
from . import artifacts as art
from . import config as cfg
from . import studies
from .errors import (
    BoundaryConditionError,
    ConfigurationError,
    IllPosedInterconnectionError,
    ModelError,
    NumericalError,
    ParameterError,
    PiezoParameterWarning,
)
from .interconnect import close_rate_feedback
from .ports import port_group

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_ILL_POSED = 0, 2, 3, 4
COMMANDS = ("build", "bode", "locus", "simulate", "export", "reproduce-paper")


class StageError(Exception):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"{stage}: {exc}")
        self.stage, self.exc = stage, exc


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (NumericalError, ModelError, BoundaryConditionError,
            IllPosedInterconnectionError, np.linalg.LinAlgError) as exc:
        raise StageError(name, exc) from exc


def _parse_retain(text: str):
    if text == "all":
        return "all"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError("--retain takes a positive integer or 'all'") from None
    if value < 1:
        raise argparse.ArgumentTypeError("--retain takes a positive integer or 'all'")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="piezotitop", description=__doc__.split("\n\n")[0].strip(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config_path", nargs="?", help="model document (YAML) or preset name")
        p.add_argument("--config", dest="config_flag", help="model document (YAML) or preset name")
        p.add_argument("--out", help="output directory (default: the document's output_dir)")
        p.add_argument("--omega-min", type=float)
        p.add_argument("--omega-max", type=float)
        p.add_argument("--points", type=int)
        p.add_argument("--gains", help="gain grid min:max:n,log")
        p.add_argument("--zeta", type=float, help="modal damping ratio override")
        p.add_argument("--retain", type=_parse_retain, help="retained interior modes, int or 'all'")
        p.add_argument("--seedless", action="store_true",
                       help="assert a deterministic run (no random numbers are used)")
    return parser


# -- commands ---------------------------------------------------------------------

class Context:
    def __init__(self, args, doc: cfg.ModelDoc, source: str):
        self.args, self.doc, self.source = args, doc, source
        self.out = Path(args.out if args.out else doc.output_dir)
        if args.zeta is not None and not 0 <= args.zeta < 1:
            raise ConfigurationError("--zeta must satisfy 0 <= zeta < 1")
        self.zeta = args.zeta
        self.retain = args.retain

    def summary_base(self, command: str) -> dict:
        return {"command": command, "config": self.source, "seedless": bool(self.args.seedless),
                "zeta": self.doc.damping.zeta if self.zeta is None else self.zeta,
                "retain": self.retain if self.retain is not None else self.doc.retain}

    def open_chain(self):
        return _stage("build", studies.open_chain, self.doc, zeta=self.zeta, retain=self.retain)

    def plant(self):
        return _stage("build", studies.plant, self.doc, zeta=self.zeta, retain=self.retain)


def _ports(system) -> dict:
    groups = {}
    for label in system.inputs + system.outputs:
        groups[port_group(label)] = groups.get(port_group(label), 0) + 1
    return groups


def cmd_build(ctx: Context, export: bool = False) -> dict:
    system = ctx.open_chain()
    art.write_json(ctx.out / "ss_matrices.json", art.ss_to_dict(system))
    if export:
        for name, M, rows, cols in (("A", system.A, system.states, system.states),
                                    ("B", system.B, system.states, system.inputs),
                                    ("C", system.C, system.outputs, system.states),
                                    ("D", system.D, system.outputs, system.inputs)):
            art.atomic_write(ctx.out / f"ss_{name}.csv", art.matrix_csv(M, rows, cols))
    poles = system.poles()
    freqs = np.abs(poles[poles.imag > 0]) / (2 * np.pi)
    summary = ctx.summary_base("export" if export else "build")
    summary.update({"inputs": len(system.inputs), "outputs": len(system.outputs),
                    "states": system.n_states, "port_groups": _ports(system),
                    "pole_frequencies_hz": sorted(freqs.tolist())})
    print(f"inputs={len(system.inputs)} outputs={len(system.outputs)}")
    return summary


def cmd_bode(ctx: Context) -> dict:
    exp = ctx.doc.experiment("bode") or cfg.BodeExp(op="bode")
    a = ctx.args
    system = ctx.open_chain()
    pairs = exp.pairs or [(y, u) for y in system.outputs for u in system.inputs]
    resp = _stage("bode", an.bode, system, pairs,
                  a.omega_min if a.omega_min is not None else exp.omega_min,
                  a.omega_max if a.omega_max is not None else exp.omega_max,
                  a.points if a.points is not None else exp.points, exp.spacing)
    art.atomic_write(ctx.out / "bode.csv", art.bode_csv(resp))
    summary = ctx.summary_base("bode")
    mag = np.abs(resp.samples)
    summary.update({"pairs": [list(p) for p in resp.pairs], "points": len(resp.omega),
                    "skipped": int(resp.skipped.sum()),
                    "peak_omega_rad_s": {f"{y}/{u}": float(resp.omega[np.nanargmax(mag[:, j])])
                                         for j, (y, u) in enumerate(resp.pairs)}})
    return summary


def _gains(ctx: Context) -> Optional[np.ndarray]:
    text = ctx.args.gains
    if text is None:
        exp = ctx.doc.experiment("locus")
        text = exp.gains if exp is not None else None
    return None if text is None else studies.parse_gains(text)


def _sweep_summary(res: an.SweepResult) -> dict:
    best = res.poles[res.best_index]
    return {"best_gain": res.best_gain, "best_zeta": res.best_zeta,
            "best_gain_closed_loop_stable": bool(res.stable[res.best_index]),
            "best_stable_gain": res.best_stable_gain, "best_stable_zeta": res.best_stable_zeta,
            "zeta_range": list(res.zeta_range),
            "ill_posed_gains": res.gains[res.ill_posed].tolist(),
            "pole_table": [[p.real, p.imag] for p in best]}


def cmd_locus(ctx: Context) -> dict:
    system = ctx.plant()
    c = ctx.doc.control
    res = _stage("locus", studies.sweep, system, c.sensor, c.actuator, _gains(ctx))
    art.atomic_write(ctx.out / "locus.csv", art.locus_csv(res))
    summary = ctx.summary_base("locus")
    summary.update({"sensor": c.sensor, "actuator": c.actuator, **_sweep_summary(res)})
    return summary


def _signals(exp: cfg.SimulateExp, system) -> list:
    if exp.signals:
        out = []
        for s in exp.signals:
            table = (s.times, s.values) if s.kind == "table" else None
            out.append(an.Signal(s.channel, s.kind, s.amplitude, s.frequency, s.cycles, table))
        return out
    base = system.match_inputs("*.acc_P.w")
    channel = base[0] if base else system.match_inputs("*.v.*")[0]
    return [an.Signal(channel, "step", 1.0)]


def cmd_simulate(ctx: Context) -> dict:
    exp = ctx.doc.experiment("simulate") or cfg.SimulateExp(op="simulate")
    system = ctx.plant()
    c = ctx.doc.control
    gain = c.gain
    if gain is not None and gain > 0:
        system = _stage("build", close_rate_feedback, system, c.sensor, c.actuator, gain).system
    signals = _signals(exp, system)
    dt = exp.dt if exp.dt is not None else _stage("simulate", an.default_time_step, system)
    resp = _stage("simulate", an.simulate, system, signals, exp.t_end, dt)
    art.atomic_write(ctx.out / "sim.csv", art.sim_csv(resp, exp.record_every))
    summary = ctx.summary_base("simulate")
    summary.update({"dt_s": dt, "t_end_s": exp.t_end, "samples": len(resp.t),
                    "gain": gain, "final_outputs": dict(zip(resp.outputs, resp.y[-1].tolist()))})
    return summary


def cmd_reproduce(ctx: Context) -> dict:
    doc = ctx.doc
    resonance = _stage("resonance", studies.resonance_study, doc)

    single = _stage("build", studies.open_chain, doc, components=1, zeta=ctx.zeta,
                    retain=ctx.retain)
    pairs = [p for p in (("b1.g.0", "b1.F_Q.w"), ("b1.g.0", "b1.F_Q.theta"),
                         ("b1.F_P.w", "b1.v.0"), ("b1.F_P.theta", "b1.v.0"))
             if p[0] in single.outputs and p[1] in single.inputs]
    a = ctx.args
    resp = _stage("bode", an.bode, single, pairs,
                  a.omega_min if a.omega_min is not None else 10.0,
                  a.omega_max if a.omega_max is not None else 1e5,
                  a.points if a.points is not None else 400)
    art.atomic_write(ctx.out / "bode.csv", art.bode_csv(resp))

    if doc.piezo is None:
        raise ConfigurationError("reproduce-paper needs a piezo section")
    study = _stage("locus", studies.control_study, doc, gains=_gains(ctx), zeta=ctx.zeta,
                   retain=ctx.retain)
    res = study["sweep"]
    art.atomic_write(ctx.out / "locus.csv", art.locus_csv(res))
    every = 20
    for key, name in (("open", "sim_open.csv"), ("best", "sim_closed.csv"),
                      ("best_stable", "sim_closed_stable.csv")):
        decay = study["decay"][key]
        if decay is not None and decay.response is not None:
            art.atomic_write(ctx.out / name, art.sim_csv(decay.response, every))

    summary = ctx.summary_base("reproduce-paper")
    summary["resonance"] = resonance
    control = dict(study["summary"])
    control["pole_table"] = _sweep_summary(res)["pole_table"]
    summary["control"] = control
    print(f"f1 = {resonance['f1_hz'].get(doc.piezo.ip_formula, 0):.2f} Hz "
          f"(reference {studies.REFERENCE_F1_HZ:g} Hz, verdict {resonance['verdict']})")
    print(f"best zeta = {res.best_zeta:.4f} at K = {res.best_gain:.6g} "
          f"(reference {studies.REFERENCE_ZETA:g}); best stable zeta = "
          f"{res.best_stable_zeta if res.best_stable_zeta is not None else float('nan'):.4f}")
    return summary


# -- entry point ------------------------------------------------------------------

def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    source = args.config_flag or args.config_path or "table1"
    if args.config_flag and args.config_path and args.config_flag != args.config_path:
        print("error: give the model document once (positional or --config)", file=sys.stderr)
        return EXIT_CONFIG
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", PiezoParameterWarning)
            doc = cfg.load(source)
            ctx = Context(args, doc, source)
            handler = {"build": cmd_build,
                       "export": lambda c: cmd_build(c, export=True),
                       "bode": cmd_bode,
                       "locus": cmd_locus,
                       "simulate": cmd_simulate,
                       "reproduce-paper": cmd_reproduce}[args.command]
            summary = handler(ctx)
            art.write_json(ctx.out / "summary.json", summary)
    except (ConfigurationError, ParameterError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        code = EXIT_ILL_POSED if isinstance(exc.exc, IllPosedInterconnectionError) else EXIT_NUMERICAL
        kind = "ill-posed interconnection" if code == EXIT_ILL_POSED else "numerical error"
        print(f"{kind} in stage '{exc.stage}': {exc.exc}", file=sys.stderr)
        return code
    except IllPosedInterconnectionError as exc:
        print(f"ill-posed interconnection: {exc}", file=sys.stderr)
        return EXIT_ILL_POSED
    except (NumericalError, ModelError, BoundaryConditionError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
