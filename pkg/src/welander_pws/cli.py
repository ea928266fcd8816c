"""
Command-line front end.

Subcommands write CSV or JSON to ``--output`` (stdout by default). Exit
codes: 0 success, 1 usage error, 2 numerical failure, 3 a verification ran
but did not confirm its claim.
"""

from __future__ import annotations

import argparse
import json
import sys
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field
from typing import Optional

from .core import Params
from .exceptions import ConvergenceError, DomainError, IntegrationError
from .filippov import IntegratorOptions, SlidePolicy, integrate
from .nonsmooth import (
    EPS0,
    find_pseudoequilibria,
    homoclinic_family,
    iter_diagram,
    verify_homoclinic,
)
from .smooth import limit_study, simulate_smooth
from .welander import build_nonsmooth

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_UNVERIFIED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    model: str = "nonsmooth"
    epsilon: Optional[float] = None
    a: Optional[float] = None
    alpha: float = 0.8
    beta: float = 0.5
    x0: float = 0.5
    y0: float = 0.3
    t_max: float = 100.0
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    slide_policy: str = "escape_upper"
    output: str = "-"
    events: Optional[str] = None
    format: str = "csv"
    extra: dict = field(default_factory=dict)

    def echo(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def _num(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))


@contextmanager
def _open_out(path: str):
    if path == "-":
        yield sys.stdout
        sys.stdout.flush()
    else:
        with open(path, "w", newline="\n") as fh:
            yield fh


# ------------------------------------------------------------------ commands


def cmd_simulate(cfg: RunConfig) -> int:
    if cfg.model == "smooth":
        if cfg.a is None or not cfg.a > 0:
            raise UsageError("the smooth model needs --a > 0")
        traj = simulate_smooth(
            cfg.epsilon, cfg.a, (cfg.x0, cfg.y0), t_max=cfg.t_max,
            rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
        )
    else:
        opts = IntegratorOptions(
            rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol, max_step=cfg.max_step,
            t_max=cfg.t_max, unstable_slide_policy=SlidePolicy(cfg.slide_policy),
        )
        system = build_nonsmooth(Params(cfg.epsilon, cfg.alpha, cfg.beta))
        traj = integrate(system, (cfg.x0, cfg.y0), opts)

    events = [
        {"time": e.time, "x": e.state.x, "y": e.state.y, "kind": e.kind.value, "index": e.index}
        for e in traj.events
    ]
    with _open_out(cfg.output) as fh:
        if cfg.format == "json":
            samples = [
                [t, s.x, s.y, r.value] for t, s, r in zip(traj.times, traj.states, traj.regions)
            ]
            json.dump({"config": asdict(cfg), "samples": samples, "events": events}, fh, sort_keys=True)
            fh.write("\n")
        else:
            fh.write(f"# config: {cfg.echo()}\n")
            fh.write("t,x,y,region\n")
            for t, s, r in zip(traj.times, traj.states, traj.regions):
                fh.write(f"{t!r},{s.x!r},{s.y!r},{r.value}\n")
    sidecar = cfg.events or (None if cfg.output == "-" else cfg.output + ".events.jsonl")
    if sidecar and cfg.format == "csv":
        with open(sidecar, "w", newline="\n") as fh:
            for ev in events:
                fh.write(json.dumps(ev, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_diagram(cfg: RunConfig) -> int:
    lo, hi = cfg.extra["range"]
    n, threads = cfg.extra["n"], cfg.extra["threads"]
    if not lo < hi:
        raise UsageError("--range must be increasing")
    if n < 2:
        raise UsageError("--n must be at least 2")
    rows, failure = [], None
    with _open_out(cfg.output) as fh:
        if cfg.format == "csv":
            fh.write(f"# config: {cfg.echo()}\n")
            fh.write("epsilon,attractor,x_left,x_right,amplitude\n")
        try:
            for r in iter_diagram((lo, hi), n, workers=threads):
                rows.append(r)
                if cfg.format == "csv":
                    fh.write(
                        f"{r.epsilon!r},{r.attractor},{r.x_left!r},{r.x_right!r},{r.amplitude!r}\n"
                    )
                    fh.flush()
        except (IntegrationError, ConvergenceError, DomainError) as exc:
            failure = exc
            if cfg.format == "csv":
                fh.write(f"# INCOMPLETE: {exc}\n")
        if cfg.format == "json":
            doc = {
                "config": asdict(cfg),
                "rows": [dict(asdict(r), amplitude=r.amplitude) for r in rows],
                "complete": failure is None,
            }
            json.dump(doc, fh, sort_keys=True)
            fh.write("\n")
    if failure is not None:
        print(f"diagram: {failure}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _write_json(cfg: RunConfig, doc: dict) -> None:
    with _open_out(cfg.output) as fh:
        json.dump(dict(doc, config=asdict(cfg)), fh, sort_keys=True, indent=2)
        fh.write("\n")


def cmd_homoclinic(cfg: RunConfig) -> int:
    slide_times = cfg.extra["slide_times"]
    if slide_times:
        reports = homoclinic_family(slide_times, tol=cfg.extra["tol"])
    else:
        reports = [verify_homoclinic(delta=cfg.extra["delta"], tol=cfg.extra["tol"])]
    _write_json(cfg, {"reports": [r.as_dict() for r in reports]})
    return EXIT_OK if all(r.verified for r in reports) else EXIT_UNVERIFIED


def cmd_pseudo(cfg: RunConfig) -> int:
    if cfg.epsilon == 0:
        raise UsageError("pseudoequilibria are undefined at epsilon = 0")
    found = find_pseudoequilibria(cfg.epsilon, cfg.alpha, cfg.beta)
    _write_json(cfg, {"pseudoequilibria": [dict(asdict(p), stable=p.stable) for p in found]})
    return EXIT_OK


def cmd_smoothbif(cfg: RunConfig) -> int:
    a_values = cfg.extra["a_values"]
    rows = limit_study(a_values, window=tuple(cfg.extra["window"]))
    gaps = [r.gap for r in rows]
    dist_h = [abs(r.eps_hopf - EPS0) for r in rows]
    dist_sn = [abs(r.eps_snpo - EPS0) for r in rows]

    def decreasing(v):
        return all(x > y for x, y in zip(v[:-1], v[1:]))

    checks = {
        "ordered": all(r.eps_snpo < r.eps_hopf for r in rows),
        "gap_decreasing": decreasing(gaps),
        "hopf_approaches_eps0": decreasing(dist_h),
        "snpo_approaches_eps0": decreasing(dist_sn),
    }
    _write_json(cfg, {"rows": [asdict(r) for r in rows], "checks": checks})
    return EXIT_OK if all(checks.values()) else EXIT_UNVERIFIED


COMMANDS = {
    "simulate": cmd_simulate,
    "diagram": cmd_diagram,
    "homoclinic": cmd_homoclinic,
    "pseudo": cmd_pseudo,
    "smoothbif": cmd_smoothbif,
}


# -------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="welander-pws", description="Filippov dynamics of Welander's model")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, with_format=True):
        p.add_argument("--output", "-o", default="-", help="output path, '-' for stdout")
        if with_format:
            p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--alpha", type=float, default=0.8)
        p.add_argument("--beta", type=float, default=0.5)

    p = sub.add_parser("simulate", help="integrate one trajectory")
    common(p)
    p.add_argument("--model", choices=("nonsmooth", "smooth"), default="nonsmooth")
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--a", type=float, help="arctan width (smooth model)")
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--t-max", type=float, default=100.0)
    p.add_argument("--rel-tol", type=float, default=1e-10)
    p.add_argument("--abs-tol", type=float, default=1e-12)
    p.add_argument("--max-step", type=float, default=0.5)
    p.add_argument(
        "--slide-policy", choices=[m.value for m in SlidePolicy], default="escape_upper",
        help="continuation from an unstable sliding segment",
    )
    p.add_argument("--events", help="events sidecar path (default: <output>.events.jsonl)")

    p = sub.add_parser("diagram", help="attractor per epsilon over a range")
    common(p)
    p.add_argument("--range", type=float, nargs=2, required=True, metavar=("LO", "HI"))
    p.add_argument("--n", type=int, default=71)
    p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("homoclinic", help="homoclinic orbits at eps = -1/15")
    common(p, with_format=False)
    p.add_argument("--delta", type=float, default=1e-8)
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--slide-times", type=float, nargs="+", help="build the sliding family instead")

    p = sub.add_parser("pseudo", help="list pseudoequilibria")
    common(p, with_format=False)
    p.add_argument("--epsilon", type=float, required=True)

    p = sub.add_parser("smoothbif", help="Hopf and periodic-orbit fold as a shrinks")
    common(p, with_format=False)
    p.add_argument("--a", type=float, nargs="+", required=True, dest="a_values")
    p.add_argument("--window", type=float, nargs=2, default=(-0.072, -0.060), metavar=("LO", "HI"))
    return parser


_EXTRA = ("range", "n", "threads", "delta", "tol", "slide_times", "a_values", "window")


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    d = vars(ns)
    extra = {k: d[k] for k in _EXTRA if k in d}
    if "range" in extra:
        extra["range"] = list(extra["range"])
    if "window" in extra:
        extra["window"] = list(extra["window"])
    cfg = RunConfig(command=ns.command, extra=extra)
    for name in ("model", "epsilon", "a", "alpha", "beta", "x0", "y0", "t_max",
                 "rel_tol", "abs_tol", "max_step", "slide_policy", "output", "events", "format"):
        if name in d and d[name] is not None:
            setattr(cfg, name, d[name])
    if ns.command == "homoclinic":
        cfg.epsilon = EPS0
    if ns.command not in ("simulate", "diagram"):
        cfg.format = "json"
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    cfg = config_from_args(ns)
    try:
        return COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {cfg.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        print(f"{cfg.command}: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IntegrationError, ConvergenceError) as exc:
        state = getattr(exc, "last_state", None)
        where = f" (last state {state}, t={exc.time})" if state is not None else ""
        print(f"{cfg.command}: numerical failure: {exc}{where}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
