"""Run configuration: sectioned key-value files, fully validated up front.

Sections and keys:

  [problem]  kind = ring | random | file
             n (ring/random), p, graph_seed (random), path (file)
  [params]   gamma_s, gamma_m, gamma_p, kappa, zeta
  [schedule] t_max, pump_start, pump_end, zeta_start, zeta_end
  [run]      experiment (a|b|c|none), method (total|conditional),
             n_traj, n_steps, n_runs, eps_thr, seed,
             record_stride (0=auto), hist_bins, threads (0=auto), scheme

Execution-only fields (threads, out_dir) never enter output provenance so
that equal seeds give byte-identical outputs at any thread count.
"""

import configparser
import io
import os
from dataclasses import dataclass, field

from .experiments import ExperimentConfig
from .model import CimParams, RampSchedule
from .problems import random_graph_problem, read_problem, ring_afm


class ConfigError(Exception):
    pass


_SCHEMA = {
    "problem": {"kind", "n", "p", "graph_seed", "path"},
    "params": {"gamma_s", "gamma_m", "gamma_p", "kappa", "zeta"},
    "schedule": {"t_max", "pump_start", "pump_end", "zeta_start", "zeta_end"},
    "run": {
        "experiment", "method", "n_traj", "n_steps", "n_runs", "eps_thr",
        "seed", "record_stride", "hist_bins", "threads", "scheme",
    },
}

_RUN_DEFAULTS = {
    "experiment": "none",
    "method": "total",
    "n_traj": 1024,
    "n_steps": 10000,
    "n_runs": 1,
    "eps_thr": 1e-4,
    "seed": 1,
    "record_stride": 0,
    "hist_bins": 50,
    "threads": 0,
    "scheme": "rk4",
}


@dataclass
class RunConfig:
    problem_kind: str
    problem_n: int = 0
    problem_p: float = 0.0
    problem_graph_seed: int = 0
    problem_path: str = ""
    gamma_s: float = 1.0
    gamma_m: float = 0.1
    gamma_p: float = 10.0
    kappa: float = 0.1
    zeta: float = 0.0
    t_max: float = 10.0
    pump_start: float = 0.0
    pump_end: float = 0.0
    zeta_start: float = 0.0
    zeta_end: float = 0.0
    run: dict = field(default_factory=lambda: dict(_RUN_DEFAULTS))

    def params(self):
        try:
            return CimParams(self.gamma_s, self.gamma_m, self.gamma_p, self.kappa, self.zeta)
        except ValueError as exc:
            raise ConfigError(f"[params] {exc}") from exc

    def schedule(self):
        try:
            return RampSchedule(self.t_max, self.pump_start, self.pump_end,
                                self.zeta_start, self.zeta_end)
        except ValueError as exc:
            raise ConfigError(f"[schedule] {exc}") from exc

    def problem(self):
        kind = self.problem_kind
        if kind == "ring":
            return ring_afm(self.problem_n)
        if kind == "random":
            return random_graph_problem(self.problem_n, self.problem_p, self.problem_graph_seed)
        if kind == "file":
            return read_problem(self.problem_path)
        raise ConfigError(f"[problem] unknown kind {kind!r}")

    def experiment_config(self, threads=None):
        r = self.run
        try:
            return ExperimentConfig(
                problem=self.problem(), params=self.params(), schedule=self.schedule(),
                method=r["method"], n_traj=r["n_traj"], n_steps=r["n_steps"],
                n_runs=r["n_runs"], eps_thr=r["eps_thr"], seed=r["seed"],
                record_stride=r["record_stride"], hist_bins=r["hist_bins"],
                threads=resolve_threads(threads if threads is not None else r["threads"]),
                scheme=r["scheme"],
            )
        except ValueError as exc:
            raise ConfigError(f"[run] {exc}") from exc


def resolve_threads(flag_value=0):
    """Thread count: flag > MFBCIM_THREADS env > hardware default."""
    if flag_value and flag_value > 0:
        return int(flag_value)
    env = os.environ.get("MFBCIM_THREADS", "")
    if env:
        try:
            v = int(env)
        except ValueError as exc:
            raise ConfigError(f"MFBCIM_THREADS must be an integer, got {env!r}") from exc
        if v > 0:
            return v
    return os.cpu_count() or 1


def _get(parser, section, key, conv, default=None, required=False):
    if not parser.has_option(section, key):
        if required:
            raise ConfigError(f"[{section}] missing required field {key!r}")
        return default
    raw = parser.get(section, key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from exc


def parse_config(text):
    """Parse and validate a config document; every violation names its field."""
    parser = configparser.ConfigParser(interpolation=None, strict=True)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from exc
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key in parser.options(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"[{section}] unknown key {key!r}")
    for required in ("problem", "params", "schedule"):
        if not parser.has_section(required):
            raise ConfigError(f"missing section [{required}]")

    kind = _get(parser, "problem", "kind", str, required=True)
    if kind not in ("ring", "random", "file"):
        raise ConfigError(f"[problem] kind must be ring|random|file, got {kind!r}")
    cfg = RunConfig(problem_kind=kind)
    if kind in ("ring", "random"):
        cfg.problem_n = _get(parser, "problem", "n", int, required=True)
        if cfg.problem_n < 1:
            raise ConfigError("[problem] n must be positive")
    if kind == "random":
        cfg.problem_p = _get(parser, "problem", "p", float, required=True)
        if not 0.0 <= cfg.problem_p <= 1.0:
            raise ConfigError(f"[problem] p must be in [0, 1], got {cfg.problem_p}")
        cfg.problem_graph_seed = _get(parser, "problem", "graph_seed", int, default=0)
    if kind == "file":
        cfg.problem_path = _get(parser, "problem", "path", str, required=True)

    for key in _SCHEMA["params"]:
        setattr(cfg, key, _get(parser, "params", key, float, required=(key != "zeta"),
                               default=0.0))
    for key in _SCHEMA["schedule"]:
        required = key == "t_max"
        setattr(cfg, key, _get(parser, "schedule", key, float, required=required, default=0.0))

    run = dict(_RUN_DEFAULTS)
    if parser.has_section("run"):
        for key in parser.options("run"):
            conv = type(_RUN_DEFAULTS[key])
            run[key] = _get(parser, "run", key, conv)
    cfg.run = run

    if run["experiment"] not in ("a", "b", "c", "none"):
        raise ConfigError(f"[run] experiment must be a|b|c|none, got {run['experiment']!r}")
    if run["method"] not in ("total", "conditional"):
        raise ConfigError(f"[run] method must be total|conditional, got {run['method']!r}")
    if run["scheme"] not in ("rk4", "em"):
        raise ConfigError(f"[run] scheme must be rk4|em, got {run['scheme']!r}")
    for key in ("n_traj", "n_steps", "n_runs"):
        if run[key] < 1:
            raise ConfigError(f"[run] {key} must be positive, got {run[key]}")
    if run["method"] == "conditional":
        if cfg.gamma_m <= 0:
            raise ConfigError(
                "[run] method=conditional needs [params] gamma_m > 0: the measured "
                "channel carries the homodyne record the run is conditioned on"
            )
        if not 0.0 < run["eps_thr"] < 1.0:
            raise ConfigError(f"[run] eps_thr must be in (0, 1), got {run['eps_thr']}")
    cfg.params()
    cfg.schedule()
    return cfg


def serialize_config(cfg):
    """Inverse of parse_config on valid configs (parse . serialize == identity)."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    prob = {"kind": cfg.problem_kind}
    if cfg.problem_kind in ("ring", "random"):
        prob["n"] = repr(cfg.problem_n)
    if cfg.problem_kind == "random":
        prob["p"] = repr(cfg.problem_p)
        prob["graph_seed"] = repr(cfg.problem_graph_seed)
    if cfg.problem_kind == "file":
        prob["path"] = cfg.problem_path
    parser["problem"] = prob
    parser["params"] = {k: repr(getattr(cfg, k)) for k in sorted(_SCHEMA["params"])}
    parser["schedule"] = {k: repr(getattr(cfg, k)) for k in sorted(_SCHEMA["schedule"])}
    parser["run"] = {k: (cfg.run[k] if isinstance(cfg.run[k], str) else repr(cfg.run[k]))
                     for k in sorted(_SCHEMA["run"])}
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def provenance_lines(cfg, extra=None):
    """Header lines (# key = value) embedding the resolved config and seed.

    Execution-only knobs (threads) are omitted so outputs are byte-identical
    at any thread count.
    """
    lines = []
    for raw in serialize_config(cfg).splitlines():
        raw = raw.strip()
        if not raw or raw.startswith("threads"):
            continue
        lines.append(f"# {raw}")
    for k, v in (extra or {}).items():
        lines.append(f"# {k} = {v}")
    return lines
