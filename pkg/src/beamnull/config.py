"""Run configuration: flat ``key = value`` files, command-line overrides and figure presets."""

from dataclasses import asdict, dataclass, field, fields, replace
import json

import numpy as np

from . import sim
from .channel import ChannelConfig
from .exceptions import ValidationError
from .schemes import SchemeSpec

COMMANDS = ("capacity", "ber", "figure", "compare", "selftest")

# Named link systems accepted by ``ber --preset``.
SYSTEM_PRESETS = {
    "bf": "bf",
    "bn": "bn",
    "bn-ml": "bn/ml",
    "bn-ldc": "bn+ldc",
    "md-bf-stbc": "bf2+alamouti",
    "md-bf-ldc": "bf2+ldc",
    "md-bn-stbc": "bn2+rate34",
    "md-bn-ldc": "bn2+ldc",
}


@dataclass
class RunConfig:
    command: str = "capacity"
    preset: str = ""
    nt: int = 4
    nr: int = 4
    schemes: list = field(default_factory=lambda: ["eq", "wf", "bf", "bn"])
    systems: list = field(default_factory=lambda: ["bn"])
    rho_start_db: float = 0.0
    rho_stop_db: float = 20.0
    rho_step_db: float = 2.0
    snr_reference: str = "total"
    rate: float = 0.0
    constellation: str = ""
    trials: int = 10000
    common_random: bool = True
    analytic: bool = False
    analytic_trials: int = 20000
    min_errors: int = 200
    max_bits: int = 10 ** 8
    seed: int = 1
    format: str = "csv"
    out: str = "results"
    workers: int = 1

    # Execution details that never change the numbers written out.
    NOT_EMBEDDED = ("out", "workers")

    def rho_grid_db(self):
        if self.rho_step_db <= 0:
            raise ValidationError("rho_step_db must be > 0")
        n = int(np.floor((self.rho_stop_db - self.rho_start_db) / self.rho_step_db + 1e-9)) + 1
        if n < 1:
            raise ValidationError(
                f"empty SNR grid: start {self.rho_start_db} dB > stop {self.rho_stop_db} dB"
            )
        return np.round(self.rho_start_db + self.rho_step_db * np.arange(n), 10)

    def channel(self):
        return ChannelConfig(self.nt, self.nr, self.seed)

    def scheme_specs(self):
        return [SchemeSpec.parse(s) for s in self.schemes]

    def link_systems(self):
        return [parse_system(s, self) for s in self.systems]

    def validate(self):
        if self.command not in COMMANDS:
            raise ValidationError(f"unknown command {self.command!r}")
        if self.format not in ("csv", "json"):
            raise ValidationError("format must be csv or json")
        if self.snr_reference not in sim.SNR_REFERENCES:
            raise ValidationError(f"snr_reference must be one of {sim.SNR_REFERENCES}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        cfg = self.channel()
        self.rho_grid_db()
        if self.command in ("capacity", "compare"):
            if self.trials < 100:
                raise ValidationError("capacity estimation needs trials >= 100")
            for s in self.scheme_specs():
                s.validate_for(cfg.nt)
        if self.command == "ber":
            if not self.constellation and not self.rate:
                raise ValidationError("ber needs either a rate or a constellation")
            for s in self.link_systems():
                s.build(cfg.nt)
        return self

    def resolved(self):
        """Dictionary of every setting that determines the output numbers."""
        d = asdict(self)
        for k in self.NOT_EMBEDDED:
            d.pop(k)
        return d


def parse_system(token, cfg):
    """Parse ``<scheme>[+<code>][/<receiver>]`` (or a name from SYSTEM_PRESETS)."""
    text = SYSTEM_PRESETS.get(token.strip().lower(), token.strip().lower())
    receiver = None
    if "/" in text:
        text, receiver = text.split("/", 1)
    code = "none"
    if "+" in text:
        text, code = text.split("+", 1)
    scheme = SchemeSpec.parse(text)
    if cfg.constellation:
        if receiver is None:
            receiver = "mf" if code in ("alamouti", "rate34") else "mmse"
        return sim.LinkSystem(scheme, cfg.constellation, receiver, code)
    return sim.system_for_rate(scheme, cfg.rate, cfg.nt, code=code, receiver=receiver)


def _coerce(name, raw):
    types = {f.name: f.type for f in fields(RunConfig)}
    if name not in types:
        raise ValidationError(f"unknown configuration key {name!r}")
    kind = types[name]
    if isinstance(raw, str):
        raw = raw.strip()
    try:
        if kind in ("int", int):
            return int(float(raw)) if isinstance(raw, str) else int(raw)
        if kind in ("float", float):
            return float(raw)
        if kind in ("bool", bool):
            if isinstance(raw, bool):
                return raw
            return str(raw).lower() in ("1", "true", "yes", "on")
        if kind in ("list", list):
            if isinstance(raw, (list, tuple)):
                return list(raw)
            return [s.strip() for s in str(raw).split(",") if s.strip()]
    except ValueError:
        raise ValidationError(f"bad value for {name}: {raw!r}") from None
    return str(raw)


def parse_config_text(text):
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"config line {n}: expected key = value")
        k, v = line.split("=", 1)
        k = k.strip().replace("-", "_")
        out[k] = _coerce(k, v)
    return out


def build_config(base=None, **overrides):
    cfg = replace(base) if base is not None else RunConfig()
    for k, v in overrides.items():
        if v is None:
            continue
        setattr(cfg, k, _coerce(k, v))
    return cfg


def from_resolved(d):
    """Rebuild a RunConfig from the dictionary embedded in an output file."""
    return build_config(RunConfig(), **d)


# -- figure presets --------------------------------------------------------------
#
# The capacity figures plot the received SNR summed over receive antennas
# (nr * rho); on that axis the 5x5 BF/BN crossover sits near 3.5 dB and the
# MD region boundaries near 5.5 / 12.7 / 23 dB.
# BER figures use rho itself. Constellations follow from the data rate:
# eta = R * T / (symbols per block), PSK up to 8 points, square QAM above.

_CAP5 = dict(command="capacity", nt=5, nr=5, trials=20000, rho_step_db=0.25,
             snr_reference="rx-sum")

FIGURES = {
    "fig2": dict(_CAP5, schemes=["eq", "wf", "bf", "bn"], rho_start_db=0.0, rho_stop_db=25.0),
    "fig6": dict(_CAP5, schemes=["eq", "wf", "bn", "bn2"], rho_start_db=0.0, rho_stop_db=30.0),
    "fig7": dict(_CAP5, schemes=["eq", "wf", "bf", "bf2", "bn2", "bn"],
                 rho_start_db=-5.0, rho_stop_db=30.0),
    "fig3a": dict(command="ber", nt=3, nr=3, systems=["bn"], constellation="8psk",
                  analytic=True, rho_start_db=0.0, rho_stop_db=20.0, rho_step_db=2.0,
                  max_bits=2 * 10 ** 7),
    "fig3b": dict(command="ber", nt=4, nr=4, systems=["bn"], constellation="qpsk",
                  analytic=True, rho_start_db=0.0, rho_stop_db=20.0, rho_step_db=2.0,
                  max_bits=2 * 10 ** 7),
    "fig4a": dict(command="ber", nt=4, nr=4, rate=3, systems=["bf", "bn", "bn/ml"],
                  rho_start_db=0.0, rho_stop_db=15.0, rho_step_db=3.0, max_bits=2 * 10 ** 6),
    "fig4b": dict(command="ber", nt=4, nr=4, rate=6, systems=["bf", "bn", "bn/ml"],
                  rho_start_db=0.0, rho_stop_db=18.0, rho_step_db=3.0, max_bits=10 ** 7),
    "fig5a": dict(command="ber", nt=4, nr=4, rate=3, systems=["bf", "bn", "bn/ml", "bn+ldc"],
                  rho_start_db=0.0, rho_stop_db=15.0, rho_step_db=3.0, max_bits=2 * 10 ** 6),
    "fig5b": dict(command="ber", nt=4, nr=4, rate=6, systems=["bf", "bn", "bn/ml", "bn+ldc"],
                  rho_start_db=0.0, rho_stop_db=18.0, rho_step_db=3.0, max_bits=10 ** 7),
    "fig8": dict(command="ber", nt=5, nr=5, rate=2, systems=["bf2+alamouti", "bf2+ldc"],
                 rho_start_db=0.0, rho_stop_db=15.0, rho_step_db=3.0, max_bits=10 ** 7),
    "fig9": dict(command="ber", nt=5, nr=5, rate=3, systems=["bn2+rate34", "bn2+ldc"],
                 rho_start_db=0.0, rho_stop_db=15.0, rho_step_db=3.0, max_bits=10 ** 7),
    "fig10": dict(command="ber", nt=5, nr=5, rate=6,
                  systems=["bf2+alamouti", "bf2+ldc", "bn2+rate34", "bn2+ldc"],
                  rho_start_db=0.0, rho_stop_db=15.0, rho_step_db=3.0, max_bits=10 ** 7),
}


def figure_config(name, **overrides):
    if name not in FIGURES:
        raise ValidationError(f"unknown figure preset {name!r}; choose from {sorted(FIGURES)}")
    cfg = build_config(RunConfig(), **FIGURES[name])
    cfg.preset = name
    return build_config(cfg, **overrides)


def dumps_resolved(cfg):
    return json.dumps(cfg.resolved(), sort_keys=True)
