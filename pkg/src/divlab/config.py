"""Run configuration: a flat key = value file with optional [section] blocks.

    # comment
    window_start = 1000000
    window_len = 10000
    h0 = 11
    h = 101
    [chowla]
    x = 1000000, 10000000
    w = 10000

Top-level keys are the fields of RunConfig.  Section keys are checked against
SECTION_KEYS; a section belongs to the subcommand of the same name.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ParameterError

REQUIRED = ("window_start", "window_len", "h0", "h")

# key -> (type, default); lists are comma separated
SECTION_KEYS: dict[str, dict[str, tuple[type, object]]] = {
    "primes": {},
    "spectrum": {"method": (str, "auto"), "count": (int, 3)},
    "trace": {"samples": (int, 64)},
    "sieve-selftest": {"trials": (int, 200), "window": (int, 10**4)},
    "kubilius": {"q": (int, 1), "min_prob": (float, 1e-3), "N": (int, 10**6)},
    "walks": {"mode": (str, "exact"), "samples": (int, 200)},
    "graphcore-selftest": {"max_n": (int, 7), "instances": (int, 200)},
    "chowla": {"x": (list, [10**6, 10**7]), "w": (float, 1e4), "grid": (int, 16)},
    "scales": {"x": (int, 10**7), "w": (float, 1e3)},
    "report": {},
}


@dataclass
class RunConfig:
    window_start: int = 10**6
    window_len: int = 10**4
    h0: int = 11
    h: int = 101
    K: float = 4.0
    ell: int = 2
    k: int = 2
    seed: int = 1
    thread_count: int = 1
    output_dir: str = "out"
    sections: dict = field(default_factory=dict)

    def validate(self) -> "RunConfig":
        if self.window_start < 0:
            raise ParameterError("window_start must be >= 0")
        if self.window_len < 1:
            raise ParameterError("window_len must be >= 1")
        if self.h0 < 2:
            raise ParameterError("h0 must be >= 2")
        if self.h0 > self.h:
            raise ParameterError(f"h0 ({self.h0}) must not exceed h ({self.h})")
        if self.K <= 0:
            raise ParameterError("K must be positive")
        if not 1 <= self.ell <= 6:
            raise ParameterError("ell must lie in 1..6")
        if not 1 <= self.k <= 6:
            raise ParameterError("k must lie in 1..6")
        if self.seed < 0:
            raise ParameterError("seed must be >= 0")
        if self.thread_count < 1:
            raise ParameterError("thread_count must be >= 1")
        for name, block in self.sections.items():
            if name not in SECTION_KEYS:
                raise ParameterError(f"unknown section [{name}]")
            for key in block:
                if key not in SECTION_KEYS[name]:
                    raise ParameterError(f"unknown key {key!r} in [{name}]")
        return self

    def param(self, section: str, key: str):
        """A section value, falling back to its documented default."""
        typ, default = SECTION_KEYS[section][key]
        return self.sections.get(section, {}).get(key, default)

    def digest(self) -> str:
        return hashlib.sha256(serialize(self).encode()).hexdigest()


_TOP = {f.name: f.type for f in fields(RunConfig) if f.name != "sections"}
_CASTS = {"int": int, "float": float, "str": str}


def _cast(text: str, typ, where: str):
    try:
        if typ is list:
            return [int(float(t)) for t in text.split(",") if t.strip()]
        if typ is int or typ == "int":
            v = float(text)
            if v != int(v):
                raise ValueError
            return int(v)
        if typ is float or typ == "float":
            return float(text)
        return text
    except ValueError:
        raise ParameterError(f"{where}: cannot read {text!r} as {getattr(typ, '__name__', typ)}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    values: dict = {}
    sections: dict = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"{source}:{lineno}"
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in SECTION_KEYS:
                raise ParameterError(f"{where}: unknown section [{section}]")
            sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ParameterError(f"{where}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if section is None:
            if key not in _TOP:
                raise ParameterError(f"{where}: unknown key {key!r}")
            values[key] = _cast(val, _CASTS[_TOP[key]], where)
        else:
            spec = SECTION_KEYS[section]
            if key not in spec:
                raise ParameterError(f"{where}: unknown key {key!r} in [{section}]")
            sections[section][key] = _cast(val, spec[key][0], where)
    missing = [k for k in REQUIRED if k not in values]
    if missing:
        raise ParameterError(f"{source}: missing required keys {', '.join(missing)}")
    return RunConfig(**values, sections=sections).validate()


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise ParameterError(f"config file {p} not found")
    return parse_config(p.read_text(), str(p))


def _fmt(v) -> str:
    if isinstance(v, list):
        return ", ".join(str(x) for x in v)
    return repr(v) if isinstance(v, float) else str(v)


def serialize(cfg: RunConfig) -> str:
    lines = [f"{name} = {_fmt(getattr(cfg, name))}" for name in _TOP]
    for name in sorted(cfg.sections):
        lines.append(f"[{name}]")
        for key in sorted(cfg.sections[name]):
            lines.append(f"{key} = {_fmt(cfg.sections[name][key])}")
    return "\n".join(lines) + "\n"
