"""Flat ``key = value`` experiment configs and result bundles.

Values may be numbers, strings, booleans, bracketed lists ``[1, 2, 3]`` or
arithmetic in N such as ``8 * N**3`` (also ``log`` and ``sqrt``). Unknown keys
are rejected. The resolved config is echoed back in the same format, so a
run can be repeated from its own echo.
"""
import ast
import hashlib
import math
import os
import re
from dataclasses import dataclass, field

from . import fourier
from .errors import ConfigError, PhaseLabError

KINDS = ("isotropic_sweep", "powerlaw_sweep", "landscape", "ode_compare", "surgery", "texture_train",
         "validate_stats")

# type tags: int/float/str/bool, "expr" (integer expression in N), "list" (floats)
_COMMON = {
    "N": ("int", 64),
    "epsilon": ("float", 1.2),
    "k0": ("int", 6),
    "spectrum": ("str", "isotropic"),
    "seeds": ("int", 8),
    "seed_base": ("int", 0),
}

SCHEMAS = {
    "isotropic_sweep": {
        "activation": ("str", "hermite4"),
        "variant": ("str", "spherical"),
        "delta_scale": ("float", 1e-3),
        "beta": ("float", 0.0),
        "steps": ("expr", "8*N**3"),
        "budgets": ("exprlist", "[N, N**2, 8*N**3]"),
        "points_per_decade": ("int", 10),
        "eta": ("float", 0.25),
        "ascent": ("bool", False),
        "seeds": ("int", 40),
    },
    "powerlaw_sweep": {
        "N": ("int", 128),
        "spectrum": ("str", "benchmark"),
        "activation": ("str", "logcosh"),
        "variant": ("str", "spherical"),
        "delta_scale": ("float", 0.03),
        "beta": ("float", 0.0),
        "steps": ("expr", "N**3"),
        "budgets": ("exprlist", "[50*N*log(N)**2, N**2, N**3]"),
        "points_per_decade": ("int", 10),
        "eta": ("float", 0.5),
        "ascent": ("bool", False),
    },
    "landscape": {
        "activation": ("str", "hermite4"),
        "grid": ("int", 41),
        "n_mc": ("int", 20000),
        "method": ("str", "projected"),
        "seeds": ("int", 1),
    },
    "ode_compare": {
        "N": ("int", 128),
        "spectrum": ("str", "benchmark"),
        "activation": ("str", "logcosh"),
        "variant": ("str", "penalized"),
        "delta_scale": ("float", 0.03),
        "beta": ("float", 0.25),
        "steps": ("expr", "N**2"),
        "regime": ("str", "extensive"),
        "convention": ("str", "derived"),
        "ode_dt": ("float", 0.01),
        "points_per_decade": ("int", 10),
    },
    "validate_stats": {
        "n_samples": ("int", 1_000_000),
        "strong_epsilon": ("float", 2.5),
        "seeds": ("int", 1),
    },
    "surgery": {
        "corpus": ("str", "synthetic"),
        "N": ("int", 32),
        "k0": ("int", 2),
        "epsilon": ("float", 1.0),
        "phase_shift": ("str", "quarter_turn"),
        "spectrum": ("str", "powerlaw(2, 8)"),
        "n_per_class": ("int", 10000),
        "seeds": ("int", 1),
    },
    "texture_train": {
        "corpus": ("str", "synthetic"),
        "N": ("int", 32),
        "k0": ("int", 2),
        "epsilon": ("float", 1.0),
        "phase_shift": ("str", "quarter_turn"),
        "spectrum": ("str", "powerlaw(2, 8)"),
        "n_per_class": ("int", 10000),
        "hidden": ("int", 30),
        "activation": ("str", "logcosh"),
        "lr": ("float", 1e-3),
        "epochs": ("int", 30),
        "evals_per_epoch": ("int", 2),
        "test_frac": ("float", 0.2),
    },
}


def schema(kind):
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment {kind!r}; choose one of {', '.join(KINDS)}")
    out = dict(_COMMON)
    out.update(SCHEMAS[kind])
    return out


_ALLOWED = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Constant, ast.Name, ast.Call, ast.Load,
            ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd, ast.FloorDiv)
_FUNCS = {"log": math.log, "sqrt": math.sqrt, "log2": math.log2}


def eval_expr(text, N):
    """Evaluate arithmetic in N (numbers, + - * / // **, log, sqrt, log2)."""
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}") from exc
    for node in ast.walk(tree):
        if not isinstance(node, _ALLOWED):
            raise ConfigError(f"expression {text!r} uses unsupported syntax")
        if isinstance(node, ast.Name) and node.id not in ("N",) + tuple(_FUNCS):
            raise ConfigError(f"unknown name {node.id!r} in {text!r}")
        if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name) and node.func.id in _FUNCS):
            raise ConfigError(f"unsupported call in {text!r}")
    return eval(compile(tree, "<config>", "eval"), {"__builtins__": {}}, dict(_FUNCS, N=N))


def _split_list(text):
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise ConfigError(f"expected a bracketed list, got {text!r}")
    body = text[1:-1].strip()
    return [t.strip() for t in body.split(",")] if body else []


def _convert(key, tag, raw, N):
    try:
        if tag == "int":
            return int(raw)
        if tag == "float":
            return float(raw)
        if tag == "bool":
            low = str(raw).strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if tag == "str":
            return str(raw).strip()
        if tag == "expr":
            return int(round(eval_expr(raw, N)))
        if tag == "exprlist":
            items = raw if isinstance(raw, list) else _split_list(raw)
            return [int(round(eval_expr(t, N))) for t in items]
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    raise ConfigError(f"internal: unknown type tag {tag!r}")


def parse_text(text):
    """Raw ``key -> string`` pairs from config text."""
    out = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {num}: expected key = value")
        key, value = (t.strip() for t in line.split("=", 1))
        if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", key):
            raise ConfigError(f"line {num}: invalid key {key!r}")
        out[key] = value
    return out


@dataclass
class ExperimentConfig:
    kind: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def echo(self):
        lines = [f"experiment = {self.kind}"]
        for key in sorted(self.values):
            v = self.values[key]
            if isinstance(v, list):
                v = "[" + ", ".join(str(x) for x in v) + "]"
            elif isinstance(v, bool):
                v = "true" if v else "false"
            elif isinstance(v, float):
                v = repr(v)
            lines.append(f"{key} = {v}")
        return "\n".join(lines) + "\n"

    def input_hash(self, extra=b""):
        """Git-style blob hash of the echoed config (plus any extra input bytes)."""
        data = self.echo().encode() + extra
        return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()

    def seed_list(self):
        return [self.values["seed_base"] + i for i in range(self.values["seeds"])]


def resolve(kind, raw=None, overrides=None):
    """Typed, validated config for ``kind`` from raw strings plus overrides."""
    raw = dict(raw or {})
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    declared = raw.pop("experiment", None)
    if declared is not None and declared.replace("-", "_") != kind:
        raise ConfigError(f"config is for {declared!r}, not {kind!r}")
    sch = schema(kind)
    unknown = sorted(set(raw) - set(sch))
    if unknown:
        raise ConfigError(f"unknown keys for {kind}: {', '.join(unknown)}")
    N = _convert("N", "int", raw.get("N", sch["N"][1]), None)
    values = {}
    for key, (tag, default) in sch.items():
        values[key] = _convert(key, tag, raw.get(key, default), N)
    cfg = ExperimentConfig(kind, values)
    validate(cfg)
    return cfg


def validate(cfg):
    v = cfg.values
    if v["N"] < 4:
        raise ConfigError("N must be at least 4")
    if v["seeds"] < 1:
        raise ConfigError("seeds must be at least 1")
    if v["epsilon"] < 0:
        raise ConfigError("epsilon must be non-negative")
    if not 1 <= v["k0"] <= (v["N"] - 1) // 2:
        raise ConfigError(f"k0={v['k0']} is not a valid frequency for N={v['N']}")
    for key in ("steps", "n_samples", "n_mc", "epochs", "grid", "hidden", "n_per_class"):
        if key in v and v[key] < 0:
            raise ConfigError(f"{key} must be non-negative")
    if "spectrum" in v:
        build_spectrum(v["spectrum"], v["N"], v["k0"])
    if "phase_shift" in v and v["phase_shift"] not in ("sin", "quarter_turn"):
        raise ConfigError("phase_shift must be sin or quarter_turn")
    if "variant" in v and v["variant"] not in ("spherical", "penalized"):
        raise ConfigError("variant must be spherical or penalized")
    if "activation" in v and v["activation"] not in ("hermite4", "h4", "logcosh"):
        raise ConfigError("activation must be hermite4 or logcosh")
    if "regime" in v and v["regime"] not in ("extensive", "near_isotropic"):
        raise ConfigError("regime must be extensive or near_isotropic")


def load(kind, path=None, overrides=None):
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = parse_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return resolve(kind, raw, overrides)


def build_spectrum(text, N, k0=6):
    """Spectrum from "isotropic", "benchmark", "top_mode", "powerlaw(a, K)" or an eigenvalue list.

    "benchmark" puts N^(1/2) on k0 and the fixed companion modes; "top_mode"
    puts N^(1/2) on k0 alone; "powerlaw(a, K)" decays as (K/|k|)^a down to 1.
    """
    t = text.strip()
    try:
        if t == "isotropic":
            return fourier.isotropic_spectrum(N)
        if t == "benchmark":
            bad = [k for k, _ in fourier.POWERLAW_COMPANIONS if not 1 <= k <= (N - 1) // 2]
            if bad:
                raise ConfigError(f"benchmark companion modes {bad} do not fit N={N}")
            return fourier.powerlaw_benchmark_spectrum(N, k0)
        if t == "top_mode":
            return fourier.spectrum_with_modes(N, {k0: math.sqrt(N)})
        m = re.fullmatch(r"powerlaw\(\s*([^,]+)\s*,\s*([^)]+)\)", t)
        if m:
            return fourier.powerlaw_spectrum(N, float(m.group(1)), int(m.group(2)))
        if t.startswith("["):
            lam = [float(eval_expr(x, N)) for x in _split_list(t)]
            if len(lam) != N:
                raise ConfigError(f"eigenvalue list has {len(lam)} entries, need N={N}")
            return fourier.spectrum_from_eigenvalues(lam)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError, PhaseLabError) as exc:
        raise ConfigError(f"bad spectrum {text!r}: {exc}") from exc
    raise ConfigError(f"unknown spectrum {text!r}")


@dataclass
class ResultBundle:
    out: str
    config: ExperimentConfig
    files: list = field(default_factory=list)
    extra_hash: bytes = b""

    def path(self, name):
        os.makedirs(os.path.dirname(os.path.join(self.out, name)) or self.out, exist_ok=True)
        full = os.path.join(self.out, name)
        if name not in self.files:
            self.files.append(name)
        return full

    def finish(self):
        with open(self.path("config.txt"), "w") as fh:
            fh.write(self.config.echo())
        listing = os.path.join(self.out, "bundle.txt")
        with open(listing, "w") as fh:
            fh.write(f"input_hash = {self.config.input_hash(self.extra_hash)}\n")
            for name in sorted(self.files):
                fh.write(f"file = {name}\n")
        return listing
