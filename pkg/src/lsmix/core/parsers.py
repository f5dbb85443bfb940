from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import ConfigError
from .limits import CHI_BIN_WIDTH, CHI_THRESHOLDS

KNOWN_KEYS = frozenset({
    "model",
    "matern.phi",
    "matern.eta",
    "sites.file",
    "data.file",
    "study.config",
    "study.m",
    "study.n",
    "fit.copula",
    "fit.class",
    "fit.reference",
    "fit.reference2",
    "mc.n_table",
    "mc.n_cvm",
    "condsim.burnin",
    "condsim.steps",
    "condsim.thin",
    "condsim.prop_sd_s",
    "condsim.prop_sd_logr",
    "condsim.adapt",
    "condsim.targets.file",
    "condsim.conditioning.file",
    "chi.thresholds",
    "chi.bin_width",
    "chi.side",
    "bootstrap.B",
    "bootstrap.level",
    "bootstrap.mode",
    "marginal.file",
    "seed",
})

_TRUE = frozenset({"1", "true", "yes", "on"})
_FALSE = frozenset({"0", "false", "no", "off"})


def parse_config_lines(lines: Iterable[str]) -> dict[str, str]:
    """
    Parses flat `key = value` lines:
      # comment
      model = sm3
      model.nu = 2
      matern.phi = 50
    Blank lines and `#` comments are skipped; trailing comments are stripped.
    """
    out: dict[str, str] = {}
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected `key = value`", context={"line": no, "text": raw.rstrip("\n")})
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", context={"line": no})
        if key in out:
            raise ConfigError(f"duplicate key {key!r}", context={"line": no})
        if key not in KNOWN_KEYS and not key.startswith("model."):
            raise ConfigError(f"unknown config key {key!r}", context={"line": no})
        out[key] = value
    return out


def canonical_config_text(raw: dict[str, str]) -> str:
    """Sorted `key=value` lines; the basis of run fingerprints."""
    return "\n".join(f"{k}={raw[k]}" for k in sorted(raw))


def _as_int(raw: dict[str, str], key: str, default: int | None = None) -> int | None:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError as e:
        raise ConfigError(f"{key} must be an integer", context={"value": raw[key]}) from e


def _as_float(raw: dict[str, str], key: str, default: float | None = None) -> float | None:
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError as e:
        raise ConfigError(f"{key} must be a number", context={"value": raw[key]}) from e


def _as_bool(raw: dict[str, str], key: str, default: bool = False) -> bool:
    if key not in raw:
        return default
    v = raw[key].strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ConfigError(f"{key} must be a boolean", context={"value": raw[key]})


def _as_path(raw: dict[str, str], key: str, base: Path) -> Path | None:
    if key not in raw or not raw[key]:
        return None
    p = Path(raw[key]).expanduser()
    return p if p.is_absolute() else (base / p)


@dataclass(frozen=True)
class RunConfig:
    """Typed view of a run configuration; stats objects are built from it by the commands."""
    raw: dict[str, str] = field(default_factory=dict)
    model: str | None = None
    model_params: dict[str, float] = field(default_factory=dict)
    phi: float | None = None
    eta: float | None = None
    sites_file: Path | None = None
    data_file: Path | None = None
    marginal_file: Path | None = None
    targets_file: Path | None = None
    conditioning_file: Path | None = None
    study_config: str | None = None
    study_m: int | None = None
    study_n: int | None = None
    copula: bool = False
    step1_class: str | None = None
    reference: int = 0
    reference2: int = 1
    n_table: int | None = None
    n_cvm: int | None = None
    condsim: dict[str, float | int | bool] = field(default_factory=dict)
    chi_thresholds: tuple[float, ...] = CHI_THRESHOLDS
    chi_bin_width: float = CHI_BIN_WIDTH
    chi_side: str = "upper"
    bootstrap_B: int | None = None
    bootstrap_level: float | None = None
    bootstrap_mode: str | None = None
    seed: int | None = None

    @property
    def text(self) -> str:
        return canonical_config_text(self.raw)


def build_run_config(raw: dict[str, str], base_dir: Path | None = None) -> RunConfig:
    """Convert parsed key/value pairs into a RunConfig; relative paths resolve against `base_dir`."""
    base = (base_dir or Path.cwd()).expanduser().resolve()
    model_params = {}
    for key in raw:
        if key.startswith("model."):
            model_params[key.split(".", 1)[1]] = _as_float(raw, key)

    thresholds = CHI_THRESHOLDS
    if raw.get("chi.thresholds"):
        try:
            thresholds = tuple(float(t) for t in raw["chi.thresholds"].replace(";", ",").split(",") if t.strip())
        except ValueError as e:
            raise ConfigError("chi.thresholds must be a comma separated list", context={"value": raw["chi.thresholds"]}) from e

    condsim: dict[str, float | int | bool] = {}
    for key in ("burnin", "steps", "thin"):
        v = _as_int(raw, f"condsim.{key}")
        if v is not None:
            condsim[key] = v
    for key in ("prop_sd_s", "prop_sd_logr"):
        v = _as_float(raw, f"condsim.{key}")
        if v is not None:
            condsim[key] = v
    if "condsim.adapt" in raw:
        condsim["adapt"] = _as_bool(raw, "condsim.adapt")

    side = raw.get("chi.side", "upper").strip().lower()
    if side not in ("upper", "lower"):
        raise ConfigError("chi.side must be upper or lower", context={"value": side})

    return RunConfig(
        raw=dict(raw),
        model=raw.get("model") or None,
        model_params=model_params,
        phi=_as_float(raw, "matern.phi"),
        eta=_as_float(raw, "matern.eta"),
        sites_file=_as_path(raw, "sites.file", base),
        data_file=_as_path(raw, "data.file", base),
        marginal_file=_as_path(raw, "marginal.file", base),
        targets_file=_as_path(raw, "condsim.targets.file", base),
        conditioning_file=_as_path(raw, "condsim.conditioning.file", base),
        study_config=(raw.get("study.config") or None),
        study_m=_as_int(raw, "study.m"),
        study_n=_as_int(raw, "study.n"),
        copula=_as_bool(raw, "fit.copula"),
        step1_class=(raw.get("fit.class") or None),
        reference=_as_int(raw, "fit.reference", 0),
        reference2=_as_int(raw, "fit.reference2", 1),
        n_table=_as_int(raw, "mc.n_table"),
        n_cvm=_as_int(raw, "mc.n_cvm"),
        condsim=condsim,
        chi_thresholds=thresholds,
        chi_bin_width=_as_float(raw, "chi.bin_width", CHI_BIN_WIDTH),
        chi_side=side,
        bootstrap_B=_as_int(raw, "bootstrap.B"),
        bootstrap_level=_as_float(raw, "bootstrap.level"),
        bootstrap_mode=(raw.get("bootstrap.mode") or None),
        seed=_as_int(raw, "seed"),
    )


def load_run_config(path: str | Path | None, overrides: dict[str, str] | None = None) -> RunConfig:
    """
    Read a config file (optional) and apply `overrides` on top; overrides use
    the same dotted keys and bypass the duplicate check.
    """
    raw: dict[str, str] = {}
    base: Path | None = None
    if path is not None:
        p = Path(path).expanduser().resolve()
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        raw = parse_config_lines(p.read_text(encoding="utf-8").splitlines())
        base = p.parent
    for key, value in (overrides or {}).items():
        if key not in KNOWN_KEYS and not key.startswith("model."):
            raise ConfigError(f"unknown config key {key!r}")
        raw[key] = str(value)
    return build_run_config(raw, base)
