"""Experiment configuration: defaults, file parsing, validation.

Config files are flat `KEY = value` lines with `#` comments.  Keys
mirror the historical SETUP naming of the simulation this benchmark
reproduces; a fixed list of legacy keys is recognized but rejected as
unsupported so stale configs fail loudly instead of silently changing
meaning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import InvalidValue, ParseError, UnknownKey
from .filters import FilterKind, parse_filter_list

# Recognized-but-rejected legacy keys (sweep ranges, plotting, I/O
# paths and similar host-environment concerns with no meaning here).
UNSUPPORTED_KEYS = (
    "rROI",
    "rPNT",
    "TELL",
    "PLOT",
    "SCRN",
    "DISP",
    "SEEDS",
    "fltREMOVE",
    "SHOWori",
    "supSwitch",
    "thalamus",
    "DEBUG",
    "PATH",
    "SRATE",
    "WhtNoiseAddFlg",
    "WhtNoiseAddSNR",
    "DATE",
    "NAME",
    "SINR_RNG",
    "SBNR_RNG",
    "SMNR_RNG",
)

_ALL_FILTERS = tuple(kind.value for kind in FilterKind)


@dataclass(frozen=True)
class SetupConfig:
    """Every knob of a benchmark run, with working defaults."""

    sources: tuple[int, int, int] = (3, 2, 10)
    deep_sources: tuple[int, int, int] = (0, 0, 0)
    n_samples: int = 2000
    n_realizations: int = 20
    order_interest: int = 6
    order_background: int = 6
    frac_ones: float = 0.2
    stab_limit: float = 0.95
    # +/-0.3 keeps the stability rejection sampler near 30% acceptance
    # even for the widest default model (background, dim 10, order 6).
    coeff_range: tuple[float, float] = (-0.3, 0.3)
    iter_limit: int = 1000
    pdc_resolution: int = 129
    seed: int = 12345
    sinr_db: float = 5.0
    sbnr_db: float = 5.0
    smnr_db: float = 20.0
    cube_edge: float = 0.010
    cone_half_angle: float = math.pi / 32.0
    use_interest_pert: bool = False
    use_interference_pert: bool = False
    interference_rank: int | None = None
    erp_enabled: bool = False
    eig_dim: int | None = None
    mvp_rank: int | None = None
    interest_pre: bool = False
    interference_pre: bool = True
    background_pre: bool = True
    noise_pre: bool = True
    interest_pst: bool = True
    interference_pst: bool = True
    background_pst: bool = True
    noise_pst: bool = True
    filters: tuple[str, ...] = _ALL_FILTERS
    n_electrodes: int = 128
    out_dir: str = "bench_run"
    dump_filters: bool = False

    def __post_init__(self) -> None:
        self.validate()

    @property
    def n_interest(self) -> int:
        return self.sources[0] + self.deep_sources[0]

    @property
    def n_interference(self) -> int:
        return self.sources[1] + self.deep_sources[1]

    @property
    def n_background(self) -> int:
        return self.sources[2] + self.deep_sources[2]

    def validate(self) -> None:
        def bad(message: str) -> InvalidValue:
            return InvalidValue(message)

        if len(self.sources) != 3 or len(self.deep_sources) != 3:
            raise bad("SRCS and DEEP must each hold three counts")
        if any(c < 0 for c in self.sources + self.deep_sources):
            raise bad("source counts must be non-negative")
        if self.n_interest < 1:
            raise bad("at least one source of interest is required")
        if self.order_interest < 1 or self.order_background < 1:
            raise bad("P00 and R00 must be >= 1")
        if self.n_samples < 8 * self.order_interest:
            raise bad("n00 must be at least 8 times P00")
        fit_floor = self.order_interest * self.n_interest + self.n_interest
        if self.n_samples <= fit_floor:
            raise bad(
                f"n00 must exceed {fit_floor} so the model refit is determined"
            )
        if self.n_realizations < 1:
            raise bad("K00 must be >= 1")
        if not 0.0 <= self.frac_ones <= 1.0:
            raise bad("FRAC must lie in [0, 1]")
        if not 0.0 < self.stab_limit <= 1.0:
            raise bad("STAB must lie in (0, 1]")
        if not self.coeff_range[0] <= self.coeff_range[1]:
            raise bad("RNG bounds must be ordered")
        if self.iter_limit < 1:
            raise bad("ITER must be >= 1")
        if self.pdc_resolution < 2:
            raise bad("PDC_RES must be >= 2")
        for name in ("sinr_db", "sbnr_db", "smnr_db"):
            if not math.isfinite(getattr(self, name)):
                raise bad(f"{name} must be finite")
        if self.cube_edge < 0.0:
            raise bad("CUBE must be >= 0")
        if not 0.0 <= self.cone_half_angle < math.pi / 2.0:
            raise bad("CONE must lie in [0, pi/2)")
        if self.n_electrodes < 4:
            raise bad("M00 must be >= 4")
        if self.eig_dim is not None and not 1 <= self.eig_dim <= self.n_electrodes:
            raise bad("RANK_EIG must lie in [1, M00]")
        if self.mvp_rank is not None and not 1 <= self.mvp_rank <= self.n_interest:
            raise bad("MVP_RANK must lie in [1, number of interest sources]")
        if self.interference_rank is not None:
            limit = min(self.n_electrodes, self.n_interference)
            if limit < 1:
                raise bad("IntLfgRANK needs interference sources to act on")
            if not 1 <= self.interference_rank <= limit:
                raise bad(f"IntLfgRANK must lie in [1, {limit}]")
        if not self.filters:
            raise bad("FILTERS must select at least one filter")
        valid = set(_ALL_FILTERS)
        for name in self.filters:
            if name not in valid:
                raise bad(f"unknown filter {name!r} in FILTERS")


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    return int(text.strip())


def _parse_float(text: str) -> float:
    return float(text.strip())


def _parse_triple(text: str) -> tuple[int, int, int]:
    tokens = text.replace(",", " ").split()
    if len(tokens) != 3:
        raise ValueError(f"expected three integers, got {text!r}")
    a, b, c = (int(token) for token in tokens)
    return (a, b, c)


def _parse_pair(text: str) -> tuple[float, float]:
    tokens = text.replace(",", " ").split()
    if len(tokens) != 2:
        raise ValueError(f"expected two floats, got {text!r}")
    return (float(tokens[0]), float(tokens[1]))


def _parse_opt_int(text: str) -> int | None:
    lowered = text.strip().lower()
    if lowered in ("none", "auto", ""):
        return None
    return int(text.strip())


# Config-file key -> (dataclass field, value parser).
_KEY_TABLE: dict[str, tuple[str, object]] = {
    "SRCS": ("sources", _parse_triple),
    "DEEP": ("deep_sources", _parse_triple),
    "n00": ("n_samples", _parse_int),
    "K00": ("n_realizations", _parse_int),
    "P00": ("order_interest", _parse_int),
    "R00": ("order_background", _parse_int),
    "FRAC": ("frac_ones", _parse_float),
    "STAB": ("stab_limit", _parse_float),
    "RNG": ("coeff_range", _parse_pair),
    "ITER": ("iter_limit", _parse_int),
    "PDC_RES": ("pdc_resolution", _parse_int),
    "SEED": ("seed", _parse_int),
    "SINR": ("sinr_db", _parse_float),
    "SBNR": ("sbnr_db", _parse_float),
    "SMNR": ("smnr_db", _parse_float),
    "CUBE": ("cube_edge", _parse_float),
    "CONE": ("cone_half_angle", _parse_float),
    "H_Src_pert": ("use_interest_pert", _parse_bool),
    "H_Int_pert": ("use_interference_pert", _parse_bool),
    "IntLfgRANK": ("interference_rank", _parse_opt_int),
    "ERPs": ("erp_enabled", _parse_bool),
    "RANK_EIG": ("eig_dim", _parse_opt_int),
    "MVP_RANK": ("mvp_rank", _parse_opt_int),
    "SigPre": ("interest_pre", _parse_bool),
    "IntPre": ("interference_pre", _parse_bool),
    "BcgPre": ("background_pre", _parse_bool),
    "MesPre": ("noise_pre", _parse_bool),
    "SigPst": ("interest_pst", _parse_bool),
    "IntPst": ("interference_pst", _parse_bool),
    "BcgPst": ("background_pst", _parse_bool),
    "MesPst": ("noise_pst", _parse_bool),
    "FILTERS": ("filters", parse_filter_list),
    "M00": ("n_electrodes", _parse_int),
    "OUT_DIR": ("out_dir", str.strip),
    "DUMP_FILTERS": ("dump_filters", _parse_bool),
}


def load_config(path: str | Path) -> SetupConfig:
    """Parse a `KEY = value` file on top of the defaults."""
    path = Path(path)
    overrides: dict[str, object] = {}
    with path.open() as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"{path}:{lineno}: expected KEY = value")
            key, value = (part.strip() for part in line.split("=", 1))
            if key in UNSUPPORTED_KEYS:
                raise UnknownKey(
                    f"{path}:{lineno}: key {key!r} is recognized but not "
                    "supported by this tool; remove it from the config"
                )
            if key not in _KEY_TABLE:
                raise UnknownKey(f"{path}:{lineno}: unknown key {key!r}")
            target, parser = _KEY_TABLE[key]
            try:
                overrides[target] = parser(value)  # type: ignore[operator]
            except ValueError as exc:
                raise InvalidValue(f"{path}:{lineno}: key {key!r}: {exc}") from exc
    try:
        return replace(SetupConfig(), **overrides)
    except InvalidValue:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidValue(f"{path}: {exc}") from exc


def to_manifest(config: SetupConfig) -> dict:
    """Echo every config key at its final value, plus the reject list."""
    values: dict[str, object] = {}
    for key, (target, _) in _KEY_TABLE.items():
        value = getattr(config, target)
        if isinstance(value, tuple):
            value = list(value)
        values[key] = value
    return {"config": values, "unsupported_keys": sorted(UNSUPPORTED_KEYS)}
