"""Forward model: electrode montage, lead-fields, sensor composition.

The volume conductor is a homogeneous sphere of radius R and
conductivity sigma.  For a unit dipole at distance b < R from the
center the scalp potential is the classical zonal-harmonics series

    V = 1/(4 pi sigma R^2) * sum_{n>=1} (2n+1)/n * (b/R)^(n-1)
        * (n * m_r * P_n(c) + T * P_n'(c)),

where c is the cosine of the angle between electrode and dipole
position, m_r the radial moment component, and T = m.e - m_r * c the
tangential projection onto the electrode direction (this form absorbs
the associated Legendre factor and has no sin-singularity).  The n=1
term alone reproduces the central-dipole limit 3 m.e / (4 pi sigma
R^2).

Sensor data is composed from per-source-class components rescaled to
configured SNR levels relative to the interest component.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    ParseError,
    ShapeMismatch,
    SourceOutsideHead,
    ZeroTargetSignal,
)
from .sources import PerturbedGeometry, SourceGeometry, SourceSignals

DEFAULT_SIGMA = 0.33
_SERIES_RTOL = 1e-12
_SERIES_MAX_TERMS = 20000

COMPONENT_ORDER = ("interest", "interference", "background", "noise")


@dataclass(frozen=True)
class ElectrodeMontage:
    """Electrode positions on the scalp sphere with unique labels."""

    positions: np.ndarray
    labels: tuple[str, ...]
    head_radius: float

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 3:
            raise ValueError("positions must have shape (m, 3)")
        if positions.shape[0] != len(self.labels):
            raise ValueError("one label per electrode is required")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("electrode labels must be unique")
        radii = np.linalg.norm(positions, axis=1)
        if np.max(np.abs(radii - self.head_radius), initial=0.0) > 1e-9:
            raise ValueError("all electrodes must sit on the scalp sphere")
        object.__setattr__(self, "positions", positions)

    @property
    def n_electrodes(self) -> int:
        return self.positions.shape[0]


def fibonacci_montage(m: int, head_radius: float) -> ElectrodeMontage:
    """Spread m electrodes over the upper 3/4 of the scalp sphere.

    A Fibonacci spiral over z in (-1/2, 1) gives near-uniform coverage
    while leaving the bottom cap (neck/face) free of electrodes.
    """
    if m < 4:
        raise ValueError(f"montage needs at least 4 electrodes, got {m}")
    if head_radius <= 0.0:
        raise ValueError("head_radius must be positive")
    idx = np.arange(m)
    z = 1.0 - (idx + 0.5) * 1.5 / m
    azimuth = np.pi * (3.0 - np.sqrt(5.0)) * idx
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    positions = head_radius * np.column_stack(
        [rho * np.cos(azimuth), rho * np.sin(azimuth), z]
    )
    labels = tuple(f"E{i:03d}" for i in idx)
    return ElectrodeMontage(positions=positions, labels=labels, head_radius=head_radius)


def dipole_potentials(
    positions: np.ndarray,
    orientations: np.ndarray,
    electrode_positions: np.ndarray,
    head_radius: float,
    sigma: float = DEFAULT_SIGMA,
    rel_tol: float = _SERIES_RTOL,
    max_terms: int = _SERIES_MAX_TERMS,
) -> np.ndarray:
    """Raw (unreferenced) scalp potentials, shape (m, n_sources).

    Electrode positions are projected onto the sphere direction-wise;
    the series for each dipole stops once two consecutive terms fall
    below rel_tol of the running maximum.
    """
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    orientations = np.atleast_2d(np.asarray(orientations, dtype=float))
    electrodes = np.atleast_2d(np.asarray(electrode_positions, dtype=float))
    if positions.shape != orientations.shape:
        raise ShapeMismatch("positions and orientations must have equal shapes")
    if sigma <= 0.0 or head_radius <= 0.0:
        raise ValueError("sigma and head_radius must be positive")

    e_hat = electrodes / np.linalg.norm(electrodes, axis=1)[:, None]
    m_el = e_hat.shape[0]
    out = np.empty((m_el, positions.shape[0]))
    prefactor = 1.0 / (4.0 * np.pi * sigma * head_radius**2)

    for j, (pos, moment) in enumerate(zip(positions, orientations)):
        ecc = np.linalg.norm(pos)
        if ecc >= head_radius:
            raise SourceOutsideHead(
                f"dipole {j} at radius {ecc:.6g} is not inside {head_radius:.6g}"
            )
        r_hat = pos / ecc if ecc > 1e-12 * head_radius else np.array([0.0, 0.0, 1.0])
        f = ecc / head_radius
        cosg = np.clip(e_hat @ r_hat, -1.0, 1.0)
        m_r = float(moment @ r_hat)
        tang = e_hat @ moment - m_r * cosg

        # Legendre recurrences: p runs over P_n(cosg), dp over P_n'(cosg).
        p_prev = np.ones(m_el)
        p_curr = cosg.copy()
        dp_prev = np.zeros(m_el)
        dp_curr = np.ones(m_el)
        f_pow = 1.0
        total = np.zeros(m_el)
        peak = 0.0
        small_streak = 0
        for n in range(1, max_terms + 1):
            term = ((2.0 * n + 1.0) / n) * f_pow * (
                n * m_r * p_curr + tang * dp_curr
            )
            total += term
            peak = max(peak, float(np.max(np.abs(total))))
            if float(np.max(np.abs(term))) <= rel_tol * max(peak, 1e-300):
                small_streak += 1
                if small_streak >= 2:
                    break
            else:
                small_streak = 0
            p_next = ((2.0 * n + 1.0) * cosg * p_curr - n * p_prev) / (n + 1.0)
            dp_next = dp_prev + (2.0 * n + 1.0) * p_curr
            p_prev, p_curr = p_curr, p_next
            dp_prev, dp_curr = dp_curr, dp_next
            f_pow *= f
        else:
            raise RuntimeError(
                f"potential series for dipole {j} did not converge within "
                f"{max_terms} terms (relative eccentricity {f:.6g})"
            )
        out[:, j] = prefactor * total
    return out


@dataclass(frozen=True)
class LeadfieldSet:
    """Role-split lead-fields, their perturbed twins, and the filter view.

    Data generation always reads the unperturbed `interest`,
    `interference` and `background` matrices.  `filter_interest` and
    `filter_interference` are what the spatial filters get to see
    (possibly perturbed, possibly rank-reduced), and `composite` is
    their horizontal stack.
    """

    interest: np.ndarray
    interference: np.ndarray
    background: np.ndarray
    interest_pert: np.ndarray
    interference_pert: np.ndarray
    background_pert: np.ndarray
    filter_interest: np.ndarray
    filter_interference: np.ndarray
    composite: np.ndarray

    def __post_init__(self) -> None:
        m = self.interest.shape[0]
        for name in (
            "interference",
            "background",
            "interest_pert",
            "interference_pert",
            "background_pert",
            "filter_interest",
            "filter_interference",
            "composite",
        ):
            if getattr(self, name).shape[0] != m:
                raise ShapeMismatch(f"{name} must have {m} sensor rows")
        stacked = np.hstack([self.filter_interest, self.filter_interference])
        if self.composite.shape != stacked.shape or not np.array_equal(
            self.composite, stacked
        ):
            raise ValueError("composite must stack the filter-facing matrices")


def _referenced(matrix: np.ndarray) -> np.ndarray:
    """Average reference: remove the electrode mean from every column."""
    if matrix.shape[1] == 0:
        return matrix
    return matrix - matrix.mean(axis=0, keepdims=True)


def leadfield_sphere(
    geom: SourceGeometry | PerturbedGeometry,
    montage: ElectrodeMontage,
    head_radius: float | None = None,
    sigma: float = DEFAULT_SIGMA,
) -> LeadfieldSet:
    """Build average-referenced lead-fields split by source role.

    Passing a PerturbedGeometry fills the perturbed matrices from the
    jittered coordinates while the plain matrices use the original
    ones; passing a SourceGeometry duplicates the originals.  The
    filter view starts unperturbed; see select_filter_leadfields.
    """
    base = geom.base if isinstance(geom, PerturbedGeometry) else geom
    radius = base.head_radius if head_radius is None else head_radius
    if abs(montage.head_radius - radius) > 1e-9:
        raise ShapeMismatch("montage radius does not match the head radius")

    def split(positions: np.ndarray, orientations: np.ndarray) -> dict[str, np.ndarray]:
        full = _referenced(
            dipole_potentials(positions, orientations, montage.positions, radius, sigma)
        )
        return {
            role: full[:, base.role_indices(role)]
            if base.role_indices(role).size
            else np.zeros((montage.n_electrodes, 0))
            for role in ("interest", "interference", "background")
        }

    plain = split(base.positions, base.orientations)
    if isinstance(geom, PerturbedGeometry):
        pert = split(geom.positions, geom.orientations)
    else:
        pert = {role: matrix.copy() for role, matrix in plain.items()}

    return LeadfieldSet(
        interest=plain["interest"],
        interference=plain["interference"],
        background=plain["background"],
        interest_pert=pert["interest"],
        interference_pert=pert["interference"],
        background_pert=pert["background"],
        filter_interest=plain["interest"],
        filter_interference=plain["interference"],
        composite=np.hstack([plain["interest"], plain["interference"]]),
    )


def reduce_rank(matrix: np.ndarray, rank: int) -> np.ndarray:
    """Best rank-r approximation in the Frobenius sense (truncated SVD)."""
    matrix = np.asarray(matrix, dtype=float)
    full = min(matrix.shape)
    if not 1 <= rank <= full:
        raise ValueError(f"rank must lie in [1, {full}], got {rank}")
    u, s, vt = np.linalg.svd(matrix, full_matrices=False)
    return (u[:, :rank] * s[:rank]) @ vt[:rank]


def select_filter_leadfields(
    lf: LeadfieldSet,
    use_interest_pert: bool,
    use_interference_pert: bool,
    interference_rank: int | None = None,
) -> LeadfieldSet:
    """Choose what the filters see: perturbed twins and rank reduction."""
    filter_interest = lf.interest_pert if use_interest_pert else lf.interest
    filter_interference = (
        lf.interference_pert if use_interference_pert else lf.interference
    )
    if interference_rank is not None:
        if filter_interference.shape[1] == 0:
            raise ValueError("cannot rank-reduce an empty interference lead-field")
        filter_interference = reduce_rank(filter_interference, interference_rank)
    return replace(
        lf,
        filter_interest=filter_interest,
        filter_interference=filter_interference,
        composite=np.hstack([filter_interest, filter_interference]),
    )


def adjust_snr(reference: np.ndarray, target: np.ndarray, snr_db: float) -> np.ndarray:
    """Rescale target so that the reference-to-target Frobenius power
    ratio equals snr_db decibels.

    Returns target * (||reference||_F / ||target||_F) / 10^(snr_db/20).
    """
    if not np.isfinite(snr_db):
        raise ValueError(f"snr_db must be finite, got {snr_db}")
    target_norm = float(np.linalg.norm(target))
    if target_norm == 0.0:
        raise ZeroTargetSignal("cannot rescale a signal with zero Frobenius norm")
    scale = float(np.linalg.norm(reference)) / target_norm / 10.0 ** (snr_db / 20.0)
    return target * scale


@dataclass(frozen=True)
class MeasurementConfig:
    """SNR levels, segment component switches and filter-view flags."""

    sinr_db: float = 5.0
    sbnr_db: float = 5.0
    smnr_db: float = 20.0
    interest_pre: bool = False
    interference_pre: bool = True
    background_pre: bool = True
    noise_pre: bool = True
    interest_pst: bool = True
    interference_pst: bool = True
    background_pst: bool = True
    noise_pst: bool = True
    use_interest_pert: bool = False
    use_interference_pert: bool = False
    interference_rank: int | None = None

    def enabled(self, segment: str) -> tuple[str, ...]:
        if segment not in ("pre", "pst"):
            raise ValueError(f"unknown segment {segment!r}")
        return tuple(
            name for name in COMPONENT_ORDER if getattr(self, f"{name}_{segment}")
        )


@dataclass(frozen=True)
class Recording:
    """Sensor-space segments plus the per-class components they sum."""

    sensors_pre: np.ndarray
    sensors_pst: np.ndarray
    components_pre: dict[str, np.ndarray]
    components_pst: dict[str, np.ndarray]
    enabled_pre: tuple[str, ...]
    enabled_pst: tuple[str, ...]
    snr_applied: tuple[float, float, float]

    def __post_init__(self) -> None:
        if self.sensors_pre.shape != self.sensors_pst.shape:
            raise ShapeMismatch("pre and post segments must have equal shapes")
        for comps in (self.components_pre, self.components_pst):
            if tuple(comps.keys()) != COMPONENT_ORDER:
                raise ValueError("components must carry all four source classes")


def compose_measurement(
    signals: SourceSignals,
    lf: LeadfieldSet,
    cfg: MeasurementConfig,
    rng: np.random.Generator,
) -> tuple[Recording, LeadfieldSet]:
    """Project sources to the sensors, rescale, and sum enabled parts.

    Interference, background and measurement-noise components are each
    rescaled over the concatenated pre+post segments so their power
    relative to the interest component meets the configured SINR, SBNR
    and SMNR.  Components absent from the model (zero norm) stay zero.
    The returned LeadfieldSet is the filter view selected by the
    perturbation flags and the optional interference rank.
    """
    n = signals.interest_pre.shape[1]
    if lf.interest.shape[1] != signals.interest_pre.shape[0]:
        raise ShapeMismatch("interest lead-field and signal dimensions disagree")
    if lf.interference.shape[1] != signals.interference_pre.shape[0]:
        raise ShapeMismatch("interference lead-field and signal dimensions disagree")
    if lf.background.shape[1] != signals.background_pre.shape[0]:
        raise ShapeMismatch("background lead-field and signal dimensions disagree")
    m = lf.interest.shape[0]

    interest = np.hstack(
        [lf.interest @ signals.interest_pre, lf.interest @ signals.interest_pst]
    )
    raw = {
        "interference": np.hstack(
            [
                lf.interference @ signals.interference_pre,
                lf.interference @ signals.interference_pst,
            ]
        ),
        "background": np.hstack(
            [lf.background @ signals.background_pre, lf.background @ signals.background_pst]
        ),
        "noise": rng.standard_normal((m, 2 * n)),
    }
    levels = {
        "interference": cfg.sinr_db,
        "background": cfg.sbnr_db,
        "noise": cfg.smnr_db,
    }
    scaled = {"interest": interest}
    for name, block in raw.items():
        if np.linalg.norm(block) == 0.0:
            scaled[name] = block
        else:
            scaled[name] = adjust_snr(interest, block, levels[name])

    components_pre = {name: scaled[name][:, :n] for name in COMPONENT_ORDER}
    components_pst = {name: scaled[name][:, n:] for name in COMPONENT_ORDER}
    enabled_pre = cfg.enabled("pre")
    enabled_pst = cfg.enabled("pst")

    def total(components: dict[str, np.ndarray], enabled: tuple[str, ...]) -> np.ndarray:
        acc = np.zeros((m, n))
        for name in enabled:
            acc = acc + components[name]
        return acc

    recording = Recording(
        sensors_pre=total(components_pre, enabled_pre),
        sensors_pst=total(components_pst, enabled_pst),
        components_pre=components_pre,
        components_pst=components_pst,
        enabled_pre=enabled_pre,
        enabled_pst=enabled_pst,
        snr_applied=(cfg.sinr_db, cfg.sbnr_db, cfg.smnr_db),
    )
    selected = select_filter_leadfields(
        lf, cfg.use_interest_pert, cfg.use_interference_pert, cfg.interference_rank
    )
    return recording, selected


def save_leadfield(matrix: np.ndarray, path: str | Path) -> None:
    """Write a lead-field as a dimension header plus CSV rows.

    First line is "<rows> <cols>"; every following line holds one
    sensor row with 17 significant digits so values round-trip.
    """
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    path = Path(path)
    with path.open("w") as handle:
        handle.write(f"{matrix.shape[0]} {matrix.shape[1]}\n")
        for row in matrix:
            handle.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_leadfield(path: str | Path) -> np.ndarray:
    """Read a matrix written by save_leadfield, validating dimensions."""
    path = Path(path)
    with path.open() as handle:
        lines = [line.rstrip("\n") for line in handle]
    if not lines or not lines[0].strip():
        raise ParseError(f"{path}: missing dimension header")
    tokens = lines[0].split()
    if len(tokens) != 2:
        raise ParseError(f"{path}:1: header must hold exactly two integers")
    try:
        rows, cols = int(tokens[0]), int(tokens[1])
    except ValueError as exc:
        raise ParseError(f"{path}:1: non-integer dimension header") from exc
    if rows < 0 or cols < 0:
        raise DimensionMismatch(f"{path}:1: dimensions must be non-negative")
    body = [line for line in lines[1:] if line.strip()]
    if len(body) != rows:
        raise DimensionMismatch(
            f"{path}: header promises {rows} rows, found {len(body)}"
        )
    out = np.empty((rows, cols))
    for i, line in enumerate(body):
        cells = line.split(",")
        if len(cells) != cols:
            raise DimensionMismatch(
                f"{path}:{i + 2}: expected {cols} columns, found {len(cells)}"
            )
        try:
            out[i] = [float(cell) for cell in cells]
        except ValueError as exc:
            raise ParseError(f"{path}:{i + 2}: malformed float") from exc
    return out
