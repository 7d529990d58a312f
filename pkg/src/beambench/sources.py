"""Source geometry and ground-truth signal generation.

Dipoles live strictly inside a spherical head.  Sources of interest,
interference sources and background sources are placed on a cortical
shell (radial orientation) or, when requested, deeper inside the head
(random orientation).  Signals of interest and background activity come
from independent stable MVAR models; interference is the negative of
the interest signal plus power-matched white noise, which pins its
correlation with the interest signal near -1/sqrt(2).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeMismatch
from .mvar import (
    ROLE_BACKGROUND,
    ROLE_INTEREST,
    ROLE_INTERFERENCE,
    ROLES,
    CompositeMvar,
    MvarModel,
    block_diagonal,
    make_mask,
    sample_stable_mvar,
    simulate,
)

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class SourceSpace:
    """Admissible dipole regions inside a spherical head (meters).

    Cortical sources sit on the shell of radius cortex_radius; deep
    sources are drawn from the ball of radius deep_radius.
    """

    head_radius: float = 0.09
    cortex_radius: float | None = None
    deep_radius: float | None = None

    def __post_init__(self) -> None:
        if self.head_radius <= 0.0:
            raise ValueError("head_radius must be positive")
        cortex = 0.8 * self.head_radius if self.cortex_radius is None else self.cortex_radius
        deep = 0.3 * self.head_radius if self.deep_radius is None else self.deep_radius
        if not 0.0 < deep <= cortex < self.head_radius:
            raise ValueError(
                "radii must satisfy 0 < deep_radius <= cortex_radius < head_radius"
            )
        object.__setattr__(self, "cortex_radius", cortex)
        object.__setattr__(self, "deep_radius", deep)


@dataclass(frozen=True)
class SourceGeometry:
    """Positions, unit orientations and role tags of all dipoles."""

    positions: np.ndarray
    orientations: np.ndarray
    roles: tuple[str, ...]
    deep: np.ndarray
    head_radius: float

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=float)
        orientations = np.asarray(self.orientations, dtype=float)
        deep = np.asarray(self.deep, dtype=bool)
        n = len(self.roles)
        if positions.shape != (n, 3) or orientations.shape != (n, 3):
            raise ValueError("positions and orientations must have shape (n, 3)")
        if deep.shape != (n,):
            raise ValueError("deep must have one flag per source")
        for role in self.roles:
            if role not in ROLES:
                raise ValueError(f"unknown source role {role!r}")
        norms = np.linalg.norm(orientations, axis=1)
        if np.max(np.abs(norms - 1.0), initial=0.0) > _UNIT_TOL:
            raise ValueError("orientations must be unit vectors")
        if np.any(np.linalg.norm(positions, axis=1) >= self.head_radius):
            raise ValueError("all positions must lie strictly inside the head")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "orientations", orientations)
        object.__setattr__(self, "deep", deep)

    @property
    def n_sources(self) -> int:
        return len(self.roles)

    @property
    def n_interest(self) -> int:
        return self.roles.count(ROLE_INTEREST)

    @property
    def n_interference(self) -> int:
        return self.roles.count(ROLE_INTERFERENCE)

    @property
    def n_background(self) -> int:
        return self.roles.count(ROLE_BACKGROUND)

    def role_indices(self, role: str) -> np.ndarray:
        if role not in ROLES:
            raise ValueError(f"unknown source role {role!r}")
        return np.array([i for i, tag in enumerate(self.roles) if tag == role])


@dataclass(frozen=True)
class PerturbedGeometry:
    """A geometry together with jittered positions and orientations.

    The original coordinates stay available through `base`; data
    generation always uses those, only filters may see the jitter.
    """

    base: SourceGeometry
    positions: np.ndarray
    orientations: np.ndarray

    def __post_init__(self) -> None:
        positions = np.asarray(self.positions, dtype=float)
        orientations = np.asarray(self.orientations, dtype=float)
        n = self.base.n_sources
        if positions.shape != (n, 3) or orientations.shape != (n, 3):
            raise ValueError("perturbed arrays must have shape (n, 3)")
        norms = np.linalg.norm(orientations, axis=1)
        if np.max(np.abs(norms - 1.0), initial=0.0) > _UNIT_TOL:
            raise ValueError("perturbed orientations must be unit vectors")
        if np.any(np.linalg.norm(positions, axis=1) >= self.base.head_radius):
            raise ValueError("perturbed positions must stay inside the head")
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "orientations", orientations)


def _random_unit(rng: np.random.Generator) -> np.ndarray:
    while True:
        v = rng.standard_normal(3)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def sample_geometry(
    counts: tuple[int, int, int],
    space: SourceSpace,
    rng: np.random.Generator,
    deep: tuple[int, int, int] = (0, 0, 0),
) -> SourceGeometry:
    """Draw dipoles role by role: interest, interference, background.

    counts gives the cortical dipoles per role, deep the additional
    deep dipoles.  Cortical dipoles sit on the cortex shell and point
    radially outward; deep dipoles are uniform in the deep ball with
    isotropic random orientation.  Positions are pairwise distinct.
    """
    counts = tuple(int(c) for c in counts)
    deep = tuple(int(c) for c in deep)
    if len(counts) != 3 or len(deep) != 3:
        raise ValueError("counts and deep must have one entry per role")
    if any(c < 0 for c in counts) or any(c < 0 for c in deep):
        raise ValueError("source counts must be non-negative")
    if counts[0] + deep[0] < 1:
        raise ValueError("at least one source of interest is required")

    positions: list[np.ndarray] = []
    orientations: list[np.ndarray] = []
    roles: list[str] = []
    deep_flags: list[bool] = []
    seen: set[bytes] = set()

    for role, n_cortical, n_deep in zip(ROLES, counts, deep):
        for is_deep in (False,) * n_cortical + (True,) * n_deep:
            while True:
                direction = _random_unit(rng)
                if is_deep:
                    radius = space.deep_radius * rng.random() ** (1.0 / 3.0)
                    pos = radius * direction
                    orient = _random_unit(rng)
                else:
                    pos = space.cortex_radius * direction
                    orient = direction
                key = pos.tobytes()
                if key not in seen:
                    seen.add(key)
                    break
            positions.append(pos)
            orientations.append(orient)
            roles.append(role)
            deep_flags.append(is_deep)

    return SourceGeometry(
        positions=np.array(positions),
        orientations=np.array(orientations),
        roles=tuple(roles),
        deep=np.array(deep_flags),
        head_radius=space.head_radius,
    )


def perturb_geometry(
    geom: SourceGeometry,
    cube_edge: float,
    cone_half_angle: float,
    rng: np.random.Generator,
) -> PerturbedGeometry:
    """Jitter positions within a cube and orientations within a cone.

    Each position moves by an independent uniform offset in
    [-cube_edge/2, cube_edge/2] per axis; each orientation gets uniform
    azimuth and elevation offsets bounded by cone_half_angle.  Zero
    bounds reproduce the input exactly.  Jittered positions that leave
    the head are pulled back just inside the scalp radius.
    """
    if cube_edge < 0.0:
        raise ValueError(f"cube_edge must be >= 0, got {cube_edge}")
    if not 0.0 <= cone_half_angle < np.pi / 2.0:
        raise ValueError(
            f"cone_half_angle must lie in [0, pi/2), got {cone_half_angle}"
        )
    n = geom.n_sources
    shifts = rng.uniform(-cube_edge / 2.0, cube_edge / 2.0, size=(n, 3))
    angle_offsets = rng.uniform(-cone_half_angle, cone_half_angle, size=(n, 2))

    positions = geom.positions + shifts
    radii = np.linalg.norm(positions, axis=1)
    outside = radii >= geom.head_radius
    if np.any(outside):
        # 1% inside the scalp keeps the spherical-harmonics expansion of
        # the forward model convergent for the pulled-back dipole.
        pullback = 0.99 * geom.head_radius / radii[outside]
        positions[outside] *= pullback[:, None]

    if cone_half_angle == 0.0:
        orientations = geom.orientations.copy()
    else:
        x, y, z = geom.orientations.T
        azimuth = np.arctan2(y, x) + angle_offsets[:, 0]
        elevation = np.arcsin(np.clip(z, -1.0, 1.0)) + angle_offsets[:, 1]
        orientations = np.column_stack(
            [
                np.cos(elevation) * np.cos(azimuth),
                np.cos(elevation) * np.sin(azimuth),
                np.sin(elevation),
            ]
        )
        orientations /= np.linalg.norm(orientations, axis=1)[:, None]

    return PerturbedGeometry(base=geom, positions=positions, orientations=orientations)


def erp_waveform(
    n_samples: int, amplitude: float, center: float, width: float
) -> np.ndarray:
    """First derivative of a Gaussian bump, sampled at 0..n_samples-1.

    w[t] = -amplitude * z * exp(-z^2 / 2) with z = (t - center) / width,
    so the extrema sit one width away from the center with magnitude
    amplitude * exp(-1/2).
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    if width <= 0.0:
        raise ValueError(f"width must be positive, got {width}")
    z = (np.arange(n_samples) - center) / width
    return -amplitude * z * np.exp(-0.5 * z * z)


@dataclass(frozen=True)
class SignalParams:
    """Knobs for ground-truth signal generation."""

    n_samples: int = 2000
    order_interest: int = 6
    order_background: int = 6
    frac_ones: float = 0.2
    stab_limit: float = 0.95
    coeff_range: tuple[float, float] = (-0.3, 0.3)
    iter_limit: int = 1000
    burn_in: int = 1000
    erp_enabled: bool = False
    erp_center: float | None = None
    erp_width: float | None = None

    def __post_init__(self) -> None:
        if self.n_samples < 2:
            raise ValueError("n_samples must be >= 2")
        if self.order_interest < 1 or self.order_background < 1:
            raise ValueError("model orders must be >= 1")


@dataclass(frozen=True)
class SourceSignals:
    """Per-role source time courses for both recording segments.

    Segment length n is shared by every block; interest rows carry the
    ERP (when enabled) in the post segment only, with the added
    waveform kept separately in `erp`.
    """

    interest_pre: np.ndarray
    interest_pst: np.ndarray
    interference_pre: np.ndarray
    interference_pst: np.ndarray
    background_pre: np.ndarray
    background_pst: np.ndarray
    erp: np.ndarray
    models: CompositeMvar
    interest_model: MvarModel
    background_model: MvarModel | None

    def __post_init__(self) -> None:
        n = self.interest_pre.shape[1]
        pairs = (
            (self.interest_pre, self.interest_pst),
            (self.interference_pre, self.interference_pst),
            (self.background_pre, self.background_pst),
        )
        for pre, pst in pairs:
            if pre.shape != pst.shape or pre.shape[1] != n:
                raise ShapeMismatch("pre/post segment shapes disagree")
        if self.erp.shape != self.interest_pst.shape:
            raise ShapeMismatch("erp must match the interest block shape")


def generate_source_signals(
    geom: SourceGeometry,
    params: SignalParams,
    rng: np.random.Generator,
) -> SourceSignals:
    """Simulate all ground-truth source activity for one realization.

    Interest and background series come from freshly sampled stable
    masked MVAR models (independent of each other).  Interference rows
    mirror the first min(k, l) interest rows negated plus white noise
    matched to each row's empirical power; extra rows (k > l) are fresh
    white noise at the mean power of the constructed rows.  The ERP is
    added to the interest post segment after interference is built.
    """
    l = geom.n_interest
    k = geom.n_interference
    n_background = geom.n_background
    if l < 1:
        raise ValueError("geometry must contain at least one source of interest")
    n = params.n_samples
    total = 2 * n

    interest_model = sample_stable_mvar(
        l,
        params.order_interest,
        make_mask(l, params.frac_ones, rng),
        params.stab_limit,
        params.coeff_range,
        params.iter_limit,
        rng,
    )
    interest_full = simulate(interest_model, total, rng, burn_in=params.burn_in)

    background_model: MvarModel | None = None
    background_full = np.zeros((0, total))
    if n_background > 0:
        background_model = sample_stable_mvar(
            n_background,
            params.order_background,
            make_mask(n_background, params.frac_ones, rng),
            params.stab_limit,
            params.coeff_range,
            params.iter_limit,
            rng,
        )
        background_full = simulate(background_model, total, rng, burn_in=params.burn_in)

    noise = rng.standard_normal((k, total))
    interference_full = np.zeros((k, total))
    n_mirrored = min(k, l)
    for row in range(n_mirrored):
        target_power = np.mean(interest_full[row] ** 2)
        scale = np.sqrt(target_power / np.mean(noise[row] ** 2))
        interference_full[row] = -interest_full[row] + scale * noise[row]
    if k > n_mirrored:
        pad_power = np.mean(
            [np.mean(interference_full[row] ** 2) for row in range(n_mirrored)]
        )
        for row in range(n_mirrored, k):
            scale = np.sqrt(pad_power / np.mean(noise[row] ** 2))
            interference_full[row] = scale * noise[row]

    interest_pst = interest_full[:, n:].copy()
    erp = np.zeros((l, n))
    if params.erp_enabled:
        center = float(n // 2) if params.erp_center is None else params.erp_center
        width = max(n / 16.0, 1.0) if params.erp_width is None else params.erp_width
        for row in range(l):
            amplitude = float(np.std(interest_pst[row]))
            erp[row] = erp_waveform(n, amplitude, center, width)
        interest_pst += erp

    joined_models = [interest_model]
    joined_roles = [ROLE_INTEREST]
    if background_model is not None:
        joined_models.append(background_model)
        joined_roles.append(ROLE_BACKGROUND)

    return SourceSignals(
        interest_pre=interest_full[:, :n],
        interest_pst=interest_pst,
        interference_pre=interference_full[:, :n],
        interference_pst=interference_full[:, n:],
        background_pre=background_full[:, :n],
        background_pst=background_full[:, n:],
        erp=erp,
        models=block_diagonal(joined_models, joined_roles),
        interest_model=interest_model,
        background_model=background_model,
    )


def write_geometry_csv(geom: SourceGeometry, path: str | Path) -> None:
    """Export one row per dipole: role,deep,x,y,z,ox,oy,oz."""
    path = Path(path)
    with path.open("w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["role", "deep", "x", "y", "z", "ox", "oy", "oz"])
        for i, role in enumerate(geom.roles):
            writer.writerow(
                [role, int(geom.deep[i])]
                + [repr(float(v)) for v in geom.positions[i]]
                + [repr(float(v)) for v in geom.orientations[i]]
            )
