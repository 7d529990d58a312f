"""Spatial filter bank for source reconstruction.

All filters produce a weight matrix W of shape (l, m) mapping m sensor
channels to l sources of interest.  The bank covers linearly
constrained minimum variance beamformers against the data and noise
covariances, their eigenspace-projected versions, an interference
nulling beamformer, two Wiener (minimum MSE) variants, zero forcing,
six reduced-rank minimum-variance pseudo-unbiased (MV-PURE) variants,
and a random baseline used as the floor in comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import (
    EigenDecompositionFailure,
    RankDeficientLeadfield,
    ShapeMismatch,
    SingularCovariance,
)
from .forward import LeadfieldSet, Recording
from .sources import SourceSignals

_COND_LIMIT = 1e12
_LOAD_EPS = 1e-10
_RANK_RTOL = 1e-10
_GRAM_RTOL = 1e-12


class FilterKind(str, Enum):
    """Canonical filter names, in report order."""

    LCMV_R = "LCMV_R"
    LCMV_N = "LCMV_N"
    EIG_LCMV_R = "EIG_LCMV_R"
    EIG_LCMV_N = "EIG_LCMV_N"
    NL = "NL"
    MMSE_F = "MMSE_F"
    MMSE_I = "MMSE_I"
    ZF = "ZF"
    RANDN = "RANDN"
    MVP_F_1 = "MVP_F_1"
    MVP_F_2 = "MVP_F_2"
    MVP_F_3 = "MVP_F_3"
    MVP_I_1 = "MVP_I_1"
    MVP_I_2 = "MVP_I_2"
    MVP_I_3 = "MVP_I_3"


MVP_KINDS = (
    FilterKind.MVP_F_1,
    FilterKind.MVP_F_2,
    FilterKind.MVP_F_3,
    FilterKind.MVP_I_1,
    FilterKind.MVP_I_2,
    FilterKind.MVP_I_3,
)
EIG_KINDS = (FilterKind.EIG_LCMV_R, FilterKind.EIG_LCMV_N)


@dataclass(frozen=True)
class FilterSpec:
    """A filter kind plus its rank knobs where applicable."""

    kind: FilterKind
    rank: int | None = None
    sig_dim: int | None = None

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def export_name(self) -> str:
        """File stem for weight dumps; rank-parametrised kinds carry it."""
        if self.rank is not None and self.kind in MVP_KINDS:
            return f"{self.kind.value}_r{self.rank}"
        return self.kind.value


@dataclass(frozen=True)
class FilterDiagnostics:
    """Residual of the distortionless constraint (when one applies)
    and the numerical rank of the weight matrix."""

    constraint_residual: float | None
    numerical_rank: int


@dataclass(frozen=True)
class SpatialFilter:
    weights: np.ndarray
    spec: FilterSpec
    diagnostics: FilterDiagnostics

    def __post_init__(self) -> None:
        weights = np.asarray(self.weights, dtype=float)
        if weights.ndim != 2:
            raise ValueError("weights must be a matrix")
        if not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite")
        object.__setattr__(self, "weights", weights)


@dataclass(frozen=True)
class CovarianceSet:
    """Second-order statistics needed by the bank.

    data_cov and noise_cov come from the sensor segments; source_cov,
    composite_cov and cross_cov are oracle covariances computed from
    the ground-truth source signals of the post segment.
    """

    data_cov: np.ndarray
    noise_cov: np.ndarray
    source_cov: np.ndarray
    composite_cov: np.ndarray
    cross_cov: np.ndarray

    def __post_init__(self) -> None:
        for name in ("data_cov", "noise_cov", "source_cov", "composite_cov"):
            matrix = getattr(self, name)
            if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.max(np.abs(matrix - matrix.T), initial=0.0) > 1e-10:
                raise ValueError(f"{name} must be symmetric")
        l = self.source_cov.shape[0]
        if self.composite_cov.shape[0] < l:
            raise ShapeMismatch("composite_cov cannot be smaller than source_cov")
        if self.cross_cov.shape != (l, self.composite_cov.shape[0]):
            raise ShapeMismatch("cross_cov must be l x (l + k)")
        if np.max(np.abs(self.composite_cov[:l, :l] - self.source_cov)) > 1e-10:
            raise ValueError("composite_cov must embed source_cov as its top block")


def estimate_covariances(recording: Recording, signals: SourceSignals) -> CovarianceSet:
    """Non-centered sample covariances over the two segments.

    The sensor data covariance comes from the post segment and the
    sensor noise covariance from the pre segment; source-side matrices
    use the ground-truth post-segment activity.
    """
    n = recording.sensors_pst.shape[1]
    if n < 2:
        raise ValueError("at least two samples per segment are required")
    interest = signals.interest_pst
    composite = np.vstack([interest, signals.interference_pst])
    return CovarianceSet(
        data_cov=recording.sensors_pst @ recording.sensors_pst.T / n,
        noise_cov=recording.sensors_pre @ recording.sensors_pre.T / n,
        source_cov=interest @ interest.T / n,
        composite_cov=composite @ composite.T / n,
        cross_cov=interest @ composite.T / n,
    )


def regularized_inverse(matrix: np.ndarray) -> np.ndarray:
    """Invert a symmetric covariance, diagonally loading if needed.

    When the condition number exceeds 1e12 the matrix gets
    1e-10 * trace/m added to its diagonal; if it stays that badly
    conditioned the input is considered singular.
    """
    matrix = np.asarray(matrix, dtype=float)
    sym = 0.5 * (matrix + matrix.T)
    m = sym.shape[0]
    try:
        eigval, eigvec = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"eigendecomposition failed: {exc}") from exc
    largest = eigval[-1]
    if largest <= 0.0:
        raise SingularCovariance("covariance has no positive eigenvalue")
    if eigval[0] <= 0.0 or largest / eigval[0] > _COND_LIMIT:
        eigval = eigval + _LOAD_EPS * np.sum(eigval) / m
        if eigval[0] <= 0.0 or eigval[-1] / eigval[0] > _COND_LIMIT:
            raise SingularCovariance(
                "covariance stays ill-conditioned after diagonal loading"
            )
    return (eigvec / eigval) @ eigvec.T


def _numerical_rank(weights: np.ndarray) -> int:
    sv = np.linalg.svd(weights, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > _RANK_RTOL * sv[0]))


def _constrained_weights(leadfield: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """W = (H' M^-1 H)^-1 H' M^-1 for a full-column-rank H."""
    cov_inv = regularized_inverse(cov)
    gram = leadfield.T @ cov_inv @ leadfield
    gram = 0.5 * (gram + gram.T)
    eigval = np.linalg.eigvalsh(gram)
    if eigval[-1] <= 0.0 or eigval[0] <= _GRAM_RTOL * eigval[-1]:
        raise RankDeficientLeadfield(
            "whitened lead-field Gram matrix is numerically singular"
        )
    return np.linalg.solve(gram, leadfield.T @ cov_inv)


def lcmv(
    leadfield: np.ndarray,
    cov: np.ndarray,
    kind: FilterKind = FilterKind.LCMV_R,
) -> SpatialFilter:
    """Distortionless minimum-variance beamformer against cov."""
    weights = _constrained_weights(leadfield, cov)
    residual = float(np.linalg.norm(weights @ leadfield - np.eye(weights.shape[0])))
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=kind),
        diagnostics=FilterDiagnostics(residual, _numerical_rank(weights)),
    )


def nulling(composite: np.ndarray, cov: np.ndarray, n_interest: int) -> SpatialFilter:
    """LCMV over [H H_i] keeping the interest rows: passes the interest
    columns distortionless while placing exact nulls on interference."""
    if not 1 <= n_interest <= composite.shape[1]:
        raise ValueError("n_interest must address a prefix of the composite columns")
    weights = _constrained_weights(composite, cov)[:n_interest]
    target = np.eye(n_interest, composite.shape[1])
    residual = float(np.linalg.norm(weights @ composite - target))
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=FilterKind.NL),
        diagnostics=FilterDiagnostics(residual, _numerical_rank(weights)),
    )


def wiener(cov_set: CovarianceSet, lf: LeadfieldSet, kind: FilterKind) -> SpatialFilter:
    """Minimum mean-square error reconstruction.

    MMSE_F ignores interference structure: W = Q H' R^-1.  MMSE_I uses
    the joint source block: W = E[q q_c'] H_c' R^-1.  With no
    interference sources both coincide.
    """
    data_inv = regularized_inverse(cov_set.data_cov)
    if kind is FilterKind.MMSE_F:
        weights = cov_set.source_cov @ lf.filter_interest.T @ data_inv
    elif kind is FilterKind.MMSE_I:
        weights = cov_set.cross_cov @ lf.composite.T @ data_inv
    else:
        raise ValueError(f"not a Wiener filter kind: {kind}")
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=kind),
        diagnostics=FilterDiagnostics(None, _numerical_rank(weights)),
    )


def zero_forcing(leadfield: np.ndarray) -> SpatialFilter:
    """Moore-Penrose pseudoinverse of the interest lead-field."""
    sv = np.linalg.svd(leadfield, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0 or sv[-1] <= _GRAM_RTOL * sv[0]:
        raise RankDeficientLeadfield("lead-field does not have full column rank")
    weights = np.linalg.pinv(leadfield, rcond=_GRAM_RTOL)
    residual = float(np.linalg.norm(weights @ leadfield - np.eye(weights.shape[0])))
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=FilterKind.ZF),
        diagnostics=FilterDiagnostics(residual, _numerical_rank(weights)),
    )


def eig_lcmv(base: SpatialFilter, data_cov: np.ndarray, sig_dim: int) -> SpatialFilter:
    """Project an LCMV filter onto the top-sig_dim eigenspace of the
    data covariance (the presumed signal subspace).

    Eigenvalue ties are resolved by the ascending output order of the
    symmetric eigendecomposition, which is deterministic for a given
    input matrix.
    """
    m = data_cov.shape[0]
    if not 1 <= sig_dim <= m:
        raise ValueError(f"sig_dim must lie in [1, {m}], got {sig_dim}")
    kind_map = {
        FilterKind.LCMV_R: FilterKind.EIG_LCMV_R,
        FilterKind.LCMV_N: FilterKind.EIG_LCMV_N,
    }
    if base.spec.kind not in kind_map:
        raise ValueError("base filter must be LCMV_R or LCMV_N")
    sym = 0.5 * (data_cov + data_cov.T)
    try:
        _, eigvec = np.linalg.eigh(sym)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionFailure(str(exc)) from exc
    top = eigvec[:, m - sig_dim :]
    weights = (base.weights @ top) @ top.T
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=kind_map[base.spec.kind], sig_dim=sig_dim),
        diagnostics=FilterDiagnostics(None, _numerical_rank(weights)),
    )


def mv_pure(
    kind: FilterKind,
    rank: int,
    cov_set: CovarianceSet,
    lcmv_r: SpatialFilter,
    lcmv_n: SpatialFilter,
    nl: SpatialFilter,
) -> SpatialFilter:
    """Reduced-rank MV-PURE variants.

    The projection collects the eigenvectors of the rank-selection
    matrix belonging to its `rank` smallest eigenvalues:

        variant 1:  W_R R W_R' - 2 Q
        variant 2:  W_R R W_R'
        variant 3:  W_N N W_N'

    F variants project the matching LCMV filter (variants 1 and 2 pair
    with LCMV_R, variant 3 with LCMV_N); I variants project the
    interference-nulling filter.  Eigenvalue ties are resolved by the
    ascending output order of the symmetric eigendecomposition, which
    is deterministic for a given input matrix.
    """
    if kind not in MVP_KINDS:
        raise ValueError(f"not an MV-PURE kind: {kind}")
    family, variant = kind.value.split("_")[1], int(kind.value.split("_")[2])
    w_r, w_n = lcmv_r.weights, lcmv_n.weights
    l = w_r.shape[0]
    if not 1 <= rank <= l:
        raise ValueError(f"rank must lie in [1, {l}], got {rank}")
    if variant == 1:
        selection = w_r @ cov_set.data_cov @ w_r.T - 2.0 * cov_set.source_cov
    elif variant == 2:
        selection = w_r @ cov_set.data_cov @ w_r.T
    else:
        selection = w_n @ cov_set.noise_cov @ w_n.T
    selection = 0.5 * (selection + selection.T)
    try:
        _, eigvec = np.linalg.eigh(selection)
    except np.linalg.LinAlgError as exc:
        raise EigenDecompositionFailure(str(exc)) from exc
    low = eigvec[:, :rank]
    projector = low @ low.T
    if family == "F":
        base = lcmv_r if variant in (1, 2) else lcmv_n
    else:
        base = nl
    weights = projector @ base.weights
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=kind, rank=rank),
        diagnostics=FilterDiagnostics(None, _numerical_rank(weights)),
    )


def randn_baseline(n_interest: int, m: int, rng: np.random.Generator) -> SpatialFilter:
    """Gaussian weights scaled by 1/sqrt(m); the comparison floor."""
    if n_interest < 1 or m < 1:
        raise ValueError("n_interest and m must be positive")
    weights = rng.standard_normal((n_interest, m)) / np.sqrt(m)
    return SpatialFilter(
        weights=weights,
        spec=FilterSpec(kind=FilterKind.RANDN),
        diagnostics=FilterDiagnostics(None, _numerical_rank(weights)),
    )


def reconstruct(filt: SpatialFilter, sensors: np.ndarray) -> np.ndarray:
    """Apply the filter: estimated sources = W @ sensors."""
    sensors = np.asarray(sensors, dtype=float)
    if sensors.ndim != 2 or sensors.shape[0] != filt.weights.shape[1]:
        raise ShapeMismatch(
            f"filter expects {filt.weights.shape[1]} sensor rows, "
            f"got {sensors.shape}"
        )
    return filt.weights @ sensors


def parse_filter_list(text: str) -> tuple[str, ...]:
    """Parse a comma-separated filter list; 'all' selects the full bank."""
    cleaned = text.strip()
    if cleaned.lower() == "all":
        return tuple(kind.value for kind in FilterKind)
    names = [token.strip() for token in cleaned.split(",") if token.strip()]
    if not names:
        raise ValueError("filter list is empty")
    valid = {kind.value for kind in FilterKind}
    for name in names:
        if name not in valid:
            raise ValueError(
                f"unknown filter {name!r}; valid names: "
                + ", ".join(kind.value for kind in FilterKind)
            )
    return tuple(names)


def build_filter_bank(
    specs: list[FilterSpec],
    cov_set: CovarianceSet,
    lf: LeadfieldSet,
    rng: np.random.Generator,
) -> list[SpatialFilter]:
    """Construct the requested filters, sharing the LCMV/NL bases.

    Specs are built in the order given; the random baseline draws from
    rng only when requested.
    """
    l = lf.filter_interest.shape[1]
    m = lf.filter_interest.shape[0]
    cache: dict[FilterKind, SpatialFilter] = {}

    def base(kind: FilterKind) -> SpatialFilter:
        if kind not in cache:
            if kind is FilterKind.LCMV_R:
                cache[kind] = lcmv(lf.filter_interest, cov_set.data_cov, kind)
            elif kind is FilterKind.LCMV_N:
                cache[kind] = lcmv(lf.filter_interest, cov_set.noise_cov, kind)
            else:
                cache[kind] = nulling(lf.composite, cov_set.data_cov, l)
        return cache[kind]

    bank: list[SpatialFilter] = []
    for spec in specs:
        kind = spec.kind
        if kind in (FilterKind.LCMV_R, FilterKind.LCMV_N):
            built = base(kind)
        elif kind in EIG_KINDS:
            parent = base(
                FilterKind.LCMV_R if kind is FilterKind.EIG_LCMV_R else FilterKind.LCMV_N
            )
            built = eig_lcmv(parent, cov_set.data_cov, spec.sig_dim or l)
        elif kind is FilterKind.NL:
            built = base(FilterKind.NL)
        elif kind in (FilterKind.MMSE_F, FilterKind.MMSE_I):
            built = wiener(cov_set, lf, kind)
        elif kind is FilterKind.ZF:
            built = zero_forcing(lf.filter_interest)
        elif kind is FilterKind.RANDN:
            built = randn_baseline(l, m, rng)
        else:
            built = mv_pure(
                kind,
                spec.rank or l,
                cov_set,
                base(FilterKind.LCMV_R),
                base(FilterKind.LCMV_N),
                base(FilterKind.NL),
            )
        bank.append(built)
    return bank
