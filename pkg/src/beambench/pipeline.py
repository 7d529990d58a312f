"""End-to-end benchmark runs: seeding, realizations, outputs, report.

Stream layout: the source geometry is drawn once from the spawn-key-0
child of the root seed; realization i (1-based) owns the spawn-key-i
child, split in fixed order into signal, perturbation, sensor-noise
and filter streams.  Results are therefore byte-identical for any
worker count, since no stream depends on execution order.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import SetupConfig, to_manifest
from .connectivity import default_freqs
from .errors import BenchError, MissingRun, PipelineError
from .filters import (
    EIG_KINDS,
    MVP_KINDS,
    FilterKind,
    FilterSpec,
    build_filter_bank,
    estimate_covariances,
    reconstruct,
)
from .forward import (
    MeasurementConfig,
    compose_measurement,
    fibonacci_montage,
    leadfield_sphere,
    save_leadfield,
)
from .metrics import (
    EvalRow,
    aggregate,
    evaluate,
    load_summary_csv,
    render_report,
    write_results_csv,
    write_summary_csv,
)
from .sources import (
    SignalParams,
    SourceSpace,
    generate_source_signals,
    perturb_geometry,
    sample_geometry,
    write_geometry_csv,
)


def _signal_params(config: SetupConfig) -> SignalParams:
    return SignalParams(
        n_samples=config.n_samples,
        order_interest=config.order_interest,
        order_background=config.order_background,
        frac_ones=config.frac_ones,
        stab_limit=config.stab_limit,
        coeff_range=config.coeff_range,
        iter_limit=config.iter_limit,
        erp_enabled=config.erp_enabled,
    )


def _measurement_config(config: SetupConfig) -> MeasurementConfig:
    return MeasurementConfig(
        sinr_db=config.sinr_db,
        sbnr_db=config.sbnr_db,
        smnr_db=config.smnr_db,
        interest_pre=config.interest_pre,
        interference_pre=config.interference_pre,
        background_pre=config.background_pre,
        noise_pre=config.noise_pre,
        interest_pst=config.interest_pst,
        interference_pst=config.interference_pst,
        background_pst=config.background_pst,
        noise_pst=config.noise_pst,
        use_interest_pert=config.use_interest_pert,
        use_interference_pert=config.use_interference_pert,
        interference_rank=config.interference_rank,
    )


def _filter_specs(config: SetupConfig) -> list[FilterSpec]:
    l = config.n_interest
    specs = []
    for name in config.filters:
        kind = FilterKind(name)
        rank = (config.mvp_rank or l) if kind in MVP_KINDS else None
        sig_dim = (config.eig_dim or l) if kind in EIG_KINDS else None
        specs.append(FilterSpec(kind=kind, rank=rank, sig_dim=sig_dim))
    return specs


def _realization_streams(seed: int, index: int) -> list[np.random.Generator]:
    parent = np.random.SeedSequence(seed, spawn_key=(index,))
    return [np.random.default_rng(child) for child in parent.spawn(4)]


def run(config: SetupConfig, out_dir: str | Path | None = None, jobs: int = 1) -> Path:
    """Execute all realizations and write the run directory.

    Outputs: geometry.csv, results.csv, summary.csv, manifest.json and
    (optionally) the filter matrices of the first realization.
    Returns the run directory path.
    """
    if jobs < 1:
        raise ValueError(f"jobs must be >= 1, got {jobs}")
    out = Path(out_dir) if out_dir is not None else Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    space = SourceSpace()
    geometry_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(0,))
    )
    geometry = sample_geometry(
        config.sources, space, geometry_rng, config.deep_sources
    )
    montage = fibonacci_montage(config.n_electrodes, space.head_radius)
    params = _signal_params(config)
    meas_cfg = _measurement_config(config)
    specs = _filter_specs(config)
    freqs = default_freqs(config.pdc_resolution)

    def run_one(index: int) -> list[EvalRow]:
        stage = "seeding"
        try:
            rng_signals, rng_perturb, rng_noise, rng_filters = _realization_streams(
                config.seed, index
            )
            stage = "signals"
            signals = generate_source_signals(geometry, params, rng_signals)
            stage = "perturbation"
            perturbed = perturb_geometry(
                geometry, config.cube_edge, config.cone_half_angle, rng_perturb
            )
            stage = "leadfields"
            lf = leadfield_sphere(perturbed, montage)
            stage = "measurement"
            recording, lf_view = compose_measurement(signals, lf, meas_cfg, rng_noise)
            cov_set = estimate_covariances(recording, signals)
            stage = "filters"
            bank = build_filter_bank(specs, cov_set, lf_view, rng_filters)
            if config.dump_filters and index == 1:
                filter_dir = out / "filters"
                filter_dir.mkdir(exist_ok=True)
                for built in bank:
                    save_leadfield(
                        built.weights, filter_dir / f"{built.spec.export_name}.csv"
                    )
            stage = "evaluation"
            return [
                evaluate(
                    signals.interest_pst,
                    reconstruct(built, recording.sensors_pst),
                    signals.interest_model,
                    config.order_interest,
                    freqs,
                    filter_name=built.spec.name,
                    realization=index,
                )
                for built in bank
            ]
        except BenchError as exc:
            raise PipelineError(f"realization {index}, stage {stage}: {exc}") from exc

    indices = range(1, config.n_realizations + 1)
    if jobs == 1:
        batches = [run_one(index) for index in indices]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            batches = list(pool.map(run_one, indices))

    rows = [row for batch in batches for row in batch]
    write_geometry_csv(geometry, out / "geometry.csv")
    write_results_csv(rows, out / "results.csv")
    write_summary_csv(aggregate(rows), out / "summary.csv")
    manifest = {
        "tool": "beambench",
        "version": __version__,
        "root_seed": config.seed,
        "streams": {
            "geometry": {"spawn_key": [0]},
            "realizations": {
                "spawn_key": "[i] for realization i (1-based)",
                "children": ["signals", "perturbation", "noise", "filters"],
            },
        },
        "outputs": ["geometry.csv", "results.csv", "summary.csv", "manifest.json"],
    }
    manifest.update(to_manifest(config))
    with (out / "manifest.json").open("w") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return out


def report(run_dir: str | Path) -> str:
    """Render the summary table of a finished run."""
    summary_path = Path(run_dir) / "summary.csv"
    if not summary_path.exists():
        raise MissingRun(f"no summary.csv under {run_dir}")
    return render_report(load_summary_csv(summary_path))


def export_leadfield(config: SetupConfig, out_path: str | Path) -> Path:
    """Write the full average-referenced lead-field for the config's
    geometry, columns ordered like the geometry.csv rows."""
    space = SourceSpace()
    geometry_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(0,))
    )
    geometry = sample_geometry(config.sources, space, geometry_rng, config.deep_sources)
    montage = fibonacci_montage(config.n_electrodes, space.head_radius)
    lf = leadfield_sphere(geometry, montage)
    matrix = np.hstack([lf.interest, lf.interference, lf.background])
    out_path = Path(out_path)
    save_leadfield(matrix, out_path)
    return out_path
