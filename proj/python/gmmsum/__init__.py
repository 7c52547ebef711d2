"""Gaussian mixture summaries of scattered multivariate data."""

from ._core import (
    Dataset,
    FitConfig,
    GmmsumError,
    Service,
    Summary,
    TransferMatrix,
    brush_doi,
    build_summary,
    combine_doi,
    default_extent,
    density_1d,
    density_2d,
    fit_em,
    generate_synthetic,
    kmeans_labels,
    load_dataset,
    load_labels,
    load_summary,
    pcp,
    ray_integral,
    render,
    save_dataset,
    save_labels,
    time_histogram,
    tone_map,
    transfer_matrix,
)

__all__ = [name for name in dir() if not name.startswith("_")]
