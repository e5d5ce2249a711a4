"""Seeded minimum-spanning-forest segmentation with learnable edge altitudes."""

from ._core import (
    GridGraph,
    GrowthRecord,
    arand,
    boundary_mask,
    cut_set,
    distance_transform,
    dtws_altitudes,
    generate,
    grow,
    load_image,
    load_labels,
    msf_oracle,
    save_image,
    save_labels,
    seed_oracle,
    smooth_image,
    voi,
)

__all__ = [
    "GridGraph",
    "GrowthRecord",
    "arand",
    "boundary_mask",
    "cut_set",
    "distance_transform",
    "dtws_altitudes",
    "generate",
    "grow",
    "load_image",
    "load_labels",
    "msf_oracle",
    "save_image",
    "save_labels",
    "seed_oracle",
    "smooth_image",
    "voi",
]
