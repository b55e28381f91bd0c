"""Slanted matrices: composition, slant norms, Banach-algebra stability
analysis, frame inversion and nonuniform spline sampling."""

from __future__ import annotations

from .slant_core import (
    IndexWindow,
    Slant,
    SlantedMatrix,
    Weight,
    adjoint,
    apply,
    compose,
    compose_band,
    load_matrix,
    operator_norm,
    save_matrix,
    slant_extract,
    slant_norm,
    sup_norm,
    truncate,
)
from .bb_analysis import (
    BBCertificate,
    certificate,
    commutator_bound,
    commutator_norm,
    estimate_kappa,
    pfander_witness,
    triple_norm,
)
from .frames import FrameSystem, NearSingular, left_inverse, inverse_slant_decay, p_frame_bounds
from .sampling import (
    Generator,
    SamplingSet,
    build_sampling_matrix,
    homogenize,
    reconstruct_from_samples,
    stability_bound,
)

__version__ = "0.1.0"
