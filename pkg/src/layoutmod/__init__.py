"""Layout-guided attention modulation for diffusion denoisers, with a toy sampler."""

from layoutmod.errors import (
    AlignmentError,
    ConsistencyError,
    EmptyMaskError,
    InvalidInputError,
    LayoutError,
    MalformedLayoutError,
    OverlapError,
    ResolutionError,
)
from layoutmod.layout import (
    LayoutCondition,
    ResolvedLayout,
    Segment,
    map_tokens_to_segments,
    parse_layout,
    resolve_layout,
    segment_areas,
    tokenize,
)
from layoutmod.modulation import (
    ModulationParams,
    area_matrix,
    build_r_cross,
    build_r_self,
    compute_lambda,
    modulate,
    value_range_matrices,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "ConsistencyError",
    "EmptyMaskError",
    "InvalidInputError",
    "LayoutCondition",
    "LayoutError",
    "MalformedLayoutError",
    "ModulationParams",
    "OverlapError",
    "ResolutionError",
    "ResolvedLayout",
    "Segment",
    "area_matrix",
    "build_r_cross",
    "build_r_self",
    "compute_lambda",
    "map_tokens_to_segments",
    "modulate",
    "parse_layout",
    "resolve_layout",
    "segment_areas",
    "tokenize",
    "value_range_matrices",
]
