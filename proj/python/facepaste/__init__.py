"""Face-pasting black-box attack toolkit."""

from facepaste._core import (
    AttackSpec,
    BoObservation,
    BoState,
    FaceSet,
    MaskMode,
    MaskSet,
    PasteParams,
    QueryResult,
    SimulatedOracle,
    build_mask_set,
    generate_faces,
    is_success,
    load_faces,
    objective,
    optimize,
    render,
    ssim,
    write_faces,
)

__all__ = [
    "AttackSpec",
    "BoObservation",
    "BoState",
    "FaceSet",
    "MaskMode",
    "MaskSet",
    "PasteParams",
    "QueryResult",
    "SimulatedOracle",
    "build_mask_set",
    "generate_faces",
    "is_success",
    "load_faces",
    "objective",
    "optimize",
    "render",
    "ssim",
    "write_faces",
]
