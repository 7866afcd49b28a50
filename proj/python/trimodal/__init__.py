"""Align 3D Gaussian-splat objects with image and text embeddings."""

from ._core import (
    ContractError,
    DegenerateInputError,
    DimensionError,
    EmbeddingRecord,
    EmbeddingStore,
    Error,
    FormatError,
    Hit,
    LookupError,
    Modality,
    NumericError,
    cli,
    few_shot_linear_probe,
    gradient_suite,
    info_nce,
    load_shard,
    load_store,
    metrics_from_csv,
    read_ply,
    save_store,
    similarity_matrix,
    toy_config_text,
    train,
    zero_shot_classify,
)

__all__ = [
    "ContractError",
    "DegenerateInputError",
    "DimensionError",
    "EmbeddingRecord",
    "EmbeddingStore",
    "Error",
    "FormatError",
    "Hit",
    "LookupError",
    "Modality",
    "NumericError",
    "cli",
    "few_shot_linear_probe",
    "gradient_suite",
    "info_nce",
    "load_shard",
    "load_store",
    "metrics_from_csv",
    "read_ply",
    "save_store",
    "similarity_matrix",
    "toy_config_text",
    "train",
    "zero_shot_classify",
]
