"""
Checkpoint persistence for training runs.

This module saves and loads model parameters, BN statistics, optimizer moments
and DWA state in a versioned binary format, with atomic writes and distinct
error codes for corrupted files.
"""

from .checkpoint import (
    BadMagicError,
    Checkpoint,
    CheckpointError,
    DimensionOverflowError,
    MalformedCheckpointError,
    TruncatedCheckpointError,
    VersionMismatchError,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    restore_model,
    save_checkpoint,
)

__all__ = [
    "BadMagicError",
    "Checkpoint",
    "CheckpointError",
    "DimensionOverflowError",
    "MalformedCheckpointError",
    "TruncatedCheckpointError",
    "VersionMismatchError",
    "decode_checkpoint",
    "encode_checkpoint",
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
]
