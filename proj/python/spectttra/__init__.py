"""Python bindings for the spectttra C++ core."""

from ._core import (
    Model,
    NonFiniteError,
    eer,
    generate_toy,
    log_mel,
    metrics,
    profile,
    read_wav,
    token_count,
    vit_token_count,
    write_wav,
)

__all__ = [
    "Model",
    "NonFiniteError",
    "eer",
    "generate_toy",
    "log_mel",
    "metrics",
    "profile",
    "read_wav",
    "token_count",
    "vit_token_count",
    "write_wav",
]
__version__ = "0.1.0"
