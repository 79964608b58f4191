"""Python interface to the tacting game core."""

from ._covol import (
    MIN_PICTOGRAM_INTERVAL_MS,
    PROTOCOL_VERSION,
    CovolError,
    Session,
    build_prompt_sequence,
    decode_frame,
    encode_frame,
    load_catalog,
    match,
    normalize,
    run_benchmark,
    session_config,
    validate_catalog,
    word_edit_distance,
    word_error_rate,
)

__all__ = [
    "MIN_PICTOGRAM_INTERVAL_MS",
    "PROTOCOL_VERSION",
    "CovolError",
    "Session",
    "build_prompt_sequence",
    "decode_frame",
    "encode_frame",
    "load_catalog",
    "match",
    "normalize",
    "run_benchmark",
    "session_config",
    "validate_catalog",
    "word_edit_distance",
    "word_error_rate",
]
