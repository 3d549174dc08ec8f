"""T-private information retrieval at capacity with minimal sub-packetization."""

from .errors import (
    DivisionByZero,
    FieldTooSmall,
    FormatError,
    InternalError,
    InvalidConfig,
    PirError,
    ProtocolError,
    RetrievalFailed,
    ShapeError,
    SingularMatrix,
    TooLargeForExhaustive,
)
from .field import FieldElement, FieldMatrix, PrimeField, sample_full_rank
from .mds import SystematicMdsCode, encode, erasure_decode, make_code
from .params import SchemeConfig, SchemeParams, capacity, derive_params
from .scheme import Database, answer, build_schedule, decode, generate_queries, retrieve_local

__all__ = [
    "Database", "DivisionByZero", "FieldElement", "FieldMatrix", "FieldTooSmall", "FormatError",
    "InternalError", "InvalidConfig", "PirError", "PrimeField", "ProtocolError", "RetrievalFailed",
    "SchemeConfig", "SchemeParams", "ShapeError", "SingularMatrix", "SystematicMdsCode",
    "TooLargeForExhaustive", "answer", "build_schedule", "capacity", "decode", "derive_params",
    "encode", "erasure_decode", "generate_queries", "make_code", "retrieve_local", "sample_full_rank",
]
