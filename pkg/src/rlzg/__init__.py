"""Relative LZ compression of genome collections with random access."""

from .archive import (
    Archive,
    compress,
    decompress,
    matching_groups,
    select_reference,
)
from .errors import CorruptArchiveError, FastaError, RlzgError, UnsupportedVersionError
from .genome import (
    Collection,
    Sequence,
    decode_symbols,
    encode_symbols,
    parse_fasta,
    write_fasta,
)
from .parse import Factor, Parse, ParseParams, apply_parse, parse_sequence

__all__ = [
    "Archive",
    "Collection",
    "CorruptArchiveError",
    "Factor",
    "FastaError",
    "Parse",
    "ParseParams",
    "RlzgError",
    "Sequence",
    "UnsupportedVersionError",
    "apply_parse",
    "compress",
    "decode_symbols",
    "decompress",
    "encode_symbols",
    "matching_groups",
    "parse_fasta",
    "parse_sequence",
    "select_reference",
    "write_fasta",
]

__version__ = "0.1.0"
