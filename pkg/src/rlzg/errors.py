"""Exception hierarchy for the rlzg package."""


class RlzgError(Exception):
    """Base class for all rlzg errors."""


class FastaError(RlzgError):
    """Malformed FASTA input (bad header, stray bytes, empty file)."""


class CorruptArchiveError(RlzgError):
    """Archive bytes violate the container format or its invariants."""


class UnsupportedVersionError(CorruptArchiveError):
    """Archive was written by an unknown format version."""
