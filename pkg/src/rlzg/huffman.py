"""Canonical order-0 Huffman coding over the 256-value byte alphabet.

Tables are fully determined by their code lengths (max 15 bits) and
serialize as 128 bytes, two 4-bit lengths per byte.  Bitstreams are
MSB-first within bytes.  Encoding and decoding are vectorized: the
encoder scatters code bits for whole segments at once, the decoder
follows codeword chains with jump-table doubling, so both run at
numpy speed rather than per-symbol Python speed.
"""
from __future__ import annotations

import heapq

import numpy as np

from .errors import CorruptArchiveError

MAX_CODE_LEN = 15
_NWIN = 1 << MAX_CODE_LEN


def _tree_lengths(counts: np.ndarray) -> np.ndarray:
    """Unbounded Huffman code lengths via pairwise merging (deterministic)."""
    syms = np.flatnonzero(counts)
    lengths = np.zeros(256, dtype=np.uint8)
    if len(syms) == 1:
        lengths[syms[0]] = 1
        return lengths
    heap = [(int(counts[s]), int(s), (int(s),)) for s in syms]
    heapq.heapify(heap)
    order = 256
    while len(heap) > 1:
        c1, _, t1 = heapq.heappop(heap)
        c2, _, t2 = heapq.heappop(heap)
        merged = t1 + t2
        for s in merged:
            lengths[s] += 1
        heapq.heappush(heap, (c1 + c2, order, merged))
        order += 1
    return lengths


def _package_merge_lengths(counts: np.ndarray, maxlen: int) -> np.ndarray:
    """Optimal length-limited code lengths (used when the plain tree
    exceeds the 15-bit cap).  Always Kraft-tight."""
    syms = np.flatnonzero(counts)
    leaves = sorted((int(counts[s]), (int(s),)) for s in syms)
    merged = list(leaves)
    for _ in range(maxlen - 1):
        paired = [
            (merged[i][0] + merged[i + 1][0], merged[i][1] + merged[i + 1][1])
            for i in range(0, len(merged) - 1, 2)
        ]
        merged = sorted(paired + leaves)
    lengths = np.zeros(256, dtype=np.uint8)
    for _, group in merged[: 2 * len(syms) - 2]:
        for s in group:
            lengths[s] += 1
    return lengths


def _canonical_codes(lengths: np.ndarray) -> np.ndarray:
    codes = np.zeros(256, dtype=np.uint16)
    syms = np.flatnonzero(lengths)
    order = sorted(syms, key=lambda s: (lengths[s], s))
    code = 0
    prev = int(lengths[order[0]])
    for s in order:
        code <<= int(lengths[s]) - prev
        prev = int(lengths[s])
        codes[s] = code
        code += 1
    return codes


class HuffmanTable:
    """Canonical Huffman code, immutable once built."""

    __slots__ = ("lengths", "codes", "max_code_len", "_dec")

    def __init__(self, lengths: np.ndarray):
        self.lengths = np.asarray(lengths, dtype=np.uint8)
        self.codes = _canonical_codes(self.lengths)
        self.max_code_len = int(self.lengths.max())
        self._dec = None

    @classmethod
    def from_counts(cls, counts) -> "HuffmanTable":
        counts = np.asarray(counts)
        if counts.shape != (256,):
            raise ValueError("need exactly 256 symbol counts")
        if (counts < 0).any():
            raise ValueError("negative count")
        if not counts.any():
            raise ValueError("cannot build a Huffman table from all-zero counts")
        lengths = _tree_lengths(counts)
        if lengths.max() > MAX_CODE_LEN:
            lengths = _package_merge_lengths(counts, MAX_CODE_LEN)
        return cls(lengths)

    @classmethod
    def from_lengths(cls, lengths) -> "HuffmanTable":
        """Build from code lengths, enforcing the canonical invariants.

        Raises :class:`CorruptArchiveError` on an empty table, a length
        above 15, or a Kraft sum different from 1 (a lone symbol must
        have length exactly 1).
        """
        lengths = np.asarray(lengths, dtype=np.uint8)
        syms = np.flatnonzero(lengths)
        if len(syms) == 0:
            raise CorruptArchiveError("Huffman table has no symbols")
        if lengths.max() > MAX_CODE_LEN:
            raise CorruptArchiveError("Huffman code length above 15")
        kraft = int(np.sum(1 << (MAX_CODE_LEN - lengths[syms].astype(np.int64))))
        if len(syms) == 1:
            if lengths[syms[0]] != 1:
                raise CorruptArchiveError("single-symbol table must use length 1")
        elif kraft != _NWIN:
            raise CorruptArchiveError("Huffman table violates the Kraft equality")
        return cls(lengths)

    def serialize(self) -> bytes:
        """128 bytes: byte i holds lengths of symbols 2i (low nibble) and
        2i+1 (high nibble)."""
        pair = self.lengths.reshape(128, 2)
        return (pair[:, 0] | (pair[:, 1] << 4)).astype(np.uint8).tobytes()

    @classmethod
    def deserialize(cls, blob: bytes) -> "HuffmanTable":
        if len(blob) != 128:
            raise CorruptArchiveError("Huffman table blob must be 128 bytes")
        packed = np.frombuffer(blob, dtype=np.uint8)
        lengths = np.empty(256, dtype=np.uint8)
        lengths[0::2] = packed & 0x0F
        lengths[1::2] = packed >> 4
        return cls.from_lengths(lengths)

    def _decode_tables(self):
        if self._dec is None:
            dsym = np.full(_NWIN, -1, dtype=np.int16)
            dlen = np.zeros(_NWIN, dtype=np.uint8)
            for s in np.flatnonzero(self.lengths):
                ln = int(self.lengths[s])
                lo = int(self.codes[s]) << (MAX_CODE_LEN - ln)
                hi = lo + (1 << (MAX_CODE_LEN - ln))
                dsym[lo:hi] = s
                dlen[lo:hi] = ln
            self._dec = (dsym, dlen)
        return self._dec

    def coded_bits(self, values) -> int:
        """Total bits this table spends on ``values`` (no padding)."""
        return int(self.lengths[np.asarray(values, dtype=np.uint8)].astype(np.int64).sum())

    def __eq__(self, other) -> bool:
        if not isinstance(other, HuffmanTable):
            return NotImplemented
        return np.array_equal(self.lengths, other.lengths)


def _cat_ranges(starts: np.ndarray, lens: np.ndarray) -> np.ndarray:
    """[s0..s0+l0) ++ [s1..s1+l1) ++ ... as one index array."""
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64)
    base = np.repeat(starts, lens)
    csum = np.cumsum(lens) - lens
    return base + (np.arange(total, dtype=np.int64) - np.repeat(csum, lens))


def pack_codes(lens: np.ndarray, codes: np.ndarray, seg_sizes) -> tuple[bytes, np.ndarray]:
    """Pack per-symbol codewords MSB-first, flushing every segment to a
    byte boundary.

    ``lens``/``codes`` cover all segments concatenated; ``seg_sizes``
    gives the symbol count per segment.  Returns the payload and an
    array of segment byte offsets (one per segment plus a terminator).
    Empty segments occupy zero bytes.
    """
    seg_sizes = np.asarray(seg_sizes, dtype=np.int64)
    ends = np.cumsum(seg_sizes)
    n = int(ends[-1]) if len(ends) else 0
    if n != len(lens):
        raise ValueError("segment sizes do not cover the value array")
    cum = np.zeros(n + 1, dtype=np.int64)
    cum[1:] = np.cumsum(lens, dtype=np.int64)
    seg_start = ends - seg_sizes
    seg_bits = cum[ends] - cum[seg_start]
    off = np.zeros(len(seg_sizes) + 1, dtype=np.int64)
    off[1:] = np.cumsum((seg_bits + 7) >> 3)
    if n == 0:
        return b"", off
    rel = cum[:-1] - np.repeat(cum[seg_start], seg_sizes)
    gstart = rel + np.repeat(off[:-1] * 8, seg_sizes)
    bits = np.zeros(int(off[-1]) * 8, dtype=np.uint8)
    lens16 = lens.astype(np.int16)
    codes16 = codes.astype(np.uint16)
    for b in range(int(lens.max())):
        m = lens16 > b
        bits[gstart[m] + b] = (codes16[m] >> (lens16[m] - 1 - b)).astype(np.uint8) & 1
    return np.packbits(bits).tobytes(), off


def bit_windows(seg: np.ndarray) -> np.ndarray:
    """15-bit MSB-first window value at every bit position of ``seg``
    (zero-padded past the end)."""
    seg = np.asarray(seg, dtype=np.uint8)
    nbits = len(seg) * 8
    ext = np.zeros(len(seg) + 4, dtype=np.uint8)
    ext[: len(seg)] = seg
    wbyte = (
        (ext[:-2].astype(np.int32) << 16)
        | (ext[1:-1].astype(np.int32) << 8)
        | ext[2:].astype(np.int32)
    )
    win = np.empty(nbits, dtype=np.int32)
    for r in range(8):
        win[r::8] = (wbyte[: len(seg)] >> (9 - r)) & 0x7FFF
    return win


def follow_chains(
    jump: np.ndarray, starts: np.ndarray, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Walk several chains through a jump table.

    ``jump`` must carry a trailing self-mapping sentinel (index = len-1).
    Returns the visited positions of all chains concatenated, plus the
    per-chain boundaries.  Position i of chain c is at
    ``out[bounds[c] + i]``; positions may equal the sentinel when a
    chain runs off the table.

    Two strategies with the same result: jump doubling costs
    O(log(maxcount) * len(jump)), a lockstep walk over all chains costs
    O(maxcount) vector steps of len(chains); the cheaper one is picked
    per call (many short chains -> lockstep, one long chain -> doubling).
    """
    bounds = np.zeros(len(counts) + 1, dtype=np.int64)
    bounds[1:] = np.cumsum(counts)
    total = int(bounds[-1])
    out_pos = np.empty(total, dtype=np.int64)
    nz = counts > 0
    out_pos[bounds[:-1][nz]] = starts[nz]
    maxcount = int(counts.max()) if len(counts) else 0
    if maxcount <= 1:
        return out_pos, bounds

    doubling_cost = max(maxcount.bit_length(), 1) * len(jump)
    lockstep_cost = maxcount * (400 + len(counts))
    if lockstep_cost <= doubling_cost:
        cur = starts.astype(np.int64).copy()
        base = bounds[:-1]
        for j in range(1, maxcount):
            cur = jump[cur]  # finished chains idle on the sentinel
            live = counts > j
            out_pos[base[live] + j] = cur[live]
        return out_pos, bounds

    step = 1
    while step < maxcount:
        jump = jump[jump] if step > 1 else jump
        active = counts > step
        extra = np.minimum(step, counts[active] - step)
        dst = _cat_ranges(bounds[:-1][active] + step, extra)
        out_pos[dst] = jump[out_pos[dst - step]]
        step <<= 1
    return out_pos, bounds


def decode_chains(
    buf: np.ndarray,
    table: HuffmanTable,
    starts,
    counts,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode several independent codeword chains out of one buffer.

    ``starts`` are bit positions, ``counts`` the number of symbols per
    chain.  Returns (values, value boundaries per chain, end bit
    positions per chain).  The heavy lifting (per-bit-position jump
    table plus jump doubling) is shared across all chains, which is what
    makes many small checkpointed windows cheap to decode.
    """
    buf = np.asarray(buf, dtype=np.uint8)
    starts = np.asarray(starts, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    if (counts < 0).any():
        raise ValueError("negative symbol count")
    bounds = np.zeros(len(counts) + 1, dtype=np.int64)
    bounds[1:] = np.cumsum(counts)
    total = int(bounds[-1])
    nbits_buf = len(buf) * 8
    if total == 0:
        return np.zeros(0, dtype=np.uint8), bounds, starts.copy()
    if (starts < 0).any() or (starts > nbits_buf).any():
        raise CorruptArchiveError("stream offset outside payload")

    maxlen = max(table.max_code_len, 1)
    lo_byte = int(starts.min()) >> 3
    hi_bit = int((starts + counts * maxlen).max())
    hi_byte = min(len(buf), ((hi_bit + 7) >> 3) + 1)
    seg = buf[lo_byte:hi_byte]
    nbits = len(seg) * 8
    local = starts - lo_byte * 8

    dsym, dlen = table._decode_tables()
    win = bit_windows(seg)
    len_at = dlen[win]
    nxt = np.minimum(np.arange(nbits, dtype=np.int64) + len_at, nbits)
    nxt[len_at == 0] = nbits  # invalid windows jump to the sentinel
    jump = np.append(nxt, nbits)

    out_pos, _ = follow_chains(jump, local, counts)
    if int(out_pos.max()) >= nbits:
        raise CorruptArchiveError("Huffman stream truncated")
    wpos = win[out_pos]
    syms = dsym[wpos]
    if (syms < 0).any():
        raise CorruptArchiveError("invalid Huffman codeword")

    ends = local.copy()
    nz = counts > 0
    last = bounds[1:][nz] - 1
    ends[nz] = out_pos[last] + dlen[wpos[last]]
    if (ends > nbits).any():
        raise CorruptArchiveError("Huffman stream truncated")
    return syms.astype(np.uint8), bounds, ends + lo_byte * 8


class BitWriter:
    """MSB-first bit sink; flushed regions are plain bytes."""

    def __init__(self):
        self.data = bytearray()
        self.bit_len = 0

    def write_code(self, code: int, length: int) -> None:
        for b in range(length - 1, -1, -1):
            if self.bit_len & 7 == 0:
                self.data.append(0)
            if (code >> b) & 1:
                self.data[-1] |= 0x80 >> (self.bit_len & 7)
            self.bit_len += 1

    def flush_to_byte_boundary(self) -> None:
        self.bit_len = len(self.data) * 8

    def getvalue(self) -> bytes:
        return bytes(self.data)


class BitReader:
    """MSB-first bit source over an immutable byte buffer."""

    def __init__(self, data: bytes, bit_pos: int = 0):
        self.buf = np.frombuffer(bytes(data), dtype=np.uint8)
        self.bit_pos = bit_pos

    @property
    def total_bits(self) -> int:
        return len(self.buf) * 8

    def align_to_byte(self) -> None:
        self.bit_pos = (self.bit_pos + 7) & ~7


def encode_stream(values, table: HuffmanTable, writer: BitWriter) -> int:
    """Append the codewords for ``values`` to ``writer``; returns the bit
    count written.  No terminator is emitted (lengths travel
    externally).  A value whose table length is zero is an error."""
    values = np.asarray(
        np.frombuffer(values, dtype=np.uint8) if isinstance(values, (bytes, bytearray)) else values,
        dtype=np.uint8,
    )
    if len(values) == 0:
        return 0
    lens = table.lengths[values]
    if not lens.all():
        bad = int(values[np.argmin(lens)])
        raise ValueError(f"byte {bad} has no code in this table")
    codes = table.codes[values]
    total_bits = int(lens.astype(np.int64).sum())
    r = writer.bit_len & 7
    bits = np.zeros(r + total_bits, dtype=np.uint8)
    if r:
        last = writer.data[-1]
        for i in range(r):
            bits[i] = (last >> (7 - i)) & 1
    cum = np.cumsum(lens, dtype=np.int64)
    gstart = r + cum - lens
    lens16 = lens.astype(np.int16)
    for b in range(int(lens.max())):
        m = lens16 > b
        bits[gstart[m] + b] = (codes[m] >> (lens16[m] - 1 - b)).astype(np.uint8) & 1
    packed = np.packbits(bits).tobytes()
    if r:
        writer.data[-1] = packed[0]
        writer.data.extend(packed[1:])
    else:
        writer.data.extend(packed)
    writer.bit_len += total_bits
    return total_bits


def decode_stream(reader: BitReader, table: HuffmanTable, count: int) -> np.ndarray:
    """Decode exactly ``count`` symbols from the reader's position;
    raises :class:`CorruptArchiveError` if the bits run out first."""
    values, _, ends = decode_chains(reader.buf, table, [reader.bit_pos], [count])
    reader.bit_pos = int(ends[0])
    return values
