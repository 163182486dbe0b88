"""Serialization of parses into four coded streams with checkpoints.

Streams: match offsets, match lengths, literals (triplet-packed run and
gap symbols), and quaternary factor flags (0 = literal run, else 1 +
gap count).  Offsets are coded as the difference between the match's
(source - reference) delta and the previous match's, biased into one
byte when it fits:

    first byte 0..250  -> delta difference  -125 .. +125
    251                -> difference < -125, 4-byte signed LE follows
    252                -> difference > +125, 4-byte signed LE follows
    253                -> N-run pseudomatch, no further bytes
    254                -> reservoir match, 4-byte unsigned LE absolute
                          reservoir offset follows (no delta coding)

Lengths: first byte b < 255 codes the value b + 1; byte 255 escapes to
a 4-byte unsigned LE full value.  Flags pack four per byte, first flag
in the least significant bit pair.

Six shared order-0 Huffman models cover the streams: offset first
bytes, pooled offset escape bytes, length first bytes, pooled length
escape bytes, literal triplet bytes, flag bytes.

Every stream is flushed to a byte boundary at each checkpoint (one per
``checkpoint_interval`` source symbols); the delta predictor resets
there, a factor belongs to the checkpoint window containing its start,
and each checkpoint records where decoding resumes, so any window
decodes standalone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CorruptArchiveError
from .huffman import HuffmanTable, bit_windows, decode_chains, follow_chains, pack_codes
from .packing import pack_triplets, unpack_triplets
from .parse import LITERAL, MATCH, NRUN, RESERVOIR, Factor, Parse, ParseParams, validate_parse

OFFSET_BIAS = 125
ESC_NEG, ESC_POS, NRUN_MARK, RESERVOIR_MARK = 251, 252, 253, 254
LEN_ESC = 255

# stream indices
OFF, LEN, LIT, FLG = 0, 1, 2, 3

_INT32_MIN, _INT32_MAX = -(1 << 31), (1 << 31) - 1

_FLAG_SHIFTS = np.array([0, 2, 4, 6], dtype=np.uint8)

_IS_OFF_ESC = np.zeros(256, dtype=bool)
_IS_OFF_ESC[[ESC_NEG, ESC_POS, RESERVOIR_MARK]] = True
_IS_LEN_ESC = np.zeros(256, dtype=bool)
_IS_LEN_ESC[LEN_ESC] = True


@dataclass
class RawStreams:
    """Window-segmented raw (pre-entropy) streams of one sequence."""

    length: int
    bytes_: list[np.ndarray]  # raw bytes per stream
    first: list[np.ndarray | None]  # first-byte mask for OFF and LEN
    seg_bytes: list[np.ndarray]  # (W,) raw bytes per window per stream
    sym_counts: list[np.ndarray]  # (W+1,) cumulative checkpoint symbol counts
    start_source: np.ndarray  # (W,) source position where each window resumes

    @property
    def n_windows(self) -> int:
        return len(self.start_source)


@dataclass
class ModelSet:
    """The six shared Huffman models."""

    off0: HuffmanTable
    off_ext: HuffmanTable
    len0: HuffmanTable
    len_ext: HuffmanTable
    lit: HuffmanTable
    flg: HuffmanTable

    def tables(self) -> list[HuffmanTable]:
        return [self.off0, self.off_ext, self.len0, self.len_ext, self.lit, self.flg]

    def serialize(self) -> bytes:
        return b"".join(t.serialize() for t in self.tables())

    @classmethod
    def deserialize(cls, blob: bytes) -> "ModelSet":
        if len(blob) != 6 * 128:
            raise CorruptArchiveError("model block must be 768 bytes")
        return cls(*(HuffmanTable.deserialize(blob[i * 128 : (i + 1) * 128]) for i in range(6)))


@dataclass
class CodedSequence:
    """Huffman-coded payloads of one sequence plus its checkpoint table."""

    length: int
    payloads: list[bytes]  # 4 stream payloads
    start_source: np.ndarray  # (W,)
    sym_counts: list[np.ndarray]  # 4 x (W+1,) cumulative symbols (records for
    # OFF/LEN, packed bytes for LIT, bytes for FLG)
    byte_offs: list[np.ndarray]  # 4 x (W+1,) cumulative coded byte offsets

    @property
    def n_windows(self) -> int:
        return len(self.start_source)

    def checkpoint_for(self, source_pos: int) -> int:
        """Latest window whose decoding resumes at or before source_pos."""
        return int(np.searchsorted(self.start_source, source_pos, side="right")) - 1


def _pack_flags(vals: list[int]) -> np.ndarray:
    if not vals:
        return np.zeros(0, dtype=np.uint8)
    arr = np.zeros(-(-len(vals) // 4) * 4, dtype=np.uint8)
    arr[: len(vals)] = vals
    quad = arr.reshape(-1, 4)
    return (
        quad[:, 0] | (quad[:, 1] << 2) | (quad[:, 2] << 4) | (quad[:, 3] << 6)
    ).astype(np.uint8)


def encode_parse(parse: Parse, params: ParseParams) -> RawStreams:
    """Turn a factor tiling into window-segmented raw streams."""
    validate_parse(parse, params)
    interval = params.checkpoint_interval
    n = parse.source_length
    n_windows = -(-n // interval)

    off_b = bytearray()
    off_f = bytearray()
    len_b = bytearray()
    len_f = bytearray()
    lit_packed: list[np.ndarray] = []
    flg_packed: list[np.ndarray] = []

    start_source: list[int] = [0] if n_windows else []
    seg_bytes = [[] for _ in range(4)]
    cum = [[0] for _ in range(4)]

    win_flags: list[int] = []
    win_lits: list[np.ndarray] = []
    marks = [0, 0]  # off/len raw-byte marks at window start
    recs = [0, 0]  # off/len records in the current window

    def finalize_window() -> None:
        lit = np.concatenate(win_lits) if win_lits else np.zeros(0, dtype=np.uint8)
        packed = pack_triplets(lit)
        lit_packed.append(packed)
        flg = _pack_flags(win_flags)
        flg_packed.append(flg)
        seg_bytes[OFF].append(len(off_b) - marks[OFF])
        seg_bytes[LEN].append(len(len_b) - marks[LEN])
        seg_bytes[LIT].append(len(packed))
        seg_bytes[FLG].append(len(flg))
        cum[OFF].append(cum[OFF][-1] + recs[0])
        cum[LEN].append(cum[LEN][-1] + recs[1])
        cum[LIT].append(cum[LIT][-1] + len(packed))
        cum[FLG].append(cum[FLG][-1] + len(flg))
        marks[0], marks[1] = len(off_b), len(len_b)
        recs[0] = recs[1] = 0
        win_flags.clear()
        win_lits.clear()

    def emit_length(v: int) -> None:
        recs[1] += 1
        if v <= 255:
            len_b.append(v - 1)
            len_f.append(1)
        else:
            if v > 0xFFFFFFFF:
                raise ValueError("length exceeds the 4-byte escape form")
            len_b.append(LEN_ESC)
            len_f.append(1)
            len_b.extend(v.to_bytes(4, "little"))
            len_f.extend(b"\0\0\0\0")

    pos = 0
    cur_w = 0
    pred = 0
    last_match_w = -1
    for f in parse.factors:
        w = pos // interval
        while cur_w < w:
            finalize_window()
            start_source.append(pos)
            cur_w += 1
        if f.kind == LITERAL:
            win_flags.append(0)
            emit_length(f.lengths[0])
            win_lits.append(f.symbols)
        elif f.kind == NRUN:
            win_flags.append(1)
            recs[0] += 1
            off_b.append(NRUN_MARK)
            off_f.append(1)
            emit_length(f.lengths[0])
        else:
            win_flags.append(1 + f.gap_count)
            recs[0] += 1
            if f.kind == RESERVOIR:
                if f.position > 0xFFFFFFFF:
                    raise ValueError("reservoir offset exceeds the 4-byte form")
                off_b.append(RESERVOIR_MARK)
                off_f.append(1)
                off_b.extend(f.position.to_bytes(4, "little"))
                off_f.extend(b"\0\0\0\0")
            else:
                delta = pos - f.position
                d = delta - (pred if w == last_match_w else 0)
                if -125 <= d <= 125:
                    off_b.append(d + OFFSET_BIAS)
                    off_f.append(1)
                else:
                    if not _INT32_MIN <= d <= _INT32_MAX:
                        raise ValueError("offset delta exceeds the 4-byte escape form")
                    off_b.append(ESC_NEG if d < -125 else ESC_POS)
                    off_f.append(1)
                    off_b.extend((d & 0xFFFFFFFF).to_bytes(4, "little"))
                    off_f.extend(b"\0\0\0\0")
                pred = delta
                last_match_w = w
            for L in f.lengths:
                emit_length(L)
            if f.gap_symbols:
                win_lits.append(np.asarray(f.gap_symbols, dtype=np.uint8))
        pos += f.advance

    while cur_w < n_windows:
        finalize_window()
        cur_w += 1
        if cur_w < n_windows:
            start_source.append(n)

    return RawStreams(
        length=n,
        bytes_=[
            np.frombuffer(bytes(off_b), dtype=np.uint8),
            np.frombuffer(bytes(len_b), dtype=np.uint8),
            np.concatenate(lit_packed) if lit_packed else np.zeros(0, dtype=np.uint8),
            np.concatenate(flg_packed) if flg_packed else np.zeros(0, dtype=np.uint8),
        ],
        first=[
            np.frombuffer(bytes(off_f), dtype=np.uint8).astype(bool),
            np.frombuffer(bytes(len_f), dtype=np.uint8).astype(bool),
            None,
            None,
        ],
        seg_bytes=[np.asarray(s, dtype=np.int64) for s in seg_bytes],
        sym_counts=[np.asarray(c, dtype=np.int64) for c in cum],
        start_source=np.asarray(start_source, dtype=np.int64),
    )


def stream_tallies(raw: RawStreams, counts: np.ndarray | None = None) -> np.ndarray:
    """Accumulate (6, 256) byte frequencies for the shared models."""
    if counts is None:
        counts = np.zeros((6, 256), dtype=np.int64)
    ob, lb = raw.bytes_[OFF], raw.bytes_[LEN]
    of, lf = raw.first[OFF], raw.first[LEN]
    counts[0] += np.bincount(ob[of], minlength=256)
    counts[1] += np.bincount(ob[~of], minlength=256)
    counts[2] += np.bincount(lb[lf], minlength=256)
    counts[3] += np.bincount(lb[~lf], minlength=256)
    counts[4] += np.bincount(raw.bytes_[LIT], minlength=256)
    counts[5] += np.bincount(raw.bytes_[FLG], minlength=256)
    return counts


def build_models(raws: list[RawStreams]) -> ModelSet:
    """One shared model set from every sequence's raw streams."""
    if not raws:
        raise ValueError("cannot build models from an empty collection")
    counts = np.zeros((6, 256), dtype=np.int64)
    for raw in raws:
        stream_tallies(raw, counts)
    tables = []
    for row in counts:
        if not row.any():
            row = row.copy()
            row[0] = 1  # placeholder so empty streams still get a valid table
        tables.append(HuffmanTable.from_counts(row))
    return ModelSet(*tables)


def _mixed_lens_codes(bytes_: np.ndarray, first: np.ndarray, t0: HuffmanTable, t1: HuffmanTable):
    lens = np.where(first, t0.lengths[bytes_], t1.lengths[bytes_])
    if not lens.all():
        raise ValueError("stream byte missing from its model")
    codes = np.where(first, t0.codes[bytes_], t1.codes[bytes_])
    return lens, codes


def compress_streams(raw: RawStreams, models: ModelSet) -> CodedSequence:
    """Huffman-code the raw streams, flushing at every checkpoint."""
    payloads: list[bytes] = []
    byte_offs: list[np.ndarray] = []
    plans = [
        _mixed_lens_codes(raw.bytes_[OFF], raw.first[OFF], models.off0, models.off_ext),
        _mixed_lens_codes(raw.bytes_[LEN], raw.first[LEN], models.len0, models.len_ext),
        (models.lit.lengths[raw.bytes_[LIT]], models.lit.codes[raw.bytes_[LIT]]),
        (models.flg.lengths[raw.bytes_[FLG]], models.flg.codes[raw.bytes_[FLG]]),
    ]
    if not plans[2][0].all() or not plans[3][0].all():
        raise ValueError("stream byte missing from its model")
    for s, (lens, codes) in enumerate(plans):
        payload, off = pack_codes(lens, codes, raw.seg_bytes[s])
        payloads.append(payload)
        byte_offs.append(off)
    return CodedSequence(
        length=raw.length,
        payloads=payloads,
        start_source=raw.start_source,
        sym_counts=raw.sym_counts,
        byte_offs=byte_offs,
    )


def _decode_record_stream(
    payload: bytes,
    t0: HuffmanTable,
    t_ext: HuffmanTable,
    esc_mask: np.ndarray,
    starts_bits: np.ndarray,
    counts: np.ndarray,
):
    """Decode interleaved first/escape records along windows.

    Returns (first bytes, escape payload values as int64 raw u32, record
    boundaries per window).  Escape values are 0 for non-escape records.
    """
    starts_bits = np.asarray(starts_bits, dtype=np.int64)
    counts = np.asarray(counts, dtype=np.int64)
    bounds = np.zeros(len(counts) + 1, dtype=np.int64)
    bounds[1:] = np.cumsum(counts)
    total = int(bounds[-1])
    if total == 0:
        return (
            np.zeros(0, dtype=np.uint8),
            np.zeros(0, dtype=np.int64),
            bounds,
        )
    buf = np.frombuffer(payload, dtype=np.uint8)
    nbits_buf = len(buf) * 8
    if (starts_bits < 0).any() or (starts_bits > nbits_buf).any():
        raise CorruptArchiveError("record stream offset outside payload")
    rec_max_bits = t0.max_code_len + 4 * t_ext.max_code_len
    lo_byte = int(starts_bits.min()) >> 3
    hi_bit = int((starts_bits + counts * rec_max_bits).max())
    hi_byte = min(len(buf), ((hi_bit + 7) >> 3) + 1)
    seg = buf[lo_byte:hi_byte]
    nbits = len(seg) * 8
    local = starts_bits - lo_byte * 8

    win = bit_windows(seg)
    s0, l0 = t0._decode_tables()
    se, le = t_ext._decode_tables()
    val0 = s0[win]
    pos = np.arange(nbits, dtype=np.int64)
    l0w = l0[win]
    next0 = np.minimum(pos + l0w, nbits)
    next0[l0w == 0] = nbits
    lew = le[win]
    next_e = np.minimum(pos + lew, nbits)
    next_e[lew == 0] = nbits
    e1 = np.append(next_e, nbits)
    e2 = e1[e1]
    e4 = e2[e2]
    is_esc = np.zeros(nbits, dtype=bool)
    ok0 = val0 >= 0
    is_esc[ok0] = esc_mask[val0[ok0]]
    rec_next = np.append(np.where(is_esc, e4[next0], next0), nbits)

    rec_pos, _ = follow_chains(rec_next, local, counts)
    if int(rec_pos.max()) >= nbits:
        raise CorruptArchiveError("record stream truncated")
    firsts = val0[rec_pos]
    if (firsts < 0).any():
        raise CorruptArchiveError("invalid codeword in record stream")
    ext_vals = np.zeros(total, dtype=np.int64)
    esc_at = np.flatnonzero(is_esc[rec_pos])
    if len(esc_at):
        q = np.append(next0, nbits)[rec_pos[esc_at]]
        raw = np.zeros(len(esc_at), dtype=np.int64)
        for i in range(4):
            if int(q.max()) >= nbits:
                raise CorruptArchiveError("record stream truncated")
            b = se[win[q]]
            if (b < 0).any():
                raise CorruptArchiveError("invalid codeword in record escape")
            raw |= b.astype(np.int64) << (8 * i)
            q = e1[q]
        ext_vals[esc_at] = raw
    return firsts.astype(np.uint8), ext_vals, bounds


def _u32_to_i32(v: np.ndarray | int):
    return np.where(v > _INT32_MAX, v - (1 << 32), v) if isinstance(v, np.ndarray) else (
        v - (1 << 32) if v > _INT32_MAX else v
    )


class SequenceDecoder:
    """Window-addressed decoding of one sequence's coded streams.

    ``prefetch_all`` decodes every window in four batched passes (the
    full-decompression path); otherwise windows decode lazily on first
    access (the random-access path).
    """

    def __init__(self, coded: CodedSequence, models: ModelSet, params: ParseParams):
        self.coded = coded
        self.models = models
        self.interval = params.checkpoint_interval
        self._bufs = [np.frombuffer(p, dtype=np.uint8) for p in coded.payloads]
        self._cache: dict[int, tuple] = {}
        self.last_touched: set[int] = set()

    def prefetch_all(self) -> None:
        c = self.coded
        W = c.n_windows
        if W == 0:
            return
        windows = np.arange(W)
        parts = self._decode_windows(windows)
        for w in range(W):
            self._cache[w] = tuple(p[w] for p in parts)

    def _decode_windows(self, windows: np.ndarray):
        c, m = self.coded, self.models
        sym = c.sym_counts
        offs = c.byte_offs

        def seg_counts(s):
            return sym[s][windows + 1] - sym[s][windows]

        f0, fe, fb = _decode_record_stream(
            c.payloads[OFF], m.off0, m.off_ext, _IS_OFF_ESC,
            offs[OFF][windows] * 8, seg_counts(OFF),
        )
        l0, le_, lb = _decode_record_stream(
            c.payloads[LEN], m.len0, m.len_ext, _IS_LEN_ESC,
            offs[LEN][windows] * 8, seg_counts(LEN),
        )
        len_vals = np.where(l0 == LEN_ESC, le_, l0.astype(np.int64) + 1)

        lit_bytes, litb, _ = decode_chains(
            self._bufs[LIT], m.lit, offs[LIT][windows] * 8, seg_counts(LIT)
        )
        flg_bytes, flgb, _ = decode_chains(
            self._bufs[FLG], m.flg, offs[FLG][windows] * 8, seg_counts(FLG)
        )
        lits = (
            unpack_triplets(lit_bytes, len(lit_bytes) * 3)
            if len(lit_bytes)
            else np.zeros(0, np.uint8)
        )
        flags = (flg_bytes[:, None] >> _FLAG_SHIFTS[None, :]).reshape(-1) & 3

        out_f, out_o, out_e, out_l, out_lit = [], [], [], [], []
        for i in range(len(windows)):
            out_f.append(flags[flgb[i] * 4 : flgb[i + 1] * 4])
            out_o.append(f0[fb[i] : fb[i + 1]])
            out_e.append(fe[fb[i] : fb[i + 1]])
            out_l.append(len_vals[lb[i] : lb[i + 1]])
            out_lit.append(lits[litb[i] * 3 : litb[i + 1] * 3])
        return out_f, out_o, out_e, out_l, out_lit

    def window(self, w: int):
        self.last_touched.add(w)
        if w not in self._cache:
            parts = self._decode_windows(np.array([w]))
            self._cache[w] = tuple(p[0] for p in parts)
        return self._cache[w]

    def touched_payload_bytes(self) -> int:
        """Coded bytes of the windows the last factors_from call used."""
        c = self.coded
        return int(
            sum(
                c.byte_offs[s][w + 1] - c.byte_offs[s][w]
                for w in self.last_touched
                for s in range(4)
            )
        )

    def factors_from(self, window: int, until: int) -> tuple[list[Factor], int]:
        """Decode factors from a checkpoint until coverage reaches
        ``until`` (or the sequence ends).  Returns (factors, source
        position of the first factor)."""
        c = self.coded
        self.last_touched = set()
        if c.n_windows == 0:
            return [], 0
        start = int(c.start_source[window])
        covered = start
        factors: list[Factor] = []
        cursors: dict[int, list[int]] = {}
        pred = 0
        last_match_w = -1
        while covered < until and covered < c.length:
            w = covered // self.interval
            flags, o_first, o_ext, l_vals, lits = self.window(w)
            cur = cursors.setdefault(w, [0, 0, 0, 0])
            fi, oi, li, ci = cur
            if fi >= len(flags):
                raise CorruptArchiveError("flag stream exhausted mid-window")
            flag = int(flags[fi])
            fi += 1
            if flag == 0:
                if li >= len(l_vals):
                    raise CorruptArchiveError("length stream exhausted")
                L = int(l_vals[li])
                li += 1
                if ci + L > len(lits):
                    raise CorruptArchiveError("literal stream exhausted")
                factors.append(
                    Factor(LITERAL, lengths=(L,), symbols=lits[ci : ci + L])
                )
                ci += L
                covered += L
            else:
                if oi >= len(o_first):
                    raise CorruptArchiveError("offset stream exhausted")
                first = int(o_first[oi])
                ext = int(o_ext[oi])
                oi += 1
                if li + flag > len(l_vals):
                    raise CorruptArchiveError("length stream exhausted")
                pieces = tuple(int(v) for v in l_vals[li : li + flag])
                li += flag
                if first == NRUN_MARK:
                    if flag != 1:
                        raise CorruptArchiveError("N-run with a gapped flag")
                    factors.append(Factor(NRUN, lengths=pieces))
                    covered += pieces[0]
                else:
                    gaps = tuple(int(v) for v in lits[ci : ci + flag - 1])
                    if len(gaps) != flag - 1:
                        raise CorruptArchiveError("literal stream exhausted")
                    ci += flag - 1
                    if first == RESERVOIR_MARK:
                        factors.append(
                            Factor(RESERVOIR, position=ext, lengths=pieces, gap_symbols=gaps)
                        )
                    else:
                        if first <= 250:
                            d = first - OFFSET_BIAS
                        elif first == ESC_NEG or first == ESC_POS:
                            d = int(_u32_to_i32(ext))
                            if (first == ESC_NEG and d >= -125) or (
                                first == ESC_POS and d <= 125
                            ):
                                raise CorruptArchiveError("offset escape out of its range")
                        else:
                            raise CorruptArchiveError(f"invalid offset first byte {first}")
                        delta = d + (pred if w == last_match_w else 0)
                        factors.append(
                            Factor(
                                MATCH,
                                position=covered - delta,
                                lengths=pieces,
                                gap_symbols=gaps,
                            )
                        )
                        pred = delta
                        last_match_w = w
                    covered += sum(pieces) + flag - 1
            cur[0], cur[1], cur[2], cur[3] = fi, oi, li, ci
        return factors, start


def decode_window(
    coded: CodedSequence,
    models: ModelSet,
    params: ParseParams,
    window: int,
    until_source_pos: int,
) -> tuple[list[Factor], int]:
    """Decode factors from checkpoint ``window`` until coverage reaches
    ``until_source_pos`` (see :meth:`SequenceDecoder.factors_from`)."""
    dec = SequenceDecoder(coded, models, params)
    return dec.factors_from(window, until_source_pos)
