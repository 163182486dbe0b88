"""The archive container and the top-level algorithms.

File layout (all integers little-endian, varints are unsigned LEB128):

    magic "RLZG" | version u8 | flags u8 (bit 0: per-record matching)
    section count varint, then per section: id varint, length varint, body

Sections: 1 params, 2 sequence table, 3 Huffman tables (reference table
plus the six stream models, 896 bytes), 4 reservoir provenance,
5 reference payloads, 6 stream payloads, 7 checksum (blake2b-64 of
sections 5 and 6).  Readers skip unknown section ids, so the format can
grow trailing sections without breaking old readers.

The archive is self-describing: decompression and extraction need no
side information.  Reservoir content is never stored twice; a reservoir
match resolves through the provenance table to a literal run of its
origin sequence (recursion depth exactly 1).
"""
from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import CorruptArchiveError, UnsupportedVersionError
from .genome import Collection, Sequence
from .huffman import HuffmanTable
from .kmer import KmerIndex
from .parse import (
    LITERAL,
    MATCH,
    NRUN,
    RESERVOIR,
    Factor,
    ParseParams,
    apply_factor,
    parse_sequence,
)
from .refstore import (
    RefBlocks,
    ReservoirProvenance,
    append_reservoir_phrase,
    decode_reference_range,
    encode_reference,
    packed_block_counts,
    range_payload_bytes,
)
from .streams import (
    CodedSequence,
    ModelSet,
    SequenceDecoder,
    build_models,
    compress_streams,
    encode_parse,
)

MAGIC = b"RLZG"
VERSION = 1

_SEC_PARAMS = 1
_SEC_SEQTABLE = 2
_SEC_MODELS = 3
_SEC_PROVENANCE = 4
_SEC_REFPAYLOAD = 5
_SEC_STREAMPAYLOAD = 6
_SEC_CHECKSUM = 7

ROLE_REFERENCE = 0
ROLE_MEMBER = 1


def _write_varint(buf: bytearray, v: int) -> None:
    if v < 0:
        raise ValueError("varints are unsigned")
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            buf.append(b | 0x80)
        else:
            buf.append(b)
            return


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def varint(self) -> int:
        shift = 0
        out = 0
        while True:
            if self.pos >= len(self.data):
                raise CorruptArchiveError("truncated archive")
            b = self.data[self.pos]
            self.pos += 1
            out |= (b & 0x7F) << shift
            if not b & 0x80:
                return out
            shift += 7
            if shift > 63:
                raise CorruptArchiveError("varint overflow")

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptArchiveError("truncated archive")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]


def _write_str(buf: bytearray, s: str) -> None:
    raw = s.encode("utf-8")
    _write_varint(buf, len(raw))
    buf.extend(raw)


def _read_str(r: _Reader) -> str:
    n = r.varint()
    try:
        return r.take(n).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptArchiveError("undecodable name in sequence table") from exc


def _write_deltas(buf: bytearray, arr: np.ndarray) -> None:
    prev = 0
    for v in arr.tolist():
        _write_varint(buf, v - prev)
        prev = v


def _read_deltas(r: _Reader, n: int, start: int = 0) -> np.ndarray:
    out = np.empty(n, dtype=np.int64)
    prev = start
    for i in range(n):
        prev += r.varint()
        out[i] = prev
    return out


@dataclass
class Group:
    """One matching universe: a reference record and its members."""

    reference: int | None
    members: list[int] = field(default_factory=list)


def matching_groups(collection: Collection) -> list[Group]:
    """Partition the collection into matching universes.

    Whole-sequence mode yields one group.  Per-record mode pairs every
    record with its counterpart in the reference file, by record name
    first, by ordinal within its file second; records with no
    counterpart share one reference-less group.
    """
    if collection.granularity == "whole":
        ref = collection.reference_index
        members = [i for i in range(len(collection.sequences)) if i != ref]
        return [Group(ref, members)]
    seqs = collection.sequences
    ref_tag = seqs[collection.reference_index].file_tag
    ref_records = [i for i, s in enumerate(seqs) if s.file_tag == ref_tag]
    by_name: dict[str, int] = {}
    for gi, i in enumerate(ref_records):
        by_name.setdefault(seqs[i].record_name, gi)
    groups = [Group(i) for i in ref_records]
    orphan: Group | None = None
    ordinal: dict[str, int] = {}
    for i, s in enumerate(seqs):
        if s.file_tag == ref_tag:
            continue
        j = ordinal.get(s.file_tag, 0)
        ordinal[s.file_tag] = j + 1
        gi = by_name.get(s.record_name)
        if gi is None and j < len(ref_records):
            gi = j
        if gi is None:
            if orphan is None:
                orphan = Group(None)
            orphan.members.append(i)
        else:
            groups[gi].members.append(i)
    if orphan is not None:
        groups.append(orphan)
    return groups


def n_free_window_count(data: np.ndarray, m1: int) -> int:
    """Number of length-m1 windows containing no N."""
    from .genome import N

    data = np.asarray(data, dtype=np.uint8)
    m = len(data) - m1 + 1
    if m <= 0:
        return 0
    csum = np.zeros(len(data) + 1, dtype=np.int64)
    np.cumsum(data == N, out=csum[1:])
    return int(((csum[m1:] - csum[:-m1]) == 0).sum())


def select_reference(collection: Collection, m1: int = 13) -> int:
    """Index of the sequence with the most N-free m1-windows (advisory;
    compress takes whatever reference_index says)."""
    counts = [n_free_window_count(s.data, m1) for s in collection.sequences]
    return int(np.argmax(counts))


@dataclass
class SequenceEntry:
    name: str
    record_name: str
    file_tag: str
    length: int
    role: int
    group: int
    refblocks: RefBlocks | None = None
    coded: CodedSequence | None = None
    meta_bytes: int = 0  # serialized sequence-table entry size


class _GrowBuf:
    """Append-only uint8 buffer with amortized growth."""

    def __init__(self):
        self.arr = np.empty(1024, dtype=np.uint8)
        self.n = 0

    def append(self, data: np.ndarray) -> None:
        need = self.n + len(data)
        if need > len(self.arr):
            cap = max(len(self.arr) * 2, need)
            arr = np.empty(cap, dtype=np.uint8)
            arr[: self.n] = self.arr[: self.n]
            self.arr = arr
        self.arr[self.n : need] = data
        self.n = need

    def view(self) -> np.ndarray:
        return self.arr[: self.n]


class Archive:
    """A compressed collection with random-access extraction."""

    def __init__(
        self,
        params: ParseParams,
        granularity: str,
        reference_index: int,
        entries: list[SequenceEntry],
        groups: list[Group],
        ref_table: HuffmanTable,
        models: ModelSet,
        provenances: list[ReservoirProvenance],
    ):
        self.params = params
        self.granularity = granularity
        self.reference_index = reference_index
        self.entries = entries
        self.groups = groups
        self.ref_table = ref_table
        self.models = models
        self.provenances = provenances
        self.section_sizes: dict[int, int] = {}
        self.total_bytes = 0
        self._by_name = {e.name: i for i, e in enumerate(entries)}
        self._decoders: dict[int, SequenceDecoder] = {}
        self._ref_block_cache: dict[tuple[int, int], np.ndarray] = {}
        self._bytes_read = 0

    # ------------------------------------------------------------------
    # serialization

    def to_bytes(self) -> bytes:
        ref_payload = bytearray()
        stream_payload = bytearray()
        seqtable = bytearray()
        _write_varint(seqtable, len(self.entries))
        _write_varint(seqtable, self.reference_index)
        _write_varint(seqtable, len(self.groups))
        for g in self.groups:
            _write_varint(seqtable, 0 if g.reference is None else g.reference + 1)
        for e in self.entries:
            mark = len(seqtable)
            _write_str(seqtable, e.name)
            _write_str(seqtable, e.record_name)
            _write_str(seqtable, e.file_tag)
            _write_varint(seqtable, e.length)
            seqtable.append(e.role)
            _write_varint(seqtable, e.group)
            if e.role == ROLE_REFERENCE:
                rb = e.refblocks
                _write_varint(seqtable, len(ref_payload))
                _write_varint(seqtable, rb.n_blocks)
                # block index: u64 LE start offsets, one per block + terminator
                seqtable.extend(np.asarray(rb.offsets, dtype="<u8").tobytes())
                ref_payload.extend(rb.payload)
            else:
                c = e.coded
                for s in range(4):
                    _write_varint(seqtable, len(c.payloads[s]))
                _write_deltas(seqtable, np.asarray(c.start_source))
                for s in range(4):
                    _write_deltas(seqtable, c.sym_counts[s][1:])
                    _write_deltas(seqtable, c.byte_offs[s][1:])
                for s in range(4):
                    stream_payload.extend(c.payloads[s])
            e.meta_bytes = len(seqtable) - mark

        prov = bytearray()
        for p in self.provenances:
            _write_varint(prov, len(p.entries))
            for seq_index, position, length in p.entries:
                _write_varint(prov, seq_index)
                _write_varint(prov, position)
                _write_varint(prov, length)

        models = self.ref_table.serialize() + self.models.serialize()
        checksum = hashlib.blake2b(
            bytes(ref_payload) + bytes(stream_payload), digest_size=8
        ).digest()

        params = self.params
        params_body = struct.pack(
            "<HHIBIIIII",
            params.m1,
            params.m2,
            params.m3,
            params.gap_limit,
            params.cheap_offset_bound,
            params.length_slack,
            params.candidate_cap,
            params.checkpoint_interval,
            8192,  # reference block size
        )

        sections = [
            (_SEC_PARAMS, params_body),
            (_SEC_CHECKSUM, checksum),
            (_SEC_MODELS, models),
            (_SEC_SEQTABLE, bytes(seqtable)),
            (_SEC_PROVENANCE, bytes(prov)),
            (_SEC_REFPAYLOAD, bytes(ref_payload)),
            (_SEC_STREAMPAYLOAD, bytes(stream_payload)),
        ]
        out = bytearray()
        out.extend(MAGIC)
        out.append(VERSION)
        out.append(1 if self.granularity == "record" else 0)
        _write_varint(out, len(sections))
        for sec_id, body in sections:
            _write_varint(out, sec_id)
            _write_varint(out, len(body))
            out.extend(body)
            self.section_sizes[sec_id] = len(body)
        self.total_bytes = len(out)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Archive":
        if len(data) < 6 or data[:4] != MAGIC:
            raise CorruptArchiveError("not an archive (bad magic)")
        if data[4] != VERSION:
            raise UnsupportedVersionError(f"unsupported archive version {data[4]}")
        granularity = "record" if data[5] & 1 else "whole"
        r = _Reader(data)
        r.pos = 6
        sections: dict[int, bytes] = {}
        for _ in range(r.varint()):
            sec_id = r.varint()
            body = r.take(r.varint())
            sections.setdefault(sec_id, body)
        for required in (
            _SEC_PARAMS,
            _SEC_SEQTABLE,
            _SEC_MODELS,
            _SEC_PROVENANCE,
            _SEC_REFPAYLOAD,
            _SEC_STREAMPAYLOAD,
            _SEC_CHECKSUM,
        ):
            if required not in sections:
                raise CorruptArchiveError(f"missing archive section {required}")

        digest = hashlib.blake2b(
            sections[_SEC_REFPAYLOAD] + sections[_SEC_STREAMPAYLOAD], digest_size=8
        ).digest()
        if digest != sections[_SEC_CHECKSUM]:
            raise CorruptArchiveError("payload checksum mismatch")

        body = sections[_SEC_PARAMS]
        if len(body) != struct.calcsize("<HHIBIIIII"):
            raise CorruptArchiveError("malformed params section")
        m1, m2, m3, gap, cheap, slack, cap, interval, block_size = struct.unpack(
            "<HHIBIIIII", body
        )
        params = ParseParams(m1, m2, m3, gap, cheap, slack, cap, interval)
        try:
            params.validate()
        except ValueError as exc:
            raise CorruptArchiveError(f"invalid stored parameters: {exc}") from exc

        blob = sections[_SEC_MODELS]
        if len(blob) != 7 * 128:
            raise CorruptArchiveError("malformed model section")
        ref_table = HuffmanTable.deserialize(blob[:128])
        models = ModelSet.deserialize(blob[128:])

        t = _Reader(sections[_SEC_SEQTABLE])
        n_seq = t.varint()
        reference_index = t.varint()
        n_groups = t.varint()
        groups = []
        for _ in range(n_groups):
            raw = t.varint()
            groups.append(Group(raw - 1 if raw else None))
        ref_payload = sections[_SEC_REFPAYLOAD]
        stream_payload = sections[_SEC_STREAMPAYLOAD]
        stream_pos = 0
        entries: list[SequenceEntry] = []
        for _ in range(n_seq):
            mark = t.pos
            name = _read_str(t)
            record_name = _read_str(t)
            file_tag = _read_str(t)
            length = t.varint()
            role = t.u8()
            group = t.varint()
            if group >= n_groups:
                raise CorruptArchiveError("sequence points at a missing group")
            entry = SequenceEntry(name, record_name, file_tag, length, role, group)
            if role == ROLE_REFERENCE:
                base = t.varint()
                n_blocks = t.varint()
                if n_blocks != -(-length // block_size):
                    raise CorruptArchiveError("block count does not match length")
                raw = t.take((n_blocks + 1) * 8)
                offsets = np.frombuffer(raw, dtype="<u8").astype(np.int64)
                if (np.diff(offsets) < 0).any() or offsets[0] != 0:
                    raise CorruptArchiveError("block index offsets not non-decreasing")
                payload_len = int(offsets[-1])
                if base + payload_len > len(ref_payload):
                    raise CorruptArchiveError("reference payload out of bounds")
                entry.refblocks = RefBlocks(
                    length,
                    offsets,
                    ref_payload[base : base + payload_len],
                    ref_table,
                    block_size,
                )
            elif role == ROLE_MEMBER:
                plens = [t.varint() for _ in range(4)]
                n_windows = -(-length // interval)
                start_source = _read_deltas(t, n_windows)
                sym_counts = []
                byte_offs = []
                for s in range(4):
                    sym = np.zeros(n_windows + 1, dtype=np.int64)
                    sym[1:] = _read_deltas(t, n_windows)
                    off = np.zeros(n_windows + 1, dtype=np.int64)
                    off[1:] = _read_deltas(t, n_windows)
                    if off[-1] != plens[s]:
                        raise CorruptArchiveError("checkpoint offsets disagree with payload size")
                    sym_counts.append(sym)
                    byte_offs.append(off)
                payloads = []
                for s in range(4):
                    if stream_pos + plens[s] > len(stream_payload):
                        raise CorruptArchiveError("stream payload out of bounds")
                    payloads.append(stream_payload[stream_pos : stream_pos + plens[s]])
                    stream_pos += plens[s]
                entry.coded = CodedSequence(
                    length, payloads, start_source, sym_counts, byte_offs
                )
            else:
                raise CorruptArchiveError(f"unknown sequence role {role}")
            entry.meta_bytes = t.pos - mark
            entries.append(entry)
        if not entries:
            raise CorruptArchiveError("archive holds no sequences")
        if not 0 <= reference_index < len(entries):
            raise CorruptArchiveError("reference index out of range")

        p = _Reader(sections[_SEC_PROVENANCE])
        provenances = []
        for _ in range(n_groups):
            prov = ReservoirProvenance()
            for _ in range(p.varint()):
                seq_index = p.varint()
                position = p.varint()
                plen = p.varint()
                if seq_index >= n_seq:
                    raise CorruptArchiveError("provenance points at a missing sequence")
                prov.entries.append((seq_index, position, plen))
                prov.starts.append(prov.starts[-1] + plen)
            provenances.append(prov)
        for g, grp in enumerate(groups):
            grp.members = [
                i for i, e in enumerate(entries) if e.group == g and e.role == ROLE_MEMBER
            ]

        arc = cls(
            params,
            granularity,
            reference_index,
            entries,
            groups,
            ref_table,
            models,
            provenances,
        )
        for sec_id, body in sections.items():
            arc.section_sizes[sec_id] = len(body)
        arc.total_bytes = len(data)
        return arc

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "Archive":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())

    # ------------------------------------------------------------------
    # decoding

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def _group_ref_blocks(self, group: int) -> RefBlocks | None:
        ref = self.groups[group].reference
        return None if ref is None else self.entries[ref].refblocks

    def _reference_symbols(self, group: int) -> np.ndarray:
        rb = self._group_ref_blocks(group)
        if rb is None:
            return np.zeros(0, dtype=np.uint8)
        return decode_reference_range(rb, 0, rb.n_symbols)

    def _decoder(self, i: int) -> SequenceDecoder:
        dec = self._decoders.get(i)
        if dec is None:
            dec = SequenceDecoder(self.entries[i].coded, self.models, self.params)
            self._decoders[i] = dec
        return dec

    def _member_factors(self, i: int) -> list[Factor]:
        e = self.entries[i]
        dec = SequenceDecoder(e.coded, self.models, self.params)
        dec.prefetch_all()
        factors, _ = dec.factors_from(0, e.length)
        return factors

    def iter_factors(self, name: str):
        """Yield (source_start, factor) for one member sequence (debug
        and test instrumentation)."""
        i = self._lookup_name(name)
        if self.entries[i].role != ROLE_MEMBER:
            raise ValueError(f"{name!r} is a reference record")
        pos = 0
        for f in self._member_factors(i):
            yield pos, f
            pos += f.advance

    def decompress(self, threads: int = 1) -> Collection:
        """Reconstruct the exact original collection."""
        out: list[Sequence | None] = [None] * len(self.entries)
        ref_symbols: dict[int, np.ndarray] = {}
        for g in range(len(self.groups)):
            ref_symbols[g] = self._reference_symbols(g)
        for i, e in enumerate(self.entries):
            if e.role == ROLE_REFERENCE:
                out[i] = Sequence(e.name, ref_symbols[e.group], e.record_name, e.file_tag)

        members = [i for i, e in enumerate(self.entries) if e.role == ROLE_MEMBER]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                datas = list(
                    pool.map(lambda i: self._decode_member_independent(i, ref_symbols), members)
                )
            for i, data in zip(members, datas):
                e = self.entries[i]
                out[i] = Sequence(e.name, data, e.record_name, e.file_tag)
        else:
            reservoirs = [_GrowBuf() for _ in self.groups]
            for i in members:
                e = self.entries[i]
                res = reservoirs[e.group]
                buf = np.empty(e.length, dtype=np.uint8)
                c = 0
                ref = ref_symbols[e.group]
                for f in self._member_factors(i):
                    c = apply_factor(buf, c, f, ref, res.view())
                    if f.kind == LITERAL and f.lengths[0] >= self.params.m3:
                        res.append(f.symbols)
                if c != e.length:
                    raise CorruptArchiveError("decoded factors do not tile the sequence")
                out[i] = Sequence(e.name, buf, e.record_name, e.file_tag)
        return Collection(out, self.reference_index, self.granularity)

    def _decode_member_independent(self, i: int, ref_symbols) -> np.ndarray:
        """Decode one member without shared reservoir state (reservoir
        matches resolve through provenance, depth 1)."""
        e = self.entries[i]
        buf = np.empty(e.length, dtype=np.uint8)
        c = 0
        ref = ref_symbols[e.group]
        prov = self.provenances[e.group]
        for f in self._member_factors(i):
            if f.kind == RESERVOIR:
                span = f.advance
                piece = self._materialize_reservoir(e.group, prov, f.position, span)
                f = Factor(RESERVOIR, 0, f.lengths, f.gap_symbols)
                c = apply_factor(buf, c, f, ref, piece)
            else:
                c = apply_factor(buf, c, f, ref, None)
        if c != e.length:
            raise CorruptArchiveError("decoded factors do not tile the sequence")
        return buf

    def _materialize_reservoir(
        self, group: int, prov: ReservoirProvenance, offset: int, length: int, depth: int = 0
    ) -> np.ndarray:
        from .refstore import resolve_reservoir_range

        pieces = resolve_reservoir_range(prov, offset, length)
        parts = [
            self._extract_range(seq_index, pos, pos + plen, depth + 1)
            for seq_index, pos, plen in pieces
        ]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)

    # ------------------------------------------------------------------
    # random access

    def _lookup_name(self, name: str) -> int:
        i = self._by_name.get(name)
        if i is None:
            raise KeyError(f"no sequence named {name!r} in this archive")
        return i

    def extract(self, name: str, start: int, end: int) -> np.ndarray:
        """Symbols [start, end) of one sequence, decoding only the
        covering checkpoint windows, referenced reference blocks, and
        depth-1 reservoir origins."""
        symbols, _ = self.extract_report(name, start, end)
        return symbols

    def extract_report(self, name: str, start: int, end: int) -> tuple[np.ndarray, int]:
        """extract() plus the number of coded payload bytes the range
        touches (cache-independent access-cost metric)."""
        i = self._lookup_name(name)
        e = self.entries[i]
        if not 0 <= start <= end <= e.length:
            raise ValueError(f"range [{start}, {end}) outside sequence of {e.length}")
        before = self._bytes_read
        out = self._extract_range(i, start, end, 0)
        return out, self._bytes_read - before

    def _ref_range(self, group: int, start: int, end: int) -> np.ndarray:
        """Reference symbols via the per-block decode cache."""
        rb = self._group_ref_blocks(group)
        if rb is None:
            raise CorruptArchiveError("match against a missing reference")
        if not 0 <= start <= end <= rb.n_symbols:
            raise CorruptArchiveError("match points outside the reference")
        if start == end:
            return np.zeros(0, dtype=np.uint8)
        self._bytes_read += range_payload_bytes(rb, start, end)
        bs = rb.block_size
        b0, b1 = start // bs, -(-end // bs)
        ref_idx = self.groups[group].reference
        parts = []
        for b in range(b0, b1):
            key = (ref_idx, b)
            blk = self._ref_block_cache.get(key)
            if blk is None:
                lo = b * bs
                hi = min(lo + bs, rb.n_symbols)
                blk = decode_reference_range(rb, lo, hi)
                self._ref_block_cache[key] = blk
            parts.append(blk)
        whole = np.concatenate(parts) if len(parts) > 1 else parts[0]
        lo = start - b0 * bs
        return whole[lo : lo + (end - start)]

    def _extract_range(self, i: int, start: int, end: int, depth: int) -> np.ndarray:
        if depth > 1:
            raise CorruptArchiveError("reservoir resolution exceeded depth 1")
        e = self.entries[i]
        if start == end:
            return np.zeros(0, dtype=np.uint8)
        if e.role == ROLE_REFERENCE:
            self._bytes_read += range_payload_bytes(e.refblocks, start, end)
            return decode_reference_range(e.refblocks, start, end)

        dec = self._decoder(i)
        w = e.coded.checkpoint_for(start)
        factors, fstart = dec.factors_from(w, end)
        self._bytes_read += dec.touched_payload_bytes()
        out = np.empty(end - start, dtype=np.uint8)
        pos = fstart
        prov = self.provenances[e.group]
        for f in factors:
            adv = f.advance
            lo = max(pos, start)
            hi = min(pos + adv, end)
            if hi > lo:
                self._materialize_factor_range(out, lo - start, f, pos, lo, hi, e.group, prov, depth)
            pos += adv
            if pos >= end:
                break
        if pos < end:
            raise CorruptArchiveError("decoded factors end before the requested range")
        return out

    def _materialize_factor_range(
        self, out, at, f: Factor, f_start, lo, hi, group, prov, depth
    ) -> None:
        """Fill out[at : at + (hi-lo)] with factor symbols [lo, hi)."""
        rel_lo, rel_hi = lo - f_start, hi - f_start
        if f.kind == LITERAL:
            out[at : at + (hi - lo)] = f.symbols[rel_lo:rel_hi]
            return
        if f.kind == NRUN:
            from .genome import N

            out[at : at + (hi - lo)] = N
            return
        if f.kind == MATCH:
            piece = self._ref_range(group, f.position + rel_lo, f.position + rel_hi)
        else:
            piece = self._materialize_reservoir(
                group, prov, f.position + rel_lo, rel_hi - rel_lo, depth
            )
        out[at : at + (hi - lo)] = piece
        # overwrite the gap positions that fall inside the slice
        cursor = 0
        for j, L in enumerate(f.lengths[:-1]):
            cursor += L
            if rel_lo <= cursor < rel_hi:
                out[at + cursor - rel_lo] = f.gap_symbols[j]
            cursor += 1

    # ------------------------------------------------------------------
    # reporting

    def stats(self) -> dict[str, float | int]:
        """Size breakdown (bytes) plus derived ratios; the relative part
        is the member stream payloads together with their checkpoint
        metadata."""
        if not self.section_sizes:
            self.to_bytes()
        ref_meta = sum(e.meta_bytes for e in self.entries if e.role == ROLE_REFERENCE)
        rel_meta = sum(e.meta_bytes for e in self.entries if e.role == ROLE_MEMBER)
        reference_bytes = self.section_sizes.get(_SEC_REFPAYLOAD, 0) + ref_meta
        relative_bytes = self.section_sizes.get(_SEC_STREAMPAYLOAD, 0) + rel_meta
        total = self.total_bytes
        header_bytes = total - reference_bytes - relative_bytes
        ref_symbols = sum(e.length for e in self.entries if e.role == ROLE_REFERENCE)
        member_symbols = sum(e.length for e in self.entries if e.role == ROLE_MEMBER)
        symbols = ref_symbols + member_symbols
        return {
            "sequences": len(self.entries),
            "input_symbols": symbols,
            "total_bytes": total,
            "header_bytes": header_bytes,
            "reference_bytes": reference_bytes,
            "relative_bytes": relative_bytes,
            "bpb_overall": 8 * total / symbols if symbols else 0.0,
            "bpb_reference": 8 * reference_bytes / ref_symbols if ref_symbols else 0.0,
            "bpb_relative": 8 * relative_bytes / member_symbols if member_symbols else 0.0,
        }


def compress(collection: Collection, params: ParseParams | None = None) -> Archive:
    """Compress a collection into an archive.

    The reference records are stored via the blocked triplet codec with
    one shared Huffman table; every member sequence is parsed in
    collection order (the reservoir grows as a side effect), statistics
    are gathered in a first pass, and one shared model set codes all
    member streams in the second pass.
    """
    params = params or ParseParams()
    params.validate()
    collection.validate()
    groups = matching_groups(collection)

    role = {}
    group_of = {}
    for g, grp in enumerate(groups):
        if grp.reference is not None:
            role[grp.reference] = ROLE_REFERENCE
            group_of[grp.reference] = g
        for i in grp.members:
            role[i] = ROLE_MEMBER
            group_of[i] = g
    if len(role) != len(collection.sequences):
        raise ValueError("grouping did not cover the collection")

    ref_counts = np.zeros(256, dtype=np.int64)
    for grp in groups:
        if grp.reference is not None:
            ref_counts += packed_block_counts(collection.sequences[grp.reference].data)
    if not ref_counts.any():
        ref_counts[0] = 1
    ref_table = HuffmanTable.from_counts(ref_counts)

    indexes: list[KmerIndex] = []
    provenances: list[ReservoirProvenance] = []
    for grp in groups:
        ref_data = (
            collection.sequences[grp.reference].data
            if grp.reference is not None
            else np.zeros(0, dtype=np.uint8)
        )
        indexes.append(KmerIndex(ref_data, params.m1, params.candidate_cap))
        provenances.append(ReservoirProvenance())

    raws = {}
    for i, seq in enumerate(collection.sequences):
        if role[i] != ROLE_MEMBER:
            continue
        g = group_of[i]
        index, prov = indexes[g], provenances[g]

        def sink(run, source_pos, _i=i, _index=index, _prov=prov):
            offset = append_reservoir_phrase(_prov, (_i, source_pos, len(run)), params.m3)
            _index.extend_with_reservoir(run, _index.ref_len + offset)

        parse = parse_sequence(index, seq.data, params, sink)
        raws[i] = encode_parse(parse, params)

    if raws:
        models = build_models(list(raws.values()))
    else:
        dummy = np.zeros(256, dtype=np.int64)
        dummy[0] = 1
        table = HuffmanTable.from_counts(dummy)
        models = ModelSet(table, table, table, table, table, table)

    entries = []
    for i, seq in enumerate(collection.sequences):
        entry = SequenceEntry(
            seq.name, seq.record_name, seq.file_tag, len(seq.data), role[i], group_of[i]
        )
        if role[i] == ROLE_REFERENCE:
            entry.refblocks = encode_reference(seq.data, ref_table)
        else:
            entry.coded = compress_streams(raws[i], models)
        entries.append(entry)

    return Archive(
        params,
        collection.granularity,
        collection.reference_index,
        entries,
        groups,
        ref_table,
        models,
        provenances,
    )


def decompress(archive: Archive, threads: int = 1) -> Collection:
    """Inverse of :func:`compress`."""
    return archive.decompress(threads=threads)
