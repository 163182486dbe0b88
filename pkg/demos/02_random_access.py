#!/usr/bin/env python3
"""Random access: extract ranges without decompressing the archive.

Extraction decodes only the checkpoint windows covering the range plus
the reference blocks those factors point at; the bytes-read report
shows how little of the archive a small range touches.
"""
import numpy as np

from rlzg import Archive, compress, decompress
from rlzg.genome import decode_symbols
from rlzg.synthetic import make_collection

rng = np.random.default_rng(11)
coll = make_collection(rng, ref_len=800_000, n_derived=3, snp_range=(0.001, 0.005))
arc = Archive.from_bytes(compress(coll).to_bytes())
full = {s.name: s.data for s in decompress(arc).sequences}

name = coll.sequences[1].name
for start, end in ((120_000, 120_060), (399_990, 400_050), (0, 40)):
    got, bytes_read = arc.extract_report(name, start, end)
    assert np.array_equal(got, full[name][start:end])
    print(f"{name}[{start}:{end}] = {decode_symbols(got[:30])}"
          f"{'...' if len(got) > 30 else ''}   ({bytes_read} coded bytes touched)")

total = arc.stats()["total_bytes"]
print(f"archive is {total / 1e3:.0f} kB; each extract above touched about"
      " one checkpoint window and one reference block of it")
