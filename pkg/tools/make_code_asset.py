"""Regenerate the shipped 150x300 (3,6)-regular parity-check asset.

Run from the repo root:  python tools/make_code_asset.py
The seed is fixed so the asset is reproducible; bump it only if the
resulting matrix fails the rank/girth checks below.
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from gfra.ldpc import LdpcCode, min_cycle4_free, peg_construct, write_alist  # noqa: E402

SEED = 7
M, N, DV = 150, 300, 3


def main() -> None:
    h = peg_construct(M, N, var_degree=DV, seed=SEED, check_degree_cap=N * DV // M)
    assert (h.sum(axis=0) == DV).all(), "column degrees off"
    assert (h.sum(axis=1) == N * DV // M).all(), "row degrees off"
    assert min_cycle4_free(h), "girth < 6"
    code = LdpcCode(h)  # raises if rank-deficient
    assert code.k == N - M
    zero = code.encode(np.zeros(code.k, dtype=np.uint8))
    assert not zero.any()
    rng = np.random.default_rng(0)
    info = rng.integers(0, 2, size=(100, code.k), dtype=np.uint8)
    assert not code.syndrome(code.encode(info)).any()

    out = Path(__file__).resolve().parents[1] / "src" / "gfra" / "assets" / f"ldpc_{M}x{N}.alist"
    out.parent.mkdir(parents=True, exist_ok=True)
    write_alist(h, out)
    print(f"wrote {out} (seed={SEED}, rank={M}, girth>=6)")


if __name__ == "__main__":
    main()
