"""Rate-1/2 LDPC code: alist I/O, PEG construction, encoder and BP decoder.

The shipped code is a (3,6)-regular 150x300 parity-check matrix built once by
progressive edge growth with a fixed seed and stored under ``assets/`` so
every run uses the identical code.

LLR convention throughout: L = ln(p(bit=0)/p(bit=1)), clipped to +-30.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

import numpy as np

LLR_CLIP = 30.0
DEFAULT_ALIST = "ldpc_150x300.alist"
_TANH_MAX = np.nextafter(1.0, 0.0)

_default_code_cache: dict = {}


def read_alist(path: str | Path) -> np.ndarray:
    """Parse an alist file into a dense binary parity-check matrix (m, n)."""
    tokens = Path(path).read_text().split()
    it = iter(int(t) for t in tokens)
    n, m = next(it), next(it)
    dv_max, dc_max = next(it), next(it)
    col_deg = [next(it) for _ in range(n)]
    row_deg = [next(it) for _ in range(m)]
    h = np.zeros((m, n), dtype=np.uint8)
    for j in range(n):
        entries = [next(it) for _ in range(dv_max)]
        rows = [e for e in entries if e > 0]
        if len(rows) != col_deg[j]:
            raise ValueError(f"alist column {j}: degree mismatch")
        h[[r - 1 for r in rows], j] = 1
    # The row blocks are redundant; consume them if present and cross-check.
    try:
        for i in range(m):
            entries = [next(it) for _ in range(dc_max)]
            cols = [e for e in entries if e > 0]
            if cols and sorted(cols) != sorted(np.flatnonzero(h[i]) + 1):
                raise ValueError(f"alist row {i}: inconsistent with column blocks")
    except StopIteration:
        pass
    if list(h.sum(axis=0)) != col_deg or list(h.sum(axis=1)) != row_deg:
        raise ValueError("alist degree lists inconsistent with entries")
    return h


def write_alist(h: np.ndarray, path: str | Path) -> None:
    """Write a binary parity-check matrix in alist format."""
    h = np.asarray(h, dtype=np.uint8)
    m, n = h.shape
    col_deg = h.sum(axis=0)
    row_deg = h.sum(axis=1)
    dv_max, dc_max = int(col_deg.max()), int(row_deg.max())
    lines = [f"{n} {m}", f"{dv_max} {dc_max}"]
    lines.append(" ".join(str(int(d)) for d in col_deg))
    lines.append(" ".join(str(int(d)) for d in row_deg))
    for j in range(n):
        rows = list(np.flatnonzero(h[:, j]) + 1)
        rows += [0] * (dv_max - len(rows))
        lines.append(" ".join(str(r) for r in rows))
    for i in range(m):
        cols = list(np.flatnonzero(h[i]) + 1)
        cols += [0] * (dc_max - len(cols))
        lines.append(" ".join(str(c) for c in cols))
    Path(path).write_text("\n".join(lines) + "\n")


def peg_construct(
    n_checks: int,
    n_vars: int,
    var_degree: int = 3,
    seed: int = 0,
    check_degree_cap: int | None = None,
) -> np.ndarray:
    """Progressive-edge-growth parity matrix with a fixed variable degree.

    Each new edge goes to the check node farthest from the current variable
    (unreached ones first), breaking ties by lowest degree then by a seeded
    shuffle, which pushes short cycles out. With ``check_degree_cap`` set to
    n_vars*var_degree/n_checks the result is exactly check-regular.
    """
    rng = np.random.default_rng(seed)
    check_adj: list[list[int]] = [[] for _ in range(n_checks)]
    var_adj: list[list[int]] = [[] for _ in range(n_vars)]
    degree = np.zeros(n_checks, dtype=int)
    cap = check_degree_cap if check_degree_cap is not None else n_vars * var_degree

    def bfs_distances(v: int) -> np.ndarray:
        dist = np.full(n_checks, -1, dtype=int)
        seen_vars = np.zeros(n_vars, dtype=bool)
        seen_vars[v] = True
        frontier = list(var_adj[v])
        depth = 0
        for c in frontier:
            dist[c] = depth
        while frontier:
            next_vars = []
            for c in frontier:
                for u in check_adj[c]:
                    if not seen_vars[u]:
                        seen_vars[u] = True
                        next_vars.append(u)
            depth += 1
            frontier = []
            for u in next_vars:
                for c in var_adj[u]:
                    if dist[c] < 0:
                        dist[c] = depth
                        frontier.append(c)
        return dist

    def pick(cands: np.ndarray) -> int:
        best = cands[degree[cands] == degree[cands].min()]
        return int(rng.choice(best))

    for v in range(n_vars):
        for k in range(var_degree):
            open_checks = np.flatnonzero(degree < cap)
            open_checks = open_checks[~np.isin(open_checks, var_adj[v])]
            if open_checks.size == 0:
                raise RuntimeError("PEG construction stuck; try another seed")
            if k == 0:
                c = pick(open_checks)
            else:
                dist = bfs_distances(v)
                unreached = open_checks[dist[open_checks] < 0]
                if unreached.size:
                    c = pick(unreached)
                else:
                    far = dist[open_checks].max()
                    c = pick(open_checks[dist[open_checks] == far])
            check_adj[c].append(v)
            var_adj[v].append(c)
            degree[c] += 1

    h = np.zeros((n_checks, n_vars), dtype=np.uint8)
    for c, vs in enumerate(check_adj):
        h[c, vs] = 1
    return h


def min_cycle4_free(h: np.ndarray) -> bool:
    """True when no two columns share two checks, i.e. girth >= 6."""
    h = np.asarray(h, dtype=np.int64)
    gram = h.T @ h
    np.fill_diagonal(gram, 0)
    return bool(gram.max() <= 1)


def _gf2_rref(h: np.ndarray) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form over GF(2); returns (rref, pivot columns)."""
    a = np.array(h, dtype=np.uint8) & 1
    m, n = a.shape
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row >= m:
            break
        hit = np.flatnonzero(a[row:, col])
        if hit.size == 0:
            continue
        swap = row + hit[0]
        if swap != row:
            a[[row, swap]] = a[[swap, row]]
        mask = a[:, col].astype(bool).copy()
        mask[row] = False
        a[mask] ^= a[row]
        pivots.append(col)
        row += 1
    return a, pivots


def hard_decision(llr: np.ndarray) -> np.ndarray:
    """LLR -> bits; nonnegative LLR decides 0 (ties included)."""
    return (np.asarray(llr) < 0).astype(np.uint8)


class LdpcCode:
    """A binary LDPC code with a systematic encoder and a sum-product decoder.

    The parity-check matrix is immutable and shared; every decode call owns
    its message buffers, so decodes for different users can run concurrently.
    """

    def __init__(self, h: np.ndarray, decoder_iters: int = 50, llr_clip: float = LLR_CLIP):
        h = np.asarray(h, dtype=np.uint8)
        if h.ndim != 2 or not np.isin(h, (0, 1)).all():
            raise ValueError("parity-check matrix must be binary 2-D")
        if (h.sum(axis=1) == 0).any() or (h.sum(axis=0) == 0).any():
            raise ValueError("parity-check matrix has an empty row or column")
        self.h = h
        self.m, self.n = h.shape
        self.decoder_iters = decoder_iters
        self.llr_clip = float(llr_clip)

        rref, pivots = _gf2_rref(h)
        if len(pivots) < self.m:
            raise ValueError("parity-check matrix is rank-deficient; cannot encode")
        self._pivot_cols = np.array(pivots, dtype=int)
        self._info_cols = np.setdiff1d(np.arange(self.n), self._pivot_cols)
        self._parity_map = rref[:, self._info_cols]  # c[pivot[r]] = parity_map[r] @ info
        self.k = self._info_cols.size

        # Edge structure, check-major order (np.nonzero is row-major).
        self._ec, self._ev = np.nonzero(h)
        self.n_edges = self._ec.size
        self._check_starts = np.searchsorted(self._ec, np.arange(self.m))
        self._vm_order = np.lexsort((self._ec, self._ev))
        self._var_starts = np.searchsorted(self._ev[self._vm_order], np.arange(self.n))

    @property
    def info_positions(self) -> np.ndarray:
        """Codeword positions that carry the info block verbatim."""
        return self._info_cols

    def encode(self, info: np.ndarray) -> np.ndarray:
        """Systematic encoding; accepts (k,) or (B, k) bit arrays."""
        info = np.asarray(info, dtype=np.uint8)
        single = info.ndim == 1
        blocks = info[None, :] if single else info
        if blocks.shape[1] != self.k:
            raise ValueError(f"expected {self.k} info bits, got {blocks.shape[1]}")
        cw = np.zeros((blocks.shape[0], self.n), dtype=np.uint8)
        cw[:, self._info_cols] = blocks
        cw[:, self._pivot_cols] = (blocks @ self._parity_map.T) % 2
        return cw[0] if single else cw

    def syndrome(self, bits: np.ndarray) -> np.ndarray:
        bits = np.asarray(bits, dtype=np.uint8)
        return (bits @ self.h.T) % 2

    def decode_bp(self, prior_llr: np.ndarray, max_iters: int | None = None) -> np.ndarray:
        """Sum-product decoding on the Tanner graph, flooding schedule.

        Accepts one LLR vector (n,) or a batch (B, n); returns posterior LLRs
        of the same shape. Each row exits early once the hard decision of its
        running posterior satisfies all checks; non-convergence just returns
        the final posterior. ``max_iters=0`` returns the prior unchanged.
        """
        iters = self.decoder_iters if max_iters is None else max_iters
        prior = np.asarray(prior_llr, dtype=float)
        single = prior.ndim == 1
        lp = prior[None, :].copy() if single else prior.copy()
        if lp.shape[1] != self.n:
            raise ValueError(f"expected {self.n} prior LLRs, got {lp.shape[1]}")
        b = lp.shape[0]

        post = lp.copy()
        done = np.zeros(b, dtype=bool)
        done |= ~self._syndrome_fails(post)
        if iters > 0 and not done.all():
            final = post.copy()
            v2c = np.broadcast_to(lp[:, self._ev], (b, self.n_edges)).copy()
            c2v = np.zeros((b, self.n_edges))
            for _ in range(iters):
                c2v = self._check_update(v2c)
                post = lp + np.add.reduceat(
                    c2v[:, self._vm_order], self._var_starts, axis=1
                )
                np.clip(post, -self.llr_clip, self.llr_clip, out=post)
                final[~done] = post[~done]
                done |= ~self._syndrome_fails(post)
                if done.all():
                    break
                v2c = post[:, self._ev] - c2v
            post = final
        return post[0] if single else post

    def _syndrome_fails(self, post: np.ndarray) -> np.ndarray:
        bits = post[:, self._ev] < 0
        parity = np.add.reduceat(bits, self._check_starts, axis=1) % 2
        return parity.any(axis=1)

    def _check_update(self, v2c: np.ndarray) -> np.ndarray:
        """Extrinsic tanh-rule products, exact even for zero-valued messages."""
        t = np.tanh(0.5 * np.clip(v2c, -self.llr_clip, self.llr_clip))
        zero = t == 0.0
        logmag = np.log(np.abs(np.where(zero, 1.0, t)))
        neg = t < 0.0
        zc = np.add.reduceat(zero, self._check_starts, axis=1)
        lsum = np.add.reduceat(logmag, self._check_starts, axis=1)
        nneg = np.add.reduceat(neg, self._check_starts, axis=1)
        others_zero = zc[:, self._ec] - zero
        others_log = lsum[:, self._ec] - logmag
        others_sign = 1.0 - 2.0 * ((nneg[:, self._ec] - neg) % 2)
        prod = np.where(others_zero == 0, others_sign * np.exp(others_log), 0.0)
        np.clip(prod, -_TANH_MAX, _TANH_MAX, out=prod)
        return np.clip(2.0 * np.arctanh(prod), -self.llr_clip, self.llr_clip)


def load_code(path: str | Path | None = None, decoder_iters: int = 50) -> LdpcCode:
    """Load the shipped 150x300 code, or any user-supplied alist file."""
    key = (str(path) if path else DEFAULT_ALIST, decoder_iters)
    if key not in _default_code_cache:
        if path is None:
            ref = resources.files("gfra").joinpath("assets", DEFAULT_ALIST)
            with resources.as_file(ref) as p:
                h = read_alist(p)
        else:
            h = read_alist(path)
        _default_code_cache[key] = LdpcCode(h, decoder_iters=decoder_iters)
    return _default_code_cache[key]
