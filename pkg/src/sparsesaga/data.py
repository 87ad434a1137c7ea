"""Sparse datasets, LibSVM ingestion, block partitions and the extended-support index."""

from __future__ import annotations

import gzip
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse


class ParseError(ValueError):
    """Malformed LibSVM input.  Carries the 1-based offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DeadBlockError(ValueError):
    """A partition block intersects no sample support (n_B = 0)."""

    def __init__(self, block_ids):
        self.block_ids = list(block_ids)
        super().__init__(f"dead blocks (no sample support): {self.block_ids}")


@dataclass(frozen=True)
class CsrMatrix:
    """Row-major compressed sparse matrix with float64 values.

    Column indices are 0-based and strictly increasing within each row.
    Instances are treated as immutable and can be shared across threads.
    """

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_offsets", np.ascontiguousarray(self.row_offsets, dtype=np.int64))
        object.__setattr__(self, "col_indices", np.ascontiguousarray(self.col_indices, dtype=np.int64))
        object.__setattr__(self, "values", np.ascontiguousarray(self.values, dtype=np.float64))
        ro, ci = self.row_offsets, self.col_indices
        if ro.shape != (self.n_rows + 1,):
            raise ValueError("row_offsets must have length n_rows + 1")
        if ro[0] != 0 or ro[-1] != len(ci) or np.any(np.diff(ro) < 0):
            raise ValueError("row_offsets must be monotone from 0 to nnz")
        if len(ci) != len(self.values):
            raise ValueError("col_indices and values must have equal length")
        if len(ci) and (ci.min() < 0 or ci.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            cols = ci[ro[i]:ro[i + 1]]
            if len(cols) > 1 and np.any(np.diff(cols) <= 0):
                raise ValueError(f"row {i}: column indices not strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("values must be finite")

    @property
    def nnz(self):
        return int(self.row_offsets[-1])

    def row(self, i):
        """Return (column indices, values) views for row i."""
        lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
        return self.col_indices[lo:hi], self.values[lo:hi]

    def row_sqnorms(self):
        sq = self.values ** 2
        out = np.zeros(self.n_rows)
        for i in range(self.n_rows):
            lo, hi = self.row_offsets[i], self.row_offsets[i + 1]
            out[i] = sq[lo:hi].sum()
        return out

    def to_scipy(self):
        cached = getattr(self, "_scipy", None)
        if cached is None:
            cached = scipy.sparse.csr_matrix(
                (self.values, self.col_indices, self.row_offsets),
                shape=(self.n_rows, self.n_cols),
            )
            object.__setattr__(self, "_scipy", cached)
        return cached

    def matvec(self, x):
        return self.to_scipy() @ x

    def rmatvec(self, y):
        return self.to_scipy().T @ y

    def toarray(self):
        return self.to_scipy().toarray()


@dataclass(frozen=True)
class Dataset:
    features: CsrMatrix
    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.ascontiguousarray(self.labels, dtype=np.float64))
        if self.labels.shape != (self.features.n_rows,):
            raise ValueError("labels length must equal the number of rows")

    @property
    def n_samples(self):
        return self.features.n_rows

    @property
    def n_features(self):
        return self.features.n_cols


@dataclass(frozen=True)
class BlockPartition:
    """Partition of the coordinates 0..p-1 into disjoint blocks."""

    block_of: np.ndarray
    blocks: list

    def __post_init__(self):
        object.__setattr__(self, "block_of", np.ascontiguousarray(self.block_of, dtype=np.int64))
        object.__setattr__(self, "blocks", [np.ascontiguousarray(b, dtype=np.int64) for b in self.blocks])
        p = len(self.block_of)
        seen = np.zeros(p, dtype=bool)
        for bid, coords in enumerate(self.blocks):
            if len(coords) == 0:
                raise ValueError(f"block {bid} is empty")
            if np.any(np.diff(coords) <= 0):
                raise ValueError(f"block {bid} coordinates must be sorted and unique")
            if coords[0] < 0 or coords[-1] >= p:
                raise ValueError(f"block {bid} has out-of-range coordinates")
            if seen[coords].any():
                raise ValueError("blocks overlap")
            seen[coords] = True
            if np.any(self.block_of[coords] != bid):
                raise ValueError("block_of inconsistent with blocks")
        if not seen.all():
            raise ValueError("blocks do not cover all coordinates")

    @property
    def n_blocks(self):
        return len(self.blocks)

    @property
    def n_coords(self):
        return len(self.block_of)

    @property
    def is_singleton(self):
        return self.n_blocks == self.n_coords

    def block_sizes(self):
        return np.array([len(b) for b in self.blocks], dtype=np.int64)


def singleton_partition(p):
    """One block per coordinate (totally separable penalties)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return BlockPartition(np.arange(p), [np.array([j]) for j in range(p)])


def single_block_partition(p):
    """A unique block covering all coordinates."""
    if p < 1:
        raise ValueError("p must be >= 1")
    return BlockPartition(np.zeros(p, dtype=np.int64), [np.arange(p)])


def load_partition_file(path, p):
    """Read a partition file: one line per block, whitespace-separated 0-based ids."""
    blocks = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            coords = np.array(sorted(int(t) for t in line.split()), dtype=np.int64)
            blocks.append(coords)
    block_of = np.full(p, -1, dtype=np.int64)
    for bid, coords in enumerate(blocks):
        block_of[coords] = bid
    return BlockPartition(block_of, blocks)


@dataclass(frozen=True)
class SupportIndex:
    """Per-sample extended supports with block weights and the sparsity measure.

    ``extended_support[i]`` lists the block ids whose coordinates intersect
    the support of row i.  ``d_B = n / n_B`` reweights each block by the
    inverse of how often it appears; ``delta`` is the normalized maximum
    block frequency, always in [1/n, 1].

    The flattened companion arrays (``ext_offsets``, ``ext_cols``,
    ``ext_weights``, ``support_pos``) give, for each sample, the sorted
    coordinates covered by its extended support, the per-coordinate weight
    d_B, and the positions of the row's own nonzero columns inside that
    coordinate list.  Solvers iterate over these instead of the block lists.
    """

    extended_support: list
    n_B: np.ndarray
    d_B: np.ndarray
    delta: float
    partition: BlockPartition
    dropped_blocks: list = field(default_factory=list)
    ext_offsets: np.ndarray = None
    ext_cols: np.ndarray = None
    ext_weights: np.ndarray = None
    support_pos: np.ndarray = None
    support_pos_offsets: np.ndarray = None

    def ext_slice(self, i):
        """(coords, per-coordinate d weights, positions of S_i) for sample i."""
        lo, hi = self.ext_offsets[i], self.ext_offsets[i + 1]
        slo, shi = self.support_pos_offsets[i], self.support_pos_offsets[i + 1]
        return self.ext_cols[lo:hi], self.ext_weights[lo:hi], self.support_pos[slo:shi]

    def coord_weights(self):
        """Weight d_B expanded to every coordinate (the diagonal of D)."""
        w = np.empty(self.partition.n_coords)
        for bid, coords in enumerate(self.partition.blocks):
            w[coords] = self.d_B[bid]
        return w


def build_support_index(features, partition, drop_dead_blocks=False):
    """Compute extended supports T_i, block counts, weights d_B and delta.

    Blocks intersecting no row support are an error by default; with
    ``drop_dead_blocks`` they are excluded and reported in
    ``dropped_blocks`` instead (their d_B is set to 0).
    """
    if partition.n_coords != features.n_cols:
        raise ValueError("partition does not cover the feature dimension")
    n = features.n_rows
    block_of = partition.block_of
    extended = []
    counts = np.zeros(partition.n_blocks, dtype=np.int64)
    for i in range(n):
        cols, _ = features.row(i)
        tids = np.unique(block_of[cols])
        extended.append(tids)
        counts[tids] += 1

    dead = np.flatnonzero(counts == 0)
    if len(dead) and not drop_dead_blocks:
        raise DeadBlockError(dead)

    d = np.zeros(partition.n_blocks)
    live = counts > 0
    d[live] = n / counts[live]
    delta = float(counts.max()) / n if counts.max() > 0 else 0.0

    ext_offsets = np.zeros(n + 1, dtype=np.int64)
    sp_offsets = np.zeros(n + 1, dtype=np.int64)
    cols_parts, w_parts, pos_parts = [], [], []
    for i in range(n):
        tids = extended[i]
        if len(tids):
            coords = np.concatenate([partition.blocks[t] for t in tids])
            order = np.argsort(coords, kind="stable")
            coords = coords[order]
            weights = np.concatenate([np.full(len(partition.blocks[t]), d[t]) for t in tids])[order]
        else:
            coords = np.empty(0, dtype=np.int64)
            weights = np.empty(0)
        rcols, _ = features.row(i)
        pos = np.searchsorted(coords, rcols)
        cols_parts.append(coords)
        w_parts.append(weights)
        pos_parts.append(pos)
        ext_offsets[i + 1] = ext_offsets[i] + len(coords)
        sp_offsets[i + 1] = sp_offsets[i] + len(pos)

    return SupportIndex(
        extended_support=extended,
        n_B=counts,
        d_B=d,
        delta=delta,
        partition=partition,
        dropped_blocks=list(dead),
        ext_offsets=ext_offsets,
        ext_cols=np.concatenate(cols_parts) if cols_parts else np.empty(0, dtype=np.int64),
        ext_weights=np.concatenate(w_parts) if w_parts else np.empty(0),
        support_pos=np.concatenate(pos_parts) if pos_parts else np.empty(0, dtype=np.int64),
        support_pos_offsets=sp_offsets,
    )


def _open_maybe_gzip(source):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        path = str(source)
        if path.endswith(".gz"):
            return gzip.open(path, "rt")
        return open(path)
    return source


def parse_libsvm(source, n_cols=None):
    """Parse LibSVM text ("label idx:val ...", 1-based indices) into a Dataset.

    ``source`` may be a path (gzip detected by extension) or a text stream.
    The column count is inferred from the largest index unless overridden.
    """
    stream = _open_maybe_gzip(source)
    close = stream is not source
    try:
        labels = []
        offsets = [0]
        cols = []
        vals = []
        max_col = 0
        lineno = 0
        for lineno, line in enumerate(stream, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            tokens = stripped.split()
            try:
                labels.append(float(tokens[0]))
            except ValueError:
                raise ParseError(f"non-numeric label {tokens[0]!r}", lineno) from None
            prev = 0
            for tok in tokens[1:]:
                try:
                    idx_s, val_s = tok.split(":", 1)
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError:
                    raise ParseError(f"malformed feature token {tok!r}", lineno) from None
                if idx <= prev:
                    raise ParseError(f"non-increasing feature index {idx}", lineno)
                prev = idx
                cols.append(idx - 1)
                vals.append(val)
                max_col = max(max_col, idx)
            offsets.append(len(cols))
        if not labels:
            raise ParseError("empty input")
        p = max_col if n_cols is None else int(n_cols)
        if p < max_col:
            raise ParseError(f"n_cols override {p} smaller than max index {max_col}")
        matrix = CsrMatrix(
            n_rows=len(labels),
            n_cols=p,
            row_offsets=np.array(offsets, dtype=np.int64),
            col_indices=np.array(cols, dtype=np.int64),
            values=np.array(vals),
        )
        return Dataset(features=matrix, labels=np.array(labels))
    finally:
        if close:
            stream.close()


def to_libsvm(dataset, target=None):
    """Serialize a Dataset back to LibSVM text (1-based indices).

    Returns the text when ``target`` is None, otherwise writes to the path
    or stream and returns None.
    """
    lines = []
    feats = dataset.features
    for i in range(feats.n_rows):
        cols, vals = feats.row(i)
        parts = [_format_number(dataset.labels[i])]
        parts.extend(f"{c + 1}:{_format_number(v)}" for c, v in zip(cols, vals))
        lines.append(" ".join(parts))
    text = "\n".join(lines) + "\n"
    if target is None:
        return text
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        opener = gzip.open(str(target), "wt") if str(target).endswith(".gz") else open(target, "w")
        with opener as fh:
            fh.write(text)
    else:
        target.write(text)
    return None


def _format_number(x):
    return repr(float(x))
