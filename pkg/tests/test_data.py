"""Parsing, CSR validation, partitions and the extended-support index."""

import gzip
import io

import numpy as np
import pytest

from sparsesaga.data import (
    BlockPartition,
    CsrMatrix,
    Dataset,
    DeadBlockError,
    ParseError,
    build_support_index,
    load_partition_file,
    parse_libsvm,
    single_block_partition,
    singleton_partition,
    to_libsvm,
)
from sparsesaga.diagnostics import brute_force_extended_support

SAMPLE = """\
1 1:0.5 3:-2.0
-1 2:1.5
1 1:1.0 2:2.0 3:3.0
"""


def small_matrix():
    return CsrMatrix(n_rows=3, n_cols=3,
                     row_offsets=np.array([0, 2, 3, 6]),
                     col_indices=np.array([0, 2, 1, 0, 1, 2]),
                     values=np.array([0.5, -2.0, 1.5, 1.0, 2.0, 3.0]))


def test_parse_libsvm_basic():
    data = parse_libsvm(io.StringIO(SAMPLE))
    assert data.n_samples == 3
    assert data.n_features == 3
    assert np.array_equal(data.labels, [1.0, -1.0, 1.0])
    cols, vals = data.features.row(0)
    assert np.array_equal(cols, [0, 2])
    assert np.array_equal(vals, [0.5, -2.0])


def test_parse_libsvm_comments_and_blanks():
    text = "# header\n\n1 1:2.0  # trailing\n"
    data = parse_libsvm(io.StringIO(text))
    assert data.n_samples == 1
    assert data.features.nnz == 1


def test_parse_libsvm_errors_carry_line_numbers():
    with pytest.raises(ParseError) as exc:
        parse_libsvm(io.StringIO("1 1:0.5\nbad 1:2\n"))
    assert exc.value.line == 2
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO("1 2:1.0 2:2.0\n"))  # non-increasing index
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO("1 0:1.0\n"))  # indices are 1-based
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO(""))


def test_parse_libsvm_n_cols_override():
    data = parse_libsvm(io.StringIO("1 2:1.0\n"), n_cols=5)
    assert data.n_features == 5
    with pytest.raises(ParseError):
        parse_libsvm(io.StringIO("1 4:1.0\n"), n_cols=2)


def test_libsvm_round_trip(tmp_path):
    data = parse_libsvm(io.StringIO(SAMPLE))
    path = tmp_path / "out.svm"
    to_libsvm(data, path)
    again = parse_libsvm(path)
    assert np.array_equal(again.labels, data.labels)
    assert np.array_equal(again.features.values, data.features.values)
    assert np.array_equal(again.features.col_indices, data.features.col_indices)


def test_libsvm_gzip_round_trip(tmp_path):
    data = parse_libsvm(io.StringIO(SAMPLE))
    path = tmp_path / "out.svm.gz"
    to_libsvm(data, path)
    with gzip.open(path, "rt") as fh:
        assert fh.readline().startswith("1.0 ")
    again = parse_libsvm(path)
    assert again.n_samples == data.n_samples


def test_csr_validation():
    with pytest.raises(ValueError):
        CsrMatrix(2, 2, np.array([0, 1]), np.array([0]), np.array([1.0]))
    with pytest.raises(ValueError):
        CsrMatrix(1, 2, np.array([0, 2]), np.array([1, 0]), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        CsrMatrix(1, 2, np.array([0, 1]), np.array([5]), np.array([1.0]))
    with pytest.raises(ValueError):
        CsrMatrix(1, 1, np.array([0, 1]), np.array([0]), np.array([np.inf]))


def test_csr_matvec_matches_dense():
    m = small_matrix()
    x = np.array([1.0, -1.0, 2.0])
    assert np.allclose(m.matvec(x), m.toarray() @ x)
    y = np.array([0.5, 1.0, -2.0])
    assert np.allclose(m.rmatvec(y), m.toarray().T @ y)
    assert np.allclose(m.row_sqnorms(), (m.toarray() ** 2).sum(axis=1))


def test_dataset_label_length_checked():
    with pytest.raises(ValueError):
        Dataset(features=small_matrix(), labels=np.array([1.0]))


def test_partition_validation():
    with pytest.raises(ValueError):  # overlap
        BlockPartition(np.array([0, 0]), [np.array([0, 1]), np.array([1])])
    with pytest.raises(ValueError):  # not covering
        BlockPartition(np.array([0, 0]), [np.array([0])])
    with pytest.raises(ValueError):  # empty block
        BlockPartition(np.array([0]), [np.array([0]), np.array([], dtype=int)])
    part = singleton_partition(4)
    assert part.is_singleton and part.n_blocks == 4
    whole = single_block_partition(4)
    assert whole.n_blocks == 1 and len(whole.blocks[0]) == 4


def test_load_partition_file(tmp_path):
    path = tmp_path / "blocks.txt"
    path.write_text("0 2\n1\n\n3\n")
    part = load_partition_file(path, 4)
    assert part.n_blocks == 3
    assert np.array_equal(part.blocks[0], [0, 2])


def test_extended_support_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(5):
        m = small_matrix()
        part = BlockPartition(np.array([0, 1, 1]), [np.array([0]), np.array([1, 2])])
        index = build_support_index(m, part)
        brute = brute_force_extended_support(m, part)
        for i in range(m.n_rows):
            assert list(index.extended_support[i]) == brute[i]


def test_support_index_weights_and_delta():
    m = small_matrix()
    part = singleton_partition(3)
    index = build_support_index(m, part)
    # column 0 appears in rows 0 and 2, columns 1 and 2 in two rows each
    assert np.array_equal(index.n_B, [2, 2, 2])
    assert np.allclose(index.d_B, [1.5, 1.5, 1.5])
    assert index.delta == pytest.approx(2 / 3)
    assert 1 / m.n_rows <= index.delta <= 1.0
    w = index.coord_weights()
    assert np.allclose(w, 1.5)


def test_ext_slice_contract():
    m = small_matrix()
    part = BlockPartition(np.array([0, 0, 1]), [np.array([0, 1]), np.array([2])])
    index = build_support_index(m, part)
    coords, weights, pos = index.ext_slice(0)
    rcols, _ = m.row(0)
    assert np.array_equal(coords[pos], rcols)
    assert np.all(np.diff(coords) > 0)
    assert len(weights) == len(coords)


def test_dead_block_detection():
    m = CsrMatrix(2, 3, np.array([0, 1, 2]), np.array([0, 1]),
                  np.array([1.0, 1.0]))
    part = singleton_partition(3)
    with pytest.raises(DeadBlockError) as exc:
        build_support_index(m, part)
    assert exc.value.block_ids == [2]
    index = build_support_index(m, part, drop_dead_blocks=True)
    assert index.dropped_blocks == [2]
    assert index.d_B[2] == 0.0
