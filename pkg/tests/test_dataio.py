import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from owcl.dataio import (
    OPEN_LABEL,
    EmbeddingRecord,
    TaskDataset,
    read_dataset,
    write_dataset,
)
from owcl.errors import FormatError


def make_dataset(task_id=0, dim=2, train=None, test=None):
    return TaskDataset(
        task_id=task_id, dimension=dim, train=train or [], test=test or []
    )


def test_minimal_well_formed_file(tmp_path):
    path = tmp_path / "t.owcl"
    path.write_text("#owcl v1 dim=2 task=0\n0,0,train,1.0,2.0\nUN,0,test,0.5,0.5\n")
    ds = read_dataset(path)
    assert len(ds.train) == 1 and len(ds.test) == 1
    assert ds.train[0].label == 0
    assert np.array_equal(ds.train[0].vector, [1.0, 2.0])
    assert ds.test[0].label is None
    assert ds.class_set == {0}


def test_open_marker_in_train_rejected_with_line(tmp_path):
    path = tmp_path / "t.owcl"
    path.write_text("#owcl v1 dim=1 task=0\nUN,0,train,1.0\n")
    with pytest.raises(FormatError) as exc:
        read_dataset(path)
    assert exc.value.line == 2
    assert "open marker" in str(exc.value)


@pytest.mark.parametrize(
    "content,line",
    [
        ("#owcl v2 dim=1 task=0\n", 1),
        ("not a header\n", 1),
        ("#owcl v1 dim=2 task=0\n0,0,train,1.0\n", 2),
        ("#owcl v1 dim=1 task=0\n0,0,train,nan\n", 2),
        ("#owcl v1 dim=1 task=0\n0,0,train,inf\n", 2),
        ("#owcl v1 dim=1 task=0\n-3,0,train,1.0\n", 2),
        ("#owcl v1 dim=1 task=0\n0,0,dev,1.0\n", 2),
        ("#owcl v1 dim=1 task=0\n0,0,train,abc\n", 2),
        ("#owcl v1 dim=1 task=0\n0,1,train,1.0\n", 2),
        ("", 1),
    ],
)
def test_malformed_inputs_are_structured_errors(tmp_path, content, line):
    path = tmp_path / "bad.owcl"
    path.write_text(content)
    with pytest.raises(FormatError) as exc:
        read_dataset(path)
    assert exc.value.line == line
    assert str(path) in str(exc.value)


def test_empty_dataset_writes_header_only(tmp_path):
    path = tmp_path / "empty.owcl"
    write_dataset(make_dataset(task_id=3, dim=4), path)
    assert path.read_text() == "#owcl v1 dim=4 task=3\n"
    ds = read_dataset(path)
    assert ds.train == [] and ds.test == []


def test_single_record_single_row(tmp_path):
    path = tmp_path / "one.owcl"
    ds = make_dataset(train=[EmbeddingRecord(np.array([1.5, -2.0]), 7, 0, "train")])
    write_dataset(ds, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    assert lines[1] == "7,0,train,1.5,-2.0"


def _random_dataset(rng, n_train=60, n_test=40, dim=5, task_id=2):
    train = [
        EmbeddingRecord(rng.standard_normal(dim), int(rng.integers(0, 4)), task_id, "train")
        for _ in range(n_train)
    ]
    test = []
    for _ in range(n_test):
        open_ = rng.random() < 0.3
        test.append(
            EmbeddingRecord(
                rng.standard_normal(dim) * rng.uniform(1e-8, 1e8),
                None if open_ else int(rng.integers(0, 4)),
                task_id,
                "test",
            )
        )
    return TaskDataset(task_id=task_id, dimension=dim, train=train, test=test)


def test_round_trip_100_records_exact(tmp_path):
    rng = np.random.default_rng(11)
    ds = _random_dataset(rng)
    path = tmp_path / "rt.owcl"
    write_dataset(ds, path)
    assert read_dataset(path) == ds
    # and the decimal text form is stable under a second round trip
    path2 = tmp_path / "rt2.owcl"
    write_dataset(read_dataset(path), path2)
    assert path.read_text() == path2.read_text()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 8), st.integers(0, 30))
def test_round_trip_property(seed, dim, n_train):
    rng = np.random.default_rng(seed)
    ds = _random_dataset(rng, n_train=n_train, n_test=10, dim=dim)
    import tempfile, os

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "x.owcl")
        write_dataset(ds, path)
        assert read_dataset(path) == ds


def test_validate_rejects_open_in_train():
    ds = make_dataset(train=[EmbeddingRecord(np.zeros(2), None, 0, "train")])
    with pytest.raises(FormatError):
        ds.validate()


def test_validate_rejects_wrong_task_id():
    ds = make_dataset(task_id=1, train=[EmbeddingRecord(np.zeros(2), 0, 0, "train")])
    with pytest.raises(FormatError):
        ds.validate()


def test_open_label_token():
    assert OPEN_LABEL == "UN"


def test_write_to_unwritable_path(tmp_path):
    ds = make_dataset()
    with pytest.raises(OSError):
        write_dataset(ds, tmp_path)  # a directory is not a writable file
