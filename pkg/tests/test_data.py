import numpy as np
import pytest

from judgeagg import (
    SplitSpec,
    VoteDataError,
    VoteMatrix,
    accuracy,
    load_votes,
    save_votes,
    split,
)
from judgeagg.data import dumps_votes


def write(tmp_path, text, name="votes.csv"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def random_matrix(rng, with_gold=True):
    n = int(rng.integers(1, 30))
    k = int(rng.integers(1, 8))
    votes = rng.integers(0, 2, size=(n, k))
    gold = rng.integers(0, 2, size=n) if with_gold else None
    ids = tuple(f"item{i}" for i in range(n))
    names = tuple(f"judge{j}" for j in range(k))
    return VoteMatrix(votes=votes, item_ids=ids, judge_names=names, gold_labels=gold)


class TestLoadVotes:
    def test_single_row(self, tmp_path):
        v = load_votes(write(tmp_path, "item,j1,j2,label\na,1,0,1\n"))
        assert v.n == 1 and v.k == 2
        assert v.votes.tolist() == [[1, 0]]
        assert v.gold_labels.tolist() == [1]
        assert v.judge_names == ("j1", "j2")

    def test_no_gold_column(self, tmp_path):
        v = load_votes(write(tmp_path, "item,a,b\nx,0,1\ny,1,1\n"))
        assert v.gold_labels is None and v.k == 2

    def test_bad_cell_names_row_and_column(self, tmp_path):
        with pytest.raises(VoteDataError, match=r"row 3, column 'j2'.*got '2'"):
            load_votes(write(tmp_path, "item,j1,j2\na,1,0\nb,0,2\n"))

    def test_ragged_row(self, tmp_path):
        with pytest.raises(VoteDataError, match="row 2 has 2 cells"):
            load_votes(write(tmp_path, "item,j1,j2\na,1\n"))

    def test_empty_file(self, tmp_path):
        with pytest.raises(VoteDataError, match="empty"):
            load_votes(write(tmp_path, ""))

    def test_header_only(self, tmp_path):
        with pytest.raises(VoteDataError, match="no data rows"):
            load_votes(write(tmp_path, "item,j1\n"))

    def test_round_trip_100_random_matrices(self, tmp_path):
        rng = np.random.default_rng(7)
        for i in range(100):
            v = random_matrix(rng, with_gold=bool(rng.integers(0, 2)))
            path = str(tmp_path / f"m{i}.csv")
            save_votes(v, path)
            w = load_votes(path)
            assert np.array_equal(v.votes, w.votes)
            assert v.item_ids == w.item_ids
            assert v.judge_names == w.judge_names
            if v.gold_labels is None:
                assert w.gold_labels is None
            else:
                assert np.array_equal(v.gold_labels, w.gold_labels)
            # byte-identity modulo line endings
            assert dumps_votes(v).replace("\r\n", "\n") == dumps_votes(w).replace("\r\n", "\n")


class TestVoteMatrix:
    def test_rejects_non_binary(self):
        with pytest.raises(VoteDataError):
            VoteMatrix(votes=np.array([[0, 2]]), item_ids=("a",), judge_names=("x", "y"))

    def test_rejects_missing_gold_length(self):
        with pytest.raises(VoteDataError):
            VoteMatrix(votes=np.eye(2, dtype=int), item_ids=("a", "b"),
                       judge_names=("x", "y"), gold_labels=np.array([1]))


class TestSplit:
    def test_partition(self):
        rng = np.random.default_rng(0)
        v = VoteMatrix(votes=rng.integers(0, 2, (10, 3)),
                       item_ids=tuple(map(str, range(10))),
                       judge_names=("a", "b", "c"))
        tr, te = split(v, SplitSpec(train_fraction=0.5, seed=7))
        assert tr.n == 5 and te.n == 5
        assert set(tr.item_ids) | set(te.item_ids) == set(v.item_ids)
        assert not set(tr.item_ids) & set(te.item_ids)

    def test_deterministic(self):
        rng = np.random.default_rng(1)
        v = VoteMatrix(votes=rng.integers(0, 2, (12, 2)),
                       item_ids=tuple(map(str, range(12))), judge_names=("a", "b"))
        s = SplitSpec(train_fraction=0.3, seed=99)
        a1, b1 = split(v, s)
        a2, b2 = split(v, s)
        assert a1.item_ids == a2.item_ids and b1.item_ids == b2.item_ids

    def test_floor_rule_never_empty(self):
        rng = np.random.default_rng(2)
        v = VoteMatrix(votes=rng.integers(0, 2, (5, 2)),
                       item_ids=tuple(map(str, range(5))), judge_names=("a", "b"))
        tr, te = split(v, SplitSpec(train_fraction=0.2, seed=0))
        assert tr.n == max(1, int(np.floor(0.2 * 5))) == 1
        assert te.n == 4

    def test_too_small(self):
        v = VoteMatrix(votes=np.array([[1]]), item_ids=("a",), judge_names=("x",))
        with pytest.raises(VoteDataError):
            split(v, SplitSpec(train_fraction=0.5, seed=0))

    def test_bad_fraction(self):
        with pytest.raises(ValueError):
            SplitSpec(train_fraction=1.0, seed=0)


class TestAccuracy:
    def test_identity(self):
        assert accuracy([1, 0, 1], [1, 0, 1]) == 1.0

    def test_complement(self):
        assert accuracy([1, 1], [0, 0]) == 0.0

    def test_matches_brute_force_count(self):
        rng = np.random.default_rng(3)
        p = rng.integers(0, 2, 1000)
        g = rng.integers(0, 2, 1000)
        brute = sum(1 for a, b in zip(p, g) if a == b) / 1000
        assert accuracy(p, g) == brute

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            accuracy([1, 0], [1])

    def test_flip_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            n = int(rng.integers(1, 50))
            p = rng.integers(0, 2, n)
            g = rng.integers(0, 2, n)
            assert accuracy(p, g) + accuracy(1 - p, g) == pytest.approx(1.0)
