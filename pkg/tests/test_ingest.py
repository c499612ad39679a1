import json

import pytest

from batchts.core import BanditInstance
from batchts.exceptions import InputError, UsageError
from batchts.ingest import (
    CATALOGUE,
    builtin,
    load_instance,
    movielens_instance,
    movielens_table,
    resolve_instance,
    save_instance,
)


def test_catalogue_values():
    assert list(CATALOGUE) == ["DS1", "DS2", "DS3", "DS4", "DS5", "DS6"]
    assert builtin("DS1").means == (0.9, 0.6)
    assert builtin("DS2").means == (0.9, 0.8)
    assert builtin("DS3").means == (0.55, 0.45)
    assert builtin("DS4").means == (0.9,) + (0.8,) * 9
    assert builtin("DS5").means == pytest.approx([0.9 - (i - 1) / 20 for i in range(1, 11)],
                                                 abs=1e-15)
    assert builtin("DS6").means == (0.9, 0.8, 0.8, 0.8, 0.7, 0.7, 0.7, 0.6, 0.6, 0.6)
    assert builtin("ds3").name == "DS3"


def test_unknown_dataset():
    with pytest.raises(UsageError, match="DS1"):
        builtin("DS9")


def write_ratings(path, rows, header="userId,movieId,rating,timestamp"):
    path.write_text(header + "\n" + "".join(f"{u},{m},{r},0\n" for u, m, r in rows))
    return path


def test_two_movies(tmp_path):
    f = write_ratings(tmp_path / "r.csv",
                      [(1, 10, 2.5), (2, 10, 2.5), (1, 20, 4.0), (2, 20, 3.5), (3, 20, 4.5)])
    inst = movielens_instance(f, min_ratings=1)
    assert inst.means == pytest.approx((0.8, 0.5))
    table = movielens_table(f, min_ratings=1)
    assert table["movie_id"].tolist() == [20, 10]
    assert table["count"].tolist() == [3, 2]


def test_threshold_and_tie_order(tmp_path):
    rows = [(u, m, 3.0) for u in range(5) for m in (7, 3)] + [(1, 9, 5.0)]
    f = write_ratings(tmp_path / "r.csv", rows)
    table = movielens_table(f, min_ratings=5)
    assert table["movie_id"].tolist() == [3, 7]
    assert (table["mu"] == 0.6).all()


def test_single_movie_rejected(tmp_path):
    f = write_ratings(tmp_path / "r.csv", [(1, 5, 5.0), (2, 5, 5.0), (3, 5, 5.0)])
    with pytest.raises(InputError, match="at least 2 arms"):
        movielens_instance(f, min_ratings=1)


def test_no_qualifying_movie_reports_rows(tmp_path):
    f = write_ratings(tmp_path / "r.csv", [(1, 5, 5.0), (2, 6, 1.0)])
    with pytest.raises(InputError, match="2 rows over 2 movies"):
        movielens_instance(f)


def test_unreadable_inputs(tmp_path):
    with pytest.raises(InputError, match="not found"):
        movielens_instance(tmp_path / "missing.csv")
    bad = tmp_path / "bad.csv"
    bad.write_text("movieId,rating\n1,five\n")
    with pytest.raises(InputError, match="non-numeric"):
        movielens_instance(bad, min_ratings=1)
    nocol = tmp_path / "nocol.csv"
    nocol.write_text("a,b\n1,2\n")
    with pytest.raises(InputError):
        movielens_instance(nocol, min_ratings=1)


def test_custom_columns_and_delimiter(tmp_path):
    f = tmp_path / "r.dat"
    f.write_text("item::score\n1::5\n1::4\n2::2\n")
    inst = movielens_instance(f, min_ratings=1, movie_col="item", rating_col="score",
                              delimiter="::")
    assert inst.means == pytest.approx((0.9, 0.4))


def test_means_clamped(tmp_path):
    f = write_ratings(tmp_path / "r.csv", [(1, 1, 10.0), (1, 2, 1.0)])
    assert movielens_instance(f, min_ratings=1).means == (1.0, 0.2)


def test_instance_roundtrip(tmp_path):
    inst = BanditInstance((0.3, 0.25, 0.9), "mine")
    path = tmp_path / "i.json"
    save_instance(inst, path)
    assert json.loads(path.read_text())["schema"] == 1
    assert load_instance(path) == inst
    assert resolve_instance(str(path)) == inst
    assert resolve_instance("DS2") == builtin("DS2")
    bad = tmp_path / "bad.json"
    bad.write_text('{"schema": 1, "means": [0.5]}')
    with pytest.raises(InputError):
        load_instance(bad)
    with pytest.raises(UsageError):
        resolve_instance("nothing-here")
