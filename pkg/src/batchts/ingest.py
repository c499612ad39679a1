"""Built-in synthetic instances and the MovieLens-derived MOVIE instance."""

from __future__ import annotations

import json
from pathlib import Path

import pandas as pd

from .core import BanditInstance
from .exceptions import InputError, UsageError

__all__ = [
    "CATALOGUE",
    "builtin",
    "movielens_table",
    "movielens_instance",
    "save_instance",
    "load_instance",
    "resolve_instance",
]

INSTANCE_SCHEMA = 1

CATALOGUE: dict[str, tuple[float, ...]] = {
    "DS1": (0.9, 0.6),
    "DS2": (0.9, 0.8),
    "DS3": (0.55, 0.45),
    # one-shot
    "DS4": (0.9,) + (0.8,) * 9,
    # uniform: 0.9 - (i - 1) / 20
    "DS5": (0.9, 0.85, 0.8, 0.75, 0.7, 0.65, 0.6, 0.55, 0.5, 0.45),
    # clustered
    "DS6": (0.9, 0.8, 0.8, 0.8, 0.7, 0.7, 0.7, 0.6, 0.6, 0.6),
}


def builtin(name: str) -> BanditInstance:
    key = name.upper()
    if key not in CATALOGUE:
        raise UsageError(f"unknown dataset {name!r}; valid: {', '.join(CATALOGUE)}")
    return BanditInstance(CATALOGUE[key], key)


def movielens_table(ratings_path, min_ratings: int = 20000, rating_scale: float = 5.0,
                    movie_col: str = "movieId", rating_col: str = "rating",
                    delimiter: str = ",") -> pd.DataFrame:
    """Per-movie rating counts and means for movies with at least ``min_ratings`` ratings.

    Returns columns ``movie_id, count, mean_rating, mu`` sorted by descending
    ``mu`` then ascending ``movie_id``.
    """
    path = Path(ratings_path)
    if rating_scale <= 0:
        raise UsageError("rating_scale must be positive")
    try:
        frame = pd.read_csv(path, sep=delimiter, usecols=[movie_col, rating_col],
                            engine="python" if len(delimiter) > 1 else "c")
    except FileNotFoundError:
        raise InputError(f"ratings file not found: {path}") from None
    except (ValueError, pd.errors.ParserError, UnicodeDecodeError) as exc:
        raise InputError(f"could not parse ratings file {path}: {exc}") from None

    ratings = pd.to_numeric(frame[rating_col], errors="coerce")
    bad = int(ratings.isna().sum())
    if bad:
        raise InputError(f"{path}: {bad} of {len(frame)} rows have a non-numeric rating")
    grouped = (pd.DataFrame({"movie_id": frame[movie_col], "rating": ratings.astype(float)})
               .groupby("movie_id")["rating"].agg(["count", "mean"]))
    kept = grouped[grouped["count"] >= min_ratings]
    if kept.empty:
        raise InputError(
            f"{path}: read {len(frame)} rows over {len(grouped)} movies; "
            f"none has at least {min_ratings} ratings"
        )
    table = kept.reset_index().rename(columns={"mean": "mean_rating"})
    table["mu"] = (table["mean_rating"] / rating_scale).clip(0.0, 1.0)
    return table.sort_values(["mu", "movie_id"], ascending=[False, True], kind="mergesort",
                             ignore_index=True)


def movielens_instance(ratings_path, min_ratings: int = 20000, rating_scale: float = 5.0,
                       **columns) -> BanditInstance:
    """One arm per movie with at least ``min_ratings`` ratings; mean rating / scale."""
    table = movielens_table(ratings_path, min_ratings, rating_scale, **columns)
    if len(table) < 2:
        raise InputError(
            f"{ratings_path}: only {len(table)} movie has at least {min_ratings} ratings; "
            "an instance needs at least 2 arms"
        )
    return BanditInstance(tuple(table["mu"]), "MOVIE")


def save_instance(instance: BanditInstance, path) -> None:
    payload = {"schema": INSTANCE_SCHEMA, "name": instance.name, "means": list(instance.means)}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def load_instance(path) -> BanditInstance:
    path = Path(path)
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise InputError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from None
    if payload.get("schema") != INSTANCE_SCHEMA or "means" not in payload:
        raise InputError(f"{path}: expected an instance file with schema {INSTANCE_SCHEMA}")
    try:
        return BanditInstance(tuple(payload["means"]), payload.get("name", path.stem))
    except UsageError as exc:
        raise InputError(f"{path}: {exc}") from None


def resolve_instance(name_or_path: str) -> BanditInstance:
    """A catalogue name, or a path to an instance JSON file."""
    if name_or_path.upper() in CATALOGUE:
        return builtin(name_or_path)
    if Path(name_or_path).suffix == ".json" or Path(name_or_path).exists():
        return load_instance(name_or_path)
    raise UsageError(f"unknown dataset {name_or_path!r}; valid: {', '.join(CATALOGUE)} "
                     "or a path to an instance .json file")
