"""Bundled data files: stopwords, keyboard adjacency, desk-scale corpora."""

from importlib import resources
from pathlib import Path


def read_text(name: str) -> str:
    return resources.files(__package__).joinpath(name).read_text(encoding="utf-8")


def path(name: str) -> Path:
    """Filesystem path to a bundled data file."""
    p = Path(str(resources.files(__package__).joinpath(name)))
    if not p.exists():
        raise FileNotFoundError(f"no bundled data file {name!r}")
    return p


def corpus_path(name: str) -> Path:
    """Path to a bundled corpus TSV, e.g. ``corpus_path('sentiment_train')``."""
    return path(f"corpora/{name}.tsv")
