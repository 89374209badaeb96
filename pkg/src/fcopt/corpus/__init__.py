"""Bundled problem instances (regenerate with scripts/build_corpus.py)."""

import json
from dataclasses import dataclass
from importlib import resources

from ..errors import ConfigError
from ..problem_io import problem_from_dict

__all__ = ["CorpusEntry", "corpus_ids", "corpus_list", "corpus_get"]


@dataclass
class CorpusEntry:
    id: str
    data: dict

    @property
    def metadata(self):
        return self.data.get("metadata", {})

    @property
    def applicable_methods(self):
        return list(self.metadata.get("applicable_methods", []))

    @property
    def problem(self):
        return problem_from_dict(self.data)


def corpus_ids():
    files = resources.files(__name__)
    return sorted(p.name[:-5] for p in files.iterdir() if p.name.endswith(".json"))


def corpus_list():
    return [corpus_get(i) for i in corpus_ids()]


def corpus_get(entry_id):
    """Entry by full id (``e_lse_affine``) or by its letter prefix (``e``)."""
    ids = corpus_ids()
    match = [i for i in ids if i == entry_id or i.split("_", 1)[0] == entry_id]
    if len(match) != 1:
        raise ConfigError(f"unknown corpus entry {entry_id!r}; available: {', '.join(ids)}")
    text = resources.files(__name__).joinpath(match[0] + ".json").read_text()
    return CorpusEntry(match[0], json.loads(text))
