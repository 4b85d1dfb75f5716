"""Dictionary (gazetteer) entity recognition with longest-match-leftmost semantics."""

from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path

from .corpus import Corpus


class GazetteerError(ValueError):
    """Invalid gazetteer contents or misuse of the recognizer."""


def _normalize_surface(s):
    return " ".join(s.split())


@dataclass(frozen=True)
class Gazetteer:
    """A fixed set of entity surface forms matched on token boundaries."""

    entries: frozenset
    case_sensitive: bool = True

    def __post_init__(self):
        object.__setattr__(self, "entries", frozenset(self.entries))
        for e in self.entries:
            if not isinstance(e, str) or not _normalize_surface(e):
                raise GazetteerError("gazetteer entries must be non-empty strings")

    @classmethod
    def from_file(cls, path, case_sensitive=True):
        """One entity per line; first TSV column, any extra columns ignored."""
        entries = set()
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            surface = line.split("\t", 1)[0].strip()
            if surface:
                entries.add(surface)
        return cls(frozenset(entries), case_sensitive=case_sensitive)

    @cached_property
    def _lookup(self):
        # normalized surface -> canonical entry; on case-insensitive
        # collisions the lexicographically smallest entry wins
        table = {}
        for e in sorted(self.entries):
            key = _normalize_surface(e if self.case_sensitive else e.lower())
            table.setdefault(key, e)
        return table

    @cached_property
    def max_tokens(self):
        return max(len(e.split()) for e in self.entries) if self.entries else 0

    def canonical(self, surface):
        """The stored entry matching `surface`, or None."""
        key = _normalize_surface(surface if self.case_sensitive else surface.lower())
        return self._lookup.get(key)

    def __contains__(self, surface):
        return self.canonical(surface) is not None

    def __len__(self):
        return len(self.entries)


def recognize(tokens, gazetteer, *, dedupe=False):
    """All maximal gazetteer matches in `tokens`, scanning left to right.

    At each position the longest matching span wins and scanning resumes
    after it, so shorter matches overlapping a taken span are suppressed.
    Duplicate mentions are kept in occurrence order unless `dedupe` is set.
    """
    if len(gazetteer) == 0:
        raise GazetteerError("recognition needs a non-empty gazetteer")
    tokens = list(tokens)
    found = []
    i, n = 0, len(tokens)
    while i < n:
        hit = None
        for k in range(min(gazetteer.max_tokens, n - i), 0, -1):
            canon = gazetteer.canonical(" ".join(tokens[i : i + k]))
            if canon is not None:
                hit = (k, canon)
                break
        if hit is None:
            i += 1
        else:
            found.append(hit[1])
            i += hit[0]
    if dedupe:
        found = list(dict.fromkeys(found))
    return tuple(found)


def recognize_corpus(corpus, gazetteer, *, dedupe=False):
    """Fill the entity list of every piece; clears needs_recognition flags."""
    pieces = tuple(
        replace(p, entities=recognize(p.tokens, gazetteer, dedupe=dedupe), needs_recognition=False)
        for p in corpus.pieces
    )
    return Corpus(pieces, name=corpus.name)
