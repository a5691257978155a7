"""Language lexicons backing the lexicalized feature rules.

Lists live in medload/data as editable plain-text files, one item per line,
`#` for comment lines.  Matching downstream is case-insensitive; multiword
epistemic items are contiguous lemma sequences.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from importlib import resources


@dataclass(frozen=True)
class Lexicon:
    language: str
    epist_items: tuple[tuple[str, ...], ...]
    modal_adjectives: frozenset[str]
    modal_verbs: frozenset[str]
    relative_pronouns: frozenset[str]
    personal_pronouns: frozenset[str]


def read_items(name: str) -> list[str]:
    """Read one data file: stripped non-empty lines, '#' lines skipped."""
    text = resources.files("medload.data").joinpath(name).read_text(encoding="utf-8")
    items = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            items.append(line)
    return items


def _item_set(name: str) -> frozenset[str]:
    return frozenset(item.lower() for item in read_items(name))


@lru_cache(maxsize=None)
def load_lexicon(language: str) -> Lexicon:
    """Lexicon for 'de' or 'en'; other languages get empty lists and the
    lexicalized rules simply never fire."""
    if language not in ("de", "en"):
        return Lexicon(language, (), frozenset(), frozenset(), frozenset(), frozenset())
    epist = tuple(tuple(item.lower().split()) for item in read_items(f"epist_{language}.txt"))
    return Lexicon(
        language=language,
        epist_items=epist,
        modal_adjectives=_item_set(f"modal_adj_{language}.txt"),
        modal_verbs=_item_set("modal_verbs_de.txt") if language == "de" else frozenset(),
        relative_pronouns=_item_set(f"rel_pron_{language}.txt"),
        personal_pronouns=_item_set(f"pers_pron_{language}.txt"),
    )
