"""Hierarchical geographic-intent tagging from keyword text against a
curated gazetteer (continent / country / city levels)."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

from ..ingest import normalize_keyword

logger = logging.getLogger(__name__)

CONTINENTS = ("europe", "north america", "south america", "asia",
              "africa", "oceania", "antarctica")

_LEVEL_RANK = {"continent": 0, "country": 1, "city": 2}


@dataclass(frozen=True)
class GeoTag:
    continent: Optional[str] = None
    country: Optional[str] = None
    city: Optional[str] = None

    @property
    def level(self) -> Optional[str]:
        if self.city:
            return "city"
        if self.country:
            return "country"
        if self.continent:
            return "continent"
        return None

    def label(self, resolution: str) -> Optional[str]:
        return {"continent": self.continent, "country": self.country,
                "city": self.city}[resolution]


@dataclass(frozen=True)
class _Entry:
    level: str
    city: Optional[str]
    country: Optional[str]
    continent: str


class Gazetteer:
    """Alias table with hierarchy-consistent city -> country -> continent
    mappings. Aliases are canonical keyword text and may be multi-token."""

    def __init__(self, entries: dict[str, _Entry]):
        self.entries = entries
        self.max_alias_tokens = max(
            (len(a.split()) for a in entries), default=1)
        self._check_hierarchy()

    def _check_hierarchy(self) -> None:
        city_country: dict[str, str] = {}
        country_cont: dict[str, str] = {}
        for entry in self.entries.values():
            if entry.continent not in CONTINENTS:
                raise ValueError(f"unknown continent {entry.continent!r}")
            if entry.country:
                prev = country_cont.setdefault(entry.country, entry.continent)
                if prev != entry.continent:
                    raise ValueError(f"country {entry.country!r} maps to two continents")
            if entry.city:
                prev = city_country.setdefault(entry.city, entry.country)
                if prev != entry.country:
                    raise ValueError(f"city {entry.city!r} maps to two countries")

    @classmethod
    def from_csv(cls, path: str | Path) -> "Gazetteer":
        entries: dict[str, _Entry] = {}
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                alias = normalize_keyword(row["alias"])
                if not alias:
                    continue
                entries[alias] = _Entry(
                    level=row["level"],
                    city=row["city"] or None,
                    country=row["country"] or None,
                    continent=row["continent"],
                )
        return cls(entries)


def load_bundled_gazetteer() -> Gazetteer:
    with resources.as_file(
            resources.files("cpccast.data").joinpath("gazetteer.csv")) as path:
        return Gazetteer.from_csv(path)


def save_geo_tags(tags: list[GeoTag], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["keyword_id", "continent", "country", "city"])
        for i, tag in enumerate(tags):
            writer.writerow([i, tag.continent or "", tag.country or "",
                             tag.city or ""])


def load_geo_tags(path: str | Path) -> list[GeoTag]:
    tags = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            tags.append(GeoTag(continent=row["continent"] or None,
                               country=row["country"] or None,
                               city=row["city"] or None))
    return tags


def tag_geography(keyword: str, gazetteer: Gazetteer) -> GeoTag:
    """Match gazetteer aliases as contiguous token spans of the canonical
    keyword. Longer aliases are preferred over shorter ones; among the
    surviving matches the most specific level wins, ties by earliest
    position. The hierarchy is completed upward from the matched level."""
    tokens = normalize_keyword(keyword).split()
    matches: list[tuple[int, int, int, _Entry]] = []  # (-alias_len, rank, pos, entry)
    for width in range(min(gazetteer.max_alias_tokens, len(tokens)), 0, -1):
        for pos in range(len(tokens) - width + 1):
            alias = " ".join(tokens[pos:pos + width])
            entry = gazetteer.entries.get(alias)
            if entry is not None:
                matches.append((-width, -_LEVEL_RANK[entry.level], pos, entry))
    if not matches:
        return GeoTag()
    # most specific level first, then longest alias, then earliest position
    matches.sort(key=lambda m: (m[1], m[0], m[2]))
    entry = matches[0][3]
    return GeoTag(continent=entry.continent, country=entry.country,
                  city=entry.city)
