"""Raw ad-event ingestion: parsing, keyword normalization, domain
extraction, and relevance / domain-quality filtering."""

from __future__ import annotations

import json
import logging
import string
import unicodedata
from dataclasses import dataclass
from datetime import date
from importlib import resources
from typing import Iterable, Optional, TextIO
from urllib.parse import urlsplit

logger = logging.getLogger(__name__)

DEFAULT_MAX_MISSING_DATES = 15
DEFAULT_MIN_MENTIONS = 1000


# ---------------------------------------------------------------------------
# Event records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RawEvent:
    """One advertising log line. clicks > impressions is allowed (real logs
    violate it); cost/clicks may be None when the source field was absent."""

    keyword: str
    query: str
    url: str
    device: str
    search_type: str
    impressions: int
    clicks: Optional[int]
    cost: Optional[float]
    date: date


@dataclass(frozen=True)
class CanonicalKeyword:
    id: int
    raw: str
    canonical: str


@dataclass
class Rejection:
    line_no: int
    reason: str


_EVENT_FIELDS = ("keyword", "query", "url", "device", "search_type",
                 "impressions", "clicks", "cost", "date")


def _opt_int(value) -> Optional[int]:
    if value is None or value == "":
        return None
    return int(value)


def _opt_float(value) -> Optional[float]:
    if value is None or value == "":
        return None
    return float(value)


def parse_event_line(line: str) -> RawEvent:
    """Parse one JSON event record. Raises ValueError with a short reason
    on any malformed field."""
    try:
        obj = json.loads(line)
    except json.JSONDecodeError:
        raise ValueError("bad json")
    if not isinstance(obj, dict):
        raise ValueError("not an object")
    try:
        day = date.fromisoformat(str(obj["date"]))
    except KeyError:
        raise ValueError("missing date")
    except ValueError:
        raise ValueError("bad date")
    try:
        impressions = _opt_int(obj.get("impressions"))
        clicks = _opt_int(obj.get("clicks"))
        cost = _opt_float(obj.get("cost"))
    except (TypeError, ValueError):
        raise ValueError("bad numeric field")
    if impressions is None:
        impressions = 0
    if impressions < 0 or (clicks is not None and clicks < 0):
        raise ValueError("negative count")
    if cost is not None and cost < 0:
        raise ValueError("negative cost")
    return RawEvent(
        keyword=str(obj.get("keyword", "")),
        query=str(obj.get("query", "")),
        url=str(obj.get("url", "")),
        device=str(obj.get("device", "")),
        search_type=str(obj.get("search_type", "")),
        impressions=impressions,
        clicks=clicks,
        cost=cost,
        date=day,
    )


def serialize_event(event: RawEvent) -> str:
    """Inverse of parse_event_line for retained events (round-trip exact)."""
    return json.dumps(
        {
            "keyword": event.keyword,
            "query": event.query,
            "url": event.url,
            "device": event.device,
            "search_type": event.search_type,
            "impressions": event.impressions,
            "clicks": event.clicks,
            "cost": event.cost,
            "date": event.date.isoformat(),
        },
        sort_keys=False,
    )


def parse_events(source: Iterable[str] | TextIO) -> tuple[list[RawEvent], list[Rejection]]:
    """Parse a line-delimited event stream. Malformed lines are logged and
    counted, never abort the stream."""
    events: list[RawEvent] = []
    rejections: list[Rejection] = []
    for line_no, line in enumerate(source, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            events.append(parse_event_line(line))
        except ValueError as exc:
            rejections.append(Rejection(line_no, str(exc)))
            logger.debug("rejected line %d: %s", line_no, exc)
    return events, rejections


# ---------------------------------------------------------------------------
# Keyword normalization
# ---------------------------------------------------------------------------

def _build_translit_table() -> dict[int, str]:
    """Static ASCII transliteration table: Latin-1 Supplement and Latin
    Extended-A letters plus common symbols. Built once at import; unknown
    non-ASCII characters are handled by dropping them in normalize_keyword."""
    table: dict[int, str] = {}
    for cp in range(0x00C0, 0x0180):
        ch = chr(cp)
        decomp = unicodedata.normalize("NFKD", ch)
        ascii_form = "".join(c for c in decomp if ord(c) < 128 and c.isalpha())
        if ascii_form:
            table[cp] = ascii_form
    # letters with no NFKD decomposition
    table.update({
        ord("ß"): "ss", ord("æ"): "ae", ord("Æ"): "AE",
        ord("ø"): "o", ord("Ø"): "O", ord("đ"): "d", ord("Đ"): "D",
        ord("þ"): "th", ord("Þ"): "TH", ord("ð"): "d", ord("Ð"): "D",
        ord("ł"): "l", ord("Ł"): "L", ord("ı"): "i", ord("ŋ"): "ng",
        ord("œ"): "oe", ord("Œ"): "OE",
    })
    # common symbols that should act as separators
    for ch in "–—‐‑‒―…·•«»“”‘’„‟":
        table[ord(ch)] = " "
    table[ord("&")] = " and "
    return table


TRANSLIT_TABLE = _build_translit_table()

_PUNCT_TO_SPACE = {ord(c): " " for c in string.punctuation}


def normalize_keyword(raw: str) -> str:
    """Canonicalize keyword text: transliterate, lowercase, strip
    punctuation, collapse whitespace. Idempotent; may return ""."""
    text = raw.translate(TRANSLIT_TABLE)
    text = text.lower()
    text = text.translate(_PUNCT_TO_SPACE)
    text = "".join(c if c.isascii() and (c.isalnum() or c == " ") else " " if c.isspace() else ""
                   for c in text)
    return " ".join(text.split())


# ---------------------------------------------------------------------------
# Registrable-domain extraction (public-suffix aware)
# ---------------------------------------------------------------------------

class SuffixList:
    """Public-suffix rules from the bundled snapshot."""

    def __init__(self, rules: Iterable[str]):
        self.exact: set[str] = set()
        self.wildcard: set[str] = set()   # "*.ck" stored as "ck"
        self.exception: set[str] = set()  # "!www.ck" stored as "www.ck"
        for rule in rules:
            rule = rule.strip()
            if not rule or rule.startswith("//"):
                continue
            if rule.startswith("!"):
                self.exception.add(rule[1:])
            elif rule.startswith("*."):
                self.wildcard.add(rule[2:])
            else:
                self.exact.add(rule)

    def suffix_length(self, labels: list[str]) -> int:
        """Number of labels in the public suffix of a label list, per the
        standard matching algorithm (longest match wins, exceptions beat
        wildcards, unknown TLDs match one label)."""
        best = 1
        for i in range(len(labels)):
            candidate = ".".join(labels[i:])
            if candidate in self.exception:
                return len(labels) - i - 1
            if candidate in self.exact:
                best = max(best, len(labels) - i)
            parent = ".".join(labels[i + 1:])
            if parent and parent in self.wildcard:
                best = max(best, len(labels) - i)
        return best


def _load_bundled_suffixes() -> SuffixList:
    text = resources.files("cpccast.data").joinpath("public_suffixes.dat").read_text()
    return SuffixList(text.splitlines())


_SUFFIXES = _load_bundled_suffixes()


def extract_domain(url: str, suffixes: SuffixList | None = None) -> Optional[str]:
    """Registrable domain of a URL or bare hostname; None if unparsable."""
    suffixes = suffixes or _SUFFIXES
    text = url.strip().lower()
    if not text:
        return None
    host = urlsplit(text).netloc if "//" in text else ""
    if not host:
        # bare domain or schemeless URL
        host = text.split("/")[0]
    host = host.split("@")[-1].split(":")[0].strip(".")
    if not host or " " in host or "." not in host:
        return None
    labels = host.split(".")
    if any(not lbl for lbl in labels):
        return None
    n_suffix = suffixes.suffix_length(labels)
    if n_suffix >= len(labels):
        return None  # the host is itself a public suffix
    return ".".join(labels[-(n_suffix + 1):])


# ---------------------------------------------------------------------------
# Relevance and domain-quality filters
# ---------------------------------------------------------------------------

def _has_intent(text: str) -> bool:
    tokens = set(normalize_keyword(text).split())
    return "car" in tokens and "rental" in tokens


def filter_relevant(events: Iterable[RawEvent]) -> list[RawEvent]:
    """Keep events whose normalized keyword OR query carries both the
    "car" and "rental" tokens, and whose CPC is observable (cost and
    clicks both present)."""
    kept = []
    for ev in events:
        if ev.cost is None or ev.clicks is None:
            continue
        if _has_intent(ev.keyword) or _has_intent(ev.query):
            kept.append(ev)
    return kept


@dataclass
class DomainStats:
    domain: str
    total_mentions: int
    missing_dates: int


def compute_domain_stats(events: list[RawEvent]) -> dict[str, DomainStats]:
    """Per-domain mention counts and missing daily dates over the global
    min-max date range of the event set."""
    if not events:
        return {}
    lo = min(ev.date for ev in events)
    hi = max(ev.date for ev in events)
    span_days = (hi - lo).days + 1
    seen_dates: dict[str, set[date]] = {}
    mentions: dict[str, int] = {}
    for ev in events:
        dom = extract_domain(ev.url)
        if dom is None:
            continue
        mentions[dom] = mentions.get(dom, 0) + 1
        seen_dates.setdefault(dom, set()).add(ev.date)
    return {
        dom: DomainStats(dom, mentions[dom], span_days - len(seen_dates[dom]))
        for dom in sorted(mentions)
    }


def filter_domains(
    events: list[RawEvent],
    max_missing: int = DEFAULT_MAX_MISSING_DATES,
    min_mentions: int = DEFAULT_MIN_MENTIONS,
) -> tuple[list[RawEvent], dict[str, DomainStats]]:
    """Drop events from low-quality domains. A domain is excluded iff it
    has BOTH more than max_missing missing dates AND fewer than
    min_mentions total mentions (conjunctive rule). Events without a
    parsable domain are kept."""
    stats = compute_domain_stats(events)
    excluded = {
        dom for dom, st in stats.items()
        if st.missing_dates > max_missing and st.total_mentions < min_mentions
    }
    kept = [ev for ev in events if extract_domain(ev.url) not in excluded]
    return kept, stats


def dedupe_events(events: list[RawEvent]) -> list[RawEvent]:
    """Exact-duplicate drop, preserving first occurrence order."""
    seen = set()
    out = []
    for ev in events:
        key = (ev.keyword, ev.query, ev.url, ev.device, ev.search_type,
               ev.impressions, ev.clicks, ev.cost, ev.date)
        if key not in seen:
            seen.add(key)
            out.append(ev)
    return out


def canonicalize_keywords(raws: Iterable[str]) -> list[CanonicalKeyword]:
    """Dense-id keyword table over distinct canonical forms, ids assigned
    in sorted canonical order. Empty canonicals are dropped."""
    by_canon: dict[str, str] = {}
    for raw in raws:
        canon = normalize_keyword(raw)
        if canon and canon not in by_canon:
            by_canon[canon] = raw
    return [CanonicalKeyword(i, by_canon[c], c) for i, c in enumerate(sorted(by_canon))]
