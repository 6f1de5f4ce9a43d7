"""Event parsing, keyword normalization, domain extraction, and the
relevance / domain-quality filters."""

import json
from datetime import date, timedelta

from hypothesis import given, strategies as st

from cpccast import ingest
from conftest import event_line


class TestParseEvents:

    def test_field_passthrough(self):
        events, rejections = ingest.parse_events([event_line(clicks=4, cost=10.0)])
        assert not rejections
        ev = events[0]
        assert ev.clicks == 4 and ev.cost == 10.0
        assert ev.keyword == "car rental lisbon"
        assert ev.date == date(2021, 3, 2)

    def test_bad_date_rejected(self):
        _, rejections = ingest.parse_events([event_line(day="2021-13-40")])
        assert len(rejections) == 1
        assert "date" in rejections[0].reason

    def test_malformed_line_does_not_abort_stream(self):
        lines = [event_line(clicks=1), "{not json", event_line(clicks=2)]
        events, rejections = ingest.parse_events(lines)
        assert len(events) == 2
        assert len(rejections) == 1
        assert rejections[0].line_no == 2

    def test_negative_amounts_rejected(self):
        for field in ("impressions", "clicks", "cost"):
            _, rejections = ingest.parse_events([event_line(**{field: -1})])
            assert rejections, f"negative {field} accepted"

    def test_missing_cost_parses_as_none(self):
        line = json.dumps({"keyword": "car rental", "date": "2021-03-02",
                           "impressions": 5, "clicks": 2})
        events, rejections = ingest.parse_events([line])
        assert not rejections
        assert events[0].cost is None

    def test_parse_serialize_roundtrip(self):
        lines = [event_line(clicks=c, cost=1.5 * c) for c in range(3)]
        events, _ = ingest.parse_events(lines)
        again, _ = ingest.parse_events(ingest.serialize_event(e) for e in events)
        assert again == events


class TestNormalizeKeyword:

    def test_punctuation_and_spacing(self):
        assert ingest.normalize_keyword("Car   Rental!!") == "car rental"

    def test_transliteration(self):
        assert ingest.normalize_keyword("car-rental Zürich") == "car rental zurich"
        assert ingest.normalize_keyword("Øresund køb") == "oresund kob"
        assert ingest.normalize_keyword("straße") == "strasse"

    def test_identity_on_canonical(self):
        assert ingest.normalize_keyword("car rental lisbon") == "car rental lisbon"

    def test_unknown_nonascii_dropped(self):
        assert ingest.normalize_keyword("car 租赁 rental") == "car rental"

    @given(st.text(max_size=60))
    def test_idempotent(self, raw):
        once = ingest.normalize_keyword(raw)
        assert ingest.normalize_keyword(once) == once

    @given(st.text(max_size=60))
    def test_output_is_canonical(self, raw):
        out = ingest.normalize_keyword(raw)
        assert out == out.lower()
        assert "  " not in out and out == out.strip()
        assert out.isascii()


class TestExtractDomain:

    def test_public_suffix_aware(self):
        # bundled snapshot carries the co.uk rule
        assert ingest.extract_domain("https://www.example.co.uk/offers?x=1") \
            == "example.co.uk"

    def test_bare_domain(self):
        assert ingest.extract_domain("example.com") == "example.com"

    def test_unparsable(self):
        assert ingest.extract_domain("not a url") is None
        assert ingest.extract_domain("") is None

    def test_plain_suffix(self):
        assert ingest.extract_domain("https://blog.example.com/a") == "example.com"

    def test_wildcard_and_exception_rules(self):
        # *.ck makes shop.ck a public suffix; !www.ck is carved back out
        assert ingest.extract_domain("http://foo.shop.ck/x") == "foo.shop.ck"
        assert ingest.extract_domain("http://www.ck/x") == "www.ck"


def _mk(keyword="car rental porto", query="", cost=1.0, clicks=1,
        url="https://a.example.com/", day=date(2021, 3, 1)):
    return ingest.RawEvent(keyword=keyword, query=query, url=url,
                           device="mobile", search_type="paid",
                           impressions=10, clicks=clicks, cost=cost, date=day)


class TestFilterRelevant:

    def test_both_tokens_in_keyword(self):
        assert ingest.filter_relevant([_mk(keyword="car rental porto")])

    def test_tokens_absent(self):
        ev = _mk(keyword="cheap flights", query="hotel deals")
        assert ingest.filter_relevant([ev]) == []

    def test_retained_via_query(self):
        ev = _mk(keyword="rent a car", query="car rental faro")
        assert ingest.filter_relevant([ev]) == [ev]

    def test_token_not_substring(self):
        ev = _mk(keyword="carpet rentals")
        assert ingest.filter_relevant([ev]) == []

    def test_unobservable_cpc_dropped(self):
        assert ingest.filter_relevant([_mk(cost=None)]) == []
        assert ingest.filter_relevant([_mk(clicks=None)]) == []

    def test_idempotent(self):
        events = [_mk(), _mk(keyword="van hire"), _mk(query="car rental")]
        once = ingest.filter_relevant(events)
        assert ingest.filter_relevant(once) == once


class TestFilterDomains:

    def _events_for_domain(self, domain, n_days, per_day=1, start=date(2021, 1, 1)):
        return [_mk(url=f"https://{domain}/p{j}", day=start + timedelta(days=i))
                for i in range(n_days) for j in range(per_day)]

    def test_conjunctive_exclusion(self):
        # bad.example: 20 of 40 dates missing, 20 mentions -> excluded;
        # anchor.example pins the 40-day global range
        bad = self._events_for_domain("bad.example", 20)
        anchor = self._events_for_domain("anchor.example", 40)
        kept, stats = ingest.filter_domains(bad + anchor, max_missing=15,
                                            min_mentions=1000)
        assert stats["bad.example"].missing_dates == 20
        assert all(ingest.extract_domain(e.url) != "bad.example" for e in kept)
        assert len(kept) == 40

    def test_many_mentions_retained_despite_missing_dates(self):
        busy = self._events_for_domain("busy.example", 20, per_day=60)
        anchor = self._events_for_domain("anchor.example", 40)
        kept, stats = ingest.filter_domains(busy + anchor, max_missing=15,
                                            min_mentions=1000)
        assert stats["busy.example"].total_mentions == 1200
        assert stats["busy.example"].missing_dates == 20
        assert len(kept) == len(busy) + len(anchor)

    def test_few_mentions_retained_when_dates_complete(self):
        tiny = self._events_for_domain("tiny.example", 10)
        kept, _ = ingest.filter_domains(tiny, max_missing=15, min_mentions=1000)
        assert len(kept) == 10  # missing_dates = 0, first clause fails

    def test_stats_match_brute_force_recount(self):
        events = (self._events_for_domain("a.example", 5)
                  + self._events_for_domain("b.example", 3, per_day=2))
        _, stats = ingest.filter_domains(events)
        lo = min(e.date for e in events)
        hi = max(e.date for e in events)
        for dom in ("a.example", "b.example"):
            mine = [e for e in events if ingest.extract_domain(e.url) == dom]
            days = {e.date for e in mine}
            assert stats[dom].total_mentions == len(mine)
            assert stats[dom].missing_dates == (hi - lo).days + 1 - len(days)

    def test_output_subset_of_input(self):
        events = self._events_for_domain("a.example", 4)
        kept, _ = ingest.filter_domains(events)
        assert all(e in events for e in kept)

    def test_domainless_events_kept(self):
        ev = _mk(url="not a url")
        kept, stats = ingest.filter_domains([ev])
        assert kept == [ev] and stats == {}


class TestDedupeAndCanonicalize:

    def test_exact_duplicate_drop(self):
        ev = _mk()
        assert ingest.dedupe_events([ev, ev, _mk(cost=2.0)]) == [ev, _mk(cost=2.0)]

    def test_canonical_ids_sorted_and_dense(self):
        kws = ingest.canonicalize_keywords(["B rental", "a car", "B Rental!", ""])
        assert [k.canonical for k in kws] == ["a car", "b rental"]
        assert [k.id for k in kws] == [0, 1]

    def test_empty_canonical_dropped(self):
        assert ingest.canonicalize_keywords(["!!!", "  "]) == []
