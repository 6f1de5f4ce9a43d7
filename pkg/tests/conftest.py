import json
from datetime import date, timedelta

import numpy as np
import pytest

from cpccast.ingest import CanonicalKeyword
from cpccast.panel import WeeklyPanel, week_label


def make_panel(cpc: np.ndarray, start=date(2021, 1, 4), clicks=None,
               observed=None) -> WeeklyPanel:
    """Small panel straight from a CPC grid; volumes derived consistently."""
    cpc = np.asarray(cpc, dtype=float)
    n, t = cpc.shape
    if observed is None:
        observed = ~np.isnan(cpc)
    if clicks is None:
        clicks = np.where(observed, 10.0, 0.0)
    cost = np.where(observed, np.nan_to_num(cpc) * clicks, 0.0)
    return WeeklyPanel(
        keywords=[CanonicalKeyword(i, f"car rental kw{i}", f"car rental kw{i}")
                  for i in range(n)],
        weeks=[week_label(start + timedelta(weeks=w)) for w in range(t)],
        impressions=clicks * 20,
        clicks=clicks,
        cost=cost,
        cpc=cpc.copy(),
        observed_mask=observed.copy(),
        imputed_mask=np.zeros((n, t), dtype=bool),
    )


def event_line(keyword="car rental lisbon", query="", url="https://a.example.com/x",
               device="mobile", search_type="paid", impressions=100,
               clicks=4, cost=10.0, day="2021-03-02") -> str:
    return json.dumps({
        "keyword": keyword, "query": query, "url": url, "device": device,
        "search_type": search_type, "impressions": impressions,
        "clicks": clicks, "cost": cost, "date": day,
    })


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
