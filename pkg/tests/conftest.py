from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixture_feed import FeedSpec, build_fixture_feed  # noqa: E402


@pytest.fixture(scope="session")
def feed_spec(tmp_path_factory) -> FeedSpec:
    """The 8-build fixture feed, authored once per session."""
    root = tmp_path_factory.mktemp("feed")
    return build_fixture_feed(root)


@pytest.fixture()
def feed(feed_spec):
    from repairbot.feeds import FixtureFeed

    return FixtureFeed(feed_spec.root)
