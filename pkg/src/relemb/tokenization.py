"""Text tokenization shared by documents and queries.

One rule everywhere: lowercase, split on any non-alphanumeric character,
drop stopwords, no stemming. Keeping documents and queries symmetric means
a query term always matches its surface form in the index.
"""

from __future__ import annotations

import re
from importlib import resources

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)

_DEFAULT_STOPWORD_FILE = "stopwords_inquery.txt"


def tokenize(text: str, stopwords: frozenset[str] | set[str] = frozenset()) -> list[str]:
    """Split ``text`` into lowercased alphanumeric tokens, minus stopwords."""
    return [t for t in _TOKEN.findall(text.lower()) if t not in stopwords]


def load_stopwords(path: str | None = None) -> frozenset[str]:
    """Read a one-word-per-line stopword file.

    Without a path, returns the bundled INQUERY-style English list.
    """
    if path is None:
        data = resources.files("relemb.data").joinpath(_DEFAULT_STOPWORD_FILE).read_text("utf-8")
    else:
        with open(path, encoding="utf-8") as f:
            data = f.read()
    return frozenset(w.strip().lower() for w in data.splitlines() if w.strip())
