"""Python interface to the esdsearch dataset retrieval engine."""

import json
import os

from ._core import (
    DataError,
    Error,
    InvalidArgument,
    IoError,
    ProviderError,
    __version__,
    average_precision,
    detect_abbreviations,
    expand_abbreviations,
    fuzzy_match,
    reciprocal_rank,
    recall_at_k,
    tokenize,
    understand,
)
from ._core import _Runtime

__all__ = [
    "Engine",
    "DataError",
    "Error",
    "InvalidArgument",
    "IoError",
    "ProviderError",
    "__version__",
    "average_precision",
    "detect_abbreviations",
    "expand_abbreviations",
    "fuzzy_match",
    "reciprocal_rank",
    "recall_at_k",
    "tokenize",
    "understand",
]


class Engine:
    """A loaded catalog with both indexes, ready to search.

    Keyword arguments are configuration keys (``catalog``, ``filter``,
    ``reranker``, ...). Relative paths resolve against ``base_dir``, which
    defaults to the current directory.
    """

    def __init__(self, base_dir=None, **config):
        self._rt = _Runtime(json.dumps(config) if config else "", base_dir or os.getcwd())

    def __len__(self):
        return self._rt.size

    def search(self, query, explain=False):
        return json.loads(self._rt.search_json(query, explain))

    def ranked_ids(self, query, depth=10):
        return self._rt.ranked_ids(query, depth)

    def evaluate(self, bench, ks=(10, 20, 50, 100), threads=1):
        return json.loads(self._rt.evaluate_json(os.fspath(bench), list(ks), threads))
