"""Influence-guided poisoning of a decayed-bag sequential recommender."""

from ._seqpoison import *  # noqa: F401,F403
from ._seqpoison import __version__  # noqa: F401
