"""Rule-based social-media tokenizer.

Lowercases input, collapses URLs / user mentions / bare numbers to the
sentinel tokens ``<url>`` / ``<user>`` / ``<num>``, keeps hashtags and
emoticons intact, and emits punctuation runs as single tokens.

Re-tokenizing the space-joined output of :func:`tokenize` reproduces the
token list unchanged; downstream phrase learning and token-level filters
rely on that round-trip.
"""
from __future__ import annotations

import re

URL_TOKEN = "<url>"
USER_TOKEN = "<user>"
NUM_TOKEN = "<num>"

# Alternation order matters: sentinels round-trip first, catch-all
# punctuation runs last. Scanning is left-to-right, so emoticons are only
# recognised at token-initial positions; anything glued into a larger
# punctuation run stays one run token.
_EMOTICON = r"""
    \^_\^ | <3
  | [:;=8] [-'o*^]? [)(\][dpb3/\\}{@|]
  | [)(\][}{/\\|] [-'o*^]? [:;=8]
"""

_TOKEN_RE = re.compile(
    rf"""
      (?P<sent> <url> | <user> | <num> )
    | (?P<url>  https?://\S+ | www\.\S+ )
    | (?P<user> @\w+ )
    | (?P<hash> \#\w+ )
    | (?P<emo>  {_EMOTICON} )
    | (?P<num>  [0-9]+ (?: [.,:][0-9]+ )* (?!\w) )
    | (?P<word> \w+ (?: '\w+ )* )
    | (?P<punc> [^\w\s]+ )
    """,
    re.VERBOSE,
)

_GROUP_SENTINELS = {"url": URL_TOKEN, "user": USER_TOKEN, "num": NUM_TOKEN}


def tokenize(text: str) -> list[str]:
    """Split ``text`` into lowercased tokens under the rules above."""
    tokens = []
    for match in _TOKEN_RE.finditer(text.lower()):
        kind = match.lastgroup
        if kind in _GROUP_SENTINELS:
            tokens.append(_GROUP_SENTINELS[kind])
        else:
            tokens.append(match.group())
    return tokens
