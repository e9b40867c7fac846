"""Text normalization: tokenizing, newsgroup noise stripping, stop words.

The tokenizer lowercases and splits on every non-alphanumeric character, so
"U.S." becomes ["u", "s"]. No stemming or lemmatization.
"""

from __future__ import annotations

import hashlib
import re
from pathlib import Path

from .errors import IoError

_HEADER_FIRST_LINE = re.compile(r"^[A-Za-z][A-Za-z0-9-]*:\s")
_ATTRIBUTION = re.compile(r"(writes:|wrote:)\s*$")
_TOKEN_RUN = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_STOPWORDS_PATH = Path(__file__).parent / "data" / "stopwords.txt"

TOKENIZER_ID = "lower-alnum-runs-v1"


def normalize_and_tokenize(text: str) -> list[str]:
    """Lowercase, then keep maximal letter/digit runs as tokens in order."""
    return _TOKEN_RUN.findall(text.lower())


def strip_newsgroup_noise(raw: str) -> str:
    """Drop a leading header block plus quoted reply lines.

    The header block (everything up to the first blank line) is removed only
    when the first line looks like `Name: value`, so plain article text passes
    through untouched. Quoted lines start with ">" after optional spaces; an
    attribution line ending in "writes:" / "wrote:" goes too when a quoted
    block immediately follows it.
    """
    lines = raw.split("\n")
    start = 0
    if lines and _HEADER_FIRST_LINE.match(lines[0]):
        for i, line in enumerate(lines):
            if line.strip() == "":
                start = i + 1
                break
        else:
            start = len(lines)
    kept = []
    body = lines[start:]
    for i, line in enumerate(body):
        if line.lstrip().startswith(">"):
            continue
        if _ATTRIBUTION.search(line) and i + 1 < len(body) and body[i + 1].lstrip().startswith(">"):
            continue
        kept.append(line)
    return "\n".join(kept)


def remove_stopwords(tokens: list[str], stoplist: set[str]) -> list[str]:
    """Filter tokens against the stop list; used for the TF-IDF branch only."""
    return [t for t in tokens if t not in stoplist]


def load_stopwords(path: str | Path = DEFAULT_STOPWORDS_PATH) -> set[str]:
    """One lowercase word per line; blank lines ignored."""
    try:
        with open(path, encoding="utf-8") as f:
            return {line.strip() for line in f if line.strip()}
    except OSError as e:
        raise IoError(f"cannot read stop list {path}: {e}")


def stopword_hash(stoplist: set[str]) -> str:
    """Stable digest of tokenizer identity + stop list, stored in checkpoints."""
    payload = TOKENIZER_ID + "\n" + "\n".join(sorted(stoplist))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()
