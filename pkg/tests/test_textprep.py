from hypothesis import given, settings
from hypothesis import strategies as st

from agff.textprep import (DEFAULT_STOPWORDS_PATH, load_stopwords,
                           normalize_and_tokenize, remove_stopwords,
                           stopword_hash, strip_newsgroup_noise)


def test_tokenize_basic():
    assert normalize_and_tokenize("Hello, World!") == ["hello", "world"]


def test_tokenize_empty():
    assert normalize_and_tokenize("") == []


def test_tokenize_splits_on_punctuation_and_keeps_digits():
    assert normalize_and_tokenize("U.S. stocks rose 2%") == ["u", "s", "stocks", "rose", "2"]


def test_tokens_contain_no_separators():
    for tok in normalize_and_tokenize("a_b c-d e.f 1+2"):
        assert tok and all(ch.isalnum() for ch in tok)


@given(st.text(max_size=80))
@settings(max_examples=200)
def test_tokenize_idempotent_on_its_own_output(text):
    once = normalize_and_tokenize(text)
    assert normalize_and_tokenize(" ".join(once)) == once


def test_strip_header_block():
    assert strip_newsgroup_noise("From: a@b\nSubject: x\n\nbody") == "body"


def test_no_header_passes_through():
    raw = "body only, no header"
    assert strip_newsgroup_noise(raw) == raw


def test_quoted_lines_dropped():
    assert strip_newsgroup_noise("line1\n> quoted\nline2") == "line1\nline2"


def test_attribution_line_before_quote_dropped():
    raw = "intro\nsomeone@host writes:\n> old text\nreply"
    assert strip_newsgroup_noise(raw) == "intro\nreply"


def test_attribution_without_following_quote_is_kept():
    raw = "he wrote:\nnothing quoted here"
    assert strip_newsgroup_noise(raw) == raw


@given(st.text(max_size=300))
@settings(max_examples=200)
def test_strip_never_lengthens(raw):
    assert len(strip_newsgroup_noise(raw)) <= len(raw)


@given(st.lists(st.text(alphabet="abcdefg ", max_size=10), max_size=30))
@settings(max_examples=100)
def test_unquoted_headerless_text_unchanged(lines):
    # alphabet has no ':' or '>' so neither removal rule can fire
    raw = "\n".join(lines)
    assert strip_newsgroup_noise(raw) == raw


def test_remove_stopwords_examples():
    assert remove_stopwords(["the", "game"], {"the"}) == ["game"]
    assert remove_stopwords([], {"the"}) == []
    assert remove_stopwords(["a", "the"], {"a", "the"}) == []


@given(st.lists(st.sampled_from(["alpha", "beta", "gamma", "the", "of"]), max_size=20),
       st.sets(st.sampled_from(["the", "of", "beta"])))
@settings(max_examples=100)
def test_remove_stopwords_is_a_subsequence(tokens, stoplist):
    out = remove_stopwords(tokens, stoplist)
    it = iter(tokens)
    assert all(any(t == o for t in it) for o in out)
    assert not set(out) & stoplist


def test_shipped_stopword_list_has_179_lowercase_words():
    words = load_stopwords(DEFAULT_STOPWORDS_PATH)
    assert len(words) == 179
    assert all(w == w.lower() and w.strip() == w for w in words)
    assert "the" in words and "is" in words


def test_stopword_hash_is_order_insensitive_and_content_sensitive():
    assert stopword_hash({"a", "b"}) == stopword_hash({"b", "a"})
    assert stopword_hash({"a", "b"}) != stopword_hash({"a", "c"})
