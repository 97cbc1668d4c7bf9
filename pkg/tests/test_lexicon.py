from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from psyling.corpus import Corpus, UserDocument
from psyling.lexicon import (Lexicon, LexiconError, extract_features, feature_matrix, load_lexicon, match_token,
                             parse_lexicon)

SMALL = """%
1\tposemo
2\tnegemo
%
happ*\t1
sad\t2
"""


def lex(text=SMALL):
    return parse_lexicon(text.splitlines(True))


def doc(*tokens, uid="u"):
    return UserDocument(uid, tokens)


class TestParse:
    def test_minimal(self):
        L = lex("%\n1\tposemo\n%\nhapp*\t1\n")
        assert L.categories == {1: "posemo"}
        assert L.entries == (("happ*", frozenset({1})),)

    def test_undefined_category_names_line(self):
        with pytest.raises(LexiconError, match="line 5") as info:
            lex("%\n1\tposemo\n%\nhapp*\t1\nbad\t9\n")
        assert info.value.lineno == 5

    def test_88_categories(self, tmp_path):
        header = "".join(f"{i}\tcat{i}\n" for i in range(1, 89))
        path = tmp_path / "cn.dic"
        path.write_text("%\n" + header + "%\n快乐\t1\t2\n", encoding="utf-8")
        L = load_lexicon(path)
        assert len(L.categories) == 88
        assert match_token(L, "快乐") == {1, 2}

    @pytest.mark.parametrize("text", [
        "1\tposemo\n%\nhapp*\t1\n",          # no opening %
        "%\nposemo\n%\nhapp*\t1\n",           # header without id
        "%\n1\tposemo\nhapp*\t1\n",           # header never closed
        "%\n%\nhapp*\t1\n",                   # no categories
        "%\n1\tposemo\n%\n*app\t1\n",         # leading wildcard
        "%\n1\tposemo\n%\nha*p\t1\n",         # infix wildcard
        "%\n1\tposemo\n%\n*\t1\n",            # empty stem
        "%\n1\tposemo\n%\nhappy\n",           # no categories on entry
        "%\n1\tposemo\n%\nhappy\tx\n",        # non-numeric id
        "%\n1\tposemo\n1\tother\n%\nhappy\t1\n",  # id defined twice
    ])
    def test_malformed(self, text):
        with pytest.raises(LexiconError):
            lex(text)

    def test_duplicate_patterns_merged(self):
        L = lex("%\n1\ta\n2\tb\n%\nword\t1\nword\t2\n")
        assert L.entries == (("word", frozenset({1, 2})),)

    def test_invariants_enforced_on_construction(self):
        with pytest.raises(LexiconError):
            Lexicon({1: "a"}, (("x", frozenset({2})),))
        with pytest.raises(LexiconError):
            Lexicon({1: "a"}, (("x", frozenset({1})), ("x", frozenset({1}))))

    def test_file_error_mentions_path(self, tmp_path):
        path = tmp_path / "broken.dic"
        path.write_text("nope\n", encoding="utf-8")
        with pytest.raises(LexiconError, match="broken.dic"):
            load_lexicon(path)


class TestMatch:
    def test_prefix(self):
        assert match_token(lex(), "happy") == {1}

    def test_stem_longer_than_token(self):
        assert match_token(lex(), "hap") == set()

    def test_union_of_exact_and_prefix(self):
        L = lex("%\n1\tposemo\n2\taffect\n%\nhapp*\t1\nhappy\t2\n")
        assert match_token(L, "happy") == {1, 2}

    def test_ascii_case_insensitive(self):
        assert match_token(lex(), "HAPPY") == {1}
        assert match_token(lex(), "Sad") == {2}

    def test_exact_for_other_scripts(self):
        L = lex("%\n1\ta\n%\nÄpfel\t1\n开心*\t1\n")
        assert match_token(L, "äpfel") == set()
        assert match_token(L, "Äpfel") == {1}
        assert match_token(L, "开心果") == {1}

    def test_nested_prefixes(self):
        L = lex("%\n1\ta\n2\tb\n%\nab*\t1\nabc*\t2\n")
        assert match_token(L, "abcd") == {1, 2}
        assert match_token(L, "abd") == {1}


class TestExtract:
    def test_frequencies(self):
        v = extract_features(doc("happy", "sad", "happy"), lex())
        assert v.values == {"posemo": pytest.approx(2 / 3), "negemo": pytest.approx(1 / 3)}
        assert v.doc_length == 3

    def test_empty_document(self):
        v = extract_features(doc(), lex())
        assert v.values == {"posemo": 0.0, "negemo": 0.0} and v.doc_length == 0

    def test_no_matches(self):
        v = extract_features(doc("x", "y"), lex())
        assert v.values == {"posemo": 0.0, "negemo": 0.0} and v.doc_length == 2

    def test_matrix(self):
        c = Corpus([doc("happy", "sad", uid="a"), doc("sad", uid="b")])
        X = feature_matrix(c, lex())
        assert X.column_names == ("posemo", "negemo")
        np.testing.assert_allclose(X.values, [[0.5, 0.5], [0.0, 1.0]])


WORDS = ["happy", "happen", "sad", "sadness", "joy", "x", "快乐", "难过"]
MULTI = lex("%\n1\tpos\n2\tneg\n3\tall\n%\nhapp*\t1\t3\nsad*\t2\njoy\t1\n快乐\t1\t3\n难过\t2\t3\n")


@given(st.lists(st.sampled_from(WORDS), max_size=30))
def test_values_are_count_fractions(tokens):
    v = extract_features(doc(*tokens), MULTI)
    for value in v.values.values():
        assert 0.0 <= value <= 1.0
        count = value * v.doc_length
        assert abs(count - round(count)) < 1e-9


@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=30))
def test_duplication_invariance(tokens):
    a = extract_features(doc(*tokens), MULTI).values
    b = extract_features(doc(*(tokens * 2)), MULTI).values
    assert a == pytest.approx(b, abs=1e-12)


@given(st.lists(st.sampled_from(WORDS), min_size=1, max_size=20),
       st.lists(st.sampled_from(WORDS), min_size=1, max_size=20))
def test_concatenation_is_weighted_average(ta, tb):
    va, vb = extract_features(doc(*ta), MULTI), extract_features(doc(*tb), MULTI)
    vab = extract_features(doc(*(ta + tb)), MULTI)
    for name in vab.values:
        expected = Fraction(round(va.values[name] * len(ta)) + round(vb.values[name] * len(tb)), len(ta) + len(tb))
        assert vab.values[name] == pytest.approx(float(expected), abs=1e-12)


@given(st.sampled_from(WORDS + ["HAPPY", "Joy", "joyful"]))
def test_match_is_pure(token):
    assert match_token(MULTI, token) == match_token(MULTI, token)
