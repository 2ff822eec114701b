"""Tokenizer unit tests: frozen cases plus round-trip properties."""
import random
import string

from semshift.corpus import tokenize, URL_TOKEN, USER_TOKEN, NUM_TOKEN


def test_empty_and_whitespace():
    assert tokenize("") == []
    assert tokenize("   \n\t ") == []


def test_lowercase_hashtag_punct_run():
    assert tokenize("I LOVE #Mondays!!") == ["i", "love", "#mondays", "!!"]


def test_url_and_mention_sentinels():
    assert tokenize("see https://x.co @bob") == ["see", URL_TOKEN, USER_TOKEN]
    assert tokenize("www.example.com/page") == [URL_TOKEN]


def test_number_sentinel():
    assert tokenize("wait 10 minutes") == ["wait", NUM_TOKEN, "minutes"]
    assert tokenize("pi is 3.14159") == ["pi", "is", NUM_TOKEN]
    assert tokenize("10,000 fans at 1:30") == [NUM_TOKEN, "fans", "at", NUM_TOKEN]


def test_number_glued_to_letters_stays_word():
    assert tokenize("meet at 2pm") == ["meet", "at", "2pm"]
    assert tokenize("room b12") == ["room", "b12"]


def test_emoticons_kept_whole():
    assert tokenize("great day :) <3 ^_^") == ["great", "day", ":)", "<3", "^_^"]
    assert tokenize("oh no :(") == ["oh", "no", ":("]
    assert tokenize("haha :D") == ["haha", ":d"]


def test_apostrophe_words():
    assert tokenize("don't stop believin'") == ["don't", "stop", "believin", "'"]


def test_sentinels_round_trip():
    assert tokenize("<url> <user> <num>") == [URL_TOKEN, USER_TOKEN, NUM_TOKEN]


def test_merged_phrase_tokens_round_trip():
    assert tokenize("new_york is big") == ["new_york", "is", "big"]


def _assert_idempotent(text):
    once = tokenize(text)
    again = tokenize(" ".join(once))
    assert again == once, f"{text!r}: {once} -> {again}"


def test_idempotent_on_handwritten_cases():
    cases = [
        "I LOVE #Mondays!!",
        "see https://x.co @bob",
        "wait 10 minutes :) <3",
        "don't... stop!!! ^_^ (: :-D",
        "email me@example.com or visit www.site.org, ok?",
        "90's music >> today's",
        "!!:) mixed runs <<>>",
    ]
    for text in cases:
        _assert_idempotent(text)


def test_idempotent_on_random_fuzz():
    rng = random.Random(20240611)
    alphabet = string.ascii_letters + string.digits + string.punctuation + "  \t"
    for _ in range(500):
        length = rng.randrange(0, 60)
        text = "".join(rng.choice(alphabet) for _ in range(length))
        _assert_idempotent(text)


def test_tokens_never_contain_whitespace():
    rng = random.Random(7)
    alphabet = string.printable
    for _ in range(200):
        text = "".join(rng.choice(alphabet) for _ in range(rng.randrange(0, 40)))
        for tok in tokenize(text):
            assert tok == tok.strip() and " " not in tok
