"""Corpus handling: tokenization, collocations, posts, slicing, vocabularies."""
from .tokenize import tokenize, URL_TOKEN, USER_TOKEN, NUM_TOKEN
from .phrases import (
    PhraseModel,
    phrase_score,
    learn_phrases,
    apply_phrases,
    save_phrases,
    load_phrases,
)
from .posts import (
    Post,
    PostStore,
    ingest_posts,
    filter_posts,
    TermBlocklist,
    MetaBlocklist,
    PredicateFilter,
    DEFAULT_SCHEMA,
)
from .vocab import Vocabulary
from .slicing import (
    Period,
    TimeSlicedCorpus,
    DocumentTermMatrix,
    slice_corpus,
    learn_period_phrasers,
    build_vocabulary,
    aggregate_users,
    check_disjoint,
)

__all__ = [
    "tokenize",
    "URL_TOKEN",
    "USER_TOKEN",
    "NUM_TOKEN",
    "PhraseModel",
    "phrase_score",
    "learn_phrases",
    "apply_phrases",
    "save_phrases",
    "load_phrases",
    "Post",
    "PostStore",
    "ingest_posts",
    "filter_posts",
    "TermBlocklist",
    "MetaBlocklist",
    "PredicateFilter",
    "DEFAULT_SCHEMA",
    "Vocabulary",
    "Period",
    "TimeSlicedCorpus",
    "DocumentTermMatrix",
    "slice_corpus",
    "learn_period_phrasers",
    "build_vocabulary",
    "aggregate_users",
    "check_disjoint",
]
