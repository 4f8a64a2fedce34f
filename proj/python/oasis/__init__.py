"""Python bindings for the LLM-Oasis toolkit."""

import json as _json

from . import _oasis
from ._oasis import (  # noqa: F401
    GenerationParseError,
    HashedEmbedder,
    InvalidArgument,
    MetricUndefined,
    OasisError,
    PassageIndex,
    RuleNli,
    UnparseableVerdict,
    balanced_accuracy,
    build_prompt,
    build_unified_prompt,
    easiness,
    in_batch_loss,
    parse_llm_verdict,
    rag_instructions,
    rouge1_f1,
    run_cli,
    sample_index,
    split_sentences,
    validate,
    zero_shot_instructions,
)


def window_passages(page_id, sentences, size=5, stride=1):
    return _json.loads(_oasis.window_passages(page_id, sentences, size, stride))


def parse_generation_output(raw):
    return _json.loads(_oasis.parse_generation_output(raw))


def derive_retriever_pairs(record):
    return _json.loads(_oasis.derive_retriever_pairs(_json.dumps(record)))


def derive_nli_triplets(record, neutral_premises=None):
    return _json.loads(_oasis.derive_nli_triplets(_json.dumps(record), neutral_premises))


def verify_claim(claim, ranked, nli):
    """`ranked` is a list of (passage_id, text) pairs, best first."""
    return _json.loads(_oasis.verify_claim(claim, ranked, nli))
