"""Reward-guided decoding: Best-of-N and Speculative Rejection over pluggable models."""

from .decoding import (
    DecodeConfig,
    DecodeOutcome,
    RejectionRoundRecord,
    accepted_indices,
    best_of_n,
    compute_cutoff,
    decode,
    speculative_rejection,
)
from .lm_core import (
    EOS,
    UNK,
    NGramModel,
    ScriptedModel,
    Sequence,
    Vocabulary,
    generate,
    load_model,
    next_token_dist,
    sample_next,
    save_model,
    sequence_log_prob,
    train_ngram,
)
from .memory_model import MemoryBudget, initial_batch_size, would_oom
from .metrics import (
    ComputeTally,
    CorrelationReport,
    improvement_score,
    kendall_tau,
    ols_fit,
    oracle_token_savings,
    pearson,
    relative_compute,
    speedup,
)
from .reward import LexicalReward, LexicalRewardTable, MeanLogProb, score_final, score_partial

__version__ = "0.1.0"
