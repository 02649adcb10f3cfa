"""conparse: sequence-based constituency parsing with LLMs.

Reversible tree linearizations, validity and faithfulness checking,
PARSEVAL scoring with an invalid-tree zero policy, prompt construction,
a scripted or HTTP completion backend, and a multi-agent refinement loop.
"""

from .backend import (
    AuthFailure,
    BackendError,
    CompletionBackend,
    CompletionRequest,
    CompletionResponse,
    HTTPBackend,
    RateLimited,
    ScriptedBackend,
    Timeout,
    UnmappedPrompt,
    prompt_sha256,
)
from .corpus import (
    ResultRecord,
    TreebankError,
    TreebankSplit,
    build_report,
    delta_f1,
    demonstrations_from_trees,
    load_treebank,
    read_records,
    run_experiment,
)
from .faithfulness import (
    FaithfulnessError,
    FaithfulnessReport,
    OvergenSub,
    SUBSTITUTIONS,
    UnfaithfulKind,
    check_faithfulness,
    classify_overgeneration,
    corrupt_faithfulness,
    lenient_yield,
)
from .linearize import (
    CrossingSpans,
    DanglingNT,
    EmptyConstituent,
    LinearizedTree,
    LinearizeError,
    StackUnderflow,
    Strategy,
    TransitionAction,
    UnconsumedBuffer,
    UnresolvableSpan,
    decode,
    decode_span,
    encode,
    encode_span,
    execute_transitions,
    oracle_transitions,
    parse_actions,
)
from .pmc import (
    CheckerMode,
    PMCConfig,
    PMCSession,
    RoundTrace,
    checker_feedback,
    run_pmc,
)
from .prompting import (
    ErrorExemplar,
    FinetuneRecord,
    MissingDemonstrations,
    PromptSpec,
    PUNCT_TABLE,
    build_checker_prompt,
    build_prompt,
    default_error_exemplars,
    export_finetune_records,
    make_prompt_spec,
    postprocess,
    preprocess,
    preprocess_tree,
    tokenize,
)
from .scoring import (
    EmptyCorpus,
    EvalConfig,
    InvalidPolicy,
    ScoreReport,
    SentenceCounts,
    load_eval_config,
    reduction_rate,
    score_corpus,
    score_sentence,
    scoring_spans,
)
from .tree import (
    BracketUnmatched,
    ConstituencyTree,
    ConstituentLabel,
    EmptyLabel,
    LabeledSpan,
    MissingWord,
    MoreThanOneWord,
    Token,
    TreeError,
    TreeNode,
    extract_spans,
    iter_tree_strings,
    label_level,
    parse_bracketed,
    parse_treebank_tree,
    render_bracketed,
    yield_tokens,
)
from .validity import (
    Inapplicable,
    InvalidKind,
    ValidityError,
    ValidityReport,
    check_validity,
    corrupt_validity,
)

__version__ = "0.1.0"
