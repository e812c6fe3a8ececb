"""Black-box uncertainty scoring and hallucination detection for sampled answers.

Given n sampled answers per question, the toolkit scores answer
consistency with nearest-neighbor entropy over pairwise ROUGE-L
similarities, optionally gated by question-alignment relevance weights,
plus a discrete cluster-entropy baseline; labels hallucinations against
reference answers; and evaluates detection quality (AUROC, thresholded
accuracy, performance-rejection curves, paired-split comparisons).
"""

from .alignment import (
    AlignmentScores,
    EmbeddingPair,
    NliLogits,
    PrecomputedAlignments,
    ScorerServiceClient,
    VARIANTS,
    alpha_cross_encoder,
    alpha_embedding,
    alpha_entailment,
    gate_similarity,
    relevance_weights,
)
from .config import RunConfig, config_hash, load_config
from .entropy import (
    SemanticClustering,
    UncertaintyResult,
    cluster_semantic,
    dse,
    qa_snne,
    score_record,
    snne,
)
from .errors import BackendError, PairingError, SementropyError, ValidationError
from .evaluation import (
    CompareReport,
    DetectionOutcome,
    EvalReport,
    HallucinationLabel,
    PrcPoint,
    accuracy,
    auroc,
    build_report,
    compare_splits,
    detect,
    label_hallucinations,
    prc,
)
from .records import (
    DatasetManifest,
    GenerationConfig,
    MergeResult,
    QARecord,
    SampleSet,
    attach_samples,
    check_pairing,
    load_dataset,
    load_labels_file,
    load_results_file,
    load_samples_file,
    merge_results,
    write_jsonl,
)
from .sampling import ChatCompletionsClient, JobSummary, RetryPolicy, SamplingJob, run_sampling
from .synth import generate_synthetic
from .textsim import (
    RougeLScore,
    SimilarityMatrix,
    TokenSeq,
    base_similarity_matrix,
    bleu,
    lcs_len,
    rouge_f,
    rouge_l,
    tokenize,
)

__version__ = "0.1.0"

__all__ = [
    "AlignmentScores",
    "BackendError",
    "ChatCompletionsClient",
    "CompareReport",
    "DatasetManifest",
    "DetectionOutcome",
    "EmbeddingPair",
    "EvalReport",
    "GenerationConfig",
    "HallucinationLabel",
    "JobSummary",
    "MergeResult",
    "NliLogits",
    "PairingError",
    "PrcPoint",
    "PrecomputedAlignments",
    "QARecord",
    "RetryPolicy",
    "RougeLScore",
    "RunConfig",
    "SampleSet",
    "SamplingJob",
    "ScorerServiceClient",
    "SemanticClustering",
    "SementropyError",
    "SimilarityMatrix",
    "TokenSeq",
    "UncertaintyResult",
    "VARIANTS",
    "ValidationError",
    "accuracy",
    "alpha_cross_encoder",
    "alpha_embedding",
    "alpha_entailment",
    "attach_samples",
    "auroc",
    "base_similarity_matrix",
    "bleu",
    "build_report",
    "check_pairing",
    "cluster_semantic",
    "compare_splits",
    "config_hash",
    "detect",
    "dse",
    "gate_similarity",
    "generate_synthetic",
    "label_hallucinations",
    "lcs_len",
    "load_config",
    "load_dataset",
    "load_labels_file",
    "load_results_file",
    "load_samples_file",
    "merge_results",
    "prc",
    "qa_snne",
    "relevance_weights",
    "rouge_f",
    "rouge_l",
    "run_sampling",
    "score_record",
    "snne",
    "tokenize",
    "write_jsonl",
]
