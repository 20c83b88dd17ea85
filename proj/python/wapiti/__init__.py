"""Desk-scale language-model watermarking laboratory."""

from wapiti._core import (
    Checkpoint,
    DetectionResult,
    EvalBudget,
    GenerationRecord,
    IntegrationResult,
    OrthogonalityReport,
    ParamDelta,
    Scheme,
    SweepRow,
    TrainConfig,
    ValidationError,
    WatermarkConfig,
    auroc,
    binomial_sf,
    context_seed,
    derive_seed,
    detect,
    distill,
    extract_delta,
    gamma_q,
    generate_watermarked,
    integrate,
    ks_critical,
    ks_uniformity,
    lambda_sweep,
    load_checkpoint,
    load_corpus,
    load_delta,
    load_records,
    make_checkpoint,
    median,
    mix64,
    ngram_js_divergence,
    normal_sf,
    orthogonality_report,
    permutation,
    perplexity,
    sample,
    save_checkpoint,
    save_corpus,
    save_delta,
    save_records,
    seq_rep_3,
    spearman,
    synth_corpus,
    synth_source,
    text_edit_attack,
    train,
    uniform_at,
    uniform_stream,
)

__all__ = [
    "Checkpoint",
    "DetectionResult",
    "EvalBudget",
    "GenerationRecord",
    "IntegrationResult",
    "OrthogonalityReport",
    "ParamDelta",
    "Scheme",
    "SweepRow",
    "TrainConfig",
    "ValidationError",
    "WatermarkConfig",
    "auroc",
    "binomial_sf",
    "context_seed",
    "derive_seed",
    "detect",
    "distill",
    "extract_delta",
    "gamma_q",
    "generate_watermarked",
    "integrate",
    "ks_critical",
    "ks_uniformity",
    "lambda_sweep",
    "load_checkpoint",
    "load_corpus",
    "load_delta",
    "load_records",
    "make_checkpoint",
    "median",
    "mix64",
    "ngram_js_divergence",
    "normal_sf",
    "orthogonality_report",
    "permutation",
    "perplexity",
    "sample",
    "save_checkpoint",
    "save_corpus",
    "save_delta",
    "save_records",
    "seq_rep_3",
    "spearman",
    "synth_corpus",
    "synth_source",
    "text_edit_attack",
    "train",
    "uniform_at",
    "uniform_stream",
]

__version__ = "0.1.0"
