"""pptlab: pre-trained prompt tuning at desk scale.

Self-supervised prompt pre-training on unlabeled text, few-shot prompt
tuning of a frozen text-to-text backbone, the baseline family (vanilla and
hybrid prompt tuning, LM adaption, full-model tuning), and the evaluation
harness that aggregates seed runs into report tables.
"""

from .tokenization import (
    EOS_ID,
    MASK_ID,
    MASK_TOKEN,
    PAD_ID,
    UNK_ID,
    Vocabulary,
    build_vocab,
    decode,
    encode,
    load_vocab,
    save_vocab,
    tokenize,
)
from .pvp import (
    FORMATS,
    MCC,
    RESERVED_TOKENS,
    SPC,
    SSC,
    UNIFIED_MC,
    HardPromptSpec,
    PatternTemplate,
    TaskInstance,
    Verbalizer,
    attach_hard_prompt,
    builtin_hard_prompt,
    load_hard_prompt_config,
    load_pvp_config,
    make_builtin_pvp,
    parse_pattern,
    predict_label,
    render,
    render_text,
    score_labels,
    to_unified_mc,
)
from .corpus import (
    DEFAULT_SSC_THRESHOLDS,
    MCC_OPTION_CAP,
    MCC_QUERY_CAP,
    Document,
    OptionConfig,
    PretrainExample,
    build_nsp3,
    build_nss,
    build_pseudo_ssc,
    build_unified_mc,
    lexicon_annotator,
    load_corpus,
    load_dataset,
    make_document,
    option_config_for,
    split_sentences,
    split_train_valid,
    write_dataset,
)
from .model import (
    FT,
    LM,
    PT,
    Grads,
    ModelConfig,
    ModelParams,
    SoftPrompt,
    count_tunable,
    forward_batch_distribution,
    forward_mask_distribution,
    init_model,
    init_soft_prompt,
    load_model,
    load_prompt,
    loss_and_grad,
    save_model,
    save_prompt,
    span_corrupt,
)
from .training import (
    TrainConfig,
    full_model_tune,
    lm_adapt,
    lr_schedule,
    pretrain_prompt,
    prompt_tune,
)
from .fewshot import FewShotSplit, TaskSource, load_task, sample_fewshot, sample_sweep, save_task
from .harness import (
    ExperimentResult,
    ExperimentSpec,
    RunContext,
    aggregate,
    append_result,
    emit_report,
    load_results,
    macro_f1,
    run_experiment,
    run_sweep,
    save_results,
)
from .synth import adjacency_corpus, adjacency_task, corpus_vocab, experiment_world, warmup_backbone

__all__ = [name for name in dir() if not name.startswith("_")]
