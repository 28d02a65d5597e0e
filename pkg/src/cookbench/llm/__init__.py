from .backends import (
    BackendError,
    ChatCompletionsClient,
    ChatRequest,
    Completion,
    EchoBackend,
    NoisyEchoBackend,
    ReplayMiss,
    ScriptedBackend,
    TranscriptCache,
    cache_digest,
    make_backend,
)
from .convert import (
    ConversionResult,
    EmptyCompletion,
    NoViableDemos,
    bootstrap_fewshot,
    convert,
    extract_cooklang,
)
from .prompts import (
    BootstrapFewShot,
    Demo,
    EvalConfig,
    ExternalTemplate,
    FewShot,
    InputVariant,
    MissingField,
    PromptBundle,
    ZeroShot,
    build_prompt,
    parse_strategy,
)
