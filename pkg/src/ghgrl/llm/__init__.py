from ghgrl.llm.backends import (
    LLMRequest,
    MockEmbedder,
    MockLLMBackend,
    RemoteEmbedder,
    RemoteLLMBackend,
)
from ghgrl.llm.pipeline import (
    AttributeSample,
    FeatureMatrix,
    NodeAnnotation,
    TypeSchema,
    annotate_all,
    annotate_node,
    build_feature_matrix,
    embed_annotation,
    generate_type_schema,
    load_annotations,
    sample_attributes,
    save_annotations,
)
from ghgrl.llm.templates import PromptTemplates, default_templates

__all__ = [
    "AttributeSample",
    "FeatureMatrix",
    "LLMRequest",
    "MockEmbedder",
    "MockLLMBackend",
    "NodeAnnotation",
    "PromptTemplates",
    "RemoteEmbedder",
    "RemoteLLMBackend",
    "TypeSchema",
    "annotate_all",
    "annotate_node",
    "build_feature_matrix",
    "default_templates",
    "embed_annotation",
    "generate_type_schema",
    "load_annotations",
    "sample_attributes",
    "save_annotations",
]
