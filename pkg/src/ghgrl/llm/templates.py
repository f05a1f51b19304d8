"""Prompt templates for type-set generation and per-node annotation.

Templates use named `{placeholder}` slots filled by literal replacement
(not str.format, so JSON braces in the surrounding text are safe). The
`version` string is folded into annotation cache keys: editing a
template and bumping the version invalidates stale cache entries.
"""

from __future__ import annotations

from dataclasses import dataclass

GENERATION_PLACEHOLDERS = ("{attributes}", "{m_fmt}", "{m_cont}")
PROCESSING_PLACEHOLDERS = ("{attribute}", "{format_types}", "{content_types}")

DEFAULT_GENERATION_TEMPLATE = """\
You are shown a sample of node attribute texts drawn from one graph dataset.
The attributes come in different writing styles and cover different subjects.

Sampled attributes (one per line, between the markers):
<<<
{attributes}
>>>

Propose exactly {m_fmt} format categories describing HOW the attributes are
written (their surface form, e.g. a bare identifier versus a long passage),
and exactly {m_cont} content categories describing WHAT the attributes are
about. Category names must be short, distinct, and in plain English.

Reply with a single JSON object and nothing else, shaped like:
{"format_types": ["name", "..."], "content_types": ["name", "..."]}
"""

DEFAULT_PROCESSING_TEMPLATE = """\
Classify one node attribute from a graph dataset.

Attribute text (between the markers):
<<<
{attribute}
>>>

Allowed format categories: {format_types}
Allowed content categories: {content_types}

Write a concise description of what the attribute says, pick the single best
format category and content category from the lists above, state how
confident you are in each pick as a number between 0 and 1, and explain the
reasoning behind your picks.

Reply with a single JSON object and nothing else, with exactly these fields:
{"description": "...", "format_type": "...", "format_confidence": 0.0,
 "content_type": "...", "content_confidence": 0.0, "reasoning": "..."}
"""


@dataclass(frozen=True)
class PromptTemplates:
    """Generation and processing templates plus a cache-key version tag."""

    generation_template: str
    processing_template: str
    version: str = "v1"

    def __post_init__(self):
        for ph in GENERATION_PLACEHOLDERS:
            if self.generation_template.count(ph) != 1:
                raise ValueError(f"generation template needs exactly one {ph}")
        for ph in PROCESSING_PLACEHOLDERS:
            if self.processing_template.count(ph) != 1:
                raise ValueError(f"processing template needs exactly one {ph}")

    def render_generation(self, attribute_texts, m_fmt: int, m_cont: int) -> str:
        body = "\n".join(attribute_texts)
        return (
            self.generation_template.replace("{attributes}", body)
            .replace("{m_fmt}", str(m_fmt))
            .replace("{m_cont}", str(m_cont))
        )

    def render_processing(self, attribute: str, format_types, content_types) -> str:
        return (
            self.processing_template.replace("{attribute}", attribute)
            .replace("{format_types}", ", ".join(format_types))
            .replace("{content_types}", ", ".join(content_types))
        )


def default_templates() -> PromptTemplates:
    return PromptTemplates(
        generation_template=DEFAULT_GENERATION_TEMPLATE,
        processing_template=DEFAULT_PROCESSING_TEMPLATE,
        version="v1",
    )
