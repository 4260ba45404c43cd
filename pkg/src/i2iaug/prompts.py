"""Prompt templates for the generation and discrimination endpoints.

Templates are plain text with ``{profile}``, ``{history}`` and (for the
discriminator) ``{target}`` placeholders. An empty profile drops its line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from .data import UserHistory, truncate_history

HISTORY_WINDOW = 10

GENERATION_TEMPLATE = """\
You are a shopping assistant predicting what a customer will interact with next.
{profile}
The customer's most recent items, oldest first:
{history}

Predict the items this customer is most likely to interact with next.
Output only candidate item IDs, one per line."""

DISCRIMINATION_TEMPLATE = """\
You are judging whether a customer would interact with an item.
{profile}
The customer's most recent items, oldest first:
{history}

Candidate item:
{target}

Would this customer interact with the candidate item? Answer Yes or No."""


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    text: str

    @classmethod
    def from_file(cls, path, template_id=None):
        path = Path(path)
        return cls(template_id or path.stem, path.read_text(encoding="utf-8"))


@dataclass(frozen=True)
class GenerationPrompt:
    template_id: str
    rendered_text: str


DEFAULT_GENERATION = PromptTemplate("generation-v1", GENERATION_TEMPLATE)
DEFAULT_DISCRIMINATION = PromptTemplate("discrimination-v1", DISCRIMINATION_TEMPLATE)


def describe_item(item_id, titles=None) -> str:
    title = titles.get(item_id) if titles else None
    return f"{item_id}: {title}" if title else item_id


def render_profile(features) -> str:
    if not features:
        return ""
    fields = "; ".join(f"{k}: {features[k]}" for k in sorted(features))
    return f"Customer profile: {fields}"


def render_history(history: UserHistory, titles=None) -> str:
    return "\n".join(f"- {describe_item(i, titles)}" for i in history.item_ids)


def _fill(template: PromptTemplate, **parts) -> str:
    text = template.text
    for key, value in parts.items():
        if not value:
            # drop the whole line holding an empty placeholder
            text = re.sub(r"^[ \t]*\{" + key + r"\}[ \t]*\n?", "", text, flags=re.M)
        text = text.replace("{" + key + "}", value)
    return text


def build_generation_prompt(history: UserHistory, template: PromptTemplate = DEFAULT_GENERATION,
                            titles=None, window: int = HISTORY_WINDOW) -> GenerationPrompt:
    """Render a next-item prompt from the last ``window`` interactions."""
    history = truncate_history(history, window)
    text = _fill(template, profile=render_profile(history.static_features),
                 history=render_history(history, titles))
    return GenerationPrompt(template.template_id, text)


def build_discrimination_prompt(history: UserHistory, item_id: str,
                                template: PromptTemplate = DEFAULT_DISCRIMINATION,
                                titles=None, window: int = HISTORY_WINDOW) -> str:
    history = truncate_history(history, window)
    return _fill(template, profile=render_profile(history.static_features),
                 history=render_history(history, titles),
                 target=describe_item(item_id, titles))
