"""Prompting, dialogue history and chat backends for penalty design."""

from .extract import ExtractionError, extract_penalty_program, extract_program, first_code_block
from .history import ChatMessage, DialogueHistory
from .prompts import (
    REINFORCEMENT_SECTIONS,
    SYSTEM_SECTIONS,
    PromptError,
    build_reinforcement_prompt,
    build_system_prompt,
    regeneration_message,
    system_prompt_for,
)
from .providers import (
    API_KEY_ENV,
    FixturesExhausted,
    LiveProvider,
    LlmAuthError,
    LlmError,
    LlmHttpError,
    LlmProviderConfig,
    LlmResponseError,
    MockProvider,
    chat,
    make_provider,
)

__all__ = [
    "API_KEY_ENV",
    "ChatMessage",
    "DialogueHistory",
    "ExtractionError",
    "FixturesExhausted",
    "LiveProvider",
    "LlmAuthError",
    "LlmError",
    "LlmHttpError",
    "LlmProviderConfig",
    "LlmResponseError",
    "MockProvider",
    "PromptError",
    "REINFORCEMENT_SECTIONS",
    "SYSTEM_SECTIONS",
    "build_reinforcement_prompt",
    "build_system_prompt",
    "chat",
    "extract_penalty_program",
    "extract_program",
    "first_code_block",
    "make_provider",
    "regeneration_message",
    "system_prompt_for",
]
