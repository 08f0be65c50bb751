"""LLM access: providers, reply parsers and the step-level gateway."""

from .gateway import LlmGateway, Summary, load_template
from .providers import (
    STEPS,
    ChatProvider,
    HttpChatProvider,
    LlmProviderConfig,
    LlmRequest,
    MockProvider,
    TransportError,
    prompt_digest,
)

__all__ = [
    "STEPS",
    "ChatProvider",
    "HttpChatProvider",
    "LlmGateway",
    "LlmProviderConfig",
    "LlmRequest",
    "MockProvider",
    "Summary",
    "TransportError",
    "load_template",
    "prompt_digest",
]
