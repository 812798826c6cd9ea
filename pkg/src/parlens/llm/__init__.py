"""Model access: prompt templates and the record/replay gateway."""

from .gateway import (
    API_KEY_ENV,
    Exchange,
    Gateway,
    GatewayError,
    MissingFixtureError,
    load_fixtures,
    prompt_hash,
    record_fixtures,
)
from .templates import DSL_CARD, DSL_CARD_VERSION, NO_FORMAT, TEMPLATES, PromptTemplate, get_template

__all__ = [
    "API_KEY_ENV",
    "DSL_CARD",
    "DSL_CARD_VERSION",
    "Exchange",
    "Gateway",
    "GatewayError",
    "MissingFixtureError",
    "NO_FORMAT",
    "PromptTemplate",
    "TEMPLATES",
    "get_template",
    "load_fixtures",
    "prompt_hash",
    "record_fixtures",
]
