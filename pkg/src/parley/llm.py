"""Chat-completion client and LLM-backed signal extraction.

The endpoint contract is the minimal chat-completion shape (model, messages,
temperature, tool schema) so any compatible provider or an httpx mock
transport can serve it. The extraction prompt is a versioned template asset;
it is substituted, never paraphrased, because recorded fixtures depend on the
exact text.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

import httpx

from .errors import ExtractionError, ExtractionTransportError
from .signals import Signal, Utterance

logger = logging.getLogger(__name__)

EXTRACTION_TEMPERATURE = 0.0

SIGNAL_TOOL_NAME = "extract_signals"

SIGNAL_TOOL_SCHEMA = {
    "type": "function",
    "function": {
        "name": SIGNAL_TOOL_NAME,
        "description": (
            "Report opponent modeling signals per agent, in chronological order."
        ),
        "parameters": {
            "type": "object",
            "additionalProperties": {
                "type": "array",
                "items": {
                    "type": "object",
                    "properties": {
                        "entity": {"type": "string", "enum": ["issue", "option"]},
                        "signal_type": {
                            "type": "string",
                            "enum": ["point", "comparison"],
                        },
                        "target": {"type": "string"},
                        "stance": {"type": "string", "enum": ["prefer", "oppose"]},
                    },
                    "required": ["entity", "signal_type", "target", "stance"],
                },
            },
        },
    },
}


@dataclass(frozen=True)
class EndpointConfig:
    """Connection settings for a chat-completion endpoint."""

    base_url: str
    model: str
    api_token_env: str = "PARLEY_API_TOKEN"
    timeout: float = 60.0
    max_retries: int = 3
    backoff_base: float = 0.5
    backoff_cap: float = 8.0
    max_in_flight: int = 4


class ChatCompletionClient:
    """Thin client over POST /chat/completions with retry and an in-flight cap."""

    def __init__(
        self,
        config: EndpointConfig,
        transport: httpx.BaseTransport | None = None,
        sleep=time.sleep,
    ):
        self.config = config
        self._sleep = sleep
        self._semaphore = threading.Semaphore(config.max_in_flight)
        headers = {}
        token = os.environ.get(config.api_token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self._client = httpx.Client(
            base_url=config.base_url,
            timeout=config.timeout,
            headers=headers,
            transport=transport,
        )

    def close(self) -> None:
        self._client.close()

    def complete(
        self,
        messages: Sequence[Mapping],
        tools: Sequence[Mapping] | None = None,
        tool_choice: Mapping | str | None = None,
        temperature: float = EXTRACTION_TEMPERATURE,
    ) -> dict:
        """One chat completion; retries transport failures with capped backoff."""
        body: dict = {
            "model": self.config.model,
            "messages": list(messages),
            "temperature": temperature,
        }
        if tools is not None:
            body["tools"] = list(tools)
        if tool_choice is not None:
            body["tool_choice"] = tool_choice

        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt > 0:
                delay = min(
                    self.config.backoff_base * (2 ** (attempt - 1)),
                    self.config.backoff_cap,
                )
                self._sleep(delay)
            with self._semaphore:
                try:
                    response = self._client.post("/chat/completions", json=body)
                except httpx.HTTPError as exc:
                    last_error = exc
                    continue
            if response.status_code >= 500:
                last_error = ExtractionTransportError(
                    f"server error {response.status_code}"
                )
                continue
            if response.status_code != 200:
                raise ExtractionError(
                    f"endpoint returned status {response.status_code}",
                    payload=response.text,
                )
            return response.json()
        raise ExtractionTransportError(
            f"endpoint unreachable after {self.config.max_retries + 1} attempts: "
            f"{last_error}"
        )


def load_extraction_template() -> str:
    return resources.files("parley.data").joinpath(
        "signal_extraction_prompt.txt"
    ).read_text()


def format_chat_history(history: Sequence[Utterance]) -> str:
    lines = [f"[Round {u.round}] {u.speaker}: {u.text}" for u in history]
    return "\n".join(lines)


def build_extraction_prompt(rules_text: str, history: Sequence[Utterance]) -> str:
    """Fill the template's {negotiation_rule} and {chat_history} slots."""
    return load_extraction_template().format(
        negotiation_rule=rules_text, chat_history=format_chat_history(history)
    )


def _tool_arguments(payload: Mapping) -> str:
    try:
        message = payload["choices"][0]["message"]
        calls = message.get("tool_calls") or []
        if calls:
            return calls[0]["function"]["arguments"]
        content = message.get("content")
        if content:
            return content
    except (KeyError, IndexError, TypeError) as exc:
        raise ExtractionError(f"malformed completion payload: {exc}", payload=payload)
    raise ExtractionError("completion carries no tool call or content", payload=payload)


def parse_extraction_payload(
    payload: Mapping, known_speakers: Sequence[str]
) -> dict[str, list[Signal]]:
    """Parse a completion payload into per-party signal lists.

    All-or-nothing: any schema violation raises ExtractionError and no partial
    signals are returned. Parties absent from the transcript are dropped (an
    extractor must not fabricate participants). An empty result is an error,
    per the prompt contract.
    """
    arguments = _tool_arguments(payload)
    try:
        raw = json.loads(arguments)
    except json.JSONDecodeError as exc:
        raise ExtractionError(f"tool arguments are not JSON: {exc}", payload=arguments)
    if not isinstance(raw, dict):
        raise ExtractionError("extraction payload must map agent -> signals",
                              payload=arguments)
    known = set(known_speakers)
    result: dict[str, list[Signal]] = {}
    for agent, items in raw.items():
        if agent not in known:
            logger.warning("dropping signals for unknown party %r", agent)
            continue
        if not isinstance(items, list):
            raise ExtractionError(
                f"signals for {agent!r} must be a list", payload=arguments
            )
        try:
            result[agent] = [Signal.from_wire(agent, item) for item in items]
        except Exception as exc:
            raise ExtractionError(
                f"bad signal for {agent!r}: {exc}", payload=arguments
            )
    if not any(result.values()):
        raise ExtractionError("extraction returned no signals", payload=arguments)
    return result


def llm_extract(
    history: Sequence[Utterance],
    rules_text: str,
    client: ChatCompletionClient,
) -> dict[str, list[Signal]]:
    """Run the extraction prompt over a chat history via the endpoint.

    Signals come back in response order; the sampling temperature is pinned
    to 0 for deterministic reasoning.
    """
    prompt = build_extraction_prompt(rules_text, history)
    payload = client.complete(
        messages=[{"role": "user", "content": prompt}],
        tools=[SIGNAL_TOOL_SCHEMA],
        tool_choice={"type": "function", "function": {"name": SIGNAL_TOOL_NAME}},
        temperature=EXTRACTION_TEMPERATURE,
    )
    speakers = [u.speaker for u in history]
    return parse_extraction_payload(payload, speakers)
