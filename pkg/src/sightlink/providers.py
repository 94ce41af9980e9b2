"""Answer providers behind the gateway: mock, oracle and remote HTTP.

A provider answers (image, prompt, history) -> text between load() and
close() calls and must tolerate concurrent answer() invocations. The mock
is the deterministic test double; the oracle replays ground truths keyed by
(image digest, question); remote forwards to another server that speaks the
gateway's own endpoint contract.
"""

from __future__ import annotations

import base64
import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx

from .dataset import TEMPLATES, Category, load_dataset


class ProviderError(Exception):
    pass


class UnknownProviderError(ProviderError):
    pass


@dataclass(frozen=True)
class Message:
    """One chat turn; frame_ref links a turn to a stored camera frame."""

    role: str
    content: str
    frame_ref: int | None = None
    at: float | None = None


class AnswerProvider:
    """Lifecycle hooks are no-ops by default; answer() must be overridden."""

    def load(self) -> None:
        pass

    def close(self) -> None:
        pass

    def answer(self, image: bytes | None, prompt: str, history: Sequence[Message]) -> str:
        raise NotImplementedError


def _template_patterns() -> list[tuple[Category, re.Pattern]]:
    patterns = []
    for category, templates in TEMPLATES.items():
        for template in templates:
            regex = re.escape(template)
            regex = regex.replace(re.escape("{object}"), "(.+?)")
            regex = regex.replace(re.escape("{second}"), "(.+?)")
            patterns.append((category, re.compile(f"^{regex}$", re.IGNORECASE)))
    return patterns


_CANNED = {
    Category.NAVIGATIONAL_GUIDANCE: "navigation: walk straight ahead and it is on your right.",
    Category.DISTANCE_PROXIMITY: "distance: it is about two meters in front of you.",
    Category.SPATIAL_RELATIONSHIPS: "relationships: the first is directly above the second.",
}


def short_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()[:8]


class MockProvider(AnswerProvider):
    """Deterministic double: tags answers with the image hash and a canned
    category sentence chosen by template match; unmatched prompts echo."""

    def __init__(self):
        self._patterns = _template_patterns()
        self._loaded = False

    def load(self) -> None:
        self._loaded = True

    def close(self) -> None:
        self._loaded = False

    def _canned(self, prompt: str) -> str:
        text = prompt.strip()
        for category, pattern in self._patterns:
            if pattern.match(text):
                return _CANNED[category]
        return prompt

    def answer(self, image, prompt, history) -> str:
        if not self._loaded:
            raise ProviderError("mock provider used while unloaded")
        tag = short_hash(image) if image else "none"
        text = f"[mock#{tag}] {self._canned(prompt)}"
        if image is None:
            refs = [m.frame_ref for m in history if m.frame_ref is not None]
            if refs:
                text += f" (seen in frame {refs[-1]})"
        return text


class OracleProvider(AnswerProvider):
    """Returns the ground-truth answer for (image digest, question) pairs.

    Pins the metric suite's upper bound: evaluating a dataset against its own
    oracle must score the identity values. Unknown pairs answer empty, which
    surfaces loudly as a zero score instead of hiding a mismatch.
    """

    def __init__(self, truths: dict[tuple[str, str], str]):
        self._truths = truths

    @classmethod
    def from_dataset(cls, dataset_path: str | Path, image_root: str | Path) -> "OracleProvider":
        image_root = Path(image_root)
        truths: dict[tuple[str, str], str] = {}
        for entry in load_dataset(dataset_path):
            digest = hashlib.sha256((image_root / entry.image_file).read_bytes()).hexdigest()
            truths[(digest, entry.question)] = entry.ground_truth
        return cls(truths)

    def answer(self, image, prompt, history) -> str:
        digest = hashlib.sha256(image).hexdigest() if image else ""
        return self._truths.get((digest, prompt), "")


class RemoteProvider(AnswerProvider):
    """Forwards to an external server speaking the gateway endpoint contract."""

    def __init__(self, base_url: str, client: httpx.Client | None = None, timeout: float = 30.0):
        self._client = client or httpx.Client(base_url=base_url, timeout=timeout)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise ProviderError(f"remote call failed: {exc}") from exc
        if response.status_code >= 400:
            raise ProviderError(f"remote returned {response.status_code}: {response.text}")
        return response.json()

    def load(self) -> None:
        self._post("/load_model", {})

    def close(self) -> None:
        self._post("/close_model", {})
        self._client.close()

    def answer(self, image, prompt, history) -> str:
        if image is not None:
            payload = {"image": base64.b64encode(image).decode("ascii"), "prompt": prompt}
            return self._post("/process_image", payload)["answer"]
        messages = [{"role": m.role, "content": m.content} for m in history]
        messages.append({"role": "user", "content": prompt})
        return self._post("/chat_completion", {"messages": messages})["answer"]


class ProviderRegistry:
    """Named provider factories; the first configured name is the default."""

    def __init__(self, factories: dict[str, object]):
        if not factories:
            raise ValueError("registry needs at least one provider")
        self._factories = dict(factories)
        self.default_name = next(iter(self._factories))

    def names(self) -> list[str]:
        return list(self._factories)

    def create(self, name: str | None = None) -> AnswerProvider:
        name = name or self.default_name
        factory = self._factories.get(name)
        if factory is None:
            raise UnknownProviderError(f"no provider named {name!r} (have {self.names()})")
        return factory()

    @classmethod
    def default(cls) -> "ProviderRegistry":
        return cls({"mock": MockProvider})

    @classmethod
    def from_config(cls, config: dict, base_dir: str | Path = ".") -> "ProviderRegistry":
        """Builds a registry from {name: {"type": ..., ...settings}} JSON."""
        base_dir = Path(base_dir)
        factories: dict[str, object] = {}
        for name, spec in config.items():
            kind = spec.get("type")
            if kind == "mock":
                factories[name] = MockProvider
            elif kind == "oracle":
                dataset = base_dir / spec["dataset"]
                images = base_dir / spec["images"]
                factories[name] = (
                    lambda dataset=dataset, images=images: OracleProvider.from_dataset(dataset, images)
                )
            elif kind == "remote":
                url = spec["url"]
                factories[name] = lambda url=url: RemoteProvider(url)
            else:
                raise ValueError(f"provider {name!r}: unknown type {kind!r}")
        return cls(factories)
