"""Offline registry documents used by tests and demos."""

import json
from importlib import resources


def load_text(name: str) -> str:
    return resources.files(__name__).joinpath(name).read_text(encoding="utf-8")


def axios_document() -> dict:
    """Registry document for axios with the values shown in the metadata table."""
    return json.loads(load_text("axios.json"))


def axios_repo_response() -> dict:
    return json.loads(load_text("axios_repo.json"))
