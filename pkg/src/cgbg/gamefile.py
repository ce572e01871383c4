"""Versioned JSON game files.

Layout::

    {
      "version": 1,
      "n_agents": 2,
      "action_sizes": [2, 2],
      "type_sizes": [2, 2],
      "components": [
        {"scope": [0, 1], "prob": [...], "payoff": [...]}
      ],
      "meta": {...}            # optional, ignored by the loader
    }

``prob`` is flat over local joint types and ``payoff`` flat over (local
joint type, local joint action), both row-major with the last scope member
fastest. Floats are written with ``repr`` and therefore round-trip exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import InvalidArgument
from .game import CGBG, PayoffComponent

FORMAT_VERSION = 1


class GameFileError(InvalidArgument):
    """A game file is unreadable or violates the format."""


def game_to_dict(game: CGBG, meta: dict | None = None) -> dict:
    doc = {
        "version": FORMAT_VERSION,
        "n_agents": game.n_agents,
        "action_sizes": list(game.action_sizes),
        "type_sizes": list(game.type_sizes),
        "components": [
            {
                "scope": list(c.scope),
                "prob": c.local_type_prob.tolist(),
                "payoff": c.payoff.tolist(),
            }
            for c in game.components
        ],
    }
    if meta:
        doc["meta"] = meta
    return doc


def game_from_dict(doc: dict, require_connected: bool = True) -> CGBG:
    if not isinstance(doc, dict):
        raise GameFileError("game document must be a JSON object")
    if doc.get("version") != FORMAT_VERSION:
        raise GameFileError(f"unsupported game file version {doc.get('version')!r}")
    try:
        components = tuple(
            PayoffComponent(tuple(c["scope"]), c["prob"], c["payoff"])
            for c in doc["components"]
        )
        game = CGBG(doc["n_agents"], doc["action_sizes"], doc["type_sizes"], components)
        game.validate(require_connected)
    except (KeyError, TypeError) as exc:
        raise GameFileError(f"malformed game document: {exc!r}") from exc
    except InvalidArgument as exc:
        raise GameFileError(str(exc)) from exc
    return game


def dumps_game(game: CGBG, meta: dict | None = None) -> str:
    return json.dumps(game_to_dict(game, meta), allow_nan=False)


def save_game(game: CGBG, path: str | Path, meta: dict | None = None) -> None:
    Path(path).write_text(dumps_game(game, meta) + "\n")


def load_game(path: str | Path, require_connected: bool = True) -> CGBG:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise GameFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise GameFileError(f"{path} is not valid JSON: {exc}") from exc
    return game_from_dict(doc, require_connected)
