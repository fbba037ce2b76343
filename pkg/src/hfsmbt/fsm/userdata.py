"""Key-value data shared between states, with per-state remapping.

States read and write their own local key names; a remapped view translates
those to the machine's names, so the same state implementation can be wired
into different machines without edits.
"""

from __future__ import annotations


class UserDataKeyMissing(KeyError):
    def __init__(self, key: str):
        super().__init__(key)
        self.key = key

    def __str__(self):
        return f"userdata key {self.key!r} not set"


class UserData:
    def __init__(self, initial: dict | None = None):
        self._data = dict(initial or {})

    def get(self, key: str):
        try:
            return self._data[key]
        except KeyError:
            raise UserDataKeyMissing(key) from None

    def set(self, key: str, value) -> None:
        self._data[key] = value

    def has(self, key: str) -> bool:
        return key in self._data

    def delete(self, key: str) -> None:
        self._data.pop(key, None)

    def snapshot(self) -> dict:
        return dict(self._data)

    def keys(self):
        return list(self._data)


class RemappedUserData:
    """View over a parent UserData: local names map through `remaps`
    (local -> parent); unmapped names pass straight through."""

    def __init__(self, parent, remaps: dict | None = None):
        self._parent = parent
        self._remaps = dict(remaps or {})

    def _resolve(self, key: str) -> str:
        return self._remaps.get(key, key)

    def get(self, key: str):
        return self._parent.get(self._resolve(key))

    def set(self, key: str, value) -> None:
        self._parent.set(self._resolve(key), value)

    def has(self, key: str) -> bool:
        return self._parent.has(self._resolve(key))

    def delete(self, key: str) -> None:
        self._parent.delete(self._resolve(key))

    def snapshot(self) -> dict:
        return self._parent.snapshot()
