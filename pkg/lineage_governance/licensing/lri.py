"""Licence restrictiveness index (LRI) lookup."""

from typing import Dict, Iterable, Optional, Union

from .rules import LriEntry, LriTable

__all__ = ["LriIndex", "lri_lookup"]


class LriIndex:
    """
    Case-insensitive LRI index.

    Lookup is exact on the normalized name first, then by the longest table
    name contained in the input (ties broken lexicographically).
    """

    def __init__(self, entries: Iterable[LriEntry]):
        self._exact: Dict[str, float] = {}
        for entry in entries:
            self._exact[entry.licence_name.strip().casefold()] = entry.lri
        self._by_length = sorted(self._exact, key=lambda name: (-len(name), name))

    def __len__(self) -> int:
        return len(self._exact)

    def lookup(self, licence_name: Optional[str]) -> Optional[float]:
        """Return the LRI, or None when the name is not resolvable."""
        if not licence_name:
            return None
        name = licence_name.strip().casefold()
        if not name:
            return None
        if name in self._exact:
            return self._exact[name]
        for candidate in self._by_length:
            if candidate in name:
                return self._exact[candidate]
        return None


def lri_lookup(licence_name: str, table: Union[LriTable, Iterable[LriEntry], LriIndex]) -> Optional[float]:
    """
    Map a licence name to its restrictiveness index.

    Args:
        licence_name: Declared licence name
        table: LRI table, entries or a prebuilt index

    Returns:
        LRI in [0, 1], or None (package excluded)
    """
    if isinstance(table, LriIndex):
        index = table
    elif isinstance(table, LriTable):
        index = LriIndex(table.entries)
    else:
        index = LriIndex(table)
    return index.lookup(licence_name)
