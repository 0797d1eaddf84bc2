"""Repository records and the reference types produced while parsing them."""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.models import EdgeType, EvidenceSource

__all__ = ["RepositoryRecord", "RawReference", "ResolvedReference", "ParseWarning"]


class RepositoryRecord(BaseModel):
    """One repository as read from the records JSONL."""

    model_config = ConfigDict(extra="ignore", populate_by_name=True)

    repo_id: str = Field(alias="id", min_length=1)
    created_at: Optional[str] = None
    tags: List[str] = Field(default_factory=list)
    yaml_text: str = ""
    readme_text: str = ""
    license: Optional[Union[str, List[str]]] = Field(default=None, description="Declared licence identifier(s)")
    licence_text: Optional[str] = Field(default=None, description="Full text of the repository's own licence file")
    downloads: int = 0
    likes: int = 0

    @field_validator("tags", mode="before")
    @classmethod
    def _tags_list(cls, value: Any) -> List[str]:
        if value is None:
            return []
        return [str(tag) for tag in value]

    @field_validator("yaml_text", "readme_text", mode="before")
    @classmethod
    def _text(cls, value: Any) -> str:
        return "" if value is None else str(value)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RepositoryRecord":
        return cls.model_validate(data)


@dataclass(frozen=True)
class RawReference:
    """An unresolved parent candidate found in one evidence layer."""
    source_repo: str
    target_string: str
    evidence_source: EvidenceSource
    suggested_type: Optional[EdgeType] = None
    list_context: bool = False

    def __post_init__(self):
        if not self.target_string.strip():
            raise ValueError("target_string must be nonempty")

    @property
    def is_dataset(self) -> bool:
        return self.suggested_type is EdgeType.DATASET


@dataclass(frozen=True)
class ResolvedReference:
    """A reference whose target resolved to a repository in the universe."""
    child: str
    parent: str
    evidence_source: EvidenceSource
    suggested_type: Optional[EdgeType] = None
    list_context: bool = False


@dataclass(frozen=True)
class ParseWarning:
    """Non-fatal problem met while parsing a repository."""
    repo_id: str
    layer: str
    message: str

    def to_dict(self) -> Dict[str, str]:
        return {"repo_id": self.repo_id, "layer": self.layer, "message": self.message}
