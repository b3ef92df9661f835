#!/usr/bin/env python3
"""
Data models for dataset indexes and run statistics
"""
from dataclasses import dataclass, field, asdict
from typing import List, Optional, Dict, Sequence, Tuple
from datetime import datetime
import json

from .errors import DataError


@dataclass(frozen=True)
class DatasetEntry:
    """One ISIC case: image, optional truth mask, optional diagnosis"""
    image_id: str
    image_path: str
    mask_path: Optional[str] = None
    label: Optional[str] = None

    def to_dict(self) -> Dict:
        """Convert to dictionary"""
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict) -> 'DatasetEntry':
        """Create instance from dictionary"""
        return cls(**data)


@dataclass(frozen=True)
class DatasetIndex:
    """Ordered collection of cases with unique ids"""
    entries: Tuple[DatasetEntry, ...] = ()

    def __post_init__(self):
        entries = tuple(self.entries)
        seen = set()
        duplicates = []
        for entry in entries:
            if entry.image_id in seen:
                duplicates.append(entry.image_id)
            seen.add(entry.image_id)
        if duplicates:
            raise DataError(f"duplicate image ids: {sorted(set(duplicates))}")
        object.__setattr__(self, "entries", entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def ids(self) -> List[str]:
        return [e.image_id for e in self.entries]

    @property
    def labels(self) -> List[Optional[str]]:
        return [e.label for e in self.entries]

    def get(self, image_id: str) -> DatasetEntry:
        for entry in self.entries:
            if entry.image_id == image_id:
                return entry
        raise DataError(f"unknown image id {image_id}")

    def subset(self, ids: Sequence[str]) -> 'DatasetIndex':
        """Entries with the given ids, in index order"""
        wanted = set(ids)
        missing = sorted(wanted - set(self.ids))
        if missing:
            raise DataError(f"ids not in the index: {missing}")
        return DatasetIndex(tuple(e for e in self.entries if e.image_id in wanted))

    def has_masks(self) -> bool:
        return bool(self.entries) and all(e.mask_path for e in self.entries)

    def has_labels(self) -> bool:
        return bool(self.entries) and all(e.label for e in self.entries)

    def require_masks(self, what: str):
        missing = [e.image_id for e in self.entries if not e.mask_path]
        if missing:
            raise DataError(f"{what} needs truth masks; missing for: {missing}")

    def require_labels(self, what: str):
        missing = [e.image_id for e in self.entries if not e.label]
        if missing:
            raise DataError(f"{what} needs diagnosis labels; missing for: {missing}")

    def to_dict(self) -> Dict:
        """Convert to dictionary"""
        return {"entries": [e.to_dict() for e in self.entries]}

    def to_json(self) -> str:
        """Convert to JSON string"""
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, data: Dict) -> 'DatasetIndex':
        """Create instance from dictionary"""
        return cls(tuple(DatasetEntry.from_dict(e) for e in data["entries"]))


@dataclass
class RunStats:
    """Statistics for one CLI command"""
    command: str
    total_images: int = 0
    processed: int = 0
    failed: int = 0
    failed_ids: List[str] = field(default_factory=list)
    outputs: Dict[str, str] = field(default_factory=dict)
    summary: Dict[str, float] = field(default_factory=dict)
    start_time: str = field(default_factory=lambda: datetime.now().isoformat())
    end_time: Optional[str] = None

    def record_failure(self, image_id: str):
        self.failed += 1
        self.failed_ids.append(image_id)

    def finish(self):
        self.end_time = datetime.now().isoformat()

    def to_dict(self) -> Dict:
        """Convert to dictionary"""
        return asdict(self)

    def to_json(self) -> str:
        """Convert to JSON string"""
        return json.dumps(self.to_dict(), indent=2)

    def print_summary(self):
        """Print run statistics"""
        print("\n" + "="*60)
        print(f"{self.command.upper()} STATISTICS")
        print("="*60)
        print(f"Images: {self.total_images}")
        print(f"Processed: {self.processed}")
        print(f"Failed: {self.failed}")
        if self.failed_ids:
            print(f"Failed ids: {', '.join(self.failed_ids[:10])}"
                  + (" ..." if len(self.failed_ids) > 10 else ""))
        for key, value in self.summary.items():
            print(f"{key}: {value:.4f}" if isinstance(value, float) else f"{key}: {value}")
        for name, path in self.outputs.items():
            print(f"  - {name}: {path}")
        if self.end_time:
            start = datetime.fromisoformat(self.start_time)
            end = datetime.fromisoformat(self.end_time)
            duration = (end - start).total_seconds()
            print(f"Duration: {duration:.2f} seconds ({duration/60:.2f} minutes)")
        print("="*60 + "\n")
