"""Dataset manifests: one tab-separated record per line, `#` starts a comment.

Each record is `clean_path[<TAB>noisy_path]`. An optional directive line
`#color: rgb|gray` declares the color mode. Relative paths resolve against
the manifest root (the `--root` flag, else the manifest's directory).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, List, Optional, Union

from src.utils.errors import DatasetError, FormatError

logger = logging.getLogger(__name__)

COLOR_MODES = ("rgb", "gray")


@dataclass(frozen=True)
class Record:
    clean_path: Path
    noisy_path: Optional[Path] = None

    @property
    def name(self) -> str:
        return self.clean_path.name


@dataclass
class DatasetManifest:
    records: List[Record]
    root: Path = field(default_factory=Path)
    color: str = "rgb"

    def __post_init__(self):
        if self.color not in COLOR_MODES:
            raise FormatError(f"unknown color mode {self.color!r}; expected one of {COLOR_MODES}")

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    @property
    def paired(self) -> bool:
        return bool(self.records) and all(r.noisy_path is not None for r in self.records)

    @property
    def channels(self) -> int:
        return 3 if self.color == "rgb" else 1

    def require_paired(self) -> None:
        unpaired = [str(r.clean_path) for r in self.records if r.noisy_path is None]
        if unpaired:
            raise FormatError(f"paired mode needs a noisy path on every record; missing for {unpaired[:5]}")

    def check_files(self) -> None:
        missing = []
        for r in self.records:
            missing += [str(p) for p in (r.clean_path, r.noisy_path) if p is not None and not p.is_file()]
        if missing:
            raise DatasetError(missing)

    def split(self, count: int) -> "tuple[DatasetManifest, DatasetManifest]":
        """First `count` records and the rest, sharing root and color."""
        head = DatasetManifest(self.records[:count], self.root, self.color)
        tail = DatasetManifest(self.records[count:], self.root, self.color)
        return head, tail

    @classmethod
    def parse(cls, text: str, root: Union[str, Path]) -> "DatasetManifest":
        root = Path(root)
        color = "rgb"
        records = []
        offset = 0
        for line in text.splitlines(keepends=True):
            stripped = line.strip()
            if stripped.startswith("#color:"):
                color = stripped.split(":", 1)[1].strip()
            elif stripped and not stripped.startswith("#"):
                fields = [f for f in line.rstrip("\r\n").split("\t")]
                if len(fields) > 2 or not fields[0]:
                    raise FormatError(f"expected 'clean[<TAB>noisy]', got {stripped!r}", offset=offset)
                clean = root / fields[0].strip()
                noisy = root / fields[1].strip() if len(fields) == 2 and fields[1].strip() else None
                records.append(Record(clean, noisy))
            offset += len(line.encode("utf-8"))
        return cls(records=records, root=root, color=color)

    @classmethod
    def load(cls, path: Union[str, Path], root: Optional[Union[str, Path]] = None, check: bool = True) -> "DatasetManifest":
        path = Path(path)
        if not path.is_file():
            raise DatasetError([str(path)])
        manifest = cls.parse(path.read_text(encoding="utf-8"), root if root is not None else path.parent)
        if check:
            manifest.check_files()
        logger.info("loaded manifest %s: %d records (%s)", path, len(manifest), "paired" if manifest.paired else "clean only")
        return manifest

    def dumps(self) -> str:
        lines = [f"#color: {self.color}"]
        for r in self.records:
            cells = [_relative(r.clean_path, self.root)]
            if r.noisy_path is not None:
                cells.append(_relative(r.noisy_path, self.root))
            lines.append("\t".join(cells))
        return "\n".join(lines) + "\n"

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        return path


def _relative(path: Path, root: Path) -> str:
    try:
        return path.relative_to(root).as_posix()
    except ValueError:
        return str(path)


def from_paths(clean: Iterable[Path], root: Union[str, Path], noisy: Optional[Iterable[Path]] = None,
               color: str = "rgb") -> DatasetManifest:
    clean = list(clean)
    noisy_list = list(noisy) if noisy is not None else [None] * len(clean)
    return DatasetManifest([Record(Path(c), n and Path(n)) for c, n in zip(clean, noisy_list)], Path(root), color)
