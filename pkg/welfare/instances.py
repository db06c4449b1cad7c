"""
Instance and table file formats.

Instance files are single JSON documents. The `model` field selects the
family: "or_single_step" spread graphs, "disk_coverage" cell structures,
"additive" value rows, and tabular utility tables, which are also read when
`model` is absent. Rationals are written as "num/den" strings (integers and
decimal strings are accepted on input).
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union
import json
import logging

from pydantic import BaseModel, Discriminator, Field, Tag, TypeAdapter, ValidationError, model_validator
from typing_extensions import Annotated, Literal

from welfare.config import Config
from welfare.coverage import CoverageInstance
from welfare.exceptions import EnumerationCapExceeded, InstanceFormatError, ModelError
from welfare.fixtures import load_fixture
from welfare.influence import OrModel, SpreadGraph
from welfare.mechanisms import MechanismTable, ScalarTable, TableExport
from welfare.model import AdditiveModel, TabularModel, WelfareModel, enumerate_profiles
from welfare.types import RationalField

logger = logging.getLogger(__name__)

FIXTURE_PREFIX = "fixture:"


class TabularEntry(BaseModel):
    profile: List[List[str]]
    utilities: List[RationalField]


class TabularInstanceFile(BaseModel):
    model: Literal["tabular"] = "tabular"
    name: str = "tabular"
    players: int = Field(ge=1)
    ground: List[str]
    entries: List[TabularEntry]
    disjoint_only: bool = False
    complete: bool = True


class AdditiveInstanceFile(BaseModel):
    model: Literal["additive"]
    name: str = "additive"
    ground: List[str]
    values: List[List[RationalField]]
    disjoint_only: bool = False


class OrNode(BaseModel):
    id: str
    weight: RationalField


class OrEdge(BaseModel):
    source: str = Field(alias="from")
    target: str = Field(alias="to")
    p: RationalField


class OrInstanceFile(BaseModel):
    model: Literal["or_single_step"]
    name: str = "or"
    players: int = Field(default=2, ge=1)
    epsilon: Optional[RationalField] = None
    nodes: List[OrNode]
    edges: List[OrEdge]
    candidates: Optional[List[str]] = None
    count_seed_weight: bool = True
    disjoint_only: bool = False


class CoverageCell(BaseModel):
    value: RationalField
    disks: List[str]


class CoverageInstanceFile(BaseModel):
    model: Literal["disk_coverage"]
    name: str = "coverage"
    players: Optional[int] = Field(default=None, ge=1)
    player_weights: Optional[List[RationalField]] = None
    disks: List[str]
    cells: List[CoverageCell]
    disjoint_only: bool = False

    @model_validator(mode="after")
    def _fill_weights(self) -> "CoverageInstanceFile":
        if self.player_weights is None:
            self.player_weights = [1] * (self.players or 2)
        elif self.players is not None and self.players != len(self.player_weights):
            raise ValueError(f"players is {self.players} but {len(self.player_weights)} player_weights are given")
        self.players = len(self.player_weights)
        return self


def _model_tag(raw: Any) -> Optional[str]:
    if isinstance(raw, dict):
        return raw.get("model", "tabular")
    return getattr(raw, "model", None)


InstanceFile = Annotated[
    Union[
        Annotated[TabularInstanceFile, Tag("tabular")],
        Annotated[AdditiveInstanceFile, Tag("additive")],
        Annotated[OrInstanceFile, Tag("or_single_step")],
        Annotated[CoverageInstanceFile, Tag("disk_coverage")],
    ],
    Discriminator(_model_tag),
]

_instance_adapter: TypeAdapter = TypeAdapter(InstanceFile)


def _build(document: Any) -> WelfareModel:
    if isinstance(document, TabularInstanceFile):
        position = {label: index for index, label in enumerate(document.ground)}
        entries: Dict[Any, List[Any]] = {}
        for number, entry in enumerate(document.entries):
            try:
                key = tuple(frozenset(position[label] for label in items) for items in entry.profile)
            except KeyError as exc:
                raise ModelError(f"entries.{number}.profile: unknown element {exc.args[0]!r}") from None
            entries[key] = entry.utilities
        return TabularModel(
            document.players, len(document.ground), entries, document.name,
            document.ground, document.disjoint_only, document.complete,
        )
    if isinstance(document, AdditiveInstanceFile):
        return AdditiveModel(document.values, document.name, document.ground, document.disjoint_only)
    if isinstance(document, OrInstanceFile):
        graph = SpreadGraph(
            [(node.id, node.weight) for node in document.nodes],
            [(edge.source, edge.target, edge.p) for edge in document.edges],
        )
        return OrModel(
            graph, document.players, document.candidates, document.count_seed_weight,
            document.name, document.disjoint_only, document.epsilon,
        )
    return CoverageInstance(
        document.disks,
        [(cell.value, cell.disks) for cell in document.cells],
        document.player_weights,
        document.name,
        document.disjoint_only,
    )


def instance_document(model: WelfareModel) -> BaseModel:
    """
    Describe a model as an instance document.

    Spread graphs, coverage instances and additive models keep their own
    shape. Any other exact model is written as a table over its whole domain.

    Raises:
        ModelError: If the model only answers with estimates
        EnumerationCapExceeded: If the domain is too large to tabulate
    """
    if isinstance(model, OrModel):
        return OrInstanceFile.model_validate({
            "model": "or_single_step",
            "name": model.name,
            "players": model.player_count,
            "epsilon": model.epsilon,
            **model.graph.to_dict(),
            "candidates": list(model.candidates),
            "count_seed_weight": model.count_seed_weight,
            "disjoint_only": model.disjoint_only,
        })
    if isinstance(model, CoverageInstance):
        return CoverageInstanceFile(
            model="disk_coverage",
            name=model.name,
            players=model.player_count,
            player_weights=list(model.player_weights),
            disks=list(model.labels),
            cells=[
                CoverageCell(value=value, disks=[model.labels[disk] for disk in sorted(cover)])
                for value, cover in model.cells
            ],
            disjoint_only=model.disjoint_only,
        )
    if isinstance(model, AdditiveModel):
        return AdditiveInstanceFile(
            model="additive", name=model.name, ground=list(model.labels),
            values=[list(row) for row in model.values], disjoint_only=model.disjoint_only,
        )
    if not model.exact:
        raise ModelError(f"{model.name}: only exact models can be written as instances")

    patterns = model.player_count + 1 if model.disjoint_only else 2 ** model.player_count
    count = patterns ** model.ground_size
    if isinstance(model, TabularModel):
        table = model.entries
    else:
        if count > Config.ENUMERATION_CAP:
            raise EnumerationCapExceeded(f"{model.name}: tabulated profiles", count, Config.ENUMERATION_CAP)
        table = {
            sets: model.utilities(sets)
            for sets in enumerate_profiles(model.player_count, model.ground_size, model.disjoint_only)
        }
    return TabularInstanceFile(
        name=model.name,
        players=model.player_count,
        ground=list(model.labels),
        entries=[
            TabularEntry(profile=[[model.labels[e] for e in sorted(items)] for items in sets], utilities=list(values))
            for sets, values in table.items()
        ],
        disjoint_only=model.disjoint_only,
        complete=len(table) == count,
    )


def parse_instance(text: str, source: str = "<string>") -> WelfareModel:
    """
    Parse an instance document.

    Raises:
        InstanceFormatError: With line/column diagnostics for JSON syntax errors,
            dotted field paths for schema errors, or the model's own complaint
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(source, [(f"line {exc.lineno}, column {exc.colno}", exc.msg)]) from None
    try:
        document = _instance_adapter.validate_python(raw)
    except ValidationError as exc:
        diagnostics = [
            (".".join(str(part) for part in error["loc"]) or "<root>", error["msg"])
            for error in exc.errors()
        ]
        raise InstanceFormatError(source, diagnostics) from None
    try:
        return _build(document)
    except (ModelError, ValueError) as exc:
        raise InstanceFormatError(source, [("instance", str(exc))]) from None


def load_instance(path: Union[str, Path]) -> WelfareModel:
    """Load an instance file from disk."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceFormatError(str(path), [("file", exc.strerror or str(exc))]) from None
    model = parse_instance(text, str(path))
    logger.info(f"loaded {model.name} from {path} ({model.player_count} players, {model.ground_size} elements)")
    return model


def resolve_instance(source: str, epsilon: Optional[Any] = None, N: Optional[Any] = None) -> WelfareModel:
    """Load `fixture:NAME` from the bundled fixtures, anything else from a file."""
    if source.startswith(FIXTURE_PREFIX):
        return load_fixture(source[len(FIXTURE_PREFIX):], epsilon, N)
    return load_instance(source)


def save_instance(model: WelfareModel, path: Union[str, Path]) -> None:
    """Write a model as an instance document that `load_instance` reads back."""
    document = instance_document(model)
    Path(path).write_text(document.model_dump_json(indent=2, by_alias=True), encoding="utf-8")
    logger.info(f"wrote {model.name} to {path}")


def save_table(table: Union[MechanismTable, ScalarTable], path: Union[str, Path]) -> None:
    """Write a table export as JSON."""
    Path(path).write_text(table.to_export().model_dump_json(indent=2), encoding="utf-8")


def load_table(model: WelfareModel, path: Union[str, Path]) -> MechanismTable:
    """
    Read a table M export and rebuild it against `model`.

    Raises:
        InstanceFormatError: If the file is not a valid table M export
    """
    path = Path(path)
    try:
        export = TableExport.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        diagnostics = [(".".join(str(p) for p in e["loc"]) or "<root>", e["msg"]) for e in exc.errors()]
        raise InstanceFormatError(str(path), diagnostics) from None
    if export.kind != "M":
        raise InstanceFormatError(str(path), [("kind", f"expected a table M export, got {export.kind!r}")])
    return MechanismTable.from_export(model, export)
