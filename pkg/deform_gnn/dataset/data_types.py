# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import dataclasses
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import (
    Any,
    Dict,
    IO,
    List,
    Optional,
    Tuple,
    Type,
    TypeVar,
    Union,
    get_args,
    get_origin,
)

import numpy as np


_X = TypeVar("_X")


class SplitPart(Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass
class DataSplit:
    # boolean masks of length n, pairwise disjoint and covering every node
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray

    def mask(self, part: Union[SplitPart, str]) -> np.ndarray:
        part = SplitPart(part)
        return getattr(self, f"{part.value}_mask")

    def indices(self, part: Union[SplitPart, str]) -> np.ndarray:
        return np.flatnonzero(self.mask(part))

    def __eq__(self, other) -> bool:
        if not isinstance(other, DataSplit):
            return NotImplemented
        return all(
            np.array_equal(self.mask(p), other.mask(p)) for p in SplitPart
        )


@dataclass
class Dataset:
    """
    One node-classification graph. `edges` holds every undirected edge once,
    as rows (u, v) with u < v sorted lexicographically; self-loops are never
    stored.
    """

    features: np.ndarray
    edges: np.ndarray
    labels: np.ndarray
    num_classes: int
    splits: List[DataSplit] = field(default_factory=list)
    name: str = "graph"

    @property
    def num_nodes(self) -> int:
        return int(self.features.shape[0])

    @property
    def num_features(self) -> int:
        return int(self.features.shape[1])

    @property
    def num_edges(self) -> int:
        return int(self.edges.shape[0])

    def split(self, index: int) -> DataSplit:
        if not 0 <= index < len(self.splits):
            raise ValueError(
                f"Dataset {self.name} has {len(self.splits)} splits, "
                f"split {index} requested."
            )
        return self.splits[index]


@dataclass
class DatasetStats:
    num_classes: int
    num_nodes: int
    num_edges: int
    num_features: int
    average_degree: float
    # None when the graph has no edges
    homophily_ratio: Optional[float] = None


def dump_dataclass(obj: Any, f: IO, binary: bool = False, **json_kwargs) -> None:
    """
    Args:
        f: A file opened for writing.
        obj: A @dataclass or collection hierarchy including dataclasses.
        binary: Set to True if `f` is opened in binary mode.
        json_kwargs: Forwarded to `json.dumps`, e.g. `indent`, `sort_keys`.
    """
    text = json.dumps(_asdict_rec(obj), **json_kwargs)
    f.write(text.encode("utf8") if binary else text)


def load_dataclass(f: IO, cls: Type[_X], binary: bool = False) -> _X:
    """
    Loads a @dataclass or collection hierarchy including dataclasses from json.
    Call it like load_dataclass(f, typing.List[DatasetStats]).
    Raises KeyError if json has keys not mapping to the dataclass fields.
    """
    if binary:
        asdict = json.loads(f.read().decode("utf8"))
    else:
        asdict = json.load(f)
    return _dataclass_from_dict(asdict, cls)


def _dataclass_from_dict(d, typeannot):
    if d is None or typeannot is Any:
        return d
    is_optional, contained_type = _resolve_optional(typeannot)
    if is_optional:
        # an Optional not set to None, just use the contents of the Optional.
        return _dataclass_from_dict(d, contained_type)

    cls = get_origin(typeannot) or typeannot
    if isinstance(cls, type) and issubclass(cls, Enum):
        return cls(d)
    if not isinstance(cls, type):
        return d
    if issubclass(cls, tuple) and hasattr(cls, "_fields"):  # namedtuple
        types = cls.__annotations__.values()
        return cls(*[_dataclass_from_dict(v, tp) for v, tp in zip(d, types)])
    elif issubclass(cls, (list, tuple)):
        types = get_args(typeannot)
        if len(types) == 1 or (len(types) == 2 and types[1] is Ellipsis):
            types = types[:1] * len(d)
        return cls(_dataclass_from_dict(v, tp) for v, tp in zip(d, types))
    elif issubclass(cls, dict):
        key_t, val_t = get_args(typeannot) or (Any, Any)
        return cls(
            (_dataclass_from_dict(k, key_t), _dataclass_from_dict(v, val_t))
            for k, v in d.items()
        )
    elif not dataclasses.is_dataclass(typeannot):
        return d

    fieldtypes = {f.name: _unwrap_type(f.type) for f in dataclasses.fields(typeannot)}
    unknown = set(d) - set(fieldtypes)
    if unknown:
        raise KeyError(f"Unknown fields {sorted(unknown)} for {cls.__name__}.")
    return cls(**{k: _dataclass_from_dict(v, fieldtypes[k]) for k, v in d.items()})


def _unwrap_type(tp):
    # strips Optional wrapper, if any
    if get_origin(tp) is Union:
        args = get_args(tp)
        if len(args) == 2 and any(a is type(None) for a in args):  # noqa: E721
            # this is typing.Optional
            return args[0] if args[1] is type(None) else args[1]  # noqa: E721
    return tp


def _asdict_rec(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: _asdict_rec(getattr(obj, f.name)) for f in dataclasses.fields(obj)
        }
    if isinstance(obj, Enum):
        return obj.value
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, tuple) and hasattr(obj, "_fields"):
        return type(obj)(*[_asdict_rec(v) for v in obj])
    if isinstance(obj, (list, tuple)):
        return type(obj)(_asdict_rec(v) for v in obj)
    if isinstance(obj, dict):
        return {_asdict_rec(k): _asdict_rec(v) for k, v in obj.items()}
    return obj


def _resolve_optional(type_: Any) -> Tuple[bool, Any]:
    """Check whether `type_` is equivalent to `typing.Optional[T]` for some T."""
    if get_origin(type_) is Union:
        args = get_args(type_)
        if len(args) == 2 and args[1] == type(None):  # noqa E721
            return True, args[0]
    if type_ is Any:
        return True, Any

    return False, type_
