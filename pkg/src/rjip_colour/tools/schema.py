from __future__ import annotations

from os import R_OK, access
from pathlib import Path

from schema import And, Or, Use
from yaml import Loader, load

from .logger import INFO1, logger

IsNumber = Or(float, int, error='Invalid number "{}", expect int or float')


def IsReadable(filename: str):
    """Returns True if the file is readable"""
    return access(filename, R_OK)


IsFilename = Or(str, And(Path, Use(str)))

IsReadableFilename = And(IsFilename, IsReadable)


def IsSortedUniqueSeq(element):
    """Non-empty strictly increasing sequence of `element`, converted to a tuple"""
    return And(
        Or((element,), And([element], Use(tuple))),
        lambda seq: len(seq) > 0 and all(a < b for a, b in zip(seq, seq[1:])),
        error="Expect a non-empty strictly increasing sequence, got {}",
    )


def LoadYaml(fname: Path | str):
    if isinstance(fname, Path):
        fname = str(fname)
    with open(fname) as file:
        ret = load(file, Loader)

    logger.log(INFO1, f"Read: {fname}")
    return ret
