"""OEIS b-file parsing, cached retrieval, and digit comparison against certified enclosures."""

from __future__ import annotations

import os
import re
import tempfile
import urllib.error
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

from .analysis import LimitEnclosure, certified_fraction_digits
from .numerics import to_fraction

ID_RE = re.compile(r"^A\d{6}$")
CACHE_ENV = "TOWERLAB_CACHE_DIR"
URL_TEMPLATE = "https://oeis.org/{id}/b{digits}.txt"
MATCH_THRESHOLD = 10


class BFileError(ValueError):
    """Malformed b-file text."""


class FetchError(RuntimeError):
    pass


class NetworkError(FetchError):
    pass


class HTTPStatusError(FetchError):
    def __init__(self, status: int, url: str):
        super().__init__(f"HTTP {status} for {url}")
        self.status = status


class OfflineMiss(FetchError):
    pass


class AlignmentError(ValueError):
    pass


class MatchError(ValueError):
    def __init__(self, message: str, scores: dict):
        super().__init__(message)
        self.scores = scores


@dataclass(frozen=True)
class BFile:
    id: str
    entries: tuple[tuple[int, int], ...]

    @property
    def values(self) -> list[int]:
        return [v for _, v in self.entries]

    @property
    def offset(self) -> int:
        return self.entries[0][0]


def check_id(oeis_id: str) -> str:
    if not ID_RE.match(oeis_id or ""):
        raise ValueError(f"not an OEIS A-number: {oeis_id!r}")
    return oeis_id


def parse_bfile(text: str, oeis_id: str = "A000000") -> BFile:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise BFileError(f"line {lineno}: expected 'index value', got {raw!r}")
        try:
            idx, val = int(parts[0]), int(parts[1])
        except ValueError:
            raise BFileError(f"line {lineno}: non-integer field in {raw!r}") from None
        if entries and idx != entries[-1][0] + 1:
            raise BFileError(f"line {lineno}: gap at index {entries[-1][0] + 1} (found {idx})")
        entries.append((idx, val))
    if not entries:
        raise BFileError("empty b-file")
    return BFile(oeis_id, tuple(entries))


def serialize_bfile(bf: BFile) -> str:
    return "".join(f"{i} {v}\n" for i, v in bf.entries)


# --- retrieval -----------------------------------------------------------------

Transport = Callable[[str], tuple[int, bytes]]


def _urllib_transport(url: str) -> tuple[int, bytes]:
    req = urllib.request.Request(url, headers={"User-Agent": "towerlab"})
    try:
        with urllib.request.urlopen(req, timeout=30) as resp:
            return resp.status, resp.read()
    except urllib.error.HTTPError as e:
        return e.code, b""
    except (urllib.error.URLError, OSError) as e:
        raise NetworkError(f"cannot reach {url}: {e}") from e


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env) / "oeis"
    return Path(os.environ.get("XDG_CACHE_HOME", Path.home() / ".cache")) / "towerlab" / "oeis"


def bfile_url(oeis_id: str) -> str:
    return URL_TEMPLATE.format(id=oeis_id, digits=oeis_id[1:])


def atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fetch_bfile(
    oeis_id: str,
    cache_dir: str | Path | None = None,
    offline: bool = False,
    transport: Optional[Transport] = None,
) -> str:
    """b-file text for ``oeis_id``; the cache is consulted first and filled atomically."""
    check_id(oeis_id)
    cache = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = cache / f"b{oeis_id[1:]}.txt"
    if path.is_file():
        return path.read_bytes().decode("utf-8")
    if offline:
        raise OfflineMiss(f"{oeis_id} not in cache {cache} and network access is disabled")
    url = bfile_url(oeis_id)
    status, body = (transport or _urllib_transport)(url)
    if status != 200:
        raise HTTPStatusError(status, url)
    text = body.decode("utf-8")
    parse_bfile(text, oeis_id)  # refuse to cache garbage
    atomic_write(path, body)
    return text


# --- comparison ----------------------------------------------------------------


@dataclass
class Comparison:
    id: str
    matched_prefix: int
    first_mismatch: Optional[int]
    skipped_uncertain: int
    certified: int
    integer_entries: int

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "matched_prefix": self.matched_prefix,
            "first_mismatch": self.first_mismatch,
            "skipped_uncertain": self.skipped_uncertain,
            "certified_digits": self.certified,
            "integer_entries": self.integer_entries,
        }


def _integer_digits(iv) -> Optional[list[int]]:
    lo, hi = to_fraction(iv.lo), to_fraction(iv.hi)
    a, b = int(lo // 1), int(hi // 1)
    if a != b or a < 0:
        return None
    return [] if a == 0 else [int(c) for c in str(a)]


def compare_digits(enclosure: LimitEnclosure, bfile: BFile) -> Comparison:
    """Compare certified fractional digits with the b-file, first fractional digit at position 1.

    Leading b-file entries are treated as the integer part when they spell it
    (a value below 1 may be listed with or without a leading 0).  Positions
    past the certified digits count as skipped, never as matches.
    """
    iv = enclosure.interval
    digits = certified_fraction_digits(iv)
    vals = bfile.values
    whole = _integer_digits(iv)
    skip = None
    if whole is not None:
        for cand in ([0] if not whole else whole), whole:
            if vals[: len(cand)] == cand and len(vals) > len(cand):
                # prefer the reading under which the first certified digit lines up
                if not digits or vals[len(cand)] == digits[0]:
                    skip = len(cand)
                    break
        if skip is None and whole == []:
            skip = 0
        if skip is None:
            raise AlignmentError(
                f"{bfile.id}: integer part {whole} of the enclosure does not match b-file head {vals[:3]}"
            )
    else:
        skip = 0
    frac = vals[skip:]
    matched = 0
    first_mismatch = None
    for pos, (mine, theirs) in enumerate(zip(digits, frac), 1):
        if mine != theirs:
            first_mismatch = pos
            break
        matched += 1
    skipped = max(0, len(frac) - len(digits))
    return Comparison(bfile.id, matched, first_mismatch, skipped, len(digits), skip)


def auto_match(
    ids: list[str],
    enclosures: list[LimitEnclosure],
    bfiles: dict[str, BFile],
    threshold: int = MATCH_THRESHOLD,
) -> dict[str, LimitEnclosure]:
    """Pair each id with the single enclosure agreeing on at least ``threshold`` digits."""
    for e in enclosures:
        if len(certified_fraction_digits(e.interval)) < threshold:
            raise ValueError(f"{e.seq.name} {e.parity}: fewer than {threshold} certified digits")
    scores: dict[str, dict[str, int]] = {}
    result = {}
    for oeis_id in ids:
        row = {}
        hits = []
        for e in enclosures:
            label = f"{e.seq.name}:{e.parity}"
            try:
                m = compare_digits(e, bfiles[oeis_id]).matched_prefix
            except AlignmentError:
                m = 0
            row[label] = m
            if m >= threshold:
                hits.append(e)
        scores[oeis_id] = row
        if len(hits) == 1:
            result[oeis_id] = hits[0]
    used = [id(e) for e in result.values()]
    if len(result) != len(ids) or len(set(used)) != len(used):
        raise MatchError(f"no unique matching at threshold {threshold}: {scores}", scores)
    return result
