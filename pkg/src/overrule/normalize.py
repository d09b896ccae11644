"""Final-answer extraction and equivalence for sampled solution texts.

Three answer formats are supported: free-form numeric solutions that end
with a ``#### <value>`` line (GSM8K style), A-D multiple choice, and boxed
math expressions.  Extraction never raises: text with no recognizable
answer yields an invalid result, which still counts toward attempted-output
totals downstream.

Canonical forms are idempotent, and when several candidate answers appear
in one text the last occurrence wins (final-answer convention).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction


class TaskFormat(Enum):
    NUMERIC = "numeric"
    MULTIPLE_CHOICE = "multiple_choice"
    BOXED = "boxed"


@dataclass(frozen=True)
class NormalizedAnswer:
    canonical: str
    valid: bool

    def __post_init__(self) -> None:
        if not self.valid and self.canonical != "":
            raise ValueError("invalid answers must have an empty canonical form")


INVALID_ANSWER = NormalizedAnswer("", False)

_HASH_LINE_RE = re.compile(r"####\s*([^\n]*)")
_NUMBER_RE = re.compile(r"[-+]?[$€£]?(?:\d+(?:,\d{3})*(?:\.\d+)?|\.\d+)")
_CURRENCY = "$€£"

# Explicit answer statements outrank bare letters; within each tier the last
# occurrence wins.
_MC_STATED_PAREN_RE = re.compile(
    r"(?:[Aa]nswer|[Cc]hoice|[Oo]ption)(?:\s+is)?\s*[:\-]?\s*\(\s*([A-Da-d])\s*\)"
)
_MC_STATED_BARE_RE = re.compile(
    r"(?:[Aa]nswer|[Cc]hoice|[Oo]ption)(?:\s+is)?\s*[:\-]?\s*([A-D])\b"
)
_MC_PAREN_RE = re.compile(r"\(\s*([A-Da-d])\s*\)")
_MC_BARE_RE = re.compile(r"\b([A-D])\b")

_BOXED_OPEN_RE = re.compile(r"\\boxed\s*\{")
_FRAC_BRACED_RE = re.compile(r"\\[dt]?frac\s*\{([^{}]*)\}\s*\{([^{}]*)\}")
_FRAC_DIGITS_RE = re.compile(r"\\[dt]?frac\s*(\d)\s*(\d)")
_SPACING_MACRO_RE = re.compile(r"\\[,;!\s]")
_RATIONAL_RE = re.compile(
    r"([-+]?(?:\d+(?:\.\d+)?|\.\d+))(?:/([-+]?(?:\d+(?:\.\d+)?|\.\d+)))?"
)


def _canonical_numeric(token: str) -> str | None:
    """Reduce a numeric token to a canonical decimal string.

    Strips commas, one leading currency symbol, redundant leading zeros and
    trailing fractional zeros; drops an explicit '+'; maps -0 to 0.
    """
    t = token.strip().replace(",", "")
    if t and t[0] in _CURRENCY:
        t = t[1:]
    sign = ""
    if t.startswith(("+", "-")):
        sign = "-" if t[0] == "-" else ""
        t = t[1:]
    if t and t[0] in _CURRENCY:
        t = t[1:]
    m = re.fullmatch(r"(\d*)(?:\.(\d*))?", t)
    if m is None or not (m.group(1) or m.group(2)):
        return None
    int_part = (m.group(1) or "").lstrip("0") or "0"
    frac_part = (m.group(2) or "").rstrip("0")
    body = f"{int_part}.{frac_part}" if frac_part else int_part
    if body == "0":
        return "0"
    return sign + body


def _extract_numeric(text: str) -> NormalizedAnswer:
    hash_lines = _HASH_LINE_RE.findall(text)
    if hash_lines:
        m = _NUMBER_RE.search(hash_lines[-1])
        if m is None:
            return INVALID_ANSWER
        canon = _canonical_numeric(m.group(0))
        return NormalizedAnswer(canon, True) if canon else INVALID_ANSWER
    for tok in reversed(_NUMBER_RE.findall(text)):
        canon = _canonical_numeric(tok)
        if canon is not None:
            return NormalizedAnswer(canon, True)
    return INVALID_ANSWER


def _extract_choice(text: str) -> NormalizedAnswer:
    for pattern in (_MC_STATED_PAREN_RE, _MC_STATED_BARE_RE, _MC_PAREN_RE, _MC_BARE_RE):
        matches = pattern.findall(text)
        if matches:
            return NormalizedAnswer(matches[-1].upper(), True)
    return INVALID_ANSWER


def _last_boxed_payload(text: str) -> str | None:
    """Payload of the last \\boxed{...}, with balanced-brace matching."""
    opens = list(_BOXED_OPEN_RE.finditer(text))
    if not opens:
        return None
    start = opens[-1].end()
    depth = 1
    pos = start
    while pos < len(text) and depth > 0:
        if text[pos] == "{":
            depth += 1
        elif text[pos] == "}":
            depth -= 1
        pos += 1
    if depth != 0:
        return None
    return text[start : pos - 1]


def _strip_outer_braces(s: str) -> str:
    while len(s) >= 2 and s[0] == "{" and s[-1] == "}":
        depth = 0
        spanning = True
        for i, ch in enumerate(s):
            if ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
            if depth == 0 and i < len(s) - 1:
                spanning = False
                break
        if not spanning:
            return s
        s = s[1:-1]
    return s


def _canonical_boxed(payload: str) -> str:
    s = payload.strip()
    while len(s) >= 2 and s[0] == "$" and s[-1] == "$":
        s = s[1:-1].strip()
    s = s.replace("\\left", "").replace("\\right", "")
    s = _SPACING_MACRO_RE.sub("", s)
    while True:
        flattened = _FRAC_BRACED_RE.sub(r"\1/\2", s)
        flattened = _FRAC_DIGITS_RE.sub(r"\1/\2", flattened)
        if flattened == s:
            break
        s = flattened
    s = _strip_outer_braces(s)
    return re.sub(r"\s+", "", s)


def _extract_boxed(text: str) -> NormalizedAnswer:
    payload = _last_boxed_payload(text)
    if payload is None:
        return INVALID_ANSWER
    canon = _canonical_boxed(payload)
    return NormalizedAnswer(canon, True) if canon else INVALID_ANSWER


def extract_answer(text: str, fmt: TaskFormat) -> NormalizedAnswer:
    """Extract and canonicalize the final answer of one solution text.

    Numeric: the last ``#### <value>`` line wins; without one, the last
    standalone number in the text. Multiple choice: explicit "Answer: (C)" /
    "the answer is C" statements, else the last standalone or parenthesized
    A-D letter. Boxed: payload of the last ``\\boxed{...}``.

    Never raises; unextractable text maps to an invalid answer.
    """
    if fmt is TaskFormat.NUMERIC:
        return _extract_numeric(text)
    if fmt is TaskFormat.MULTIPLE_CHOICE:
        return _extract_choice(text)
    if fmt is TaskFormat.BOXED:
        return _extract_boxed(text)
    raise ValueError(f"unknown task format: {fmt!r}")


def as_rational(canonical: str) -> Fraction | None:
    """Exact rational value of a canonical string, or None if not rational."""
    m = _RATIONAL_RE.fullmatch(canonical)
    if m is None:
        return None
    try:
        value = Fraction(m.group(1))
        if m.group(2) is not None:
            den = Fraction(m.group(2))
            if den == 0:
                return None
            value /= den
    except (ValueError, ZeroDivisionError):
        return None
    return value


def equivalence_key(canonical: str, fmt: TaskFormat) -> tuple[str, object]:
    """Hashable key under which equivalent canonical answers collide.

    Numeric and multiple-choice answers compare by exact canonical string.
    Boxed answers that evaluate to exact rationals compare by value; all
    other boxed answers fall back to string identity.
    """
    if fmt is TaskFormat.BOXED:
        value = as_rational(canonical)
        if value is not None:
            return ("rat", value)
    return ("str", canonical)


def answers_equivalent(a: NormalizedAnswer, b: NormalizedAnswer, fmt: TaskFormat) -> bool:
    """True when two extracted answers denote the same final answer.

    Either side invalid compares unequal. The relation is reflexive,
    symmetric, and transitive on valid answers.
    """
    if not (a.valid and b.valid):
        return False
    return equivalence_key(a.canonical, fmt) == equivalence_key(b.canonical, fmt)


def strings_equivalent(a: str, b: str, fmt: TaskFormat) -> bool:
    """answers_equivalent over bare canonical strings (both assumed valid)."""
    if not a or not b:
        return False
    return equivalence_key(a, fmt) == equivalence_key(b, fmt)


def canonicalize_label(raw: str, fmt: TaskFormat) -> str:
    """Canonicalize a reference answer given as a bare label.

    Unlike :func:`extract_answer` this expects the answer itself, not a full
    solution text: a number, an A-D letter, or a boxed payload (with or
    without the ``\\boxed{...}`` wrapper). Raises ValueError when the label
    cannot be canonicalized.
    """
    raw = raw.strip()
    if fmt is TaskFormat.NUMERIC:
        m = _NUMBER_RE.search(raw)
        canon = _canonical_numeric(m.group(0)) if m else None
        if canon is None:
            raise ValueError(f"not a numeric answer label: {raw!r}")
        return canon
    if fmt is TaskFormat.MULTIPLE_CHOICE:
        m = re.fullmatch(r"\(?\s*([A-Da-d])\s*\)?", raw)
        if m is None:
            raise ValueError(f"not a multiple-choice label: {raw!r}")
        return m.group(1).upper()
    if fmt is TaskFormat.BOXED:
        payload = _last_boxed_payload(raw)
        canon = _canonical_boxed(payload if payload is not None else raw)
        if not canon:
            raise ValueError(f"not a boxed answer label: {raw!r}")
        return canon
    raise ValueError(f"unknown task format: {fmt!r}")
