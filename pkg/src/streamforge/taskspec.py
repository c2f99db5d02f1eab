"""Task strings such as ``PrequentialEvaluation -l (VAMR -p 2) -s (WaveformGenerator) -f 1000``.

A component is a name followed by ``-flag value`` pairs. A value is either
a parenthesized component or the run of bare tokens up to the next flag or
closing parenthesis, joined by single spaces.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Union

TASK_NAMES = ("PrequentialEvaluation",)


class TaskParseError(ValueError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


Value = Union[str, "ComponentSpec"]


@dataclass
class ComponentSpec:
    name: str
    flags: dict[str, Value] = field(default_factory=dict)

    def get(self, flag: str, default: str | None = None) -> str | None:
        v = self.flags.get(flag, default)
        if isinstance(v, ComponentSpec):
            raise TaskParseError(f"flag -{flag} of {self.name} expects a plain value", 0)
        return v

    def component(self, flag: str) -> "ComponentSpec | None":
        """The nested component under ``flag``; a bare name counts as a component without flags."""
        v = self.flags.get(flag)
        if v is None or isinstance(v, ComponentSpec):
            return v
        return ComponentSpec(v)


@dataclass
class TaskSpec:
    task: str
    flags: dict[str, Value] = field(default_factory=dict)

    def as_component(self) -> ComponentSpec:
        return ComponentSpec(self.task, self.flags)


_TOKEN = re.compile(r'\s*(?:(\()|(\))|"((?:[^"\\]|\\.)*)"|([^\s()"]+))')


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Tokens as (kind, text, offset); kinds are '(', ')', 'word' and 'quoted'."""
    tokens = []
    pos = 0
    depth = 0
    opened: list[int] = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            raise TaskParseError("unterminated quote", text.index('"', pos))
        start = m.start(m.lastindex)
        if m.group(1):
            tokens.append(("(", "(", start))
            depth += 1
            opened.append(start)
        elif m.group(2):
            if depth == 0:
                raise TaskParseError("unbalanced ')'", start)
            tokens.append((")", ")", start))
            depth -= 1
            opened.pop()
        elif m.group(3) is not None:
            tokens.append(("quoted", re.sub(r"\\(.)", r"\1", m.group(3)), start - 1))
        else:
            tokens.append(("word", m.group(4), start))
        pos = m.end()
    if depth:
        raise TaskParseError("unbalanced '(' never closed", opened[-1])
    return tokens


def _is_flag(tok: tuple[str, str, int]) -> bool:
    kind, text, _ = tok
    return kind == "word" and len(text) > 1 and text[0] == "-" and not _is_number(text)


def _is_number(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def end_offset(self) -> int:
        return len(self.text)

    def component(self) -> ComponentSpec:
        tok = self.peek()
        if tok is None or tok[0] not in ("word", "quoted") or _is_flag(tok):
            raise TaskParseError("expected a component name", tok[2] if tok else self.end_offset())
        self.i += 1
        spec = ComponentSpec(tok[1])
        while (tok := self.peek()) is not None and tok[0] != ")":
            if not _is_flag(tok):
                raise TaskParseError(f"expected a flag, got {tok[1]!r}", tok[2])
            flag = tok[1][1:]
            if flag in spec.flags:
                raise TaskParseError(f"duplicate flag -{flag}", tok[2])
            self.i += 1
            spec.flags[flag] = self.value(flag, tok[2])
        return spec

    def value(self, flag: str, at: int) -> Value:
        tok = self.peek()
        if tok is None or tok[0] == ")" or _is_flag(tok):
            raise TaskParseError(f"missing value for -{flag}", at)
        if tok[0] == "(":
            self.i += 1
            inner = self.component()
            close = self.peek()
            if close is None or close[0] != ")":
                raise TaskParseError("expected ')'", close[2] if close else self.end_offset())
            self.i += 1
            return inner
        words = []
        while (tok := self.peek()) is not None and tok[0] in ("word", "quoted") and not _is_flag(tok):
            words.append(tok[1])
            self.i += 1
        return " ".join(words)


def parse_component(text: str) -> ComponentSpec:
    p = _Parser(text)
    spec = p.component()
    if p.peek() is not None:
        raise TaskParseError("trailing input", p.peek()[2])
    return spec


def parse_task(text: str) -> TaskSpec:
    """Parse a task string; raises ``TaskParseError`` carrying the offending offset."""
    if not text.strip():
        raise TaskParseError("empty task string", 0)
    spec = parse_component(text)
    if spec.name not in TASK_NAMES:
        raise TaskParseError(f"unknown task {spec.name!r}; known tasks: {', '.join(TASK_NAMES)}", text.index(spec.name))
    return TaskSpec(spec.name, spec.flags)


def _plain(word: str) -> bool:
    """True when ``word`` survives re-tokenization unquoted as a single value word."""
    return bool(word) and not re.search(r'[\s()"]', word) and not (word[0] == "-" and not _is_number(word))


def _format_word(text: str) -> str:
    if _plain(text):
        return text
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def format_value(v: Value) -> str:
    if isinstance(v, ComponentSpec):
        return f"({format_component(v)})"
    if all(_plain(w) for w in v.split(" ")):
        return v
    return _format_word(v)


def format_component(spec: ComponentSpec) -> str:
    parts = [_format_word(spec.name)]
    for k, v in spec.flags.items():
        parts.append(f"-{k} {format_value(v)}")
    return " ".join(parts)


def format_task(spec: TaskSpec) -> str:
    return format_component(spec.as_component())
