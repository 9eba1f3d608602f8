"""Template-based text for a counterfactual: one line per changed feature,
values shown in raw units.
"""
from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .counterfactual import CounterfactualResult
from .dataset import Categorical, Schema
from .errors import BadTemplate

PLACEHOLDERS = frozenset({"feature", "old", "new", "outcome_from", "outcome_to", "direction"})
DEFAULT_TEMPLATE = "{direction} {feature} from {old} to {new}"
HEADER = "The model predicts '{outcome_from}'. To obtain '{outcome_to}':"
OUTCOME = "With these changes the model predicts '{outcome_to}'."

_LINE = re.compile(r"^(increase|decrease|change) (.+) from (.+) to (.+)$")


@dataclass(frozen=True)
class ExplanationText:
    lines: tuple[str, ...]
    raw_changes: tuple[tuple[str, object, object], ...]

    def __str__(self):
        return "\n".join(self.lines)


def _fmt(v) -> str:
    return v if isinstance(v, str) else f"{v:.4g}"


def _display(v):
    # the value as it reads back from its rendering
    return v if isinstance(v, str) else float(f"{v:.4g}")


def check_template(template: str) -> None:
    try:
        fields = [f for _, f, _, _ in string.Formatter().parse(template) if f is not None]
    except ValueError as exc:
        raise BadTemplate(str(exc)) from None
    for f in fields:
        if f not in PLACEHOLDERS:
            raise BadTemplate(f"unknown placeholder {{{f}}}; allowed: {sorted(PLACEHOLDERS)}")


def render(result: CounterfactualResult, query: np.ndarray, schema: Schema,
           class_names: Sequence[str] | None = None,
           template: str | None = None) -> ExplanationText:
    """Render ``result`` as text.

    ``template`` formats each change line; it may use {feature}, {old}, {new},
    {direction}, {outcome_from} and {outcome_to}. Changes are listed in the
    order they were applied.
    """
    template = DEFAULT_TEMPLATE if template is None else template
    check_template(template)
    names = list(schema.class_labels if class_names is None else class_names)
    outcome = {"outcome_from": names[result.query_class], "outcome_to": names[result.new_class]}
    query = np.asarray(query, dtype=float)
    cf = result.counterfactual

    lines, raw = [HEADER.format(**outcome)], []
    for i in (c.feature for c in result.changed_features):
        if query[i] == cf[i]:
            continue
        f = schema.features[i]
        if isinstance(f.kind, Categorical):
            old, new, direction = f.kind.name(query[i]), f.kind.name(cf[i]), "change"
        else:
            old, new = f.kind.denormalize(query[i]), f.kind.denormalize(cf[i])
            direction = "increase" if cf[i] > query[i] else "decrease"
        lines.append(template.format(feature=f.name, old=_fmt(old), new=_fmt(new),
                                     direction=direction, **outcome))
        raw.append((f.name, _display(old), _display(new)))
    lines.append(OUTCOME.format(**outcome))
    return ExplanationText(tuple(lines), tuple(raw))


def parse_default(text: ExplanationText | str, schema: Schema) -> list[tuple[str, object, object]]:
    """Recover (feature, old, new) triples from a default-template rendering."""
    lines = str(text).splitlines()
    out = []
    kinds = {f.name: f.kind for f in schema.features}
    for line in lines[1:-1]:
        mt = _LINE.match(line)
        if mt is None:
            raise ValueError(f"not a change line: {line!r}")
        _, name, old, new = mt.groups()
        if isinstance(kinds[name], Categorical):
            out.append((name, old, new))
        else:
            out.append((name, float(old), float(new)))
    return out
