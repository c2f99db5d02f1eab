"""Sequential adaptive model rules."""

from __future__ import annotations

import copy
import hashlib

import numpy as np

from ..instances import InstanceSchema
from .rules import AmrConfig, Expansion, Rule, RuleSet

# event log entries: ("create", id, body) | ("expand", id, feature) | ("evict", id)
LogEntry = tuple


def promote_default(default: Rule, expansion: Expansion, new_id: int, schema: InstanceSchema, config: AmrConfig) -> tuple[Rule, Rule]:
    """Turn an expanding default rule into a normal rule and start a fresh default rule.

    The new default rule starts from the complement branch mean and inherits
    the linear-model weights.
    """
    head = default.head.snapshot()
    head.restart_mean(expansion.complement[0], expansion.complement[1])
    rule = default
    rule.id = new_id
    rule.expand(expansion)
    fresh = Rule(-1, schema, config, head)
    return rule, fresh


def rules_digest(log: list[LogEntry]) -> str:
    return hashlib.sha256(repr(log).encode()).hexdigest()


class AMRules:
    """Test-then-train rule learner; ordered mode trains the first accepting rule only."""

    def __init__(self, schema: InstanceSchema, config: AmrConfig | None = None):
        if schema.is_classification:
            raise ValueError("AMRules needs a numeric target")
        self.schema = schema
        self.config = config or AmrConfig()
        self.ruleset = RuleSet(Rule(-1, schema, self.config), self.config.ordered)
        self.next_id = 0
        self.log: list[LogEntry] = []
        self.anomalies = 0

    @property
    def default(self) -> Rule:
        return self.ruleset.default

    def predict(self, x: np.ndarray) -> float:
        return self.ruleset.predict(x)

    def predict_learn(self, x: np.ndarray, y: float | None) -> float:
        pred = self.predict(x)
        if y is not None:
            self.learn(x, y)
        return pred

    def learn(self, x: np.ndarray, y: float) -> None:
        accepted = False
        for rule in self.ruleset.covering(x):
            if rule.is_anomaly(x):
                self.anomalies += 1
                continue
            accepted = True
            self.update_rule(rule, x, y)
            if self.config.ordered:
                break
        if not accepted:
            self.update_default(x, y)

    def update_rule(self, rule: Rule, x: np.ndarray, y: float) -> None:
        if rule.drifted(x, y):
            self.ruleset.remove(rule.id)
            self.log.append(("evict", rule.id))
            return
        exp = rule.train(x, y)
        if exp is not None:
            rule.expand(exp)
            self.ruleset.invalidate()
            self.log.append(("expand", rule.id, exp.feature))

    def update_default(self, x: np.ndarray, y: float) -> None:
        exp = self.default.train(x, y)
        if exp is None:
            return
        rule, fresh = promote_default(self.default, exp, self.next_id, self.schema, self.config)
        self.next_id += 1
        self.ruleset.add(rule)
        self.ruleset.default = fresh
        self.log.append(("create", rule.id, rule.body))

    def bodies(self) -> dict[int, tuple]:
        return {r.id: r.body for r in self.ruleset.rules}

    def digest(self) -> str:
        return rules_digest(self.log)

    def clone(self) -> "AMRules":
        return copy.deepcopy(self)
