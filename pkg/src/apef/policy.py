"""Executable evaluation policies: formula DSL, parsing, application,
LLM-driven extraction, and the two-stage validation/update protocol."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset, PairedSample, TargetRanking
from .errors import (
    EvaluationError,
    FormulaSyntaxError,
    InsufficientPairs,
    ParseFailure,
    PointSumError,
    SchemaViolation,
)
from .metrics import mae as _mae, rmse as _rmse
from .series import (
    TimeSeries,
    detect_peaks,
    first_derivative,
    second_derivative,
    segment,
    spearman,
)
from .errors import DegenerateRanking, NoRiseFallPattern

POINT_TOTAL = 10
SCREEN_THRESHOLD = 0.7
SCREEN_MIN_PAIRS = 5
VALIDATION_THRESHOLD = 0.7

SERIES_INPUTS = ("pred", "obs")


# ---------------------------------------------------------------------------
# Formula AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Name:
    identifier: str


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Call:
    function: str
    args: tuple


@dataclass(frozen=True)
class Compare:
    op: str
    left: object
    right: object


# function name -> (min arity, max arity)
FUNCTIONS = {
    "abs": (1, 1),
    "min": (1, 2),
    "max": (1, 2),
    "mean": (1, 1),
    "sum": (1, 1),
    "sqrt": (1, 1),
    "exp": (1, 1),
    "clamp01": (1, 1),
    "len": (1, 1),
    "count_where": (1, 1),
    "rmse": (2, 2),
    "mae": (2, 2),
    "corr_spearman": (2, 2),
    "peak_count": (1, 1),
    "peak_period_length": (1, 1),
    "derivative_mse": (2, 2),
    "second_derivative_mse": (2, 2),
}

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>>=|<=|==|!=|[-+*/(),<>]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None or m.end() == pos:
            rest = text[pos:]
            if rest.strip():
                at = pos + len(rest) - len(rest.lstrip())
                raise FormulaSyntaxError(f"unexpected character {text[at]!r}", at)
            break
        if m.group("num"):
            tokens.append(("num", m.group("num"), m.start()))
        elif m.group("name"):
            tokens.append(("name", m.group("name"), m.start()))
        else:
            tokens.append(("op", m.group("op"), m.start()))
        pos = m.end()
    return tokens


class _Parser:
    """Recursive descent over standard infix arithmetic with function calls.

    Comparison operators are legal only as the single argument of count_where.
    """

    def __init__(self, text: str, names: tuple[str, ...]):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.names = set(names)

    def _peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None, len(self.text))

    def _next(self):
        tok = self._peek()
        self.pos += 1
        return tok

    def _expect(self, value: str):
        kind, tok, at = self._next()
        if kind != "op" or tok != value:
            raise FormulaSyntaxError(f"expected {value!r}, got {tok!r}", at)

    def parse(self):
        node = self.expr()
        kind, tok, at = self._peek()
        if kind is not None:
            raise FormulaSyntaxError(f"trailing input {tok!r}", at)
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, tok, _ = self._peek()
            if kind == "op" and tok in ("+", "-"):
                self._next()
                node = BinOp(tok, node, self.term())
            else:
                return node

    def term(self):
        node = self.factor()
        while True:
            kind, tok, _ = self._peek()
            if kind == "op" and tok in ("*", "/"):
                self._next()
                node = BinOp(tok, node, self.factor())
            else:
                return node

    def factor(self):
        kind, tok, at = self._peek()
        if kind == "op" and tok == "-":
            self._next()
            return Neg(self.factor())
        return self.primary()

    def comparison(self):
        left = self.expr()
        kind, tok, at = self._next()
        if kind != "op" or tok not in (">", "<", ">=", "<=", "==", "!="):
            raise FormulaSyntaxError("count_where needs a comparison argument", at)
        return Compare(tok, left, self.expr())

    def primary(self):
        kind, tok, at = self._next()
        if kind == "num":
            return Num(float(tok))
        if kind == "name":
            nk, ntok, _ = self._peek()
            if nk == "op" and ntok == "(":
                return self.call(tok, at)
            if tok not in self.names:
                raise FormulaSyntaxError(f"unknown name {tok!r}", at)
            return Name(tok)
        if kind == "op" and tok == "(":
            node = self.expr()
            self._expect(")")
            return node
        raise FormulaSyntaxError(f"unexpected token {tok!r}", at)

    def call(self, fname: str, at: int):
        if fname not in FUNCTIONS:
            raise FormulaSyntaxError(f"unknown function {fname!r}", at)
        self._expect("(")
        args = []
        if fname == "count_where":
            args.append(self.comparison())
        else:
            args.append(self.expr())
            while True:
                kind, tok, _ = self._peek()
                if kind == "op" and tok == ",":
                    self._next()
                    args.append(self.expr())
                else:
                    break
        self._expect(")")
        lo, hi = FUNCTIONS[fname]
        if not lo <= len(args) <= hi:
            raise FormulaSyntaxError(
                f"{fname} takes {lo}..{hi} arguments, got {len(args)}", at
            )
        return Call(fname, tuple(args))


def parse_formula(text: str, names: tuple[str, ...] = SERIES_INPUTS):
    """Parse a formula string into an AST closed over the given input names."""
    return _Parser(text, names).parse()


def count_nodes(node) -> int:
    if isinstance(node, (Num, Name)):
        return 1
    if isinstance(node, Neg):
        return 1 + count_nodes(node.operand)
    if isinstance(node, (BinOp, Compare)):
        return 1 + count_nodes(node.left) + count_nodes(node.right)
    if isinstance(node, Call):
        return 1 + sum(count_nodes(a) for a in node.args)
    raise TypeError(type(node))


# ---------------------------------------------------------------------------
# Formula evaluation
# ---------------------------------------------------------------------------


def _as_scalar(value, context: str) -> float:
    if isinstance(value, np.ndarray):
        if value.size == 1:
            return float(value.reshape(-1)[0])
        raise EvaluationError(f"{context} produced a series, expected a scalar")
    return float(value)


def _peak_period_length(values) -> float:
    try:
        seg = segment(TimeSeries("_", "_", np.asarray(values, dtype=float)))
    except (NoRiseFallPattern, ValueError) as err:
        raise EvaluationError(f"peak_period_length: {err}") from err
    return float(seg.fall_end - seg.rise_start + 1)


def _eval(node, env: dict):
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Name):
        if node.identifier not in env:
            raise EvaluationError(f"unbound name {node.identifier!r}")
        return env[node.identifier]
    if isinstance(node, Neg):
        return -_eval(node.operand, env)
    if isinstance(node, BinOp):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        denom = np.asarray(right, dtype=float)
        if np.any(denom == 0.0):
            raise EvaluationError("division by zero")
        return left / right
    if isinstance(node, Compare):
        left = _eval(node.left, env)
        right = _eval(node.right, env)
        op = node.op
        if op == ">":
            return np.asarray(left) > right
        if op == "<":
            return np.asarray(left) < right
        if op == ">=":
            return np.asarray(left) >= right
        if op == "<=":
            return np.asarray(left) <= right
        if op == "==":
            return np.asarray(left) == right
        return np.asarray(left) != right
    if isinstance(node, Call):
        args = [_eval(a, env) for a in node.args]
        return _call(node.function, args)
    raise TypeError(type(node))


def _call(fname: str, args: list):
    if fname == "abs":
        return np.abs(args[0])
    if fname in ("min", "max"):
        reducer = np.minimum if fname == "min" else np.maximum
        if len(args) == 2:
            return reducer(args[0], args[1])
        arr = np.asarray(args[0], dtype=float)
        return float(arr.min() if fname == "min" else arr.max())
    if fname == "mean":
        return float(np.mean(args[0]))
    if fname == "sum":
        return float(np.sum(args[0]))
    if fname == "sqrt":
        arr = np.asarray(args[0], dtype=float)
        if np.any(arr < 0):
            raise EvaluationError("sqrt of a negative value")
        return np.sqrt(args[0])
    if fname == "exp":
        return np.exp(args[0])
    if fname == "clamp01":
        return np.clip(args[0], 0.0, 1.0)
    if fname == "len":
        return float(np.asarray(args[0]).size)
    if fname == "count_where":
        return float(np.count_nonzero(args[0]))
    if fname == "rmse":
        return _rmse(np.asarray(args[0], dtype=float), np.asarray(args[1], dtype=float))
    if fname == "mae":
        return _mae(np.asarray(args[0], dtype=float), np.asarray(args[1], dtype=float))
    if fname == "corr_spearman":
        try:
            return spearman(args[0], args[1])
        except DegenerateRanking as err:
            raise EvaluationError(str(err)) from err
    if fname == "peak_count":
        return float(len(detect_peaks(args[0])))
    if fname == "peak_period_length":
        return _peak_period_length(args[0])
    if fname == "derivative_mse":
        d = first_derivative(args[0]) - first_derivative(args[1])
        return float(np.mean(d**2))
    if fname == "second_derivative_mse":
        d = second_derivative(args[0]) - second_derivative(args[1])
        return float(np.mean(d**2))
    raise EvaluationError(f"unknown function {fname!r}")  # pragma: no cover


def eval_formula(ast, pred: TimeSeries | np.ndarray, obs: TimeSeries | np.ndarray) -> float:
    """Evaluate a metric formula over a prediction/observation pair."""
    env = {
        "pred": pred.values if isinstance(pred, TimeSeries) else np.asarray(pred, dtype=float),
        "obs": obs.values if isinstance(obs, TimeSeries) else np.asarray(obs, dtype=float),
    }
    return _as_scalar(_eval(ast, env), "formula")


# ---------------------------------------------------------------------------
# Policy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Policy:
    """Four-part evaluation policy: metrics, formulas, point scoring, decision rule."""

    version: int
    metrics: tuple[dict, ...]  # ({name, description}, ...)
    formulas: dict[str, str]  # metric name -> formula source text
    scoring: dict[str, int]  # metric name -> points, summing to POINT_TOTAL
    aggregation: str | None = None  # expression over scaled metric values
    tie_breakers: tuple[str, ...] = ()
    provenance: dict = field(default_factory=dict)

    @property
    def metric_names(self) -> tuple[str, ...]:
        return tuple(m["name"] for m in self.metrics)

    def formula_ast(self, name: str):
        return parse_formula(self.formulas[name])

    def aggregation_ast(self):
        if self.aggregation is None:
            return None
        return parse_formula(self.aggregation, names=self.metric_names)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "metrics": [dict(m) for m in self.metrics],
            "formulas": dict(self.formulas),
            "scoring": dict(self.scoring),
            "decision": {
                "aggregation": self.aggregation,
                "tie_breakers": list(self.tie_breakers),
            },
            "provenance": dict(self.provenance),
        }


def serialize_policy(policy: Policy) -> str:
    return json.dumps(policy.to_dict(), sort_keys=True)


def parse_policy_dict(obj: dict) -> Policy:
    """Validate the policy JSON schema and all policy invariants."""
    if not isinstance(obj.get("metrics"), list) or not obj["metrics"]:
        raise SchemaViolation("metrics: need a non-empty list")
    metrics = []
    for m in obj["metrics"]:
        if not isinstance(m, dict) or "name" not in m:
            raise SchemaViolation("metrics: each entry needs a name")
        metrics.append({"name": str(m["name"]), "description": str(m.get("description", ""))})
    names = [m["name"] for m in metrics]
    if len(set(names)) != len(names):
        raise SchemaViolation("metrics: duplicate metric names")
    formulas = obj.get("formulas")
    if not isinstance(formulas, dict):
        raise SchemaViolation("formulas: need a name -> expression map")
    for name in names:
        if name not in formulas:
            raise SchemaViolation(f"formulas: missing formula for metric {name!r}")
        parse_formula(str(formulas[name]))  # raises FormulaSyntaxError on bad input
    for name in formulas:
        if name not in names:
            raise SchemaViolation(f"formulas: {name!r} is not a declared metric")
    scoring = obj.get("scoring")
    if not isinstance(scoring, dict):
        raise SchemaViolation("scoring: need a name -> points map")
    for name, pts in scoring.items():
        if name not in names:
            raise SchemaViolation(f"scoring: {name!r} is not a declared metric")
        if not isinstance(pts, int) or isinstance(pts, bool) or pts <= 0:
            raise SchemaViolation(f"scoring: points for {name!r} must be a positive integer")
    if set(scoring) != set(names):
        raise SchemaViolation("scoring: every metric needs a point allocation")
    total = sum(scoring.values())
    if total != POINT_TOTAL:
        raise PointSumError(f"scoring: points sum to {total}, expected {POINT_TOTAL}")
    decision = obj.get("decision") or {}
    aggregation = decision.get("aggregation")
    tie_breakers = tuple(decision.get("tie_breakers", ()))
    for tb in tie_breakers:
        if tb not in names:
            raise SchemaViolation(f"decision: tie_breaker {tb!r} is not a declared metric")
    if aggregation is not None:
        parse_formula(str(aggregation), names=tuple(names))
    return Policy(
        version=int(obj.get("version", 1)),
        metrics=tuple(metrics),
        formulas={k: str(v) for k, v in formulas.items()},
        scoring={k: int(v) for k, v in scoring.items()},
        aggregation=None if aggregation is None else str(aggregation),
        tie_breakers=tie_breakers,
        provenance=dict(obj.get("provenance", {})),
    )


def parse_policy(json_text: str) -> Policy:
    try:
        obj = json.loads(json_text)
    except json.JSONDecodeError as err:
        raise SchemaViolation(f"invalid JSON: {err}") from err
    if not isinstance(obj, dict):
        raise SchemaViolation("policy JSON must be an object")
    return parse_policy_dict(obj)


@dataclass(frozen=True)
class PolicyVerdict:
    """Application result: per-series aggregate scores, induced ranking, and
    the raw per-metric values kept as an audit trail."""

    scores: dict[str, float]
    ranking: tuple[str, ...]
    raw_values: dict[str, dict[str, float]]
    errors: dict[str, str]

    def to_dict(self) -> dict:
        return {
            "scores": dict(self.scores),
            "ranking": list(self.ranking),
            "raw_values": {k: dict(v) for k, v in self.raw_values.items()},
            "errors": dict(self.errors),
        }


def score_candidate(policy: Policy, pred: TimeSeries, obs: TimeSeries) -> tuple[float, dict[str, float]]:
    """Aggregate score and raw metric values for one candidate."""
    raw = {}
    for name in policy.metric_names:
        raw[name] = eval_formula(policy.formula_ast(name), pred, obs)
    scaled = {name: raw[name] * policy.scoring[name] for name in raw}
    agg_ast = policy.aggregation_ast()
    if agg_ast is None:
        aggregate = float(sum(scaled.values()))
    else:
        aggregate = _as_scalar(_eval(agg_ast, scaled), "aggregation")
    return aggregate, raw


def apply_policy(policy: Policy, candidates: list[TimeSeries], obs: TimeSeries) -> PolicyVerdict:
    """Score every candidate and rank them, tie-breaking on raw metric values
    then series id.  Candidates that fail evaluation rank last and carry the
    error in the audit trail."""
    scores: dict[str, float] = {}
    raw_values: dict[str, dict[str, float]] = {}
    errors: dict[str, str] = {}
    for cand in candidates:
        if len(cand) != len(obs):
            raise ValueError(f"{cand.instance_id}: length differs from observation")
        try:
            scores[cand.instance_id], raw_values[cand.instance_id] = score_candidate(
                policy, cand, obs
            )
        except EvaluationError as err:
            errors[cand.instance_id] = str(err)
            raw_values[cand.instance_id] = {}

    def sort_key(sid: str):
        failed = sid in errors
        aggregate = scores.get(sid, float("-inf"))
        tiebreak = tuple(
            -raw_values[sid].get(tb, float("-inf")) for tb in policy.tie_breakers
        )
        return (failed, -aggregate, tiebreak, sid)

    ranking = tuple(sorted((c.instance_id for c in candidates), key=sort_key))
    return PolicyVerdict(scores=scores, ranking=ranking, raw_values=raw_values, errors=errors)


# ---------------------------------------------------------------------------
# Dataset-level helpers (single- or two-variable evaluation)
# ---------------------------------------------------------------------------


def policy_score(policy: Policy, dataset: Dataset, sid: str, variables: list[str]) -> float:
    """Aggregate policy score for one prediction set, averaged over variables."""
    totals = []
    for var in variables:
        aggregate, _ = score_candidate(
            policy, dataset.predictions[sid][var], dataset.observations[var]
        )
        totals.append(aggregate)
    return float(np.mean(totals))


def policy_correlation(
    policy: Policy,
    dataset: Dataset,
    ids: tuple[str, ...],
    target: TargetRanking,
    variables: list[str],
) -> float:
    """Spearman correlation between policy scores and target scores over ids."""
    scores = [policy_score(policy, dataset, sid, variables) for sid in ids]
    targets = [target.score_of(sid) for sid in ids]
    return spearman(scores, targets)


# ---------------------------------------------------------------------------
# Extraction, screening, and the update protocol
# ---------------------------------------------------------------------------


POLICY_SCHEMA_HINT = json.dumps(
    {
        "version": 1,
        "metrics": [{"name": "<metric name>", "description": "<what it measures>"}],
        "formulas": {"<metric name>": "<expression over pred and obs>"},
        "scoring": {"<metric name>": "<positive integer, all summing to 10>"},
        "decision": {"aggregation": None, "tie_breakers": []},
    },
    indent=2,
)

POLICY_SYSTEM_PROMPT = (
    "You synthesize structured evaluation policies for time-series predictions. "
    "Respond with a single JSON object following the given schema; formulas use "
    "infix arithmetic over pred and obs with functions: "
    + ", ".join(sorted(FUNCTIONS))
    + "."
)


def metric_churn(prior: Policy | None, candidate: Policy) -> int:
    """Number of metrics added plus removed relative to the prior policy."""
    if prior is None:
        return 0
    before = set(prior.metric_names)
    after = set(candidate.metric_names)
    return len(after - before) + len(before - after)


def extract_policy(
    history_text: str,
    pair_text: str,
    prior: Policy | None,
    adapter,
) -> Policy | None:
    """Ask the adapter for a policy; enforce schema and the one-metric churn
    rule, retrying once.  Returns None when extraction is skipped."""
    parts = [
        "Optimization history:\n" + history_text,
        "Current comparison pair:\n" + pair_text,
        "Prior policy:\n" + (serialize_policy(prior) if prior else "none"),
        "Policy JSON schema:\n" + POLICY_SCHEMA_HINT,
        "Produce an evaluation policy. Relative to the prior policy you may add "
        "or remove at most one metric.",
    ]
    prompt = "\n\n".join(parts)
    from .llm import DEFAULT_TEMPERATURES, LlmRequest, parse_policy_response

    for attempt in range(2):
        text = prompt if attempt == 0 else (
            prompt + "\n\nREMINDER: reply with ONLY one valid policy JSON object, "
            "changing at most one metric relative to the prior policy."
        )
        response = adapter.complete(
            LlmRequest(
                system_text=POLICY_SYSTEM_PROMPT,
                user_text=text,
                request_tag="policy_extraction",
                temperature=DEFAULT_TEMPERATURES["policy_extraction"],
            )
        )
        try:
            candidate = parse_policy_response(response.text)
        except (ParseFailure, SchemaViolation, FormulaSyntaxError):
            continue
        if metric_churn(prior, candidate) > 1:
            continue
        version = (prior.version + 1) if prior else 1
        return Policy(
            version=version,
            metrics=candidate.metrics,
            formulas=candidate.formulas,
            scoring=candidate.scoring,
            aggregation=candidate.aggregation,
            tie_breakers=candidate.tie_breakers,
            provenance={"adapter_id": response.adapter_id},
        )
    return None


@dataclass
class ComponentStats:
    applications: int = 0
    successes: int = 0

    @property
    def success_rate(self) -> float:
        return self.successes / self.applications if self.applications else 0.0

    def to_dict(self) -> dict:
        return {
            "applications": self.applications,
            "successes": self.successes,
            "success_rate": self.success_rate,
        }


def screen_new_metric(
    metric_name: str,
    policy: Policy,
    labeled_pairs: list[PairedSample],
    dataset: Dataset,
    variables: list[str],
) -> tuple[bool, ComponentStats]:
    """Use the single metric in isolation on each labeled pair; keep it only
    if its orderings match the labels at a sufficient rate."""
    if len(labeled_pairs) < SCREEN_MIN_PAIRS:
        raise InsufficientPairs(f"need >= {SCREEN_MIN_PAIRS} labeled pairs")
    ast = policy.formula_ast(metric_name)
    stats = ComponentStats()
    for pair in labeled_pairs:
        if pair.preferred is None:
            raise ValueError(f"pair {pair.pair_id} is unlabeled")
        sides = {}
        for label, sid in (("A", pair.id_a), ("B", pair.id_b)):
            vals = []
            for var in variables:
                try:
                    vals.append(
                        eval_formula(
                            ast, dataset.predictions[sid][var], dataset.observations[var]
                        )
                    )
                except EvaluationError:
                    vals.append(float("-inf"))
            sides[label] = float(np.mean(vals))
        stats.applications += 1
        if sides["A"] != sides["B"]:
            predicted = "A" if sides["A"] > sides["B"] else "B"
            stats.successes += predicted == pair.preferred
    accept = stats.applications >= SCREEN_MIN_PAIRS and stats.success_rate >= SCREEN_THRESHOLD
    return accept, stats


@dataclass(frozen=True)
class ValidationDecision:
    accepted: bool
    wins: int
    runs: int
    rho_candidate: float
    rho_incumbent: float | None

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "wins": self.wins,
            "runs": self.runs,
            "rho_candidate": self.rho_candidate,
            "rho_incumbent": self.rho_incumbent,
        }


def _llm_policy_correlation(
    policy: Policy,
    dataset: Dataset,
    ids: tuple[str, ...],
    target: TargetRanking,
    variables: list[str],
    adapter,
) -> float | None:
    """One adapter-applied evaluation run; None when the reply is unusable."""
    from .llm import DEFAULT_TEMPERATURES, LlmRequest, iter_json_objects

    payload = {
        "policy": policy.to_dict(),
        "series": {
            sid: {
                var: list(dataset.predictions[sid][var].values) for var in variables
            }
            for sid in ids
        },
        "observations": {var: list(dataset.observations[var].values) for var in variables},
    }
    prompt = (
        "Apply the evaluation policy to every candidate series and reply with "
        'a JSON object {"scores": {series_id: number}}.\n\n' + json.dumps(payload)
    )
    response = adapter.complete(
        LlmRequest(
            system_text="You apply evaluation policies to time-series predictions.",
            user_text=prompt,
            request_tag="policy_evaluation",
            temperature=DEFAULT_TEMPERATURES["policy_evaluation"],
        )
    )
    for obj in iter_json_objects(response.text):
        if "scores" in obj and isinstance(obj["scores"], dict):
            try:
                scores = [float(obj["scores"][sid]) for sid in ids]
                targets = [target.score_of(sid) for sid in ids]
                return spearman(scores, targets)
            except (KeyError, TypeError, ValueError, DegenerateRanking):
                return None
    return None


def validate_policy(
    candidate: Policy,
    incumbent: Policy | None,
    dataset: Dataset,
    validation_ids: tuple[str, ...],
    target: TargetRanking,
    variables: list[str],
    runs: int = 5,
    adapter=None,
) -> ValidationDecision:
    """Multi-run validation: the candidate replaces the incumbent only when it
    wins at least 70% of runs.  A first-ever policy must beat zero correlation.

    Without an adapter the interpreter applies the policy, so every run is
    identical and the decision reduces to a single comparison.
    """
    if runs < 1:
        raise ValueError("runs must be >= 1")
    rho_incumbent = (
        policy_correlation(incumbent, dataset, validation_ids, target, variables)
        if incumbent is not None
        else None
    )
    bar = rho_incumbent if rho_incumbent is not None else 0.0
    wins = 0
    rho_candidate = float("nan")
    if adapter is None:
        rho_candidate = policy_correlation(candidate, dataset, validation_ids, target, variables)
        wins = runs if rho_candidate > bar else 0
    else:
        for _ in range(runs):
            rho = _llm_policy_correlation(
                candidate, dataset, validation_ids, target, variables, adapter
            )
            if rho is not None:
                rho_candidate = rho
                if rho > bar:
                    wins += 1
    accepted = wins / runs >= VALIDATION_THRESHOLD
    return ValidationDecision(
        accepted=accepted,
        wins=wins,
        runs=runs,
        rho_candidate=rho_candidate,
        rho_incumbent=rho_incumbent,
    )
