from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from math import lcm
from pathlib import Path

import pandas as pd
from sympy import divisors, factorint

from src.core.base import Process
from src.core.convolution import base_change_check, mc, mc_selfcheck, selfcheck_passed
from src.core.errors import HypothesisViolation, MonodromyError, ParseError, RankMismatch
from src.core.fields import apply_residue, find_embedding, make_finite_field, make_residue_map
from src.core.group_analysis import SL, SL_PLUS_MINUS, reduce_tuple, sl_certificate
from src.core.oracle import (
    check_hypotheses,
    compare_oracle,
    family_rank,
    instantiate_oracle,
    map_oracle,
    theorem_bound,
)
from src.core.tuples import (
    MonodromyTuple,
    change_field,
    construct_T,
    construct_rank_one,
    entry_jordan_data,
    tensor_rank_one,
)
from src.utils.logger import get_logger

logger = get_logger(__name__)

REPORT_SCHEMA = "mconv-report/1"
CONVOLUTION_PARAMETER = -1

# Steps applied left to right to the seed T_{m,r}.
FAMILY_RECIPES = {
    1: ("MC", "N1", "MC", "N2"),
    2: ("N5", "MC", "N3", "MC", "N4"),
    3: ("MC", "N5", "MC"),
    4: ("N5", "MC", "N5", "MC"),
}


class ConstructSeed(Process):
    name = "construct"

    def __init__(self, m: int, r: int):
        self.m = m
        self.r = r

    def apply(self, T=None):
        return construct_T(self.m, self.r)

    def describe(self) -> dict:
        return {"stage": self.name, "m": self.m, "r": self.r}


class Twist(Process):
    name = "twist"

    def __init__(self, pattern: str):
        self.pattern = pattern

    def apply(self, T):
        logger.info(f"Twisting rank-{T.n} tuple by {self.pattern}")
        return tensor_rank_one(T, construct_rank_one(self.pattern, T.r, T.field))

    def describe(self) -> dict:
        return {"stage": self.name, "pattern": self.pattern}


class Convolve(Process):
    name = "convolve"

    def __init__(self, lam=CONVOLUTION_PARAMETER):
        self.lam = lam

    def apply(self, T):
        return mc(T, self.lam)

    def describe(self) -> dict:
        return {"stage": self.name, "lambda": self.lam}


def family_stages(family: int, m: int, r: int) -> list[Process]:
    stages: list[Process] = [ConstructSeed(m, r)]
    for step in FAMILY_RECIPES[family]:
        stages.append(Convolve() if step == "MC" else Twist(step))
    return stages


def build_family(family: int, m: int, r: int) -> MonodromyTuple:
    check_hypotheses(family, m, r)
    T = None
    for stage in family_stages(family, m, r):
        T = stage.apply(T)
    expected = family_rank(family, r)
    if T.n != expected:
        raise RankMismatch(expected, T.n)
    logger.info(f"✅ Built G_{{{family},{m},{r}}} of rank {T.n}")
    return T


def _prime_power(q: int) -> tuple[int, int]:
    factors = factorint(q) if q > 1 else {}
    if len(factors) != 1:
        raise HypothesisViolation(f"q must be a prime power, got {q}")
    (ell, k), = factors.items()
    return int(ell), int(k)


@dataclass
class PipelineConfig:
    family: int
    m: int
    r: int
    q: int | None = None
    report_path: str | None = None
    eigenvalue_orders: list[int] | None = None
    mode: str | None = None
    selfcheck: bool = True

    def validate(self) -> None:
        check_hypotheses(self.family, self.m, self.r)
        if self.q is not None:
            _prime_power(self.q)
            if self.q - 1 != self.m:
                raise HypothesisViolation(f"residual analysis needs q - 1 = m, got q = {self.q}, m = {self.m}")
        if self.mode not in (None, SL, SL_PLUS_MINUS):
            raise HypothesisViolation(f"unknown certificate mode {self.mode!r}")
        if self.eigenvalue_orders is not None and not all(
            isinstance(o, int) and o > 0 for o in self.eigenvalue_orders
        ):
            raise HypothesisViolation("eigenvalue orders must be positive integers")

    @property
    def orders(self) -> list[int]:
        return list(self.eigenvalue_orders or divisors(lcm(4, self.m, 2)))

    @property
    def certificate_mode(self) -> str:
        if self.mode:
            return self.mode
        return SL if self.family in (1, 2) else SL_PLUS_MINUS

    @classmethod
    def from_dict(cls, data: dict) -> PipelineConfig:
        try:
            return cls(
                family=int(data["family"]),
                m=int(data["m"]),
                r=int(data["r"]),
                q=int(data["q"]) if data.get("q") is not None else None,
                report_path=data.get("report_path"),
                eigenvalue_orders=data.get("eigenvalue_orders"),
                mode=data.get("mode"),
                selfcheck=bool(data.get("selfcheck", True)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"invalid pipeline entry: {e}", "$")

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "m": self.m,
            "r": self.r,
            "q": self.q,
            "eigenvalue_orders": self.orders,
            "mode": self.certificate_mode if self.q is not None else None,
        }


@dataclass
class PipelineReport:
    config: dict
    schema: str = REPORT_SCHEMA
    stages: list = field(default_factory=list)
    rank: int | None = None
    jordan: list = field(default_factory=list)
    oracle: list = field(default_factory=list)
    oracle_match: bool | None = None
    residual: dict | None = None
    certificate: dict | None = None
    base_change: dict | None = None
    theorem_bound: dict | None = None
    notes: list = field(default_factory=list)
    error: dict | None = None
    timings: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        if self.error is not None or not self.oracle_match:
            return False
        if any(s.get("selfcheck") and not selfcheck_passed(s["selfcheck"]) for s in self.stages):
            return False
        if self.residual is not None and not self.residual.get("oracle_match"):
            return False
        if self.certificate is not None and not self.certificate["verdict"]:
            return False
        if self.base_change is not None and self.base_change["pass"] is False:
            return False
        return True

    def to_json(self, include_timings: bool = True) -> dict:
        doc = {
            "schema": self.schema,
            "config": self.config,
            "stages": self.stages,
            "rank": self.rank,
            "jordan": self.jordan,
            "oracle": self.oracle,
            "oracle_match": self.oracle_match,
            "residual": self.residual,
            "certificate": self.certificate,
            "base_change": self.base_change,
            "theorem_bound": self.theorem_bound,
            "notes": self.notes,
            "error": self.error,
            "verdict": self.verdict,
        }
        if include_timings:
            doc["timings"] = self.timings
        return doc

    def dumps(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_json(include_timings), indent=2)

    @classmethod
    def from_json(cls, doc: dict) -> PipelineReport:
        if not isinstance(doc, dict) or doc.get("schema") != REPORT_SCHEMA:
            raise ParseError(f"expected schema {REPORT_SCHEMA!r}", "$.schema")
        if "config" not in doc:
            raise ParseError("missing key 'config'", "$")
        known = {k: doc[k] for k in cls.__dataclass_fields__ if k in doc}
        return cls(**known)

    def oracle_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.oracle, columns=["index", "expected", "computed", "match"])

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps(), encoding="utf-8")
        logger.info(f"📝 Report written → {path}")
        return path


def _timed(report: PipelineReport, label: str, fn, *args):
    start = time.perf_counter()
    try:
        return fn(*args)
    finally:
        report.timings[label] = round(time.perf_counter() - start, 3)


def _residual_tuple(T: MonodromyTuple, rmap, q: int) -> tuple[MonodromyTuple, MonodromyTuple]:
    """Reduction over the residue field and its descent to F_q when the residue field is larger."""
    reduced = reduce_tuple(T, rmap)
    if rmap.target.size == q:
        return reduced, reduced
    ell, k = _prime_power(q)
    embedding = find_embedding(make_finite_field(ell, k), rmap.target)
    return reduced, change_field(reduced, embedding, "descend")


def _run_residual(config: PipelineConfig, report: PipelineReport, seed, T, expected) -> None:
    q = config.q
    ell, _ = _prime_power(q)
    rmap = make_residue_map(T.field, ell)
    reduced, over_q = _timed(report, "reduce", _residual_tuple, T, rmap, q)
    computed = _timed(report, "residual_jordan", entry_jordan_data, reduced, config.orders)
    rows = compare_oracle(map_oracle(expected, lambda x: apply_residue(rmap, x)), computed)
    report.residual = {
        "residue_field": str(rmap.target),
        "field": str(over_q.field),
        "descended": over_q.field != reduced.field,
        "zeta_image": rmap.image_of_root.to_json(),
        "jordan": [jd.to_json() for jd in computed],
        "oracle": rows,
        "oracle_match": all(row["match"] for row in rows),
    }
    _, seed_over_q = _residual_tuple(seed, rmap, q)
    cert = _timed(
        report, "certificate", sl_certificate, over_q, config.certificate_mode, None, seed_over_q
    )
    report.certificate = cert.to_json()
    report.base_change = _timed(
        report, "base_change", base_change_check, seed, CONVOLUTION_PARAMETER, rmap
    )
    bound = theorem_bound(q)
    report.theorem_bound = {"bound": bound, "n": T.n, "exceeds": T.n > bound}


def run_pipeline(config: PipelineConfig) -> PipelineReport:
    config.validate()
    report = PipelineReport(config=config.to_json())
    logger.info(f"🚀 Pipeline family {config.family}, m = {config.m}, r = {config.r}, q = {config.q}")
    current = "construct"
    try:
        T = seed = None
        for index, stage in enumerate(family_stages(config.family, config.m, config.r), start=1):
            current = f"{index}:{stage.name}"
            previous = T
            T = _timed(report, current, stage.apply, T)
            if seed is None:
                seed = T
            record = {**stage.describe(), "rank": T.n}
            if isinstance(stage, Convolve) and config.selfcheck:
                record["selfcheck"] = _timed(
                    report, f"{current}:selfcheck", mc_selfcheck, previous, stage.lam, T
                )
            report.stages.append(record)

        report.rank = T.n
        expected_rank = family_rank(config.family, config.r)
        if T.n != expected_rank:
            raise RankMismatch(expected_rank, T.n)

        current = "jordan"
        computed = _timed(report, current, entry_jordan_data, T, config.orders)
        for i, jd in enumerate(computed, start=1):
            logger.debug(f"Entry {i}: {jd}")
        report.jordan = [jd.to_json() for jd in computed]
        expected = instantiate_oracle(config.family, config.m, config.r)
        report.oracle = compare_oracle(expected, computed)
        report.oracle_match = all(row["match"] for row in report.oracle)

        if config.family in (1, 2):
            report.notes.append("all entries have determinant 1; no determinant twist applied")
        if T.n % 2:
            report.notes.append("odd rank: a determinant twist of the arithmetic realization lands in SL")

        if config.q is not None:
            current = "residual"
            _run_residual(config, report, seed, T, expected)
    except HypothesisViolation:
        raise
    except MonodromyError as e:
        logger.error(f"❌ Pipeline failed at {current}: {e}")
        report.error = {"stage": current, "type": type(e).__name__, "message": str(e)}

    logger.info(f"{'✅' if report.verdict else '❌'} Pipeline verdict: {report.verdict}")
    if config.report_path:
        report.write(config.report_path)
    return report
